//! Flat `key=value` experiment configuration. A config file supplies
//! defaults, command-line flags override it, and the resolved settings are
//! validated before anything runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cellprobe_core::chronogram::ProblemKind;
use cellprobe_core::structures::{NaiveArtificial, TwoLevelPrefixSum};

/// A configuration problem; the CLI maps it to the usage exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Lattice,
    Family,
    Chronogram,
    Encode,
    Grid,
    Replay,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Lattice,
        Experiment::Family,
        Experiment::Chronogram,
        Experiment::Encode,
        Experiment::Grid,
        Experiment::Replay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Lattice => "lattice",
            Experiment::Family => "family",
            Experiment::Chronogram => "chronogram",
            Experiment::Encode => "encode",
            Experiment::Grid => "grid",
            Experiment::Replay => "replay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

/// Keys accepted in a config file or as flags.
pub const KNOWN_KEYS: [&str; 20] = [
    "experiment",
    "kind",
    "n",
    "beta",
    "w",
    "seed",
    "structure",
    "istar",
    "trials",
    "out",
    "m",
    "c",
    "queries",
    "updates",
    "budget",
    "tries",
    "threshold",
    "flag_threshold",
    "selection",
    "workload",
];

/// Keys with these prefixes are written by the run manifest and ignored on
/// load, so a manifest can be fed back as a config file.
const IGNORED_PREFIXES: [&str; 2] = ["manifest.", "result."];

/// Raw settings in insertion-independent (sorted) order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("config line {}: expected key=value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if IGNORED_PREFIXES.iter().any(|p| k.starts_with(p)) {
                continue;
            }
            if !KNOWN_KEYS.contains(&k) {
                return Err(bad(format!("config line {}: unknown key {k:?}", i + 1)));
            }
            if map.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(bad(format!("config line {}: duplicate key {k:?}", i + 1)));
            }
        }
        Ok(Settings(map))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_owned(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| bad(format!("{key}: cannot parse {v:?}"))))
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str, exp: Experiment) -> Result<T, ConfigError> {
        self.typed(key)?
            .ok_or_else(|| bad(format!("{} requires --{key}", exp.as_str())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncoderFlag {
    /// Raise the flag when the mean probe count exceeds this value.
    Threshold(f64),
    /// Always send raw weights.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    CrossOut,
    Greedy,
}

/// A validated experiment configuration. Per-experiment defaults are filled
/// in, and `settings` holds the resolved key set echoed into the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub kind: ProblemKind,
    pub n: u64,
    pub beta: f64,
    pub w: Option<u32>,
    pub seed: u64,
    pub structure: String,
    pub istar: Option<u32>,
    pub trials: usize,
    pub out: PathBuf,
    pub m: Option<u64>,
    pub c: f64,
    pub queries: usize,
    pub updates: usize,
    pub budget: f64,
    pub tries: usize,
    pub threshold: Option<f64>,
    pub flag: EncoderFlag,
    pub selection: Selection,
    pub workload: Option<PathBuf>,
    pub settings: Settings,
}

fn structure_kind(id: &str) -> Option<ProblemKind> {
    match id {
        NaiveArtificial::ID => Some(ProblemKind::Artificial),
        TwoLevelPrefixSum::ID => Some(ProblemKind::Orc),
        _ => None,
    }
}

fn default_structure(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Artificial => NaiveArtificial::ID,
        ProblemKind::Orc => TwoLevelPrefixSum::ID,
    }
}

impl ExperimentConfig {
    pub fn resolve(experiment: Experiment, settings: &Settings) -> Result<Self, ConfigError> {
        let s = settings;
        if let Some(e) = s.get("experiment") {
            if e != experiment.as_str() {
                return Err(bad(format!("config is for {e:?}, not {:?}", experiment.as_str())));
            }
        }
        let n: u64 = match experiment {
            Experiment::Replay => s.typed("n")?.unwrap_or(64),
            _ => s.required("n", experiment)?,
        };
        if n < 4 {
            return Err(bad("n must be at least 4"));
        }

        let structure_key: Option<String> = s.typed("structure")?;
        let kind_key: Option<String> = s.typed("kind")?;
        let kind_from_key = kind_key
            .as_deref()
            .map(|k| ProblemKind::parse(k).ok_or_else(|| bad(format!("kind: expected artificial or orc, got {k:?}"))))
            .transpose()?;
        let kind_from_structure = structure_key
            .as_deref()
            .map(|id| structure_kind(id).ok_or_else(|| bad(format!("structure: unknown id {id:?}"))))
            .transpose()?;
        let kind = match (kind_from_key, kind_from_structure) {
            (Some(a), Some(b)) if a != b => return Err(bad("kind and structure disagree")),
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => ProblemKind::Orc,
        };
        let structure = structure_key.unwrap_or_else(|| default_structure(kind).to_owned());

        let beta: f64 = match experiment {
            Experiment::Chronogram | Experiment::Encode => s.required("beta", experiment)?,
            _ => s.typed("beta")?.unwrap_or(2.0),
        };
        if !beta.is_finite() || beta <= 1.0 {
            return Err(bad("beta must be a finite number above 1"));
        }
        let istar: Option<u32> = s.typed("istar")?;
        if istar == Some(0) {
            return Err(bad("istar must be at least 1"));
        }
        if experiment == Experiment::Grid && istar.is_none() {
            return Err(bad("grid requires --istar"));
        }
        let w: Option<u32> = s.typed("w")?;
        if let Some(w) = w {
            if !(1..=64).contains(&w) {
                return Err(bad("w must be in 1..=64"));
            }
        }
        let default_trials = match experiment {
            Experiment::Family => 200,
            Experiment::Grid => 100,
            Experiment::Chronogram => 256,
            _ => 1,
        };
        let trials = s.typed("trials")?.unwrap_or(default_trials);
        if trials == 0 {
            return Err(bad("trials must be positive"));
        }
        let c: f64 = s.typed("c")?.unwrap_or(cellprobe_core::family::DEFAULT_INDEPENDENCE_CONSTANT);
        if c.is_nan() || c <= 0.0 {
            return Err(bad("c must be positive"));
        }
        let budget: f64 = s.typed("budget")?.unwrap_or(match kind {
            ProblemKind::Artificial => 0.75,
            ProblemKind::Orc => 0.9,
        });
        if !(budget > 0.0 && budget <= 1.0) {
            return Err(bad("budget is a fraction of the epoch's cells in (0, 1]"));
        }
        let flag = match s.get("flag_threshold") {
            None | Some("inf") => EncoderFlag::Threshold(f64::INFINITY),
            Some("raw") => EncoderFlag::Raw,
            Some(v) => EncoderFlag::Threshold(v.parse().map_err(|_| bad(format!("flag_threshold: cannot parse {v:?}")))?),
        };
        let selection = match s.get("selection").unwrap_or("crossout") {
            "crossout" => Selection::CrossOut,
            "greedy" => Selection::Greedy,
            v => return Err(bad(format!("selection: expected crossout or greedy, got {v:?}"))),
        };
        let workload: Option<PathBuf> = s.typed("workload")?;
        let config = ExperimentConfig {
            experiment,
            kind,
            n,
            beta,
            w,
            seed: s.typed("seed")?.unwrap_or(1),
            structure,
            istar,
            trials,
            out: s.typed("out")?.unwrap_or_else(|| PathBuf::from("out")),
            m: s.typed("m")?,
            c,
            queries: s.typed("queries")?.unwrap_or(2048),
            updates: s.typed("updates")?.unwrap_or(500),
            budget,
            tries: s.typed("tries")?.unwrap_or(8).max(1),
            threshold: s.typed("threshold")?,
            flag,
            selection,
            workload,
            settings: Settings::default(),
        };
        Ok(ExperimentConfig {
            settings: config.to_settings(),
            ..config
        })
    }

    /// The fully resolved settings, suitable for writing back as a config.
    pub fn to_settings(&self) -> Settings {
        let mut s = Settings::default();
        s.set("experiment", self.experiment.as_str());
        s.set("kind", self.kind.as_str());
        s.set("n", self.n);
        s.set("beta", self.beta);
        if let Some(w) = self.w {
            s.set("w", w);
        }
        s.set("seed", self.seed);
        s.set("structure", &self.structure);
        if let Some(i) = self.istar {
            s.set("istar", i);
        }
        s.set("trials", self.trials);
        s.set("out", self.out.display());
        if let Some(m) = self.m {
            s.set("m", m);
        }
        s.set("c", self.c);
        s.set("queries", self.queries);
        s.set("updates", self.updates);
        s.set("budget", self.budget);
        s.set("tries", self.tries);
        if let Some(t) = self.threshold {
            s.set("threshold", t);
        }
        s.set(
            "flag_threshold",
            match self.flag {
                EncoderFlag::Raw => "raw".to_owned(),
                EncoderFlag::Threshold(t) if t.is_infinite() => "inf".to_owned(),
                EncoderFlag::Threshold(t) => t.to_string(),
            },
        );
        s.set(
            "selection",
            match self.selection {
                Selection::CrossOut => "crossout",
                Selection::Greedy => "greedy",
            },
        );
        if let Some(p) = &self.workload {
            s.set("workload", p.display());
        }
        s
    }
}
