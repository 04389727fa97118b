//! Experiment runners behind the CLI subcommands. Each writes its artifacts
//! and a manifest into the output directory and fails with
//! [`InvariantFailure`] when a checked property does not hold.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use cellprobe_core::chronogram::{
    epoch_probe_profile, incidence_vector, naive_expected_counts, run_hard_distribution, sample_queries,
    EpochSchedule, ProbeProfile, ProblemKind, RunRecord,
};
use cellprobe_core::family::{build_query_family, check_suffix_independence, QueryFamily, QueryFamilyParams};
use cellprobe_core::field::{ff_rank, FieldMatrix, PrimeModulus};
use cellprobe_core::game::{
    decode_epoch, encode_epoch, entropy_account, find_resolved_set, EncodeOptions, EncodeReport, EncodingMessage,
    FlagPolicy, GameContext, QuerySelection, ResolveOptions, SectionKind,
};
use cellprobe_core::grid::{
    cross_out_extract, grid_family_for_epoch, hitting_number, sample_slab_queries, slab_count,
    well_separated_subset,
};
use cellprobe_core::lattice::{scaled_lattice, snap_to_fibonacci, sweep_lattice_rectangles, LatticeSpec, Point};
use cellprobe_core::memory::{MemoryConfig, ProbeTrace};
use cellprobe_core::structures::{
    brute_force_oracle, random_workload, replay_workload, run_query, DynamicStructure, NaiveArtificial, Query,
    TwoLevelPrefixSum,
};

use crate::config::{EncoderFlag, Experiment, ExperimentConfig, Selection};
use crate::formats::{self, GridRow, TrialRow};
use crate::manifest::RunManifest;

/// A checked property that did not hold. The CLI exits with status 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantFailure(pub String);

impl fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invariant failed: {}", self.0)
    }
}

impl std::error::Error for InvariantFailure {}

fn ensure_invariant(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(InvariantFailure(what()).into())
    }
}

pub type BoxedStructure = Box<dyn DynamicStructure + Send + Sync>;

/// Everything a run needs besides the seed: schedule, field, family and the
/// structure with its memory layout.
pub struct Setup {
    pub kind: ProblemKind,
    pub schedule: EpochSchedule,
    pub modulus: PrimeModulus,
    pub family: Option<Arc<QueryFamily>>,
    pub structure: BoxedStructure,
    pub config: MemoryConfig,
}

impl Setup {
    /// Range counting snaps every epoch to a Fibonacci size and sizes its
    /// counters for the snapped total. `w` overrides the preferred word size.
    pub fn new(
        kind: ProblemKind,
        n: u64,
        beta: f64,
        w: Option<u32>,
        independence_constant: f64,
        family_seed: u64,
    ) -> Result<Self> {
        let modulus = PrimeModulus::for_points(n)?;
        let schedule = EpochSchedule::new(n, beta)?;
        match kind {
            ProblemKind::Artificial => {
                let params = QueryFamilyParams::new(n as usize, modulus, independence_constant, family_seed)?;
                let family = Arc::new(build_query_family(&params)?);
                Self::artificial(schedule, family, w)
            }
            ProblemKind::Orc => {
                let schedule = schedule.snapped_to_fibonacci();
                let capacity = schedule.total();
                let config = match w {
                    Some(w) => MemoryConfig::with_word_bits(n, w)?,
                    None => TwoLevelPrefixSum::preferred_config(n as usize, modulus, capacity)?,
                };
                let ds = TwoLevelPrefixSum::new(n as usize, modulus, capacity, config)?;
                Ok(Setup {
                    kind,
                    schedule,
                    modulus,
                    family: None,
                    structure: Box::new(ds),
                    config,
                })
            }
        }
    }

    pub fn artificial(schedule: EpochSchedule, family: Arc<QueryFamily>, w: Option<u32>) -> Result<Self> {
        let config = match w {
            Some(w) => MemoryConfig::with_word_bits(schedule.n(), w)?,
            None => NaiveArtificial::preferred_config(&family),
        };
        let ds = NaiveArtificial::new(family.clone(), config)?;
        Ok(Setup {
            kind: ProblemKind::Artificial,
            modulus: family.params().modulus,
            schedule,
            family: Some(family),
            structure: Box::new(ds),
            config,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let s = Self::new(cfg.kind, cfg.n, cfg.beta, cfg.w, cfg.c, cfg.seed)?;
        if s.structure.id() != cfg.structure {
            anyhow::bail!(crate::config::ConfigError(format!(
                "structure {:?} does not solve the {} problem",
                cfg.structure,
                cfg.kind.as_str()
            )));
        }
        Ok(s)
    }

    pub fn ds(&self) -> &dyn DynamicStructure {
        &*self.structure
    }

    pub fn family_len(&self) -> usize {
        self.family.as_ref().map_or(0, |f| f.len())
    }

    pub fn run(&self, seed: u64) -> Result<RunRecord> {
        Ok(run_hard_distribution(self.kind, &self.schedule, self.modulus, seed, self.ds(), self.config)?)
    }

    pub fn context(&self) -> GameContext<'_> {
        GameContext {
            kind: self.kind,
            schedule: self.schedule.clone(),
            modulus: self.modulus,
            family: self.family.clone(),
            structure: self.ds(),
            config: self.config,
        }
    }
}

/// `Σ_i ⟨inc_i(q), u_i⟩` over the integers.
pub fn decomposed_answer(run: &RunRecord, q: Point) -> Result<u128> {
    let mut sum = 0u128;
    for e in &run.epochs {
        let inc = incidence_vector(&run.points(e.epoch)?, q, run.modulus)?;
        sum += inc
            .coords()
            .iter()
            .zip(e.weights())
            .map(|(&b, w)| b as u128 * w as u128)
            .sum::<u128>();
    }
    Ok(sum)
}

/// Checks a probe profile against independent recomputation: answers
/// against the brute-force oracle, per-epoch counts against the analytic
/// counts (naive structure), the per-epoch split against a fresh distinct
/// count of the query's probes, and for range counting the decomposition of
/// each answer over epochs.
pub fn check_profile(setup: &Setup, run: &RunRecord, profile: &ProbeProfile) -> Result<()> {
    let log = run.log();
    let naive = setup.family.as_ref().map(|f| {
        let config = setup.config;
        (f.clone(), NaiveArtificial::new(f.clone(), config))
    });
    for (idx, (q, counts)) in profile.queries.iter().zip(&profile.per_query).enumerate() {
        let answer = profile.answers[idx];
        let oracle = brute_force_oracle(&log, q, setup.family.as_deref())?;
        ensure_invariant(answer == oracle, || format!("query {q:?}: structure {answer}, oracle {oracle}"))?;

        let mut trace = ProbeTrace::new();
        run_query(setup.ds(), &run.memory, &mut trace, 0, q)?;
        let distinct: BTreeSet<u64> = trace.entries().iter().map(|e| e.address).collect();
        let split: usize = (1..=run.schedule.count()).map(|i| counts.get(i)).sum::<usize>() + counts.unwritten;
        ensure_invariant(split == distinct.len(), || {
            format!("query {q:?}: per-epoch counts sum to {split}, {} distinct cells probed", distinct.len())
        })?;

        match (*q, &naive) {
            (Query::Vector(j), Some((fam, Ok(ds)))) => {
                let expected = naive_expected_counts(run, ds, fam, j);
                for i in 1..=run.schedule.count() {
                    let want = expected.get(&i).copied().unwrap_or(0);
                    ensure_invariant(counts.get(i) == want, || {
                        format!("query {j}: t_{i} measured {}, analytic {want}", counts.get(i))
                    })?;
                }
            }
            (Query::Dominance(p), _) => {
                let sum = decomposed_answer(run, p)?;
                ensure_invariant(sum == answer, || format!("query {p:?}: epochs sum to {sum}, answer {answer}"))?;
            }
            _ => {}
        }
    }
    Ok(())
}

/// One encode/decode round.
#[derive(Debug, Clone)]
pub struct Round {
    pub message: EncodingMessage,
    pub report: EncodeReport,
    pub exact: bool,
    pub decode_error: Option<String>,
    pub h_bits: f64,
    pub message_bits: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RoundOptions {
    pub queries: usize,
    /// `None` skips the search for a resolved set.
    pub resolve: Option<ResolveOptions>,
    pub encode: EncodeOptions,
    /// Flips a payload bit after encoding, to prove the check can fail.
    pub inject_fault: bool,
}

/// Encodes epoch `istar`, passes the message through its byte serialization,
/// decodes with the encoder's memory as auditor and compares.
pub fn play_round(setup: &Setup, run: &RunRecord, istar: u32, opts: &RoundOptions) -> Result<Round> {
    let ctx = setup.context();
    let sample = sample_queries(setup.kind, setup.schedule.n(), setup.family_len(), opts.queries, run.seed);
    let profile = epoch_probe_profile(run, setup.ds(), &sample)?;
    let resolved = opts
        .resolve
        .and_then(|o| find_resolved_set(run, setup.ds(), istar, &sample, &o).ok());
    let (message, report) = encode_epoch(&ctx, run, istar, resolved.as_ref(), profile.mean(istar), &opts.encode)?;
    let mut received = formats::message_from_bytes(&formats::message_to_bytes(&message))?;
    if opts.inject_fault {
        let raw = received.header.flag;
        let target = if raw {
            SectionKind::RawWeights
        } else {
            SectionKind::InnerProducts
        };
        if let Some(s) = received.section_mut(target) {
            if !s.bits.is_empty() {
                let bit = if raw { 0 } else { 7.min(s.bits.len() - 1) };
                s.bits.flip(bit);
            }
        }
    }
    let decoded = decode_epoch(&received, &ctx, run.prefix(istar), Some(&run.memory));
    let (exact, decode_error) = match decoded {
        Ok(u) => (&u == run.epoch(istar)?, None),
        Err(e) => (false, Some(e.to_string())),
    };
    let acct = entropy_account(&setup.schedule, istar, setup.modulus, &message);
    Ok(Round {
        message,
        report,
        exact,
        decode_error,
        h_bits: acct.h_bits,
        message_bits: acct.message_bits,
        slack: acct.slack,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    prepare_out(&cfg.out)?;
    let mut manifest = RunManifest::new(cfg);
    let outcome = match cfg.experiment {
        Experiment::Lattice => lattice(cfg, &mut manifest),
        Experiment::Family => family(cfg, &mut manifest),
        Experiment::Chronogram => chronogram(cfg, &mut manifest),
        Experiment::Encode => encode(cfg, &mut manifest),
        Experiment::Grid => grid(cfg, &mut manifest),
        Experiment::Replay => replay(cfg, &mut manifest),
    };
    if let Err(e) = &outcome {
        manifest.result("status", "failed");
        manifest.result("error", e.to_string().replace('\n', " "));
    } else {
        manifest.result("status", "ok");
    }
    manifest.write(&cfg.out)?;
    outcome.map(|_| manifest)
}

fn lattice(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let m = cfg.m.unwrap_or_else(|| snap_to_fibonacci((cfg.n / 8).max(1)));
    let spec = LatticeSpec::new(m, cfg.n)?;
    let points = scaled_lattice(&spec);
    let path = cfg.out.join("lattice.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(formats::LATTICE_HEADER)?;
    for (j, p) in points.points.iter().enumerate() {
        w.write_record([j.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush()?;
    manifest.artifact("lattice.csv");

    let sweep = sweep_lattice_rectangles(&spec)?;
    manifest.result("m", m);
    manifest.result("rectangles", sweep.rectangles);
    manifest.result("failures", sweep.failures);
    ensure_invariant(sweep.failures == 0, || {
        format!(
            "{} of {} rectangles violate the area bounds, first {:?}",
            sweep.failures, sweep.rectangles, sweep.first_failure
        )
    })
}

fn family(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let modulus = PrimeModulus::for_points(cfg.n)?;
    manifest.modulus = Some(modulus.value());
    let params = QueryFamilyParams::new(cfg.n as usize, modulus, cfg.c, cfg.seed)?;
    let fam = build_query_family(&params)?;
    let path = cfg.out.join("family.txt");
    formats::write_family(&path, &fam)?;
    manifest.artifact("family.txt");
    let back = formats::read_family(&path)?;
    ensure_invariant(back.vectors() == fam.vectors(), || "family file does not read back".into())?;

    let mut checked = 0;
    let mut violations = 0;
    for k in params.suffix_lengths() {
        let bound = params.subset_bound(k);
        if bound == 0 {
            continue;
        }
        let r = check_suffix_independence(&fam, k, bound, cfg.trials, cfg.seed)?;
        checked += r.trials;
        violations += r.violations;
        ensure_invariant(r.violations == 0, || {
            format!("suffix length {k}: {} of {} subsets dependent, witness {:?}", r.violations, r.trials, r.witness)
        })?;
    }
    manifest.result("vectors", fam.len());
    manifest.result("subsets_checked", checked);
    manifest.result("violations", violations);
    Ok(())
}

fn chronogram(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let setup = Setup::from_config(cfg)?;
    manifest.modulus = Some(setup.modulus.value());
    manifest.epoch_sizes = setup.schedule.sizes().to_vec();
    let run = setup.run(cfg.seed)?;
    formats::write_trace(&cfg.out.join("trace.csv"), run.trace.entries())?;
    manifest.artifact("trace.csv");

    let queries = sample_queries(setup.kind, cfg.n, setup.family_len(), cfg.queries, cfg.seed);
    let profile = epoch_probe_profile(&run, setup.ds(), &queries)?;
    formats::write_profile(&cfg.out.join("profile.csv"), &profile.rows())?;
    manifest.artifact("profile.csv");
    manifest.result("word_bits", setup.config.word_bits());
    manifest.result("declared_t_u", setup.ds().declared_update_bound());
    manifest.result("declared_t_q", setup.ds().declared_query_bound());
    manifest.result("total_mean_t", format!("{:.6}", profile.total_mean()));
    check_profile(&setup, &run, &profile)
}

fn encoder_options(cfg: &ExperimentConfig) -> EncodeOptions {
    EncodeOptions {
        flag_policy: match cfg.flag {
            EncoderFlag::Raw => FlagPolicy::AlwaysRaw,
            EncoderFlag::Threshold(t) => FlagPolicy::Threshold(t),
        },
        selection: match cfg.selection {
            Selection::CrossOut => QuerySelection::CrossOut,
            Selection::Greedy => QuerySelection::Greedy,
        },
        independence_constant: cfg.c,
    }
}

/// Second-largest epoch, or epoch 1 for two-epoch schedules.
pub fn default_istar(schedule: &EpochSchedule) -> u32 {
    schedule.count().saturating_sub(1).max(1)
}

fn encode(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let setup = Setup::from_config(cfg)?;
    manifest.modulus = Some(setup.modulus.value());
    manifest.epoch_sizes = setup.schedule.sizes().to_vec();
    let istar = cfg.istar.unwrap_or_else(|| default_istar(&setup.schedule));
    if istar > setup.schedule.count() {
        anyhow::bail!(crate::config::ConfigError(format!(
            "istar {istar} above the {} epochs of this schedule",
            setup.schedule.count()
        )));
    }
    let run = setup.run(cfg.seed)?;
    let cells = run.memory.cells_of_epoch(istar).len();
    let opts = RoundOptions {
        queries: cfg.queries,
        resolve: Some(ResolveOptions {
            cell_budget: ((cells as f64 * cfg.budget).ceil() as usize).max(1),
            probe_threshold: cfg.threshold.unwrap_or(f64::INFINITY),
            max_tries: cfg.tries,
            seed: cfg.seed,
        }),
        encode: encoder_options(cfg),
        inject_fault: false,
    };
    let round = play_round(&setup, &run, istar, &opts)?;
    formats::write_message(&cfg.out.join("message.bin"), &round.message)?;
    manifest.artifact("message.bin");
    manifest.result("istar", istar);
    manifest.result("flag", round.message.header.flag as u8);
    manifest.result("mean_probes", format!("{:.6}", round.report.mean_probes));
    manifest.result("resolved_queries", round.report.resolved_queries);
    manifest.result("shipped_queries", round.report.shipped_queries);
    for s in &round.message.sections {
        manifest.result(&format!("bits.{}", s.kind.label()), s.bits.len());
    }
    manifest.result("message_bits", round.message_bits);
    manifest.result("h_bits", format!("{:.3}", round.h_bits));
    manifest.result("slack", format!("{:.3}", round.slack));
    manifest.result("recovery", if round.exact { "exact" } else { "mismatch" });
    ensure_invariant(round.exact, || {
        format!(
            "decoded epoch {istar} differs from the encoded one{}",
            round.decode_error.map(|e| format!(" ({e})")).unwrap_or_default()
        )
    })
}

/// Fibonacci lattice size for epoch `i`: `m` when given, else the snapped
/// `β^i`.
fn grid_lattice_size(cfg: &ExperimentConfig, i: u32) -> u64 {
    cfg.m
        .unwrap_or_else(|| snap_to_fibonacci(cfg.beta.powi(i as i32).round() as u64))
}

fn grid(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let i = cfg.istar.expect("grid requires istar");
    let (n, m) = (cfg.n, grid_lattice_size(cfg, i));
    let beta = (m as f64).powf(1.0 / i as f64);
    let modulus = PrimeModulus::for_points(n)?;
    manifest.modulus = Some(modulus.value());
    let points = scaled_lattice(&LatticeSpec::new(m, n)?).points;
    let family = grid_family_for_epoch(n, m, i)?;
    let threshold = (n as f64).powi(2) / beta.powf(i as f64 - 0.5);

    let mut grid_rows = Vec::new();
    let mut trial_rows = Vec::new();
    let mut separated = 0;
    for t in 0..cfg.trials {
        let sample = sample_slab_queries(n, beta, i, cfg.seed.wrapping_add(t as u64))?;
        let mut best: Vec<Point> = Vec::new();
        for (j, g) in &family.grids {
            let report = cross_out_extract(&sample.queries, g);
            if t == 0 {
                grid_rows.push(GridRow {
                    grid_j: *j,
                    mu: g.width.to_f64(),
                    gamma: g.height.to_f64(),
                    hitting_number: hitting_number(&sample.queries, g),
                });
            }
            ensure_invariant(16 * report.survivors.len() + report.boundary_removed >= report.hit, || {
                format!(
                    "trial {t}, grid {j}: {} survivors from {} hits with {} boundary removals",
                    report.survivors.len(),
                    report.hit,
                    report.boundary_removed
                )
            })?;
            let rank = incidence_rank(&points, &report.survivors, modulus)?;
            ensure_invariant(rank == report.survivors.len(), || {
                format!("trial {t}, grid {j}: rank {rank} for {} queries", report.survivors.len())
            })?;
            if report.survivors.len() > best.len() {
                best = report.survivors;
            }
        }
        let ws = well_separated_subset(&sample.queries, threshold);
        separated += ws.flag as usize;
        trial_rows.push(TrialRow {
            trial: t,
            queries: best.len(),
            rank: incidence_rank(&points, &best, modulus)?,
            well_separated_fraction: ws.queries.len() as f64 / sample.queries.len() as f64,
        });
    }
    formats::write_grid(&cfg.out.join("grid.csv"), &grid_rows)?;
    formats::write_trials(&cfg.out.join("trials.csv"), &trial_rows)?;
    manifest.artifact("grid.csv");
    manifest.artifact("trials.csv");
    manifest.result("lattice_m", m);
    manifest.result("slabs", slab_count(beta, i));
    manifest.result("grids", family.grids.len());
    manifest.result("grid_dims_exact", family.exact);
    manifest.result(
        "well_separated_frequency",
        format!("{:.4}", separated as f64 / cfg.trials as f64),
    );
    Ok(())
}

pub fn incidence_rank(points: &[Point], queries: &[Point], modulus: PrimeModulus) -> Result<usize> {
    let rows = queries
        .iter()
        .map(|&q| incidence_vector(points, q, modulus))
        .collect::<cellprobe_core::Result<Vec<_>>>()?;
    Ok(ff_rank(&FieldMatrix::from_rows(modulus, points.len(), rows)?))
}

fn replay(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let modulus = PrimeModulus::for_points(cfg.n)?;
    manifest.modulus = Some(modulus.value());
    let family = match cfg.kind {
        ProblemKind::Artificial => {
            let params = QueryFamilyParams::new(cfg.n as usize, modulus, cfg.c, cfg.seed)?;
            Some(Arc::new(build_query_family(&params)?))
        }
        ProblemKind::Orc => None,
    };
    let ops = match &cfg.workload {
        Some(path) => formats::read_workload(path)?,
        None => {
            let ops = random_workload(cfg.n as usize, modulus, family.as_deref(), cfg.updates, cfg.queries, cfg.seed);
            formats::write_workload(&cfg.out.join("workload.csv"), &ops)?;
            manifest.artifact("workload.csv");
            ops
        }
    };
    let updates = ops
        .iter()
        .filter(|o| matches!(o, cellprobe_core::structures::WorkloadOp::Update(_)))
        .count() as u64;
    let (ds, config): (BoxedStructure, MemoryConfig) = match &family {
        Some(f) => {
            let config = match cfg.w {
                Some(w) => MemoryConfig::with_word_bits(cfg.n, w)?,
                None => NaiveArtificial::preferred_config(f),
            };
            (Box::new(NaiveArtificial::new(f.clone(), config)?), config)
        }
        None => {
            let capacity = updates.max(1);
            let config = match cfg.w {
                Some(w) => MemoryConfig::with_word_bits(cfg.n, w)?,
                None => TwoLevelPrefixSum::preferred_config(cfg.n as usize, modulus, capacity)?,
            };
            (Box::new(TwoLevelPrefixSum::new(cfg.n as usize, modulus, capacity, config)?), config)
        }
    };
    let outcome = replay_workload(&*ds, config, &ops, family.as_deref())?;
    formats::write_trace(&cfg.out.join("trace.csv"), outcome.trace.entries())?;
    manifest.artifact("trace.csv");
    manifest.result("operations", ops.len());
    manifest.result("max_update_probes", outcome.max_update_probes);
    manifest.result("max_query_probes", outcome.max_query_probes);
    manifest.result("declared_t_u", ds.declared_update_bound());
    manifest.result("declared_t_q", ds.declared_query_bound());
    manifest.result("mismatches", outcome.mismatches());
    ensure_invariant(outcome.mismatches() == 0, || {
        format!("{} answers differ from the oracle", outcome.mismatches())
    })
}
