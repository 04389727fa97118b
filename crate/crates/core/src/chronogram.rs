//! Epoch schedules, the hard update distributions, and per-epoch probe
//! profiles.
//!
//! Epoch `count` runs first and epoch 1 last. Every epoch below the top has
//! `⌊β^i⌋` updates and the top epoch takes the remainder.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::family::QueryFamily;
use crate::field::{FieldVector, PrimeModulus};
use crate::lattice::{scaled_lattice, snap_to_fibonacci, LatticeSpec, Point};
use crate::memory::{probe_counts_by_epoch, EpochCounts, EpochId, MemoryConfig, ProbeTrace, SimulatedMemory};
use crate::rng::{self, Stream};
use crate::structures::{apply_update, run_query, DynamicStructure, NaiveArtificial, Query, Update};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Inner products with a fixed query family.
    Artificial,
    /// Two-dimensional dominance range counting.
    Orc,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Artificial => "artificial",
            ProblemKind::Orc => "orc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "artificial" => Some(ProblemKind::Artificial),
            "orc" => Some(ProblemKind::Orc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSchedule {
    n: u64,
    beta: f64,
    /// `sizes[i - 1]` is the size of epoch `i`.
    sizes: Vec<u64>,
    snapped: bool,
}

impl EpochSchedule {
    pub fn new(n: u64, beta: f64) -> Result<Self> {
        if beta.is_nan() || beta < 2.0 || beta > n as f64 / 2.0 {
            return Err(Error::invalid(alloc::format!(
                "beta = {beta} outside [2, n/2] for n = {n}"
            )));
        }
        let mut sizes = Vec::new();
        let mut power = beta;
        while power * beta <= n as f64 {
            sizes.push(libm::floor(power) as u64);
            power *= beta;
        }
        let below: u64 = sizes.iter().sum();
        sizes.push(n - below);
        Ok(EpochSchedule {
            n,
            beta,
            sizes,
            snapped: false,
        })
    }

    /// Every size replaced by the largest Fibonacci number not above it.
    pub fn snapped_to_fibonacci(&self) -> Self {
        EpochSchedule {
            n: self.n,
            beta: self.beta,
            sizes: self.sizes.iter().map(|&s| snap_to_fibonacci(s)).collect(),
            snapped: true,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_snapped(&self) -> bool {
        self.snapped
    }

    /// Number of epochs, `⌊lg_β n⌋`.
    pub fn count(&self) -> EpochId {
        self.sizes.len() as EpochId
    }

    pub fn size(&self, epoch: EpochId) -> u64 {
        self.sizes[epoch as usize - 1]
    }

    /// Sizes from epoch 1 upward.
    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// Sizes in time order, top epoch first.
    pub fn time_order(&self) -> Vec<u64> {
        self.sizes.iter().rev().copied().collect()
    }

    /// Total number of updates (below `n` once snapped).
    pub fn total(&self) -> u64 {
        self.sizes.iter().sum()
    }

    /// Updates in epochs `1..=epoch`, i.e. the length of the trailing suffix.
    pub fn suffix_len(&self, epoch: EpochId) -> u64 {
        self.sizes[..epoch as usize].iter().sum()
    }

    /// Epochs in time order.
    pub fn epochs(&self) -> impl Iterator<Item = EpochId> {
        (1..=self.count()).rev()
    }

    fn check_epoch(&self, epoch: EpochId) -> Result<()> {
        if epoch == 0 || epoch > self.count() {
            return Err(Error::invalid(alloc::format!(
                "epoch {epoch} outside 1..={}",
                self.count()
            )));
        }
        Ok(())
    }
}

/// The updates of one epoch, in execution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochUpdates {
    pub epoch: EpochId,
    pub updates: Vec<Update>,
}

impl EpochUpdates {
    /// `u_i`: the weights in execution order.
    pub fn weights(&self) -> Vec<u64> {
        self.updates
            .iter()
            .map(|u| match *u {
                Update::Assign { weight, .. } | Update::Insert { weight, .. } => weight,
            })
            .collect()
    }

    /// The same epoch with its weights replaced (the fixed positions stay).
    pub fn with_weights(&self, weights: &[u64]) -> Result<Self> {
        if weights.len() != self.updates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.updates.len(),
                found: weights.len(),
            });
        }
        let updates = self
            .updates
            .iter()
            .zip(weights)
            .map(|(u, &weight)| match *u {
                Update::Assign { index, .. } => Update::Assign { index, weight },
                Update::Insert { point, .. } => Update::Insert { point, weight },
            })
            .collect();
        Ok(EpochUpdates {
            epoch: self.epoch,
            updates,
        })
    }
}

/// Fixed positions of each epoch: point indices for the artificial problem,
/// lattice points for range counting.
pub fn epoch_skeleton(kind: ProblemKind, schedule: &EpochSchedule) -> Result<Vec<EpochUpdates>> {
    let mut out = Vec::with_capacity(schedule.count() as usize);
    let mut next_index = 0usize;
    for epoch in schedule.epochs() {
        let size = schedule.size(epoch);
        let updates = match kind {
            ProblemKind::Artificial => (0..size as usize)
                .map(|t| Update::Assign {
                    index: next_index + t,
                    weight: 0,
                })
                .collect(),
            ProblemKind::Orc => {
                let spec = LatticeSpec::new(size, schedule.n())?;
                scaled_lattice(&spec)
                    .points
                    .into_iter()
                    .map(|point| Update::Insert { point, weight: 0 })
                    .collect()
            }
        };
        next_index += size as usize;
        out.push(EpochUpdates { epoch, updates });
    }
    Ok(out)
}

/// A completed run of the hard distribution.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub kind: ProblemKind,
    pub schedule: EpochSchedule,
    pub modulus: PrimeModulus,
    pub seed: u64,
    /// Epochs in time order (top epoch first).
    pub epochs: Vec<EpochUpdates>,
    pub memory: SimulatedMemory,
    pub trace: ProbeTrace,
    /// Probes spent by each update, in time order.
    pub update_probes: Vec<usize>,
}

impl RunRecord {
    pub fn epoch(&self, epoch: EpochId) -> Result<&EpochUpdates> {
        self.schedule.check_epoch(epoch)?;
        Ok(&self.epochs[(self.schedule.count() - epoch) as usize])
    }

    /// Epochs that ran before `epoch`, in time order.
    pub fn prefix(&self, epoch: EpochId) -> &[EpochUpdates] {
        &self.epochs[..(self.schedule.count() - epoch) as usize]
    }

    /// The flat update log.
    pub fn log(&self) -> Vec<Update> {
        self.epochs.iter().flat_map(|e| e.updates.iter().copied()).collect()
    }

    /// Inserted points of an epoch (range counting runs).
    pub fn points(&self, epoch: EpochId) -> Result<Vec<Point>> {
        self.epoch(epoch)?
            .updates
            .iter()
            .map(|u| match *u {
                Update::Insert { point, .. } => Ok(point),
                Update::Assign { .. } => Err(Error::WrongOperationKind("artificial runs have no points")),
            })
            .collect()
    }
}

/// Executes epochs on fresh memory, in order. Returns memory, trace and
/// per-update probe counts; any update over its declared bound aborts.
pub fn execute_epochs(
    ds: &dyn DynamicStructure,
    config: MemoryConfig,
    epochs: &[EpochUpdates],
) -> Result<(SimulatedMemory, ProbeTrace, Vec<usize>)> {
    let mut memory = SimulatedMemory::new(config);
    let mut trace = ProbeTrace::new();
    let mut probes = Vec::new();
    let mut op = 0usize;
    for e in epochs {
        memory.begin_epoch(e.epoch)?;
        for u in &e.updates {
            probes.push(apply_update(ds, &mut memory, &mut trace, op, u)?);
            op += 1;
        }
    }
    Ok((memory, trace, probes))
}

/// Draws uniform weights in `[Δ]` for every update and runs the epochs.
pub fn run_hard_distribution(
    kind: ProblemKind,
    schedule: &EpochSchedule,
    modulus: PrimeModulus,
    seed: u64,
    ds: &dyn DynamicStructure,
    config: MemoryConfig,
) -> Result<RunRecord> {
    if kind == ProblemKind::Orc && !schedule.is_snapped() {
        return Err(Error::invalid("range counting runs need a Fibonacci-snapped schedule"));
    }
    let mut rng = rng::stream(seed, Stream::Distribution);
    let epochs = epoch_skeleton(kind, schedule)?
        .into_iter()
        .map(|e| {
            let weights: Vec<u64> = (0..e.updates.len())
                .map(|_| rng.gen_range(0..modulus.value()))
                .collect();
            e.with_weights(&weights)
        })
        .collect::<Result<Vec<_>>>()?;
    let (memory, trace, update_probes) = execute_epochs(ds, config, &epochs)?;

    let t_u = ds.declared_update_bound();
    for (epoch, cells) in memory.epoch_sizes() {
        if cells as u64 > schedule.size(epoch) * t_u as u64 {
            return Err(Error::Integrity(alloc::format!(
                "epoch {epoch} owns {cells} cells, above size times update bound"
            )));
        }
    }
    Ok(RunRecord {
        kind,
        schedule: schedule.clone(),
        modulus,
        seed,
        epochs,
        memory,
        trace,
        update_probes,
    })
}

/// A seeded sample of queries: distinct family indices (all of them when the
/// family is no larger than `count`) or uniform points of `[n]²`.
pub fn sample_queries(kind: ProblemKind, n: u64, family_len: usize, count: usize, seed: u64) -> Vec<Query> {
    let mut rng = rng::stream(seed, Stream::QuerySample);
    match kind {
        ProblemKind::Artificial if count >= family_len => (0..family_len).map(Query::Vector).collect(),
        ProblemKind::Artificial => {
            let mut idx = rand::seq::index::sample(&mut rng, family_len, count).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(Query::Vector).collect()
        }
        ProblemKind::Orc => (0..count)
            .map(|_| Query::Dominance(Point::new(rng.gen_range(0..n), rng.gen_range(0..n))))
            .collect(),
    }
}

/// Per-query answers and distinct-cell probe counts by epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeProfile {
    pub epoch_count: EpochId,
    pub queries: Vec<Query>,
    pub answers: Vec<u128>,
    pub per_query: Vec<EpochCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub epoch: EpochId,
    pub queries_sampled: usize,
    pub mean: f64,
    pub max: usize,
}

impl ProbeProfile {
    /// `t_i(U)`: mean over the sample.
    pub fn mean(&self, epoch: EpochId) -> f64 {
        if self.per_query.is_empty() {
            return 0.0;
        }
        let total: usize = self.per_query.iter().map(|c| c.get(epoch)).sum();
        total as f64 / self.per_query.len() as f64
    }

    pub fn max(&self, epoch: EpochId) -> usize {
        self.per_query.iter().map(|c| c.get(epoch)).max().unwrap_or(0)
    }

    /// `Σ_i t_i(U)`, the estimate of the query time.
    pub fn total_mean(&self) -> f64 {
        (1..=self.epoch_count).map(|i| self.mean(i)).sum()
    }

    /// One row per epoch, top epoch first.
    pub fn rows(&self) -> Vec<ProfileRow> {
        (1..=self.epoch_count)
            .rev()
            .map(|epoch| ProfileRow {
                epoch,
                queries_sampled: self.per_query.len(),
                mean: self.mean(epoch),
                max: self.max(epoch),
            })
            .collect()
    }
}

/// Runs every query read-only against the finished memory.
pub fn epoch_probe_profile(run: &RunRecord, ds: &dyn DynamicStructure, queries: &[Query]) -> Result<ProbeProfile> {
    let mut answers = Vec::with_capacity(queries.len());
    let mut per_query = Vec::with_capacity(queries.len());
    for (j, q) in queries.iter().enumerate() {
        let mut trace = ProbeTrace::new();
        answers.push(run_query(ds, &run.memory, &mut trace, j, q)?);
        per_query.push(probe_counts_by_epoch(trace.entries(), &run.memory));
    }
    Ok(ProbeProfile {
        epoch_count: run.schedule.count(),
        queries: queries.to_vec(),
        answers,
        per_query,
    })
}

/// Expected distinct probes of the naive structure for family vector `j`:
/// its cell count per weight times the selected points last set in each
/// epoch.
pub fn naive_expected_counts(run: &RunRecord, ds: &NaiveArtificial, family: &QueryFamily, j: usize) -> BTreeMap<EpochId, usize> {
    let mut last_epoch: BTreeMap<usize, EpochId> = BTreeMap::new();
    for e in &run.epochs {
        for u in &e.updates {
            if let Update::Assign { index, .. } = *u {
                last_epoch.insert(index, e.epoch);
            }
        }
    }
    let mut counts = BTreeMap::new();
    for (i, &bit) in family.vector(j).coords().iter().enumerate() {
        if bit == 1 {
            if let Some(&e) = last_epoch.get(&i) {
                *counts.entry(e).or_insert(0) += ds.chunks();
            }
        }
    }
    counts
}

/// `inc(q)`: coordinate `j` is 1 iff the `j`'th point is dominated by `q`.
pub fn incidence_vector(points: &[Point], q: Point, modulus: PrimeModulus) -> Result<FieldVector> {
    let coords = points.iter().map(|p| p.dominated_by(q) as u64).collect();
    FieldVector::new(modulus, coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(EpochSchedule::new(100, 3.0).unwrap().time_order(), [61, 27, 9, 3]);
        assert_eq!(EpochSchedule::new(12, 2.0).unwrap().time_order(), [6, 4, 2]);
        assert_eq!(EpochSchedule::new(25, 5.0).unwrap().time_order(), [20, 5]);
        assert!(EpochSchedule::new(12, 7.0).is_err());
        assert!(EpochSchedule::new(12, 1.5).is_err());
        assert!(EpochSchedule::new(12, f64::NAN).is_err());
    }

    #[test]
    fn snapped_schedule() {
        let s = EpochSchedule::new(440, 5.0).unwrap();
        assert_eq!(s.time_order(), [410, 25, 5]);
        let f = s.snapped_to_fibonacci();
        assert_eq!(f.time_order(), [377, 21, 5]);
        assert_eq!(f.total(), 403);
        assert_eq!(f.suffix_len(2), 26);
    }

    #[test]
    fn incidence_examples() {
        let m = PrimeModulus::new(7).unwrap();
        let pts = scaled_lattice(&LatticeSpec::new(5, 25).unwrap()).points;
        let inc = |x, y| incidence_vector(&pts, Point::new(x, y), m).unwrap().into_coords();
        assert_eq!(inc(24, 24), [1, 1, 1, 1, 1]);
        assert_eq!(inc(12, 16), [1, 1, 1, 0, 0]);
        assert_eq!(inc(0, 0), [1, 0, 0, 0, 0]);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [ProblemKind::Artificial, ProblemKind::Orc] {
            assert_eq!(ProblemKind::parse(k.as_str()), Some(k));
        }
    }
}
