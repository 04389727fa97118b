use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::index;

use crate::chronogram::{EpochSchedule, RunRecord};
use crate::error::{Error, Result};
use crate::memory::{Address, EpochId, ProbeTrace};
use crate::rng::{self, Stream};
use crate::structures::{run_query, DynamicStructure, Query};

/// Cells `C ⊆ S_{i*}(U)` and the sampled queries whose epoch-`i*` probes all
/// land in `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSet {
    pub epoch: EpochId,
    /// Sorted addresses.
    pub cells: Vec<Address>,
    pub queries: Vec<Query>,
    pub probe_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    /// `|C|`; clamped to `|S_{i*}(U)|`.
    pub cell_budget: usize,
    /// Queries probing more epoch-`i*` cells than this are never kept.
    pub probe_threshold: f64,
    pub max_tries: usize,
    pub seed: u64,
}

/// `¼·lg_β n`.
pub fn default_probe_threshold(schedule: &EpochSchedule) -> f64 {
    0.25 * libm::log(schedule.n() as f64) / libm::log(schedule.beta())
}

/// Sorted distinct epoch-`i*` cells probed by each query.
pub fn epoch_probe_sets(
    run: &RunRecord,
    ds: &dyn DynamicStructure,
    istar: EpochId,
    queries: &[Query],
) -> Result<Vec<Vec<Address>>> {
    queries
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let mut trace = ProbeTrace::new();
            run_query(ds, &run.memory, &mut trace, j, q)?;
            let set: BTreeSet<Address> = trace
                .entries()
                .iter()
                .filter(|e| run.memory.epoch_of(e.address) == Some(istar))
                .map(|e| e.address)
                .collect();
            Ok(set.into_iter().collect())
        })
        .collect()
}

/// Samples `C` uniformly up to `max_tries` times and keeps the try that
/// resolves the most queries, then re-verifies it by replay.
pub fn find_resolved_set(
    run: &RunRecord,
    ds: &dyn DynamicStructure,
    istar: EpochId,
    sample: &[Query],
    opts: &ResolveOptions,
) -> Result<ResolvedSet> {
    let epoch_cells: Vec<Address> = run.memory.cells_of_epoch(istar).into_iter().map(|(a, _)| a).collect();
    let probe_sets = epoch_probe_sets(run, ds, istar, sample)?;
    let eligible: Vec<usize> = (0..sample.len())
        .filter(|&j| probe_sets[j].len() as f64 <= opts.probe_threshold)
        .collect();

    let budget = opts.cell_budget.min(epoch_cells.len());
    let tries = if budget == epoch_cells.len() { 1 } else { opts.max_tries.max(1) };
    let mut best: Option<(Vec<Address>, Vec<usize>)> = None;
    for t in 0..tries {
        let mut rng = rng::substream(opts.seed, Stream::CellSampling, t as u64);
        let mut cells: Vec<Address> = if budget == epoch_cells.len() {
            epoch_cells.clone()
        } else {
            index::sample(&mut rng, epoch_cells.len(), budget)
                .into_iter()
                .map(|i| epoch_cells[i])
                .collect()
        };
        cells.sort_unstable();
        let resolved: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|&j| probe_sets[j].iter().all(|a| cells.binary_search(a).is_ok()))
            .collect();
        if best.as_ref().is_none_or(|(_, q)| resolved.len() > q.len()) {
            best = Some((cells, resolved));
        }
    }
    let (cells, resolved) = best.unwrap_or_default();
    if resolved.is_empty() {
        return Err(Error::NotFound(alloc::format!(
            "no sampled query is resolved by {budget} epoch-{istar} cells after {tries} tries"
        )));
    }
    let set = ResolvedSet {
        epoch: istar,
        cells,
        queries: resolved.into_iter().map(|j| sample[j]).collect(),
        probe_threshold: opts.probe_threshold,
    };
    verify_resolved(run, ds, &set)?;
    Ok(set)
}

/// Replays every query of the set and checks that no probe reaches an
/// epoch-`i*` cell outside `C`.
pub fn verify_resolved(run: &RunRecord, ds: &dyn DynamicStructure, set: &ResolvedSet) -> Result<()> {
    for (q, probes) in set
        .queries
        .iter()
        .zip(epoch_probe_sets(run, ds, set.epoch, &set.queries)?)
    {
        if let Some(a) = probes.iter().find(|a| set.cells.binary_search(a).is_err()) {
            return Err(Error::Integrity(alloc::format!(
                "query {q:?} probes epoch-{} cell {a} outside the resolving set",
                set.epoch
            )));
        }
        if probes.len() as f64 > set.probe_threshold {
            return Err(Error::Integrity(alloc::format!("query {q:?} exceeds the probe threshold")));
        }
    }
    Ok(())
}
