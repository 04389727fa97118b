use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use super::{apply_update, run_query, DynamicStructure, Query, Update};
use crate::error::{Error, Result};
use crate::family::QueryFamily;
use crate::field::PrimeModulus;
use crate::lattice::Point;
use crate::memory::{EpochId, MemoryConfig, ProbeTrace, SimulatedMemory};
use crate::rng::{self, Stream};

/// Recomputes an answer by scanning the update log. Vector queries need the
/// family that defines them.
pub fn brute_force_oracle(log: &[Update], query: &Query, family: Option<&QueryFamily>) -> Result<u128> {
    match *query {
        Query::Dominance(q) => Ok(log
            .iter()
            .map(|u| match *u {
                Update::Insert { point, weight } if point.dominated_by(q) => weight as u128,
                _ => 0,
            })
            .sum()),
        Query::Vector(j) => {
            let family = family.ok_or(Error::WrongOperationKind("vector query without a family"))?;
            if j >= family.len() {
                return Err(Error::invalid(alloc::format!("query index {j} out of range")));
            }
            let mut weights: BTreeMap<usize, u64> = BTreeMap::new();
            for u in log {
                if let Update::Assign { index, weight } = *u {
                    weights.insert(index, weight);
                }
            }
            let v = family.vector(j).coords();
            Ok(weights
                .iter()
                .filter(|(&i, _)| v.get(i) == Some(&1))
                .map(|(_, &d)| d as u128)
                .sum())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadOp {
    Update(Update),
    Query(Query),
}

/// Random updates followed by random queries. With a family the workload is
/// for the artificial problem (`n` points, `|family|` queries), otherwise it
/// inserts into and queries `[n]×[n]`.
pub fn random_workload(
    n: usize,
    modulus: PrimeModulus,
    family: Option<&QueryFamily>,
    updates: usize,
    queries: usize,
    seed: u64,
) -> Vec<WorkloadOp> {
    let mut rng = rng::stream(seed, Stream::Workload);
    let d = modulus.value();
    let mut ops = Vec::with_capacity(updates + queries);
    for _ in 0..updates {
        let weight = rng.gen_range(0..d);
        ops.push(WorkloadOp::Update(match family {
            Some(_) => Update::Assign {
                index: rng.gen_range(0..n),
                weight,
            },
            None => Update::Insert {
                point: Point::new(rng.gen_range(0..n as u64), rng.gen_range(0..n as u64)),
                weight,
            },
        }));
    }
    for _ in 0..queries {
        ops.push(WorkloadOp::Query(match family {
            Some(f) => Query::Vector(rng.gen_range(0..f.len())),
            None => Query::Dominance(Point::new(rng.gen_range(0..n as u64), rng.gen_range(0..n as u64))),
        }));
    }
    ops
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    /// `(structure answer, oracle answer)` per query, in order.
    pub answers: Vec<(u128, u128)>,
    pub max_update_probes: usize,
    pub max_query_probes: usize,
    pub memory: SimulatedMemory,
    pub trace: ProbeTrace,
}

impl ReplayOutcome {
    pub fn mismatches(&self) -> usize {
        self.answers.iter().filter(|(a, b)| a != b).count()
    }
}

/// Replays a workload inside a single epoch, checking declared probe bounds
/// on every operation and comparing each answer with the oracle.
pub fn replay_workload(
    ds: &dyn DynamicStructure,
    config: MemoryConfig,
    ops: &[WorkloadOp],
    family: Option<&QueryFamily>,
) -> Result<ReplayOutcome> {
    const WORKLOAD_EPOCH: EpochId = 1;
    let mut memory = SimulatedMemory::new(config);
    memory.begin_epoch(WORKLOAD_EPOCH)?;
    let mut trace = ProbeTrace::new();
    let mut log = Vec::new();
    let mut answers = Vec::new();
    let (mut max_u, mut max_q) = (0, 0);
    for (i, op) in ops.iter().enumerate() {
        match op {
            WorkloadOp::Update(u) => {
                max_u = max_u.max(apply_update(ds, &mut memory, &mut trace, i, u)?);
                log.push(*u);
            }
            WorkloadOp::Query(q) => {
                let before = trace.len();
                let got = run_query(ds, &memory, &mut trace, i, q)?;
                max_q = max_q.max(trace.len() - before);
                answers.push((got, brute_force_oracle(&log, q, family)?));
            }
        }
    }
    Ok(ReplayOutcome {
        answers,
        max_update_probes: max_u,
        max_query_probes: max_q,
        memory,
        trace,
    })
}
