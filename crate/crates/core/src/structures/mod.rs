//! Reference dynamic structures whose whole state lives in simulated memory.
//!
//! A structure object only carries its fixed parameters (sizes, cell layout,
//! the query family). Everything that changes with updates is read and
//! written through a [`CellProbe`], so answers depend on probed contents only.

mod naive;
mod oracle;
mod prefix2d;

pub use naive::NaiveArtificial;
pub use oracle::{brute_force_oracle, random_workload, replay_workload, ReplayOutcome, WorkloadOp};
pub use prefix2d::TwoLevelPrefixSum;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::memory::{CellProbe, ProbeTrace, QueryView, Recorder, SimulatedMemory, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    /// Artificial problem: set the weight of point `index`.
    Assign { index: usize, weight: u64 },
    /// Range counting: insert a weighted point.
    Insert { point: Point, weight: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    /// Artificial problem: inner product with the `j`'th family vector.
    Vector(usize),
    /// Range counting: sum of weights dominated by the point.
    Dominance(Point),
}

pub trait DynamicStructure {
    /// Short identifier used in manifests and on the command line.
    fn id(&self) -> &'static str;

    /// Worst-case probes of one update.
    fn declared_update_bound(&self) -> usize;

    /// Worst-case probes of one query.
    fn declared_query_bound(&self) -> usize;

    /// Cell size the layout was built for.
    fn word_bits(&self) -> u32;

    fn update(&self, mem: &mut dyn CellProbe, op: &Update) -> Result<()>;

    fn query(&self, mem: &mut dyn CellProbe, q: &Query) -> Result<u128>;
}

/// Runs one update through the recorder and checks the declared bound.
/// Returns the number of probes spent.
pub fn apply_update(
    ds: &dyn DynamicStructure,
    memory: &mut SimulatedMemory,
    trace: &mut ProbeTrace,
    op_index: usize,
    op: &Update,
) -> Result<usize> {
    let before = trace.len();
    trace.begin_op(op_index as u64);
    ds.update(&mut Recorder { memory, trace }, op)?;
    let probes = trace.len() - before;
    let declared = ds.declared_update_bound();
    if probes > declared {
        return Err(Error::UpdateBoundExceeded {
            op: op_index,
            probes,
            declared,
        });
    }
    Ok(probes)
}

/// Runs one read-only query and checks the declared bound.
pub fn run_query(
    ds: &dyn DynamicStructure,
    memory: &SimulatedMemory,
    trace: &mut ProbeTrace,
    op_index: usize,
    q: &Query,
) -> Result<u128> {
    let before = trace.len();
    trace.begin_op(op_index as u64);
    let answer = ds.query(&mut QueryView { memory, trace }, q)?;
    let probes = trace.len() - before;
    let declared = ds.declared_query_bound();
    if probes > declared {
        return Err(Error::QueryBoundExceeded { probes, declared });
    }
    Ok(answer)
}

fn check_word_bits(ds: &dyn DynamicStructure, mem: &dyn CellProbe) -> Result<()> {
    if ds.word_bits() != mem.word_bits() {
        return Err(Error::invalid(alloc::format!(
            "structure laid out for {}-bit cells, memory has {}",
            ds.word_bits(),
            mem.word_bits()
        )));
    }
    Ok(())
}

/// Splits a value into `chunks` little-endian cells of `w` bits.
fn split_chunks(value: u128, w: u32, chunks: usize) -> impl Iterator<Item = Word> {
    let mask = if w >= 64 { u64::MAX as u128 } else { (1u128 << w) - 1 };
    (0..chunks).map(move |c| {
        let shift = c as u32 * w;
        if shift >= 128 {
            0
        } else {
            ((value >> shift) & mask) as Word
        }
    })
}

fn join_chunks(parts: &[Word], w: u32) -> u128 {
    parts
        .iter()
        .enumerate()
        .fold(0u128, |acc, (c, &v)| acc | (v as u128) << (c as u32 * w))
}

fn floor_lg(n: u64) -> u32 {
    63 - n.max(1).leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_round_trip() {
        let v = 0x1234_5678_9abc_def0u128;
        let parts: alloc::vec::Vec<Word> = split_chunks(v, 24, 3).collect();
        assert!(parts.iter().all(|&p| p < 1 << 24));
        assert_eq!(join_chunks(&parts, 24), v & ((1u128 << 72) - 1));
        assert_eq!(join_chunks(&split_chunks(v, 64, 2).collect::<alloc::vec::Vec<_>>(), 64), v);
    }
}
