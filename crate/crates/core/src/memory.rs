//! Simulated cell-probe memory: `w`-bit cells addressed by `w`-bit integers,
//! a complete probe log, and per-cell epoch tags (the last epoch that wrote
//! the cell).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Address = u64;
pub type Word = u64;
pub type EpochId = u32;

/// `⌈lg n⌉` for `n ≥ 1`.
pub fn ceil_lg(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Bits needed to write `x` in binary (`0` for `x = 0`).
pub fn bit_length(x: u128) -> u32 {
    128 - x.leading_zeros()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryConfig {
    word_bits: u32,
}

impl MemoryConfig {
    /// Smallest multiple of 8 that is at least `⌈lg n⌉`.
    pub fn for_n(n: u64) -> Self {
        let w = ceil_lg(n).max(1).div_ceil(8) * 8;
        MemoryConfig { word_bits: w }
    }

    pub fn with_word_bits(n: u64, w: u32) -> Result<Self> {
        if w < ceil_lg(n) || w == 0 {
            return Err(Error::invalid(alloc::format!(
                "cell size {w} is below lg n = {}",
                ceil_lg(n)
            )));
        }
        if w > 64 {
            return Err(Error::invalid("cells wider than 64 bits are not supported"));
        }
        Ok(MemoryConfig { word_bits: w })
    }

    /// Grows the cell size in steps of 8 bits until `fits(w)` holds.
    pub fn widen_until(self, mut fits: impl FnMut(u32) -> bool) -> Result<Self> {
        let mut w = self.word_bits;
        while !fits(w) {
            w += 8;
            if w > 64 {
                return Err(Error::invalid("no cell size up to 64 bits fits the layout"));
            }
        }
        Ok(MemoryConfig { word_bits: w })
    }

    #[inline]
    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    /// Largest storable value.
    #[inline]
    pub fn max_word(&self) -> Word {
        if self.word_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.word_bits) - 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeEntry {
    pub op_id: u64,
    pub kind: ProbeKind,
    pub address: Address,
    /// Tag of the cell right after the probe; `None` for never-written cells.
    pub epoch_tag: Option<EpochId>,
}

/// Append-only probe log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeTrace {
    entries: Vec<ProbeEntry>,
    current_op: u64,
}

impl ProbeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Subsequent probes are attributed to operation `op_id`.
    pub fn begin_op(&mut self, op_id: u64) {
        self.current_op = op_id;
    }

    pub fn entries(&self) -> &[ProbeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, kind: ProbeKind, address: Address, epoch_tag: Option<EpochId>) {
        self.entries.push(ProbeEntry {
            op_id: self.current_op,
            kind,
            address,
            epoch_tag,
        });
    }

    pub fn count(&self, kind: ProbeKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub contents: Word,
    pub epoch: EpochId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedMemory {
    config: MemoryConfig,
    cells: BTreeMap<Address, Cell>,
    current_epoch: Option<EpochId>,
}

impl SimulatedMemory {
    pub fn new(config: MemoryConfig) -> Self {
        SimulatedMemory {
            config,
            cells: BTreeMap::new(),
            current_epoch: None,
        }
    }

    pub fn config(&self) -> MemoryConfig {
        self.config
    }

    pub fn current_epoch(&self) -> Option<EpochId> {
        self.current_epoch
    }

    /// Epochs run largest id first, so ids must strictly decrease.
    pub fn begin_epoch(&mut self, epoch: EpochId) -> Result<()> {
        if let Some(current) = self.current_epoch {
            if epoch >= current {
                return Err(Error::NonMonotonicEpoch {
                    current,
                    requested: epoch,
                });
            }
        }
        self.current_epoch = Some(epoch);
        Ok(())
    }

    fn check_address(&self, address: Address) -> Result<()> {
        let w = self.config.word_bits;
        if w < 64 && address >> w != 0 {
            return Err(Error::AddressOutOfRange {
                address,
                word_bits: w,
            });
        }
        Ok(())
    }

    /// Reads a cell; never-written cells read as zero.
    pub fn probe_read(&self, trace: &mut ProbeTrace, address: Address) -> Result<Word> {
        self.check_address(address)?;
        let cell = self.cells.get(&address);
        trace.push(ProbeKind::Read, address, cell.map(|c| c.epoch));
        Ok(cell.map_or(0, |c| c.contents))
    }

    pub fn probe_write(&mut self, trace: &mut ProbeTrace, address: Address, value: Word) -> Result<()> {
        self.check_address(address)?;
        if value > self.config.max_word() {
            return Err(Error::ValueOverflow {
                value: value as u128,
                word_bits: self.config.word_bits,
            });
        }
        let epoch = self
            .current_epoch
            .ok_or_else(|| Error::invalid("write outside of any epoch"))?;
        self.cells.insert(address, Cell { contents: value, epoch });
        trace.push(ProbeKind::Write, address, Some(epoch));
        Ok(())
    }

    /// Contents without logging a probe (analysis only).
    pub fn peek(&self, address: Address) -> Word {
        self.cells.get(&address).map_or(0, |c| c.contents)
    }

    pub fn epoch_of(&self, address: Address) -> Option<EpochId> {
        self.cells.get(&address).map(|c| c.epoch)
    }

    pub fn written_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (Address, Cell)> + '_ {
        self.cells.iter().map(|(&a, &c)| (a, c))
    }

    /// `S_i(U)`: cells whose last write happened in epoch `i`, by address.
    pub fn cells_of_epoch(&self, epoch: EpochId) -> Vec<(Address, Word)> {
        self.cells
            .iter()
            .filter(|(_, c)| c.epoch == epoch)
            .map(|(&a, c)| (a, c.contents))
            .collect()
    }

    /// Sizes `|S_i(U)|` for every epoch that owns a cell.
    pub fn epoch_sizes(&self) -> BTreeMap<EpochId, usize> {
        let mut sizes = BTreeMap::new();
        for c in self.cells.values() {
            *sizes.entry(c.epoch).or_insert(0) += 1;
        }
        sizes
    }
}

/// Probe interface seen by data structures. Implementations decide where
/// contents come from and log every access.
pub trait CellProbe {
    fn word_bits(&self) -> u32;
    fn read(&mut self, address: Address) -> Result<Word>;
    fn write(&mut self, address: Address, value: Word) -> Result<()>;
}

/// Update-phase access: reads and writes go to memory and the trace.
pub struct Recorder<'a> {
    pub memory: &'a mut SimulatedMemory,
    pub trace: &'a mut ProbeTrace,
}

impl CellProbe for Recorder<'_> {
    fn word_bits(&self) -> u32 {
        self.memory.config.word_bits
    }

    fn read(&mut self, address: Address) -> Result<Word> {
        self.memory.probe_read(self.trace, address)
    }

    fn write(&mut self, address: Address, value: Word) -> Result<()> {
        self.memory.probe_write(self.trace, address, value)
    }
}

/// Query-phase access over finalized memory; writes are rejected.
pub struct QueryView<'a> {
    pub memory: &'a SimulatedMemory,
    pub trace: &'a mut ProbeTrace,
}

impl CellProbe for QueryView<'_> {
    fn word_bits(&self) -> u32 {
        self.memory.config.word_bits
    }

    fn read(&mut self, address: Address) -> Result<Word> {
        self.memory.probe_read(self.trace, address)
    }

    fn write(&mut self, _address: Address, _value: Word) -> Result<()> {
        Err(Error::MemoryFrozen)
    }
}

/// Distinct cells probed by one query, grouped by their final epoch tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpochCounts {
    pub by_epoch: BTreeMap<EpochId, usize>,
    /// Distinct probed cells that were never written.
    pub unwritten: usize,
    /// Raw probe entries in the segment.
    pub raw_probes: usize,
}

impl EpochCounts {
    pub fn get(&self, epoch: EpochId) -> usize {
        self.by_epoch.get(&epoch).copied().unwrap_or(0)
    }

    pub fn distinct_total(&self) -> usize {
        self.by_epoch.values().sum::<usize>() + self.unwritten
    }
}

/// `t_i(U, q)` for every epoch: distinct cells per final tag. A cell probed
/// twice in the segment counts once.
pub fn probe_counts_by_epoch(segment: &[ProbeEntry], memory: &SimulatedMemory) -> EpochCounts {
    let mut addresses: Vec<Address> = segment.iter().map(|e| e.address).collect();
    addresses.sort_unstable();
    addresses.dedup();
    let mut counts = EpochCounts {
        raw_probes: segment.len(),
        ..EpochCounts::default()
    };
    for a in addresses {
        match memory.epoch_of(a) {
            Some(e) => *counts.by_epoch.entry(e).or_insert(0) += 1,
            None => counts.unwritten += 1,
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem() -> SimulatedMemory {
        SimulatedMemory::new(MemoryConfig::with_word_bits(16, 8).unwrap())
    }

    #[test]
    fn default_word_size() {
        assert_eq!(MemoryConfig::for_n(25).word_bits(), 8);
        assert_eq!(MemoryConfig::for_n(440).word_bits(), 16);
        assert_eq!(MemoryConfig::for_n(1 << 20).word_bits(), 24);
        assert!(MemoryConfig::with_word_bits(1 << 20, 16).is_err());
    }

    #[test]
    fn last_writer_tags_cells() {
        let mut m = mem();
        let mut t = ProbeTrace::new();
        m.begin_epoch(3).unwrap();
        m.probe_write(&mut t, 4, 1).unwrap();
        m.probe_write(&mut t, 5, 1).unwrap();
        m.begin_epoch(1).unwrap();
        m.probe_write(&mut t, 4, 2).unwrap();
        assert_eq!(m.epoch_of(4), Some(1));
        assert_eq!(m.epoch_of(5), Some(3));
    }

    #[test]
    fn epochs_must_decrease() {
        let mut m = mem();
        m.begin_epoch(1).unwrap();
        assert_eq!(
            m.begin_epoch(2),
            Err(Error::NonMonotonicEpoch {
                current: 1,
                requested: 2
            })
        );
        assert!(m.begin_epoch(1).is_err());
    }

    #[test]
    fn reads_and_writes() {
        let mut m = mem();
        let mut t = ProbeTrace::new();
        assert_eq!(m.probe_read(&mut t, 9).unwrap(), 0);
        assert_eq!(t.len(), 1);
        m.begin_epoch(2).unwrap();
        m.probe_write(&mut t, 9, 5).unwrap();
        assert_eq!(t.count(ProbeKind::Write), 1);
        assert_eq!(m.probe_read(&mut t, 9).unwrap(), 5);
        assert_eq!(t.len(), 3);
        assert!(matches!(
            m.probe_write(&mut t, 9, 256),
            Err(Error::ValueOverflow { .. })
        ));
        assert!(matches!(
            m.probe_read(&mut t, 256),
            Err(Error::AddressOutOfRange { .. })
        ));
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn write_requires_epoch() {
        let mut m = mem();
        let mut t = ProbeTrace::new();
        assert!(m.probe_write(&mut t, 0, 1).is_err());
    }

    #[test]
    fn epoch_sets_partition_written_cells() {
        let mut m = mem();
        let mut t = ProbeTrace::new();
        m.begin_epoch(3).unwrap();
        for a in 0..10 {
            m.probe_write(&mut t, a, a).unwrap();
        }
        m.begin_epoch(2).unwrap();
        assert!(m.cells_of_epoch(2).is_empty());
        m.begin_epoch(1).unwrap();
        for a in 5..12 {
            m.probe_write(&mut t, a, 1).unwrap();
        }
        let s3 = m.cells_of_epoch(3);
        let s1 = m.cells_of_epoch(1);
        assert_eq!(s3.len(), 5);
        assert_eq!(s1.len(), 7);
        assert_eq!(s3.len() + s1.len(), m.written_cells());
        assert!(s3.iter().all(|(a, _)| !s1.iter().any(|(b, _)| a == b)));
    }

    #[test]
    fn counts_distinct_cells_per_epoch() {
        let mut m = mem();
        let mut t = ProbeTrace::new();
        m.begin_epoch(2).unwrap();
        for a in 0..3 {
            m.probe_write(&mut t, a, 1).unwrap();
        }
        let view_trace = &mut ProbeTrace::new();
        assert_eq!(probe_counts_by_epoch(view_trace.entries(), &m), EpochCounts::default());
        let mut view = QueryView {
            memory: &m,
            trace: view_trace,
        };
        for a in [0, 1, 2, 1, 7] {
            view.read(a).unwrap();
        }
        assert!(view.write(0, 1).is_err());
        let c = probe_counts_by_epoch(view_trace.entries(), &m);
        assert_eq!(c.get(2), 3);
        assert_eq!(c.unwritten, 1);
        assert_eq!(c.raw_probes, 5);
        assert_eq!(c.distinct_total(), 4);
    }
}
