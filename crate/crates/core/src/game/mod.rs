//! The encoder/decoder game for one epoch `i*`.
//!
//! The encoder either ships the epoch's weights verbatim (flag 1) or ships a
//! resolving cell set `C`, a set of queries answerable from `C`, inner
//! products completing their incidence rows to a basis, and every smaller
//! epoch's cells (flag 0). The decoder replays the earlier epochs, answers
//! the shipped queries with the three-way cell rule, and solves for the
//! epoch's weights.

mod bits;
mod decode;
mod encode;
mod entropy;
mod resolve;

use alloc::sync::Arc;
use alloc::vec::Vec;

pub use bits::{mixed_radix_bits, pack_mixed_radix, unpack_mixed_radix, BitBuf, BitReader, BitWriter};
pub use decode::decode_epoch;
pub use encode::{encode_epoch, EncodeOptions, EncodeReport, FlagPolicy, QuerySelection};
pub use entropy::{entropy_account, lg_binomial, EntropyAccount};
pub use resolve::{default_probe_threshold, epoch_probe_sets, find_resolved_set, verify_resolved, ResolveOptions, ResolvedSet};

use crate::chronogram::{EpochSchedule, ProblemKind};
use crate::error::{Error, Result};
use crate::family::QueryFamily;
use crate::field::PrimeModulus;
use crate::lattice::Point;
use crate::memory::{ceil_lg, EpochId, MemoryConfig};
use crate::structures::{DynamicStructure, Query};

pub const MESSAGE_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SectionKind {
    RawWeights,
    Cells,
    Queries,
    InnerProducts,
    SmallerCells,
    SmallerWeights,
}

impl SectionKind {
    pub const ALL: [SectionKind; 6] = [
        SectionKind::RawWeights,
        SectionKind::Cells,
        SectionKind::Queries,
        SectionKind::InnerProducts,
        SectionKind::SmallerCells,
        SectionKind::SmallerWeights,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SectionKind::RawWeights => "raw_weights",
            SectionKind::Cells => "cells",
            SectionKind::Queries => "queries",
            SectionKind::InnerProducts => "inner_products",
            SectionKind::SmallerCells => "smaller_cells",
            SectionKind::SmallerWeights => "smaller_weights",
        }
    }

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: SectionKind,
    pub bits: BitBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageHeader {
    pub version: u16,
    pub kind: ProblemKind,
    pub n: u64,
    pub beta: f64,
    pub istar: EpochId,
    pub modulus: u64,
    pub seed: u64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMessage {
    pub header: MessageHeader,
    pub sections: Vec<Section>,
}

impl EncodingMessage {
    /// The flag bit plus every section's declared length.
    pub fn total_bits(&self) -> usize {
        1 + self.sections.iter().map(|s| s.bits.len()).sum::<usize>()
    }

    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn section_mut(&mut self, kind: SectionKind) -> Option<&mut Section> {
        self.sections.iter_mut().find(|s| s.kind == kind)
    }

    fn require(&self, kind: SectionKind) -> Result<&BitBuf> {
        self.section(kind)
            .map(|s| &s.bits)
            .ok_or_else(|| Error::Malformed(alloc::format!("missing section {}", kind.label())))
    }
}

/// Everything both parties know in advance.
#[derive(Clone)]
pub struct GameContext<'a> {
    pub kind: ProblemKind,
    pub schedule: EpochSchedule,
    pub modulus: PrimeModulus,
    /// Query family of the artificial problem.
    pub family: Option<Arc<QueryFamily>>,
    pub structure: &'a dyn DynamicStructure,
    pub config: MemoryConfig,
}

impl GameContext<'_> {
    pub fn n(&self) -> u64 {
        self.schedule.n()
    }

    /// Fixed width of one query identity, `⌈lg n²⌉`.
    pub fn query_id_bits(&self) -> u32 {
        ceil_lg(self.n() * self.n()).max(1)
    }

    /// Dimension of the recovered vector: the suffix through `i*` for the
    /// artificial problem, the epoch size for range counting.
    pub fn recovered_dim(&self, istar: EpochId) -> usize {
        match self.kind {
            ProblemKind::Artificial => self.schedule.suffix_len(istar) as usize,
            ProblemKind::Orc => self.schedule.size(istar) as usize,
        }
    }

    fn family(&self) -> Result<&QueryFamily> {
        self.family
            .as_deref()
            .ok_or(Error::WrongOperationKind("artificial game needs a query family"))
    }

    fn query_id(&self, q: &Query) -> u64 {
        match *q {
            Query::Vector(j) => j as u64,
            Query::Dominance(p) => p.x * self.n() + p.y,
        }
    }

    fn query_from_id(&self, id: u64) -> Result<Query> {
        match self.kind {
            ProblemKind::Artificial => {
                if id as usize >= self.family()?.len() {
                    return Err(Error::Malformed(alloc::format!("query id {id} out of range")));
                }
                Ok(Query::Vector(id as usize))
            }
            ProblemKind::Orc => {
                let n = self.n();
                if id >= n * n {
                    return Err(Error::Malformed(alloc::format!("query id {id} out of range")));
                }
                Ok(Query::Dominance(Point::new(id / n, id % n)))
            }
        }
    }
}
