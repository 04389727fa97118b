use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{check_word_bits, join_chunks, split_chunks, DynamicStructure, Query, Update};
use crate::error::{Error, Result};
use crate::family::QueryFamily;
use crate::memory::{bit_length, CellProbe, MemoryConfig};

/// One weight per point, stored in `⌈lg Δ / w⌉` consecutive cells. An update
/// writes only its own cells; a query reads the cells of every point its
/// vector selects.
#[derive(Debug, Clone)]
pub struct NaiveArtificial {
    family: Arc<QueryFamily>,
    word_bits: u32,
    chunks: usize,
}

impl NaiveArtificial {
    pub const ID: &'static str = "naive";

    pub fn new(family: Arc<QueryFamily>, config: MemoryConfig) -> Result<Self> {
        let w = config.word_bits();
        let chunks = Self::chunks_for(&family, w);
        let cells = family.n() as u128 * chunks as u128;
        if bit_length(cells - 1) > w {
            return Err(Error::invalid(alloc::format!(
                "{cells} cells do not fit {w}-bit addresses"
            )));
        }
        Ok(NaiveArtificial {
            family,
            word_bits: w,
            chunks,
        })
    }

    /// Smallest multiple of 8 that holds a whole weight in one cell.
    pub fn preferred_config(family: &QueryFamily) -> MemoryConfig {
        let need = bit_length(family.params().modulus.value() as u128 - 1);
        let base = MemoryConfig::for_n(family.n() as u64);
        base.widen_until(|w| w >= need)
            .expect("weights below n^4 fit 64-bit cells")
    }

    fn chunks_for(family: &QueryFamily, w: u32) -> usize {
        let bits = bit_length(family.params().modulus.value() as u128 - 1).max(1);
        bits.div_ceil(w) as usize
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn family(&self) -> &Arc<QueryFamily> {
        &self.family
    }

    /// Cells that hold the weight of `index`.
    pub fn cells_of(&self, index: usize) -> core::ops::Range<u64> {
        let base = (index * self.chunks) as u64;
        base..base + self.chunks as u64
    }

    /// Inverse of [`cells_of`](Self::cells_of).
    pub fn index_of(&self, address: u64) -> usize {
        address as usize / self.chunks
    }
}

impl DynamicStructure for NaiveArtificial {
    fn id(&self) -> &'static str {
        Self::ID
    }

    fn declared_update_bound(&self) -> usize {
        self.chunks
    }

    fn declared_query_bound(&self) -> usize {
        self.family.n() * self.chunks
    }

    fn word_bits(&self) -> u32 {
        self.word_bits
    }

    fn update(&self, mem: &mut dyn CellProbe, op: &Update) -> Result<()> {
        check_word_bits(self, mem)?;
        let Update::Assign { index, weight } = *op else {
            return Err(Error::WrongOperationKind("artificial structure takes weight assignments"));
        };
        let modulus = self.family.params().modulus.value();
        if index >= self.family.n() {
            return Err(Error::invalid(alloc::format!("index {index} out of range")));
        }
        if weight >= modulus {
            return Err(Error::invalid(alloc::format!("weight {weight} not below {modulus}")));
        }
        for (addr, part) in self
            .cells_of(index)
            .zip(split_chunks(weight as u128, self.word_bits, self.chunks))
        {
            mem.write(addr, part)?;
        }
        Ok(())
    }

    fn query(&self, mem: &mut dyn CellProbe, q: &Query) -> Result<u128> {
        check_word_bits(self, mem)?;
        let Query::Vector(j) = *q else {
            return Err(Error::WrongOperationKind("artificial structure takes vector queries"));
        };
        if j >= self.family.len() {
            return Err(Error::invalid(alloc::format!("query index {j} out of range")));
        }
        let mut total = 0u128;
        let mut parts = Vec::with_capacity(self.chunks);
        for (i, &bit) in self.family.vector(j).coords().iter().enumerate() {
            if bit == 0 {
                continue;
            }
            parts.clear();
            for addr in self.cells_of(i) {
                parts.push(mem.read(addr)?);
            }
            total += join_chunks(&parts, self.word_bits);
        }
        Ok(total)
    }
}
