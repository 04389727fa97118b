use alloc::vec::Vec;

use super::{check_word_bits, floor_lg, join_chunks, split_chunks, DynamicStructure, Query, Update};
use crate::error::{Error, Result};
use crate::field::PrimeModulus;
use crate::lattice::Point;
use crate::memory::{bit_length, CellProbe, MemoryConfig};

/// Two-level Fenwick tree over `[n]×[n]`: an outer tree on `x` whose nodes
/// are Fenwick trees on `y`. Node `(X, Y)` is a counter spread over
/// `chunks` consecutive cells at address `((X-1)·n + (Y-1))·chunks`.
///
/// An insert adds its weight along both update paths (read then write every
/// chunk); a dominance query sums both prefix paths.
#[derive(Debug, Clone)]
pub struct TwoLevelPrefixSum {
    n: usize,
    modulus: PrimeModulus,
    capacity: u64,
    word_bits: u32,
    chunks: usize,
}

impl TwoLevelPrefixSum {
    pub const ID: &'static str = "orc2d";

    /// `capacity` bounds the number of inserts, which fixes counter widths.
    pub fn new(n: usize, modulus: PrimeModulus, capacity: u64, config: MemoryConfig) -> Result<Self> {
        if n == 0 || capacity == 0 {
            return Err(Error::invalid("prefix-sum structure needs n >= 1 and capacity >= 1"));
        }
        let w = config.word_bits();
        if !Self::layout_fits(n, modulus, capacity, w) {
            return Err(Error::invalid(alloc::format!(
                "{n}x{n} counters do not fit {w}-bit addresses"
            )));
        }
        Ok(TwoLevelPrefixSum {
            n,
            modulus,
            capacity,
            word_bits: w,
            chunks: Self::chunks_for(modulus, capacity, w),
        })
    }

    /// Default cell size for `n`, widened in steps of 8 until addresses fit.
    pub fn preferred_config(n: usize, modulus: PrimeModulus, capacity: u64) -> Result<MemoryConfig> {
        MemoryConfig::for_n(n as u64).widen_until(|w| Self::layout_fits(n, modulus, capacity, w))
    }

    fn counter_bits(modulus: PrimeModulus, capacity: u64) -> u32 {
        bit_length(capacity as u128 * (modulus.value() as u128 - 1)).max(1)
    }

    fn chunks_for(modulus: PrimeModulus, capacity: u64, w: u32) -> usize {
        Self::counter_bits(modulus, capacity).div_ceil(w) as usize
    }

    fn layout_fits(n: usize, modulus: PrimeModulus, capacity: u64, w: u32) -> bool {
        let cells = (n as u128).pow(2) * Self::chunks_for(modulus, capacity, w) as u128;
        bit_length(cells - 1) <= w
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    fn path_len(&self) -> usize {
        floor_lg(self.n as u64) as usize + 1
    }

    fn node_base(&self, x: usize, y: usize) -> u64 {
        (((x - 1) * self.n + (y - 1)) * self.chunks) as u64
    }

    fn read_counter(&self, mem: &mut dyn CellProbe, base: u64, parts: &mut Vec<u64>) -> Result<u128> {
        parts.clear();
        for c in 0..self.chunks as u64 {
            parts.push(mem.read(base + c)?);
        }
        Ok(join_chunks(parts, self.word_bits))
    }

    fn check_point(&self, p: Point) -> Result<()> {
        if p.x as usize >= self.n || p.y as usize >= self.n {
            return Err(Error::invalid(alloc::format!(
                "point ({}, {}) outside [{}]^2",
                p.x,
                p.y,
                self.n
            )));
        }
        Ok(())
    }
}

impl DynamicStructure for TwoLevelPrefixSum {
    fn id(&self) -> &'static str {
        Self::ID
    }

    fn declared_update_bound(&self) -> usize {
        self.path_len().pow(2) * 2 * self.chunks
    }

    fn declared_query_bound(&self) -> usize {
        self.path_len().pow(2) * self.chunks
    }

    fn word_bits(&self) -> u32 {
        self.word_bits
    }

    fn update(&self, mem: &mut dyn CellProbe, op: &Update) -> Result<()> {
        check_word_bits(self, mem)?;
        let Update::Insert { point, weight } = *op else {
            return Err(Error::WrongOperationKind("range counting structure takes inserts"));
        };
        self.check_point(point)?;
        if weight >= self.modulus.value() {
            return Err(Error::invalid(alloc::format!(
                "weight {weight} not below {}",
                self.modulus.value()
            )));
        }
        let limit = self.capacity as u128 * (self.modulus.value() as u128 - 1);
        let mut parts = Vec::with_capacity(self.chunks);
        let mut x = point.x as usize + 1;
        while x <= self.n {
            let mut y = point.y as usize + 1;
            while y <= self.n {
                let base = self.node_base(x, y);
                let value = self.read_counter(mem, base, &mut parts)? + weight as u128;
                if value > limit {
                    return Err(Error::invalid("insert capacity exceeded"));
                }
                for (c, part) in split_chunks(value, self.word_bits, self.chunks).enumerate() {
                    mem.write(base + c as u64, part)?;
                }
                y += y & y.wrapping_neg();
            }
            x += x & x.wrapping_neg();
        }
        Ok(())
    }

    fn query(&self, mem: &mut dyn CellProbe, q: &Query) -> Result<u128> {
        check_word_bits(self, mem)?;
        let Query::Dominance(point) = *q else {
            return Err(Error::WrongOperationKind("range counting structure takes dominance queries"));
        };
        self.check_point(point)?;
        let mut parts = Vec::with_capacity(self.chunks);
        let mut total = 0u128;
        let mut x = point.x as usize + 1;
        while x > 0 {
            let mut y = point.y as usize + 1;
            while y > 0 {
                total += self.read_counter(mem, self.node_base(x, y), &mut parts)?;
                y &= y - 1;
            }
            x &= x - 1;
        }
        Ok(total)
    }
}
