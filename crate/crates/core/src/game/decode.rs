use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::bits::{mixed_radix_bits, unpack_mixed_radix, BitReader};
use super::{EncodingMessage, GameContext, SectionKind, MESSAGE_VERSION};
use crate::chronogram::{epoch_skeleton, execute_epochs, incidence_vector, EpochUpdates, ProblemKind};
use crate::error::{Error, Result};
use crate::field::{complete_basis, ff_solve, EchelonBasis, FieldMatrix, FieldVector};
use crate::lattice::Point;
use crate::memory::{Address, CellProbe, EpochId, SimulatedMemory, Word};
use crate::structures::{Query, Update};

/// Recovers the updates of epoch `i*` from a message and the earlier epochs.
///
/// `audit`, when given, is the encoder's final memory; any cell the replay
/// resolves from the prefix snapshot that was last written in epoch `i*`
/// raises an integrity error.
pub fn decode_epoch(
    msg: &EncodingMessage,
    ctx: &GameContext<'_>,
    prefix: &[EpochUpdates],
    audit: Option<&SimulatedMemory>,
) -> Result<EpochUpdates> {
    let h = &msg.header;
    if h.version != MESSAGE_VERSION {
        return Err(Error::Malformed(alloc::format!("unsupported message version {}", h.version)));
    }
    if h.kind != ctx.kind || h.n != ctx.n() || h.modulus != ctx.modulus.value() {
        return Err(Error::Malformed("message header does not match the game".into()));
    }
    let istar = h.istar;
    if istar == 0 || istar > ctx.schedule.count() {
        return Err(Error::Malformed(alloc::format!("epoch {istar} not in the schedule")));
    }
    let skeleton = epoch_skeleton(ctx.kind, &ctx.schedule)?;
    let expected_prefix = &skeleton[..(ctx.schedule.count() - istar) as usize];
    if prefix.len() != expected_prefix.len()
        || prefix
            .iter()
            .zip(expected_prefix)
            .any(|(a, b)| a.epoch != b.epoch || a.updates.len() != b.updates.len())
    {
        return Err(Error::invalid("prefix does not match the epochs before i*"));
    }
    let target = &skeleton[(ctx.schedule.count() - istar) as usize];
    let delta = ctx.modulus.value();

    if h.flag {
        let bits = msg.require(SectionKind::RawWeights)?;
        let mut r = BitReader::new(bits);
        let size = target.updates.len();
        let packed = r.read_big(mixed_radix_bits(delta, size))?;
        r.finish()?;
        return target.with_weights(&unpack_mixed_radix(&packed, delta, size)?);
    }

    let w = ctx.config.word_bits();
    let cells = {
        let mut r = BitReader::new(msg.require(SectionKind::Cells)?);
        let c = read_cells(&mut r, w)?;
        r.finish()?;
        c
    };
    let queries = {
        let mut r = BitReader::new(msg.require(SectionKind::Queries)?);
        let id_bits = ctx.query_id_bits();
        let count = r.read_u64(id_bits + 1)?;
        let qs = (0..count)
            .map(|_| ctx.query_from_id(r.read_u64(id_bits)?))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        qs
    };
    let smaller = {
        let mut r = BitReader::new(msg.require(SectionKind::SmallerCells)?);
        let mut all = BTreeMap::new();
        for _ in 1..istar {
            all.extend(read_cells(&mut r, w)?);
        }
        r.finish()?;
        all
    };
    // Epoch j's weights for j < i*, range counting only.
    let smaller_weights: BTreeMap<EpochId, Vec<u64>> = if ctx.kind == ProblemKind::Orc {
        let mut r = BitReader::new(msg.require(SectionKind::SmallerWeights)?);
        let mut out = BTreeMap::new();
        for j in (1..istar).rev() {
            let size = ctx.schedule.size(j) as usize;
            let packed = r.read_big(mixed_radix_bits(delta, size))?;
            out.insert(j, unpack_mixed_radix(&packed, delta, size)?);
        }
        r.finish()?;
        out
    } else {
        BTreeMap::new()
    };

    let (snapshot, _, _) = execute_epochs(ctx.structure, ctx.config, prefix)?;
    let mut view = DecoderView {
        snapshot: &snapshot,
        cells: &cells,
        smaller: &smaller,
        audit,
        istar,
        word_bits: w,
        probes: 0,
    };

    let dim = ctx.recovered_dim(istar);
    let mut rows = Vec::with_capacity(queries.len());
    let mut z = Vec::with_capacity(dim);
    let mut basis = EchelonBasis::new(ctx.modulus, dim);
    for q in &queries {
        view.probes = 0;
        let full = ctx.structure.query(&mut view, q)?;
        if view.probes > ctx.structure.declared_query_bound() {
            return Err(Error::QueryBoundExceeded {
                probes: view.probes,
                declared: ctx.structure.declared_query_bound(),
            });
        }
        let (row, known) = match (ctx.kind, *q) {
            (ProblemKind::Artificial, Query::Vector(j)) => {
                let v = ctx.family()?.vector(j);
                let known: u128 = prefix
                    .iter()
                    .flat_map(|e| e.updates.iter())
                    .map(|u| match *u {
                        Update::Assign { index, weight } => v.coords()[index] as u128 * weight as u128,
                        Update::Insert { .. } => 0,
                    })
                    .sum();
                (v.suffix(dim)?, known)
            }
            (ProblemKind::Orc, Query::Dominance(p)) => {
                let mut known = 0u128;
                for e in prefix {
                    known += dominated_weight(&e.updates, p);
                }
                for (&j, u) in &smaller_weights {
                    let pts = &skeleton[(ctx.schedule.count() - j) as usize];
                    let weighted = pts.with_weights(u)?;
                    known += dominated_weight(&weighted.updates, p);
                }
                let pts: Vec<Point> = target
                    .updates
                    .iter()
                    .filter_map(|u| match *u {
                        Update::Insert { point, .. } => Some(point),
                        Update::Assign { .. } => None,
                    })
                    .collect();
                (incidence_vector(&pts, p, ctx.modulus)?, known)
            }
            _ => return Err(Error::Malformed("query kind does not match the game".into())),
        };
        let rest = full
            .checked_sub(known)
            .ok_or_else(|| Error::Integrity("replayed answer below its known part".into()))?;
        if !basis.insert(&row)? {
            return Err(Error::Integrity("shipped queries have dependent rows".into()));
        }
        rows.push(row);
        z.push(ctx.modulus.reduce(rest));
    }

    let completion = complete_basis(ctx.modulus, &rows, dim)?;
    let mut r = BitReader::new(msg.require(SectionKind::InnerProducts)?);
    let packed = r.read_big(mixed_radix_bits(delta, completion.len()))?;
    r.finish()?;
    z.extend(unpack_mixed_radix(&packed, delta, completion.len())?);
    rows.extend(completion);

    let a = FieldMatrix::from_rows(ctx.modulus, dim, rows)?;
    let y = ff_solve(&a, &FieldVector::new(ctx.modulus, z)?).map_err(|e| match e {
        Error::SingularMatrix => Error::Integrity("decoder matrix is singular".into()),
        other => other,
    })?;
    let weights = &y.coords()[..target.updates.len()];
    target.with_weights(weights)
}

fn dominated_weight(updates: &[Update], q: Point) -> u128 {
    updates
        .iter()
        .map(|u| match *u {
            Update::Insert { point, weight } if point.dominated_by(q) => weight as u128,
            _ => 0,
        })
        .sum()
}

fn read_cells(r: &mut BitReader<'_>, w: u32) -> Result<BTreeMap<Address, Word>> {
    let count = r.read_u64(w + 1)?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let a = r.read_u64(w)?;
        let v = r.read_u64(w)?;
        if out.insert(a, v).is_some() {
            return Err(Error::Malformed(alloc::format!("cell {a} listed twice")));
        }
    }
    Ok(out)
}

/// Read-only memory seen by the decoder: shipped smaller-epoch cells first,
/// then the resolving set, then the prefix snapshot.
struct DecoderView<'a> {
    snapshot: &'a SimulatedMemory,
    cells: &'a BTreeMap<Address, Word>,
    smaller: &'a BTreeMap<Address, Word>,
    audit: Option<&'a SimulatedMemory>,
    istar: EpochId,
    word_bits: u32,
    probes: usize,
}

impl CellProbe for DecoderView<'_> {
    fn word_bits(&self) -> u32 {
        self.word_bits
    }

    fn read(&mut self, address: Address) -> Result<Word> {
        self.probes += 1;
        if let Some(&v) = self.smaller.get(&address) {
            return Ok(v);
        }
        if let Some(&v) = self.cells.get(&address) {
            return Ok(v);
        }
        if let Some(final_memory) = self.audit {
            if final_memory.epoch_of(address) == Some(self.istar) {
                return Err(Error::Integrity(alloc::format!(
                    "replay reads epoch-{} cell {address} outside the resolving set",
                    self.istar
                )));
            }
        }
        Ok(self.snapshot.peek(address))
    }

    fn write(&mut self, _address: Address, _value: Word) -> Result<()> {
        Err(Error::MemoryFrozen)
    }
}

