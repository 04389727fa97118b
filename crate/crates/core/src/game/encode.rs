use alloc::vec::Vec;

use super::bits::{mixed_radix_bits, pack_mixed_radix, BitWriter};
use super::entropy::lg_binomial;
use super::resolve::ResolvedSet;
use super::{EncodingMessage, GameContext, MessageHeader, Section, SectionKind, MESSAGE_VERSION};
use crate::chronogram::{incidence_vector, ProblemKind, RunRecord};
use crate::error::{Error, Result};
use crate::field::{complete_basis, EchelonBasis, FieldVector};
use crate::grid::{cross_out_extract, grid_family_for_epoch};
use crate::memory::{EpochId, SimulatedMemory};
use crate::structures::Query;

/// When the encoder falls back to shipping raw weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlagPolicy {
    /// Raw weights when the mean epoch-`i*` probe count exceeds the value
    /// (typically twice its expectation) or no resolved set exists.
    Threshold(f64),
    /// Always ship raw weights.
    AlwaysRaw,
}

/// How range-counting queries are thinned to independent incidence rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySelection {
    /// Crossing out on the grid family of `i*`, best grid kept.
    CrossOut,
    /// Greedy rank-increasing selection.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeOptions {
    pub flag_policy: FlagPolicy,
    pub selection: QuerySelection,
    /// `c` in the cap `⌊β^{i*} / (c·lg β^{i*})⌋` on shipped artificial queries.
    pub independence_constant: f64,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            flag_policy: FlagPolicy::Threshold(f64::INFINITY),
            selection: QuerySelection::CrossOut,
            independence_constant: crate::family::DEFAULT_INDEPENDENCE_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    pub flag: bool,
    /// `t_{i*}(U)` as supplied by the caller.
    pub mean_probes: f64,
    pub resolved_queries: usize,
    /// Queries shipped; their rows are independent.
    pub shipped_queries: usize,
    /// Candidates dropped because their rows were dependent.
    pub rank_deficit: usize,
    /// `lg C(n², |Q|)`, the information-theoretic cost of the query set.
    pub lg_binomial_queries: f64,
}

pub fn encode_epoch(
    ctx: &GameContext<'_>,
    run: &RunRecord,
    istar: EpochId,
    resolved: Option<&ResolvedSet>,
    mean_probes: f64,
    opts: &EncodeOptions,
) -> Result<(EncodingMessage, EncodeReport)> {
    if run.kind != ctx.kind || run.modulus != ctx.modulus {
        return Err(Error::invalid("run does not match the game context"));
    }
    let epoch = run.epoch(istar)?;
    let raw = match opts.flag_policy {
        FlagPolicy::AlwaysRaw => true,
        FlagPolicy::Threshold(t) => mean_probes > t,
    };
    let mut header = MessageHeader {
        version: MESSAGE_VERSION,
        kind: ctx.kind,
        n: ctx.n(),
        beta: ctx.schedule.beta(),
        istar,
        modulus: ctx.modulus.value(),
        seed: run.seed,
        flag: true,
    };
    let mut report = EncodeReport {
        flag: true,
        mean_probes,
        resolved_queries: resolved.map_or(0, |r| r.queries.len()),
        shipped_queries: 0,
        rank_deficit: 0,
        lg_binomial_queries: 0.0,
    };
    let resolved = match resolved {
        Some(r) if !raw => r,
        _ => {
            let weights = epoch.weights();
            let mut w = BitWriter::new();
            w.write_big(
                &pack_mixed_radix(&weights, ctx.modulus.value())?,
                mixed_radix_bits(ctx.modulus.value(), weights.len()),
            )?;
            let msg = EncodingMessage {
                header,
                sections: alloc::vec![Section {
                    kind: SectionKind::RawWeights,
                    bits: w.finish(),
                }],
            };
            return Ok((msg, report));
        }
    };
    if resolved.epoch != istar {
        return Err(Error::invalid("resolved set belongs to another epoch"));
    }
    header.flag = false;
    report.flag = false;

    let (queries, rows, deficit) = select_queries(ctx, run, istar, resolved, opts)?;
    report.shipped_queries = queries.len();
    report.rank_deficit = deficit;
    report.lg_binomial_queries = lg_binomial(ctx.n() * ctx.n(), queries.len() as u64);

    let dim = ctx.recovered_dim(istar);
    let target: Vec<u64> = match ctx.kind {
        ProblemKind::Artificial => {
            let log = run.log();
            log[log.len() - dim..]
                .iter()
                .map(|u| match *u {
                    crate::structures::Update::Assign { weight, .. } | crate::structures::Update::Insert { weight, .. } => weight,
                })
                .collect()
        }
        ProblemKind::Orc => epoch.weights(),
    };
    let target = FieldVector::new(ctx.modulus, target)?;
    let completion = complete_basis(ctx.modulus, &rows, dim)?;
    let products = completion
        .iter()
        .map(|x| x.dot(&target))
        .collect::<Result<Vec<u64>>>()?;

    let w = ctx.config.word_bits();
    let mut sections = Vec::new();

    let mut cells = BitWriter::new();
    write_cells(&mut cells, &run.memory, &resolved.cells, w)?;
    sections.push(Section {
        kind: SectionKind::Cells,
        bits: cells.finish(),
    });

    let id_bits = ctx.query_id_bits();
    let mut qs = BitWriter::new();
    qs.write_u64(queries.len() as u64, id_bits + 1)?;
    for q in &queries {
        qs.write_u64(ctx.query_id(q), id_bits)?;
    }
    sections.push(Section {
        kind: SectionKind::Queries,
        bits: qs.finish(),
    });

    let mut ip = BitWriter::new();
    ip.write_big(
        &pack_mixed_radix(&products, ctx.modulus.value())?,
        mixed_radix_bits(ctx.modulus.value(), products.len()),
    )?;
    sections.push(Section {
        kind: SectionKind::InnerProducts,
        bits: ip.finish(),
    });

    let mut smaller = BitWriter::new();
    for j in (1..istar).rev() {
        let addrs: Vec<u64> = run.memory.cells_of_epoch(j).into_iter().map(|(a, _)| a).collect();
        write_cells(&mut smaller, &run.memory, &addrs, w)?;
    }
    sections.push(Section {
        kind: SectionKind::SmallerCells,
        bits: smaller.finish(),
    });

    if ctx.kind == ProblemKind::Orc {
        let mut sw = BitWriter::new();
        for j in (1..istar).rev() {
            let u = run.epoch(j)?.weights();
            sw.write_big(
                &pack_mixed_radix(&u, ctx.modulus.value())?,
                mixed_radix_bits(ctx.modulus.value(), u.len()),
            )?;
        }
        sections.push(Section {
            kind: SectionKind::SmallerWeights,
            bits: sw.finish(),
        });
    }
    Ok((EncodingMessage { header, sections }, report))
}

/// Count in `w + 1` bits, then `(address, contents)` pairs of `w` bits each.
fn write_cells(out: &mut BitWriter, memory: &SimulatedMemory, addrs: &[u64], w: u32) -> Result<()> {
    out.write_u64(addrs.len() as u64, w + 1)?;
    for &a in addrs {
        out.write_u64(a, w)?;
        out.write_u64(memory.peek(a), w)?;
    }
    Ok(())
}

/// Picks the shipped queries and their independent rows.
fn select_queries(
    ctx: &GameContext<'_>,
    run: &RunRecord,
    istar: EpochId,
    resolved: &ResolvedSet,
    opts: &EncodeOptions,
) -> Result<(Vec<Query>, Vec<FieldVector>, usize)> {
    let dim = ctx.recovered_dim(istar);
    let (candidates, cap): (Vec<(Query, FieldVector)>, usize) = match ctx.kind {
        ProblemKind::Artificial => {
            let family = ctx.family()?;
            let size = ctx.schedule.size(istar) as f64;
            let cap = if size < 2.0 {
                0
            } else {
                libm::floor(size / (opts.independence_constant * libm::log2(size))) as usize
            };
            let rows = resolved
                .queries
                .iter()
                .map(|q| match *q {
                    Query::Vector(j) => Ok((*q, family.vector(j).suffix(dim)?)),
                    Query::Dominance(_) => Err(Error::WrongOperationKind("artificial game takes vector queries")),
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, cap)
        }
        ProblemKind::Orc => {
            let points = run.points(istar)?;
            let mut pts: Vec<crate::lattice::Point> = resolved
                .queries
                .iter()
                .map(|q| match *q {
                    Query::Dominance(p) => Ok(p),
                    Query::Vector(_) => Err(Error::WrongOperationKind("range counting game takes points")),
                })
                .collect::<Result<Vec<_>>>()?;
            if opts.selection == QuerySelection::CrossOut && istar >= 2 {
                let family = grid_family_for_epoch(ctx.n(), dim as u64, istar)?;
                pts = family
                    .grids
                    .iter()
                    .map(|(_, g)| cross_out_extract(&pts, g).survivors)
                    .max_by_key(|s| s.len())
                    .unwrap_or_default();
            } else {
                pts.sort_unstable();
                pts.dedup();
            }
            let rows = pts
                .into_iter()
                .map(|p| Ok((Query::Dominance(p), incidence_vector(&points, p, ctx.modulus)?)))
                .collect::<Result<Vec<_>>>()?;
            (rows, dim)
        }
    };
    let mut basis = EchelonBasis::new(ctx.modulus, dim);
    let (mut queries, mut rows, mut deficit) = (Vec::new(), Vec::new(), 0);
    for (q, row) in candidates {
        if queries.len() >= cap {
            break;
        }
        if basis.insert(&row)? {
            queries.push(q);
            rows.push(row);
        } else {
            deficit += 1;
        }
    }
    Ok((queries, rows, deficit))
}
