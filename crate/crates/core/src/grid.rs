//! Grids over `[n]²`, hitting numbers, slab query samples, well-separated
//! subsets, and the crossing-out procedure that extracts queries with
//! linearly independent incidence vectors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::rng::{self, Stream};

/// A non-negative rational `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Result<Self> {
        if den == 0 || num == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(v: u64) -> Self {
        Ratio { num: v as u128, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌊v / self⌋`.
    fn index_of(self, v: u64) -> u64 {
        (v as u128 * self.den / self.num) as u64
    }

    /// `⌈n / self⌉`, the number of cells needed to cover `[0, n)`.
    fn cover(self, n: u64) -> u64 {
        (n as u128 * self.den).div_ceil(self.num) as u64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Half-open cells `[jμ, (j+1)μ) × [hγ, (h+1)γ)` covering `[0, n)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n: u64,
    pub width: Ratio,
    pub height: Ratio,
}

impl Grid {
    pub fn new(n: u64, width: Ratio, height: Ratio) -> Result<Self> {
        if width.num < width.den || height.num < height.den {
            return Err(Error::invalid("grid width and height must be at least 1"));
        }
        Ok(Grid { n, width, height })
    }

    /// `(column, row)` of the cell containing `p`.
    pub fn cell_of(&self, p: Point) -> (u64, u64) {
        (self.width.index_of(p.x), self.height.index_of(p.y))
    }

    pub fn columns(&self) -> u64 {
        self.width.cover(self.n)
    }

    pub fn rows(&self) -> u64 {
        self.height.cover(self.n)
    }
}

/// Grids `G_2 ..= G_{2i-2}` for epoch `i`; `G_j` has width
/// `n / β^{i - j/2}` and height `n / β^{j/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFamily {
    pub epoch: u32,
    /// `(j, G_j)` in increasing `j`.
    pub grids: Vec<(u32, Grid)>,
    /// Dimensions are exact rationals (β a perfect square) rather than floored.
    pub exact: bool,
}

fn perfect_square_root(beta: f64) -> Option<u64> {
    if libm::trunc(beta) != beta || !(1.0..=1e15).contains(&beta) {
        return None;
    }
    let b = beta as u64;
    let r = libm::sqrt(b as f64) as u64;
    (r.saturating_sub(1)..=r + 1).find(|&s| s * s == b)
}

pub fn build_grid_family(n: u64, beta: f64, i: u32) -> Result<GridFamily> {
    if i < 2 {
        return Err(Error::invalid("grid families need epoch i >= 2"));
    }
    if beta.is_nan() || beta <= 1.0 {
        return Err(Error::invalid("grid families need beta > 1"));
    }
    let root = perfect_square_root(beta);
    let mut grids = Vec::new();
    for j in 2..=2 * i - 2 {
        let (width, height) = match root {
            // n / b^(2i - j) and n / b^j.
            Some(b) => (
                Ratio::new(n as u128, (b as u128).pow(2 * i - j))?,
                Ratio::new(n as u128, (b as u128).pow(j))?,
            ),
            None => {
                let w = libm::pow(beta, i as f64 - j as f64 / 2.0);
                let h = libm::pow(beta, j as f64 / 2.0);
                let floor_at_least_one = |d: f64| Ratio::integer((libm::floor(n as f64 / d) as u64).max(1));
                (floor_at_least_one(w), floor_at_least_one(h))
            }
        };
        let width = if width.num < width.den { Ratio::integer(1) } else { width };
        let height = if height.num < height.den { Ratio::integer(1) } else { height };
        grids.push((j, Grid::new(n, width, height)?));
    }
    Ok(GridFamily {
        epoch: i,
        grids,
        exact: root.is_some(),
    })
}

/// The family for an epoch of `m` points, using `β = m^{1/i}`.
pub fn grid_family_for_epoch(n: u64, m: u64, i: u32) -> Result<GridFamily> {
    if i < 2 {
        return Err(Error::invalid("grid families need epoch i >= 2"));
    }
    build_grid_family(n, libm::pow(m as f64, 1.0 / i as f64), i)
}

/// Number of distinct grid cells containing at least one query.
pub fn hitting_number(queries: &[Point], grid: &Grid) -> usize {
    queries.iter().map(|&q| grid.cell_of(q)).collect::<BTreeSet<_>>().len()
}

/// One query per hit cell: the lowest by `(x, y)`.
pub fn representatives(queries: &[Point], grid: &Grid) -> Vec<Point> {
    let mut best: BTreeMap<(u64, u64), Point> = BTreeMap::new();
    for &q in queries {
        best.entry(grid.cell_of(q))
            .and_modify(|p| *p = (*p).min(q))
            .or_insert(q);
    }
    best.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellSeparated {
    /// Queries whose enclosing rectangle with every other query is large.
    pub queries: Vec<Point>,
    /// At least half of the input qualifies.
    pub flag: bool,
}

/// Keeps `q` when `|x - x'|·|y - y'| ≥ threshold` for every other `q'`.
/// A zero side length gives area 0.
pub fn well_separated_subset(queries: &[Point], threshold: f64) -> WellSeparated {
    let area = |a: Point, b: Point| a.x.abs_diff(b.x) as f64 * a.y.abs_diff(b.y) as f64;
    let kept: Vec<Point> = queries
        .iter()
        .enumerate()
        .filter(|&(i, &q)| {
            queries
                .iter()
                .enumerate()
                .all(|(k, &r)| k == i || area(q, r) >= threshold)
        })
        .map(|(_, &q)| q)
        .collect();
    WellSeparated {
        flag: 2 * kept.len() >= queries.len(),
        queries: kept,
    }
}

/// `⌊β^{i-1}⌋` vertical slabs tiling `[0, n)`; slab `h` spans
/// `[⌈hn/s⌉, ⌈(h+1)n/s⌉)`.
pub fn slab_count(beta: f64, i: u32) -> usize {
    libm::floor(libm::pow(beta, i as f64 - 1.0) + 1e-9) as usize
}

pub fn slab_bounds(n: u64, slabs: usize, h: usize) -> (u64, u64) {
    let s = slabs as u128;
    let lo = (h as u128 * n as u128).div_ceil(s) as u64;
    let hi = ((h as u128 + 1) * n as u128).div_ceil(s) as u64;
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlabSample {
    pub seed: u64,
    /// Query `h` lies in slab `h`.
    pub queries: Vec<Point>,
}

/// One uniform integer point from each vertical slab.
pub fn sample_slab_queries(n: u64, beta: f64, i: u32, seed: u64) -> Result<SlabSample> {
    if i < 1 || beta.is_nan() || beta <= 1.0 {
        return Err(Error::invalid("slab samples need i >= 1 and beta > 1"));
    }
    let slabs = slab_count(beta, i);
    if slabs == 0 || slabs as u64 > n {
        return Err(Error::invalid(alloc::format!("{slabs} slabs do not fit width {n}")));
    }
    let mut rng = rng::stream(seed, Stream::SlabSampling);
    let queries = (0..slabs)
        .map(|h| {
            let (lo, hi) = slab_bounds(n, slabs, h);
            Point::new(rng.gen_range(lo..hi), rng.gen_range(0..n))
        })
        .collect();
    Ok(SlabSample { seed, queries })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossOutReport {
    /// Hitting number of the input.
    pub hit: usize,
    /// Representatives removed with the bottom two rows or left two columns.
    pub boundary_removed: usize,
    /// Removed by the two column passes then the two row passes.
    pub parity_removed: [usize; 4],
    /// Survivors ordered by column, then row.
    pub survivors: Vec<Point>,
}

/// Removes the queries in every other line of `lines`, choosing the parity
/// that holds fewer queries (even on ties). Returns the removed count.
fn parity_pass(lines: &mut Vec<u64>, queries: &mut Vec<((u64, u64), Point)>, pick: fn(&(u64, u64)) -> u64) -> usize {
    let count_at = |parity: usize, lines: &[u64], queries: &[((u64, u64), Point)]| {
        let set: BTreeSet<u64> = lines.iter().skip(parity).step_by(2).copied().collect();
        (set.clone(), queries.iter().filter(|(c, _)| set.contains(&pick(c))).count())
    };
    let (even, even_n) = count_at(0, lines, queries);
    let (odd, odd_n) = count_at(1, lines, queries);
    let (gone, removed) = if odd_n < even_n { (odd, odd_n) } else { (even, even_n) };
    lines.retain(|l| !gone.contains(l));
    queries.retain(|(c, _)| !gone.contains(&pick(c)));
    removed
}

/// Keeps one query per hit cell, crosses out the bottom two rows and left two
/// columns, then halves the columns twice and the rows twice by parity.
/// Surviving cells are at least four columns or rows apart.
pub fn cross_out_extract(queries: &[Point], grid: &Grid) -> CrossOutReport {
    let reps = representatives(queries, grid);
    let hit = reps.len();
    let mut cells: Vec<((u64, u64), Point)> = reps
        .into_iter()
        .map(|q| (grid.cell_of(q), q))
        .filter(|((c, r), _)| *c >= 2 && *r >= 2)
        .collect();
    let boundary_removed = hit - cells.len();
    let mut columns: Vec<u64> = (2..grid.columns()).collect();
    let mut rows: Vec<u64> = (2..grid.rows()).collect();
    let mut parity_removed = [0; 4];
    parity_removed[0] = parity_pass(&mut columns, &mut cells, |c| c.0);
    parity_removed[1] = parity_pass(&mut columns, &mut cells, |c| c.0);
    parity_removed[2] = parity_pass(&mut rows, &mut cells, |c| c.1);
    parity_removed[3] = parity_pass(&mut rows, &mut cells, |c| c.1);
    cells.sort_unstable_by_key(|(c, _)| *c);
    CrossOutReport {
        hit,
        boundary_removed,
        parity_removed,
        survivors: cells.into_iter().map(|(_, q)| q).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_dimensions() {
        let f = build_grid_family(64, 4.0, 3).unwrap();
        assert!(f.exact);
        let (j, g2) = f.grids[0];
        assert_eq!(j, 2);
        assert_eq!(g2.width, Ratio::integer(4));
        assert_eq!(g2.height, Ratio::integer(16));
        assert_eq!(f.grids.len(), 3);
        for (_, g) in &f.grids {
            let area = g.width.num * g.height.num;
            assert_eq!(area * 64, 64 * 64 * g.width.den * g.height.den);
        }
        assert!(build_grid_family(64, 4.0, 1).is_err());
    }

    #[test]
    fn floored_family_for_non_square_beta() {
        let f = grid_family_for_epoch(440, 55, 3).unwrap();
        assert!(!f.exact);
        let dims: Vec<(u128, u128)> = f.grids.iter().map(|(_, g)| (g.width.num, g.height.num)).collect();
        assert_eq!(dims, [(30, 115), (59, 59), (115, 30)]);
    }

    #[test]
    fn hitting_examples() {
        let g = Grid::new(25, Ratio::integer(5), Ratio::integer(5)).unwrap();
        assert_eq!(hitting_number(&[], &g), 0);
        let q = [Point::new(1, 1), Point::new(6, 6), Point::new(7, 8)];
        assert_eq!(hitting_number(&q, &g), 2);
        assert_eq!(hitting_number(&q[1..], &g), 1);
        assert_eq!(representatives(&q, &g), [Point::new(1, 1), Point::new(6, 6)]);
    }

    #[test]
    fn well_separated_examples() {
        let one = well_separated_subset(&[Point::new(3, 3)], 4.0);
        assert_eq!(one.queries.len(), 1);
        assert!(one.flag);
        let close = well_separated_subset(&[Point::new(0, 0), Point::new(1, 1)], 4.0);
        assert!(close.queries.is_empty());
        assert!(!close.flag);
        let far = well_separated_subset(&[Point::new(0, 0), Point::new(10, 10)], 4.0);
        assert_eq!(far.queries.len(), 2);
        let flat = well_separated_subset(&[Point::new(0, 5), Point::new(10, 5)], 4.0);
        assert!(flat.queries.is_empty());
    }

    #[test]
    fn slabs_tile_the_width() {
        let s = sample_slab_queries(440, 55f64.powf(1.0 / 3.0), 3, 4).unwrap();
        assert_eq!(s.queries.len(), 14);
        for (h, q) in s.queries.iter().enumerate() {
            let (lo, hi) = slab_bounds(440, 14, h);
            assert!(lo <= q.x && q.x < hi);
        }
        assert_eq!(slab_bounds(440, 14, 13).1, 440);
        assert_eq!(s, sample_slab_queries(440, 55f64.powf(1.0 / 3.0), 3, 4).unwrap());
        assert!(sample_slab_queries(10, 4.0, 3, 0).is_err());
    }

    #[test]
    fn cross_out_basics() {
        let g = Grid::new(64, Ratio::integer(4), Ratio::integer(4)).unwrap();
        let empty = cross_out_extract(&[], &g);
        assert!(empty.survivors.is_empty());
        assert_eq!(empty.hit, 0);
        let one = cross_out_extract(&[Point::new(40, 40)], &g);
        assert_eq!(one.survivors, [Point::new(40, 40)]);
        let low = cross_out_extract(&[Point::new(40, 3)], &g);
        assert_eq!(low.boundary_removed, 1);
        assert!(low.survivors.is_empty());
    }

    #[test]
    fn survivors_are_spread_apart() {
        let g = Grid::new(64, Ratio::integer(2), Ratio::integer(2)).unwrap();
        let all: Vec<Point> = (0..64).flat_map(|x| (0..64).map(move |y| Point::new(x, y))).collect();
        let r = cross_out_extract(&all, &g);
        assert_eq!(r.hit, 32 * 32);
        let cells: BTreeSet<(u64, u64)> = r.survivors.iter().map(|&q| g.cell_of(q)).collect();
        let cols: BTreeSet<u64> = cells.iter().map(|c| c.0).collect();
        let rows: BTreeSet<u64> = cells.iter().map(|c| c.1).collect();
        assert_eq!(cols.len() * rows.len(), cells.len());
        for w in cols.iter().collect::<Vec<_>>().windows(2) {
            assert_eq!(w[1] - w[0], 4);
        }
        assert!(r.survivors.len() * 16 >= r.hit - r.boundary_removed);
    }
}
