//! Fibonacci lattices `F_m = {(j, j·f_{k-1} mod m)}` scaled onto `[n]×[n]`,
//! rectangle counting, and the area-bound check.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `f_1 = f_2 = 1`, `f_k = f_{k-1} + f_{k-2}`.
pub fn fibonacci(k: u32) -> Result<u64> {
    if k == 0 {
        return Err(Error::invalid("Fibonacci index starts at 1"));
    }
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 1..k {
        let next = a
            .checked_add(b)
            .ok_or_else(|| Error::invalid("Fibonacci number overflows u64"))?;
        a = b;
        b = next;
    }
    Ok(b)
}

/// The index `k` with `f_k = m`, taking the larger index for `m = 1`.
pub fn fibonacci_index(m: u64) -> Option<u32> {
    if m == 0 {
        return None;
    }
    let (mut a, mut b, mut k) = (1u64, 1u64, 2u32);
    while b < m {
        let next = a.checked_add(b)?;
        a = b;
        b = next;
        k += 1;
    }
    (b == m).then_some(k)
}

/// Largest Fibonacci number `<= x` (`x >= 1`).
pub fn snap_to_fibonacci(x: u64) -> u64 {
    let (mut a, mut b) = (1u64, 1u64);
    while let Some(next) = a.checked_add(b) {
        if next > x {
            break;
        }
        a = b;
        b = next;
    }
    b.min(x.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: u64,
    pub y: u64,
}

impl Point {
    pub const fn new(x: u64, y: u64) -> Self {
        Point { x, y }
    }

    /// `self` is dominated by `q`.
    #[inline]
    pub fn dominated_by(&self, q: Point) -> bool {
        self.x <= q.x && self.y <= q.y
    }
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: u64,
    pub x1: u64,
    pub y0: u64,
    pub y1: u64,
}

impl Rect {
    pub fn new(x0: u64, x1: u64, y0: u64, y1: u64) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::invalid("rectangle corners out of order"));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    /// Continuous area `(x1 - x0)(y1 - y0)`.
    pub fn area(&self) -> u128 {
        (self.x1 - self.x0) as u128 * (self.y1 - self.y0) as u128
    }
}

/// A Fibonacci lattice `F_m` (with `m = f_k`) scaled onto `[n]×[n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    m: u64,
    multiplier: u64,
    n: u64,
}

impl LatticeSpec {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        let k = fibonacci_index(m).ok_or(Error::NotFibonacci(m))?;
        if m > n {
            return Err(Error::invalid(alloc::format!("lattice size {m} exceeds extent {n}")));
        }
        Ok(LatticeSpec {
            m,
            multiplier: fibonacci(k - 1)?,
            n,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn multiplier(&self) -> u64 {
        self.multiplier
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// The `j`'th point: `(⌊jn/m⌋, ⌊(j·f_{k-1} mod m)·n/m⌋)`.
    pub fn point(&self, j: u64) -> Point {
        let row = (j as u128 * self.multiplier as u128 % self.m as u128) as u64;
        Point::new(self.scale(j), self.scale(row))
    }

    #[inline]
    fn scale(&self, v: u64) -> u64 {
        (v as u128 * self.n as u128 / self.m as u128) as u64
    }

    /// Upper end of the area-bound domain, `⌊n - n/m⌋`.
    pub fn domain_limit(&self) -> u64 {
        (self.n as u128 * (self.m as u128 - 1) / self.m as u128) as u64
    }
}

/// Points in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    pub points: Vec<Point>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn scaled_lattice(spec: &LatticeSpec) -> PointSet {
    PointSet {
        points: (0..spec.m).map(|j| spec.point(j)).collect(),
    }
}

pub fn count_in_rectangle(points: &PointSet, rect: &Rect) -> usize {
    points.points.iter().filter(|p| rect.contains(**p)).count()
}

/// Area-bound constants `a1 ≈ 1.9`, `a2 ≈ 0.45` as exact tenths/hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AreaBoundConstants {
    /// `a1 = a1_num / a1_den`
    pub a1_num: u64,
    pub a1_den: u64,
    pub a2_num: u64,
    pub a2_den: u64,
}

impl AreaBoundConstants {
    pub const DEFAULT: AreaBoundConstants = AreaBoundConstants {
        a1_num: 19,
        a1_den: 10,
        a2_num: 45,
        a2_den: 100,
    };

    pub fn a1(&self) -> f64 {
        self.a1_num as f64 / self.a1_den as f64
    }

    pub fn a2(&self) -> f64 {
        self.a2_num as f64 / self.a2_den as f64
    }
}

pub const AREA_BOUND_SLACK: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub alpha: f64,
    pub lower: u64,
    pub upper: u64,
    pub actual: u64,
    pub pass: bool,
}

/// Checks that `rect` holds between `⌊α/a1⌋` and `⌈α/a2⌉` lattice points
/// (±1 slack), where `α = area·m/n²`. Bounds are computed exactly in
/// integers; `alpha` is for reporting.
pub fn check_area_bounds(spec: &LatticeSpec, rect: &Rect) -> Result<BoundCheck> {
    let points = scaled_lattice(spec);
    let actual = count_in_rectangle(&points, rect) as u64;
    check_area_bounds_with_count(spec, rect, actual, &AreaBoundConstants::DEFAULT)
}

/// As [`check_area_bounds`] with the point count supplied by the caller, for
/// sweeps that count with prefix sums.
pub fn check_area_bounds_with_count(
    spec: &LatticeSpec,
    rect: &Rect,
    actual: u64,
    constants: &AreaBoundConstants,
) -> Result<BoundCheck> {
    let limit = spec.domain_limit();
    if rect.x1 > limit || rect.y1 > limit {
        return Err(Error::OutsideDomain(alloc::format!(
            "rectangle exceeds [0, {limit}]^2"
        )));
    }
    let area = rect.area();
    let n2 = spec.n as u128 * spec.n as u128;
    let m = spec.m as u128;
    // α/a1 = area·m·a1_den / (n²·a1_num)
    let lower_num = area * m * constants.a1_den as u128;
    let lower_den = n2 * constants.a1_num as u128;
    let lower = (lower_num / lower_den) as u64;
    let upper_num = area * m * constants.a2_den as u128;
    let upper_den = n2 * constants.a2_num as u128;
    let upper = upper_num.div_ceil(upper_den) as u64;
    let alpha = area as f64 * spec.m as f64 / n2 as f64;
    let pass = actual + AREA_BOUND_SLACK >= lower && actual <= upper + AREA_BOUND_SLACK;
    Ok(BoundCheck {
        alpha,
        lower,
        upper,
        actual,
        pass,
    })
}

/// 2-D prefix counts over lattice columns/rows for `O(1)` rectangle counts
/// when rectangle corners are lattice coordinates.
pub struct LatticeCounter {
    m: usize,
    table: Vec<u32>,
}

impl LatticeCounter {
    pub fn new(spec: &LatticeSpec) -> Self {
        let m = spec.m as usize;
        let mut table = alloc::vec![0u32; (m + 1) * (m + 1)];
        for j in 0..m {
            let row = (j as u128 * spec.multiplier as u128 % spec.m as u128) as usize;
            table[(j + 1) * (m + 1) + row + 1] = 1;
        }
        for a in 1..=m {
            for b in 1..=m {
                table[a * (m + 1) + b] += table[(a - 1) * (m + 1) + b]
                    + table[a * (m + 1) + b - 1]
                    - table[(a - 1) * (m + 1) + b - 1];
            }
        }
        LatticeCounter { m, table }
    }

    /// Points with column in `[c0, c1]` and row in `[r0, r1]` (unscaled indices).
    pub fn count(&self, c0: usize, c1: usize, r0: usize, r1: usize) -> u64 {
        let w = self.m + 1;
        let t = |a: usize, b: usize| self.table[a * w + b] as i64;
        (t(c1 + 1, r1 + 1) - t(c0, r1 + 1) - t(c1 + 1, r0) + t(c0, r0)) as u64
    }
}

/// Outcome of checking every rectangle with corners on lattice coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rectangles: u64,
    pub failures: u64,
    pub first_failure: Option<(Rect, BoundCheck)>,
}

/// Checks the area bounds on every rectangle whose corners are lattice
/// coordinates inside the domain.
pub fn sweep_lattice_rectangles(spec: &LatticeSpec) -> Result<SweepReport> {
    let counter = LatticeCounter::new(spec);
    let limit = spec.domain_limit();
    let coords: Vec<(usize, u64)> = (0..spec.m)
        .map(|j| (j as usize, spec.scale(j)))
        .filter(|&(_, v)| v <= limit)
        .collect();
    let mut report = SweepReport {
        rectangles: 0,
        failures: 0,
        first_failure: None,
    };
    for (a, &(c0, x0)) in coords.iter().enumerate() {
        for &(c1, x1) in &coords[a..] {
            for (b, &(r0, y0)) in coords.iter().enumerate() {
                for &(r1, y1) in &coords[b..] {
                    let rect = Rect { x0, x1, y0, y1 };
                    let actual = counter.count(c0, c1, r0, r1);
                    let check = check_area_bounds_with_count(spec, &rect, actual, &AreaBoundConstants::DEFAULT)?;
                    report.rectangles += 1;
                    if !check.pass {
                        report.failures += 1;
                        report.first_failure.get_or_insert((rect, check));
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_all_coordinate_pairs() {
        let spec = LatticeSpec::new(13, 104).unwrap();
        let r = sweep_lattice_rectangles(&spec).unwrap();
        assert_eq!(r.rectangles, 91 * 91);
        assert_eq!(r.failures, 0);
    }

    #[test]
    fn fibonacci_examples() {
        assert_eq!(fibonacci(1).unwrap(), 1);
        assert_eq!(fibonacci(5).unwrap(), 5);
        assert_eq!(fibonacci(10).unwrap(), 55);
        assert!(fibonacci(0).is_err());
    }

    #[test]
    fn fibonacci_index_and_snap() {
        assert_eq!(fibonacci_index(55), Some(10));
        assert_eq!(fibonacci_index(54), None);
        assert_eq!(snap_to_fibonacci(25), 21);
        assert_eq!(snap_to_fibonacci(125), 89);
        assert_eq!(snap_to_fibonacci(5), 5);
        assert_eq!(snap_to_fibonacci(1), 1);
    }

    fn pts(v: &[(u64, u64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn scaled_lattice_examples() {
        let one = scaled_lattice(&LatticeSpec::new(1, 8).unwrap());
        assert_eq!(one.points, pts(&[(0, 0)]));
        let f5 = scaled_lattice(&LatticeSpec::new(5, 25).unwrap());
        assert_eq!(f5.points, pts(&[(0, 0), (5, 15), (10, 5), (15, 20), (20, 10)]));
        let f8 = scaled_lattice(&LatticeSpec::new(8, 8).unwrap());
        assert_eq!(
            f8.points,
            pts(&[(0, 0), (1, 5), (2, 2), (3, 7), (4, 4), (5, 1), (6, 6), (7, 3)])
        );
        assert_eq!(LatticeSpec::new(6, 8), Err(Error::NotFibonacci(6)));
    }

    #[test]
    fn rectangle_counts() {
        let f8 = scaled_lattice(&LatticeSpec::new(8, 8).unwrap());
        assert_eq!(count_in_rectangle(&f8, &Rect::new(0, 3, 0, 3).unwrap()), 2);
        assert_eq!(count_in_rectangle(&f8, &Rect::new(100, 200, 100, 200).unwrap()), 0);
        let f5 = scaled_lattice(&LatticeSpec::new(5, 25).unwrap());
        assert_eq!(count_in_rectangle(&f5, &Rect::new(0, 20, 0, 20).unwrap()), 5);
    }

    #[test]
    fn area_bound_example() {
        let spec = LatticeSpec::new(5, 25).unwrap();
        let c = check_area_bounds(&spec, &Rect::new(0, 20, 0, 20).unwrap()).unwrap();
        assert!((c.alpha - 3.2).abs() < 1e-12);
        assert_eq!((c.lower, c.upper, c.actual, c.pass), (1, 8, 5, true));
        let zero = check_area_bounds(&spec, &Rect::new(5, 5, 0, 20).unwrap()).unwrap();
        assert_eq!(zero.lower, 0);
        assert!(zero.pass);
        assert!(matches!(
            check_area_bounds(&spec, &Rect::new(0, 21, 0, 5).unwrap()),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn lattice_rows_are_a_permutation() {
        for m in [13u64, 21, 34, 55, 89] {
            let spec = LatticeSpec::new(m, m).unwrap();
            let mut rows: Vec<u64> = scaled_lattice(&spec).points.iter().map(|p| p.y).collect();
            rows.sort_unstable();
            assert_eq!(rows, (0..m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn scaled_lattice_one_point_per_column() {
        let spec = LatticeSpec::new(21, 100).unwrap();
        let set = scaled_lattice(&spec);
        assert_eq!(set.len(), 21);
        for (j, p) in set.points.iter().enumerate() {
            assert_eq!(p.x, j as u64 * 100 / 21);
        }
        let mut xs: Vec<_> = set.points.iter().map(|p| p.x).collect();
        xs.dedup();
        assert_eq!(xs.len(), 21);
    }

    #[test]
    fn counter_matches_scan() {
        let spec = LatticeSpec::new(13, 13 * 3).unwrap();
        let set = scaled_lattice(&spec);
        let counter = LatticeCounter::new(&spec);
        for c0 in 0..13 {
            for c1 in c0..13 {
                for (r0, r1) in [(0usize, 12usize), (2, 5), (7, 7)] {
                    let rect = Rect::new(c0 as u64 * 3, c1 as u64 * 3, r0 as u64 * 3, r1 as u64 * 3)
                        .unwrap();
                    assert_eq!(
                        counter.count(c0, c1, r0, r1),
                        count_in_rectangle(&set, &rect) as u64
                    );
                }
            }
        }
    }

    #[test]
    fn area_bounds_hold_on_random_rectangles_unscaled() {
        use rand::{Rng, SeedableRng};
        let spec = LatticeSpec::new(55, 55).unwrap();
        let set = scaled_lattice(&spec);
        let limit = spec.domain_limit();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let (a, b) = (rng.gen_range(0..=limit), rng.gen_range(0..=limit));
            let (c, d) = (rng.gen_range(0..=limit), rng.gen_range(0..=limit));
            let rect = Rect::new(a.min(b), a.max(b), c.min(d), c.max(d)).unwrap();
            let check = check_area_bounds(&spec, &rect).unwrap();
            // brute-force oracle count
            let brute = set.points.iter().filter(|p| rect.contains(**p)).count() as u64;
            assert_eq!(check.actual, brute);
            assert!(check.pass, "{rect:?} {check:?}");
        }
    }
}
