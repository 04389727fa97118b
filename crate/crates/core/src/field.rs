//! Exact arithmetic over the prime field Z_p: rank, span membership, basis
//! completion and linear solving. No floating point anywhere in here except
//! the reporting helper [`PrimeModulus::lg`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A prime modulus `p`; weights and field elements live in `[p]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(value: u64) -> Result<Self> {
        if is_prime(value) {
            Ok(PrimeModulus(value))
        } else {
            Err(Error::invalid(alloc::format!("{value} is not prime")))
        }
    }

    /// The weight modulus for an instance with `n` points: the largest prime
    /// below `n^4`.
    pub fn for_points(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("need at least 2 points"));
        }
        let limit = n
            .checked_pow(4)
            .ok_or_else(|| Error::invalid("n^4 overflows 64 bits"))?;
        largest_prime_below(limit)
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn reduce(self, x: u128) -> u64 {
        (x % self.0 as u128) as u64
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 + b as u128)
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.0 - (b - a)
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 * b as u128)
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(self, a: u64) -> Option<u64> {
        let a = a % self.0;
        if a == 0 {
            return None;
        }
        let (mut old_r, mut r) = (a as i128, self.0 as i128);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        debug_assert_eq!(old_r, 1);
        Some(old_s.rem_euclid(self.0 as i128) as u64)
    }

    /// Base-2 logarithm of the modulus.
    pub fn lg(self) -> f64 {
        libm::log2(self.0 as f64)
    }

    /// Bits needed to write one element of `[p]`.
    pub fn element_bits(self) -> u32 {
        64 - (self.0 - 1).leading_zeros()
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

fn isqrt(n: u64) -> u64 {
    let mut r = libm::sqrt(n as f64) as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    r
}

fn small_primes(upto: u64) -> Vec<u64> {
    let upto = upto as usize;
    let mut composite = vec![false; upto + 1];
    let mut primes = Vec::new();
    for i in 2..=upto {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= upto {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

const SIEVE_WINDOW: u64 = 1 << 16;

/// Largest prime strictly below `limit`, found with a segmented sieve that
/// scans windows downward from `limit`.
pub fn largest_prime_below(limit: u64) -> Result<PrimeModulus> {
    if limit < 3 {
        return Err(Error::invalid(alloc::format!("no prime below {limit}")));
    }
    let base = small_primes(isqrt(limit));
    let mut hi = limit; // exclusive
    while hi > 2 {
        let lo = hi.saturating_sub(SIEVE_WINDOW).max(2);
        let mut composite = vec![false; (hi - lo) as usize];
        for &p in &base {
            if p * p >= hi {
                break;
            }
            let mut m = (lo.div_ceil(p)).max(p) * p;
            while m < hi {
                composite[(m - lo) as usize] = true;
                m += p;
            }
        }
        if let Some(off) = composite.iter().rposition(|&c| !c) {
            return Ok(PrimeModulus(lo + off as u64));
        }
        hi = lo;
    }
    unreachable!("2 is prime and below any limit >= 3")
}

/// A vector over Z_p. Coordinates are always reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldVector {
    modulus: PrimeModulus,
    coords: Vec<u64>,
}

impl FieldVector {
    pub fn new(modulus: PrimeModulus, coords: Vec<u64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("field vectors must have dimension > 0"));
        }
        let p = modulus.value();
        let coords = coords.into_iter().map(|c| c % p).collect();
        Ok(FieldVector { modulus, coords })
    }

    pub fn zero(modulus: PrimeModulus, dim: usize) -> Result<Self> {
        Self::new(modulus, vec![0; dim])
    }

    pub fn unit(modulus: PrimeModulus, dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid("unit index out of range"));
        }
        let mut coords = vec![0; dim];
        coords[index] = 1;
        Self::new(modulus, coords)
    }

    pub fn from_bits(modulus: PrimeModulus, bits: &[bool]) -> Result<Self> {
        Self::new(modulus, bits.iter().map(|&b| b as u64).collect())
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<u64> {
        self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// The last `k` coordinates.
    pub fn suffix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::invalid("suffix length out of range"));
        }
        Ok(FieldVector {
            modulus: self.modulus,
            coords: self.coords[self.dim() - k..].to_vec(),
        })
    }

    /// Inner product reduced mod p.
    pub fn dot(&self, other: &FieldVector) -> Result<u64> {
        self.check_compatible(other)?;
        Ok(dot_mod(self.modulus, &self.coords, &other.coords))
    }

    fn check_compatible(&self, other: &FieldVector) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch {
                expected: self.modulus.value(),
                found: other.modulus.value(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

fn dot_mod(p: PrimeModulus, a: &[u64], b: &[u64]) -> u64 {
    let mut acc: u128 = 0;
    for (&x, &y) in a.iter().zip(b) {
        acc += x as u128 * y as u128;
        // keep headroom: p < 2^64 so each term < 2^128 / 2
        if acc >= 1u128 << 126 {
            acc %= p.value() as u128;
        }
    }
    p.reduce(acc)
}

/// A rectangular matrix over Z_p stored as rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    modulus: PrimeModulus,
    cols: usize,
    rows: Vec<FieldVector>,
}

impl FieldMatrix {
    pub fn from_rows(modulus: PrimeModulus, cols: usize, rows: Vec<FieldVector>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid("matrix needs at least one column"));
        }
        for row in &rows {
            if row.modulus != modulus {
                return Err(Error::ModulusMismatch {
                    expected: modulus.value(),
                    found: row.modulus.value(),
                });
            }
            if row.dim() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.dim(),
                });
            }
        }
        Ok(FieldMatrix { modulus, cols, rows })
    }

    pub fn identity(modulus: PrimeModulus, n: usize) -> Result<Self> {
        let rows = (0..n)
            .map(|i| FieldVector::unit(modulus, n, i))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(modulus, n, rows)
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn rows(&self) -> &[FieldVector] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.cols
    }

    /// Matrix-vector product mod p.
    pub fn mul_vec(&self, y: &FieldVector) -> Result<FieldVector> {
        if y.dim() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: y.dim(),
            });
        }
        let coords = self
            .rows
            .iter()
            .map(|r| r.dot(y))
            .collect::<Result<Vec<_>>>()?;
        FieldVector::new(self.modulus, coords)
    }
}

/// Incrementally maintained row-echelon basis. Row `t` is normalised to 1 at
/// its pivot and is zero at the pivots of all earlier rows.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    modulus: PrimeModulus,
    dim: usize,
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
}

impl EchelonBasis {
    pub fn new(modulus: PrimeModulus, dim: usize) -> Self {
        EchelonBasis {
            modulus,
            dim,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn reduce(&self, v: &mut [u64]) {
        let p = self.modulus;
        for (row, &pivot) in self.rows.iter().zip(&self.pivots) {
            let f = v[pivot];
            if f == 0 {
                continue;
            }
            for (x, &r) in v.iter_mut().zip(row) {
                if r != 0 {
                    *x = p.sub(*x, p.mul(f, r));
                }
            }
        }
    }

    fn check(&self, v: &FieldVector) -> Result<()> {
        if v.modulus != self.modulus {
            return Err(Error::ModulusMismatch {
                expected: self.modulus.value(),
                found: v.modulus.value(),
            });
        }
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, v: &FieldVector) -> Result<bool> {
        self.check(v)?;
        let mut w = v.coords.clone();
        self.reduce(&mut w);
        Ok(w.iter().all(|&c| c == 0))
    }

    /// Adds `v` if it is outside the current span; returns whether it was added.
    pub fn insert(&mut self, v: &FieldVector) -> Result<bool> {
        self.check(v)?;
        let mut w = v.coords.clone();
        self.reduce(&mut w);
        let Some(pivot) = w.iter().position(|&c| c != 0) else {
            return Ok(false);
        };
        let p = self.modulus;
        let inv = p.inv(w[pivot]).expect("nonzero element of a prime field");
        for x in w.iter_mut() {
            *x = p.mul(*x, inv);
        }
        self.rows.push(w);
        self.pivots.push(pivot);
        Ok(true)
    }
}

/// Dimension of the row span of `a`.
pub fn ff_rank(a: &FieldMatrix) -> usize {
    let mut basis = EchelonBasis::new(a.modulus, a.cols);
    for row in &a.rows {
        basis.insert(row).expect("rows validated at construction");
    }
    basis.rank()
}

/// Whether `x` is a linear combination of `set`. The empty set spans only the
/// zero vector.
pub fn in_span(set: &[FieldVector], x: &FieldVector) -> Result<bool> {
    let mut basis = EchelonBasis::new(x.modulus, x.dim());
    for v in set {
        basis.insert(v)?;
    }
    basis.contains(x)
}

/// Extends the independent set `set` to a basis of Z_p^dim by scanning unit
/// vectors `e_0, e_1, ...` in order and keeping those outside the running
/// span. Returns only the added vectors.
pub fn complete_basis(
    modulus: PrimeModulus,
    set: &[FieldVector],
    dim: usize,
) -> Result<Vec<FieldVector>> {
    if set.len() > dim {
        return Err(Error::LinearlyDependent);
    }
    let mut basis = EchelonBasis::new(modulus, dim);
    for v in set {
        if !basis.insert(v)? {
            return Err(Error::LinearlyDependent);
        }
    }
    let mut added = Vec::with_capacity(dim - set.len());
    for i in 0..dim {
        if basis.rank() == dim {
            break;
        }
        let e = FieldVector::unit(modulus, dim, i)?;
        if basis.insert(&e)? {
            added.push(e);
        }
    }
    Ok(added)
}

/// Solves `a ⊗ y = z` for square, full-rank `a` by Gauss-Jordan elimination,
/// pivoting on the first nonzero entry of each column.
pub fn ff_solve(a: &FieldMatrix, z: &FieldVector) -> Result<FieldVector> {
    let n = a.cols;
    if a.rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.rows.len(),
        });
    }
    if z.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.dim(),
        });
    }
    if z.modulus != a.modulus {
        return Err(Error::ModulusMismatch {
            expected: a.modulus.value(),
            found: z.modulus.value(),
        });
    }
    let p = a.modulus;
    let mut m: Vec<Vec<u64>> = a
        .rows
        .iter()
        .zip(&z.coords)
        .map(|(r, &zi)| {
            let mut row = r.coords.clone();
            row.push(zi);
            row
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| m[r][col] != 0)
            .ok_or(Error::SingularMatrix)?;
        m.swap(col, pivot);
        let inv = p.inv(m[col][col]).expect("nonzero pivot");
        for x in m[col].iter_mut() {
            *x = p.mul(*x, inv);
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r == col || row[col] == 0 {
                continue;
            }
            let f = row[col];
            for (x, &q) in row.iter_mut().zip(&pivot_row).skip(col) {
                *x = p.sub(*x, p.mul(f, q));
            }
        }
    }
    FieldVector::new(p, m.into_iter().map(|row| row[n]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn p(v: u64) -> PrimeModulus {
        PrimeModulus::new(v).unwrap()
    }

    fn fv(m: u64, c: &[u64]) -> FieldVector {
        FieldVector::new(p(m), c.to_vec()).unwrap()
    }

    fn naive_sieve_below(limit: u64) -> u64 {
        (2..limit).rev().find(|&x| (2..x).take_while(|d| d * d <= x).all(|d| x % d != 0)).unwrap()
    }

    #[test]
    fn largest_prime_examples() {
        assert_eq!(largest_prime_below(3).unwrap().value(), 2);
        assert_eq!(largest_prime_below(10_000).unwrap().value(), 9973);
        assert!(largest_prime_below(2).is_err());
        assert!(largest_prime_below(0).is_err());
    }

    #[test]
    fn largest_prime_matches_trial_division() {
        for limit in [3u64, 4, 5, 18, 100, 390_625, 1 << 20] {
            assert_eq!(largest_prime_below(limit).unwrap().value(), naive_sieve_below(limit));
        }
    }

    #[test]
    fn modulus_for_points() {
        // values cross-checked against an independent prime table
        assert_eq!(PrimeModulus::for_points(25).unwrap().value(), 390_581);
        assert_eq!(PrimeModulus::for_points(440).unwrap().value(), 37_480_959_979);
        let d = PrimeModulus::for_points(16).unwrap().value();
        assert!((65536 / 2..=65536).contains(&d));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ff_rank(&FieldMatrix::identity(p(5), 3).unwrap()), 3);
        let a = FieldMatrix::from_rows(p(5), 2, vec![fv(5, &[1, 2]), fv(5, &[2, 4])]).unwrap();
        assert_eq!(ff_rank(&a), 1);
        let z = FieldMatrix::from_rows(p(5), 2, vec![fv(5, &[0, 0]), fv(5, &[0, 0])]).unwrap();
        assert_eq!(ff_rank(&z), 0);
    }

    #[test]
    fn span_examples() {
        assert!(in_span(&[fv(5, &[1, 0])], &fv(5, &[3, 0])).unwrap());
        assert!(!in_span(&[fv(5, &[1, 0])], &fv(5, &[0, 1])).unwrap());
        assert!(in_span(&[], &fv(7, &[0, 0])).unwrap());
        assert!(!in_span(&[], &fv(7, &[0, 1])).unwrap());
        assert!(matches!(
            in_span(&[fv(5, &[1, 0, 0])], &fv(5, &[1, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn complete_basis_examples() {
        let added = complete_basis(p(5), &[fv(5, &[1, 1])], 2).unwrap();
        assert_eq!(added, vec![fv(5, &[1, 0])]);
        let std3: Vec<_> = (0..3).map(|i| FieldVector::unit(p(5), 3, i).unwrap()).collect();
        assert!(complete_basis(p(5), &std3, 3).unwrap().is_empty());
        assert_eq!(
            complete_basis(p(5), &[], 2).unwrap(),
            vec![fv(5, &[1, 0]), fv(5, &[0, 1])]
        );
        assert_eq!(
            complete_basis(p(5), &[fv(5, &[1, 2]), fv(5, &[2, 4])], 2),
            Err(Error::LinearlyDependent)
        );
    }

    #[test]
    fn solve_examples() {
        let id = FieldMatrix::identity(p(7), 2).unwrap();
        assert_eq!(ff_solve(&id, &fv(7, &[3, 5])).unwrap(), fv(7, &[3, 5]));
        let a = FieldMatrix::from_rows(p(7), 2, vec![fv(7, &[1, 1]), fv(7, &[0, 1])]).unwrap();
        assert_eq!(ff_solve(&a, &fv(7, &[3, 5])).unwrap(), fv(7, &[5, 5]));
        let s = FieldMatrix::from_rows(p(5), 2, vec![fv(5, &[1, 2]), fv(5, &[2, 4])]).unwrap();
        assert_eq!(ff_solve(&s, &fv(5, &[1, 1])), Err(Error::SingularMatrix));
        assert!(matches!(
            ff_solve(&id, &fv(7, &[1, 2, 3])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverse_is_inverse() {
        let m = p(9973);
        for a in 1..200u64 {
            assert_eq!(m.mul(a, m.inv(a).unwrap()), 1);
        }
        assert_eq!(m.inv(0), None);
    }

    fn random_full_rank(rng: &mut impl Rng, m: PrimeModulus, n: usize) -> FieldMatrix {
        loop {
            let rows = (0..n)
                .map(|_| {
                    FieldVector::new(m, (0..n).map(|_| rng.gen_range(0..m.value())).collect())
                        .unwrap()
                })
                .collect();
            let a = FieldMatrix::from_rows(m, n, rows).unwrap();
            if ff_rank(&a) == n {
                return a;
            }
        }
    }

    #[test]
    fn solve_round_trip_seeded() {
        let m = largest_prime_below(10_000).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..8);
            let a = random_full_rank(&mut rng, m, n);
            let y = FieldVector::new(m, (0..n).map(|_| rng.gen_range(0..m.value())).collect())
                .unwrap();
            let z = a.mul_vec(&y).unwrap();
            assert_eq!(ff_solve(&a, &z).unwrap(), y);
        }
    }

    proptest! {
        #[test]
        fn rank_bounded_and_span_consistent(
            rows in proptest::collection::vec(proptest::collection::vec(0u64..7, 4), 0..6),
            x in proptest::collection::vec(0u64..7, 4),
        ) {
            let m = p(7);
            let vs: Vec<_> = rows.iter().map(|r| FieldVector::new(m, r.clone()).unwrap()).collect();
            let a = FieldMatrix::from_rows(m, 4, vs.clone()).unwrap();
            let r = ff_rank(&a);
            prop_assert!(r <= vs.len().min(4));
            let xv = FieldVector::new(m, x).unwrap();
            let mut ext = vs.clone();
            ext.push(xv.clone());
            let r2 = ff_rank(&FieldMatrix::from_rows(m, 4, ext).unwrap());
            prop_assert_eq!(in_span(&vs, &xv).unwrap(), r2 == r);
        }

        #[test]
        fn completion_is_deterministic_and_spanning(
            rows in proptest::collection::vec(proptest::collection::vec(0u64..5, 3), 0..3),
        ) {
            let m = p(5);
            let mut basis = EchelonBasis::new(m, 3);
            let mut indep = Vec::new();
            for r in rows {
                let v = FieldVector::new(m, r).unwrap();
                if basis.insert(&v).unwrap() {
                    indep.push(v);
                }
            }
            let a1 = complete_basis(m, &indep, 3).unwrap();
            let a2 = complete_basis(m, &indep, 3).unwrap();
            prop_assert_eq!(&a1, &a2);
            let mut all = indep.clone();
            all.extend(a1);
            prop_assert_eq!(ff_rank(&FieldMatrix::from_rows(m, 3, all).unwrap()), 3);
        }
    }
}
