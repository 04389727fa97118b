//! The query family `V`: `n²` random {0,1}-vectors in `[Δ]^n` such that,
//! restricted to any suffix of length `k ∈ [√n, n]`, every subset of at most
//! `⌊k / (c·lg k)⌋` vectors is linearly independent.
//!
//! Construction is greedy. A uniform candidate is accepted when it passes
//! the checks below for every admissible `k`:
//!
//! * subset bound ≥ 1: the suffix is nonzero,
//! * subset bound ≥ 2: the suffix differs from every accepted suffix (two
//!   nonzero {0,1}-vectors are dependent iff they are equal, so this check is
//!   exhaustive),
//! * subset bound ≥ 3: the suffix lies outside the span of randomly sampled
//!   accepted subsets of size `bound - 1` (Monte Carlo).

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{EchelonBasis, FieldVector, PrimeModulus};
use crate::rng::{self, Stream};

pub const DEFAULT_INDEPENDENCE_CONSTANT: f64 = 22.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFamilyParams {
    pub n: usize,
    pub modulus: PrimeModulus,
    /// The constant `c` in the subset bound `k / (c·lg k)`.
    pub independence_constant: f64,
    pub seed: u64,
    /// Monte Carlo subsets drawn per suffix length when validating a candidate.
    pub validation_trials: usize,
    /// Consecutive rejected candidates tolerated before giving up.
    pub retry_budget: usize,
}

impl QueryFamilyParams {
    pub fn new(n: usize, modulus: PrimeModulus, independence_constant: f64, seed: u64) -> Result<Self> {
        if n < 4 {
            return Err(Error::invalid("query family needs n >= 4"));
        }
        if independence_constant.is_nan() || independence_constant <= 0.0 {
            return Err(Error::invalid("independence constant must be positive"));
        }
        let n4 = (n as u128).pow(4);
        let d = modulus.value() as u128;
        if d * 2 < n4 || d > n4 {
            return Err(Error::invalid(alloc::format!(
                "modulus {d} outside [n^4/2, n^4] for n = {n}"
            )));
        }
        Ok(QueryFamilyParams {
            n,
            modulus,
            independence_constant,
            seed,
            validation_trials: 16,
            retry_budget: 10_000,
        })
    }

    /// `⌊k / (c·lg k)⌋`.
    pub fn subset_bound(&self, k: usize) -> usize {
        if k < 2 {
            return 0;
        }
        let lg = libm::log2(k as f64);
        libm::floor(k as f64 / (self.independence_constant * lg)) as usize
    }

    /// The admissible suffix lengths `⌈√n⌉ ..= n`.
    pub fn suffix_lengths(&self) -> core::ops::RangeInclusive<usize> {
        let mut lo = libm::sqrt(self.n as f64) as usize;
        while lo * lo < self.n {
            lo += 1;
        }
        lo..=self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFamily {
    params: QueryFamilyParams,
    vectors: Vec<FieldVector>,
}

impl QueryFamily {
    /// Wraps existing vectors, checking dimension and the {0,1} constraint.
    /// Built families have exactly `n²` vectors; hand-assembled ones may be
    /// smaller.
    pub fn from_vectors(params: QueryFamilyParams, vectors: Vec<FieldVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("empty query family"));
        }
        for v in &vectors {
            if v.dim() != params.n {
                return Err(Error::DimensionMismatch {
                    expected: params.n,
                    found: v.dim(),
                });
            }
            if v.modulus() != params.modulus {
                return Err(Error::ModulusMismatch {
                    expected: params.modulus.value(),
                    found: v.modulus().value(),
                });
            }
            if v.coords().iter().any(|&c| c > 1) {
                return Err(Error::invalid("query vectors must be {0,1}-valued"));
            }
        }
        Ok(QueryFamily { params, vectors })
    }

    pub fn params(&self) -> &QueryFamilyParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, j: usize) -> &FieldVector {
        &self.vectors[j]
    }

    pub fn vectors(&self) -> &[FieldVector] {
        &self.vectors
    }

    /// `Σ_i v_{j,i}·d_i` over the integers.
    pub fn answer(&self, j: usize, weights: &[u64]) -> u128 {
        self.vectors[j]
            .coords()
            .iter()
            .zip(weights)
            .map(|(&b, &d)| b as u128 * d as u128)
            .sum()
    }
}

fn suffix_key(bits: &[u64], k: usize) -> Vec<u64> {
    let n = bits.len();
    let mut key = alloc::vec![0u64; k.div_ceil(64)];
    for (i, &b) in bits[n - k..].iter().enumerate() {
        if b != 0 {
            key[i / 64] |= 1 << (i % 64);
        }
    }
    key
}

/// Greedy randomized construction, deterministic in `params.seed`.
pub fn build_query_family(params: &QueryFamilyParams) -> Result<QueryFamily> {
    let n = params.n;
    let target = n * n;
    let lengths: Vec<(usize, usize)> = params
        .suffix_lengths()
        .map(|k| (k, params.subset_bound(k)))
        .filter(|&(_, s)| s >= 1)
        .collect();
    let mut seen: Vec<BTreeSet<Vec<u64>>> = lengths.iter().map(|_| BTreeSet::new()).collect();
    let mut sample_rng = rng::stream(params.seed, Stream::Family);
    let mut audit_rng = rng::stream(params.seed, Stream::Validation);
    let mut accepted: Vec<FieldVector> = Vec::with_capacity(target);

    while accepted.len() < target {
        let mut rejected = 0usize;
        loop {
            let coords: Vec<u64> = (0..n).map(|_| sample_rng.gen_range(0..2u64)).collect();
            match validate_candidate(params, &coords, &lengths, &seen, &accepted, &mut audit_rng) {
                Ok(()) => {
                    for ((k, s), set) in lengths.iter().zip(seen.iter_mut()) {
                        if *s >= 2 {
                            set.insert(suffix_key(&coords, *k));
                        }
                    }
                    accepted.push(FieldVector::new(params.modulus, coords)?);
                    break;
                }
                Err((k, witness)) => {
                    rejected += 1;
                    if rejected >= params.retry_budget {
                        return Err(Error::ConstructionFailure { k, witness });
                    }
                }
            }
        }
    }
    QueryFamily::from_vectors(params.clone(), accepted)
}

/// On rejection returns the violated suffix length and the witness subset.
fn validate_candidate(
    params: &QueryFamilyParams,
    coords: &[u64],
    lengths: &[(usize, usize)],
    seen: &[BTreeSet<Vec<u64>>],
    accepted: &[FieldVector],
    rng: &mut impl Rng,
) -> core::result::Result<(), (usize, Vec<usize>)> {
    let n = coords.len();
    for (&(k, s), set) in lengths.iter().zip(seen) {
        if coords[n - k..].iter().all(|&c| c == 0) {
            return Err((k, Vec::new()));
        }
        if s >= 2 && set.contains(&suffix_key(coords, k)) {
            let twin = accepted
                .iter()
                .position(|v| v.coords()[n - k..] == coords[n - k..])
                .unwrap_or(0);
            return Err((k, alloc::vec![twin]));
        }
        let size = s.saturating_sub(1);
        if size >= 2 && accepted.len() >= size {
            let candidate = FieldVector::new(params.modulus, coords[n - k..].to_vec())
                .expect("nonempty suffix");
            for _ in 0..params.validation_trials {
                let picks = index::sample(rng, accepted.len(), size).into_vec();
                let mut basis = EchelonBasis::new(params.modulus, k);
                for &j in &picks {
                    basis
                        .insert(&accepted[j].suffix(k).expect("valid suffix"))
                        .expect("matching dimension");
                }
                if basis.contains(&candidate).expect("matching dimension") {
                    return Err((k, picks));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixReport {
    pub trials: usize,
    pub violations: usize,
    /// Sorted indices of the first violating subset.
    pub witness: Option<Vec<usize>>,
}

/// Samples `trials` subsets of `subset_size` family vectors, restricts them
/// to their last `k` coordinates and counts subsets that are not full rank.
pub fn check_suffix_independence(
    family: &QueryFamily,
    k: usize,
    subset_size: usize,
    trials: usize,
    seed: u64,
) -> Result<SuffixReport> {
    let params = family.params();
    if !params.suffix_lengths().contains(&k) {
        return Err(Error::invalid(alloc::format!(
            "suffix length {k} outside [sqrt(n), n] for n = {}",
            params.n
        )));
    }
    let bound = params.subset_bound(k);
    if subset_size == 0 || subset_size > bound {
        return Err(Error::invalid(alloc::format!(
            "subset size {subset_size} outside [1, {bound}] for k = {k}"
        )));
    }
    if subset_size > family.len() {
        return Err(Error::invalid("subset size exceeds family size"));
    }
    let suffixes: Vec<FieldVector> = family
        .vectors()
        .iter()
        .map(|v| v.suffix(k))
        .collect::<Result<_>>()?;
    let mut rng = rng::stream(seed, Stream::Validation);
    let mut violations = 0;
    let mut witness = None;
    for _ in 0..trials {
        let mut picks = index::sample(&mut rng, family.len(), subset_size).into_vec();
        let mut basis = EchelonBasis::new(params.modulus, k);
        for &j in &picks {
            basis.insert(&suffixes[j])?;
        }
        if basis.rank() < subset_size {
            violations += 1;
            if witness.is_none() {
                picks.sort_unstable();
                witness = Some(picks);
            }
        }
    }
    Ok(SuffixReport {
        trials,
        violations,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ff_rank, largest_prime_below, FieldMatrix};

    fn params(n: usize, c: f64, seed: u64) -> QueryFamilyParams {
        let m = largest_prime_below((n as u64).pow(4)).unwrap();
        QueryFamilyParams::new(n, m, c, seed).unwrap()
    }

    #[test]
    fn subset_bounds() {
        let p = params(16, 2.0, 1);
        assert_eq!(p.subset_bound(4), 1);
        assert_eq!(p.subset_bound(8), 1);
        assert_eq!(p.subset_bound(16), 2);
        assert_eq!(p.suffix_lengths(), 4..=16);
        assert_eq!(params(4, 2.0, 1).subset_bound(4), 1);
        assert_eq!(params(4, 2.0, 1).suffix_lengths(), 2..=4);
    }

    #[test]
    fn rejects_bad_params() {
        let m = largest_prime_below(10_000).unwrap();
        assert!(QueryFamilyParams::new(16, m, 2.0, 1).is_err());
        assert!(QueryFamilyParams::new(3, m, 2.0, 1).is_err());
    }

    #[test]
    fn small_family_shape() {
        let fam = build_query_family(&params(4, 2.0, 9)).unwrap();
        assert_eq!(fam.len(), 16);
        for v in fam.vectors() {
            assert_eq!(v.dim(), 4);
            assert!(v.coords().iter().all(|&c| c <= 1));
            // bound 1 at every admissible k: every suffix is nonzero
            assert!(!v.suffix(2).unwrap().is_zero());
        }
    }

    #[test]
    fn family_is_deterministic() {
        let a = build_query_family(&params(8, 2.0, 3)).unwrap();
        let b = build_query_family(&params(8, 2.0, 3)).unwrap();
        let c = build_query_family(&params(8, 2.0, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn built_family_passes_audit() {
        let fam = build_query_family(&params(16, 2.0, 1)).unwrap();
        assert_eq!(fam.len(), 256);
        let r = check_suffix_independence(&fam, 16, 2, 1000, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r, check_suffix_independence(&fam, 16, 2, 1000, 1).unwrap());
    }

    #[test]
    fn monte_carlo_path_runs_for_wider_bounds() {
        // n = 32, c = 2 reaches a subset bound of 3 at k = 32, exercising span sampling.
        let p = params(32, 2.0, 5);
        assert_eq!(p.subset_bound(32), 3);
        let fam = build_query_family(&p).unwrap();
        let r = check_suffix_independence(&fam, 32, 3, 300, 2).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
    }

    #[test]
    fn unit_vectors_never_violate() {
        let p = params(4, 1.0, 0);
        let m = p.modulus;
        let vs = (0..4).map(|i| FieldVector::unit(m, 4, i).unwrap()).collect();
        let fam = QueryFamily::from_vectors(p, vs).unwrap();
        let r = check_suffix_independence(&fam, 4, 2, 200, 3).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.witness, None);
    }

    #[test]
    fn duplicate_is_reported() {
        let p = params(4, 1.0, 0);
        let m = p.modulus;
        let v = FieldVector::new(m, alloc::vec![1, 0, 1, 1]).unwrap();
        let fam = QueryFamily::from_vectors(p, alloc::vec![v.clone(), v]).unwrap();
        let r = check_suffix_independence(&fam, 4, 2, 1, 0).unwrap();
        assert_eq!(r.violations, 1);
        assert_eq!(r.witness, Some(alloc::vec![0, 1]));
        let rows = fam.vectors().to_vec();
        assert_eq!(ff_rank(&FieldMatrix::from_rows(m, 4, rows).unwrap()), 1);
    }

    #[test]
    fn oversized_subsets_rejected() {
        let fam = build_query_family(&params(16, 2.0, 1)).unwrap();
        assert!(check_suffix_independence(&fam, 8, 2, 10, 0).is_err());
        assert!(check_suffix_independence(&fam, 3, 1, 10, 0).is_err());
        assert!(check_suffix_independence(&fam, 17, 1, 10, 0).is_err());
    }

    #[test]
    fn answers_are_inner_products() {
        let p = params(4, 2.0, 0);
        let m = p.modulus;
        let v = FieldVector::new(m, alloc::vec![1, 0, 1, 0]).unwrap();
        let fam = QueryFamily::from_vectors(p, alloc::vec![v]).unwrap();
        assert_eq!(fam.answer(0, &[1, 2, 3, 4]), 4);
    }
}
