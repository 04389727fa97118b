use std::sync::Arc;

use cellprobe_core::chronogram::{
    epoch_probe_profile, incidence_vector, naive_expected_counts, run_hard_distribution, sample_queries,
    EpochSchedule, ProblemKind,
};
use cellprobe_core::family::{build_query_family, QueryFamily, QueryFamilyParams};
use cellprobe_core::field::PrimeModulus;
use cellprobe_core::lattice::{scaled_lattice, LatticeSpec};
use cellprobe_core::structures::{brute_force_oracle, NaiveArtificial, Query, TwoLevelPrefixSum};

fn family(n: usize, seed: u64) -> Arc<QueryFamily> {
    let m = PrimeModulus::for_points(n as u64).unwrap();
    Arc::new(build_query_family(&QueryFamilyParams::new(n, m, 2.0, seed).unwrap()).unwrap())
}

#[test]
fn naive_profile_matches_analytic_counts() {
    let fam = family(25, 3);
    let config = NaiveArtificial::preferred_config(&fam);
    let ds = NaiveArtificial::new(fam.clone(), config).unwrap();
    let schedule = EpochSchedule::new(25, 5.0).unwrap();
    let m = fam.params().modulus;
    for seed in 1..=3 {
        let run = run_hard_distribution(ProblemKind::Artificial, &schedule, m, seed, &ds, config).unwrap();
        assert_eq!(run.log().len(), 25);
        let queries = sample_queries(ProblemKind::Artificial, 25, fam.len(), 200, seed);
        let profile = epoch_probe_profile(&run, &ds, &queries).unwrap();
        for (q, counts) in queries.iter().zip(&profile.per_query) {
            let Query::Vector(j) = *q else { unreachable!() };
            let expected = naive_expected_counts(&run, &ds, &fam, j);
            for epoch in 1..=schedule.count() {
                assert_eq!(counts.get(epoch), expected.get(&epoch).copied().unwrap_or(0));
            }
            assert_eq!(counts.unwritten, 0);
            assert_eq!(counts.distinct_total(), counts.by_epoch.values().sum::<usize>());
        }
        let log = run.log();
        for (q, &a) in queries.iter().zip(&profile.answers) {
            assert_eq!(a, brute_force_oracle(&log, q, Some(&fam)).unwrap());
        }
        let rows = profile.rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].epoch, 2);
        assert!((profile.total_mean() - rows.iter().map(|r| r.mean).sum::<f64>()).abs() < 1e-12);
    }
}

fn orc_run(n: u64, beta: f64, seed: u64) -> (cellprobe_core::chronogram::RunRecord, TwoLevelPrefixSum) {
    let schedule = EpochSchedule::new(n, beta).unwrap().snapped_to_fibonacci();
    let m = PrimeModulus::for_points(n).unwrap();
    let config = TwoLevelPrefixSum::preferred_config(n as usize, m, schedule.total()).unwrap();
    let ds = TwoLevelPrefixSum::new(n as usize, m, schedule.total(), config).unwrap();
    let run = run_hard_distribution(ProblemKind::Orc, &schedule, m, seed, &ds, config).unwrap();
    (run, ds)
}

#[test]
fn orc_epochs_insert_scaled_lattices() {
    let (run, _) = orc_run(120, 4.0, 9);
    for epoch in 1..=run.schedule.count() {
        let spec = LatticeSpec::new(run.schedule.size(epoch), 120).unwrap();
        assert_eq!(run.points(epoch).unwrap(), scaled_lattice(&spec).points);
    }
    assert_eq!(run.log().len() as u64, run.schedule.total());
}

#[test]
fn runs_are_deterministic() {
    let (a, _) = orc_run(64, 4.0, 5);
    let (b, _) = orc_run(64, 4.0, 5);
    let (c, _) = orc_run(64, 4.0, 6);
    assert_eq!(a.epochs, b.epochs);
    assert_eq!(a.memory, b.memory);
    assert_eq!(a.trace, b.trace);
    assert_ne!(a.epochs, c.epochs);
}

#[test]
fn answers_decompose_over_epochs() {
    let (run, ds) = orc_run(120, 4.0, 2);
    let queries = sample_queries(ProblemKind::Orc, 120, 0, 300, 2);
    let profile = epoch_probe_profile(&run, &ds, &queries).unwrap();
    let log = run.log();
    for (q, &answer) in queries.iter().zip(&profile.answers) {
        let Query::Dominance(p) = *q else { unreachable!() };
        let mut sum = 0u128;
        for e in &run.epochs {
            let pts = run.points(e.epoch).unwrap();
            let inc = incidence_vector(&pts, p, run.modulus).unwrap();
            sum += inc
                .coords()
                .iter()
                .zip(e.weights())
                .map(|(&b, w)| b as u128 * w as u128)
                .sum::<u128>();
        }
        assert_eq!(sum, answer);
        assert_eq!(answer, brute_force_oracle(&log, q, None).unwrap());
    }
}

#[test]
fn orc_needs_snapped_schedule() {
    let schedule = EpochSchedule::new(64, 4.0).unwrap();
    let m = PrimeModulus::for_points(64).unwrap();
    let config = TwoLevelPrefixSum::preferred_config(64, m, 64).unwrap();
    let ds = TwoLevelPrefixSum::new(64, m, 64, config).unwrap();
    assert!(run_hard_distribution(ProblemKind::Orc, &schedule, m, 1, &ds, config).is_err());
}
