use std::sync::Arc;

use cellprobe_core::family::{QueryFamily, QueryFamilyParams};
use cellprobe_core::field::{FieldVector, PrimeModulus};
use cellprobe_core::lattice::Point;
use cellprobe_core::memory::{MemoryConfig, ProbeTrace, SimulatedMemory};
use cellprobe_core::structures::{
    apply_update, brute_force_oracle, random_workload, replay_workload, run_query, DynamicStructure,
    NaiveArtificial, Query, TwoLevelPrefixSum, Update, WorkloadOp,
};
use cellprobe_core::Error;

fn tiny_family(rows: &[[u64; 4]]) -> Arc<QueryFamily> {
    let m = PrimeModulus::for_points(4).unwrap();
    let params = QueryFamilyParams::new(4, m, 2.0, 0).unwrap();
    let vectors = rows
        .iter()
        .map(|r| FieldVector::new(m, r.to_vec()).unwrap())
        .collect();
    Arc::new(QueryFamily::from_vectors(params, vectors).unwrap())
}

fn fresh(config: MemoryConfig) -> (SimulatedMemory, ProbeTrace) {
    let mut mem = SimulatedMemory::new(config);
    mem.begin_epoch(1).unwrap();
    (mem, ProbeTrace::new())
}

#[test]
fn naive_assign_and_query() {
    let family = tiny_family(&[[1, 0, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]]);
    let config = NaiveArtificial::preferred_config(&family);
    let ds = NaiveArtificial::new(family.clone(), config).unwrap();
    assert_eq!(ds.declared_update_bound(), 1);
    let (mut mem, mut trace) = fresh(config);

    assert_eq!(run_query(&ds, &mem, &mut trace, 0, &Query::Vector(2)).unwrap(), 0);
    apply_update(&ds, &mut mem, &mut trace, 1, &Update::Assign { index: 0, weight: 7 }).unwrap();
    assert_eq!(run_query(&ds, &mem, &mut trace, 2, &Query::Vector(0)).unwrap(), 7);

    for (i, w) in [1, 2, 3, 4].into_iter().enumerate() {
        apply_update(&ds, &mut mem, &mut trace, 3, &Update::Assign { index: i, weight: w }).unwrap();
    }
    assert_eq!(run_query(&ds, &mem, &mut trace, 4, &Query::Vector(1)).unwrap(), 4);
    assert_eq!(run_query(&ds, &mem, &mut trace, 5, &Query::Vector(2)).unwrap(), 10);

    apply_update(&ds, &mut mem, &mut trace, 6, &Update::Assign { index: 0, weight: 9 }).unwrap();
    assert_eq!(run_query(&ds, &mem, &mut trace, 7, &Query::Vector(0)).unwrap(), 9);
}

#[test]
fn naive_rejects_bad_updates() {
    let family = tiny_family(&[[1, 0, 0, 0]]);
    let config = NaiveArtificial::preferred_config(&family);
    let ds = NaiveArtificial::new(family.clone(), config).unwrap();
    let (mut mem, mut trace) = fresh(config);
    let delta = family.params().modulus.value();
    let bad = [
        Update::Assign { index: 0, weight: delta },
        Update::Assign { index: 4, weight: 1 },
        Update::Insert { point: Point::new(0, 0), weight: 1 },
    ];
    for op in bad {
        assert!(apply_update(&ds, &mut mem, &mut trace, 0, &op).is_err());
    }
    assert!(trace.is_empty());
}

#[test]
fn naive_splits_wide_weights() {
    let family = tiny_family(&[[0, 1, 0, 0]]);
    let config = MemoryConfig::with_word_bits(4, 4).unwrap();
    let ds = NaiveArtificial::new(family.clone(), config).unwrap();
    assert_eq!(ds.chunks(), 2);
    let (mut mem, mut trace) = fresh(config);
    apply_update(&ds, &mut mem, &mut trace, 0, &Update::Assign { index: 1, weight: 250 }).unwrap();
    assert_eq!(trace.len(), 2);
    assert_eq!(run_query(&ds, &mem, &mut trace, 1, &Query::Vector(0)).unwrap(), 250);
}

fn orc(n: usize, capacity: u64) -> (TwoLevelPrefixSum, MemoryConfig) {
    let m = PrimeModulus::for_points(n as u64).unwrap();
    let config = TwoLevelPrefixSum::preferred_config(n, m, capacity).unwrap();
    (TwoLevelPrefixSum::new(n, m, capacity, config).unwrap(), config)
}

#[test]
fn orc_dominance_examples() {
    let (ds, config) = orc(8, 8);
    let (mut mem, mut trace) = fresh(config);
    let q = |x, y| Query::Dominance(Point::new(x, y));
    assert_eq!(run_query(&ds, &mem, &mut trace, 0, &q(7, 7)).unwrap(), 0);
    apply_update(&ds, &mut mem, &mut trace, 1, &Update::Insert { point: Point::new(2, 3), weight: 7 }).unwrap();
    assert_eq!(run_query(&ds, &mem, &mut trace, 2, &q(5, 5)).unwrap(), 7);
    assert_eq!(run_query(&ds, &mem, &mut trace, 3, &q(1, 1)).unwrap(), 0);

    let (mut mem, mut trace) = fresh(config);
    apply_update(&ds, &mut mem, &mut trace, 0, &Update::Insert { point: Point::new(0, 0), weight: 1 }).unwrap();
    apply_update(&ds, &mut mem, &mut trace, 1, &Update::Insert { point: Point::new(4, 4), weight: 10 }).unwrap();
    assert_eq!(run_query(&ds, &mem, &mut trace, 2, &q(3, 3)).unwrap(), 1);
    assert_eq!(run_query(&ds, &mem, &mut trace, 3, &q(4, 4)).unwrap(), 11);
    assert!(matches!(
        run_query(&ds, &mem, &mut trace, 4, &q(8, 0)),
        Err(Error::InvalidArgument(_))
    ));
    let frozen = ds.update(
        &mut cellprobe_core::memory::QueryView { memory: &mem, trace: &mut trace },
        &Update::Insert { point: Point::new(1, 1), weight: 1 },
    );
    assert_eq!(frozen, Err(Error::MemoryFrozen));
}

#[test]
fn orc_matches_oracle_within_declared_bounds() {
    let n = 64;
    let (ds, config) = orc(n, 500);
    let m = PrimeModulus::for_points(n as u64).unwrap();
    let ops = random_workload(n, m, None, 500, 500, 7);
    let out = replay_workload(&ds, config, &ops, None).unwrap();
    assert_eq!(out.answers.len(), 500);
    assert_eq!(out.mismatches(), 0);
    assert!(out.max_update_probes <= ds.declared_update_bound());
    assert!(out.max_query_probes <= ds.declared_query_bound());
    assert!(out.answers.iter().any(|&(a, _)| a > 0));
}

#[test]
fn orc_capacity_and_word_size() {
    let m = PrimeModulus::for_points(64).unwrap();
    assert!(TwoLevelPrefixSum::new(64, m, 10, MemoryConfig::for_n(64)).is_err());
    let (ds, config) = orc(440, 440);
    assert_eq!(config.word_bits(), 24);
    assert_eq!(ds.chunks(), 2);
    assert_eq!(ds.declared_update_bound(), 9 * 9 * 4);
}

#[test]
fn oracle_on_empty_log_is_zero() {
    let family = tiny_family(&[[1, 1, 1, 1]]);
    assert_eq!(brute_force_oracle(&[], &Query::Vector(0), Some(&family)).unwrap(), 0);
    assert_eq!(brute_force_oracle(&[], &Query::Dominance(Point::new(3, 3)), None).unwrap(), 0);
    assert!(brute_force_oracle(&[], &Query::Vector(0), None).is_err());
}

#[test]
fn naive_matches_oracle_on_random_workloads() {
    let family = tiny_family(&[[1, 0, 0, 0], [0, 1, 1, 0], [1, 1, 1, 1], [0, 0, 0, 1]]);
    let config = NaiveArtificial::preferred_config(&family);
    let ds = NaiveArtificial::new(family.clone(), config).unwrap();
    for seed in 0..10 {
        let mut ops = random_workload(4, family.params().modulus, Some(&family), 30, 30, seed);
        ops.rotate_left(15);
        let out = replay_workload(&ds, config, &ops, Some(&family)).unwrap();
        assert_eq!(out.mismatches(), 0);
        assert!(ops.iter().any(|o| matches!(o, WorkloadOp::Query(_))));
    }
}
