use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use cellprobe_core::chronogram::{epoch_probe_profile, run_hard_distribution, sample_queries, EpochSchedule, ProblemKind};
use cellprobe_core::family::{build_query_family, QueryFamily, QueryFamilyParams};
use cellprobe_core::field::PrimeModulus;
use cellprobe_core::game::{
    decode_epoch, encode_epoch, find_resolved_set, EncodeOptions, FlagPolicy, GameContext, ResolveOptions,
};
use cellprobe_core::structures::NaiveArtificial;

fn family() -> Arc<QueryFamily> {
    static FAMILY: OnceLock<Arc<QueryFamily>> = OnceLock::new();
    FAMILY
        .get_or_init(|| {
            let m = PrimeModulus::for_points(25).unwrap();
            Arc::new(build_query_family(&QueryFamilyParams::new(25, m, 2.0, 1).unwrap()).unwrap())
        })
        .clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decoding_inverts_encoding(seed in any::<u64>(), raw in any::<bool>(), istar in 1u32..=2, budget in 1usize..=20, tries in 1usize..6) {
        let fam = family();
        let m = fam.params().modulus;
        let config = NaiveArtificial::preferred_config(&fam);
        let ds = NaiveArtificial::new(fam.clone(), config).unwrap();
        let schedule = EpochSchedule::new(25, 5.0).unwrap();
        let ctx = GameContext {
            kind: ProblemKind::Artificial,
            schedule: schedule.clone(),
            modulus: m,
            family: Some(fam.clone()),
            structure: &ds,
            config,
        };
        let run = run_hard_distribution(ProblemKind::Artificial, &schedule, m, seed, &ds, config).unwrap();
        let sample = sample_queries(ProblemKind::Artificial, 25, fam.len(), 625, seed);
        let profile = epoch_probe_profile(&run, &ds, &sample).unwrap();
        let opts = ResolveOptions { cell_budget: budget, probe_threshold: f64::INFINITY, max_tries: tries, seed };
        let resolved = if raw { None } else { find_resolved_set(&run, &ds, istar, &sample, &opts).ok() };
        let enc = EncodeOptions {
            flag_policy: if raw { FlagPolicy::AlwaysRaw } else { FlagPolicy::Threshold(f64::INFINITY) },
            independence_constant: 2.0,
            ..EncodeOptions::default()
        };
        let (msg, _) = encode_epoch(&ctx, &run, istar, resolved.as_ref(), profile.mean(istar), &enc).unwrap();
        let got = decode_epoch(&msg, &ctx, run.prefix(istar), Some(&run.memory)).unwrap();
        prop_assert_eq!(&got, run.epoch(istar).unwrap());
    }
}
