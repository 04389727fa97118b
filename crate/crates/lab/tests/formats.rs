use std::sync::Arc;

use cellprobe_core::chronogram::{run_hard_distribution, EpochSchedule, ProblemKind};
use cellprobe_core::family::{build_query_family, QueryFamilyParams};
use cellprobe_core::field::PrimeModulus;
use cellprobe_core::game::{encode_epoch, EncodeOptions, FlagPolicy, GameContext};
use cellprobe_core::structures::{random_workload, NaiveArtificial};
use cellprobe_lab::formats::*;

#[test]
fn workload_round_trips_for_both_problems() {
    let dir = tempfile::tempdir().unwrap();
    let m = PrimeModulus::for_points(16).unwrap();
    let fam = build_query_family(&QueryFamilyParams::new(16, m, 2.0, 1).unwrap()).unwrap();
    for family in [None, Some(&fam)] {
        let ops = random_workload(16, m, family, 20, 20, 3);
        let path = dir.path().join("w.csv");
        write_workload(&path, &ops).unwrap();
        assert_eq!(read_workload(&path).unwrap(), ops);
    }
}

#[test]
fn workload_rejects_unknown_ops_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    std::fs::write(&path, "op,arg1,arg2,arg3\ndel,1,,\n").unwrap();
    assert!(read_workload(&path).is_err());
    std::fs::write(&path, "arg1,op,arg2,arg3\n").unwrap();
    assert!(read_workload(&path).is_err());
}

#[test]
fn family_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = PrimeModulus::for_points(16).unwrap();
    let fam = build_query_family(&QueryFamilyParams::new(16, m, 2.0, 4).unwrap()).unwrap();
    let path = dir.path().join("family.txt");
    write_family(&path, &fam).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("16 {} 2 4", m.value()));
    assert!(lines.all(|l| l.len() == 16 && l.chars().all(|c| c == '0' || c == '1')));
    assert_eq!(read_family(&path).unwrap().vectors(), fam.vectors());
}

#[test]
fn trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = PrimeModulus::for_points(25).unwrap();
    let fam = Arc::new(build_query_family(&QueryFamilyParams::new(25, m, 2.0, 1).unwrap()).unwrap());
    let config = NaiveArtificial::preferred_config(&fam);
    let ds = NaiveArtificial::new(fam, config).unwrap();
    let schedule = EpochSchedule::new(25, 5.0).unwrap();
    let run = run_hard_distribution(ProblemKind::Artificial, &schedule, m, 2, &ds, config).unwrap();
    let path = dir.path().join("trace.csv");
    write_trace(&path, run.trace.entries()).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("op_id,kind,address,epoch_tag\n"));
    assert_eq!(read_trace(&path).unwrap(), run.trace.entries());
}

#[test]
fn message_bytes_round_trip_and_reject_damage() {
    let m = PrimeModulus::for_points(25).unwrap();
    let fam = Arc::new(build_query_family(&QueryFamilyParams::new(25, m, 2.0, 1).unwrap()).unwrap());
    let config = NaiveArtificial::preferred_config(&fam);
    let ds = NaiveArtificial::new(fam.clone(), config).unwrap();
    let schedule = EpochSchedule::new(25, 5.0).unwrap();
    let run = run_hard_distribution(ProblemKind::Artificial, &schedule, m, 2, &ds, config).unwrap();
    let ctx = GameContext {
        kind: ProblemKind::Artificial,
        schedule,
        modulus: m,
        family: Some(fam),
        structure: &ds,
        config,
    };
    let opts = EncodeOptions {
        flag_policy: FlagPolicy::AlwaysRaw,
        ..EncodeOptions::default()
    };
    let (msg, _) = encode_epoch(&ctx, &run, 2, None, 0.0, &opts).unwrap();
    let bytes = message_to_bytes(&msg);
    assert_eq!(message_from_bytes(&bytes).unwrap(), msg);
    assert!(message_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(message_from_bytes(&extra).is_err());
    let mut wrong_magic = bytes;
    wrong_magic[0] = b'X';
    assert!(message_from_bytes(&wrong_magic).is_err());
}
