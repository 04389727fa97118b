use std::io::Write;

use cellprobe_lab::acceptance::{run_acceptance, AcceptanceOptions, CRITERIA};

#[test]
fn acceptance_suite() {
    // Written past the test harness's capture so every line lands in the log.
    let mut out = std::io::stdout();
    let _ = writeln!(out);
    let results = run_acceptance(&AcceptanceOptions::default(), |r| {
        let _ = writeln!(out, "{r}");
    });
    assert_eq!(results.len(), CRITERIA.len());
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
