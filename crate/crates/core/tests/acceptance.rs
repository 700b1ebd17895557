//! Runs every acceptance criterion and prints one line per check.
//!
//! The report goes straight to the process stdout, so it shows up in a plain
//! `cargo test` run without `--nocapture`.

use std::io::Write;

use theta_interp::verify::{run_all, VerifyConfig, CRITERIA};

#[test]
fn acceptance() {
    let results = run_all(&VerifyConfig::default());
    assert_eq!(results.len(), CRITERIA.len());
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let mut report = String::from("\nacceptance report\n");
    for r in &results {
        report += &format!("{r}\n");
    }
    report += &format!("{} / {} criteria passed\n", results.len() - failed.len(), results.len());
    let mut out = std::io::stdout().lock();
    out.write_all(report.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
