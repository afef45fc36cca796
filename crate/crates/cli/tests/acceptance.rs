//! Full acceptance suite. Lines are written straight to stdout so they show
//! up without `--nocapture`.

use displab_cli::acceptance::{run, DEFAULT_SEED};
use displab_cli::constants::FittedConstants;
use std::io::Write;

#[test]
fn acceptance_criteria() {
    let constants = FittedConstants::load(None).expect("frozen constants parse");
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for id in 1..=10u8 {
        let o = run(id, DEFAULT_SEED, &constants);
        writeln!(out, "{}", o.line()).unwrap();
        out.flush().unwrap();
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
