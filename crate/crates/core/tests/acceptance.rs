//! Runs criteria 1 to 10 and prints one PASS/FAIL line for each.
//!
//! Criteria 4 and 5 are known to fail with the default constants; they are
//! reported but do not fail the target. Any other failure does, and so does
//! a known failure that starts passing, so the list below stays honest.

use std::process::ExitCode;

use delaylab::harness::run_all;

const KNOWN_FAILURES: [usize; 2] = [4, 5];

fn main() -> ExitCode {
    let results = run_all();
    let mut unexpected = Vec::new();
    for r in &results {
        println!("{r}");
        if r.passed == KNOWN_FAILURES.contains(&r.id) {
            unexpected.push(r.id);
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if unexpected.is_empty() {
        if !KNOWN_FAILURES.is_empty() {
            println!("known failures: {KNOWN_FAILURES:?}");
        }
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
