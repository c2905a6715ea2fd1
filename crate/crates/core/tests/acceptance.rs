//! Full acceptance checklist on the benchmark configuration. One line per
//! check; the assertion fires only after every line has printed.

use gfmsim::acceptance::{run_suite, suite_passed};
use gfmsim::config::Config;

#[test]
fn acceptance_suite_passes_on_the_benchmark() {
    let cfg = Config::benchmark();
    let checks = run_suite(&cfg);
    assert_eq!(checks.len(), 11, "checklist must always report all checks");
    for c in &checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        println!("[{status}] {:2}. {}: {}", c.id, c.name, c.detail);
    }
    assert!(suite_passed(&checks), "acceptance checks failed; see the lines above");
}
