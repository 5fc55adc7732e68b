//! Verdict reporting and small statistics shared by the acceptance suite.
//!
//! The suite lives in its own package so that `cargo test --workspace` runs it
//! after every other test binary: a failing criterion then cannot hide the
//! results of the unit and integration suites.

use std::fmt::Display;
use std::io::Write;

/// Prints one `PASS`/`FAIL` line and returns whether the check passed.
pub fn verdict(id: &str, pass: bool, detail: impl Display) -> bool {
    report(format_args!("{}", verdict_line(id, pass, detail)));
    pass
}

pub fn verdict_line(id: &str, pass: bool, detail: impl Display) -> String {
    format!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" })
}

/// Writes a line straight to the process stdout. The test harness captures
/// only the `print!` family, so these lines show up without `--nocapture`.
pub fn report(line: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}
