//! Front end for `tvflow`: config-driven runs, image denoising, the
//! verification suites and convex-domain masks.

pub mod color;
pub mod commands;
pub mod config;
pub mod suites;

use std::io::Write;

use anyhow::Result;
use tvflow::diagnostics::AuditReport;

pub use commands::{cmd_approx_domain, cmd_denoise, cmd_run, Brightness, DenoiseOptions, Overrides};

/// Runs a suite, writing one JSON object per check to `json` as it
/// finishes.
pub fn cmd_verify(suite: &str, seed: u64, json: &mut dyn Write) -> Result<Vec<AuditReport>> {
    let mut reports = Vec::new();
    suites::run_suite(suite, seed, &mut |r| {
        writeln!(json, "{}", r.to_json_line())?;
        json.flush()?;
        reports.push(r);
        Ok(())
    })?;
    Ok(reports)
}

/// Plain-text table of suite results.
pub fn summary_table(reports: &[AuditReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:<6}  {:>12}  {:>12}\n", "check", "result", "measured", "bound");
    for r in reports {
        s += &format!(
            "{:<width$}  {:<6}  {:>12.5e}  {:>12.5e}\n",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.measured,
            r.bound
        );
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    s += &format!("{} checks, {failed} failed\n", reports.len());
    s
}
