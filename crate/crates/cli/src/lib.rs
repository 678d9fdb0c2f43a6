//! Command-line driver for `oscar-core`: configuration, runs, CSV and
//! manifest output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use config::RunConfig;
use output::{Basis, Manifest, OutDir};

/// Runs one configured command and writes its manifest, whether or not the
/// command succeeded. Returns the error that should make the process fail.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<()> {
    let (result, written) = match OutDir::create(&cfg.out) {
        Ok(mut out) => {
            let r = commands::run(cfg, &mut out);
            (r, out.written)
        }
        Err(e) => (Err(e), Vec::new()),
    };
    let failed = match &result {
        Ok(r) => r.failure.clone(),
        Err(e) => Some(format!("{e:#}")),
    };
    let report = result.as_ref().ok();
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status: if failed.is_some() { "failed" } else { "ok" },
        error: failed.clone(),
        seed: cfg.seed,
        basis: Basis {
            n_osc: cfg.n_osc,
            dim: 2 * cfg.n_osc,
        },
        schedule_digest: report.and_then(|r| r.schedule_digest.clone()),
        health: report.and_then(|r| r.health),
        summary: report.map_or(serde_json::Value::Null, |r| r.summary.clone()),
        outputs: written,
        config: cfg,
    };
    let written = manifest.write(&cfg.out);
    match (failed, written) {
        (Some(msg), _) => Err(anyhow::anyhow!(msg)),
        (None, Err(e)) => Err(e),
        (None, Ok(_)) => Ok(()),
    }
}
