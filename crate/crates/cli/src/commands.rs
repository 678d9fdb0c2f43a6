//! Subcommand bodies. Each returns what goes into the manifest; files are
//! written as it goes so a failure still leaves the partial output behind.

use std::f64::consts::PI;
use std::fmt::Write as _;

use anyhow::{anyhow, Context};
use log::{info, warn};
use oscar_core::evolve::{realization_seed, sample_noise, NoiseRealization, PropagatorCache};
use oscar_core::hilbert::{build_hamiltonian, build_p, build_x, lift_oscillator, lift_spin, spin_operators, HamiltonianSpec};
use oscar_core::params::validate_adiabatic;
use oscar_core::protocols::{
    calibrate_shift, invert_collapse_time, run_interrupted_oscar, run_oscar_from, CollapsePolicy, InterruptedConfig,
    OscarRun, PulseSequence, SimParams,
};
use oscar_core::quasiclassical::{smallest_tau_sin_tau_root, EstimateReport};
use oscar_core::states::Sense;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, OperatorName, RunConfig};
use crate::output::{digest_words, num, Health, OutDir};

/// What a command leaves for the manifest.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: Value,
    pub health: Option<Health>,
    pub schedule_digest: Option<String>,
    /// Set when the outputs are written but the run should still fail.
    pub failure: Option<String>,
}

/// `τ sin τ` right-hand side quoted with the laboratory estimates.
pub const QUOTED_COLLAPSE_RHS: f64 = 4.4;

/// Noise stream `k` and the Born-rule stream of a run share the master seed.
pub fn noise_seed(master: u64, k: u64) -> u64 {
    realization_seed(master, k)
}

pub fn collapse_seed(master: u64) -> u64 {
    realization_seed(master, u64::MAX)
}

pub fn run(cfg: &RunConfig, out: &mut OutDir) -> anyhow::Result<Report> {
    match cfg.command {
        Command::Estimate => estimate(cfg, out),
        Command::Simulate => simulate(cfg, out),
        Command::Interrupted => interrupted(cfg, out),
        Command::OperatorsDump { operator } => operators_dump(cfg, operator, out),
    }
}

/// `(name, value, unit)` rows of the estimate table.
pub fn estimate_rows(cfg: &RunConfig) -> anyhow::Result<Vec<(&'static str, f64, &'static str)>> {
    let r = EstimateReport::compute(&cfg.physical_params())?;
    let m = r.model;
    let adiabatic = validate_adiabatic(&m);
    Ok(vec![
        ("X0", m.length_unit, "m"),
        ("P0", m.momentum_unit, "N s"),
        ("eps", m.eps, ""),
        ("eta", m.eta, ""),
        ("x_m", m.x_m, ""),
        ("tau_R", m.tau_r, ""),
        ("sweep_ratio", adiabatic.sweep_ratio, ""),
        ("delta_omega0", r.delta_omega0, ""),
        ("a_T", r.a_t, "m"),
        ("omega_R", r.omega_r, "rad/s"),
        ("dtheta1_sq", r.dtheta1_sq, ""),
        ("mean_shift_reduction", r.mean_shift_reduction, ""),
        ("collapse_rhs", r.collapse_rhs, ""),
        ("tau_coll_root", r.tau_coll_root, ""),
        (
            "tau_coll_root_rhs_4.4",
            smallest_tau_sin_tau_root(QUOTED_COLLAPSE_RHS, cfg.root_scan)?,
            "",
        ),
        ("thermal_separation", r.thermal.separation, "m"),
        ("thermal_separation_X0", r.thermal.separation_dimensionless, ""),
        ("thermal_collapse_tau", r.thermal.collapse_tau, ""),
        ("thermal_collapse_periods", r.thermal.collapse_periods, ""),
    ])
}

pub fn estimate_table(rows: &[(&str, f64, &str)]) -> String {
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (name, value, unit) in rows {
        let _ = writeln!(s, "{name:<w$}  {value:>12.4e}  {unit}");
    }
    s
}

fn estimate(cfg: &RunConfig, out: &mut OutDir) -> anyhow::Result<Report> {
    let rows = estimate_rows(cfg)?;
    print!("{}", estimate_table(&rows));
    out.table(
        "estimate.csv",
        &["quantity", "value", "unit"],
        rows.iter().map(|(n, v, u)| vec![n.to_string(), num(*v), u.to_string()]),
    )?;
    let summary: serde_json::Map<String, Value> = rows.iter().map(|(n, v, _)| (n.to_string(), json!(v))).collect();
    Ok(Report {
        summary: Value::Object(summary),
        ..Report::default()
    })
}

fn noise_for(cfg: &RunConfig, k: u64, tau_end: f64) -> anyhow::Result<Option<NoiseRealization>> {
    if cfg.delta0 == 0.0 {
        return Ok(None);
    }
    Ok(Some(sample_noise(noise_seed(cfg.seed, k), cfg.delta0, 2.0 * PI / cfg.eps, tau_end)?))
}

fn params_of(cfg: &RunConfig) -> anyhow::Result<SimParams> {
    let p = cfg.sim_params();
    p.validate()?;
    info!("2 eta x_m / eps = {:.4}", 2.0 * p.eta * p.amplitude() / p.eps);
    Ok(p)
}

fn simulate(cfg: &RunConfig, out: &mut OutDir) -> anyhow::Result<Report> {
    let p = params_of(cfg)?;
    let sense: Sense = cfg.initial.map_or(Sense::AntiAligned, Into::into);
    let tau_end = (cfg.half_periods + 1) as f64 * PI;
    let basis = p.basis()?;
    let runs: Vec<anyhow::Result<OscarRun>> = (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|k| {
            let noise = noise_for(cfg, k, tau_end)?;
            let mut cache = PropagatorCache::new(basis);
            info!("realization {k}: {} noise intervals", noise.as_ref().map_or(0, |n| n.intervals()));
            Ok(run_oscar_from(&p, sense, noise.as_ref(), cfg.half_periods, &mut cache)?)
        })
        .collect();

    let single = cfg.realizations == 1;
    let mut health = Health::default();
    let mut words = Vec::new();
    let mut per_run = Vec::new();
    let mut failure = None;
    for (k, r) in runs.into_iter().enumerate() {
        let r = r.with_context(|| format!("realization {k}"))?;
        let prefix = if single { String::new() } else { format!("realization_{k:03}/") };
        out.timeseries(&format!("{prefix}timeseries.csv"), &r.output)?;
        out.crossings(&format!("{prefix}crossings.csv"), &r.crossings)?;
        health.absorb(&r.output.diagnostics);
        words.extend(r.schedule_words.iter().copied());
        let mean = mean(&r.crossings.deviations);
        if let Some(f) = r.fit {
            println!(
                "realization {k}: {} half-periods, mean delta_tau {:.6}, slope {:.4e}, intercept {:.6}, rms {:.3e}",
                r.crossings.len(),
                mean.unwrap_or(f64::NAN),
                f.slope,
                f.intercept,
                f.residual_rms
            );
        }
        if let Some(e) = &r.output.aborted {
            failure.get_or_insert(format!("realization {k}: {e}"));
        } else if r.crossings.is_empty() {
            failure.get_or_insert(format!("realization {k}: empty crossing series"));
        }
        per_run.push(json!({
            "realization": k,
            "noise_seed": cfg.delta0.ne(&0.0).then(|| noise_seed(cfg.seed, k as u64)),
            "half_periods": r.crossings.len(),
            "mean_delta_tau": mean,
            "fit": r.fit.map(|f| json!({"slope": f.slope, "intercept": f.intercept, "residual_rms": f.residual_rms})),
        }));
    }
    Ok(Report {
        summary: json!({ "initial": crate::output::sense_name(sense), "runs": per_run }),
        health: Some(health),
        schedule_digest: Some(digest_words(&words)),
        failure,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn interrupted(cfg: &RunConfig, out: &mut OutDir) -> anyhow::Result<Report> {
    let p = params_of(cfg)?;
    let policy = if cfg.tau_coll > 0.0 {
        CollapsePolicy::FixedInterval(cfg.tau_coll)
    } else {
        CollapsePolicy::None
    };
    let pulses = PulseSequence::quarter_period(cfg.tau_p, cfg.pulses);
    let mut ic = InterruptedConfig::new(p, pulses, policy);
    ic.initial = cfg.initial.map_or(Sense::Aligned, Into::into);
    ic.collapse_seed = collapse_seed(cfg.seed);
    let horizon = (cfg.pulses + 1) as f64 * cfg.tau_p + PI;
    let noise = noise_for(cfg, 0, horizon)?;
    let mut cache = PropagatorCache::new(p.basis()?);
    let r = run_interrupted_oscar(&ic, noise.as_ref(), &mut cache)?;

    out.timeseries("timeseries.csv", &r.output)?;
    out.crossings("crossings.csv", &r.crossings)?;
    out.pulses("pulses.csv", &r.pulse_windows, &r.pulse_responses)?;
    out.collapses("collapses.csv", &r.collapses)?;
    let mut health = Health::default();
    health.absorb(&r.output.diagnostics);

    let mut failure = r.output.aborted.as_ref().map(|e| e.to_string());
    if r.crossings.is_empty() {
        failure.get_or_insert_with(|| "empty crossing series".into());
    }
    let mut summary = json!({
        "initial": crate::output::sense_name(ic.initial),
        "collapse_seed": ic.collapse_seed,
        "tau_p": cfg.tau_p,
        "tau_coll": cfg.tau_coll,
        "pulses": cfg.pulses,
        "collapses": r.collapses.len(),
        "jumped": r.collapses.iter().filter(|c| c.outcome == oscar_core::protocols::Outcome::Jumped).count(),
    });
    match (r.shift, failure.is_none()) {
        (Some(w), true) => {
            let d0 = if cfg.calibrate {
                info!("calibrating the shift over {} half-periods", cfg.half_periods);
                let a = calibrate_shift(&p, Sense::Aligned, cfg.half_periods, &mut cache)?;
                let b = calibrate_shift(&p, Sense::AntiAligned, cfg.half_periods, &mut cache)?;
                0.5 * (a + b)
            } else {
                p.delta_omega0()
            };
            let inv = invert_collapse_time(w.mean, d0, w.interval)?;
            if inv.clamped {
                warn!("measured shift {} lies outside [0, {d0}]; collapse time clamped", w.mean);
            }
            println!(
                "mean shift {:.6e} over {} intervals of {:.4}, delta_omega0 {:.6e}, tau_coll estimate {:.4}{}",
                w.mean,
                w.intervals,
                w.interval,
                d0,
                inv.tau_coll,
                if inv.clamped { " (clamped)" } else { "" }
            );
            summary["mean_shift"] = json!(w.mean);
            summary["interval"] = json!(w.interval);
            summary["jumps"] = json!(w.jumps);
            summary["delta_omega0"] = json!(d0);
            summary["delta_omega0_calibrated"] = json!(cfg.calibrate);
            summary["tau_coll_estimate"] = json!(inv.tau_coll);
            summary["tau_coll_clamped"] = json!(inv.clamped);
        }
        (None, true) => warn!("no rf-on interval long enough to measure a shift"),
        _ => {}
    }
    Ok(Report {
        summary,
        health: Some(health),
        schedule_digest: Some(digest_words(&r.schedule_words)),
        failure,
    })
}

fn operators_dump(cfg: &RunConfig, op: OperatorName, out: &mut OutDir) -> anyhow::Result<Report> {
    let b = cfg.sim_params().basis()?;
    let s = spin_operators();
    let m = match op {
        OperatorName::X => lift_oscillator(&build_x(b), b),
        OperatorName::P => lift_oscillator(&build_p(b), b),
        OperatorName::Sx => lift_spin(&s.sx, b),
        OperatorName::Sy => lift_spin(&s.sy, b),
        OperatorName::Sz => lift_spin(&s.sz, b),
        OperatorName::H => build_hamiltonian(HamiltonianSpec::new(cfg.eps, cfg.eta, cfg.delta0), b),
    };
    let name = format!("operator_{}.csv", format!("{op:?}").to_lowercase());
    let nz = m.nonzeros(0.0);
    out.table(
        &name,
        &["row", "col", "re", "im"],
        nz.iter().map(|(i, j, v)| vec![i.to_string(), j.to_string(), num(v.re), num(v.im)]),
    )?;
    println!("{name}: {} nonzero elements, dimension {}", nz.len(), m.dim());
    let hermiticity = m.hermiticity_error();
    if hermiticity > 1e-12 {
        return Err(anyhow!("operator is not Hermitian: {hermiticity:.3e}"));
    }
    Ok(Report {
        summary: json!({ "operator": name, "nonzeros": nz.len(), "dim": m.dim(), "hermiticity_error": hermiticity }),
        ..Report::default()
    })
}
