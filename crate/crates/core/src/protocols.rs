//! Experiment drivers: plain OSCAR runs, interrupted OSCAR with rf-off
//! pulses, projective collapse events and the collapse-time inversion.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{effective_shift_series, find_crossings, find_crossings_split, linear_fit, phase_gain, PHASE_JUMP_TOLERANCE, CrossingSeries, FitResult, ShiftSeries};
use crate::evolve::{run, run_with_events, NoiseRealization, PropagatorCache, RunOutput, Schedule, DEFAULT_SAMPLE_DTAU};
use crate::hilbert::BasisSpec;
use crate::math::{acos, hypot, sqrt};
use crate::params::ModelParams;
use crate::quasiclassical::delta_omega0;
use crate::states::{coherent_state, expectations, spin_state_along, EffectiveField, JointState, Sense};
use crate::{Complex64, Error, Result};

/// Parameters of a simulated run in dimensionless units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub eps: f64,
    pub eta: f64,
    pub x0: f64,
    pub p0: f64,
    pub n_osc: usize,
    pub sample_dtau: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            eps: 10.0,
            eta: 0.3,
            x0: 13.0,
            p0: 0.0,
            n_osc: 400,
            sample_dtau: DEFAULT_SAMPLE_DTAU,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps", self.eps), ("eta", self.eta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    reason: "must be finite and non-negative",
                });
            }
        }
        for (name, v) in [("x0", self.x0), ("p0", self.p0)] {
            if !v.is_finite() {
                return Err(Error::Domain {
                    name,
                    value: v,
                    reason: "must be finite",
                });
            }
        }
        crate::params::positive("sample_dtau", self.sample_dtau)?;
        BasisSpec::new(self.n_osc).map(|_| ())
    }

    pub fn basis(&self) -> Result<BasisSpec> {
        BasisSpec::new(self.n_osc)
    }

    /// Classical amplitude `sqrt(x0² + p0²)`.
    pub fn amplitude(&self) -> f64 {
        hypot(self.x0, self.p0)
    }

    /// Quasiclassical shift for these parameters (zero without coupling).
    pub fn delta_omega0(&self) -> f64 {
        delta_omega0(&ModelParams {
            eps: self.eps,
            eta: self.eta,
            x_m: self.amplitude(),
            length_unit: f64::NAN,
            momentum_unit: f64::NAN,
            spin: 0.5,
            tau_r: 2.0 * PI / self.eps,
        })
    }

    pub fn field_at(&self, x: f64) -> EffectiveField {
        EffectiveField::at(self.eps, self.eta, x)
    }

    /// Coherent tip state with the spin along or against `B_eff(x0)`.
    pub fn initial_state(&self, sense: Sense) -> Result<JointState> {
        self.validate()?;
        let basis = self.basis()?;
        let osc = coherent_state(self.x0, self.p0, basis)?;
        let spinor = spin_state_along(self.field_at(self.x0), sense)?;
        JointState::product(&osc, spinor, basis)
    }
}

/// A plain run with its crossing analysis.
#[derive(Debug, Clone)]
pub struct OscarRun {
    pub output: RunOutput,
    /// Empty when `⟨x⟩` never changes sign.
    pub crossings: CrossingSeries,
    pub shifts: ShiftSeries,
    /// `δτ_j` against `j`; needs two half-periods.
    pub fit: Option<FitResult>,
    pub schedule_words: Vec<u64>,
}

/// Plain OSCAR from a spin anti-aligned with the effective field, long
/// enough to resolve `half_periods` half-periods.
pub fn run_oscar(
    params: &SimParams,
    noise: Option<&NoiseRealization>,
    half_periods: usize,
    cache: &mut PropagatorCache,
) -> Result<OscarRun> {
    run_oscar_from(params, Sense::AntiAligned, noise, half_periods, cache)
}

pub fn run_oscar_from(
    params: &SimParams,
    sense: Sense,
    noise: Option<&NoiseRealization>,
    half_periods: usize,
    cache: &mut PropagatorCache,
) -> Result<OscarRun> {
    if half_periods == 0 {
        return Err(Error::Domain {
            name: "half_periods",
            value: 0.0,
            reason: "at least one half-period is needed",
        });
    }
    let s0 = params.initial_state(sense)?;
    let tau_end = (half_periods + 1) as f64 * PI;
    let builder = Schedule::builder(tau_end, params.eps, params.eta);
    let schedule = match noise {
        Some(n) => builder.noise(n).build()?,
        None => builder.build()?,
    };
    let output = run(&s0, &schedule, params.sample_dtau, cache)?;
    let crossings = crossings_of(&output, &[])?;
    let schedule_words = schedule.canonical_words();
    let shifts = effective_shift_series(&crossings);
    let fit = if crossings.len() >= 2 {
        Some(linear_fit(&crossings.indices(), &crossings.deviations)?)
    } else {
        None
    };
    Ok(OscarRun {
        output,
        crossings,
        shifts,
        fit,
        schedule_words,
    })
}

fn crossings_of(output: &RunOutput, breaks: &[f64]) -> Result<CrossingSeries> {
    match find_crossings_split(&output.times(), &output.positions(), breaks) {
        Ok(c) => Ok(c),
        Err(Error::NoCrossings) | Err(Error::TooFewSamples { .. }) => Ok(CrossingSeries::default()),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseTiming {
    /// Pulse `k` starts at `offset + kτ_p`.
    #[default]
    Fixed,
    /// Pulse `k ≥ 1` starts at the turning point of `⟨x⟩` nearest to `τ_p`
    /// after the previous pulse started, so every pulse catches the tip at
    /// rest even as its phase drifts.
    TurningPoints,
}

/// rf-off windows of length `duration`, one per period `τ_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSequence {
    pub offset: f64,
    pub period: f64,
    /// π/2 for a quarter-period pulse, π for a half-period one.
    pub duration: f64,
    pub count: usize,
    pub timing: PulseTiming,
}

impl PulseSequence {
    pub fn none() -> Self {
        Self {
            offset: 0.0,
            period: 2.0 * PI,
            duration: PI / 2.0,
            count: 0,
            timing: PulseTiming::Fixed,
        }
    }

    /// π/2 pulses locked to the turning points of the tip.
    pub fn quarter_period(period: f64, count: usize) -> Self {
        Self {
            offset: 0.0,
            period,
            duration: PI / 2.0,
            count,
            timing: PulseTiming::TurningPoints,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(Error::Domain {
                name: "offset",
                value: self.offset,
                reason: "pulse offset must be finite and non-negative",
            });
        }
        crate::params::positive("duration", self.duration)?;
        crate::params::positive("tau_p", self.period)?;
        if self.duration >= self.period {
            return Err(Error::Domain {
                name: "duration",
                value: self.duration,
                reason: "pulse must be shorter than its period",
            });
        }
        Ok(())
    }

    /// Nominal windows `[offset + kτ_p, offset + kτ_p + duration)`.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        (0..self.count)
            .map(|k| {
                let start = self.offset + k as f64 * self.period;
                (start, start + self.duration)
            })
            .collect()
    }

    /// Nominal end of the last full period.
    pub fn horizon(&self) -> f64 {
        self.offset + self.count as f64 * self.period
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum CollapsePolicy {
    #[default]
    None,
    /// `τ_coll` after the end of every pulse, or every `τ_coll` without pulses.
    FixedInterval(f64),
    AtTimes(Vec<f64>),
}

impl CollapsePolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            CollapsePolicy::None => Ok(()),
            CollapsePolicy::FixedInterval(t) => crate::params::positive("tau_coll", *t),
            CollapsePolicy::AtTimes(ts) => match ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
                Some(&bad) => Err(Error::Domain {
                    name: "collapse time",
                    value: bad,
                    reason: "must be positive",
                }),
                None => Ok(()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Kept,
    Jumped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchProbabilities {
    pub aligned: f64,
    pub anti_aligned: f64,
}

impl BranchProbabilities {
    pub fn of(&self, sense: Sense) -> f64 {
        match sense {
            Sense::Aligned => self.aligned,
            Sense::AntiAligned => self.anti_aligned,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Collapse {
    pub state: JointState,
    pub branch: Sense,
    pub outcome: Outcome,
    pub probabilities: BranchProbabilities,
}

/// Measurement axis: `B_eff` at the current `⟨x⟩`.
pub fn collapse_axis(s: &JointState, eps_active: f64, eta: f64) -> EffectiveField {
    EffectiveField::at(eps_active, eta, expectations(s).x)
}

/// Oscillator factor left after projecting the spin onto `spinor`.
fn branch_amplitudes(s: &JointState, spinor: [Complex64; 2]) -> Vec<Complex64> {
    let (a, b) = (spinor[0].conj(), spinor[1].conj());
    s.amplitudes.chunks_exact(2).map(|c| a * c[0] + b * c[1]).collect()
}

fn squared_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub fn branch_probabilities(s: &JointState, axis: EffectiveField) -> Result<BranchProbabilities> {
    let up = squared_norm(&branch_amplitudes(s, spin_state_along(axis, Sense::Aligned)?));
    let down = squared_norm(&branch_amplitudes(s, spin_state_along(axis, Sense::AntiAligned)?));
    let total = up + down;
    Ok(BranchProbabilities {
        aligned: up / total,
        anti_aligned: down / total,
    })
}

/// Projects the spin onto `±B̂` (`axis`), choosing the branch by the Born
/// rule; `reference` decides whether the result counts as kept or jumped.
pub fn apply_collapse<R: Rng + ?Sized>(
    s: &JointState,
    axis: EffectiveField,
    reference: Sense,
    rng: &mut R,
) -> Result<Collapse> {
    let probabilities = branch_probabilities(s, axis)?;
    let u: f64 = rng.gen();
    let branch = if u < probabilities.aligned {
        Sense::Aligned
    } else {
        Sense::AntiAligned
    };
    let spinor = spin_state_along(axis, branch)?;
    let osc = branch_amplitudes(s, spinor);
    let norm = sqrt(squared_norm(&osc));
    if norm == 0.0 {
        return Err(Error::ZeroNormBranch);
    }
    let mut amplitudes = Vec::with_capacity(s.amplitudes.len());
    for c in &osc {
        let c = c / norm;
        amplitudes.extend([spinor[0] * c, spinor[1] * c]);
    }
    Ok(Collapse {
        state: JointState {
            amplitudes,
            basis: s.basis,
            tau: s.tau,
        },
        branch,
        outcome: if branch == reference { Outcome::Kept } else { Outcome::Jumped },
        probabilities,
    })
}

#[derive(Debug, Clone)]
pub struct InterruptedConfig {
    pub params: SimParams,
    pub pulses: PulseSequence,
    pub policy: CollapsePolicy,
    pub initial: Sense,
    /// End of the run with fixed pulse timing. With turning-point timing the
    /// run ends one period after the last pulse starts.
    pub tau_end: f64,
    /// Seed of the Born-rule draws.
    pub collapse_seed: u64,
}

impl InterruptedConfig {
    pub fn new(params: SimParams, pulses: PulseSequence, policy: CollapsePolicy) -> Self {
        Self {
            params,
            tau_end: pulses.horizon(),
            pulses,
            policy,
            initial: Sense::Aligned,
            collapse_seed: 0,
        }
    }

    /// Collapse times for fixed pulse timing, checked against the pulses.
    pub fn collapse_times(&self) -> Result<Vec<f64>> {
        self.policy.validate()?;
        let windows = self.pulses.windows();
        let mut times = match &self.policy {
            CollapsePolicy::None => Vec::new(),
            CollapsePolicy::AtTimes(ts) => ts.clone(),
            CollapsePolicy::FixedInterval(t) if windows.is_empty() => {
                let n = (self.tau_end / t * (1.0 + 1e-12)) as usize;
                (1..=n).map(|m| m as f64 * t).filter(|&c| c <= self.tau_end).collect()
            }
            CollapsePolicy::FixedInterval(t) => {
                let mut out = Vec::new();
                for (k, &(_, end)) in windows.iter().enumerate() {
                    let at = end + t;
                    let next = windows.get(k + 1).map_or(self.tau_end, |w| w.0);
                    if at >= next {
                        return Err(Error::Schedule(alloc::format!(
                            "collapse at {at} does not precede the next pulse or the end of the run at {next}"
                        )));
                    }
                    out.push(at);
                }
                out
            }
        };
        times.sort_by(f64::total_cmp);
        if let Some(&bad) = times.iter().find(|&&t| t > self.tau_end) {
            return Err(Error::Schedule(alloc::format!(
                "collapse at {bad} is after the end of the run"
            )));
        }
        Ok(times)
    }

    /// Collapse delay after each pulse end for turning-point timing. The
    /// collapse must come before the earliest possible next turning point.
    fn locked_delay(&self) -> Result<Option<f64>> {
        self.policy.validate()?;
        match &self.policy {
            CollapsePolicy::None => Ok(None),
            CollapsePolicy::AtTimes(_) => Err(Error::Schedule(
                "explicit collapse times need fixed pulse timing".into(),
            )),
            CollapsePolicy::FixedInterval(t) => {
                let latest = self.pulses.period - PI / 2.0;
                if self.pulses.duration + t >= latest {
                    return Err(Error::Schedule(alloc::format!(
                        "collapse {t} after the pulse does not precede the next pulse window"
                    )));
                }
                Ok(Some(*t))
            }
        }
    }
}

/// One projective collapse during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseRecord {
    pub tau: f64,
    pub x: f64,
    pub branch: Sense,
    pub outcome: Outcome,
    pub probabilities: BranchProbabilities,
}

/// Spin orientation relative to `B_eff` right after a pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseResponse {
    pub tau: f64,
    pub x: f64,
    /// `⟨S⟩·B̂_eff`
    pub projection: f64,
    /// Angle between `⟨S⟩` and `B_eff`.
    pub angle: f64,
    pub probabilities: BranchProbabilities,
}

/// Frequency shift averaged over the rf-on intervals between pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedShift {
    /// Phase gain per unit time, signed by the branch selected in each
    /// interval.
    pub mean: f64,
    /// Average interval length.
    pub interval: f64,
    pub intervals: usize,
    /// Sample steps left out as jumps of `⟨x⟩, ⟨p⟩`.
    pub jumps: usize,
}

#[derive(Debug, Clone)]
pub struct InterruptedRun {
    pub output: RunOutput,
    pub crossings: CrossingSeries,
    pub pulse_windows: Vec<(f64, f64)>,
    pub pulse_responses: Vec<PulseResponse>,
    pub collapses: Vec<CollapseRecord>,
    /// `None` when no rf-on interval is long enough to measure.
    pub shift: Option<WindowedShift>,
    /// Origins and canonical words of the schedules that were run, in order.
    pub schedule_words: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    PulseEnd,
    Collapse,
}

#[derive(Default)]
struct EventLog {
    responses: Vec<PulseResponse>,
    collapses: Vec<CollapseRecord>,
    /// Origin and canonical words of every span kept in the output.
    words: Vec<u64>,
}

impl EventLog {
    fn keep(&mut self, origin: f64, schedule: &Schedule) {
        self.words.push(origin.to_bits());
        self.words.extend(schedule.canonical_words());
    }
}

struct Span<'a> {
    params: SimParams,
    initial: Sense,
    /// Local rf-off windows.
    rf_off: &'a [(f64, f64)],
    /// Local event times, sorted.
    events: &'a [(f64, EventKind)],
    origin: f64,
}

fn span_schedule(span: &Span<'_>, len: f64, noise: Option<&NoiseRealization>) -> Result<Schedule> {
    let mut builder = Schedule::builder(len, span.params.eps, span.params.eta);
    for &(a, b) in span.rf_off {
        builder = builder.rf_off(a, b);
    }
    let builder = builder.events(span.events.iter().map(|e| e.0).filter(|&t| t <= len));
    let local = noise.map(|n| n.shifted(span.origin));
    match &local {
        Some(n) => builder.noise(n).build(),
        None => builder.build(),
    }
}

fn run_span(
    span: &Span<'_>,
    s0: &JointState,
    schedule: &Schedule,
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
    cache: &mut PropagatorCache,
) -> Result<RunOutput> {
    let params = span.params;
    let event_times = schedule.events().to_vec();
    let rf_off_at = |t: f64| span.rf_off.iter().any(|&(a, b)| a <= t && t < b);
    run_with_events(s0, schedule, params.sample_dtau, cache, |index, state| {
        let at = event_times[index];
        for &(_, kind) in span.events.iter().filter(|e| e.0 == at) {
            let eps_active = if rf_off_at(at) { 0.0 } else { params.eps };
            let axis = collapse_axis(state, eps_active, params.eta);
            let e = expectations(state);
            match kind {
                EventKind::PulseEnd => {
                    let projection = e.spin.dot(axis.unit()?);
                    let magnitude = e.spin.magnitude();
                    let cos = if magnitude > 0.0 { (projection / magnitude).clamp(-1.0, 1.0) } else { 0.0 };
                    log.responses.push(PulseResponse {
                        tau: span.origin + at,
                        x: e.x,
                        projection,
                        angle: acos(cos),
                        probabilities: branch_probabilities(state, axis)?,
                    });
                }
                EventKind::Collapse => {
                    let c = apply_collapse(state, axis, span.initial, rng)?;
                    log.collapses.push(CollapseRecord {
                        tau: span.origin + at,
                        x: e.x,
                        branch: c.branch,
                        outcome: c.outcome,
                        probabilities: c.probabilities,
                    });
                    *state = c.state;
                }
            }
        }
        Ok(())
    })
}

/// Appends a span's output, shifting its times by `origin`.
fn stitch(acc: &mut Option<RunOutput>, mut out: RunOutput, origin: f64) {
    for s in &mut out.samples {
        s.tau += origin;
    }
    out.final_state.tau += origin;
    if let Some(t) = out.diagnostics.truncation_warning_at.as_mut() {
        *t += origin;
    }
    match acc {
        None => *acc = Some(out),
        Some(prev) => {
            let skip = usize::from(out.samples.first().map(|s| s.tau) == prev.samples.last().map(|s| s.tau));
            prev.samples.extend(out.samples.into_iter().skip(skip));
            prev.diagnostics.absorb(&out.diagnostics);
            prev.final_state = out.final_state;
            prev.aborted = out.aborted;
        }
    }
}

/// Turning point of `⟨x⟩` (zero of `⟨p⟩`) closest to `target`.
fn turning_point_near(out: &RunOutput, target: f64) -> Result<f64> {
    let (times, momenta): (Vec<f64>, Vec<f64>) = out
        .samples
        .iter()
        .filter(|s| (s.tau - target).abs() <= 0.5 * PI)
        .map(|s| (s.tau, s.p))
        .unzip();
    let zeros = find_crossings(&times, &momenta).map_err(|_| {
        Error::Schedule(alloc::format!("no turning point of the tip within π/2 of {target}"))
    })?;
    Ok(zeros
        .crossings
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(target))
}

pub fn run_interrupted_oscar(
    cfg: &InterruptedConfig,
    noise: Option<&NoiseRealization>,
    cache: &mut PropagatorCache,
) -> Result<InterruptedRun> {
    cfg.pulses.validate()?;
    let s0 = cfg.params.initial_state(cfg.initial)?;
    let mut rng = crate::evolve::seeded_rng(cfg.collapse_seed);
    let mut log = EventLog::default();
    let (output, windows) = match cfg.pulses.timing {
        PulseTiming::TurningPoints if cfg.pulses.count > 0 => run_locked(cfg, &s0, noise, &mut rng, &mut log, cache)?,
        _ => run_fixed(cfg, &s0, noise, &mut rng, &mut log, cache)?,
    };

    let collapse_times: Vec<f64> = log.collapses.iter().map(|c| c.tau).collect();
    let crossings = crossings_of(&output, &collapse_times)?;
    let run_end = output.samples.last().map_or(0.0, |s| s.tau);
    let intervals = measurement_intervals(&windows, run_end, &log.collapses, cfg.initial);
    let shift = windowed_shift(&output, &intervals).ok();
    Ok(InterruptedRun {
        output,
        crossings,
        pulse_windows: windows,
        pulse_responses: log.responses,
        collapses: log.collapses,
        shift,
        schedule_words: log.words,
    })
}

fn run_fixed(
    cfg: &InterruptedConfig,
    s0: &JointState,
    noise: Option<&NoiseRealization>,
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
    cache: &mut PropagatorCache,
) -> Result<(RunOutput, Vec<(f64, f64)>)> {
    let windows = cfg.pulses.windows();
    if let Some(&(_, end)) = windows.last() {
        if end > cfg.tau_end {
            return Err(Error::Schedule(alloc::format!(
                "pulse ending at {end} runs past the end of the run at {}",
                cfg.tau_end
            )));
        }
    }
    let mut events: Vec<(f64, EventKind)> = windows.iter().map(|w| (w.1, EventKind::PulseEnd)).collect();
    events.extend(cfg.collapse_times()?.into_iter().map(|t| (t, EventKind::Collapse)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = Span {
        params: cfg.params,
        initial: cfg.initial,
        rf_off: &windows,
        events: &events,
        origin: 0.0,
    };
    let schedule = span_schedule(&span, cfg.tau_end, noise)?;
    let output = run_span(&span, s0, &schedule, rng, log, cache)?;
    log.keep(0.0, &schedule);
    Ok((output, windows))
}

/// One span per pulse period, each ending at the turning point that starts
/// the next pulse. A span is run once past its nominal end to find the
/// turning point and again, from the same state and draws, up to it.
fn run_locked(
    cfg: &InterruptedConfig,
    s0: &JointState,
    noise: Option<&NoiseRealization>,
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
    cache: &mut PropagatorCache,
) -> Result<(RunOutput, Vec<(f64, f64)>)> {
    let delay = cfg.locked_delay()?;
    let (d, tp) = (cfg.pulses.duration, cfg.pulses.period);
    let mut acc: Option<RunOutput> = None;
    let mut state = s0.clone();
    let mut origin = 0.0;
    let mut windows = Vec::with_capacity(cfg.pulses.count);

    if cfg.pulses.offset > 0.0 {
        let span = Span {
            params: cfg.params,
            initial: cfg.initial,
            rf_off: &[],
            events: &[],
            origin,
        };
        let schedule = span_schedule(&span, cfg.pulses.offset, noise)?;
        let out = run_span(&span, &state, &schedule, rng, log, cache)?;
        log.keep(origin, &schedule);
        state = out.final_state.clone();
        let aborted = out.aborted.is_some();
        stitch(&mut acc, out, origin);
        origin = cfg.pulses.offset;
        if aborted {
            return Ok((acc.expect("span output"), windows));
        }
    }

    let mut events = alloc::vec![(d, EventKind::PulseEnd)];
    events.extend(delay.map(|t| (d + t, EventKind::Collapse)));
    let rf_off = [(0.0, d)];
    for k in 0..cfg.pulses.count {
        let span = Span {
            params: cfg.params,
            initial: cfg.initial,
            rf_off: &rf_off,
            events: &events,
            origin,
        };
        windows.push((origin, origin + d));
        let last = k + 1 == cfg.pulses.count;
        let saved_rng = rng.clone();
        let logged = (log.responses.len(), log.collapses.len());
        let probe_len = if last { tp } else { tp + 0.5 * PI };
        let schedule = span_schedule(&span, probe_len, noise)?;
        let probe = run_span(&span, &state, &schedule, rng, log, cache)?;
        if last || probe.aborted.is_some() {
            log.keep(origin, &schedule);
            stitch(&mut acc, probe, origin);
            break;
        }
        let turn = turning_point_near(&probe, tp)?;
        *rng = saved_rng;
        log.responses.truncate(logged.0);
        log.collapses.truncate(logged.1);
        let schedule = span_schedule(&span, turn, noise)?;
        let out = run_span(&span, &state, &schedule, rng, log, cache)?;
        log.keep(origin, &schedule);
        state = out.final_state.clone();
        let aborted = out.aborted.is_some();
        stitch(&mut acc, out, origin);
        origin += turn;
        if aborted {
            break;
        }
    }
    Ok((acc.expect("at least one pulse period"), windows))
}

fn sense_sign(s: Sense) -> f64 {
    match s {
        Sense::Aligned => 1.0,
        Sense::AntiAligned => -1.0,
    }
}

/// rf-on stretches after each pulse (the whole run without pulses), with the
/// sign of the shift expected from the branch selected inside them.
fn measurement_intervals(
    windows: &[(f64, f64)],
    run_end: f64,
    collapses: &[CollapseRecord],
    initial: Sense,
) -> Vec<(f64, f64, f64)> {
    let spans: Vec<(f64, f64)> = if windows.is_empty() {
        alloc::vec![(0.0, run_end)]
    } else {
        windows
            .iter()
            .enumerate()
            .map(|(k, w)| (w.1, windows.get(k + 1).map_or(run_end, |n| n.0)))
            .collect()
    };
    spans
        .into_iter()
        .map(|(a, b)| {
            let sense = collapses
                .iter()
                .find(|c| c.tau >= a && c.tau < b)
                .map_or(initial, |c| c.branch);
            (a, b, sense_sign(sense))
        })
        .filter(|&(a, b, _)| b - a > 0.5 * PI)
        .collect()
}

/// Phase gained per unit time by the orbit over the `(start, end, sign)`
/// intervals, each gain multiplied by its sign.
pub fn windowed_shift(output: &RunOutput, intervals: &[(f64, f64, f64)]) -> Result<WindowedShift> {
    let times = output.times();
    let xs = output.positions();
    let ps: Vec<f64> = output.samples.iter().map(|s| s.p).collect();
    let (mut gain, mut time, mut jumps) = (0.0, 0.0, 0);
    for &(a, b, sign) in intervals {
        let g = phase_gain(&times, &xs, &ps, a, b, PHASE_JUMP_TOLERANCE)?;
        gain += sign * g.gain;
        time += g.time;
        jumps += g.jumps;
    }
    if intervals.is_empty() || time == 0.0 {
        return Err(Error::EmptyWindow);
    }
    Ok(WindowedShift {
        mean: gain / time,
        interval: time / intervals.len() as f64,
        intervals: intervals.len(),
        jumps,
    })
}

/// Shift of a plain run over whole half-periods, measured the same way as
/// [`windowed_shift`] and signed by `sense`.
pub fn calibrate_shift(
    params: &SimParams,
    sense: Sense,
    half_periods: usize,
    cache: &mut PropagatorCache,
) -> Result<f64> {
    let run = run_oscar_from(params, sense, None, half_periods, cache)?;
    let tau_end = run.output.samples.last().map_or(0.0, |s| s.tau);
    Ok(windowed_shift(&run.output, &[(0.0, tau_end, sense_sign(sense))])?.mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseInversion {
    pub tau_coll: f64,
    /// The shift was outside `[0, δω₀]` and the result was clamped.
    pub clamped: bool,
}

/// `τ_coll = τ_p (1 − ⟨δω⟩ / δω₀)`.
pub fn invert_collapse_time(mean_shift: f64, delta_omega0: f64, tau_p: f64) -> Result<CollapseInversion> {
    crate::params::positive("tau_p", tau_p)?;
    crate::params::positive("delta_omega0", delta_omega0)?;
    if !mean_shift.is_finite() {
        return Err(Error::Domain {
            name: "mean_shift",
            value: mean_shift,
            reason: "must be finite",
        });
    }
    let ratio = mean_shift / delta_omega0;
    let clamped = !(0.0..=1.0).contains(&ratio);
    Ok(CollapseInversion {
        tau_coll: tau_p * (1.0 - ratio.clamp(0.0, 1.0)),
        clamped,
    })
}
