//! Exact propagation under piecewise-constant Hamiltonians.
//!
//! Each distinct segment Hamiltonian is diagonalized once; between
//! breakpoints the state is advanced as `V exp(−iΛτ) Vᵀ ψ`.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hilbert::{
    build_hamiltonian, energy, top_band_population, BasisSpec, HamiltonianSpec, TRUNCATION_ABORT,
    TRUNCATION_WARN,
};
use crate::linalg::{axpy, dot, SymmetricEigen};
use crate::math::{abs, cos, floor, sin};
use crate::states::{expectations, JointState, SpinVector};
use crate::{Complex64, Error, Result};

mod noise;
mod schedule;

pub use noise::{draw_interval, realization_seed, sample_noise, seeded_rng, NoiseRealization};
pub use schedule::{Schedule, ScheduleBuilder, Segment};

/// Default sampling step: 200 samples per half-period.
pub const DEFAULT_SAMPLE_DTAU: f64 = core::f64::consts::PI / 200.0;

/// Cached eigendecomposition of one segment Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    spec: HamiltonianSpec,
    basis: BasisSpec,
    eigen: SymmetricEigen,
}

/// State expressed in a propagator's eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenCoefficients {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl EigenCoefficients {
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b)
    }
}

impl SpectralPropagator {
    /// Diagonalizes the segment Hamiltonian.
    pub fn diagonalize(spec: HamiltonianSpec, basis: BasisSpec) -> Result<Self> {
        let h = build_hamiltonian(spec, basis);
        let eigen = SymmetricEigen::new(h.real_part())?;
        Ok(Self { spec, basis, eigen })
    }

    pub fn spec(&self) -> HamiltonianSpec {
        self.spec
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    /// `Vᵀ ψ`
    pub fn project(&self, psi: &[Complex64]) -> Result<EigenCoefficients> {
        self.check_len(psi.len())?;
        let re: Vec<f64> = psi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
        let rows = self.basis.dim();
        let mut out = EigenCoefficients {
            re: Vec::with_capacity(rows),
            im: Vec::with_capacity(rows),
        };
        for k in 0..rows {
            let v = self.eigen.vectors.row(k);
            out.re.push(dot(v, &re));
            out.im.push(dot(v, &im));
        }
        Ok(out)
    }

    /// `V exp(−iΛ dtau) c`
    pub fn reconstruct(&self, c: &EigenCoefficients, dtau: f64) -> Vec<Complex64> {
        let dim = self.basis.dim();
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        for (k, &lambda) in self.eigen.values.iter().enumerate() {
            let (cr, ci) = (c.re[k], c.im[k]);
            if cr == 0.0 && ci == 0.0 {
                continue;
            }
            let phase = lambda * dtau;
            let (cp, sp) = (cos(phase), sin(phase));
            // (cr + i ci)(cos − i sin)
            let dr = cr * cp + ci * sp;
            let di = ci * cp - cr * sp;
            let v = self.eigen.vectors.row(k);
            axpy(dr, v, &mut re);
            axpy(di, v, &mut im);
        }
        re.into_iter()
            .zip(im)
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    /// `Σ λ_k |c_k|²`
    pub fn energy_of(&self, c: &EigenCoefficients) -> f64 {
        self.eigen.values.iter().zip(c.weights()).map(|(l, w)| l * w).sum()
    }

    /// Advances `s` by `dtau` (either sign).
    pub fn step(&self, s: &JointState, dtau: f64) -> Result<JointState> {
        if s.basis != self.basis {
            return Err(Error::BasisMismatch {
                expected: self.basis.dim(),
                found: s.basis.dim(),
            });
        }
        if !dtau.is_finite() {
            return Err(Error::Domain {
                name: "dtau",
                value: dtau,
                reason: "time step must be finite",
            });
        }
        let c = self.project(&s.amplitudes)?;
        Ok(JointState {
            amplitudes: self.reconstruct(&c, dtau),
            basis: self.basis,
            tau: s.tau + dtau,
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.basis.dim() {
            return Err(Error::BasisMismatch {
                expected: self.basis.dim(),
                found: len,
            });
        }
        Ok(())
    }
}

/// Free function form of [`SpectralPropagator::step`].
pub fn step(s: &JointState, prop: &SpectralPropagator, dtau: f64) -> Result<JointState> {
    prop.step(s, dtau)
}

/// Eigendecompositions keyed by the exact `(ε, η, Δ)` of each segment.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    basis: BasisSpec,
    entries: BTreeMap<[u64; 3], Arc<SpectralPropagator>>,
}

impl PropagatorCache {
    pub fn new(basis: BasisSpec) -> Self {
        Self {
            basis,
            entries: BTreeMap::new(),
        }
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get_or_build(&mut self, spec: HamiltonianSpec) -> Result<Arc<SpectralPropagator>> {
        if let Some(p) = self.entries.get(&spec.key()) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(SpectralPropagator::diagonalize(spec, self.basis)?);
        self.entries.insert(spec.key(), Arc::clone(&p));
        Ok(p)
    }

    /// Diagonalizes every Hamiltonian `schedule` needs.
    pub fn prepare(&mut self, schedule: &Schedule) -> Result<()> {
        for spec in schedule.distinct_specs() {
            self.get_or_build(spec)?;
        }
        Ok(())
    }
}

/// One row of a run's time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub tau: f64,
    pub x: f64,
    pub p: f64,
    pub spin: SpinVector,
    pub spin_magnitude: f64,
    pub norm_error: f64,
    pub top_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunDiagnostics {
    pub max_norm_error: f64,
    pub max_top_band: f64,
    /// First time the top-band population exceeded the warning threshold.
    pub truncation_warning_at: Option<f64>,
    /// Largest in-segment change of `⟨H_segment⟩` over the samples.
    pub max_energy_drift: f64,
    pub segments: usize,
    pub events: usize,
}

impl RunDiagnostics {
    /// Combines the diagnostics of consecutive runs.
    pub fn absorb(&mut self, other: &RunDiagnostics) {
        self.max_norm_error = self.max_norm_error.max(other.max_norm_error);
        self.max_top_band = self.max_top_band.max(other.max_top_band);
        self.truncation_warning_at = self.truncation_warning_at.or(other.truncation_warning_at);
        self.max_energy_drift = self.max_energy_drift.max(other.max_energy_drift);
        self.segments += other.segments;
        self.events += other.events;
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<Sample>,
    pub final_state: JointState,
    pub diagnostics: RunDiagnostics,
    /// Numerical-health failure that stopped the run early.
    pub aborted: Option<Error>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<Self> {
        match self.aborted {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }
}

/// Propagates `s0` over `schedule`, sampling every `sample_dtau`.
pub fn run(
    s0: &JointState,
    schedule: &Schedule,
    sample_dtau: f64,
    cache: &mut PropagatorCache,
) -> Result<RunOutput> {
    run_with_events(s0, schedule, sample_dtau, cache, |_, _| Ok(()))
}

/// Like [`run`], handing the state to `on_event` at every event time of the
/// schedule (after the segment that ends there).
pub fn run_with_events<F>(
    s0: &JointState,
    schedule: &Schedule,
    sample_dtau: f64,
    cache: &mut PropagatorCache,
    mut on_event: F,
) -> Result<RunOutput>
where
    F: FnMut(usize, &mut JointState) -> Result<()>,
{
    crate::params::positive("sample_dtau", sample_dtau)?;
    if s0.basis != cache.basis() {
        return Err(Error::BasisMismatch {
            expected: cache.basis().dim(),
            found: s0.basis.dim(),
        });
    }
    let basis = s0.basis;
    let tau_end = schedule.tau_end();
    let last_sample = floor(tau_end / sample_dtau * (1.0 + 1e-12)) as usize;
    let mut samples = Vec::with_capacity(last_sample + 1);
    let mut diag = RunDiagnostics {
        segments: schedule.segments().len(),
        ..RunDiagnostics::default()
    };
    let mut state = s0.clone();
    let mut next_sample = 0usize;
    let mut events = schedule.events().iter().enumerate().peekable();
    let n_segments = schedule.segments().len();

    let mut record = |psi: Vec<Complex64>, tau: f64, diag: &mut RunDiagnostics| -> Option<Error> {
        let js = JointState {
            amplitudes: psi,
            basis,
            tau,
        };
        let e = expectations(&js);
        let norm_error = abs(js.norm() - 1.0);
        let top_band = top_band_population(basis, &js.amplitudes);
        diag.max_norm_error = diag.max_norm_error.max(norm_error);
        diag.max_top_band = diag.max_top_band.max(top_band);
        if top_band > TRUNCATION_WARN && diag.truncation_warning_at.is_none() {
            diag.truncation_warning_at = Some(tau);
        }
        samples.push(Sample {
            tau,
            x: e.x,
            p: e.p,
            spin: e.spin,
            spin_magnitude: e.spin.magnitude(),
            norm_error,
            top_band,
        });
        (top_band > TRUNCATION_ABORT).then_some(Error::TruncationLeak {
            tau,
            population: top_band,
        })
    };

    for (index, seg) in schedule.segments().iter().enumerate() {
        let prop = cache.get_or_build(seg.spec)?;
        let coeffs = prop.project(&state.amplitudes)?;
        let start_energy = energy(seg.spec, basis, &state.amplitudes);
        let is_last = index + 1 == n_segments;
        while next_sample <= last_sample {
            let tau = next_sample as f64 * sample_dtau;
            let inside = tau < seg.end || (is_last && tau <= seg.end * (1.0 + 1e-12));
            if !inside {
                break;
            }
            let psi = prop.reconstruct(&coeffs, tau - seg.start);
            let drift = abs(energy(seg.spec, basis, &psi) - start_energy);
            diag.max_energy_drift = diag.max_energy_drift.max(drift);
            next_sample += 1;
            if let Some(err) = record(psi, tau, &mut diag) {
                return Ok(abort(samples, state, diag, err));
            }
        }
        state.amplitudes = prop.reconstruct(&coeffs, seg.duration());
        state.tau = seg.end;
        diag.max_norm_error = diag.max_norm_error.max(abs(state.norm() - 1.0));

        while let Some(&(event_index, &at)) = events.peek() {
            if at != seg.end {
                break;
            }
            events.next();
            on_event(event_index, &mut state)?;
            diag.events += 1;
        }
    }
    Ok(RunOutput {
        samples,
        final_state: state,
        diagnostics: diag,
        aborted: None,
    })
}

fn abort(samples: Vec<Sample>, state: JointState, diag: RunDiagnostics, err: Error) -> RunOutput {
    RunOutput {
        samples,
        final_state: state,
        diagnostics: diag,
        aborted: Some(err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{coherent_state, spin_state_along, EffectiveField, Sense};
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unperturbed_spectrum() {
        let b = BasisSpec::new(10).unwrap();
        let p = SpectralPropagator::diagonalize(HamiltonianSpec::new(0.0, 0.0, 0.0), b).unwrap();
        for (k, &l) in p.eigenvalues().iter().enumerate() {
            assert!((l - ((k / 2) as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_spin_spectrum() {
        let b = BasisSpec::new(10).unwrap();
        let p = SpectralPropagator::diagonalize(HamiltonianSpec::new(10.0, 0.0, 0.0), b).unwrap();
        let mut expected: Vec<f64> = (0..10)
            .flat_map(|n| [n as f64 + 0.5 - 5.0, n as f64 + 0.5 + 5.0])
            .collect();
        expected.sort_by(f64::total_cmp);
        for (l, e) in p.eigenvalues().iter().zip(&expected) {
            assert!((l - e).abs() < 1e-12);
        }
    }

    #[test]
    fn propagator_meets_residual_invariants() {
        let b = BasisSpec::new(40).unwrap();
        let spec = HamiltonianSpec::new(10.0, 0.3, 0.2);
        let p = SpectralPropagator::diagonalize(spec, b).unwrap();
        let h = build_hamiltonian(spec, b);
        assert!(p.eigen().reconstruction_residual(h.real_part()) <= 1e-9);
        assert!(p.eigen().orthogonality_residual() <= 1e-10);
    }

    #[test]
    fn zero_step_is_identity() {
        let b = BasisSpec::new(12).unwrap();
        let p = SpectralPropagator::diagonalize(HamiltonianSpec::new(3.0, 0.3, 0.0), b).unwrap();
        let osc = coherent_state(1.0, 0.5, b).unwrap();
        let s = JointState::product(&osc, [c(0.6, 0.0), c(0.0, 0.8)], b).unwrap();
        let out = p.step(&s, 0.0).unwrap();
        for (a, z) in out.amplitudes.iter().zip(&s.amplitudes) {
            assert!((a - z).norm() < 1e-13);
        }
    }

    #[test]
    fn step_rejects_basis_mismatch() {
        let p = SpectralPropagator::diagonalize(HamiltonianSpec::new(1.0, 0.1, 0.0), BasisSpec::new(4).unwrap())
            .unwrap();
        let b = BasisSpec::new(5).unwrap();
        let s = JointState::product(&coherent_state(0.0, 0.0, b).unwrap(), [c(1.0, 0.0), c(0.0, 0.0)], b).unwrap();
        assert_eq!(p.step(&s, 1.0), Err(Error::BasisMismatch { expected: 8, found: 10 }));
    }

    #[test]
    fn oscillator_period_returns_state() {
        let b = BasisSpec::new(400).unwrap();
        let p = SpectralPropagator::diagonalize(HamiltonianSpec::new(0.0, 0.0, 0.0), b).unwrap();
        let osc = coherent_state(13.0, 0.0, b).unwrap();
        let s = JointState::product(&osc, [c(1.0, 0.0), c(0.0, 0.0)], b).unwrap();
        let out = p.step(&s, 2.0 * PI).unwrap();
        assert!((out.overlap(&s) - 1.0).abs() < 1e-8);

        let quarter = p.step(&s, PI / 2.0).unwrap();
        let e = expectations(&quarter);
        assert!(e.x.abs() < 1e-8 && (e.p + 13.0).abs() < 1e-8);
    }

    #[test]
    fn composition_and_time_reversal() {
        let b = BasisSpec::new(30).unwrap();
        let p = SpectralPropagator::diagonalize(HamiltonianSpec::new(4.0, 0.3, -0.1), b).unwrap();
        let osc = coherent_state(2.0, -1.0, b).unwrap();
        let spinor = spin_state_along(EffectiveField::at(4.0, 0.3, 2.0), Sense::AntiAligned).unwrap();
        let s = JointState::product(&osc, spinor, b).unwrap();
        let ab = p.step(&p.step(&s, 0.7).unwrap(), 1.9).unwrap();
        let direct = p.step(&s, 2.6).unwrap();
        for (x, y) in ab.amplitudes.iter().zip(&direct.amplitudes) {
            assert!((x - y).norm() < 1e-10);
        }
        let back = p.step(&p.step(&s, 1.3).unwrap(), -1.3).unwrap();
        assert!(1.0 - back.overlap(&s) < 1e-9);
    }

    #[test]
    fn run_samples_uniform_grid_and_tracks_health() {
        let b = BasisSpec::new(60).unwrap();
        let mut cache = PropagatorCache::new(b);
        let noise = sample_noise(5, 0.3, 2.0 * PI / 10.0, 3.0).unwrap();
        let schedule = Schedule::builder(3.0, 10.0, 0.3).noise(&noise).build().unwrap();
        let osc = coherent_state(3.0, 0.0, b).unwrap();
        let spinor = spin_state_along(EffectiveField::at(10.0, 0.3, 3.0), Sense::AntiAligned).unwrap();
        let s = JointState::product(&osc, spinor, b).unwrap();
        let out = run(&s, &schedule, 0.01, &mut cache).unwrap().into_result().unwrap();
        assert_eq!(out.samples.len(), 301);
        assert!(out.samples.windows(2).all(|w| (w[1].tau - w[0].tau - 0.01).abs() < 1e-12));
        assert!(out.diagnostics.max_norm_error < 1e-10);
        assert!(out.diagnostics.max_energy_drift < 1e-9);
        assert_eq!(cache.len(), 2);
        assert_eq!(out.final_state.tau, 3.0);
    }

    #[test]
    fn run_aborts_on_truncation_leak() {
        let b = BasisSpec::new(20).unwrap();
        let mut cache = PropagatorCache::new(b);
        // A strongly pushed state in a tiny basis fills the top levels.
        let schedule = Schedule::constant(1.0, HamiltonianSpec::new(0.0, 3.0, 0.0)).unwrap();
        let osc = coherent_state(2.0, 0.0, b).unwrap();
        let s = JointState::product(&osc, [c(1.0, 0.0), c(0.0, 0.0)], b).unwrap();
        let out = run(&s, &schedule, 0.05, &mut cache).unwrap();
        assert!(matches!(out.aborted, Some(Error::TruncationLeak { .. })));
        assert!(out.diagnostics.truncation_warning_at.is_some());
    }

    #[test]
    fn events_fire_at_segment_ends() {
        let b = BasisSpec::new(8).unwrap();
        let mut cache = PropagatorCache::new(b);
        let schedule = Schedule::builder(1.0, 1.0, 0.1).event(0.25).event(1.0).build().unwrap();
        let s = JointState::product(&coherent_state(0.0, 0.0, b).unwrap(), [c(1.0, 0.0), c(0.0, 0.0)], b).unwrap();
        let mut seen = Vec::new();
        run_with_events(&s, &schedule, 0.1, &mut cache, |i, st| {
            seen.push((i, st.tau));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![(0, 0.25), (1, 1.0)]);
    }
}
