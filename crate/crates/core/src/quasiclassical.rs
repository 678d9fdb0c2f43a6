//! Closed-form quasiclassical estimates: frequency shift, thermal noise
//! amplitude, per-reversal spin deviation and collapse-time scales.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math::{cos, sin, sqrt};
use crate::params::{ModelParams, PhysicalParams};
use crate::{Error, Result};

/// Numerical prefactor of the per-reversal spin deviation, taken as given.
pub const SPIN_DEVIATION_PREFACTOR: f64 = 3.4;

/// Default upper end of the `τ sin τ = r` root scan.
pub const DEFAULT_ROOT_SCAN: f64 = 1.0e4;

/// Relative cantilever frequency shift `δω₀ = 2Sη² / sqrt(2η²x_m² + ε²)`.
pub fn delta_omega0(m: &ModelParams) -> f64 {
    let eta2 = m.eta * m.eta;
    2.0 * m.spin * eta2 / sqrt(2.0 * eta2 * m.x_m * m.x_m + m.eps * m.eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalAmplitude {
    /// Thermal tip vibration amplitude near the Rabi frequency (m).
    pub a_t: f64,
    /// Rabi frequency `γ B₁` (rad/s).
    pub omega_r: f64,
}

/// `a_T = (ω_c / ω_R) sqrt(k_B T / 2k_c)`
pub fn thermal_amplitude(p: &PhysicalParams) -> ThermalAmplitude {
    let omega_r = p.gamma * p.b1;
    ThermalAmplitude {
        a_t: p.omega_c() / omega_r * sqrt(p.k_b * p.temperature / (2.0 * p.k_c)),
        omega_r,
    }
}

/// Squared spin deviation per reversal, `3.4 γ G a_T² / (ω_c X_m)`.
///
/// The γ makes the expression dimensionless; without it the units are
/// T·m·s and the reference value 9×10⁻⁷ is not recovered.
pub fn spin_deviation_sq(p: &PhysicalParams, a_t: f64) -> f64 {
    SPIN_DEVIATION_PREFACTOR * p.gamma * p.gradient * a_t * a_t / (p.omega_c() * p.amplitude)
}

/// Right-hand side `1 / (4 x_m δω₀)` of the collapse condition.
pub fn collapse_rhs(x_m: f64, delta_omega0: f64) -> f64 {
    1.0 / (4.0 * x_m * delta_omega0)
}

/// Smallest collapse time for tip amplitude `x_m` and shift `δω₀`: the
/// smallest positive root of `τ sin τ = 1/(4 x_m δω₀)`.
pub fn collapse_time_root(x_m: f64, delta_omega0: f64) -> Result<f64> {
    smallest_tau_sin_tau_root(collapse_rhs(x_m, delta_omega0), DEFAULT_ROOT_SCAN)
}

/// Smallest positive solution of `τ sin τ = r` with `τ ≤ scan_bound`.
pub fn smallest_tau_sin_tau_root(r: f64, scan_bound: f64) -> Result<f64> {
    check_rhs(r)?;
    let mut k = 0usize;
    loop {
        let lo = k as f64 * PI;
        if lo >= scan_bound {
            return Err(Error::RootNotFound { rhs: r, scan_bound });
        }
        // τ sin τ is positive only on even branches (kπ, (k+1)π).
        let (peak_at, peak) = branch_peak(k);
        if peak >= r {
            let root = bisect(|t| t * sin(t) - r, lo, peak_at);
            if root > scan_bound {
                return Err(Error::RootNotFound { rhs: r, scan_bound });
            }
            return Ok(root);
        }
        k += 2;
    }
}

/// Every positive solution of `τ sin τ = r` with `τ ≤ scan_bound`, ascending.
pub fn tau_sin_tau_roots(r: f64, scan_bound: f64) -> Result<Vec<f64>> {
    check_rhs(r)?;
    let mut roots = Vec::new();
    let mut k = 0usize;
    while (k as f64) * PI < scan_bound {
        let lo = k as f64 * PI;
        let hi = lo + PI;
        let (peak_at, peak) = branch_peak(k);
        if peak >= r {
            let f = |t: f64| t * sin(t) - r;
            roots.push(bisect(f, lo, peak_at));
            if peak > r {
                roots.push(bisect(f, hi, peak_at));
            }
        }
        k += 2;
    }
    roots.retain(|&t| t <= scan_bound);
    if roots.is_empty() {
        return Err(Error::RootNotFound { rhs: r, scan_bound });
    }
    Ok(roots)
}

fn check_rhs(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "rhs",
            value: r,
            reason: "collapse condition needs a positive right-hand side",
        })
    }
}

/// Location and value of the maximum of `τ sin τ` on the even branch
/// `(kπ, (k+1)π)`, where `sin τ + τ cos τ = 0`.
fn branch_peak(k: usize) -> (f64, f64) {
    let lo = k as f64 * PI;
    let hi = lo + PI;
    // The derivative is positive just above kπ and equals −(k+1)π at the top.
    let slope = |t: f64| sin(t) + t * cos(t);
    let at = bisect(slope, hi, lo + 1e-12);
    (at, at * sin(at))
}

/// Bisection on `[a, b]` with `f(a) < 0 ≤ f(b)` (either ordering of `a, b`),
/// run until the bracket stops shrinking.
fn bisect(f: impl Fn(f64) -> f64, negative_end: f64, positive_end: f64) -> f64 {
    let (mut neg, mut pos) = (negative_end, positive_end);
    loop {
        let mid = 0.5 * (neg + pos);
        if mid == neg || mid == pos {
            return mid;
        }
        if f(mid) < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
}

/// `⟨δω⟩ = δω₀ (P₁ − P₂) = δω₀ (1 − 2(Δθ₁)²)`, with `P₂ ≈ (Δθ₁)²`.
pub fn shift_reduction(dtheta_sq: f64, delta_omega0: f64) -> Result<f64> {
    shift_from_flip_probability(dtheta_sq, delta_omega0)
}

/// `δω₀ (1 − 2 P_flip)` for a flipped-branch probability in `[0, 1/2]`.
pub fn shift_from_flip_probability(p_flip: f64, delta_omega0: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p_flip) {
        return Err(Error::Domain {
            name: "flip probability",
            value: p_flip,
            reason: "must lie in [0, 1/2]",
        });
    }
    Ok(delta_omega0 * (1.0 - 2.0 * p_flip))
}

/// Flipped-branch probability `(Δθ)²/4` after an accumulated deviation.
pub fn flipped_branch_probability(dtheta_sq: f64) -> f64 {
    dtheta_sq / 4.0
}

/// Collapse scale when the two trajectories must separate by the thermal
/// tip fluctuation `sqrt(k_B T / k_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSeparation {
    /// metres
    pub separation: f64,
    /// in units of `X0`
    pub separation_dimensionless: f64,
    /// Time at which the separation envelope `2 x_m δω₀ τ` reaches it.
    pub collapse_tau: f64,
    pub collapse_periods: f64,
}

pub fn thermal_separation_case(p: &PhysicalParams, m: &ModelParams) -> ThermalSeparation {
    let separation = sqrt(p.k_b * p.temperature / p.k_c);
    let dimensionless = separation / m.length_unit;
    let collapse_tau = dimensionless / (2.0 * m.x_m * delta_omega0(m));
    ThermalSeparation {
        separation,
        separation_dimensionless: dimensionless,
        collapse_tau,
        collapse_periods: collapse_tau / (2.0 * PI),
    }
}

/// All closed-form estimates for one physical parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub model: ModelParams,
    pub delta_omega0: f64,
    pub a_t: f64,
    pub omega_r: f64,
    pub dtheta1_sq: f64,
    /// `1 / (4 x_m δω₀)`
    pub collapse_rhs: f64,
    /// Smallest root of `τ sin τ = collapse_rhs`.
    pub tau_coll_root: f64,
    /// `⟨δω⟩ / δω₀ = 1 − 2(Δθ₁)²`
    pub mean_shift_reduction: f64,
    pub thermal: ThermalSeparation,
}

impl EstimateReport {
    pub fn compute(p: &PhysicalParams) -> Result<Self> {
        let model = p.to_model()?;
        let d0 = delta_omega0(&model);
        let thermal_amp = thermal_amplitude(p);
        let dtheta1_sq = spin_deviation_sq(p, thermal_amp.a_t);
        let rhs = collapse_rhs(model.x_m, d0);
        Ok(Self {
            model,
            delta_omega0: d0,
            a_t: thermal_amp.a_t,
            omega_r: thermal_amp.omega_r,
            dtheta1_sq,
            collapse_rhs: rhs,
            tau_coll_root: smallest_tau_sin_tau_root(rhs, DEFAULT_ROOT_SCAN)?,
            mean_shift_reduction: shift_reduction(dtheta1_sq, d0)? / d0,
            thermal: thermal_separation_case(p, &model),
        })
    }
}
