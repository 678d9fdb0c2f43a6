//! Experimental parameters and their dimensionless images.
//!
//! Lengths are measured in units of the cantilever zero-point scale
//! `X0 = sqrt(ħ ω_c / k_c)`, momenta in `P0 = ħ / X0` and time in `τ = ω_c t`.

use core::f64::consts::PI;

use crate::math::sqrt;
use crate::{Error, Result};

/// Magnitude of the electron gyromagnetic ratio (rad s⁻¹ T⁻¹), CODATA 2018.
pub const ELECTRON_GYROMAGNETIC_RATIO: f64 = 1.760_859_630_23e11;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Laboratory-unit description of a single-spin OSCAR experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Cantilever frequency `ω_c / 2π` in Hz.
    pub f_c: f64,
    /// Effective spring constant (N/m).
    pub k_c: f64,
    /// Rotating rf field amplitude (T).
    pub b1: f64,
    /// Field gradient `∂B_z/∂x` at the spin (T/m).
    pub gradient: f64,
    /// Cantilever-tip vibration amplitude (m).
    pub amplitude: f64,
    /// Temperature (K).
    pub temperature: f64,
    pub gamma: f64,
    pub hbar: f64,
    pub k_b: f64,
}

impl PhysicalParams {
    /// The single-spin experiment set: 6.6 kHz, 600 µN/m, 300 µT, 4.3×10⁵ T/m,
    /// 10 nm amplitude at 200 mK.
    pub const fn experiment() -> Self {
        Self {
            f_c: 6.6e3,
            k_c: 600e-6,
            b1: 300e-6,
            gradient: 4.3e5,
            amplitude: 10e-9,
            temperature: 0.2,
            gamma: ELECTRON_GYROMAGNETIC_RATIO,
            hbar: HBAR,
            k_b: BOLTZMANN,
        }
    }

    pub fn omega_c(&self) -> f64 {
        2.0 * PI * self.f_c
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f_c", self.f_c),
            ("k_c", self.k_c),
            ("b1", self.b1),
            ("gradient", self.gradient),
            ("amplitude", self.amplitude),
            ("temperature", self.temperature),
            ("gamma", self.gamma),
            ("hbar", self.hbar),
            ("k_b", self.k_b),
        ];
        for (name, value) in fields {
            positive(name, value)?;
        }
        Ok(())
    }

    /// Converts to the dimensionless model parameters.
    pub fn to_model(&self) -> Result<ModelParams> {
        self.validate()?;
        let omega_c = self.omega_c();
        let x0 = sqrt(self.hbar * omega_c / self.k_c);
        let p0 = self.hbar / x0;
        let eps = self.gamma * self.b1 / omega_c;
        let eta = 0.5 * (self.gamma * x0 / omega_c) * self.gradient;
        let x_m = self.amplitude / x0;
        Ok(ModelParams {
            eps,
            eta,
            x_m,
            length_unit: x0,
            momentum_unit: p0,
            spin: 0.5,
            tau_r: 2.0 * PI / eps,
        })
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::experiment()
    }
}

/// Dimensionless parameters of the spin/cantilever Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Rabi coupling ε = γB₁/ω_c.
    pub eps: f64,
    /// Spin/tip coupling η = (γ X0 / 2ω_c) G.
    pub eta: f64,
    /// Tip amplitude in units of `X0`.
    pub x_m: f64,
    /// `X0` in metres (NaN when built directly from dimensionless values).
    pub length_unit: f64,
    /// `P0` in N s (NaN when built directly from dimensionless values).
    pub momentum_unit: f64,
    /// Spin magnitude; the propagator is spin-1/2 only.
    pub spin: f64,
    /// Rabi period 2π/ε.
    pub tau_r: f64,
}

impl ModelParams {
    /// Dimensionless parameters without a physical unit system attached.
    pub fn dimensionless(eps: f64, eta: f64, x_m: f64) -> Result<Self> {
        positive("eps", eps)?;
        positive("eta", eta)?;
        positive("x_m", x_m)?;
        Ok(Self {
            eps,
            eta,
            x_m,
            length_unit: f64::NAN,
            momentum_unit: f64::NAN,
            spin: 0.5,
            tau_r: 2.0 * PI / eps,
        })
    }

    /// Same parameters with a different spin magnitude, for the closed-form
    /// estimates only.
    pub fn with_spin(mut self, spin: f64) -> Result<Self> {
        positive("spin", spin)?;
        self.spin = spin;
        Ok(self)
    }

    pub fn adiabatic_report(&self) -> AdiabaticReport {
        validate_adiabatic(self)
    }
}

/// Annotations on the parameter regime. Never an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticReport {
    pub eps: f64,
    /// Peak coupling field η·x_m.
    pub coupling_amplitude: f64,
    pub tau_r: f64,
    /// 2η x_m / ε: how far the effective field swings away from the rf axis.
    pub sweep_ratio: f64,
}

pub fn validate_adiabatic(m: &ModelParams) -> AdiabaticReport {
    AdiabaticReport {
        eps: m.eps,
        coupling_amplitude: m.eta * m.x_m,
        tau_r: m.tau_r,
        sweep_ratio: 2.0 * m.eta * m.x_m / m.eps,
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn experiment_reproduces_printed_units() {
        let m = PhysicalParams::experiment().to_model().unwrap();
        assert_relative_eq!(m.length_unit, 85e-15, max_relative = 0.02);
        assert_relative_eq!(m.eta, 0.078, max_relative = 0.02);
        // P0 and x_m are printed to two significant figures.
        assert_relative_eq!(crate::math::round_sig(m.momentum_unit, 2), 1.2e-21, max_relative = 1e-12);
        assert_relative_eq!(crate::math::round_sig(m.x_m, 2), 1.2e5, max_relative = 1e-12);
    }

    #[test]
    fn experiment_rabi_coupling() {
        let m = PhysicalParams::experiment().to_model().unwrap();
        assert_relative_eq!(m.eps, 1.27e3, max_relative = 0.01);
        assert_eq!(m.tau_r, 2.0 * PI / m.eps);
        assert_eq!(m.spin, 0.5);
    }

    #[test]
    fn stiffer_cantilever_scaling() {
        let p = PhysicalParams::experiment();
        let stiff = PhysicalParams { k_c: 4.0 * p.k_c, ..p };
        let (a, b) = (p.to_model().unwrap(), stiff.to_model().unwrap());
        assert_relative_eq!(b.length_unit, a.length_unit / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b.momentum_unit, a.momentum_unit * 2.0, max_relative = 1e-14);
        assert_relative_eq!(b.eta, a.eta / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b.x_m, a.x_m * 2.0, max_relative = 1e-14);
    }

    #[test]
    fn unit_identities() {
        let p = PhysicalParams::experiment();
        let m = p.to_model().unwrap();
        assert_relative_eq!(m.momentum_unit * m.length_unit, p.hbar, max_relative = 1e-15);
        assert_relative_eq!(m.x_m * m.length_unit, p.amplitude, max_relative = 1e-15);
    }

    #[test]
    fn rejects_non_positive() {
        let p = PhysicalParams { gradient: 0.0, ..PhysicalParams::experiment() };
        assert_eq!(
            p.to_model(),
            Err(Error::NonPositive { name: "gradient", value: 0.0 })
        );
        let p = PhysicalParams { temperature: -1.0, ..PhysicalParams::experiment() };
        assert!(matches!(p.to_model(), Err(Error::NonPositive { name: "temperature", .. })));
        assert!(ModelParams::dimensionless(10.0, f64::NAN, 13.0).is_err());
    }

    #[test]
    fn adiabatic_ratios() {
        let m = ModelParams::dimensionless(10.0, 0.3, 13.0).unwrap();
        assert_relative_eq!(validate_adiabatic(&m).sweep_ratio, 0.78, max_relative = 1e-12);

        // η = 0 is not a valid model, but the report is pure arithmetic.
        let zero = ModelParams { eta: 0.0, ..m };
        assert_eq!(validate_adiabatic(&zero).sweep_ratio, 0.0);

        // The printed 14.7 follows from the rounded η, x_m, ε.
        let rounded = ModelParams::dimensionless(1273.0, 0.078, 1.2e5).unwrap();
        assert_relative_eq!(validate_adiabatic(&rounded).sweep_ratio, 14.7, max_relative = 2e-3);
        let exact = PhysicalParams::experiment().to_model().unwrap();
        let r = validate_adiabatic(&exact);
        assert_eq!(r.sweep_ratio, 2.0 * exact.eta * exact.x_m / exact.eps);
        assert_relative_eq!(r.sweep_ratio, 14.33, max_relative = 1e-3);
    }
}
