//! Initial states, expectation values and spin/tip entanglement diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::hilbert::{top_band_population, BasisSpec};
use crate::math::{atan2, cos, exp, hypot, ln, sin, sqrt};
use crate::{Complex64, Error, Result};

/// Joint amplitude vector `Ψ = u_α α + u_β β` in the number basis.
///
/// `u_α` and `u_β` are the even and odd strides of `amplitudes`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub amplitudes: Vec<Complex64>,
    pub basis: BasisSpec,
    pub tau: f64,
}

impl JointState {
    pub fn new(amplitudes: Vec<Complex64>, basis: BasisSpec, tau: f64) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            basis,
            tau,
        })
    }

    /// `oscillator ⊗ spinor`
    pub fn product(oscillator: &[Complex64], spinor: Spinor, basis: BasisSpec) -> Result<Self> {
        if oscillator.len() != basis.n_osc() {
            return Err(Error::BasisMismatch {
                expected: basis.n_osc(),
                found: oscillator.len(),
            });
        }
        let mut amplitudes = Vec::with_capacity(basis.dim());
        for &c in oscillator {
            amplitudes.push(c * spinor[0]);
            amplitudes.push(c * spinor[1]);
        }
        Self::new(amplitudes, basis, 0.0)
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.amplitudes.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        for z in &mut self.amplitudes {
            *z /= n;
        }
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude is
    /// real and positive.
    pub fn canonicalize_phase(&mut self) {
        let Some(peak) = self
            .amplitudes
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        else {
            return;
        };
        if peak.norm() == 0.0 {
            return;
        }
        let phase = peak.conj() / peak.norm();
        for z in &mut self.amplitudes {
            *z *= phase;
        }
    }

    /// `(u_α(n), u_β(n))`
    pub fn components(&self, level: usize) -> (Complex64, Complex64) {
        (self.amplitudes[2 * level], self.amplitudes[2 * level + 1])
    }

    pub fn top_band_population(&self) -> f64 {
        top_band_population(self.basis, &self.amplitudes)
    }

    /// `|⟨other|self⟩|`
    pub fn overlap(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| b.conj() * a)
            .sum::<Complex64>()
            .norm()
    }
}

/// Two-component spin state in the (α, β) basis.
pub type Spinor = [Complex64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpinVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpinVector {
    pub fn magnitude(&self) -> f64 {
        sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn dot(&self, field: EffectiveField) -> f64 {
        self.x * field.bx + self.z * field.bz
    }
}

/// Rotating-frame effective field `(ε, 0, 2η x)` seen by the spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveField {
    pub bx: f64,
    pub bz: f64,
}

impl EffectiveField {
    pub fn new(bx: f64, bz: f64) -> Self {
        Self { bx, bz }
    }

    /// Field at tip position `x`.
    pub fn at(eps: f64, eta: f64, x: f64) -> Self {
        Self::new(eps, 2.0 * eta * x)
    }

    pub fn magnitude(&self) -> f64 {
        hypot(self.bx, self.bz)
    }

    /// Unit vector along the field.
    pub fn unit(&self) -> Result<Self> {
        let m = self.magnitude();
        if m == 0.0 || !m.is_finite() {
            return Err(Error::ZeroField);
        }
        Ok(Self::new(self.bx / m, self.bz / m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Aligned,
    AntiAligned,
}

impl Sense {
    pub fn opposite(self) -> Self {
        match self {
            Sense::Aligned => Sense::AntiAligned,
            Sense::AntiAligned => Sense::Aligned,
        }
    }
}

/// Amplitudes of the coherent state `|α₀⟩`, `α₀ = (x₀ + i p₀)/√2`.
///
/// Built in log-magnitude form, `ln|c_n| = −|α₀|²/2 + n ln|α₀| − ln(n!)/2`,
/// then renormalized over the truncated basis.
pub fn coherent_state(x0: f64, p0: f64, b: BasisSpec) -> Result<Vec<Complex64>> {
    let alpha = Complex64::new(x0, p0) / core::f64::consts::SQRT_2;
    let mean_occupation = alpha.norm_sqr();
    if !mean_occupation.is_finite()
        || mean_occupation + 8.0 * sqrt(mean_occupation) >= b.n_osc() as f64
    {
        return Err(Error::CoherentTruncation {
            mean_occupation,
            n_osc: b.n_osc(),
        });
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); b.n_osc()];
    if mean_occupation == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return Ok(amps);
    }
    let ln_abs = ln(alpha.norm());
    let arg = atan2(alpha.im, alpha.re);
    let mut ln_factorial = 0.0;
    for (n, c) in amps.iter_mut().enumerate() {
        if n > 0 {
            ln_factorial += ln(n as f64);
        }
        let magnitude = exp(-0.5 * mean_occupation + n as f64 * ln_abs - 0.5 * ln_factorial);
        let phase = n as f64 * arg;
        *c = Complex64::new(magnitude * cos(phase), magnitude * sin(phase));
    }
    let norm = sqrt(amps.iter().map(|z| z.norm_sqr()).sum::<f64>());
    for c in &mut amps {
        *c /= norm;
    }
    Ok(amps)
}

/// Real spinor whose spin points along (or against) a field in the x–z plane.
pub fn spin_state_along(field: EffectiveField, sense: Sense) -> Result<Spinor> {
    field.unit()?;
    let theta = atan2(field.bx, field.bz);
    let (c, s) = (cos(0.5 * theta), sin(0.5 * theta));
    Ok(match sense {
        Sense::Aligned => [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        Sense::AntiAligned => [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub x: f64,
    pub p: f64,
    /// Unperturbed oscillator energy `⟨(p² + x²)/2⟩`.
    pub oscillator_energy: f64,
    pub spin: SpinVector,
}

/// `⟨x⟩`, `⟨p⟩`, `⟨H₀⟩` and `⟨S⟩`, evaluated on the banded structure of each
/// operator.
pub fn expectations(s: &JointState) -> Expectations {
    let b = s.basis;
    let a = &s.amplitudes;
    // ⟨ψ|a|ψ⟩ = Σ_n sqrt(n+1) conj(c_n) c_{n+1}, per spin component.
    let mut lower = Complex64::new(0.0, 0.0);
    let mut h0 = 0.0;
    for level in 0..b.n_osc() {
        for spin in 0..2 {
            let i = b.index(level, spin);
            h0 += (level as f64 + 0.5) * a[i].norm_sqr();
            if level + 1 < b.n_osc() {
                lower += a[i].conj() * a[b.index(level + 1, spin)] * sqrt((level + 1) as f64);
            }
        }
    }
    // x = (a + a†)/√2, p = −i(a − a†)/√2
    let x = core::f64::consts::SQRT_2 * lower.re;
    let p = core::f64::consts::SQRT_2 * lower.im;
    Expectations {
        x,
        p,
        oscillator_energy: h0,
        spin: spin_vector(&reduced_spin_density(s)),
    }
}

/// Reduced spin density matrix `ρ_st = Σ_n u_s(n) conj(u_t(n))`.
pub fn reduced_spin_density(s: &JointState) -> [[Complex64; 2]; 2] {
    let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
    for pair in s.amplitudes.chunks_exact(2) {
        for i in 0..2 {
            for j in 0..2 {
                rho[i][j] += pair[i] * pair[j].conj();
            }
        }
    }
    rho
}

fn spin_vector(rho: &[[Complex64; 2]; 2]) -> SpinVector {
    // Tr(ρ σ/2)
    SpinVector {
        x: rho[1][0].re,
        y: rho[1][0].im,
        z: 0.5 * (rho[0][0].re - rho[1][1].re),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPurity {
    /// `|⟨S⟩|`, equal to 1/2 exactly for product states.
    pub magnitude: f64,
    /// `1 − Tr ρ_s²`
    pub linear_entropy: f64,
}

pub fn spin_purity(s: &JointState) -> SpinPurity {
    let rho = reduced_spin_density(s);
    let purity: f64 = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (rho[i][j] * rho[j][i]).re)
        .sum();
    SpinPurity {
        magnitude: spin_vector(&rho).magnitude(),
        linear_entropy: 1.0 - purity,
    }
}

/// Residual `‖a|ψ⟩ − α|ψ⟩‖` for an oscillator vector.
pub fn annihilation_residual(oscillator: &[Complex64], alpha: Complex64) -> f64 {
    let n = oscillator.len();
    let mut acc = 0.0;
    for level in 0..n {
        let lowered = if level + 1 < n {
            oscillator[level + 1] * sqrt((level + 1) as f64)
        } else {
            Complex64::new(0.0, 0.0)
        };
        acc += (lowered - alpha * oscillator[level]).norm_sqr();
    }
    sqrt(acc)
}
