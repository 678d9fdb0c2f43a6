//! Operators on the truncated oscillator ⊗ spin-1/2 space.
//!
//! Joint basis index is `2n + s` with `s = 0` for α (`S_z = +1/2`) and
//! `s = 1` for β. Phases are chosen so that `x`, `S_x`, `S_z` and therefore
//! the full Hamiltonian are real; `p` and `S_y` are purely imaginary.

use alloc::vec::Vec;

use crate::linalg::RealMatrix;
use crate::math::{ceil, sqrt};
use crate::{Complex64, Error, Result};

/// Fraction of the highest oscillator levels watched by the truncation guard.
pub const TOP_BAND_FRACTION: f64 = 0.05;
/// Top-band population above which a truncation warning is raised.
pub const TRUNCATION_WARN: f64 = 1e-8;
/// Top-band population above which a run aborts.
pub const TRUNCATION_ABORT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    n_osc: usize,
}

impl BasisSpec {
    /// Oscillator levels used by the reference simulations.
    pub const DEFAULT_LEVELS: usize = 400;

    pub fn new(n_osc: usize) -> Result<Self> {
        if n_osc < 2 {
            return Err(Error::BasisTooSmall(n_osc));
        }
        Ok(Self { n_osc })
    }

    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    pub fn dim(&self) -> usize {
        2 * self.n_osc
    }

    #[inline]
    pub fn index(&self, level: usize, spin: usize) -> usize {
        2 * level + spin
    }

    /// First oscillator level of the band watched by the truncation guard.
    pub fn top_band_start(&self) -> usize {
        let width = ceil(TOP_BAND_FRACTION * self.n_osc as f64) as usize;
        self.n_osc - width.clamp(1, self.n_osc)
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            n_osc: Self::DEFAULT_LEVELS,
        }
    }
}

/// One constant piece of the Hamiltonian
/// `H = (p² + x²)/2 + ε S_x + 2η x S_z + Δ S_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSpec {
    /// ε while the rf field is on, 0 while it is off.
    pub eps_active: f64,
    pub eta: f64,
    /// Instantaneous noise value Δ.
    pub delta: f64,
}

impl HamiltonianSpec {
    pub const fn new(eps_active: f64, eta: f64, delta: f64) -> Self {
        Self {
            eps_active,
            eta,
            delta,
        }
    }

    /// Bit-exact key, used to share eigendecompositions between segments.
    pub fn key(&self) -> [u64; 3] {
        [
            self.eps_active.to_bits(),
            self.eta.to_bits(),
            self.delta.to_bits(),
        ]
    }
}

/// What an operator's rows and columns index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Oscillator(usize),
    Spin,
    Joint(BasisSpec),
}

impl Layout {
    pub fn dim(&self) -> usize {
        match *self {
            Layout::Oscillator(n) => n,
            Layout::Spin => 2,
            Layout::Joint(b) => b.dim(),
        }
    }
}

/// Dense operator with real and (optional) imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    layout: Layout,
    re: RealMatrix,
    im: Option<RealMatrix>,
}

impl OperatorMatrix {
    pub fn real(layout: Layout, re: RealMatrix) -> Self {
        assert_eq!(re.rows(), layout.dim());
        Self { layout, re, im: None }
    }

    pub fn complex(layout: Layout, re: RealMatrix, im: RealMatrix) -> Self {
        assert_eq!(re.rows(), layout.dim());
        assert_eq!(im.rows(), layout.dim());
        Self {
            layout,
            re,
            im: Some(im),
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn real_part(&self) -> &RealMatrix {
        &self.re
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let im = self.im.as_ref().map_or(0.0, |m| m[(i, j)]);
        Complex64::new(self.re[(i, j)], im)
    }

    /// Largest `|A_ij − conj(A_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `⟨v|A|v⟩`
    pub fn expectation(&self, v: &[Complex64]) -> Complex64 {
        let av = self.matvec(v);
        v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.layout, other.layout);
        let n = self.dim();
        let mut re = RealMatrix::zeros(n, n);
        let mut im = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let z: Complex64 = (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum();
                re[(i, j)] = z.re;
                im[(i, j)] = z.im;
            }
        }
        Self::complex(self.layout, re, im)
    }

    /// Entries with magnitude above `tol`, as `(row, col, value)`.
    pub fn nonzeros(&self, tol: f64) -> Vec<(usize, usize, Complex64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                if z.norm() > tol {
                    out.push((i, j, z));
                }
            }
        }
        out
    }
}

/// Position in oscillator units: `⟨n−1|x|n⟩ = sqrt(n/2)`.
pub fn build_x(b: BasisSpec) -> OperatorMatrix {
    let n = b.n_osc();
    let mut re = RealMatrix::zeros(n, n);
    for level in 1..n {
        let v = sqrt(level as f64 / 2.0);
        re[(level - 1, level)] = v;
        re[(level, level - 1)] = v;
    }
    OperatorMatrix::real(Layout::Oscillator(n), re)
}

/// Momentum `p = −i(a − a†)/√2`.
pub fn build_p(b: BasisSpec) -> OperatorMatrix {
    let n = b.n_osc();
    let re = RealMatrix::zeros(n, n);
    let mut im = RealMatrix::zeros(n, n);
    for level in 1..n {
        let v = sqrt(level as f64 / 2.0);
        im[(level - 1, level)] = -v;
        im[(level, level - 1)] = v;
    }
    OperatorMatrix::complex(Layout::Oscillator(n), re, im)
}

/// Unperturbed oscillator energy `(p² + x²)/2`, diagonal `n + 1/2`.
pub fn build_oscillator_energy(b: BasisSpec) -> OperatorMatrix {
    let n = b.n_osc();
    let mut re = RealMatrix::zeros(n, n);
    for level in 0..n {
        re[(level, level)] = level as f64 + 0.5;
    }
    OperatorMatrix::real(Layout::Oscillator(n), re)
}

/// Spin-1/2 matrices `σ/2` in the (α, β) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinOperators {
    pub sx: [[Complex64; 2]; 2],
    pub sy: [[Complex64; 2]; 2],
    pub sz: [[Complex64; 2]; 2],
}

pub fn spin_operators() -> SpinOperators {
    let z = Complex64::new(0.0, 0.0);
    let h = Complex64::new(0.5, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    SpinOperators {
        sx: [[z, h], [h, z]],
        sy: [[z, -ih], [ih, z]],
        sz: [[h, z], [z, -h]],
    }
}

/// `op ⊗ I₂` on the joint space.
pub fn lift_oscillator(op: &OperatorMatrix, b: BasisSpec) -> OperatorMatrix {
    assert_eq!(op.layout(), Layout::Oscillator(b.n_osc()));
    let n = b.n_osc();
    let dim = b.dim();
    let mut re = RealMatrix::zeros(dim, dim);
    let mut im = RealMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            let z = op.get(i, j);
            for s in 0..2 {
                re[(b.index(i, s), b.index(j, s))] = z.re;
                im[(b.index(i, s), b.index(j, s))] = z.im;
            }
        }
    }
    if op.is_real() {
        OperatorMatrix::real(Layout::Joint(b), re)
    } else {
        OperatorMatrix::complex(Layout::Joint(b), re, im)
    }
}

/// `I ⊗ op` on the joint space.
pub fn lift_spin(op: &[[Complex64; 2]; 2], b: BasisSpec) -> OperatorMatrix {
    let dim = b.dim();
    let mut re = RealMatrix::zeros(dim, dim);
    let mut im = RealMatrix::zeros(dim, dim);
    let mut real = true;
    for level in 0..b.n_osc() {
        for s in 0..2 {
            for t in 0..2 {
                let z = op[s][t];
                real &= z.im == 0.0;
                re[(b.index(level, s), b.index(level, t))] = z.re;
                im[(b.index(level, s), b.index(level, t))] = z.im;
            }
        }
    }
    if real {
        OperatorMatrix::real(Layout::Joint(b), re)
    } else {
        OperatorMatrix::complex(Layout::Joint(b), re, im)
    }
}

/// Dense real-symmetric matrix of one Hamiltonian segment.
pub fn build_hamiltonian(h: HamiltonianSpec, b: BasisSpec) -> OperatorMatrix {
    let dim = b.dim();
    let mut m = RealMatrix::zeros(dim, dim);
    for level in 0..b.n_osc() {
        let (a, z) = (b.index(level, 0), b.index(level, 1));
        let e0 = level as f64 + 0.5;
        m[(a, a)] = e0 + 0.5 * h.delta;
        m[(z, z)] = e0 - 0.5 * h.delta;
        m[(a, z)] = 0.5 * h.eps_active;
        m[(z, a)] = 0.5 * h.eps_active;
        if level + 1 < b.n_osc() {
            // 2η ⟨n|x|n+1⟩ ⟨s|S_z|s⟩
            let c = h.eta * sqrt((level + 1) as f64 / 2.0);
            let (a1, z1) = (b.index(level + 1, 0), b.index(level + 1, 1));
            m[(a, a1)] = c;
            m[(a1, a)] = c;
            m[(z, z1)] = -c;
            m[(z1, z)] = -c;
        }
    }
    OperatorMatrix::real(Layout::Joint(b), m)
}

/// `H ψ` for one segment, using the banded structure (O(dim)).
pub fn apply_hamiltonian(h: HamiltonianSpec, b: BasisSpec, psi: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(psi.len(), b.dim());
    let n = b.n_osc();
    let mut out = Vec::with_capacity(b.dim());
    for level in 0..n {
        let e0 = level as f64 + 0.5;
        for s in 0..2 {
            let sign = if s == 0 { 1.0 } else { -1.0 };
            let i = b.index(level, s);
            let mut acc = psi[i] * (e0 + 0.5 * sign * h.delta);
            acc += psi[b.index(level, 1 - s)] * (0.5 * h.eps_active);
            if level > 0 {
                acc += psi[b.index(level - 1, s)] * (sign * h.eta * sqrt(level as f64 / 2.0));
            }
            if level + 1 < n {
                acc += psi[b.index(level + 1, s)] * (sign * h.eta * sqrt((level + 1) as f64 / 2.0));
            }
            out.push(acc);
        }
    }
    out
}

/// `⟨ψ|H|ψ⟩` for one segment.
pub fn energy(h: HamiltonianSpec, b: BasisSpec, psi: &[Complex64]) -> f64 {
    let hpsi = apply_hamiltonian(h, b, psi);
    psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Population in the top [`TOP_BAND_FRACTION`] of oscillator levels.
pub fn top_band_population(b: BasisSpec, psi: &[Complex64]) -> f64 {
    psi[2 * b.top_band_start()..].iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_invariants() {
        assert_eq!(BasisSpec::new(1), Err(Error::BasisTooSmall(1)));
        let b = BasisSpec::new(400).unwrap();
        assert_eq!(b.dim(), 800);
        assert_eq!(b.top_band_start(), 380);
        assert_eq!(BasisSpec::new(2).unwrap().top_band_start(), 1);
    }

    #[test]
    fn two_level_position() {
        let x = build_x(BasisSpec::new(2).unwrap());
        assert_eq!(x.get(0, 0), c(0.0, 0.0));
        assert_relative_eq!(x.get(0, 1).re, FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_relative_eq!(x.get(1, 0).re, FRAC_1_SQRT_2, max_relative = 1e-15);
    }

    #[test]
    fn ground_state_variance() {
        let b = BasisSpec::new(6).unwrap();
        let x = build_x(b);
        let x2 = x.matmul(&x);
        assert_relative_eq!(x2.get(0, 0).re, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn largest_position_element() {
        let x = build_x(BasisSpec::new(400).unwrap());
        let largest = x.real_part().as_slice().iter().fold(0.0f64, |m, &v| m.max(v));
        assert_eq!(largest, (399.0f64 / 2.0).sqrt());
    }

    #[test]
    fn operators_are_hermitian() {
        let b = BasisSpec::new(12).unwrap();
        let s = spin_operators();
        let ops = [
            build_x(b),
            build_p(b),
            build_oscillator_energy(b),
            lift_spin(&s.sx, b),
            lift_spin(&s.sy, b),
            lift_spin(&s.sz, b),
            build_hamiltonian(HamiltonianSpec::new(10.0, 0.3, -0.2), b),
        ];
        for op in &ops {
            assert!(op.hermiticity_error() <= 1e-12);
        }
        assert!(ops[6].is_real());
    }

    #[test]
    fn canonical_commutator_on_interior() {
        let b = BasisSpec::new(10).unwrap();
        let (x, p) = (build_x(b), build_p(b));
        let xp = x.matmul(&p);
        let px = p.matmul(&x);
        for i in 0..9 {
            for j in 0..9 {
                let comm = xp.get(i, j) - px.get(i, j);
                let expected = if i == j { c(0.0, 1.0) } else { c(0.0, 0.0) };
                assert!((comm - expected).norm() < 1e-13, "({i},{j}) = {comm}");
            }
        }
        // The top level is where truncation shows up.
        let top = xp.get(9, 9) - px.get(9, 9);
        assert!((top - c(0.0, 1.0)).norm() > 1.0);
    }

    #[test]
    fn spin_algebra() {
        let s = spin_operators();
        let mul = |a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]| {
            let mut out = [[c(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            out
        };
        // S_z α = +α/2
        assert_eq!(s.sz[0][0], c(0.5, 0.0));
        assert_eq!(s.sz[1][0], c(0.0, 0.0));
        let (xy, yx) = (mul(&s.sx, &s.sy), mul(&s.sy, &s.sx));
        let (xx, yy, zz) = (mul(&s.sx, &s.sx), mul(&s.sy, &s.sy), mul(&s.sz, &s.sz));
        for i in 0..2 {
            for j in 0..2 {
                assert!((xy[i][j] - yx[i][j] - c(0.0, 1.0) * s.sz[i][j]).norm() < 1e-15);
                let casimir = xx[i][j] + yy[i][j] + zz[i][j];
                let expected = if i == j { 0.75 } else { 0.0 };
                assert!((casimir - c(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn unperturbed_hamiltonian_is_diagonal() {
        let b = BasisSpec::new(5).unwrap();
        let h = build_hamiltonian(HamiltonianSpec::new(0.0, 0.0, 0.0), b);
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let expected = if i == j { (i / 2) as f64 + 0.5 } else { 0.0 };
                assert_eq!(h.get(i, j).re, expected);
            }
        }
    }

    #[test]
    fn hamiltonian_is_linear_in_its_parameters() {
        let b = BasisSpec::new(7).unwrap();
        let (eps, eta, delta) = (3.5, 0.45, -0.7);
        let direct = build_hamiltonian(HamiltonianSpec::new(eps, eta, delta), b);
        // Independent pieces, each from tensor lifts.
        let s = spin_operators();
        let base = lift_oscillator(&build_oscillator_energy(b), b);
        let h_eps = lift_spin(&s.sx, b);
        let h_delta = lift_spin(&s.sz, b);
        let x = lift_oscillator(&build_x(b), b);
        let h_eta = x.matmul(&h_delta);
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let sum = base.get(i, j)
                    + h_eps.get(i, j) * eps
                    + h_eta.get(i, j) * (2.0 * eta)
                    + h_delta.get(i, j) * delta;
                assert!((sum - direct.get(i, j)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn structured_apply_matches_dense() {
        let b = BasisSpec::new(9).unwrap();
        let spec = HamiltonianSpec::new(2.0, 0.3, 0.1);
        let dense = build_hamiltonian(spec, b);
        let psi: Vec<Complex64> = (0..b.dim())
            .map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let fast = apply_hamiltonian(spec, b, &psi);
        let slow = dense.matvec(&psi);
        for (a, z) in fast.iter().zip(&slow) {
            assert!((a - z).norm() < 1e-13);
        }
        assert_relative_eq!(energy(spec, b, &psi), dense.expectation(&psi).re, max_relative = 1e-13);
    }

    #[test]
    fn top_band_population_counts_top_levels() {
        let b = BasisSpec::new(20).unwrap();
        let mut psi = vec![c(0.0, 0.0); b.dim()];
        psi[b.index(19, 1)] = c(0.6, 0.0);
        psi[b.index(0, 0)] = c(0.8, 0.0);
        assert_relative_eq!(top_band_population(b, &psi), 0.36, max_relative = 1e-15);
    }
}
