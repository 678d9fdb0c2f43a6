//! Zero crossings of `⟨x(τ)⟩` and the half-period / frequency-shift series
//! derived from them.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use crate::math::{abs, atan2, sqrt};
use crate::params::ModelParams;
use crate::quasiclassical::delta_omega0;
use crate::{Error, Result};

/// Times where `⟨x⟩` returns to the origin and the quantities built from
/// consecutive pairs of them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingSeries {
    pub crossings: Vec<f64>,
    /// `Δτ_j = τ_j − τ_{j−1}`
    pub half_periods: Vec<f64>,
    /// `δτ_j = |Δτ_j − π|`
    pub deviations: Vec<f64>,
    /// `ω_j = π / Δτ_j`
    pub omegas: Vec<f64>,
}

impl CrossingSeries {
    pub fn from_crossings(crossings: Vec<f64>) -> Self {
        let half_periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        let deviations = half_periods.iter().map(|&d| abs(d - PI)).collect();
        let omegas = half_periods.iter().map(|&d| PI / d).collect();
        Self {
            crossings,
            half_periods,
            deviations,
            omegas,
        }
    }

    pub fn len(&self) -> usize {
        self.half_periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.half_periods.is_empty()
    }

    /// `Δτ_j − π`, negative when the tip runs fast.
    pub fn signed_deviations(&self) -> impl Iterator<Item = f64> + '_ {
        self.half_periods.iter().map(|&d| d - PI)
    }

    /// Half-period numbers `j = 1, 2, …` as abscissae for fitting.
    pub fn indices(&self) -> Vec<f64> {
        (1..=self.len()).map(|j| j as f64).collect()
    }
}

/// Locates the zero crossings of a uniformly sampled series.
///
/// Each sign change is refined on the cubic through the four samples nearest
/// the bracket. Crossings closer together than one sample step (a grazing
/// touch of the axis) are merged into their midpoint.
pub fn find_crossings(times: &[f64], values: &[f64]) -> Result<CrossingSeries> {
    find_crossings_split(times, values, &[])
}

/// Like [`find_crossings`] for a series that jumps at each of `breaks`.
///
/// Samples at or after a break belong to the next piece; interpolation never
/// reaches across a break. A sign change across one is placed at the break.
pub fn find_crossings_split(times: &[f64], values: &[f64], breaks: &[f64]) -> Result<CrossingSeries> {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let n = times.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, found: n });
    }
    if let Some(i) = (1..n).find(|&i| !(times[i] > times[i - 1])) {
        return Err(Error::NonMonotoneTime { index: i });
    }
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    let splits_after = |i: usize| breaks.iter().find(|&&b| times[i] < b && b <= times[i + 1]).copied();

    let mut crossings: Vec<f64> = Vec::new();
    let mut push = |t: f64| match crossings.last_mut() {
        Some(last) if t - *last < step => *last = 0.5 * (*last + t),
        _ => crossings.push(t),
    };
    let mut piece_start = 0;
    for i in 0..n - 1 {
        let (a, b) = (values[i], values[i + 1]);
        let split = splits_after(i);
        if a == 0.0 {
            if i == piece_start {
                push(times[i]);
            }
        } else if b == 0.0 && split.is_none() {
            push(times[i + 1]);
        } else if (a < 0.0) != (b < 0.0) && b != 0.0 {
            match split {
                Some(at) => push(at),
                None => {
                    let piece_end = (i + 1..n - 1).find(|&k| splits_after(k).is_some()).map_or(n, |k| k + 1);
                    push(refine(&times[piece_start..piece_end], &values[piece_start..piece_end], i - piece_start));
                }
            }
        }
        if split.is_some() {
            piece_start = i + 1;
        }
    }
    if crossings.is_empty() {
        return Err(Error::NoCrossings);
    }
    Ok(CrossingSeries::from_crossings(crossings))
}

/// Root in `(t_i, t_{i+1})` of the Lagrange polynomial through the (up to)
/// four nearest samples.
fn refine(times: &[f64], values: &[f64], i: usize) -> f64 {
    let n = times.len();
    let order = n.min(4);
    let first = i.saturating_sub(1).min(n - order);
    let ts = &times[first..first + order];
    let vs = &values[first..first + order];
    let poly = |t: f64| {
        let mut acc = 0.0;
        for k in 0..order {
            let mut basis = 1.0;
            for m in 0..order {
                if m != k {
                    basis *= (t - ts[m]) / (ts[k] - ts[m]);
                }
            }
            acc += vs[k] * basis;
        }
        acc
    };
    let (mut lo, mut hi) = (times[i], times[i + 1]);
    let lo_negative = values[i] < 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let v = poly(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Signed per-half-period frequency shifts `δω_j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShiftSeries {
    /// Positive when `Δτ_j < π` (the tip runs fast).
    pub signed: Vec<f64>,
}

impl ShiftSeries {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.signed.iter().map(|v| abs(*v)).collect()
    }

    pub fn len(&self) -> usize {
        self.signed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signed.is_empty()
    }
}

/// `δω_j = δτ_j / π`, the first-order inversion of `Δτ_j = π/(1 ± δω)`.
pub fn effective_shift_series(c: &CrossingSeries) -> ShiftSeries {
    ShiftSeries {
        signed: c.signed_deviations().map(|d| -d / PI).collect(),
    }
}

/// Default bound on `|Δφ − Δτ| / Δτ` for one sample step before the step
/// counts as a jump.
pub const PHASE_JUMP_TOLERANCE: f64 = 0.1;

/// Phase advance of the orbit `(⟨x⟩, ⟨p⟩)` over the free oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseGain {
    /// `Σ (Δφ_k − Δτ_k)` over the accepted steps.
    pub gain: f64,
    /// Elapsed time, jumps included.
    pub time: f64,
    /// Steps left out because the phase moved discontinuously.
    pub jumps: usize,
}

impl PhaseGain {
    pub fn shift(&self) -> f64 {
        self.gain / self.time
    }
}

/// Phase gained on `[start, end]`, with the phase taken as
/// `atan2(−⟨p⟩, ⟨x⟩)`.
///
/// A step whose advance differs from the elapsed time by more than
/// `tolerance` times that time is a jump of the state, not a frequency, and
/// contributes only its duration.
pub fn phase_gain(
    times: &[f64],
    xs: &[f64],
    ps: &[f64],
    start: f64,
    end: f64,
    tolerance: f64,
) -> Result<PhaseGain> {
    assert!(times.len() == xs.len() && xs.len() == ps.len(), "series differ in length");
    let first = times.partition_point(|&t| t < start);
    let last = times.partition_point(|&t| t <= end);
    if last < first + 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: last.saturating_sub(first),
        });
    }
    let mut out = PhaseGain::default();
    for k in first..last - 1 {
        let dt = times[k + 1] - times[k];
        if !(dt > 0.0) {
            return Err(Error::NonMonotoneTime { index: k + 1 });
        }
        let before = atan2(-ps[k], xs[k]);
        let after = atan2(-ps[k + 1], xs[k + 1]);
        let mut dphi = after - before;
        while dphi <= -PI {
            dphi += 2.0 * PI;
        }
        while dphi > PI {
            dphi -= 2.0 * PI;
        }
        out.time += dt;
        if abs(dphi - dt) > tolerance * dt {
            out.jumps += 1;
        } else {
            out.gain += dphi - dt;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    assert_eq!(xs.len(), ys.len(), "abscissae and ordinates differ in length");
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(FitResult {
        slope,
        intercept,
        residual_rms: sqrt(ss / n as f64),
    })
}

/// Fit of `δτ_j` against `j` over the half-periods in `window`.
pub fn fit_deviations(c: &CrossingSeries, window: Range<usize>) -> Result<FitResult> {
    check_window(&window, c.len())?;
    let xs = c.indices();
    linear_fit(&xs[window.clone()], &c.deviations[window])
}

/// Arithmetic mean of `values[window]`.
pub fn mean_shift(values: &[f64], window: Range<usize>) -> Result<f64> {
    check_window(&window, values.len())?;
    let slice = &values[window];
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}

fn check_window(window: &Range<usize>, len: usize) -> Result<()> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if window.end > len {
        return Err(Error::Domain {
            name: "window.end",
            value: window.end as f64,
            reason: "averaging window runs past the end of the series",
        });
    }
    Ok(())
}

/// Effective spin reduction `δS = (⟨δω⟩ − δω₀) sqrt(2η²x_m² + ε²) / (2η²)`.
pub fn effective_spin_decrease(mean_shift: f64, m: &ModelParams) -> f64 {
    let root = sqrt(2.0 * m.eta * m.eta * m.x_m * m.x_m + m.eps * m.eps);
    (mean_shift - delta_omega0(m)) * root / (2.0 * m.eta * m.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (t_end / dt).floor() as usize + 1;
        let ts: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let vs = ts.iter().map(|&t| f(t)).collect();
        (ts, vs)
    }

    #[test]
    fn cosine_crossings() {
        let (t, v) = sampled(f64::cos, 4.0 * PI, PI / 200.0);
        let c = find_crossings(&t, &v).unwrap();
        assert_eq!(c.crossings.len(), 4);
        for (k, &x) in c.crossings.iter().enumerate() {
            assert!((x - (PI / 2.0 + k as f64 * PI)).abs() < 1e-6);
        }
        for &d in &c.half_periods {
            assert!((d - PI).abs() < 1e-6);
        }
        assert_eq!(c.omegas.len(), 3);
    }

    #[test]
    fn detuned_cosine_spacing() {
        let delta = 7.9e-3;
        let (t, v) = sampled(|t| (t * (1.0 + delta)).cos(), 12.0 * PI, PI / 200.0);
        let c = find_crossings(&t, &v).unwrap();
        let expected = PI * delta / (1.0 + delta);
        for &d in &c.deviations {
            assert!((d - expected).abs() < 1e-8);
        }
        assert_relative_eq!(expected, 0.0246, max_relative = 2e-3);
    }

    #[test]
    fn crossing_errors() {
        assert_eq!(
            find_crossings(&[0.0, 1.0, 2.0], &[1.0, -1.0, 1.0]),
            Err(Error::TooFewSamples { needed: 4, found: 3 })
        );
        assert_eq!(
            find_crossings(&[0.0, 1.0, 1.0, 2.0], &[1.0, -1.0, 1.0, 1.0]),
            Err(Error::NonMonotoneTime { index: 2 })
        );
        assert_eq!(find_crossings(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4]), Err(Error::NoCrossings));
    }

    #[test]
    fn grazing_touch_is_merged() {
        // Dips just below zero for less than a sample step.
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let v = vec![3.0, 2.0, 1.0, 0.4, -1e-3, 0.3, 1.0, 2.0, 3.0, 4.0];
        let c = find_crossings(&t, &v).unwrap();
        assert_eq!(c.crossings.len(), 1);
        assert!(c.crossings[0] > 3.0 && c.crossings[0] < 5.0);
    }

    #[test]
    fn breaks_keep_interpolation_local() {
        // cos τ jumping to 0.3 − cos τ at τ = 2: the jump itself changes sign.
        let f = |t: f64| if t < 2.0 { t.cos() } else { 0.3 - t.cos() };
        let (t, v) = sampled(f, 7.0, PI / 200.0);
        let c = find_crossings_split(&t, &v, &[2.0]).unwrap();
        assert_eq!(c.crossings.len(), 3);
        assert!((c.crossings[0] - PI / 2.0).abs() < 1e-8);
        assert_eq!(c.crossings[1], 2.0);
        assert!((c.crossings[2] - (2.0 * PI - 0.3f64.acos())).abs() < 1e-8);

        let (t, v) = sampled(f64::cos, 7.0, PI / 200.0);
        assert_eq!(find_crossings_split(&t, &v, &[2.0]).unwrap(), find_crossings(&t, &v).unwrap());
    }

    #[test]
    fn crossing_next_to_a_break() {
        // Root 0.004 before a jump that shifts the curve upwards.
        let root = 3.0;
        let f = |t: f64| if t < root + 0.004 { (t - root).sin() } else { (t - root).sin() + 0.5 };
        let (t, v) = sampled(f, 6.0, PI / 200.0);
        let split = find_crossings_split(&t, &v, &[root + 0.004]).unwrap();
        assert!((split.crossings[0] - root).abs() < 1e-6);
    }

    #[test]
    fn phase_gain_of_a_detuned_orbit() {
        let d = 7.5e-3;
        let (t, x) = sampled(|t| 13.0 * (t * (1.0 + d)).cos(), 20.0 * PI, PI / 200.0);
        let p: Vec<f64> = t.iter().map(|&t| -13.0 * (1.0 + d) * (t * (1.0 + d)).sin()).collect();
        // Whole half-turns of the orbit: the ellipse wobble cancels.
        let end = 19.0 * PI / (1.0 + d);
        let g = phase_gain(&t, &x, &p, 0.0, end, PHASE_JUMP_TOLERANCE).unwrap();
        assert_eq!(g.jumps, 0);
        let last = t[t.partition_point(|&s| s <= end) - 1];
        assert!((g.gain - d * last).abs() < 2e-4, "{}", g.gain);
        assert!((g.time - last).abs() < 1e-12);
    }

    #[test]
    fn phase_jumps_are_left_out() {
        let d = 5e-3;
        let step = 0.05;
        let phase = |t: f64| t * (1.0 + d) + if t >= 10.0 { step } else { 0.0 };
        let (t, x) = sampled(|t| phase(t).cos(), 20.0, PI / 200.0);
        let p: Vec<f64> = t.iter().map(|&t| -phase(t).sin()).collect();
        let g = phase_gain(&t, &x, &p, 0.0, 20.0, PHASE_JUMP_TOLERANCE).unwrap();
        assert_eq!(g.jumps, 1);
        // One step of ordinary advance goes with the jump.
        assert!((g.shift() - d).abs() < 2e-5, "{}", g.shift());
        assert!(matches!(
            phase_gain(&t, &x, &p, 30.0, 40.0, PHASE_JUMP_TOLERANCE),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn shift_series_values() {
        let c = CrossingSeries::from_crossings(vec![0.0, PI - 0.025, 2.0 * PI - 0.025, 3.0 * PI]);
        let s = effective_shift_series(&c);
        assert_relative_eq!(s.signed[0], 0.025 / PI, max_relative = 1e-12);
        assert_relative_eq!(s.signed[0], 7.96e-3, max_relative = 1e-3);
        assert!(s.signed[1].abs() < 1e-15);
        assert_relative_eq!(s.signed[2], -0.025 / PI, max_relative = 1e-12);

        let fast = CrossingSeries::from_crossings(vec![0.0, PI / (1.0 + 1e-3)]);
        let s = effective_shift_series(&fast);
        // δ/(1+δ) against the exact δ: agreement to first order.
        assert!((s.signed[0] - 1e-3).abs() < 1.01e-6);
    }

    #[test]
    fn fits() {
        let xs: Vec<f64> = (1..=10).map(|j| j as f64).collect();
        let flat = linear_fit(&xs, &[0.3; 10]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert_relative_eq!(flat.intercept, 0.3, max_relative = 1e-15);

        let line: Vec<f64> = xs.iter().map(|j| 0.025 - 0.002 * j).collect();
        let fit = linear_fit(&xs, &line).unwrap();
        assert!((fit.slope + 0.002).abs() < 1e-12);
        assert!((fit.intercept - 0.025).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);

        assert_eq!(linear_fit(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::DegenerateFit));
        assert!(matches!(linear_fit(&[1.0], &[1.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn means() {
        assert_relative_eq!(mean_shift(&[7.9e-3; 6], 0..6).unwrap(), 7.9e-3, max_relative = 1e-15);
        let mixed = [1e-3, -1e-3, 1e-3, -1e-3];
        assert!(mean_shift(&mixed, 0..4).unwrap().abs() < 1e-18);
        let decaying: Vec<f64> = (0..12).map(|j| 7.9e-3 * (-0.1 * j as f64).exp()).collect();
        let m = mean_shift(&decaying, 0..12).unwrap();
        assert!(m > 0.0 && m < 7.9e-3);
        assert_eq!(mean_shift(&mixed, 2..2), Err(Error::EmptyWindow));
        assert!(matches!(mean_shift(&mixed, 0..5), Err(Error::Domain { .. })));
    }

    #[test]
    fn effective_spin_values() {
        let m = ModelParams::dimensionless(10.0, 0.3, 13.0).unwrap();
        let d0 = delta_omega0(&m);
        assert!(effective_spin_decrease(d0, &m).abs() < 1e-15);
        assert_relative_eq!(effective_spin_decrease(0.0, &m), -0.5, max_relative = 1e-12);
        assert_relative_eq!(effective_spin_decrease(0.5 * d0, &m), -0.25, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn detuning_recovered(delta in 1e-4f64..9e-4, sign in prop::bool::ANY) {
            let d = if sign { delta } else { -delta };
            let (t, v) = sampled(|t| (t * (1.0 + d)).cos(), 10.0 * PI, PI / 200.0);
            let s = effective_shift_series(&find_crossings(&t, &v).unwrap());
            for &w in &s.signed {
                prop_assert!(((w - d) / d).abs() <= 1e-3);
            }
        }

        #[test]
        fn fit_satisfies_normal_equations(ys in prop::collection::vec(-1.0f64..1.0, 3..40)) {
            let xs: Vec<f64> = (1..=ys.len()).map(|j| j as f64).collect();
            let fit = linear_fit(&xs, &ys).unwrap();
            let r: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - fit.eval(*x)).collect();
            let scale = ys.iter().map(|y| y.abs()).sum::<f64>().max(1.0) * xs.len() as f64;
            prop_assert!(r.iter().sum::<f64>().abs() <= 1e-10 * scale);
            prop_assert!(r.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>().abs() <= 1e-10 * scale * xs.len() as f64);
        }

        #[test]
        fn effective_spin_is_affine(a in -1e-2f64..1e-2, b in -1e-2f64..1e-2) {
            let m = ModelParams::dimensionless(10.0, 0.3, 13.0).unwrap();
            let slope = (2.0 * 0.09 * 169.0 + 100.0f64).sqrt() / (2.0 * 0.09);
            let diff = effective_spin_decrease(a, &m) - effective_spin_decrease(b, &m);
            prop_assert!((diff - slope * (a - b)).abs() < 1e-12);
        }
    }
}
