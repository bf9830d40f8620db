//! Scalar kernel primitives: the Gaussian kernel, the 24-hour von Mises
//! kernel and its interval mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Concentrations above this are clamped.
pub const MAX_CONCENTRATION: f64 = 1e6;

const HOURS_PER_DAY: f64 = 24.0;
const SERIES_CUTOFF: f64 = 15.0;

/// Von Mises concentration `tau`; zero is the uniform density over the day.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Concentration<T>(T);

impl<T: Scalar> Concentration<T> {
    pub fn new(tau: T) -> Result<Self> {
        if !tau.is_finite() || tau < T::zero() {
            return Err(Error::arg(format!("concentration must be finite and >= 0, got {tau}")));
        }
        Ok(Self(tau))
    }

    /// Clamp to [`MAX_CONCENTRATION`]; the flag reports whether the cap was hit.
    pub fn capped(tau: T) -> (Self, bool) {
        let cap = T::of(MAX_CONCENTRATION);
        if tau.is_nan() || tau < T::zero() {
            return (Self(T::zero()), true);
        }
        if tau > cap {
            (Self(cap), true)
        } else {
            (Self(tau), false)
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Standard normal density.
#[inline]
pub fn gaussian_kernel<T: Scalar>(u: T) -> T {
    (-(u * u) / T::of(2.0)).exp() / T::TAU().sqrt()
}

/// `log I0(x)` for the modified Bessel function of the first kind, order zero.
pub fn log_bessel_i0<T: Scalar>(x: T) -> Result<T> {
    if x.is_nan() || x < T::zero() {
        return Err(Error::arg(format!("log_bessel_i0 needs x >= 0, got {x}")));
    }
    Ok(log_i0(x))
}

/// Unchecked variant for hot loops; `x` must be non-negative.
#[inline]
pub fn log_i0<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        return T::zero();
    }
    if x < T::of(SERIES_CUTOFF) {
        log_i0_series(x)
    } else {
        log_i0_asymptotic(x)
    }
}

const INV_SQUARES: [f64; 64] = {
    let mut t = [0.0; 64];
    let mut k = 1;
    while k < 64 {
        t[k] = 1.0 / (k * k) as f64;
        k += 1;
    }
    t
};

fn log_i0_series<T: Scalar>(x: T) -> T {
    let q = x * x / T::of(4.0);
    let mut term = T::one();
    let mut sum = T::one();
    for &inv in &INV_SQUARES[1..] {
        term = term * q * T::of(inv);
        sum += term;
        if term < sum * T::series_eps() {
            break;
        }
    }
    sum.ln()
}

// I0(x) ~ e^x / sqrt(2 pi x) * sum_k c_k x^-k, c_k = ((2k-1)!!)^2 / (k! 8^k).
// At x >= SERIES_CUTOFF the terms fall below 1e-17 well before they turn.
const ASYMPTOTIC_TERMS: usize = 24;
const ASYMPTOTIC_COEFS: [f64; ASYMPTOTIC_TERMS] = {
    let mut c = [1.0; ASYMPTOTIC_TERMS];
    let mut k = 1;
    while k < ASYMPTOTIC_TERMS {
        let odd = (2 * k - 1) as f64;
        c[k] = c[k - 1] * odd * odd / (8 * k) as f64;
        k += 1;
    }
    c
};

fn log_i0_asymptotic<T: Scalar>(x: T) -> T {
    let inv = x.recip();
    let mut sum = T::zero();
    for &c in ASYMPTOTIC_COEFS.iter().rev() {
        sum = sum * inv + T::of(c);
    }
    x - (T::TAU() * x).ln() / T::of(2.0) + sum.ln()
}

#[inline]
fn phase<T: Scalar>(u: T) -> T {
    T::PI() * u / T::of(12.0)
}

/// `log` of the 24-hour von Mises density at offset `u` hours.
#[inline]
pub fn von_mises_log_density<T: Scalar>(u: T, tau: T) -> T {
    if tau == T::zero() {
        return -T::of(HOURS_PER_DAY).ln();
    }
    // tau*(cos - 1) stays bounded where tau*cos would overflow exp().
    let half = phase(u) / T::of(2.0);
    let s = half.sin();
    -T::of(2.0) * tau * s * s + (tau - log_i0(tau)) - T::of(HOURS_PER_DAY).ln()
}

/// Von Mises kernel with period 24 hours: `exp(tau cos(pi u / 12)) / (24 I0(tau))`.
#[inline]
pub fn von_mises_density<T: Scalar>(u: T, tau: Concentration<T>) -> T {
    von_mises_log_density(u, tau.get()).exp()
}

/// Probability mass the von Mises kernel centred at `center` puts on `[t1, t2]`.
///
/// Adaptive Simpson on monotone pieces (split at the peak and trough of the
/// kernel) with a 256-panel composite fallback. Evaluated in `f64` whatever
/// the scalar type.
pub fn von_mises_interval_mass<T: Scalar>(center: T, t1: T, t2: T, tau: Concentration<T>) -> T {
    T::of(interval_mass_f64(
        center.as_f64(),
        t1.as_f64(),
        t2.as_f64(),
        tau.get().as_f64(),
    ))
}

fn interval_mass_f64(center: f64, t1: f64, t2: f64, tau: f64) -> f64 {
    if t2 <= t1 {
        return 0.0;
    }
    if t2 - t1 >= HOURS_PER_DAY {
        return 1.0;
    }
    if tau == 0.0 {
        return (t2 - t1) / HOURS_PER_DAY;
    }
    let norm = tau - log_i0(tau) - HOURS_PER_DAY.ln();
    let f = |t: f64| {
        let s = (phase(t - center) / 2.0).sin();
        (-2.0 * tau * s * s + norm).exp()
    };

    // Peaks at center + 24k, troughs at center + 12 + 24k.
    let mut cuts = vec![t1, t2];
    let first = ((t1 - center) / 12.0).ceil() as i64;
    let last = ((t2 - center) / 12.0).floor() as i64;
    for k in first..=last {
        let c = center + 12.0 * k as f64;
        if c > t1 && c < t2 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);

    let scale = (12.0 / std::f64::consts::PI) / tau.max(1.0).sqrt();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / scale).ceil().clamp(1.0, 256.0) as usize;
        let h = (b - a) / panels as f64;
        let tol = 1e-11 / panels as f64;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            total += adaptive_simpson(&f, lo, hi, tol)
                .unwrap_or_else(|| composite_simpson(&f, lo, hi, 256));
        }
    }
    total.clamp(0.0, 1.0)
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson; `None` when the depth budget runs out before `tol` is met.
pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Option<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?,
    )
}

pub(crate) fn composite_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1) * 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tau(x: f64) -> Concentration<f64> {
        Concentration::new(x).unwrap()
    }

    #[test]
    fn gaussian_values() {
        assert_relative_eq!(gaussian_kernel(0.0_f64), 0.398_942_280_401_432_7, epsilon = 1e-12);
        assert_relative_eq!(gaussian_kernel(1.0_f64), 0.241_970_724_519_143_37, epsilon = 1e-12);
        assert_eq!(gaussian_kernel(-2.0_f64), gaussian_kernel(2.0_f64));
        assert_relative_eq!(gaussian_kernel(0.0_f32), 0.398_942_3_f32, epsilon = 1e-6);
    }

    #[test]
    fn bessel_rejects_negative() {
        assert!(log_bessel_i0(-1.0_f64).is_err());
        assert_eq!(log_bessel_i0(0.0_f64).unwrap(), 0.0);
    }

    #[test]
    fn bessel_large_argument_is_finite() {
        let v = log_bessel_i0(1e4_f64).unwrap();
        assert!(v.is_finite());
        assert!((v - (1e4 - 0.5 * (std::f64::consts::TAU * 1e4).ln())).abs() < 1e-4);
    }

    #[test]
    fn uniform_when_tau_zero() {
        for u in [0.0, 3.3, 12.0, 23.9, -5.0] {
            assert_relative_eq!(von_mises_density(u, tau(0.0)), 1.0 / 24.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn peak_at_zero_offset() {
        let t = 3.0_f64;
        let expected = t.exp() / (24.0 * log_i0(t).exp());
        assert_relative_eq!(von_mises_density(0.0, tau(t)), expected, max_relative = 1e-12);
        assert!(von_mises_density(0.5, tau(t)) < expected);
    }

    #[test]
    fn huge_tau_does_not_overflow() {
        let d = von_mises_density(0.0, tau(1e6));
        assert!(d.is_finite() && d > 0.0);
        let m = von_mises_interval_mass(10.0, 8.0, 12.0, tau(1e6));
        assert!((m - 1.0).abs() < 1e-8);
    }

    #[test]
    fn concentration_cap() {
        let (c, hit) = Concentration::capped(5e6_f64);
        assert!(hit);
        assert_eq!(c.get(), MAX_CONCENTRATION);
        let (c, hit) = Concentration::capped(2.0_f64);
        assert!(!hit);
        assert_eq!(c.get(), 2.0);
        assert!(Concentration::new(-1.0_f64).is_err());
        assert!(Concentration::new(f64::INFINITY).is_err());
    }

    #[test]
    fn interval_mass_cases() {
        assert_relative_eq!(von_mises_interval_mass(7.0, 0.0, 24.0, tau(4.0)), 1.0, epsilon = 1e-12);
        assert_relative_eq!(von_mises_interval_mass(7.0, 8.0, 12.0, tau(0.0)), 1.0 / 6.0, epsilon = 1e-15);
        assert!(von_mises_interval_mass(10.0, 8.0, 12.0, tau(50.0)) >= 0.999);
        // Wraps past midnight; reference value from adaptive Gauss-Kronrod quadrature.
        let m = von_mises_interval_mass(23.0, 0.0, 2.0, tau(10.0));
        assert!((m - 0.199_131_424_200_353_3).abs() < 1e-9, "{m}");
    }

    #[test]
    fn f32_kernels() {
        let c = Concentration::new(2.0_f32).unwrap();
        let m = von_mises_interval_mass(1.0_f32, 0.0, 24.0, c);
        assert!((m - 1.0).abs() < 1e-6);
        assert!((log_i0(1.0_f32) - 0.235_914_f32).abs() < 1e-5);
    }
}
