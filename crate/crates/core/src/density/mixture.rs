use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::points::{Frame, KernelData};
use super::scales::{adaptive_bandwidths, Bandwidths, LocalScales};
use crate::data::TimeWindow;
use crate::error::{Error, Result};
use crate::kernels::{log_i0, von_mises_interval_mass, Concentration, MAX_CONCENTRATION};
use crate::scalar::{LogSumExp, Scalar};

/// Terms farther than this many bandwidths (on either axis) are skipped when
/// pruning is on. Each skipped term is below `exp(-18)` of its peak.
pub const PRUNE_BANDWIDTHS: f64 = 6.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Skip kernel terms beyond [`PRUNE_BANDWIDTHS`]; exact evaluation otherwise.
    pub fast_eval: bool,
}

/// Prepared block-weighted mixture of product kernels: Gaussian in
/// longitude and latitude, 24-hour von Mises in time of day.
///
/// Components with zero block weight are dropped at construction. All
/// evaluation happens in log space.
#[derive(Debug, Clone)]
pub struct MixtureDensity<T> {
    frame: Frame,
    temporal: bool,
    fast_eval: bool,
    xs: Vec<T>,
    ys: Vec<T>,
    ts: Vec<T>,
    inv_h1: Vec<T>,
    inv_h2: Vec<T>,
    tau: Vec<T>,
    /// `log(w_i / n_i) - log h1 - log h2 - log(2 pi)`.
    log_space_coef: Vec<T>,
    /// `tau - log I0(tau) - log 24`, the von Mises normaliser in stable form.
    log_time_norm: Vec<T>,
    /// `log(w_i / n_i)`.
    log_block_weight: Vec<T>,
    /// Original point index of each component.
    source: Vec<usize>,
    reach_x: T,
    tau_cap_hits: usize,
}

impl<T: Scalar> MixtureDensity<T> {
    pub fn new(data: &KernelData<T>, params: &ModelParams<T>, bw: &Bandwidths<T>, opts: EvalOptions) -> Result<Self> {
        if params.weights.len() != data.n_blocks() {
            return Err(Error::Evaluation(format!(
                "{} weights for {} blocks",
                params.weights.len(),
                data.n_blocks()
            )));
        }
        let n = data.n_points();
        if bw.h1.len() != n || bw.h2.len() != n || bw.tau.as_ref().is_some_and(|t| t.len() != n) {
            return Err(Error::Evaluation("bandwidth count does not match point count".into()));
        }
        let temporal = bw.tau.is_some();
        let two_pi_ln = T::TAU().ln();
        let ln24 = T::of(24.0).ln();
        let cap = T::of(MAX_CONCENTRATION);

        let mut m = Self {
            frame: data.frame,
            temporal,
            fast_eval: opts.fast_eval,
            xs: Vec::with_capacity(n),
            ys: Vec::with_capacity(n),
            ts: Vec::with_capacity(n),
            inv_h1: Vec::with_capacity(n),
            inv_h2: Vec::with_capacity(n),
            tau: Vec::with_capacity(n),
            log_space_coef: Vec::with_capacity(n),
            log_time_norm: Vec::with_capacity(n),
            log_block_weight: Vec::with_capacity(n),
            source: Vec::with_capacity(n),
            reach_x: T::zero(),
            tau_cap_hits: 0,
        };
        let mut max_h1 = T::zero();
        for k in 0..data.n_blocks() {
            let w = params.weights[k];
            if w == T::zero() {
                continue;
            }
            let nk = data.block_len(k);
            if nk == 0 {
                return Err(Error::Evaluation(format!("block {k} is empty but has weight {w}")));
            }
            let lbw = w.ln() - T::from_usize_lossy(nk).ln();
            for j in data.block_range(k) {
                let (h1, h2) = (bw.h1[j], bw.h2[j]);
                let mut tau = bw.tau.as_ref().map_or(T::zero(), |t| t[j]);
                if tau > cap {
                    tau = cap;
                    m.tau_cap_hits += 1;
                }
                max_h1 = max_h1.max(h1);
                m.xs.push(data.xs[j]);
                m.ys.push(data.ys[j]);
                m.ts.push(data.ts[j]);
                m.inv_h1.push(h1.recip());
                m.inv_h2.push(h2.recip());
                m.tau.push(tau);
                m.log_space_coef.push(lbw - h1.ln() - h2.ln() - two_pi_ln);
                m.log_time_norm.push(if temporal { tau - log_i0(tau) - ln24 } else { T::zero() });
                m.log_block_weight.push(lbw);
                m.source.push(j);
            }
        }
        if m.tau_cap_hits > 0 {
            log::warn!("{} concentrations capped at {MAX_CONCENTRATION}", m.tau_cap_hits);
        }
        m.reach_x = max_h1 * T::of(PRUNE_BANDWIDTHS);
        if m.fast_eval {
            m.sort_by_x();
        }
        Ok(m)
    }

    /// Convenience: bandwidths from `params` and `scales`.
    pub fn adaptive(data: &KernelData<T>, params: &ModelParams<T>, scales: &LocalScales<T>, opts: EvalOptions) -> Result<Self> {
        let bw = adaptive_bandwidths(params, scales);
        Self::new(data, params, &bw, opts)
    }

    fn sort_by_x(&mut self) {
        let mut order: Vec<usize> = (0..self.xs.len()).collect();
        order.sort_by(|&a, &b| self.xs[a].partial_cmp(&self.xs[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        fn permute<U: Copy>(v: &mut Vec<U>, order: &[usize]) {
            *v = order.iter().map(|&i| v[i]).collect();
        }
        permute(&mut self.xs, &order);
        permute(&mut self.ys, &order);
        permute(&mut self.ts, &order);
        permute(&mut self.inv_h1, &order);
        permute(&mut self.inv_h2, &order);
        permute(&mut self.tau, &order);
        permute(&mut self.log_space_coef, &order);
        permute(&mut self.log_time_norm, &order);
        permute(&mut self.log_block_weight, &order);
        permute(&mut self.source, &order);
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn is_temporal(&self) -> bool {
        self.temporal
    }

    pub fn n_components(&self) -> usize {
        self.xs.len()
    }

    pub fn tau_cap_hits(&self) -> usize {
        self.tau_cap_hits
    }

    fn candidate_range(&self, x: T) -> std::ops::Range<usize> {
        if !self.fast_eval {
            return 0..self.xs.len();
        }
        let lo = self.xs.partition_point(|&v| v < x - self.reach_x);
        let hi = self.xs.partition_point(|&v| v <= x + self.reach_x);
        lo..hi.max(lo)
    }

    #[inline]
    fn pruned(&self, j: usize, dx: T, dy: T) -> bool {
        let r = T::of(PRUNE_BANDWIDTHS);
        self.fast_eval && ((dx * self.inv_h1[j]).abs() > r || (dy * self.inv_h2[j]).abs() > r)
    }

    #[inline]
    fn log_spatial_term(&self, j: usize, dx: T, dy: T) -> T {
        let u = dx * self.inv_h1[j];
        let v = dy * self.inv_h2[j];
        self.log_space_coef[j] - (u * u + v * v) / T::of(2.0)
    }

    #[inline]
    fn log_time_term(&self, j: usize, t: T) -> T {
        if !self.temporal {
            return T::zero();
        }
        let s = (T::PI() * (t - self.ts[j]) / T::of(24.0)).sin();
        self.log_time_norm[j] - T::of(2.0) * self.tau[j] * s * s
    }

    /// Log density at local coordinates. Purely spatial mixtures ignore `t`.
    pub fn log_density_local(&self, x: T, y: T, t: T) -> T {
        self.accumulate(x, y, |j, dx, dy| self.log_spatial_term(j, dx, dy) + self.log_time_term(j, t))
    }

    /// Log-sum of `term` over components. A point that pruning leaves with
    /// no terms at all is evaluated exactly.
    fn accumulate(&self, x: T, y: T, term: impl Fn(usize, T, T) -> T) -> T {
        let mut acc = LogSumExp::default();
        for j in self.candidate_range(x) {
            let (dx, dy) = (x - self.xs[j], y - self.ys[j]);
            if self.pruned(j, dx, dy) {
                continue;
            }
            acc.push(term(j, dx, dy));
        }
        let v = acc.value();
        if self.fast_eval && v == T::neg_infinity() {
            let mut acc = LogSumExp::default();
            for j in 0..self.xs.len() {
                acc.push(term(j, x - self.xs[j], y - self.ys[j]));
            }
            return acc.value();
        }
        v
    }

    pub fn log_density(&self, lon: f64, lat: f64, hours: f64) -> T {
        let (x, y) = self.frame.local::<T>(lon, lat);
        self.log_density_local(x, y, T::of(hours))
    }

    pub fn density(&self, lon: f64, lat: f64, hours: f64) -> T {
        self.log_density(lon, lat, hours).exp()
    }

    /// Per-component log terms at a point, in original point order
    /// (`-inf` for dropped components).
    pub fn log_terms(&self, lon: f64, lat: f64, hours: f64, n_points: usize) -> Vec<T> {
        let (x, y) = self.frame.local::<T>(lon, lat);
        let t = T::of(hours);
        let mut out = vec![T::neg_infinity(); n_points];
        for j in 0..self.xs.len() {
            let (dx, dy) = (x - self.xs[j], y - self.ys[j]);
            out[self.source[j]] = self.log_spatial_term(j, dx, dy) + self.log_time_term(j, t);
        }
        out
    }

    /// Interval masses of every component's time kernel over `window`.
    pub fn window_factors(&self, window: TimeWindow) -> WindowFactors<T> {
        let (t1, t2) = (T::of(window.start()), T::of(window.end()));
        let log_mass: Vec<T> = if self.temporal && !window.is_full_day() {
            (0..self.xs.len())
                .map(|j| {
                    let (c, _) = Concentration::capped(self.tau[j]);
                    von_mises_interval_mass(self.ts[j], t1, t2, c).ln()
                })
                .collect()
        } else {
            vec![T::zero(); self.xs.len()]
        };
        let mut den = LogSumExp::default();
        for j in 0..self.xs.len() {
            den.push(self.log_block_weight[j] + log_mass[j]);
        }
        WindowFactors {
            window,
            log_mass,
            log_denominator: den.value(),
        }
    }

    /// Log of the normalised spatial density within a daily window.
    pub fn log_interval_density_local(&self, x: T, y: T, f: &WindowFactors<T>) -> T {
        self.accumulate(x, y, |j, dx, dy| self.log_spatial_term(j, dx, dy) + f.log_mass[j]) - f.log_denominator
    }

    pub fn log_interval_density(&self, lon: f64, lat: f64, f: &WindowFactors<T>) -> T {
        let (x, y) = self.frame.local::<T>(lon, lat);
        self.log_interval_density_local(x, y, f)
    }
}

/// Per-component time-window masses, computed once per (forecast, window)
/// and reused across grid cells.
#[derive(Debug, Clone)]
pub struct WindowFactors<T> {
    pub window: TimeWindow,
    log_mass: Vec<T>,
    log_denominator: T,
}

impl<T: Scalar> WindowFactors<T> {
    pub fn denominator(&self) -> T {
        self.log_denominator.exp()
    }
}

/// Fixed-bandwidth preliminary density (all local factors one).
pub fn preliminary_fixed_kde<T: Scalar>(data: &KernelData<T>, fixed: &ModelParams<T>, opts: EvalOptions) -> Result<MixtureDensity<T>> {
    if data.n_points() == 0 {
        return Err(Error::Fit("preliminary density needs at least one historical event".into()));
    }
    MixtureDensity::adaptive(data, fixed, &LocalScales::ones(data.n_points()), opts)
}

/// Density and log density of the mixture at one (lon, lat, hours) point.
pub fn mixture_density_at<T: Scalar>(
    point: (f64, f64, f64),
    data: &KernelData<T>,
    params: &ModelParams<T>,
    bandwidths: &Bandwidths<T>,
) -> Result<(T, T)> {
    let m = MixtureDensity::new(data, params, bandwidths, EvalOptions::default())?;
    let l = m.log_density(point.0, point.1, point.2);
    if l == T::neg_infinity() {
        log::debug!("every mixture term underflowed at {point:?}");
    }
    Ok((l.exp(), l))
}
