//! The individual Gibbs updates. Each takes the current state and returns a
//! fresh draw for one coordinate block.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use super::problem::{concentration, cos_gap, log_time_factor, GibbsData, GibbsState};
use super::rng;
use crate::density::{ModelParams, PRUNE_BANDWIDTHS};
use crate::error::{Error, Result};
use crate::kernels::MAX_CONCENTRATION;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Time,
}

/// Floor applied to a zero scale sum in the `alpha` update.
pub const RATE_FLOOR: f64 = 1e-12;

/// Per assigned event: (squared gap or cosine of the time gap, log A).
fn assigned_stats<T: Scalar>(axis: Axis, data: &GibbsData<T>, state: &GibbsState<T>) -> Vec<(T, T)> {
    state
        .aug
        .assignment
        .iter()
        .enumerate()
        .map(|(l, &c)| {
            let c = c as usize;
            let g = match axis {
                Axis::X => {
                    let d = data.sx[l] - data.cx[c];
                    d * d
                }
                Axis::Y => {
                    let d = data.sy[l] - data.cy[c];
                    d * d
                }
                Axis::Time => cos_gap(data.st[l] - data.ct[c]),
            };
            (g, data.log_a[c])
        })
        .collect()
}

/// `sum_l d_l^2 A_l^(2 beta)` over the current assignment.
pub fn scale_sum<T: Scalar>(axis: Axis, data: &GibbsData<T>, state: &GibbsState<T>) -> T {
    let beta = match axis {
        Axis::X => state.params.beta1,
        Axis::Y => state.params.beta2,
        Axis::Time => panic!("scale_sum is spatial only"),
    };
    let two = T::of(2.0);
    assigned_stats(axis, data, state)
        .into_iter()
        .map(|(d2, la)| d2 * (two * beta * la).exp())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaDraw<T> {
    pub value: T,
    pub diagnostic: Option<String>,
}

/// Draw `alpha1` (`Axis::X`) or `alpha2` (`Axis::Y`) from its full
/// conditional `alpha^n exp(-alpha^2 S / 2)`, i.e.
/// `alpha^2 ~ Gamma(shape (n+1)/2, rate S/2)`.
pub fn sample_alpha_spatial<T: Scalar, R: Rng + ?Sized>(
    axis: Axis,
    data: &GibbsData<T>,
    state: &GibbsState<T>,
    rng: &mut R,
) -> Result<AlphaDraw<T>> {
    let current = match axis {
        Axis::X => state.params.alpha1,
        Axis::Y => state.params.alpha2,
        Axis::Time => return Err(Error::Inference("alpha3 is drawn on its grid".into())),
    };
    let n = data.n_events();
    if n == 0 {
        return Ok(AlphaDraw {
            value: current,
            diagnostic: Some(format!("{axis:?}: no training events, alpha kept")),
        });
    }
    let mut s = scale_sum(axis, data, state).as_f64();
    let mut diagnostic = None;
    if !(s > 0.0) {
        diagnostic = Some(format!("{axis:?}: all assigned distances are zero, rate floored at {RATE_FLOOR}"));
        s = RATE_FLOOR;
    }
    let g = Gamma::new((n as f64 + 1.0) / 2.0, 2.0 / s)
        .map_err(|e| Error::Inference(format!("alpha conditional: {e}")))?
        .sample(rng);
    let value = g.sqrt();
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::Inference(format!("{axis:?}: alpha draw {value} from rate {s}")));
    }
    Ok(AlphaDraw {
        value: T::of(value),
        diagnostic,
    })
}

/// Log full conditional of a `beta` at each grid atom (up to a constant).
pub fn beta_log_conditional<T: Scalar>(axis: Axis, data: &GibbsData<T>, state: &GibbsState<T>, grid: &[T]) -> Vec<T> {
    let stats = assigned_stats(axis, data, state);
    let p = &state.params;
    match axis {
        Axis::X | Axis::Y => {
            let alpha = if axis == Axis::X { p.alpha1 } else { p.alpha2 };
            let a2 = alpha * alpha;
            let sum_log_a: T = stats.iter().map(|s| s.1).sum();
            let two = T::of(2.0);
            grid.par_iter()
                .with_min_len(64)
                .map(|&b| {
                    let s: T = stats.iter().map(|&(d2, la)| d2 * (two * b * la).exp()).sum();
                    b * sum_log_a - a2 * s / two
                })
                .collect()
        }
        Axis::Time => {
            let alpha3 = p.time.map_or(T::zero(), |tp| tp.alpha3);
            time_log_conditional(&stats, grid, |b| (alpha3, b))
        }
    }
}

/// Log full conditional of `alpha3` at each grid atom.
pub fn alpha3_log_conditional<T: Scalar>(data: &GibbsData<T>, state: &GibbsState<T>, grid: &[T]) -> Vec<T> {
    let stats = assigned_stats(Axis::Time, data, state);
    let beta3 = state.params.time.map_or(T::zero(), |tp| tp.beta3);
    time_log_conditional(&stats, grid, |a| (a, beta3))
}

fn time_log_conditional<T: Scalar>(stats: &[(T, T)], grid: &[T], at: impl Fn(T) -> (T, T) + Sync) -> Vec<T> {
    grid.par_iter()
        .with_min_len(64)
        .map(|&g| {
            let (alpha3, beta3) = at(g);
            stats
                .iter()
                .map(|&(cos, la)| log_time_factor(concentration(alpha3, beta3, la), cos))
                .sum()
        })
        .collect()
}

/// Index drawn with probabilities proportional to `exp(logw)`.
pub fn draw_log_categorical<T: Scalar, R: Rng + ?Sized>(logw: &[T], rng: &mut R) -> Result<usize> {
    let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return Err(Error::Inference("every categorical log-weight is -inf or non-finite".into()));
    }
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).as_f64().exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &wi) in w.iter().enumerate() {
        if u < wi {
            return Ok(i);
        }
        u -= wi;
    }
    Ok(w.iter().rposition(|&x| x > 0.0).unwrap_or(0))
}

pub fn sample_beta_grid<T: Scalar, R: Rng + ?Sized>(
    axis: Axis,
    data: &GibbsData<T>,
    state: &GibbsState<T>,
    grid: &[T],
    rng: &mut R,
) -> Result<T> {
    let lw = beta_log_conditional(axis, data, state, grid);
    Ok(grid[draw_log_categorical(&lw, rng)?])
}

/// Atoms more than this far below the mode in log-weight are left out of
/// the draw; their total mass is below double precision.
const LOG_NEGLIGIBLE: f64 = 45.0;

/// Draw `alpha3` from its grid conditional.
///
/// With an ascending grid and no capped concentration the log-weight is
/// concave in `alpha3^2`, hence unimodal over the atoms: the mode is found
/// by ternary search and only atoms within [`LOG_NEGLIGIBLE`] of it are
/// scored. Otherwise every atom is scored.
pub fn sample_alpha3_grid<T: Scalar, R: Rng + ?Sized>(
    data: &GibbsData<T>,
    state: &GibbsState<T>,
    grid: &[T],
    rng: &mut R,
) -> Result<T> {
    let stats = assigned_stats(Axis::Time, data, state);
    let beta3 = state.params.time.map_or(T::zero(), |tp| tp.beta3);
    let ascending = grid.windows(2).all(|w| w[0] < w[1]) && grid.first().is_some_and(|&g| g >= T::zero());
    let top = grid.last().copied().unwrap_or_else(T::zero);
    let max_la = stats.iter().map(|s| s.1).fold(T::neg_infinity(), T::max);
    let capped = max_la.is_finite() && (top * (beta3 * max_la).exp()).powi(2) >= T::of(MAX_CONCENTRATION);
    if !ascending || capped || grid.len() < 16 {
        let lw = time_log_conditional(&stats, grid, |a| (a, beta3));
        return Ok(grid[draw_log_categorical(&lw, rng)?]);
    }
    let scaled: Vec<(T, T)> = stats.iter().map(|&(cos, la)| (cos, (T::of(2.0) * beta3 * la).exp())).collect();
    let mut cache: Vec<Option<T>> = vec![None; grid.len()];
    let mut f = |i: usize| -> T {
        *cache[i].get_or_insert_with(|| {
            let a2 = grid[i] * grid[i];
            scaled.iter().map(|&(cos, c)| log_time_factor(a2 * c, cos)).sum()
        })
    };
    let (mut lo, mut hi) = (0, grid.len() - 1);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        let (a, b) = (f(m1), f(m2));
        if a < b {
            lo = m1 + 1;
        } else if a > b {
            hi = m2 - 1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    let mut mode = lo;
    for i in lo..=hi {
        if f(i) > f(mode) {
            mode = i;
        }
    }
    let peak = f(mode);
    if !peak.is_finite() {
        return Err(Error::Inference("alpha3 conditional has no finite atom".into()));
    }
    let floor = peak - T::of(LOG_NEGLIGIBLE);
    let mut first = mode;
    while first > 0 && f(first - 1) >= floor {
        first -= 1;
    }
    let mut last = mode;
    while last + 1 < grid.len() && f(last + 1) >= floor {
        last += 1;
    }
    let lw: Vec<T> = (first..=last).map(&mut f).collect();
    Ok(grid[first + draw_log_categorical(&lw, rng)?])
}

/// `Dirichlet(1 + f_1, ..., 1 + f_K)` from per-block assignment counts.
pub fn sample_weights<T: Scalar, R: Rng + ?Sized>(counts: &[usize], rng: &mut R) -> Result<Vec<T>> {
    let mut g = Vec::with_capacity(counts.len());
    for &f in counts {
        let d = Gamma::new(1.0 + f as f64, 1.0).map_err(|e| Error::Inference(format!("weights: {e}")))?;
        g.push(d.sample(rng));
    }
    let total: f64 = g.iter().sum();
    Ok(g.into_iter().map(|x| T::of(x / total)).collect())
}

/// Per-candidate factors of the assignment conditional under fixed params.
struct CandidateTable<T> {
    log_coef: Vec<T>,
    s1: Vec<T>,
    s2: Vec<T>,
    tau_cos: Vec<T>,
    tau_sin: Vec<T>,
    order: Vec<u32>,
    sorted_x: Vec<T>,
    reach: T,
}

impl<T: Scalar> CandidateTable<T> {
    fn new(data: &GibbsData<T>, p: &ModelParams<T>, prune: bool) -> Self {
        let n = data.n_candidates();
        let two_pi = T::TAU().ln();
        let log_w: Vec<T> = p
            .weights
            .iter()
            .zip(&data.block_len)
            .map(|(&w, &len)| if w > T::zero() { w.ln() - T::from_usize_lossy(len).ln() } else { T::neg_infinity() })
            .collect();
        let mut t = Self {
            log_coef: Vec::with_capacity(n),
            s1: Vec::with_capacity(n),
            s2: Vec::with_capacity(n),
            tau_cos: Vec::with_capacity(n),
            tau_sin: Vec::with_capacity(n),
            order: Vec::new(),
            sorted_x: Vec::new(),
            reach: T::infinity(),
        };
        let time = p.time.filter(|_| data.temporal);
        let mut max_h = T::zero();
        for c in 0..n {
            let la = data.log_a[c];
            let s1 = p.alpha1 * (p.beta1 * la).exp();
            let s2 = p.alpha2 * (p.beta2 * la).exp();
            let mut coef = log_w[data.block[c] as usize] + s1.ln() + s2.ln() - two_pi;
            let (mut tc, mut ts) = (T::zero(), T::zero());
            if let Some(tp) = time {
                let tau = concentration(tp.alpha3, tp.beta3, la);
                coef += log_time_factor(tau, T::zero());
                let a = T::PI() * data.ct[c] / T::of(12.0);
                tc = tau * a.cos();
                ts = tau * a.sin();
            }
            max_h = max_h.max(s1.recip());
            t.log_coef.push(coef);
            t.s1.push(s1);
            t.s2.push(s2);
            t.tau_cos.push(tc);
            t.tau_sin.push(ts);
        }
        if prune {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| data.cx[a as usize].partial_cmp(&data.cx[b as usize]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            t.sorted_x = order.iter().map(|&c| data.cx[c as usize]).collect();
            t.order = order;
            t.reach = max_h * T::of(PRUNE_BANDWIDTHS);
        }
        t
    }

    #[inline]
    fn term(&self, data: &GibbsData<T>, c: usize, sx: T, sy: T, ec: T, es: T) -> T {
        let u = (sx - data.cx[c]) * self.s1[c];
        let v = (sy - data.cy[c]) * self.s2[c];
        self.log_coef[c] - (u * u + v * v) / T::of(2.0) + self.tau_cos[c] * ec + self.tau_sin[c] * es
    }
}

/// Stream coordinates of one assignment update.
#[derive(Debug, Clone, Copy)]
pub struct StreamKey {
    pub seed: u64,
    pub chain: u64,
    pub sweep: u64,
}

pub const ASSIGNMENT_STEP: u64 = 8;

/// Redraw every `(I_l, J_l)`. Returns the new assignment and the mixture log
/// likelihood of the training events under `params` (the per-event
/// normalising constants of the categorical draws).
pub fn sample_assignments<T: Scalar>(
    data: &GibbsData<T>,
    params: &ModelParams<T>,
    key: StreamKey,
    prune: bool,
) -> Result<(Vec<u32>, f64)> {
    let table = CandidateTable::new(data, params, prune);
    let n_cand = data.n_candidates();
    let time = data.temporal && params.time.is_some();
    let results: Vec<Result<(u32, f64)>> = (0..data.n_events())
        .into_par_iter()
        .with_min_len(16)
        .map_init(Vec::<(u32, T)>::new, |buf, l| {
            buf.clear();
            let (sx, sy) = (data.sx[l], data.sy[l]);
            let (ec, es) = if time {
                let a = T::PI() * data.st[l] / T::of(12.0);
                (a.cos(), a.sin())
            } else {
                (T::zero(), T::zero())
            };
            if prune {
                let lo = table.sorted_x.partition_point(|&x| x < sx - table.reach);
                let hi = table.sorted_x.partition_point(|&x| x <= sx + table.reach);
                let lim = T::of(PRUNE_BANDWIDTHS);
                for &c in &table.order[lo..hi.max(lo)] {
                    let c = c as usize;
                    if ((sx - data.cx[c]) * table.s1[c]).abs() > lim || ((sy - data.cy[c]) * table.s2[c]).abs() > lim {
                        continue;
                    }
                    buf.push((c as u32, table.term(data, c, sx, sy, ec, es)));
                }
            }
            if buf.iter().all(|&(_, lw)| lw == T::neg_infinity()) {
                buf.clear();
                for c in 0..n_cand {
                    buf.push((c as u32, table.term(data, c, sx, sy, ec, es)));
                }
            }
            let max = buf.iter().map(|b| b.1).fold(T::neg_infinity(), T::max);
            if !max.is_finite() {
                return Err(Error::Inference(format!("training event {l} has zero likelihood under every candidate")));
            }
            let mut total = 0.0;
            for b in buf.iter_mut() {
                let d = (b.1 - max).as_f64();
                // exp() is exactly zero below this.
                let w = if d < -746.0 { 0.0 } else { d.exp() };
                total += w;
                b.1 = T::of(w);
            }
            let mut r = rng::substream(key.seed, key.chain, key.sweep, ASSIGNMENT_STEP, l as u64);
            let mut u = r.random::<f64>() * total;
            let mut pick = buf.last().map_or(0, |b| b.0);
            for &(c, w) in buf.iter() {
                let w = w.as_f64();
                if u < w {
                    pick = c;
                    break;
                }
                u -= w;
            }
            Ok((pick, max.as_f64() + total.ln()))
        })
        .collect();
    let mut assignment = Vec::with_capacity(results.len());
    let mut loglik = 0.0;
    for r in results {
        let (c, ll) = r?;
        assignment.push(c);
        loglik += ll;
    }
    Ok((assignment, loglik))
}
