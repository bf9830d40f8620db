use serde::{Deserialize, Serialize};

use crate::density::{KernelData, LocalScales, ModelParams, TrainingPoints};
use crate::error::{Error, Result};
use crate::kernels::{log_i0, MAX_CONCENTRATION};
use crate::scalar::{LogSumExp, Scalar};

/// Candidate kernel points with their log local scales, plus the training
/// events the mixture is fitted to.
#[derive(Debug, Clone)]
pub struct GibbsData<T> {
    pub cx: Vec<T>,
    pub cy: Vec<T>,
    pub ct: Vec<T>,
    pub log_a: Vec<T>,
    pub block: Vec<u32>,
    pub block_len: Vec<usize>,
    pub sx: Vec<T>,
    pub sy: Vec<T>,
    pub st: Vec<T>,
    pub temporal: bool,
}

impl<T: Scalar> GibbsData<T> {
    pub fn new(data: &KernelData<T>, scales: &LocalScales<T>, train: &TrainingPoints<T>, temporal: bool) -> Result<Self> {
        if scales.len() != data.n_points() {
            return Err(Error::Inference(format!(
                "{} local scales for {} kernel points",
                scales.len(),
                data.n_points()
            )));
        }
        if data.n_blocks() == 0 {
            return Err(Error::Inference("no kernel blocks".into()));
        }
        let block_len: Vec<usize> = (0..data.n_blocks()).map(|k| data.block_len(k)).collect();
        if let Some(k) = block_len.iter().position(|&n| n == 0) {
            return Err(Error::Inference(format!("block {k} is empty; drop empty blocks before fitting")));
        }
        if scales.a.iter().any(|&a| !(a > T::zero() && a.is_finite())) {
            return Err(Error::Inference("local scales must be positive and finite".into()));
        }
        Ok(Self {
            cx: data.xs.clone(),
            cy: data.ys.clone(),
            ct: data.ts.clone(),
            log_a: scales.a.iter().map(|a| a.ln()).collect(),
            block: data.block_of_points().into_iter().map(|b| b as u32).collect(),
            block_len,
            sx: train.xs.clone(),
            sy: train.ys.clone(),
            st: train.ts.clone(),
            temporal,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.cx.len()
    }

    pub fn n_events(&self) -> usize {
        self.sx.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_len.len()
    }

    /// Per-event log factor of assigning event `l` to candidate `c`: the
    /// product kernel at the event times `w_I / n_I`.
    pub fn log_term(&self, params: &ModelParams<T>, l: usize, c: usize) -> T {
        let k = self.block[c] as usize;
        let w = params.weights[k];
        if w <= T::zero() {
            return T::neg_infinity();
        }
        let la = self.log_a[c];
        let two = T::of(2.0);
        let u = (self.sx[l] - self.cx[c]) * params.alpha1 * (params.beta1 * la).exp();
        let v = (self.sy[l] - self.cy[c]) * params.alpha2 * (params.beta2 * la).exp();
        let mut out = w.ln() - T::from_usize_lossy(self.block_len[k]).ln() + params.alpha1.ln() + params.beta1 * la
            + params.alpha2.ln()
            + params.beta2 * la
            - T::TAU().ln()
            - (u * u + v * v) / two;
        if let (true, Some(tp)) = (self.temporal, params.time) {
            let tau = concentration(tp.alpha3, tp.beta3, la);
            out += log_time_factor(tau, cos_gap(self.st[l] - self.ct[c]));
        }
        out
    }

    /// `log` of the mixture likelihood of the training events (assignments
    /// summed out).
    pub fn log_likelihood(&self, params: &ModelParams<T>) -> T {
        (0..self.n_events())
            .map(|l| {
                let mut acc = LogSumExp::default();
                for c in 0..self.n_candidates() {
                    acc.push(self.log_term(params, l, c));
                }
                acc.value()
            })
            .sum()
    }

    /// `log` of the augmented likelihood for a fixed assignment.
    pub fn log_augmented_likelihood(&self, params: &ModelParams<T>, assignment: &[u32]) -> T {
        assignment
            .iter()
            .enumerate()
            .map(|(l, &c)| self.log_term(params, l, c as usize))
            .sum()
    }
}

/// `cos(pi (t_l - t_c) / 12)` for a time difference in hours.
#[inline]
pub fn cos_gap<T: Scalar>(dt: T) -> T {
    (T::PI() * dt / T::of(12.0)).cos()
}

/// `(alpha3 A^beta3)^2`, capped.
#[inline]
pub fn concentration<T: Scalar>(alpha3: T, beta3: T, log_a: T) -> T {
    let s = alpha3 * (beta3 * log_a).exp();
    (s * s).min(T::of(MAX_CONCENTRATION))
}

/// `log` of the von Mises factor `exp(tau cos) / (24 I0(tau))`.
#[inline]
pub fn log_time_factor<T: Scalar>(tau: T, cos: T) -> T {
    tau * cos - log_i0(tau) - T::of(24.0).ln()
}

/// Latent assignment of every training event to one candidate kernel point
/// (flat index; the block follows from [`GibbsData::block`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationState {
    pub assignment: Vec<u32>,
}

impl AugmentationState {
    /// `(I_l, J_l)` with `J_l` the index within the block.
    pub fn block_and_point<T: Scalar>(&self, data: &GibbsData<T>, l: usize) -> (usize, usize) {
        let c = self.assignment[l] as usize;
        let k = data.block[c] as usize;
        let first = data.block.partition_point(|&b| (b as usize) < k);
        (k, c - first)
    }

    pub fn counts<T: Scalar>(&self, data: &GibbsData<T>) -> Vec<usize> {
        let mut f = vec![0; data.n_blocks()];
        for &c in &self.assignment {
            f[data.block[c as usize] as usize] += 1;
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState<T> {
    pub params: ModelParams<T>,
    pub aug: AugmentationState,
}
