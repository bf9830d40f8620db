use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prior::{GibbsSchedule, PriorSpec};
use super::problem::{AugmentationState, GibbsData, GibbsState};
use super::rng;
use super::steps::{
    sample_alpha3_grid, sample_alpha_spatial, sample_assignments, sample_beta_grid, sample_weights, Axis, StreamKey,
};
use crate::density::{ModelParams, TimeParams};
use crate::error::{Error, Result};
use crate::forecast::srot::srot_from_columns;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub prior: PriorSpec,
    pub schedule: GibbsSchedule,
    /// Draw block weights (Step 7); otherwise they stay uniform.
    pub estimate_weights: bool,
    /// Restrict Step 8 candidates to within the pruning radius.
    pub prune_candidates: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            prior: PriorSpec::default(),
            schedule: GibbsSchedule::default(),
            estimate_weights: true,
            prune_candidates: false,
        }
    }
}

/// Draws from one chain. Warm-up draws are kept for trace export only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PosteriorSamples<T> {
    pub chain: usize,
    pub seed: u64,
    pub warmup: usize,
    pub warmup_draws: Vec<ModelParams<T>>,
    pub warmup_loglik: Vec<f64>,
    pub draws: Vec<ModelParams<T>>,
    pub loglik: Vec<f64>,
    pub diagnostics: Vec<String>,
}

const STEP_ALPHA1: u64 = 1;
const STEP_BETA1: u64 = 2;
const STEP_ALPHA2: u64 = 3;
const STEP_BETA2: u64 = 4;
const STEP_ALPHA3: u64 = 5;
const STEP_BETA3: u64 = 6;
const STEP_WEIGHTS: u64 = 7;
const INIT_SWEEP: u64 = u64::MAX;

pub struct GibbsSampler<'a, T> {
    data: &'a GibbsData<T>,
    config: &'a GibbsConfig,
    beta_grid: Vec<T>,
    alpha3_grid: Vec<T>,
    seed: u64,
    chain: u64,
    sweep: u64,
    state: GibbsState<T>,
    diagnostics: Vec<String>,
}

impl<'a, T: Scalar> GibbsSampler<'a, T> {
    /// Step 0: rule-of-thumb starting bandwidths, `beta = 0.5`, uniform
    /// weights, and assignments drawn from their prior.
    pub fn new(data: &'a GibbsData<T>, config: &'a GibbsConfig, seed: u64, chain: usize) -> Result<Self> {
        config.prior.validate()?;
        let mut diagnostics = Vec::new();
        let cx: Vec<f64> = data.cx.iter().map(|v| v.as_f64()).collect();
        let cy: Vec<f64> = data.cy.iter().map(|v| v.as_f64()).collect();
        let ang: Vec<f64> = data.ct.iter().map(|v| v.as_f64() * std::f64::consts::TAU / 24.0).collect();
        let (mut a1, mut a2, mut a3) = (1e3, 1e3, 1.0);
        match srot_from_columns(&cx, &cy, &ang) {
            Ok(s) => {
                a1 = 1.0 / s.h1;
                a2 = 1.0 / s.h2;
                a3 = 1.0 / s.h3;
            }
            Err(e) => diagnostics.push(format!("initial bandwidths defaulted: {e}")),
        }
        let beta0 = T::of(PriorSpec::snap(&config.prior.beta_grid, 0.5));
        let k = data.n_blocks();
        let params = ModelParams {
            alpha1: T::of(a1),
            beta1: beta0,
            alpha2: T::of(a2),
            beta2: beta0,
            time: data.temporal.then(|| TimeParams {
                alpha3: T::of(PriorSpec::snap(&config.prior.alpha3_grid, a3)),
                beta3: beta0,
            }),
            weights: ModelParams::uniform_weights(k),
        };
        let mut r = rng::stream(seed, chain as u64, INIT_SWEEP, 0);
        let starts: Vec<usize> = std::iter::once(0)
            .chain(data.block_len.iter().scan(0, |acc, &n| {
                *acc += n;
                Some(*acc)
            }))
            .collect();
        let assignment = (0..data.n_events())
            .map(|_| {
                let b = r.random_range(0..k);
                (starts[b] + r.random_range(0..data.block_len[b])) as u32
            })
            .collect();
        Ok(Self {
            data,
            config,
            beta_grid: config.prior.beta_grid.iter().map(|&b| T::of(b)).collect(),
            alpha3_grid: config.prior.alpha3_grid.iter().map(|&a| T::of(a)).collect(),
            seed,
            chain: chain as u64,
            sweep: 0,
            state: GibbsState {
                params,
                aug: AugmentationState { assignment },
            },
            diagnostics,
        })
    }

    pub fn state(&self) -> &GibbsState<T> {
        &self.state
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    fn note(&mut self, d: Option<String>) {
        if let Some(d) = d {
            if !self.diagnostics.contains(&d) {
                log::warn!("{d}");
                self.diagnostics.push(d);
            }
        }
    }

    /// One pass of Steps 1-8. Returns the mixture log likelihood of the
    /// training events at the parameters drawn in this sweep.
    pub fn sweep(&mut self) -> Result<f64> {
        let (seed, chain, sweep) = (self.seed, self.chain, self.sweep);
        let stream = |step| rng::stream(seed, chain, sweep, step);
        let data = self.data;

        let d = sample_alpha_spatial(Axis::X, data, &self.state, &mut stream(STEP_ALPHA1))?;
        self.state.params.alpha1 = d.value;
        self.note(d.diagnostic);
        self.state.params.beta1 = sample_beta_grid(Axis::X, data, &self.state, &self.beta_grid, &mut stream(STEP_BETA1))?;
        let d = sample_alpha_spatial(Axis::Y, data, &self.state, &mut stream(STEP_ALPHA2))?;
        self.state.params.alpha2 = d.value;
        self.note(d.diagnostic);
        self.state.params.beta2 = sample_beta_grid(Axis::Y, data, &self.state, &self.beta_grid, &mut stream(STEP_BETA2))?;
        if self.state.params.time.is_some() {
            let a3 = sample_alpha3_grid(data, &self.state, &self.alpha3_grid, &mut stream(STEP_ALPHA3))?;
            if let Some(tp) = self.state.params.time.as_mut() {
                tp.alpha3 = a3;
            }
            let b3 = sample_beta_grid(Axis::Time, data, &self.state, &self.beta_grid, &mut stream(STEP_BETA3))?;
            if let Some(tp) = self.state.params.time.as_mut() {
                tp.beta3 = b3;
            }
        }
        if self.config.estimate_weights && data.n_blocks() > 1 {
            let counts = self.state.aug.counts(data);
            self.state.params.weights = sample_weights(&counts, &mut stream(STEP_WEIGHTS))?;
        }
        let key = StreamKey { seed, chain, sweep };
        let (assignment, loglik) = sample_assignments(data, &self.state.params, key, self.config.prune_candidates)?;
        self.state.aug.assignment = assignment;
        self.sweep += 1;
        if !loglik.is_finite() {
            return Err(Error::Inference(format!(
                "non-finite log-likelihood {loglik} at sweep {sweep} of chain {chain}; params {:?}; diagnostics {:?}",
                self.state.params, self.diagnostics
            )));
        }
        Ok(loglik)
    }
}

/// Step 0 then `warmup + samples` sweeps.
pub fn run_chain<T: Scalar>(data: &GibbsData<T>, config: &GibbsConfig, seed: u64, chain: usize) -> Result<PosteriorSamples<T>> {
    config.schedule.validate()?;
    let mut s = GibbsSampler::new(data, config, seed, chain)?;
    let GibbsSchedule { warmup, samples, .. } = config.schedule;
    let mut out = PosteriorSamples {
        chain,
        seed,
        warmup,
        warmup_draws: Vec::with_capacity(warmup),
        warmup_loglik: Vec::with_capacity(warmup),
        draws: Vec::with_capacity(samples),
        loglik: Vec::with_capacity(samples),
        diagnostics: Vec::new(),
    };
    for i in 0..warmup + samples {
        let ll = s.sweep()?;
        let p = s.state().params.clone();
        if i < warmup {
            out.warmup_draws.push(p);
            out.warmup_loglik.push(ll);
        } else {
            out.draws.push(p);
            out.loglik.push(ll);
        }
    }
    out.diagnostics = s.diagnostics().to_vec();
    Ok(out)
}

/// All configured chains, in parallel, returned in chain order.
pub fn run_chains<T: Scalar>(data: &GibbsData<T>, config: &GibbsConfig, seed: u64) -> Result<Vec<PosteriorSamples<T>>> {
    (0..config.schedule.chains)
        .into_par_iter()
        .map(|c| run_chain(data, config, seed, c))
        .collect()
}

/// Element-wise mean over the retained draws of all chains, weights
/// renormalised.
pub fn posterior_mean<T: Scalar>(samples: &[PosteriorSamples<T>]) -> Result<ModelParams<T>> {
    let draws: Vec<&ModelParams<T>> = samples.iter().flat_map(|s| &s.draws).collect();
    let first = *draws.first().ok_or_else(|| Error::arg("posterior mean of an empty sample set"))?;
    let n = T::from_usize_lossy(draws.len());
    let mean = |f: &dyn Fn(&ModelParams<T>) -> T| draws.iter().map(|p| f(p)).sum::<T>() / n;
    let mut out = ModelParams {
        alpha1: mean(&|p| p.alpha1),
        beta1: mean(&|p| p.beta1),
        alpha2: mean(&|p| p.alpha2),
        beta2: mean(&|p| p.beta2),
        time: first.time.map(|_| TimeParams {
            alpha3: mean(&|p| p.time.map_or(T::zero(), |t| t.alpha3)),
            beta3: mean(&|p| p.time.map_or(T::zero(), |t| t.beta3)),
        }),
        weights: (0..first.weights.len()).map(|k| mean(&|p| p.weights[k])).collect(),
    };
    out.normalize_weights();
    Ok(out)
}

/// Flat `(name, value)` view of a draw, in trace order.
pub fn param_values<T: Scalar>(p: &ModelParams<T>) -> Vec<(String, f64)> {
    let mut v = vec![
        ("alpha1".to_string(), p.alpha1.as_f64()),
        ("beta1".to_string(), p.beta1.as_f64()),
        ("alpha2".to_string(), p.alpha2.as_f64()),
        ("beta2".to_string(), p.beta2.as_f64()),
    ];
    if let Some(tp) = p.time {
        v.push(("alpha3".to_string(), tp.alpha3.as_f64()));
        v.push(("beta3".to_string(), tp.beta3.as_f64()));
    }
    for (k, w) in p.weights.iter().enumerate() {
        v.push((format!("w{}", k + 1), w.as_f64()));
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Posterior mean and equal-tailed 95% interval of every parameter.
pub fn posterior_summary<T: Scalar>(samples: &[PosteriorSamples<T>]) -> Result<Vec<ParamSummary>> {
    let rows: Vec<Vec<(String, f64)>> = samples.iter().flat_map(|s| &s.draws).map(param_values).collect();
    let first = rows.first().ok_or_else(|| Error::arg("summary of an empty sample set"))?;
    Ok((0..first.len())
        .map(|i| {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[i].1).collect();
            vals.sort_by(f64::total_cmp);
            ParamSummary {
                name: first[i].0.clone(),
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                lower: crate::forecast::srot::quantile_sorted(&vals, 0.025),
                upper: crate::forecast::srot::quantile_sorted(&vals, 0.975),
            }
        })
        .collect())
}

/// Trace CSV with columns `chain,sweep,param,value`; sweeps are 1-based and
/// include warm-up. The log likelihood is written as param `loglik`.
pub fn write_trace_csv<T: Scalar, W: Write>(writer: W, samples: &[PosteriorSamples<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chain", "sweep", "param", "value"])?;
    for s in samples {
        let draws = s.warmup_draws.iter().zip(&s.warmup_loglik).chain(s.draws.iter().zip(&s.loglik));
        for (i, (p, ll)) in draws.enumerate() {
            let (chain, sweep) = (s.chain.to_string(), (i + 1).to_string());
            for (name, v) in param_values(p).into_iter().chain([("loglik".to_string(), *ll)]) {
                w.write_record([chain.as_str(), sweep.as_str(), name.as_str(), v.to_string().as_str()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("trace", e))?;
    Ok(())
}
