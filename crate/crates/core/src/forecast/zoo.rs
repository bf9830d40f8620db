use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::hotspot::{evaluate_grid, ClassThresholds, HotspotGrid};
use super::predictive::ForecastInput;
use super::srot::{srot_from_columns, SrotBandwidths};
use crate::data::{block_by_week, filter_time_window, BlockedDataset, EventRecord, SpatialGrid, TemporalBlock, TimeWindow, WeekCalendar};
use crate::density::{
    compute_local_scales, preliminary_fixed_kde, EvalOptions, KernelData, LocalScales, ModelParams, TimeParams,
};
use crate::error::{Error, Result};
use crate::inference::{fit, rng::mix, FitConfig, FittedModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthMode {
    BayesAdaptive,
    SrotAbramson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Estimated,
    Equal,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: u8,
    pub history_weeks: usize,
    pub spatial_only: bool,
    pub bandwidth: BandwidthMode,
    pub weights: WeightMode,
}

impl ModelSpec {
    /// The five configurations compared in the results.
    pub fn paper(id: u8) -> Result<Self> {
        use BandwidthMode::*;
        use WeightMode::*;
        let (history_weeks, spatial_only, bandwidth, weights) = match id {
            1 => (1, true, BayesAdaptive, Single),
            2 => (1, false, BayesAdaptive, Single),
            3 => (52, false, SrotAbramson, Equal),
            4 => (52, true, BayesAdaptive, Estimated),
            5 => (52, false, BayesAdaptive, Estimated),
            _ => return Err(Error::arg(format!("unknown model id {id}; expected 1-5"))),
        };
        Ok(Self {
            id,
            history_weeks,
            spatial_only,
            bandwidth,
            weights,
        })
    }

    /// Same model over a different number of multi-week history blocks
    /// (single-week models keep one block).
    pub fn with_history(mut self, weeks: usize) -> Self {
        if self.weights != WeightMode::Single {
            self.history_weeks = weeks;
        }
        self
    }

    pub fn name(&self) -> String {
        format!("model{}", self.id)
    }

    pub fn accepts_intel(&self) -> bool {
        self.bandwidth == BandwidthMode::BayesAdaptive && !self.spatial_only
    }
}

/// Abramson-style adaptive parameters around rule-of-thumb bandwidths: a
/// fixed SROT density with equal block weights gives the local scales, and
/// `alpha = 1 / h_srot`, `beta = 0.5`, so `A = 1` recovers the SROT values.
pub fn abramson_adaptive<T: Scalar>(
    data: &KernelData<T>,
    srot: &SrotBandwidths,
    temporal: bool,
    eval: EvalOptions,
) -> Result<(ModelParams<T>, LocalScales<T>)> {
    let weights = ModelParams::uniform_weights(data.n_blocks());
    let mut params = ModelParams::fixed(
        T::of(1.0 / srot.h1),
        T::of(1.0 / srot.h2),
        temporal.then(|| T::of(1.0 / srot.h3)),
        weights,
    );
    let prelim = preliminary_fixed_kde(data, &params, eval)?;
    let scales = compute_local_scales(data, &prelim)?;
    let half = T::of(0.5);
    params.beta1 = half;
    params.beta2 = half;
    params.time = params.time.map(|tp| TimeParams { beta3: half, ..tp });
    Ok((params, scales))
}

/// Rule-of-thumb bandwidths over all points of `data`.
pub fn srot_of<T: Scalar>(data: &KernelData<T>) -> Result<SrotBandwidths> {
    let xs: Vec<f64> = data.xs.iter().map(|v| v.as_f64()).collect();
    let ys: Vec<f64> = data.ys.iter().map(|v| v.as_f64()).collect();
    let ang: Vec<f64> = data.ts.iter().map(|v| v.as_f64() * std::f64::consts::TAU / 24.0).collect();
    srot_from_columns(&xs, &ys, &ang)
}

/// Event source, calendar and output grid shared by model runs.
#[derive(Debug, Clone)]
pub struct ZooContext<'a> {
    pub events: &'a [EventRecord],
    pub calendar: WeekCalendar,
    pub coverage_start: NaiveDate,
    pub grid: &'a SpatialGrid,
    pub fit: FitConfig,
    pub thresholds: ClassThresholds,
}

/// Intel blocks: `fit` accompanies the training week, `forecast` the week
/// being predicted.
#[derive(Debug, Clone, Default)]
pub struct ExpertInput {
    pub fit: Option<TemporalBlock>,
    pub forecast: Option<TemporalBlock>,
}

/// Fitted state of one model for one forecast week. Spatial-only models
/// hold one fit per window; the SROT model needs no fit.
#[derive(Debug, Clone)]
pub struct ModelFit<T> {
    pub spec: ModelSpec,
    pub forecast_week: NaiveDate,
    pub fits: Vec<(TimeWindow, FittedModel<T>)>,
}

fn window_filter(b: &BlockedDataset, w: TimeWindow) -> BlockedDataset {
    b.map_events(|evs| filter_time_window(evs, w))
}

fn seed_for(base: u64, week: NaiveDate, window: TimeWindow) -> u64 {
    mix(&[base, week.num_days_from_ce() as u64, window.start().to_bits(), window.end().to_bits()])
}

impl<'a> ZooContext<'a> {
    pub fn forecast_blocks(&self, spec: &ModelSpec, forecast_week: NaiveDate) -> Result<BlockedDataset> {
        block_by_week(self.events, self.calendar, self.coverage_start, spec.history_weeks, forecast_week)
    }

    pub fn training_blocks(&self, spec: &ModelSpec, forecast_week: NaiveDate) -> Result<BlockedDataset> {
        let training = self.calendar.shift(forecast_week, -1);
        block_by_week(self.events, self.calendar, self.coverage_start, spec.history_weeks, training)
    }

    fn fit_config(&self, spec: &ModelSpec, seed: u64) -> FitConfig {
        let mut c = self.fit.clone();
        c.temporal = !spec.spatial_only;
        c.gibbs.estimate_weights = spec.weights == WeightMode::Estimated;
        if let Some(p) = c.preliminary.as_mut() {
            p.estimate_weights = c.gibbs.estimate_weights;
        }
        c.seed = seed;
        c
    }

    /// Fit `spec` for the week starting `forecast_week` (training on the
    /// week before it).
    pub fn fit_model<T: Scalar>(
        &self,
        spec: &ModelSpec,
        forecast_week: NaiveDate,
        windows: &[TimeWindow],
        expert: Option<&ExpertInput>,
    ) -> Result<ModelFit<T>> {
        if expert.is_some_and(|e| e.fit.is_some() || e.forecast.is_some()) && !spec.accepts_intel() {
            return Err(Error::arg(format!("{} does not take expert input", spec.name())));
        }
        let mut fits = Vec::new();
        if spec.bandwidth == BandwidthMode::BayesAdaptive {
            let blocks = self
                .training_blocks(spec, forecast_week)?
                .with_expert(expert.and_then(|e| e.fit.clone()));
            if spec.spatial_only {
                for &w in windows {
                    let cfg = self.fit_config(spec, seed_for(self.fit.seed, forecast_week, w));
                    fits.push((w, fit(&window_filter(&blocks, w), &cfg)?));
                }
            } else {
                let cfg = self.fit_config(spec, seed_for(self.fit.seed, forecast_week, TimeWindow::FULL_DAY));
                fits.push((TimeWindow::FULL_DAY, fit(&blocks, &cfg)?));
            }
        }
        Ok(ModelFit {
            spec: *spec,
            forecast_week,
            fits,
        })
    }

    /// Hotspot maps for `windows` of `forecast_week` from a fit.
    pub fn forecast<T: Scalar>(
        &self,
        model: &ModelFit<T>,
        forecast_week: NaiveDate,
        windows: &[TimeWindow],
        expert: Option<&ExpertInput>,
    ) -> Result<Vec<HotspotGrid>> {
        let spec = &model.spec;
        let blocks = self
            .forecast_blocks(spec, forecast_week)?
            .with_expert(expert.and_then(|e| e.forecast.clone()));
        let name = spec.name();
        let week = Some(forecast_week);
        let mut out = Vec::with_capacity(windows.len());
        match spec.bandwidth {
            BandwidthMode::SrotAbramson => {
                let mut b = blocks;
                b.drop_empty_history();
                let data = KernelData::<T>::from_dataset(crate::density::Frame::centred_on(b.historical.iter().flat_map(|x| &x.events)), &b, false);
                let srot = srot_of(&data)?;
                let (params, scales) = abramson_adaptive(&data, &srot, !spec.spatial_only, self.fit.eval)?;
                let input = ForecastInput {
                    week_start: week,
                    data,
                    scales,
                    params,
                    eval: self.fit.eval,
                };
                let m = input.mixture()?;
                for &w in windows {
                    out.push(evaluate_grid(&m, self.grid, w, week, &name, self.thresholds)?);
                }
            }
            BandwidthMode::BayesAdaptive if spec.spatial_only => {
                for &w in windows {
                    let (_, f) = model
                        .fits
                        .iter()
                        .find(|(fw, _)| *fw == w)
                        .ok_or_else(|| Error::Forecast(format!("{name} was not fitted for window {w}")))?;
                    let input = ForecastInput::from_fit(f, &window_filter(&blocks, w))?;
                    out.push(evaluate_grid(&input.mixture()?, self.grid, w, week, &name, self.thresholds)?);
                }
            }
            BandwidthMode::BayesAdaptive => {
                let (_, f) = model
                    .fits
                    .first()
                    .ok_or_else(|| Error::Forecast(format!("{name} has no fit")))?;
                let m = ForecastInput::from_fit(f, &blocks)?.mixture()?;
                for &w in windows {
                    out.push(evaluate_grid(&m, self.grid, w, week, &name, self.thresholds)?);
                }
            }
        }
        Ok(out)
    }

    /// Fit then forecast.
    pub fn run_model<T: Scalar>(
        &self,
        spec: &ModelSpec,
        forecast_week: NaiveDate,
        windows: &[TimeWindow],
        expert: Option<&ExpertInput>,
    ) -> Result<Vec<HotspotGrid>> {
        let m = self.fit_model::<T>(spec, forecast_week, windows, expert)?;
        self.forecast(&m, forecast_week, windows, expert)
    }
}

/// Fit-and-forecast for one model, week and set of windows.
pub fn run_model<T: Scalar>(
    spec: &ModelSpec,
    ctx: &ZooContext<'_>,
    forecast_week: NaiveDate,
    windows: &[TimeWindow],
    expert: Option<&ExpertInput>,
) -> Result<Vec<HotspotGrid>> {
    ctx.run_model::<T>(spec, forecast_week, windows, expert)
}
