use chrono::NaiveDate;

use crate::data::{BlockRole, BlockedDataset, EventRecord, TimeWindow};
use crate::density::{EvalOptions, KernelData, LocalScales, MixtureDensity, ModelParams};
use crate::error::{Error, Result};
use crate::inference::FittedModel;
use crate::scalar::Scalar;

/// Kernel points, local scales and parameters of the predictive density for
/// one upcoming week.
#[derive(Debug, Clone)]
pub struct ForecastInput<T> {
    pub week_start: Option<NaiveDate>,
    pub data: KernelData<T>,
    pub scales: LocalScales<T>,
    pub params: ModelParams<T>,
    pub eval: EvalOptions,
}

impl<T: Scalar> ForecastInput<T> {
    /// Predictive input from a fit. `blocks.historical` are the weeks before
    /// the forecast week (lag 1 = the week just fitted on) and
    /// `blocks.expert` the intel for the forecast week.
    ///
    /// A forecast block at lag `l` takes the fitted weight of lag `l`. Blocks
    /// that are empty now, or were dropped at fit time, get weight zero; the
    /// remaining weights are renormalised. Local scales are the preliminary
    /// density at the new points over its geometric mean there.
    pub fn from_fit(model: &FittedModel<T>, blocks: &BlockedDataset) -> Result<Self> {
        let fitted = model.params();
        let weight_of = |role: BlockRole| -> T {
            model
                .block_roles
                .iter()
                .position(|&r| r == role)
                .map_or(T::zero(), |k| fitted.weights[k])
        };
        let mut kept: Vec<&[EventRecord]> = Vec::new();
        let mut weights = Vec::new();
        for b in &blocks.historical {
            let w = weight_of(b.role);
            if b.is_empty() || w == T::zero() {
                continue;
            }
            kept.push(&b.events);
            weights.push(w);
        }
        let mut has_expert = false;
        if let Some(e) = blocks.expert.as_ref().filter(|e| !e.is_empty()) {
            if !model.has_expert() {
                return Err(Error::Forecast(
                    "intel supplied but the model was fitted without an expert block".into(),
                ));
            }
            kept.push(&e.events);
            weights.push(weight_of(BlockRole::Expert));
            has_expert = true;
        }
        let total: T = weights.iter().copied().sum();
        if kept.is_empty() || !(total > T::zero()) {
            return Err(Error::Forecast("no non-empty weighted blocks to forecast from".into()));
        }
        for w in &mut weights {
            *w = *w / total;
        }
        let data = KernelData::from_blocks(model.frame, &kept, has_expert);
        let prelim = model.preliminary_density()?;
        let log_f: Vec<T> = (0..data.n_points())
            .map(|i| prelim.log_density_local(data.xs[i], data.ys[i], data.ts[i]))
            .collect();
        let scales = LocalScales::from_log_densities(&log_f, &data.ids)?;
        let params = ModelParams { weights, ..fitted.clone() };
        Ok(Self {
            week_start: blocks.training.start_date,
            data,
            scales,
            params,
            eval: model.config.eval,
        })
    }

    pub fn mixture(&self) -> Result<MixtureDensity<T>> {
        MixtureDensity::adaptive(&self.data, &self.params, &self.scales, self.eval)
    }
}

/// Spatio-temporal predictive density at `(lon, lat, hours)`.
pub fn predictive_density_point<T: Scalar>(input: &ForecastInput<T>, point: (f64, f64, f64)) -> Result<T> {
    Ok(input.mixture()?.density(point.0, point.1, point.2))
}

/// Spatial predictive density within a daily window at one location.
pub fn interval_spatial_density<T: Scalar>(input: &ForecastInput<T>, point: (f64, f64), window: TimeWindow) -> Result<T> {
    let m = input.mixture()?;
    let f = m.window_factors(window);
    if !(f.denominator() > T::zero()) {
        return Err(Error::Forecast(format!("window {window} has zero total kernel mass")));
    }
    Ok(m.log_interval_density(point.0, point.1, &f).exp())
}
