use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::chain::{posterior_mean, run_chains, GibbsConfig, PosteriorSamples};
use super::problem::GibbsData;
use super::rng::mix;
use crate::data::{BlockRole, BlockedDataset, EventRecord};
use crate::density::{
    compute_local_scales, preliminary_fixed_kde, EvalOptions, Frame, KernelData, LocalScales, MixtureDensity,
    ModelParams, TrainingPoints,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub gibbs: GibbsConfig,
    /// Sampler settings for the fixed-bandwidth stage; `None` reuses `gibbs`.
    pub preliminary: Option<GibbsConfig>,
    /// Include the time-of-day kernel (off for the spatial-only model).
    pub temporal: bool,
    pub eval: EvalOptions,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gibbs: GibbsConfig::default(),
            preliminary: None,
            temporal: true,
            eval: EvalOptions::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StageResult<T> {
    pub samples: Vec<PosteriorSamples<T>>,
    pub mean: ModelParams<T>,
}

/// Both estimation stages and everything needed to forecast from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedModel<T> {
    pub version: u32,
    pub config: FitConfig,
    pub frame: Frame,
    /// Kernel points of the retained blocks (history oldest first, then expert).
    pub data: KernelData<T>,
    /// Per kernel block: its role and start date.
    pub block_roles: Vec<BlockRole>,
    pub block_dates: Vec<Option<NaiveDate>>,
    pub dropped_blocks: Vec<NaiveDate>,
    pub training_start: Option<NaiveDate>,
    pub n_training: usize,
    pub preliminary: StageResult<T>,
    pub scales: LocalScales<T>,
    pub main: StageResult<T>,
    pub data_digest: String,
    pub seed: u64,
}

impl<T: Scalar> FittedModel<T> {
    pub fn params(&self) -> &ModelParams<T> {
        &self.main.mean
    }

    pub fn is_temporal(&self) -> bool {
        self.config.temporal
    }

    pub fn has_expert(&self) -> bool {
        self.data.has_expert
    }

    /// The fixed-bandwidth density used to derive local scales.
    pub fn preliminary_density(&self) -> Result<MixtureDensity<T>> {
        preliminary_fixed_kde(&self.data, &self.preliminary.mean, self.config.eval)
    }

    /// The fitted adaptive density over the fit-time blocks.
    pub fn density(&self) -> Result<MixtureDensity<T>> {
        MixtureDensity::adaptive(&self.data, &self.main.mean, &self.scales, self.config.eval)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let m: Self = serde_json::from_reader(r)?;
        if m.version != ARTIFACT_VERSION {
            return Err(Error::arg(format!(
                "model artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }
}

/// SHA-256 over every event of every block, in block order.
pub fn data_digest(blocked: &BlockedDataset) -> String {
    let mut h = Sha256::new();
    let mut feed = |tag: &str, evs: &[EventRecord]| {
        h.update(tag.as_bytes());
        for e in evs {
            h.update(format!("{}|{}|{:.9}|{:.9}|{:.9}\n", e.event_id, e.date, e.time_of_day, e.lon, e.lat).as_bytes());
        }
    };
    for b in &blocked.historical {
        feed("H", &b.events);
    }
    feed("T", &blocked.training.events);
    if let Some(e) = &blocked.expert {
        feed("E", &e.events);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Two-stage estimation: a fixed-bandwidth fit (all `A = 1`) gives the
/// preliminary density, whose values at the kernel points set the local
/// scales for the adaptive fit. Empty historical blocks are dropped first.
pub fn fit<T: Scalar>(blocked: &BlockedDataset, config: &FitConfig) -> Result<FittedModel<T>> {
    let mut blocked = blocked.clone();
    let dropped_blocks = blocked.drop_empty_history();
    if blocked.historical.is_empty() {
        return Err(Error::Fit("every historical block is empty".into()));
    }
    if blocked.training.is_empty() {
        return Err(Error::Fit("training block has no events".into()));
    }
    let frame = Frame::centred_on(
        blocked
            .historical
            .iter()
            .flat_map(|b| &b.events)
            .chain(&blocked.training.events),
    );
    let data = KernelData::<T>::from_dataset(frame, &blocked, true);
    let train = TrainingPoints::new(frame, &blocked.training.events);
    let mut block_roles: Vec<BlockRole> = blocked.historical.iter().map(|b| b.role).collect();
    let mut block_dates: Vec<Option<NaiveDate>> = blocked.historical.iter().map(|b| b.start_date).collect();
    if let Some(e) = &blocked.expert {
        block_roles.push(BlockRole::Expert);
        block_dates.push(e.start_date);
    }

    let pre_cfg = config.preliminary.as_ref().unwrap_or(&config.gibbs);
    let ones = LocalScales::ones(data.n_points());
    let pre_data = GibbsData::new(&data, &ones, &train, config.temporal)?;
    let pre_samples = run_chains(&pre_data, pre_cfg, mix(&[config.seed, 1]))?;
    let pre_mean = posterior_mean(&pre_samples)?;
    let prelim = preliminary_fixed_kde(&data, &pre_mean, config.eval)?;
    let scales = compute_local_scales(&data, &prelim)?;

    let main_data = GibbsData::new(&data, &scales, &train, config.temporal)?;
    let samples = run_chains(&main_data, &config.gibbs, mix(&[config.seed, 2]))?;
    let mean = posterior_mean(&samples)?;

    Ok(FittedModel {
        version: ARTIFACT_VERSION,
        config: config.clone(),
        frame,
        data,
        block_roles,
        block_dates,
        dropped_blocks,
        training_start: blocked.training.start_date,
        n_training: train.len(),
        preliminary: StageResult {
            samples: pre_samples,
            mean: pre_mean,
        },
        scales,
        main: StageResult { samples, mean },
        data_digest: data_digest(&blocked),
        seed: config.seed,
    })
}
