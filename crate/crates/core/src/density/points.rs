use serde::{Deserialize, Serialize};

use crate::data::{BlockedDataset, EventRecord, TemporalBlock};
use crate::scalar::Scalar;

/// Local coordinate frame: positions are stored as degree offsets from
/// `origin` so `f32` keeps resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin_lon: f64,
    pub origin_lat: f64,
}

impl Frame {
    pub fn new(origin_lon: f64, origin_lat: f64) -> Self {
        Self { origin_lon, origin_lat }
    }

    /// Frame centred on the mean location of `events`.
    pub fn centred_on<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> Self {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for e in events {
            sx += e.lon;
            sy += e.lat;
            n += 1;
        }
        if n == 0 {
            Self::new(0.0, 0.0)
        } else {
            Self::new(sx / n as f64, sy / n as f64)
        }
    }

    #[inline]
    pub fn local<T: Scalar>(&self, lon: f64, lat: f64) -> (T, T) {
        (T::of(lon - self.origin_lon), T::of(lat - self.origin_lat))
    }
}

/// Kernel centres grouped into mixture blocks, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KernelData<T> {
    pub frame: Frame,
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    pub ts: Vec<T>,
    pub ids: Vec<String>,
    /// Block `k` owns points `offsets[k]..offsets[k + 1]`.
    pub offsets: Vec<usize>,
    /// Whether the last block is the expert block.
    pub has_expert: bool,
}

impl<T: Scalar> KernelData<T> {
    pub fn from_blocks(frame: Frame, blocks: &[&[EventRecord]], has_expert: bool) -> Self {
        let n: usize = blocks.iter().map(|b| b.len()).sum();
        let mut data = Self {
            frame,
            xs: Vec::with_capacity(n),
            ys: Vec::with_capacity(n),
            ts: Vec::with_capacity(n),
            ids: Vec::with_capacity(n),
            offsets: vec![0],
            has_expert,
        };
        for block in blocks {
            for e in block.iter() {
                let (x, y) = frame.local(e.lon, e.lat);
                data.xs.push(x);
                data.ys.push(y);
                data.ts.push(T::of(e.time_of_day));
                data.ids.push(e.event_id.clone());
            }
            data.offsets.push(data.xs.len());
        }
        data
    }

    /// Historical blocks (oldest first) plus the expert block if asked for and present.
    pub fn from_dataset(frame: Frame, blocked: &BlockedDataset, include_expert: bool) -> Self {
        let mut blocks: Vec<&[EventRecord]> = blocked.historical.iter().map(|b| b.events.as_slice()).collect();
        let expert = blocked.expert.as_ref().filter(|_| include_expert);
        if let Some(e) = expert {
            blocks.push(e.events.as_slice());
        }
        Self::from_blocks(frame, &blocks, expert.is_some())
    }

    pub fn from_temporal_blocks(frame: Frame, blocks: &[&TemporalBlock], has_expert: bool) -> Self {
        let evs: Vec<&[EventRecord]> = blocks.iter().map(|b| b.events.as_slice()).collect();
        Self::from_blocks(frame, &evs, has_expert)
    }

    pub fn n_points(&self) -> usize {
        self.xs.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn block_len(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Block index of every point.
    pub fn block_of_points(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_points());
        for k in 0..self.n_blocks() {
            out.extend(std::iter::repeat(k).take(self.block_len(k)));
        }
        out
    }
}

/// The training-week events as local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPoints<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    pub ts: Vec<T>,
}

impl<T: Scalar> TrainingPoints<T> {
    pub fn new(frame: Frame, events: &[EventRecord]) -> Self {
        let mut out = Self {
            xs: Vec::with_capacity(events.len()),
            ys: Vec::with_capacity(events.len()),
            ts: Vec::with_capacity(events.len()),
        };
        for e in events {
            let (x, y) = frame.local(e.lon, e.lat);
            out.xs.push(x);
            out.ys.push(y);
            out.ts.push(T::of(e.time_of_day));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}
