use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::EventRecord;
use crate::error::{Error, Result};

/// Which role a block plays in the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRole {
    /// Historical block; `lag` = weeks before the reference (training or forecast) week.
    History { lag: usize },
    Training,
    Expert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalBlock {
    pub role: BlockRole,
    /// `None` for the expert block, whose pseudo-events carry no date.
    pub start_date: Option<NaiveDate>,
    pub events: Vec<EventRecord>,
}

impl TemporalBlock {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Week boundaries. Weeks start on `week_start` (Sunday by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekCalendar {
    pub week_start: Weekday,
    pub block_days: i64,
}

impl Default for WeekCalendar {
    fn default() -> Self {
        Self {
            week_start: Weekday::Sun,
            block_days: 7,
        }
    }
}

impl WeekCalendar {
    /// Start of the block containing `date`.
    pub fn block_start(&self, date: NaiveDate) -> NaiveDate {
        if self.block_days == 7 {
            let back = (7 + date.weekday().num_days_from_sunday() as i64
                - self.week_start.num_days_from_sunday() as i64)
                % 7;
            date - Duration::days(back)
        } else {
            // Non-weekly blocks are aligned to the Unix epoch.
            let epoch = NaiveDate::from_ymd_opt(1970, 1, 4).unwrap_or_default();
            let days = (date - epoch).num_days();
            epoch + Duration::days(days.div_euclid(self.block_days) * self.block_days)
        }
    }

    pub fn is_aligned(&self, date: NaiveDate) -> bool {
        self.block_start(date) == date
    }

    pub fn shift(&self, start: NaiveDate, blocks: i64) -> NaiveDate {
        start + Duration::days(blocks * self.block_days)
    }
}

/// Events organised into `B` historical blocks, a training block, and an
/// optional expert block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockedDataset {
    pub calendar: WeekCalendar,
    /// Oldest first: index 0 has lag `B`, the last has lag 1.
    pub historical: Vec<TemporalBlock>,
    pub training: TemporalBlock,
    pub expert: Option<TemporalBlock>,
}

impl BlockedDataset {
    pub fn history_len(&self) -> usize {
        self.historical.len()
    }

    pub fn training_start(&self) -> Option<NaiveDate> {
        self.training.start_date
    }

    pub fn with_expert(mut self, expert: Option<TemporalBlock>) -> Self {
        self.expert = expert.filter(|b| !b.is_empty());
        self
    }

    /// Drop empty historical blocks; returns the start dates of the dropped ones.
    pub fn drop_empty_history(&mut self) -> Vec<NaiveDate> {
        let mut dropped = Vec::new();
        self.historical.retain(|b| {
            if b.is_empty() {
                dropped.extend(b.start_date);
                false
            } else {
                true
            }
        });
        dropped
    }

    /// Apply `f` to every block's events (history, training and expert).
    pub fn map_events(&self, f: impl Fn(&[EventRecord]) -> Vec<EventRecord>) -> Self {
        let map = |b: &TemporalBlock| TemporalBlock {
            role: b.role,
            start_date: b.start_date,
            events: f(&b.events),
        };
        Self {
            calendar: self.calendar,
            historical: self.historical.iter().map(map).collect(),
            training: map(&self.training),
            expert: self.expert.as_ref().map(map),
        }
    }
}

/// Partition `events` into `history_blocks` consecutive weeks preceding the
/// training week starting at `training_week_start`, plus the training week
/// itself. `coverage_start` is the first date the data covers.
pub fn block_by_week(
    events: &[EventRecord],
    calendar: WeekCalendar,
    coverage_start: NaiveDate,
    history_blocks: usize,
    training_week_start: NaiveDate,
) -> Result<BlockedDataset> {
    if history_blocks == 0 {
        return Err(Error::arg("need at least one historical block"));
    }
    if !calendar.is_aligned(training_week_start) {
        return Err(Error::arg(format!(
            "training week {training_week_start} does not start on a {:?}",
            calendar.week_start
        )));
    }
    let history_start = calendar.shift(training_week_start, -(history_blocks as i64));
    if history_start < calendar.block_start(coverage_start) {
        return Err(Error::arg(format!(
            "training week {training_week_start} needs history from {history_start}, data starts {coverage_start}"
        )));
    }
    let mut historical: Vec<TemporalBlock> = (0..history_blocks)
        .map(|i| TemporalBlock {
            role: BlockRole::History { lag: history_blocks - i },
            start_date: Some(calendar.shift(history_start, i as i64)),
            events: Vec::new(),
        })
        .collect();
    let mut training = TemporalBlock {
        role: BlockRole::Training,
        start_date: Some(training_week_start),
        events: Vec::new(),
    };
    let training_end = calendar.shift(training_week_start, 1);
    for e in events {
        if e.date < history_start || e.date >= training_end {
            continue;
        }
        if e.date >= training_week_start {
            training.events.push(e.clone());
        } else {
            let idx = (e.date - history_start).num_days() / calendar.block_days;
            historical[idx as usize].events.push(e.clone());
        }
    }
    Ok(BlockedDataset {
        calendar,
        historical,
        training,
        expert: None,
    })
}

/// Events in the block starting at `start`.
pub fn events_in_block(events: &[EventRecord], calendar: WeekCalendar, start: NaiveDate) -> Vec<EventRecord> {
    let end = calendar.shift(start, 1);
    events
        .iter()
        .filter(|e| e.date >= start && e.date < end)
        .cloned()
        .collect()
}
