use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open daily time interval `[t1, t2)` in hours. Serialised as `"20-24"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeWindow {
    t1: f64,
    t2: f64,
}

impl TimeWindow {
    pub const FULL_DAY: TimeWindow = TimeWindow { t1: 0.0, t2: 24.0 };

    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite()) || t1 < 0.0 || t2 > 24.0 || t1 >= t2 {
            return Err(Error::arg(format!("invalid time window [{t1}, {t2})")));
        }
        Ok(Self { t1, t2 })
    }

    /// The six 4-hour windows that partition the day.
    pub fn canonical() -> [TimeWindow; 6] {
        [0.0, 4.0, 8.0, 12.0, 16.0, 20.0].map(|s| TimeWindow { t1: s, t2: s + 4.0 })
    }

    pub fn start(&self) -> f64 {
        self.t1
    }

    pub fn end(&self) -> f64 {
        self.t2
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t1 + self.t2)
    }

    pub fn is_full_day(&self) -> bool {
        self.t1 == 0.0 && self.t2 == 24.0
    }

    pub fn is_canonical(&self) -> bool {
        Self::canonical().contains(self)
    }

    #[inline]
    pub fn contains(&self, hours: f64) -> bool {
        hours >= self.t1 && hours < self.t2
    }

    /// Compact label such as `20-24`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.t1, self.t2)
    }
}

impl FromStr for TimeWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::arg(format!("time window `{s}` must look like 20-24")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::arg(format!("bad hour `{v}` in window `{s}`")))
        };
        TimeWindow::new(parse(a)?, parse(b)?)
    }
}

impl TryFrom<String> for TimeWindow {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TimeWindow> for String {
    fn from(w: TimeWindow) -> String {
        w.to_string()
    }
}

/// Events whose time of day falls in `window`.
pub fn filter_time_window<'a, I>(events: I, window: TimeWindow) -> Vec<super::EventRecord>
where
    I: IntoIterator<Item = &'a super::EventRecord>,
{
    events
        .into_iter()
        .filter(|e| window.contains(e.time_of_day))
        .cloned()
        .collect()
}
