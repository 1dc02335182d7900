use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Revisit spacing of the raw acquisition grid.
pub const RAW_STEP_DAYS: u32 = 5;
pub const WEEK_STEP_DAYS: u32 = 7;

/// Uniformly spaced date grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub epoch: NaiveDate,
    pub step_days: u32,
    pub len: usize,
}

impl TimeAxis {
    pub fn new(epoch: NaiveDate, step_days: u32, len: usize) -> Result<Self> {
        if step_days == 0 {
            return Err(Error::Config("time axis step must be at least one day".into()));
        }
        Ok(TimeAxis {
            epoch,
            step_days,
            len,
        })
    }

    /// Weekly axis whose epoch is the Monday of the ISO week containing `start`.
    pub fn weekly_covering(start: NaiveDate, end: NaiveDate) -> Self {
        let epoch = iso_week_monday(start);
        let days = (end - epoch).num_days().max(0) as usize;
        TimeAxis {
            epoch,
            step_days: WEEK_STEP_DAYS,
            len: days / WEEK_STEP_DAYS as usize + 1,
        }
    }

    pub fn index_to_date(&self, index: usize) -> NaiveDate {
        self.epoch + Duration::days(index as i64 * self.step_days as i64)
    }

    pub fn date_to_index(&self, date: NaiveDate) -> Result<usize> {
        let days = (date - self.epoch).num_days();
        if days < 0 || days % self.step_days as i64 != 0 {
            return Err(self.off_grid(date));
        }
        Ok((days / self.step_days as i64) as usize)
    }

    /// Nearest grid index, or `None` if the date lies outside the axis.
    pub fn nearest_index(&self, date: NaiveDate) -> Option<usize> {
        let days = (date - self.epoch).num_days();
        let step = self.step_days as i64;
        let idx = (days + step / 2).div_euclid(step);
        (idx >= 0 && (idx as usize) < self.len).then_some(idx as usize)
    }

    pub fn last_date(&self) -> NaiveDate {
        self.index_to_date(self.len.saturating_sub(1))
    }

    fn off_grid(&self, date: NaiveDate) -> Error {
        Error::GridAlignment {
            date,
            epoch: self.epoch,
            step_days: self.step_days,
        }
    }
}

pub(crate) fn iso_week_monday(date: NaiveDate) -> NaiveDate {
    let offset = date.weekday().num_days_from_monday() as i64;
    let monday = date - Duration::days(offset);
    debug_assert_eq!(monday.weekday(), Weekday::Mon);
    monday
}
