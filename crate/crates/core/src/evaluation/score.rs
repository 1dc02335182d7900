use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::PixelId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    /// Anomaly window in weeks before defoliation.
    pub anomaly_window: u32,
    /// Lag (weeks after defoliation) at which the score crosses zero.
    pub zero_lag: f64,
    pub tn_reward: f64,
    pub early_threshold: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            anomaly_window: 52,
            zero_lag: 2.0,
            tn_reward: 0.5,
            early_threshold: 0.17,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.anomaly_window == 0 {
            return Err(Error::Config("anomaly window must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tn_reward) {
            return Err(Error::Config("true-negative reward must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn half_span(&self) -> f64 {
        (f64::from(self.anomaly_window) + 2.0) / 3.0
    }

    /// Latest lag still counted as a true positive; the score is -1 there.
    pub fn latest_lag(&self) -> f64 {
        self.zero_lag + self.half_span()
    }
}

/// Pre-defoliation score: 1 for detections at least a third of the window
/// early, falling linearly through 0 at `zero_lag` to -1.
pub fn pd_score(lag: f64, cfg: &ScoreConfig) -> f64 {
    ((cfg.zero_lag - lag) / cfg.half_span()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    TP,
    FP,
    FN,
    TN,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Class::TP => "TP",
            Class::FP => "FP",
            Class::FN => "FN",
            Class::TN => "TN",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub pixel: PixelId,
    pub first_anomaly_week: Option<usize>,
    pub defoliation_week: Option<usize>,
    pub lag: Option<i64>,
    pub class: Class,
    /// `None` for false negatives.
    pub pd_score: Option<f64>,
}

/// Classifies a pixel from its first flagged week and its defoliation week.
pub fn classify(
    pixel: PixelId,
    first_anomaly: Option<usize>,
    defoliation: Option<usize>,
    cfg: &ScoreConfig,
) -> DetectionRecord {
    let lag = match (first_anomaly, defoliation) {
        (Some(a), Some(d)) => Some(a as i64 - d as i64),
        _ => None,
    };
    let (class, score) = match (first_anomaly, defoliation, lag) {
        (None, None, _) => (Class::TN, Some(cfg.tn_reward)),
        (Some(_), None, _) => (Class::FP, Some(-1.0)),
        (None, Some(_), _) => (Class::FN, None),
        (Some(_), Some(_), Some(lag)) => {
            let l = lag as f64;
            if l < -f64::from(cfg.anomaly_window) || l > cfg.latest_lag() {
                (Class::FP, Some(-1.0))
            } else {
                (Class::TP, Some(pd_score(l, cfg)))
            }
        }
        (Some(_), Some(_), None) => unreachable!("lag set when both weeks exist"),
    };
    DetectionRecord {
        pixel,
        first_anomaly_week: first_anomaly,
        defoliation_week: defoliation,
        lag,
        class,
        pd_score: score,
    }
}
