use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::score::{Class, DetectionRecord, ScoreConfig};
use crate::domain::PixelId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub total: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    /// Mean score over every scored record (TP, FP and TN).
    pub mean_pds: Option<f64>,
    /// Mean score over detections only (TP and FP).
    pub mean_pds_detections: Option<f64>,
    /// Share of true positives scoring above `early_threshold`.
    pub pds_early_fraction: Option<f64>,
    pub early_threshold: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean<'a>(values: impl Iterator<Item = &'a f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(records: &[DetectionRecord], cfg: &ScoreConfig) -> Result<EvaluationReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("detection records"));
    }
    let count = |c: Class| records.iter().filter(|r| r.class == c).count();
    let (tp, fp, fn_, tn) = (count(Class::TP), count(Class::FP), count(Class::FN), count(Class::TN));
    let total = records.len();
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let scores_where =
        |keep: fn(Class) -> bool| records.iter().filter(move |r| keep(r.class)).filter_map(|r| r.pd_score.as_ref());
    let tp_scores: Vec<f64> = scores_where(|c| c == Class::TP).copied().collect();
    let early = tp_scores.iter().filter(|&&s| s > cfg.early_threshold).count();
    Ok(EvaluationReport {
        tp,
        fp,
        fn_,
        tn,
        total,
        precision,
        recall,
        accuracy: ratio(tp + tn, total),
        f1,
        mean_pds: mean(scores_where(|_| true)),
        mean_pds_detections: mean(scores_where(|c| matches!(c, Class::TP | Class::FP))),
        pds_early_fraction: ratio(early, tp_scores.len()),
        early_threshold: cfg.early_threshold,
    })
}

pub const RECORDS_HEADER: [&str; 7] = [
    "pixel_x",
    "pixel_y",
    "class",
    "first_anomaly_week",
    "defoliation_week",
    "lag",
    "pd_score",
];

#[derive(Serialize, Deserialize)]
struct RecordRow {
    pixel_x: i64,
    pixel_y: i64,
    class: Class,
    first_anomaly_week: Option<usize>,
    defoliation_week: Option<usize>,
    lag: Option<i64>,
    pd_score: Option<f64>,
}

/// One row per pixel with the columns of [`RECORDS_HEADER`]; absent values are empty.
pub fn write_records_csv<W: Write>(records: &[DetectionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RecordRow {
            pixel_x: r.pixel.x,
            pixel_y: r.pixel.y,
            class: r.class,
            first_anomaly_week: r.first_anomaly_week,
            defoliation_week: r.defoliation_week,
            lag: r.lag,
            pd_score: r.pd_score,
        })?;
    }
    if records.is_empty() {
        w.write_record(RECORDS_HEADER)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records_csv<R: Read>(source: R) -> Result<Vec<DetectionRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names != RECORDS_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, found {}", RECORDS_HEADER.join(","), names.join(",")),
        });
    }
    reader
        .deserialize()
        .map(|row| {
            let r: RecordRow = row?;
            Ok(DetectionRecord {
                pixel: PixelId::new(r.pixel_x, r.pixel_y),
                first_anomaly_week: r.first_anomaly_week,
                defoliation_week: r.defoliation_week,
                lag: r.lag,
                class: r.class,
                pd_score: r.pd_score,
            })
        })
        .collect()
}

pub fn report_json(report: &EvaluationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}
