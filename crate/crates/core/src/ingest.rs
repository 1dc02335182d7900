//! Raw per-pixel observations with scene-classification labels.
//!
//! Input rows follow the header
//! `pixel_x,pixel_y,date,B2,B3,B4,B5,B6,B7,B8,B11,B12,SCL` (CSV) or use the
//! same names as object keys (NDJSON, one object per line).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{BandId, PixelId, PixelSeries, TimeAxis, BAND_COUNT, RAW_STEP_DAYS};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "pixel_x", "pixel_y", "date", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B11", "B12", "SCL",
];

/// Scene classification codes of the L2A product.
pub mod scl {
    pub const NO_DATA: u8 = 0;
    pub const SATURATED: u8 = 1;
    pub const DARK_AREA: u8 = 2;
    pub const CLOUD_SHADOW: u8 = 3;
    pub const VEGETATION: u8 = 4;
    pub const NOT_VEGETATED: u8 = 5;
    pub const WATER: u8 = 6;
    pub const UNCLASSIFIED: u8 = 7;
    pub const CLOUD_MEDIUM: u8 = 8;
    pub const CLOUD_HIGH: u8 = 9;
    pub const THIN_CIRRUS: u8 = 10;
    pub const SNOW: u8 = 11;

    /// Lower is a more trustworthy surface observation.
    pub fn cloud_risk(code: u8) -> u8 {
        match code {
            VEGETATION => 0,
            NOT_VEGETATED => 1,
            WATER => 2,
            UNCLASSIFIED => 3,
            DARK_AREA => 4,
            SNOW => 5,
            CLOUD_SHADOW => 6,
            THIN_CIRRUS => 7,
            CLOUD_MEDIUM => 8,
            CLOUD_HIGH => 9,
            SATURATED => 10,
            _ => 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObservation {
    pub pixel: PixelId,
    pub date: NaiveDate,
    pub bands: [f64; BAND_COUNT],
    pub scl: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SclPolicy {
    keep: BTreeSet<u8>,
}

impl SclPolicy {
    pub fn new(keep: impl IntoIterator<Item = u8>) -> Result<Self> {
        let keep: BTreeSet<u8> = keep.into_iter().collect();
        if keep.is_empty() {
            return Err(Error::Config("SCL keep set must not be empty".into()));
        }
        if let Some(bad) = keep.iter().find(|&&c| c > 11) {
            return Err(Error::Config(format!("SCL code {bad} outside 0..=11")));
        }
        Ok(SclPolicy { keep })
    }

    pub fn keeps(&self, code: u8) -> bool {
        self.keep.contains(&code)
    }

    pub fn classes(&self) -> impl Iterator<Item = u8> + '_ {
        self.keep.iter().copied()
    }
}

impl Default for SclPolicy {
    fn default() -> Self {
        SclPolicy {
            keep: [scl::VEGETATION, scl::NOT_VEGETATED].into_iter().collect(),
        }
    }
}

/// Reads the CSV schema. Line numbers in errors are 1-based and count the header.
pub fn read_observations_csv<R: Read>(source: R) -> Result<Vec<RawObservation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, found {}", CSV_HEADER.join(","), names.join(",")),
        });
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        let obs = parse_fields(&fields, line)?;
        push_unique(&mut out, &mut seen, obs, line)?;
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    pixel_x: i64,
    pixel_y: i64,
    date: NaiveDate,
    #[serde(rename = "B2")]
    b2: f64,
    #[serde(rename = "B3")]
    b3: f64,
    #[serde(rename = "B4")]
    b4: f64,
    #[serde(rename = "B5")]
    b5: f64,
    #[serde(rename = "B6")]
    b6: f64,
    #[serde(rename = "B7")]
    b7: f64,
    #[serde(rename = "B8")]
    b8: f64,
    #[serde(rename = "B11")]
    b11: f64,
    #[serde(rename = "B12")]
    b12: f64,
    #[serde(rename = "SCL")]
    scl: u8,
}

pub fn read_observations_ndjson<R: BufRead>(source: R) -> Result<Vec<RawObservation>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let obs = RawObservation {
            pixel: PixelId::new(row.pixel_x, row.pixel_y),
            date: row.date,
            bands: [
                row.b2, row.b3, row.b4, row.b5, row.b6, row.b7, row.b8, row.b11, row.b12,
            ],
            scl: row.scl,
        };
        check_scl(obs.scl, line_no)?;
        push_unique(&mut out, &mut seen, obs, line_no)?;
    }
    Ok(out)
}

fn parse_fields(fields: &[&str], line: u64) -> Result<RawObservation> {
    let err = |message: String| Error::Parse { line, message };
    if fields.len() != CSV_HEADER.len() {
        return Err(err(format!(
            "expected {} columns, found {}",
            CSV_HEADER.len(),
            fields.len()
        )));
    }
    let int = |i: usize| -> Result<i64> {
        fields[i]
            .parse()
            .map_err(|_| err(format!("{}: invalid integer '{}'", CSV_HEADER[i], fields[i])))
    };
    let x = int(0)?;
    let y = int(1)?;
    let date = NaiveDate::parse_from_str(fields[2], "%Y-%m-%d")
        .map_err(|_| err(format!("date: invalid ISO-8601 date '{}'", fields[2])))?;
    let mut bands = [0.0; BAND_COUNT];
    for (b, slot) in bands.iter_mut().enumerate() {
        let raw = fields[3 + b];
        *slot = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(format!("{}: invalid reflectance '{raw}'", BandId::ALL[b])))?;
    }
    let scl: u8 = fields[12]
        .parse()
        .map_err(|_| err(format!("SCL: invalid class code '{}'", fields[12])))?;
    check_scl(scl, line)?;
    Ok(RawObservation {
        pixel: PixelId::new(x, y),
        date,
        bands,
        scl,
    })
}

fn check_scl(code: u8, line: u64) -> Result<()> {
    if code > 11 {
        return Err(Error::Parse {
            line,
            message: format!("SCL code {code} outside 0..=11"),
        });
    }
    Ok(())
}

fn push_unique(
    out: &mut Vec<RawObservation>,
    seen: &mut HashSet<(PixelId, NaiveDate)>,
    obs: RawObservation,
    line: u64,
) -> Result<()> {
    if !seen.insert((obs.pixel, obs.date)) {
        return Err(Error::Integrity(format!(
            "duplicate observation for pixel ({}, {}) on {} at line {line}",
            obs.pixel.x, obs.pixel.y, obs.date
        )));
    }
    out.push(obs);
    Ok(())
}

/// Writes observations in the CSV layout accepted by [`read_observations_csv`].
pub fn write_observations_csv<W: Write>(obs: &[RawObservation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for o in obs {
        let mut row = Vec::with_capacity(CSV_HEADER.len());
        row.push(o.pixel.x.to_string());
        row.push(o.pixel.y.to_string());
        row.push(o.date.to_string());
        row.extend(o.bands.iter().map(|v| v.to_string()));
        row.push(o.scl.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Splits a scene into per-pixel observation lists, ordered by pixel.
pub fn group_by_pixel(obs: Vec<RawObservation>) -> BTreeMap<PixelId, Vec<RawObservation>> {
    let mut groups: BTreeMap<PixelId, Vec<RawObservation>> = BTreeMap::new();
    for o in obs {
        groups.entry(o.pixel).or_default().push(o);
    }
    groups
}

/// 5-day axis starting at the earliest observation and covering the latest.
pub fn raw_axis_for(obs: &[RawObservation]) -> Result<TimeAxis> {
    let first = obs.iter().map(|o| o.date).min().ok_or(Error::EmptyInput("observations"))?;
    let last = obs.iter().map(|o| o.date).max().unwrap_or(first);
    let span = (last - first).num_days() as u32;
    let len = (span + RAW_STEP_DAYS / 2) / RAW_STEP_DAYS + 1;
    TimeAxis::new(first, RAW_STEP_DAYS, len as usize)
}

/// Builds the masked raw series of one pixel on an axis spanning its observations.
pub fn apply_scl_filter(obs: &[RawObservation], policy: &SclPolicy) -> Result<PixelSeries> {
    let axis = raw_axis_for(obs)?;
    apply_scl_filter_on(obs, policy, axis)
}

/// Builds the masked raw series of one pixel on a given axis. Off-grid dates
/// snap to the nearest grid date; on collision the observation with the lower
/// cloud risk wins, then the one closer to the grid date. Observations outside
/// the axis are dropped.
pub fn apply_scl_filter_on(
    obs: &[RawObservation],
    policy: &SclPolicy,
    axis: TimeAxis,
) -> Result<PixelSeries> {
    let pixel = obs.first().ok_or(Error::EmptyInput("observations"))?.pixel;
    if let Some(other) = obs.iter().find(|o| o.pixel != pixel) {
        return Err(Error::Integrity(format!(
            "observations mix pixels ({}, {}) and ({}, {})",
            pixel.x, pixel.y, other.pixel.x, other.pixel.y
        )));
    }

    // (cloud risk, distance to grid date) of the observation occupying each slot
    let mut occupant: Vec<Option<(u8, i64)>> = vec![None; axis.len];
    let mut values = vec![[0.0; BAND_COUNT]; axis.len];
    let mut valid = vec![false; axis.len];

    for o in obs {
        let Some(idx) = axis.nearest_index(o.date) else {
            continue;
        };
        let distance = (o.date - axis.index_to_date(idx)).num_days().abs();
        let key = (scl::cloud_risk(o.scl), distance);
        if occupant[idx].is_some_and(|current| current <= key) {
            continue;
        }
        occupant[idx] = Some(key);
        values[idx] = o.bands;
        valid[idx] = policy.keeps(o.scl);
    }

    PixelSeries::new(pixel, axis, values, valid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "pixel_x,pixel_y,date,B2,B3,B4,B5,B6,B7,B8,B11,B12,SCL\n";

    fn row(x: i64, date: &str, scl: u8) -> String {
        format!("{x},0,{date},0.02,0.04,0.03,0.07,0.2,0.28,0.33,0.14,0.06,{scl}\n")
    }

    fn obs(date: &str, scl: u8, nir: f64) -> RawObservation {
        let mut bands = [0.05; BAND_COUNT];
        bands[BandId::B8.index()] = nir;
        RawObservation {
            pixel: PixelId::new(0, 0),
            date: date.parse().unwrap(),
            bands,
            scl,
        }
    }

    #[test]
    fn reads_three_rows() {
        let text = format!(
            "{HEADER}{}{}{}",
            row(0, "2018-01-01", 4),
            row(0, "2018-01-06", 8),
            row(1, "2018-01-01", 5)
        );
        let obs = read_observations_csv(text.as_bytes()).unwrap();
        assert_eq!(obs.len(), 3);
        assert_eq!(obs[1].scl, 8);
        assert_eq!(obs[2].pixel, PixelId::new(1, 0));
        assert!((obs[0].bands[BandId::B8.index()] - 0.33).abs() < 1e-15);
    }

    #[test]
    fn short_row_is_a_parse_error_with_line() {
        let text = format!(
            "{HEADER}{}0,0,2018-01-06,0.02,0.04,0.03,0.07,0.2,0.28,0.33,0.14,4\n",
            row(0, "2018-01-01", 4)
        );
        match read_observations_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_an_integrity_error() {
        let text = format!("{HEADER}{}{}", row(0, "2018-01-01", 4), row(0, "2018-01-01", 5));
        assert!(matches!(
            read_observations_csv(text.as_bytes()),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn wrong_header_and_bad_scl() {
        assert!(read_observations_csv("a,b\n1,2\n".as_bytes()).is_err());
        let text = format!("{HEADER}{}", row(0, "2018-01-01", 12));
        assert!(matches!(
            read_observations_csv(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ndjson_matches_csv() {
        let csv_text = format!("{HEADER}{}", row(3, "2018-01-06", 4));
        let json = r#"{"pixel_x":3,"pixel_y":0,"date":"2018-01-06","B2":0.02,"B3":0.04,"B4":0.03,"B5":0.07,"B6":0.2,"B7":0.28,"B8":0.33,"B11":0.14,"B12":0.06,"SCL":4}"#;
        let a = read_observations_csv(csv_text.as_bytes()).unwrap();
        let b = read_observations_ndjson(json.as_bytes()).unwrap();
        assert_eq!(a, b);
        let dup = format!("{json}\n{json}\n");
        assert!(matches!(
            read_observations_ndjson(dup.as_bytes()),
            Err(Error::Integrity(_))
        ));
        assert!(matches!(
            read_observations_ndjson("{\"pixel_x\":1}\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn vegetated_observation_is_kept() {
        let series = apply_scl_filter(
            &[obs("2018-01-01", 4, 0.3), obs("2018-01-11", 5, 0.3)],
            &SclPolicy::default(),
        )
        .unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.valid, vec![true, false, true]);
    }

    #[test]
    fn cloud_is_masked_and_values_untouched() {
        let input = [obs("2018-01-01", 4, 0.3), obs("2018-01-06", 9, 0.9)];
        let series = apply_scl_filter(&input, &SclPolicy::default()).unwrap();
        assert_eq!(series.valid, vec![true, false]);
        assert_eq!(series.values[1], input[1].bands);
        assert!(series.valid_count() <= input.len());
    }

    #[test]
    fn snapping_prefers_lower_cloud_risk() {
        let input = [
            obs("2018-01-01", 4, 0.3),
            obs("2018-01-05", 8, 0.9),
            obs("2018-01-07", 4, 0.31),
        ];
        let series = apply_scl_filter(&input, &SclPolicy::default()).unwrap();
        assert!(series.valid[1]);
        assert_eq!(series.values[1][BandId::B8.index()], 0.31);
    }

    #[test]
    fn empty_and_mixed_inputs() {
        assert!(matches!(
            apply_scl_filter(&[], &SclPolicy::default()),
            Err(Error::EmptyInput(_))
        ));
        let mut other = obs("2018-01-06", 4, 0.3);
        other.pixel = PixelId::new(1, 1);
        assert!(apply_scl_filter(&[obs("2018-01-01", 4, 0.3), other], &SclPolicy::default()).is_err());
        assert!(SclPolicy::new([]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let original = vec![obs("2018-01-01", 4, 0.3123456789), obs("2018-01-06", 9, 0.25)];
        let mut buf = Vec::new();
        write_observations_csv(&original, &mut buf).unwrap();
        assert_eq!(read_observations_csv(buf.as_slice()).unwrap(), original);
    }
}
