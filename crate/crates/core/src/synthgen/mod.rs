//! Seeded synthetic scenes of healthy and declining forest pixels with
//! ground-truth onset and defoliation weeks.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PixelId, PixelSeries, TimeAxis, BAND_COUNT, RAW_STEP_DAYS};
use crate::error::{Error, Result};
use crate::evaluation::DefoliationRule;
use crate::ingest::{scl, RawObservation};
use crate::preprocess::aggregate_weekly;
use crate::seed;

const YEAR_DAYS: f64 = 365.25;

/// Seasonal model of one band: `mean + amplitude * sin(2 pi day / year + phase)`
/// plus Gaussian noise of standard deviation `noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    pub mean: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub noise: f64,
}

impl BandProfile {
    const fn new(mean: f64, amplitude: f64, phase: f64, noise: f64) -> Self {
        BandProfile {
            mean,
            amplitude,
            phase,
            noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySpec {
    /// Onset weeks are drawn uniformly from this inclusive range.
    pub onset_week_min: usize,
    pub onset_week_max: usize,
    /// Weeks over which the spectrum drifts linearly to `disturbed`.
    pub drift_weeks: usize,
    pub disturbed: [f64; BAND_COUNT],
}

impl Default for AnomalySpec {
    fn default() -> Self {
        AnomalySpec {
            onset_week_min: 110,
            onset_week_max: 200,
            drift_weeks: 26,
            disturbed: [0.035, 0.055, 0.090, 0.110, 0.160, 0.180, 0.180, 0.220, 0.140],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub start: NaiveDate,
    pub years: u32,
    pub bands: [BandProfile; BAND_COUNT],
    /// Chance that an acquisition is cloud covered and labelled as such.
    pub gap_probability: f64,
    /// Chance that a cloudy acquisition slips through labelled as vegetation.
    pub undetected_cloud_probability: f64,
    /// Relative standard deviation of each pixel's band means.
    pub pixel_offset_sd: f64,
    /// Log-scale spread of each pixel's noise multiplier.
    pub noise_spread: f64,
    /// Relative amplitude of slow multi-year vigour fluctuations.
    pub interannual_sd: f64,
    pub anomaly: AnomalySpec,
    pub defoliation: DefoliationRule,
}

impl Default for SceneSpec {
    fn default() -> Self {
        // Visible and red peak in winter, NIR, red edge and SWIR in summer.
        let summer = -TAU * 80.0 / YEAR_DAYS;
        let winter = summer + std::f64::consts::PI;
        SceneSpec {
            width: 20,
            height: 20,
            start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            years: 5,
            bands: [
                BandProfile::new(0.020, 0.003, winter, 0.003),
                BandProfile::new(0.040, 0.005, winter, 0.003),
                BandProfile::new(0.032, 0.005, winter, 0.003),
                BandProfile::new(0.075, 0.008, summer, 0.004),
                BandProfile::new(0.220, 0.025, summer, 0.007),
                BandProfile::new(0.280, 0.035, summer, 0.008),
                BandProfile::new(0.340, 0.040, summer, 0.009),
                BandProfile::new(0.130, 0.012, summer, 0.005),
                BandProfile::new(0.055, 0.006, summer, 0.004),
            ],
            gap_probability: 0.1,
            undetected_cloud_probability: 0.01,
            pixel_offset_sd: 0.04,
            noise_spread: 0.5,
            interannual_sd: 0.03,
            anomaly: AnomalySpec::default(),
            defoliation: DefoliationRule::default(),
        }
    }
}

/// Vigour loading per band: positive where healthy vegetation is bright.
const VIGOUR_LOADING: [f64; BAND_COUNT] = [-0.5, -0.5, -1.0, 0.3, 1.0, 1.0, 1.0, -0.7, -1.0];

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scene: {m}")));
        if self.width == 0 || self.height == 0 || self.years == 0 {
            return bad("grid and duration must be positive");
        }
        if self.anomaly.drift_weeks == 0 {
            return bad("drift must last at least one week");
        }
        if self.anomaly.onset_week_min > self.anomaly.onset_week_max {
            return bad("onset range is empty");
        }
        if self.anomaly.disturbed.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("disturbed reflectances must lie in [0, 1]");
        }
        for p in [self.gap_probability, self.undetected_cloud_probability] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.pixel_offset_sd < 0.0 || self.noise_spread < 0.0 || self.interannual_sd < 0.0 {
            return bad("spreads must be non-negative");
        }
        Ok(())
    }

    pub fn raw_axis(&self) -> TimeAxis {
        let end = self
            .start
            .checked_add_months(chrono::Months::new(12 * self.years))
            .expect("date in range");
        let days = (end - self.start).num_days() as usize;
        TimeAxis {
            epoch: self.start,
            step_days: RAW_STEP_DAYS,
            len: days / RAW_STEP_DAYS as usize,
        }
    }

    pub fn weekly_axis(&self) -> TimeAxis {
        let raw = self.raw_axis();
        TimeAxis::weekly_covering(raw.epoch, raw.last_date())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pixel: PixelId,
    pub onset_week: Option<usize>,
    pub defoliation_week: Option<usize>,
}

/// Per-pixel draw of the scene's random structure.
#[derive(Debug, Clone)]
struct PixelTraits {
    means: [f64; BAND_COUNT],
    amplitudes: [f64; BAND_COUNT],
    noise_scale: f64,
    vigour_phases: [f64; 2],
    onset_day: Option<f64>,
}

impl PixelTraits {
    fn draw(spec: &SceneSpec, disturbed: bool, rng: &mut impl Rng) -> Self {
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let mut bounded = || f64::clamp(unit.sample(rng), -2.5, 2.5);
        let means = std::array::from_fn(|b| spec.bands[b].mean * (1.0 + spec.pixel_offset_sd * bounded()));
        let amplitudes =
            std::array::from_fn(|b| spec.bands[b].amplitude * (1.0 + 2.0 * spec.pixel_offset_sd * bounded()));
        let noise_scale = LogNormal::new(0.0, spec.noise_spread)
            .expect("valid spread")
            .sample(rng)
            .min(4.0);
        let vigour_phases = [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
        let onset_day = disturbed.then(|| {
            let a = &spec.anomaly;
            let week = rng.random_range(a.onset_week_min..=a.onset_week_max);
            (week * 7) as f64 + rng.random_range(0.0..7.0)
        });
        PixelTraits {
            means,
            amplitudes,
            noise_scale,
            vigour_phases,
            onset_day,
        }
    }

    /// Noise-free reflectance of every band on a day counted from the scene start.
    fn clean(&self, spec: &SceneSpec, day: f64) -> [f64; BAND_COUNT] {
        let years = day / YEAR_DAYS;
        let vigour = ((TAU * years / 2.7 + self.vigour_phases[0]).sin()
            + (TAU * years / 4.3 + self.vigour_phases[1]).sin())
            / std::f64::consts::SQRT_2;
        let alpha = self.onset_day.map_or(0.0, |onset| {
            ((day - onset) / (7.0 * spec.anomaly.drift_weeks as f64)).clamp(0.0, 1.0)
        });
        std::array::from_fn(|b| {
            let p = &spec.bands[b];
            let healthy = self.means[b] * (1.0 + spec.interannual_sd * VIGOUR_LOADING[b] * vigour)
                + self.amplitudes[b] * (TAU * years + p.phase).sin();
            (1.0 - alpha) * healthy + alpha * spec.anomaly.disturbed[b]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPixel {
    pub observations: Vec<RawObservation>,
    pub truth: GroundTruth,
    /// The noise-free signal, weekly aggregated, used for the ground truth.
    pub clean_weekly: PixelSeries,
    /// The noise-free signal at the middle of each week of `clean_weekly`.
    pub clean_midweek: PixelSeries,
    /// Seasonal amplitude of each band for this pixel.
    pub amplitudes: [f64; BAND_COUNT],
}

pub fn generate_pixel(spec: &SceneSpec, pixel: PixelId, disturbed: bool, seed: u64) -> Result<SyntheticPixel> {
    spec.validate()?;
    let mut rng = seed::rng_for(&[seed, 0x5EED]);
    let traits = PixelTraits::draw(spec, disturbed, &mut rng);
    let axis = spec.raw_axis();
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let cloudy_codes = [scl::CLOUD_MEDIUM, scl::CLOUD_HIGH, scl::THIN_CIRRUS, scl::CLOUD_SHADOW];

    let mut observations = Vec::with_capacity(axis.len);
    let mut clean_rows = Vec::with_capacity(axis.len);
    for i in 0..axis.len {
        let day = (i as u32 * RAW_STEP_DAYS) as f64;
        let clean = traits.clean(spec, day);
        clean_rows.push(clean);
        let mut bands: [f64; BAND_COUNT] = std::array::from_fn(|b| {
            clean[b] + spec.bands[b].noise * traits.noise_scale * unit.sample(&mut rng)
        });
        let mut code = scl::VEGETATION;
        if rng.random_bool(spec.gap_probability) {
            code = cloudy_codes[rng.random_range(0..cloudy_codes.len())];
            cloud_brighten(&mut bands, &mut rng);
        } else if rng.random_bool(spec.undetected_cloud_probability) {
            cloud_brighten(&mut bands, &mut rng);
        }
        bands.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        observations.push(RawObservation {
            pixel,
            date: axis.index_to_date(i),
            bands,
            scl: code,
        });
    }

    let clean_raw = PixelSeries::dense(pixel, axis, clean_rows)?;
    let clean_weekly = aggregate_weekly(&clean_raw);
    let weekly = clean_weekly.axis;
    let week_of = |day: f64| ((axis.epoch + Duration::days(day as i64)) - weekly.epoch).num_days() as usize / 7;
    let truth = GroundTruth {
        pixel,
        onset_week: traits.onset_day.map(week_of),
        defoliation_week: spec.defoliation.first_run(&clean_weekly.values),
    };
    let offset = (weekly.epoch - axis.epoch).num_days() as f64;
    let midweek = (0..weekly.len)
        .map(|w| traits.clean(spec, offset + 7.0 * w as f64 + 3.5))
        .collect();
    Ok(SyntheticPixel {
        observations,
        truth,
        clean_weekly,
        clean_midweek: PixelSeries::dense(pixel, weekly, midweek)?,
        amplitudes: traits.amplitudes,
    })
}

fn cloud_brighten(bands: &mut [f64; BAND_COUNT], rng: &mut impl Rng) {
    let haze = rng.random_range(0.1..0.4);
    bands.iter_mut().for_each(|v| *v += haze);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub observations: Vec<RawObservation>,
    pub truth: Vec<GroundTruth>,
}

/// Generates a `width x height` scene in which exactly
/// `round(fraction * pixels)` seeded-random pixels decline.
pub fn generate_scene(spec: &SceneSpec, disturbed_fraction: f64, seed: u64) -> Result<Scene> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&disturbed_fraction) {
        return Err(Error::Config(format!(
            "disturbed fraction {disturbed_fraction} outside [0, 1]"
        )));
    }
    let n = spec.width * spec.height;
    let n_disturbed = (disturbed_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng_for(&[seed, 0xD15]));
    let mut disturbed = vec![false; n];
    order[..n_disturbed].iter().for_each(|&k| disturbed[k] = true);

    // Emitted in pixel order (x, then y), matching the order of grouped series.
    let pixels = (0..n)
        .into_par_iter()
        .map(|k| {
            let pixel = PixelId::new((k / spec.height) as i64, (k % spec.height) as i64);
            generate_pixel(spec, pixel, disturbed[k], seed::mix(&[seed, pixel.x as u64, pixel.y as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scene = Scene {
        observations: Vec::with_capacity(n * spec.raw_axis().len),
        truth: Vec::with_capacity(n),
    };
    for p in pixels {
        scene.observations.extend(p.observations);
        scene.truth.push(p.truth);
    }
    Ok(scene)
}

pub const GROUND_TRUTH_HEADER: [&str; 4] = ["pixel_x", "pixel_y", "onset_week", "defoliation_week"];

pub fn write_ground_truth_csv<W: Write>(truth: &[GroundTruth], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GROUND_TRUTH_HEADER)?;
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    for t in truth {
        w.write_record([
            t.pixel.x.to_string(),
            t.pixel.y.to_string(),
            opt(t.onset_week),
            opt(t.defoliation_week),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_ground_truth_csv<R: Read>(source: R) -> Result<Vec<GroundTruth>> {
    let mut reader = csv::Reader::from_reader(source);
    if reader.headers()?.iter().ne(GROUND_TRUTH_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", GROUND_TRUTH_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |m: String| Error::Parse { line, message: m };
        if record.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", record.len())));
        }
        let int = |i: usize| -> Result<i64> {
            record[i]
                .parse()
                .map_err(|_| err(format!("{}: invalid integer '{}'", GROUND_TRUTH_HEADER[i], &record[i])))
        };
        let week = |i: usize| -> Result<Option<usize>> {
            if record[i].is_empty() {
                return Ok(None);
            }
            record[i]
                .parse()
                .map(Some)
                .map_err(|_| err(format!("{}: invalid week '{}'", GROUND_TRUTH_HEADER[i], &record[i])))
        };
        out.push(GroundTruth {
            pixel: PixelId::new(int(0)?, int(1)?),
            onset_week: week(2)?,
            defoliation_week: week(3)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ndvi_row;
    use crate::ingest::read_observations_csv;

    #[test]
    fn healthy_pixels_never_defoliate() {
        let spec = SceneSpec::default();
        for s in 0..50 {
            let p = generate_pixel(&spec, PixelId::new(0, 0), false, s).unwrap();
            assert_eq!(p.truth.defoliation_week, None);
            assert_eq!(p.truth.onset_week, None);
        }
    }

    #[test]
    fn full_drift_ends_below_ndvi_threshold() {
        let spec = SceneSpec::default();
        assert!(ndvi_row(&spec.anomaly.disturbed).unwrap() < 0.53);
        for s in 0..20 {
            let p = generate_pixel(&spec, PixelId::new(0, 0), true, s).unwrap();
            let onset = p.truth.onset_week.unwrap();
            let defol = p.truth.defoliation_week.unwrap();
            assert!(defol >= onset && defol <= onset + spec.anomaly.drift_weeks, "{onset} {defol}");
            let last = p.clean_weekly.values.last().unwrap();
            assert!(ndvi_row(last).unwrap() < 0.53);
        }
    }

    #[test]
    fn deterministic() {
        let spec = SceneSpec::default();
        let a = generate_pixel(&spec, PixelId::new(1, 1), true, 42).unwrap();
        let b = generate_pixel(&spec, PixelId::new(1, 1), true, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn axes_span_the_years() {
        let spec = SceneSpec::default();
        assert_eq!(spec.raw_axis().len, 365);
        assert_eq!(spec.weekly_axis().len, 261);
    }

    fn small_spec() -> SceneSpec {
        SceneSpec {
            width: 10,
            height: 10,
            years: 3,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn scene_fractions() {
        let spec = small_spec();
        let none = generate_scene(&spec, 0.0, 1).unwrap();
        assert!(none.truth.iter().all(|t| t.onset_week.is_none()));
        let some = generate_scene(&spec, 0.25, 1).unwrap();
        assert_eq!(some.truth.iter().filter(|t| t.onset_week.is_some()).count(), 25);
        assert!(generate_scene(&spec, 1.5, 1).is_err());
    }

    #[test]
    fn scene_reingests() {
        let spec = SceneSpec {
            width: 3,
            height: 2,
            ..small_spec()
        };
        let scene = generate_scene(&spec, 0.5, 7).unwrap();
        let mut buf = Vec::new();
        crate::ingest::write_observations_csv(&scene.observations, &mut buf).unwrap();
        let back = read_observations_csv(buf.as_slice()).unwrap();
        assert_eq!(back, scene.observations);

        let mut buf = Vec::new();
        write_ground_truth_csv(&scene.truth, &mut buf).unwrap();
        assert_eq!(read_ground_truth_csv(buf.as_slice()).unwrap(), scene.truth);
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = SceneSpec::default();
        spec.anomaly.drift_weeks = 0;
        assert!(spec.validate().is_err());
        let mut spec = SceneSpec::default();
        spec.anomaly.disturbed[0] = 1.2;
        assert!(spec.validate().is_err());
    }
}
