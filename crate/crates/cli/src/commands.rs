use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::Months;
use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use canopy_core::config::Config;
use canopy_core::domain::{PixelId, PixelSeries, WindowSpec};
use canopy_core::evaluation::{
    aggregate, baseline_break_detect, classify, grid_csv, grid_from_records, label_defoliation,
    read_records_csv, render_ppm, report_json, write_records_csv, DetectionRecord, MapLayer,
};
use canopy_core::ingest::{read_observations_csv, read_observations_ndjson, write_observations_csv};
use canopy_core::model::{build_model_with, load_model, save_model, train};
use canopy_core::preprocess::{
    make_windows, preprocess_scene, read_series_csv, training_windows, write_series_csv,
};
use canopy_core::seed::rng_for;
use canopy_core::synthgen::{generate_scene, read_ground_truth_csv, write_ground_truth_csv, SceneSpec};
use canopy_core::Error;

use crate::manifest::{beside, ManifestBuilder};
use crate::{Cli, Command, DetectArgs, EvaluateArgs, MapArgs, PreprocessArgs, SynthArgs, TrainArgs};

/// Header of the per-week flags file written by `detect`.
pub const FLAGS_HEADER: [&str; 6] = ["pixel_x", "pixel_y", "week", "date", "error", "flag"];

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut overrides = cli.global.overrides.clone();
    if let Some(seed) = cli.global.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    match &cli.command {
        Command::Train(a) => {
            push(&mut overrides, "window.size", a.window);
            push(&mut overrides, "model.preset", a.preset.as_ref());
            push(&mut overrides, "train.epochs", a.epochs);
        }
        Command::Detect(a) => {
            push(&mut overrides, "score.variant", a.variant.as_ref());
        }
        _ => {}
    }
    let config = Config::layered(cli.global.config.as_deref(), std::env::vars(), &overrides)?;

    match cli.command {
        Command::Synth(a) => synth(&config, a),
        Command::Preprocess(a) => preprocess(&config, a),
        Command::Train(a) => train_cmd(&config, a),
        Command::Detect(a) => detect(&config, a),
        Command::Evaluate(a) => evaluate(&config, a),
        Command::Map(a) => map(&config, a),
    }
}

fn push<T: ToString>(overrides: &mut Vec<(String, String)>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        overrides.push((key.to_string(), v.to_string()));
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn read_series(path: &Path) -> Result<Vec<PixelSeries>> {
    read_series_csv(open(path)?).with_context(|| format!("reading series {}", path.display()))
}

fn synth(config: &Config, a: SynthArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("synth", config);
    let spec = SceneSpec {
        width: a.width,
        height: a.height,
        years: a.years,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec, a.disturbed, config.seed)?;
    m.phase("generate");
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let obs_path = a.out_dir.join("observations.csv");
    let truth_path = a.out_dir.join("truth.csv");
    write_observations_csv(&scene.observations, create(&obs_path)?)?;
    write_ground_truth_csv(&scene.truth, create(&truth_path)?)?;
    m.phase("write");
    m.output("observations", &obs_path);
    m.output("truth", &truth_path);
    m.summary("pixels", spec.width * spec.height);
    m.summary("disturbed", scene.truth.iter().filter(|t| t.onset_week.is_some()).count());
    m.summary("observations", scene.observations.len());
    m.write(&a.out_dir.join("manifest.json"))
}

fn preprocess(config: &Config, a: PreprocessArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("preprocess", config);
    m.input("observations", &a.input);
    let ndjson = a.input.extension().is_some_and(|e| e == "ndjson");
    let reader = open(&a.input)?;
    let obs = if ndjson {
        read_observations_ndjson(reader)
    } else {
        read_observations_csv(reader)
    }
    .with_context(|| format!("reading observations {}", a.input.display()))?;
    m.phase("read");
    let series = preprocess_scene(obs, &config.scl_policy()?, &config.preprocess_config()?)?;
    m.phase("preprocess");
    write_series_csv(&series, create(&a.out)?)?;
    m.phase("write");
    m.output("series", &a.out);
    m.summary("pixels", series.len());
    m.summary("weeks", series.first().map_or(0, PixelSeries::len));
    m.write(&beside(&a.out))
}

/// Pixels trusted as healthy: no disturbance onset in the truth file, or no
/// defoliation under the configured rule when there is no truth.
fn healthy_pixels(config: &Config, series: &[PixelSeries], truth: Option<&Path>) -> Result<Vec<PixelId>> {
    match truth {
        Some(path) => {
            let truth = read_ground_truth_csv(open(path)?)
                .with_context(|| format!("reading truth {}", path.display()))?;
            let disturbed: BTreeMap<PixelId, bool> =
                truth.iter().map(|t| (t.pixel, t.onset_week.is_some())).collect();
            series
                .iter()
                .map(|s| match disturbed.get(&s.pixel) {
                    Some(d) => Ok((!d).then_some(s.pixel)),
                    None => Err(Error::Integrity(format!(
                        "pixel ({}, {}) has no ground-truth row",
                        s.pixel.x, s.pixel.y
                    ))
                    .into()),
                })
                .filter_map(Result::transpose)
                .collect()
        }
        None => Ok(series
            .iter()
            .filter(|s| label_defoliation(s, &config.defoliation).is_none())
            .map(|s| s.pixel)
            .collect()),
    }
}

fn train_cmd(config: &Config, a: TrainArgs) -> Result<()> {
    if !(a.calibration_fraction > 0.0 && a.calibration_fraction < 1.0) {
        return Err(Error::Config(format!(
            "calibration fraction {} must lie strictly between 0 and 1",
            a.calibration_fraction
        ))
        .into());
    }
    let mut m = ManifestBuilder::new("train", config);
    m.input("series", &a.series);
    let series = read_series(&a.series)?;
    if let Some(t) = &a.truth {
        m.input("truth", t);
    }
    let mut healthy = healthy_pixels(config, &series, a.truth.as_deref())?;
    if healthy.len() < 2 {
        bail!(Error::InsufficientData(format!(
            "{} healthy pixels; training and calibration need at least one each",
            healthy.len()
        )));
    }
    healthy.shuffle(&mut rng_for(&[config.seed, 0xCA1]));
    let n_cal = ((healthy.len() as f64 * a.calibration_fraction).round() as usize).clamp(1, healthy.len() - 1);
    let (cal_ids, train_ids) = healthy.split_at(n_cal);
    let pick = |ids: &[PixelId]| -> Vec<PixelSeries> {
        series.iter().filter(|s| ids.contains(&s.pixel)).cloned().collect()
    };
    let (train_raw, cal_raw) = (pick(train_ids), pick(cal_ids));
    m.phase("read");

    let spec = config.training_windows()?;
    let mut model = build_model_with(
        spec.window_size,
        config.architecture(),
        config.seed,
        config.model.allow_unsupported_window,
    )?;
    model.scaling = Some(canopy_core::preprocess::fit_scaling(&train_raw)?);
    let corpus: Vec<_> = train_raw
        .iter()
        .flat_map(|s| training_windows(&model.scale(s), spec, config.seed))
        .collect();
    info!(
        "training on {} windows from {} pixels, calibrating on {} pixels",
        corpus.len(),
        train_raw.len(),
        cal_raw.len()
    );
    let history = train(&mut model, &corpus, &config.train_config())?;
    m.phase("train");

    let calibration: Vec<_> = cal_raw
        .iter()
        .flat_map(|s| make_windows(&model.scale(s), WindowSpec::sliding(spec.window_size)))
        .collect();
    let thresholds = model.calibrate(&calibration)?;
    m.phase("calibrate");

    save_model(&model, &a.out)?;
    m.output("model", &a.out);
    m.summary("window_size", spec.window_size);
    m.summary("parameters", model.param_count());
    m.summary("training_windows", corpus.len());
    m.summary("calibration_windows", calibration.len());
    m.summary("best_epoch", history.best_epoch);
    m.summary("best_validation_loss", history.best_validation_loss());
    m.summary(
        "thresholds",
        thresholds.iter().map(|(v, t)| (v.name(), *t)).collect::<BTreeMap<_, _>>(),
    );
    m.write(&beside(&a.out))
}

fn detect(config: &Config, a: DetectArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("detect", config);
    m.input("model", &a.model);
    m.input("series", &a.series);
    let model = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    if let Some(w) = a.window.filter(|&w| w != model.window_size) {
        return Err(Error::WindowMismatch {
            model: model.window_size,
            requested: w,
        }
        .into());
    }
    let series = read_series(&a.series)?;
    let variant = config.score.variant;
    let tau = match a.threshold {
        Some(t) => t,
        None => model.threshold(variant).ok_or_else(|| {
            Error::Format(format!("model carries no calibrated threshold for {variant}"))
        })?,
    };
    m.phase("read");

    let detections = series
        .par_iter()
        .map(|s| model.detect(&model.scale(s), variant, tau, a.stride))
        .collect::<canopy_core::Result<Vec<_>>>()?;
    m.phase("detect");

    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(FLAGS_HEADER)?;
    let mut flagged = 0usize;
    for (s, d) in series.iter().zip(&detections) {
        flagged += usize::from(d.flags.iter().any(|&f| f));
        for (t, (e, f)) in d.errors.iter().zip(&d.flags).enumerate() {
            w.write_record([
                s.pixel.x.to_string(),
                s.pixel.y.to_string(),
                t.to_string(),
                s.axis.index_to_date(t).to_string(),
                e.map(|e| e.to_string()).unwrap_or_default(),
                u8::from(*f).to_string(),
            ])?;
        }
    }
    w.flush()?;
    m.phase("write");
    m.output("flags", &a.out);
    m.summary("variant", variant.name());
    m.summary("threshold", tau);
    m.summary("pixels", series.len());
    m.summary("pixels_flagged", flagged);
    m.write(&beside(&a.out))
}

/// First flagged week of every pixel in a flags file.
fn read_first_flags(path: &Path) -> Result<BTreeMap<PixelId, Option<usize>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names != FLAGS_HEADER {
        bail!(Error::Parse {
            line: 1,
            message: format!("expected header {}, found {}", FLAGS_HEADER.join(","), names.join(",")),
        });
    }
    let mut first: BTreeMap<PixelId, Option<usize>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<i64> {
            record[i].parse::<i64>().map_err(|e| {
                Error::Parse {
                    line,
                    message: format!("{}: {e}", FLAGS_HEADER[i]),
                }
                .into()
            })
        };
        let pixel = PixelId::new(field(0)?, field(1)?);
        let week = usize::try_from(field(2)?).map_err(|_| Error::Parse {
            line,
            message: "negative week".into(),
        })?;
        let flag = match field(5)? {
            0 => false,
            1 => true,
            other => bail!(Error::Parse {
                line,
                message: format!("flag must be 0 or 1, got {other}"),
            }),
        };
        let entry = first.entry(pixel).or_insert(None);
        if flag {
            *entry = Some(entry.map_or(week, |w| w.min(week)));
        }
    }
    Ok(first)
}

fn evaluate(config: &Config, a: EvaluateArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("evaluate", config);
    let series = match &a.series {
        Some(p) => {
            m.input("series", p);
            Some(read_series(p)?)
        }
        None => None,
    };

    let first: BTreeMap<PixelId, Option<usize>> = match (&a.flags, a.baseline) {
        (Some(path), _) => {
            m.input("flags", path);
            read_first_flags(path).with_context(|| format!("reading flags {}", path.display()))?
        }
        (None, Some(index)) => {
            let series = series.as_ref().expect("clap requires --series with --baseline");
            let start = series
                .first()
                .map(|s| s.axis.epoch)
                .ok_or(Error::EmptyInput("series"))?;
            let train_end = a.train_end.unwrap_or(start + Months::new(24));
            m.summary("baseline_index", format!("{index:?}").to_lowercase());
            m.summary("train_end", train_end.to_string());
            series
                .par_iter()
                .map(|s| Ok((s.pixel, baseline_break_detect(s, train_end, index.into(), &config.baseline)?)))
                .collect::<Result<_>>()?
        }
        (None, None) => unreachable!("clap requires --flags or --baseline"),
    };

    let defoliation: BTreeMap<PixelId, Option<usize>> = match (&a.truth, &series) {
        (Some(path), _) => {
            m.input("truth", path);
            read_ground_truth_csv(open(path)?)
                .with_context(|| format!("reading truth {}", path.display()))?
                .into_iter()
                .map(|t| (t.pixel, t.defoliation_week))
                .collect()
        }
        (None, Some(series)) => series
            .iter()
            .map(|s| (s.pixel, label_defoliation(s, &config.defoliation)))
            .collect(),
        (None, None) => unreachable!("clap requires --truth or --series"),
    };
    m.phase("read");

    let score_cfg = config.score_config();
    let records: Vec<DetectionRecord> = first
        .iter()
        .map(|(&pixel, &anomaly)| {
            let d = defoliation.get(&pixel).ok_or_else(|| {
                Error::Integrity(format!("pixel ({}, {}) has no defoliation label", pixel.x, pixel.y))
            })?;
            Ok(classify(pixel, anomaly, *d, &score_cfg))
        })
        .collect::<Result<_>>()?;
    let report = aggregate(&records, &score_cfg)?;
    m.phase("score");

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let report_path = a.out_dir.join("report.json");
    let records_path = a.out_dir.join("records.csv");
    let mut out = create(&report_path)?;
    writeln!(out, "{}", report_json(&report)?)?;
    out.flush()?;
    write_records_csv(&records, create(&records_path)?)?;
    m.output("report", &report_path);
    m.output("records", &records_path);
    m.summary("report", &report);
    m.write(&a.out_dir.join("manifest.json"))
}

fn map(config: &Config, a: MapArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("map", config);
    m.input("records", &a.records);
    let records = read_records_csv(open(&a.records)?)
        .with_context(|| format!("reading records {}", a.records.display()))?;
    let layer = MapLayer::from(a.layer);
    let grid = grid_from_records(&records, layer)?;
    let grid_path = a.out.with_extension("csv");
    if grid_path == a.out {
        return Err(Error::Config("map output must not end in .csv".into()).into());
    }
    let mut out = create(&a.out)?;
    out.write_all(render_ppm(&grid, layer).as_bytes())?;
    out.flush()?;
    let mut out = create(&grid_path)?;
    out.write_all(grid_csv(&grid).as_bytes())?;
    out.flush()?;
    m.output("raster", &a.out);
    m.output("grid", &grid_path);
    m.summary("layer", layer);
    m.summary("width", grid.width);
    m.summary("height", grid.height);
    m.write(&beside(&a.out))
}
