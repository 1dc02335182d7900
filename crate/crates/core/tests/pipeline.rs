use canopy_core::domain::{PixelId, PixelSeries, WindowSpec};
use canopy_core::evaluation::{classify, label_defoliation, Class, DefoliationRule, ScoreConfig};
use canopy_core::ingest::{scl, RawObservation, SclPolicy};
use canopy_core::model::{build_model, decode_model, encode_model, reconstruction_error, train, Architecture, ErrorVariant, TrainConfig};
use canopy_core::preprocess::{
    apply_scaling, fit_scaling, make_windows, preprocess_scene, read_series_csv, training_windows, write_series_csv,
    PreprocessConfig,
};
use canopy_core::synthgen::{generate_pixel, generate_scene, BandProfile, SceneSpec};

fn preprocess(spec: &SceneSpec, fraction: f64, seed: u64) -> (Vec<PixelSeries>, Vec<canopy_core::synthgen::GroundTruth>) {
    let scene = generate_scene(spec, fraction, seed).unwrap();
    let series = preprocess_scene(scene.observations, &SclPolicy::default(), &PreprocessConfig::default()).unwrap();
    (series, scene.truth)
}

/// Largest deviation from the noise-free signal at mid-week, relative to the
/// pixel's seasonal amplitude, over the weeks accepted by `weeks`.
fn worst_relative_change(spec: &SceneSpec, pixels: i64, weeks: impl Fn(&[RawObservation], usize) -> bool) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..pixels {
        let px = generate_pixel(spec, PixelId::new(k, 0), false, 90 + k as u64).unwrap();
        let observed = px.observations.clone();
        let series = preprocess_scene(px.observations, &SclPolicy::default(), &PreprocessConfig::default()).unwrap();
        let got = &series[0];
        assert_eq!(got.axis, px.clean_midweek.axis);
        for (t, (a, b)) in got.values.iter().zip(&px.clean_midweek.values).enumerate() {
            if weeks(&observed, t) {
                for band in 0..9 {
                    worst = worst.max((a[band] - b[band]).abs() / px.amplitudes[band]);
                }
            }
        }
    }
    worst
}

fn seasonal_only() -> SceneSpec {
    let defaults = SceneSpec::default();
    SceneSpec {
        bands: defaults.bands.map(|b| BandProfile { noise: 0.0, ..b }),
        undetected_cloud_probability: 0.0,
        interannual_sd: 0.0,
        ..defaults
    }
}

#[test]
fn noise_free_healthy_signal_survives_preprocessing() {
    let spec = SceneSpec { gap_probability: 0.0, ..seasonal_only() };
    let worst = worst_relative_change(&spec, 20, |_, _| true);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn cloud_gaps_leave_observed_weeks_intact() {
    let spec = seasonal_only();
    let epoch = spec.start;
    let worst = worst_relative_change(&spec, 20, |obs, t| {
        obs.iter()
            .any(|o| o.scl == scl::VEGETATION && (o.date - epoch).num_days() as usize / 7 == t)
    });
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn defoliation_labels_are_recovered_from_noisy_series() {
    let spec = SceneSpec { width: 10, height: 8, ..SceneSpec::default() };
    let (series, truth) = preprocess(&spec, 0.5, 21);
    let rule = DefoliationRule::default();
    let (mut hit, mut total) = (0, 0);
    for (s, t) in series.iter().zip(&truth) {
        assert_eq!(s.pixel, t.pixel);
        if let Some(d) = t.defoliation_week {
            total += 1;
            if label_defoliation(s, &rule).is_some_and(|l| l.abs_diff(d) <= 1) {
                hit += 1;
            }
        }
    }
    assert!(total >= 30);
    assert!(hit as f64 >= 0.9 * total as f64, "{hit}/{total}");
}

#[test]
fn preprocessing_is_deterministic_and_series_files_round_trip() {
    let spec = SceneSpec { width: 3, height: 2, ..SceneSpec::default() };
    let (a, _) = preprocess(&spec, 0.5, 4);
    let (b, _) = preprocess(&spec, 0.5, 4);
    assert_eq!(a, b);
    let mut buf = Vec::new();
    write_series_csv(&a, &mut buf).unwrap();
    assert_eq!(read_series_csv(buf.as_slice()).unwrap(), a);
}

#[test]
fn trained_model_separates_declining_windows_and_scores_lags_exactly() {
    let spec = SceneSpec { width: 8, height: 5, ..SceneSpec::default() };
    let (healthy, _) = preprocess(&spec, 0.0, 31);
    let (mixed, truth) = preprocess(&spec, 0.5, 32);
    let ws = 12;
    let scaling = fit_scaling(&healthy).unwrap();
    let mut model = build_model(ws, Architecture::DESK, 3).unwrap();
    model.scaling = Some(scaling);
    let corpus: Vec<_> = healthy
        .iter()
        .flat_map(|s| training_windows(&apply_scaling(s, &scaling), WindowSpec::training(ws), 3))
        .collect();
    let cfg = TrainConfig { epochs: 8, ..TrainConfig::desk() };
    let history = train(&mut model, &corpus, &cfg).unwrap();
    assert!(history.best_validation_loss().is_finite());

    // windows ending after defoliation versus windows of healthy pixels
    let variant = ErrorVariant::default();
    let mean_error = |windows: Vec<canopy_core::preprocess::SequenceBatch>| {
        let errs: Vec<f64> = windows
            .iter()
            .map(|w| {
                let r = reconstruction_error(&w.rows, &model.reconstruct(w).unwrap(), variant).unwrap();
                r.iter().sum::<f64>() / r.len() as f64
            })
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let (mut declining, mut sound) = (Vec::new(), Vec::new());
    for (s, t) in mixed.iter().zip(&truth) {
        let windows = make_windows(&model.scale(s), WindowSpec::sliding(ws));
        match t.defoliation_week {
            Some(d) => declining.extend(windows.into_iter().filter(|w| w.start >= d)),
            None if t.onset_week.is_none() => sound.extend(windows),
            None => {}
        }
    }
    assert!(!declining.is_empty() && !sound.is_empty());
    let (e_decl, e_sound) = (mean_error(declining), mean_error(sound));
    assert!(e_decl > e_sound, "declining {e_decl} vs healthy {e_sound}");

    let calibration: Vec<_> = healthy.iter().flat_map(|s| make_windows(&model.scale(s), WindowSpec::sliding(ws))).collect();
    model.calibrate(&calibration).unwrap();
    let tau = model.threshold(variant).unwrap();
    let restored = decode_model(&encode_model(&model).unwrap()).unwrap();
    let score_cfg = ScoreConfig::default();
    for (s, t) in mixed.iter().zip(&truth) {
        let d = model.detect(&model.scale(s), variant, tau, 1).unwrap();
        assert_eq!(d, restored.detect(&restored.scale(s), variant, tau, 1).unwrap());
        let first = d.flags.iter().position(|&f| f);
        let rec = classify(s.pixel, first, t.defoliation_week, &score_cfg);
        if rec.class == Class::TP {
            assert_eq!(rec.lag, Some(first.unwrap() as i64 - t.defoliation_week.unwrap() as i64));
        }
    }
}
