use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

use canopy_core::domain::PixelId;
use canopy_core::evaluation::{aggregate, classify, pd_score, Class, ScoreConfig};
use canopy_core::ingest::{apply_scl_filter, RawObservation, SclPolicy};
use canopy_core::neuralnet::{lstm_step, param_count, LstmLayerParams, LstmState};
use canopy_core::preprocess::{decompose, ewma_impute, savitzky_golay, SgfConfig};

fn mask_with_ends(bits: Vec<bool>) -> Vec<bool> {
    let n = bits.len();
    let mut m = bits;
    m[0] = true;
    m[n - 1] = true;
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scl_filter_only_masks(
        rows in prop::collection::vec((prop::array::uniform9(0.0f64..1.0), 0u8..12, any::<bool>()), 1..60)
    ) {
        let start = NaiveDate::from_ymd_opt(2019, 3, 1).unwrap();
        let mut day = 0i64;
        let obs: Vec<RawObservation> = rows
            .iter()
            .map(|(bands, scl, skip)| {
                day += if *skip { 10 } else { 5 };
                RawObservation { pixel: PixelId::new(1, 2), date: start + Duration::days(day), bands: *bands, scl: *scl }
            })
            .collect();
        let policy = SclPolicy::default();
        let s = apply_scl_filter(&obs, &policy).unwrap();
        prop_assert!(s.valid_count() <= obs.len());
        for o in &obs {
            let t = s.axis.date_to_index(o.date).unwrap();
            prop_assert_eq!(s.valid[t], policy.keeps(o.scl));
            if s.valid[t] {
                prop_assert_eq!(s.values[t], o.bands);
            }
        }
    }

    #[test]
    fn decomposition_reproduces_valid_input(
        period in 2usize..12,
        cycles in 3usize..8,
        seed_vals in prop::collection::vec(-5.0f64..5.0, 100),
        gaps in prop::collection::vec(prop::bool::weighted(0.1), 100),
    ) {
        let n = (period * cycles).min(100);
        let x = &seed_vals[..n];
        let mut valid = mask_with_ends(gaps[..n].to_vec());
        let masked = valid.iter().filter(|v| !**v).count();
        if masked as f64 > 0.2 * n as f64 {
            valid.fill(true);
        }
        let d = decompose(x, &valid, period).unwrap();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for t in (0..n).filter(|&t| valid[t]) {
            let sum = d.trend[t] + d.seasonal[t] + d.remainder[t];
            prop_assert!((x[t] - sum).abs() < 1e-9 * scale, "t {}: {} vs {}", t, x[t], sum);
        }
    }

    #[test]
    fn sgf_keeps_polynomials_of_its_order(
        half in 1usize..5,
        order in 0usize..4,
        coef in prop::array::uniform4(-1.0f64..1.0),
        gaps in prop::collection::vec(prop::bool::weighted(0.15), 40..80),
    ) {
        prop_assume!(order < 2 * half + 1);
        let n = gaps.len();
        let valid = mask_with_ends(gaps.iter().map(|g| !g).collect());
        prop_assume!(valid.iter().filter(|v| **v).count() >= 2 * half + 1);
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let u = t as f64 / n as f64;
                (0..=order).map(|k| coef[k] * u.powi(k as i32)).sum()
            })
            .collect();
        let cfg = SgfConfig::new(half, order).unwrap();
        let y = savitzky_golay(&x, &valid, &cfg).unwrap();
        for t in 0..n {
            prop_assert!((y[t] - x[t]).abs() < 1e-9, "t {}: {} vs {}", t, y[t], x[t]);
        }
    }

    #[test]
    fn imputation_stays_within_contributing_neighbours(
        x in prop::collection::vec(-3.0f64..3.0, 5..80),
        gaps in prop::collection::vec(prop::bool::weighted(0.4), 80),
        horizon in 1usize..6,
    ) {
        let n = x.len();
        let mut valid: Vec<bool> = gaps[..n].iter().map(|g| !g).collect();
        valid[n / 2] = true;
        let y = ewma_impute(&x, &valid, horizon).unwrap();
        for t in 0..n {
            if valid[t] {
                prop_assert_eq!(y[t], x[t]);
                continue;
            }
            let left = (0..t).rev().filter(|&j| valid[j]).take(horizon);
            let right = (t + 1..n).filter(|&j| valid[j]).take(horizon);
            let used: Vec<f64> = left.chain(right).map(|j| x[j]).collect();
            let lo = used.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = used.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(y[t] >= lo - 1e-12 && y[t] <= hi + 1e-12);
        }
    }

    #[test]
    fn lstm_hidden_state_is_bounded(
        units in 1usize..6,
        inputs in 1usize..5,
        scale in 0.1f64..20.0,
        raw in prop::collection::vec(-1.0f64..1.0, 400),
        steps in 1usize..8,
    ) {
        let len = param_count(units, inputs);
        let block: Vec<f64> = (0..len).map(|i| scale * raw[i % raw.len()]).collect();
        let params = LstmLayerParams::from_block(&block, units, inputs).unwrap();
        let mut state = LstmState::zeros(units);
        for s in 0..steps {
            let x: Vec<f64> = (0..inputs).map(|i| scale * raw[(s * 7 + i) % raw.len()]).collect();
            state = lstm_step(&params, &state, &x).unwrap();
            // |c_t| <= t, so tanh(c_t) stays strictly inside (-1, 1) for short sequences
            prop_assert!(state.hidden.iter().all(|h| h.abs() < 1.0), "{:?}", state.hidden);
        }
    }

    #[test]
    fn pd_score_is_bounded_and_non_increasing(a in -200.0f64..200.0, b in -200.0f64..200.0, k in 1u32..120) {
        let cfg = ScoreConfig { anomaly_window: k, ..ScoreConfig::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (s_lo, s_hi) = (pd_score(lo, &cfg), pd_score(hi, &cfg));
        prop_assert!((-1.0..=1.0).contains(&s_lo) && (-1.0..=1.0).contains(&s_hi));
        prop_assert!(s_lo >= s_hi);
        prop_assert_eq!(pd_score(2.0, &cfg), 0.0);
    }

    #[test]
    fn classify_is_total_and_pure(anomaly in prop::option::of(0usize..300), defoliation in prop::option::of(0usize..300)) {
        let cfg = ScoreConfig::default();
        let p = PixelId::new(3, 4);
        let r = classify(p, anomaly, defoliation, &cfg);
        prop_assert_eq!(r, classify(p, anomaly, defoliation, &cfg));
        let expected = match (anomaly, defoliation) {
            (None, None) => Class::TN,
            (None, Some(_)) => Class::FN,
            (Some(_), None) => Class::FP,
            (Some(a), Some(d)) => {
                let lag = a as f64 - d as f64;
                if lag >= -52.0 && lag <= cfg.latest_lag() { Class::TP } else { Class::FP }
            }
        };
        prop_assert_eq!(r.class, expected);
        if r.class == Class::TP {
            prop_assert_eq!(r.lag, Some(anomaly.unwrap() as i64 - defoliation.unwrap() as i64));
        }
        prop_assert_eq!(r.pd_score.is_none(), r.class == Class::FN);
    }

    #[test]
    fn f1_is_harmonic_mean(cases in prop::collection::vec((prop::option::of(0usize..200), prop::option::of(0usize..200)), 1..100)) {
        let cfg = ScoreConfig::default();
        let records: Vec<_> = cases
            .iter()
            .enumerate()
            .map(|(i, (a, d))| classify(PixelId::new(i as i64, 0), *a, *d, &cfg))
            .collect();
        let r = aggregate(&records, &cfg).unwrap();
        prop_assert_eq!(r.tp + r.fp + r.fn_ + r.tn, r.total);
        if let (Some(p), Some(rc)) = (r.precision, r.recall) {
            if p + rc > 0.0 {
                prop_assert!((r.f1.unwrap() - 2.0 * p * rc / (p + rc)).abs() < 1e-12);
            }
        }
    }
}
