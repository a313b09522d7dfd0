use std::f64::consts::PI;

use ecgstress_core::dsp;
use ecgstress_core::hrv::{self, ExtractOptions, HrvError};
use ecgstress_core::ingest::Label;
use ecgstress_core::rpeaks::{self, DetectionScore};
use ecgstress_core::synth::{self, SynthConfig};

/// Five heart-rate / modulation profiles used for detector checks.
fn profiles() -> Vec<SynthConfig> {
    vec![
        SynthConfig {
            mean_hr: 50.0,
            ..SynthConfig::relaxed(50.0, 1)
        },
        SynthConfig::relaxed(62.0, 2),
        SynthConfig::stressed(75.0, 3),
        SynthConfig::stressed(95.0, 4),
        SynthConfig {
            lf_amp: 0.03,
            hf_amp: 0.03,
            ..SynthConfig::stressed(120.0, 5)
        },
    ]
}

fn within_tol(cfg: &SynthConfig) -> usize {
    (0.020 * cfg.fs).round() as usize
}

#[test]
fn noiseless_detection_is_exact() {
    for cfg in profiles() {
        let (rec, truth, _) = synth::generate(&cfg).unwrap();
        let peaks = rpeaks::detect_rpeaks(&rec).unwrap();
        let score = DetectionScore::compute(&peaks, &truth, within_tol(&cfg));
        assert_eq!(score.false_negatives, 0, "hr {}", cfg.mean_hr);
        assert_eq!(score.false_positives, 0, "hr {}", cfg.mean_hr);
        let refractory = (0.2 * cfg.fs) as usize;
        assert!(peaks.windows(2).all(|w| w[1] - w[0] >= refractory));
    }
}

#[test]
fn detection_at_10db_snr() {
    for cfg in profiles() {
        let cfg = SynthConfig {
            noise_std: synth::noise_std_for_snr(&cfg, 10.0).unwrap(),
            ..cfg
        };
        let (rec, truth, _) = synth::generate(&cfg).unwrap();
        let peaks = rpeaks::detect_rpeaks(&rec).unwrap();
        let score = DetectionScore::compute(&peaks, &truth, within_tol(&cfg));
        assert!(score.sensitivity() >= 0.95, "hr {}: {score:?}", cfg.mean_hr);
        assert!(score.positive_predictivity() >= 0.95, "hr {}: {score:?}", cfg.mean_hr);
    }
}

#[test]
fn noiseless_peaks_are_waveform_maxima() {
    let cfg = SynthConfig {
        duration: 10.0,
        ..Default::default()
    };
    let (rec, truth, _) = synth::generate(&cfg).unwrap();
    // Locate maxima of the waveform directly, one per beat period.
    for &t in &truth {
        let lo = t.saturating_sub(60);
        let hi = (t + 60).min(rec.len() - 1);
        let argmax = (lo..=hi)
            .max_by(|&a, &b| rec.samples[a].total_cmp(&rec.samples[b]))
            .unwrap();
        assert!(argmax.abs_diff(t) <= 1, "truth {t}, argmax {argmax}");
    }
    assert_eq!(&truth[..3], &[250, 500, 750]);
}

/// Power of the beat-indexed RR sequence within ±`half` of `f0` (cycles per
/// second, assuming one sample per mean RR) by direct DFT.
fn dft_band_power(x: &[f64], sample_rate: f64, f0: f64, half: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut total = 0.0;
    for k in 1..n / 2 {
        let f = k as f64 * sample_rate / n as f64;
        if (f - f0).abs() > half {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let ang = -2.0 * PI * (k * j) as f64 / n as f64;
            re += (v - mean) * ang.cos();
            im += (v - mean) * ang.sin();
        }
        total += re * re + im * im;
    }
    total
}

#[test]
fn tachogram_dft_equal_powers() {
    let cfg = SynthConfig {
        duration: 300.0,
        lf_amp: 0.05,
        hf_amp: 0.05,
        ..Default::default()
    };
    let rr = synth::generate_rr(&cfg).unwrap();
    let lf = dft_band_power(rr.intervals(), 1.0, 0.1, 0.02);
    let hf = dft_band_power(rr.intervals(), 1.0, 0.3, 0.02);
    assert!((lf / hf - 1.0).abs() < 0.05, "lf {lf} hf {hf}");
}

#[test]
fn tachogram_modulation_peak_at_0_1_hz() {
    let cfg = SynthConfig {
        duration: 300.0,
        lf_amp: 0.05,
        ..Default::default()
    };
    let rr = synth::generate_rr(&cfg).unwrap();
    let tach = dsp::resample_tachogram(&rr, 4.0).unwrap();
    let n = tach.len();
    let best = (1..n / 2)
        .max_by(|&a, &b| {
            let p = |k: usize| dft_band_power(&tach, 4.0, k as f64 * 4.0 / n as f64, 1e-9);
            p(a).total_cmp(&p(b))
        })
        .unwrap();
    let f = best as f64 * 4.0 / n as f64;
    assert!((f - 0.1).abs() <= 4.0 / n as f64, "peak at {f}");
}

fn lf_hf_for(lf_amp: f64, hf_amp: f64) -> f64 {
    let cfg = SynthConfig {
        duration: 300.0,
        lf_amp,
        hf_amp,
        ..Default::default()
    };
    let rr = synth::generate_rr(&cfg).unwrap();
    hrv::frequency_domain(&rr).unwrap().lf_hf
}

#[test]
fn spectral_ratio_equal_amplitudes() {
    let r = lf_hf_for(0.04, 0.04);
    assert!((r - 1.0).abs() <= 0.10, "lf/hf {r}");
}

#[test]
fn spectral_ratio_double_amplitude() {
    let r = lf_hf_for(0.04, 0.02);
    assert!((r - 4.0).abs() <= 0.6, "lf/hf {r}");
}

#[test]
fn constant_rr_has_no_band_power() {
    let rr = synth::generate_rr(&SynthConfig::default()).unwrap();
    assert!(rr.intervals().iter().all(|&v| v == 1.0));
    assert_eq!(hrv::frequency_domain(&rr), Err(HrvError::ZeroHfPower));
}

/// Power of `x` below 0.3 Hz from a long-window Welch estimate.
fn low_band_power(x: &[f64], fs: f64) -> f64 {
    let psd = dsp::welch_psd(x, fs, x.len().min(8192), 0.5).unwrap();
    dsp::band_power(&psd, 0.0, 0.3).unwrap()
}

#[test]
fn baseline_drift_is_removed() {
    let cfg = SynthConfig::relaxed(70.0, 9);
    let (clean, _, _) = synth::generate(&cfg).unwrap();
    let drift: Vec<f64> = (0..clean.len())
        .map(|i| 0.5 * (2.0 * PI * 0.2 * i as f64 / cfg.fs).sin())
        .collect();
    let noisy = clean.with_samples(clean.samples.iter().zip(&drift).map(|(a, b)| a + b).collect());
    let out = dsp::remove_baseline(&noisy).unwrap();
    let residual: Vec<f64> = out
        .samples
        .iter()
        .zip(&clean.samples)
        .map(|(o, c)| o - c)
        .collect();
    let injected = low_band_power(&drift, cfg.fs);
    let left = low_band_power(&residual, cfg.fs);
    assert!(left < 0.05 * injected, "residual {left} vs injected {injected}");
}

#[test]
fn feature_rows_from_two_minute_record() {
    let cfg = SynthConfig::stressed(72.0, 11);
    let (rec, _, _) = synth::generate(&cfg).unwrap();
    let out = hrv::extract_features(&rec, &ExtractOptions::default()).unwrap();
    assert!(!out.rows.is_empty() && out.rows.len() <= 100);
    assert_eq!(out.rows.len() + out.skipped, 100);
    for row in &out.rows {
        assert!(row.features.is_finite());
        assert_eq!(row.label, Label::Unlabeled);
        let f = row.features;
        assert!(f.vlf >= 0.0 && f.lf >= 0.0 && f.hf > 0.0);
        assert!((f.lf_hf * f.hf - f.lf).abs() <= 1e-12 * f.lf.abs());
    }
}

#[test]
fn stressed_profile_has_higher_lf_hf() {
    let mean_ratio = |cfg: SynthConfig| {
        let (rec, _, _) = synth::generate(&cfg).unwrap();
        let rows = hrv::extract_features(&rec, &ExtractOptions::default())
            .unwrap()
            .rows;
        rows.iter().map(|r| r.features.lf_hf).sum::<f64>() / rows.len() as f64
    };
    let stressed = mean_ratio(SynthConfig::stressed(70.0, 21));
    let relaxed = mean_ratio(SynthConfig::relaxed(70.0, 22));
    assert!(stressed > relaxed, "stressed {stressed} relaxed {relaxed}");
}

#[test]
fn silent_record_yields_no_rows() {
    let cfg = SynthConfig::default();
    let (rec, _, _) = synth::generate(&cfg).unwrap();
    let flat = rec.with_samples(vec![0.0; rec.len()]);
    let out = hrv::extract_features(&flat, &ExtractOptions::default()).unwrap();
    assert!(out.rows.is_empty());
    assert_eq!(out.skipped, 100);
}

#[test]
fn extraction_is_deterministic() {
    let cfg = SynthConfig {
        noise_std: 0.05,
        ..SynthConfig::relaxed(66.0, 5)
    };
    let (rec, _, _) = synth::generate(&cfg).unwrap();
    let a = hrv::extract_features(&rec, &ExtractOptions::default()).unwrap();
    let b = hrv::extract_features(&rec, &ExtractOptions::default()).unwrap();
    let bits = |rows: &[hrv::FeatureRow]| -> Vec<u64> {
        rows.iter()
            .flat_map(|r| r.features.to_array().map(f64::to_bits))
            .collect()
    };
    assert_eq!(bits(&a.rows), bits(&b.rows));
}
