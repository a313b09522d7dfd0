//! Synthetic ECG with known beat times.
//!
//! The tachogram is a constant mean RR plus two sinusoidal modulations (LF and
//! HF). Each beat is drawn as five Gaussian bumps (P, Q, R, S, T) placed at
//! fixed phase angles and stretched by the local RR interval, so the R maximum
//! sits at the beat time up to a sub-sample offset.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Activity, EcgRecord};
use crate::rpeaks::RrSeries;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("degenerate config: {0}")]
    DegenerateConfig(String),
}

/// Minimum RR interval the generator accepts, seconds.
pub const MIN_RR: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub fs: f64,
    /// Seconds.
    pub duration: f64,
    /// Beats per minute.
    pub mean_hr: f64,
    /// LF modulation amplitude of the RR interval, seconds.
    pub lf_amp: f64,
    /// HF modulation amplitude of the RR interval, seconds.
    pub hf_amp: f64,
    pub lf_freq: f64,
    pub hf_freq: f64,
    /// Standard deviation of additive white noise, mV.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fs: 250.0,
            duration: 120.0,
            mean_hr: 60.0,
            lf_amp: 0.0,
            hf_amp: 0.0,
            lf_freq: 0.1,
            hf_freq: 0.3,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// LF-dominant modulation (LF:HF amplitude 4:1).
    pub fn stressed(mean_hr: f64, seed: u64) -> Self {
        SynthConfig {
            mean_hr,
            lf_amp: 0.06,
            hf_amp: 0.015,
            seed,
            ..Default::default()
        }
    }

    /// HF-dominant modulation (LF:HF amplitude 1:2).
    pub fn relaxed(mean_hr: f64, seed: u64) -> Self {
        SynthConfig {
            mean_hr,
            lf_amp: 0.02,
            hf_amp: 0.04,
            seed,
            ..Default::default()
        }
    }

    pub fn mean_rr(&self) -> f64 {
        60.0 / self.mean_hr
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::DegenerateConfig(m));
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return bad(format!("fs must be positive, got {}", self.fs));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.mean_hr.is_finite() && self.mean_hr > 0.0) {
            return bad(format!("mean_hr must be positive, got {}", self.mean_hr));
        }
        let beat_nyquist = self.mean_hr / 60.0 / 2.0;
        if !(0.0 < self.lf_freq && self.lf_freq < self.hf_freq && self.hf_freq < beat_nyquist) {
            return bad(format!(
                "need 0 < lf_freq ({}) < hf_freq ({}) < mean_hr/120 ({beat_nyquist})",
                self.lf_freq, self.hf_freq
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if self.duration * self.fs > 1e9 {
            return bad("duration * fs exceeds 1e9 samples".into());
        }
        Ok(())
    }
}

/// Generates the modulated RR series.
///
/// The first beat is at t = 0; interval k starts at beat time `t_k` and has
/// length `60/mean_hr + lf_amp·sin(2π·lf_freq·t_k) + hf_amp·sin(2π·hf_freq·t_k)`.
/// Beats are emitted while they fall strictly before `duration`.
pub fn generate_rr(config: &SynthConfig) -> Result<RrSeries, SynthError> {
    config.validate()?;
    let base = config.mean_rr();
    let mut times = vec![0.0];
    let mut t = 0.0;
    loop {
        let rr = base
            + config.lf_amp * (2.0 * PI * config.lf_freq * t).sin()
            + config.hf_amp * (2.0 * PI * config.hf_freq * t).sin();
        if rr <= MIN_RR {
            return Err(SynthError::DegenerateConfig(format!(
                "RR interval {rr:.4} s at t = {t:.3} s is not above {MIN_RR} s"
            )));
        }
        let next = t + rr;
        if next >= config.duration {
            break;
        }
        times.push(next);
        t = next;
    }
    if times.len() < 2 {
        return Err(SynthError::DegenerateConfig(
            "duration shorter than one RR interval".into(),
        ));
    }
    Ok(RrSeries::from_beat_times(&times).expect("generated beat times are increasing"))
}

/// One Gaussian component of the beat template.
#[derive(Debug, Clone, Copy)]
struct Wave {
    /// Phase relative to the R wave, radians of a full RR cycle.
    angle: f64,
    /// mV.
    amplitude: f64,
    /// Radians.
    width: f64,
}

const BEAT_TEMPLATE: [Wave; 5] = [
    Wave { angle: -PI / 3.0, amplitude: 0.15, width: 0.25 },
    Wave { angle: -PI / 12.0, amplitude: -0.15, width: 0.1 },
    Wave { angle: 0.0, amplitude: 1.2, width: 0.1 },
    Wave { angle: PI / 12.0, amplitude: -0.25, width: 0.1 },
    Wave { angle: PI / 2.0, amplitude: 0.3, width: 0.4 },
];

/// Amplitude of the R component, mV.
pub const R_AMPLITUDE: f64 = 1.2;

/// Sum of absolute component amplitudes; bounds the noiseless waveform.
pub fn template_amplitude_sum() -> f64 {
    BEAT_TEMPLATE.iter().map(|w| w.amplitude.abs()).sum()
}

/// Renders the ECG for `rr`.
///
/// Beats are drawn at every beat time after the first (the beat at t = 0 would
/// be cut in half), so `true_peaks.len() == rr.len()` whenever the last beat
/// falls inside the record. The record spans `duration·fs` samples.
pub fn generate_ecg(rr: &RrSeries, config: &SynthConfig) -> (EcgRecord, Vec<usize>) {
    let fs = config.fs;
    let n = (config.duration * fs).round().max(1.0) as usize;
    let mut samples = vec![0.0; n];
    let beats = rr.beat_times();
    let mut true_peaks = Vec::with_capacity(beats.len());

    for k in 1..beats.len() {
        let t_beat = beats[k];
        let local_rr = beats[k] - beats[k - 1];
        // Radians per second at this beat.
        let omega = 2.0 * PI / local_rr;
        let lo = ((t_beat - local_rr) * fs).floor().max(0.0) as usize;
        let hi = (((t_beat + local_rr) * fs).ceil() as usize).min(n.saturating_sub(1));
        for (i, s) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let theta = (i as f64 / fs - t_beat) * omega;
            *s += BEAT_TEMPLATE
                .iter()
                .map(|w| {
                    let d = theta - w.angle;
                    w.amplitude * (-d * d / (2.0 * w.width * w.width)).exp()
                })
                .sum::<f64>();
        }
        let peak = (t_beat * fs).round() as usize;
        if peak < n {
            true_peaks.push(peak);
        }
    }

    if config.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, config.noise_std).expect("validated noise_std");
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }

    let record = EcgRecord {
        samples,
        fs,
        subject_id: "synthetic".into(),
        activity: Activity::Other("synthetic".into()),
        label: crate::ingest::Label::Unlabeled,
    };
    (record, true_peaks)
}

/// Convenience: [`generate_rr`] followed by [`generate_ecg`].
pub fn generate(config: &SynthConfig) -> Result<(EcgRecord, Vec<usize>, RrSeries), SynthError> {
    let rr = generate_rr(config)?;
    let (record, peaks) = generate_ecg(&rr, config);
    Ok((record, peaks, rr))
}

/// Noise standard deviation giving `snr_db` against the noiseless waveform of
/// `config` (signal power = mean square of the clean samples).
pub fn noise_std_for_snr(config: &SynthConfig, snr_db: f64) -> Result<f64, SynthError> {
    let clean = SynthConfig {
        noise_std: 0.0,
        ..config.clone()
    };
    let (record, _, _) = generate(&clean)?;
    let power = record.samples.iter().map(|v| v * v).sum::<f64>() / record.len() as f64;
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rr() {
        let cfg = SynthConfig {
            duration: 30.0,
            ..Default::default()
        };
        let rr = generate_rr(&cfg).unwrap();
        assert!(rr.intervals().iter().all(|&v| v == 1.0));
        assert_eq!(rr.len(), 29);
    }

    #[test]
    fn lf_amplitude_bounds() {
        let cfg = SynthConfig {
            lf_amp: 0.05,
            duration: 300.0,
            ..Default::default()
        };
        let rr = generate_rr(&cfg).unwrap();
        let (lo, hi) = rr
            .intervals()
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo >= 0.95 - 1e-12 && hi <= 1.05 + 1e-12, "{lo} {hi}");
        assert!(hi - lo > 0.09);
    }

    #[test]
    fn rr_sum_close_to_duration() {
        for hr in [48.0, 60.0, 75.0, 110.0] {
            let cfg = SynthConfig {
                mean_hr: hr,
                lf_amp: 0.03,
                hf_amp: 0.02,
                duration: 120.0,
                ..Default::default()
            };
            let rr = generate_rr(&cfg).unwrap();
            let total: f64 = rr.intervals().iter().sum();
            assert!(total <= cfg.duration && cfg.duration - total <= cfg.mean_rr() + 0.05);
        }
    }

    #[test]
    fn degenerate_configs() {
        let cfg = SynthConfig {
            mean_hr: 200.0,
            lf_amp: 0.1,
            ..Default::default()
        };
        assert!(matches!(generate_rr(&cfg), Err(SynthError::DegenerateConfig(_))));
        let cfg = SynthConfig {
            mean_hr: 0.0,
            ..Default::default()
        };
        assert!(generate_rr(&cfg).is_err());
        let cfg = SynthConfig {
            lf_freq: 0.3,
            hf_freq: 0.1,
            ..Default::default()
        };
        assert!(generate_rr(&cfg).is_err());
    }

    #[test]
    fn noiseless_peaks_at_beat_times() {
        let cfg = SynthConfig {
            duration: 10.0,
            ..Default::default()
        };
        let (rec, peaks, rr) = generate(&cfg).unwrap();
        assert_eq!(peaks, (1..10).map(|k| 250 * k).collect::<Vec<_>>());
        assert_eq!(peaks.len(), rr.len());
        // The true maximum of each beat lies within one sample of the mark.
        for &p in &peaks {
            let lo = p - 25;
            let argmax = (lo..p + 25)
                .max_by(|&a, &b| rec.samples[a].total_cmp(&rec.samples[b]))
                .unwrap();
            assert!(argmax.abs_diff(p) <= 1);
        }
        let bound = template_amplitude_sum();
        assert!(rec.samples.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SynthConfig {
            duration: 20.0,
            noise_std: 0.05,
            lf_amp: 0.04,
            seed: 11,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.0, b.0);
        let c = generate(&SynthConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.0.samples, c.0.samples);
    }

    #[test]
    fn snr_helper_scales_noise() {
        let cfg = SynthConfig {
            duration: 20.0,
            ..Default::default()
        };
        let s10 = noise_std_for_snr(&cfg, 10.0).unwrap();
        let s20 = noise_std_for_snr(&cfg, 20.0).unwrap();
        assert!((s10 / s20 - 10f64.sqrt()).abs() < 1e-12);
    }
}
