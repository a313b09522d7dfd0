//! Synthetic subject × activity corpus.
//!
//! Labels alternate in a checkerboard over (subject, activity) so that stress
//! is not confounded with activity. Non-stressed records use the HF-dominant
//! profile at an activity-dependent base rate; stressed records use the
//! LF-dominant profile and a higher rate.

use std::path::Path;

use ecgstress_core::ingest::{self, Activity, Label, LabelManifest};
use ecgstress_core::synth::{self, SynthConfig, SynthError};

/// Heart-rate increase of stressed records, bpm.
pub const STRESS_HR_OFFSET: f64 = 28.0;

/// Base heart rate of each protocol activity, bpm.
pub fn activity_base_hr(activity: &Activity) -> f64 {
    match activity {
        Activity::Sitting => 66.0,
        Activity::MentalArithmetic => 70.0,
        Activity::Walking => 74.0,
        Activity::Handbike => 78.0,
        Activity::Jogging => 82.0,
        Activity::Other(_) => 70.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub subjects: usize,
    pub activities: usize,
    pub seed: u64,
    pub duration: f64,
    pub fs: f64,
    pub noise_std: f64,
    /// Replaces every activity's base rate when set.
    pub mean_hr: Option<f64>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            subjects: 5,
            activities: 5,
            seed: 0,
            duration: 120.0,
            fs: 250.0,
            noise_std: 0.02,
            mean_hr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub subject: String,
    pub activity: Activity,
    pub label: Label,
    pub config: SynthConfig,
}

impl CorpusEntry {
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.subject, self.activity)
    }
}

/// Every record of the corpus, subjects outer and activities inner. All
/// configurations are validated before anything is returned.
pub fn plan(spec: &CorpusSpec) -> Result<Vec<CorpusEntry>, SynthError> {
    if spec.subjects == 0 || spec.activities == 0 || spec.activities > Activity::PROTOCOL.len() {
        return Err(SynthError::DegenerateConfig(format!(
            "need at least 1 subject and 1..={} activities",
            Activity::PROTOCOL.len()
        )));
    }
    // Checked up front: the stress offset would otherwise make a zero rate
    // look valid for stressed records.
    if let Some(hr) = spec.mean_hr {
        if !(hr.is_finite() && hr > 0.0) {
            return Err(SynthError::DegenerateConfig(format!(
                "mean_hr must be positive, got {hr}"
            )));
        }
    }
    let mut out = Vec::new();
    for s in 0..spec.subjects {
        // Per-subject offset in {-4, -2, 0, 2, 4} bpm.
        let subject_offset = (s % 5) as f64 * 2.0 - 4.0;
        for (a, activity) in Activity::PROTOCOL[..spec.activities].iter().enumerate() {
            let stressed = (s + a) % 2 == 1;
            let base = spec.mean_hr.unwrap_or(activity_base_hr(activity) + subject_offset);
            let record_seed = spec
                .seed
                .wrapping_mul(1_000_003)
                .wrapping_add((s * 16 + a) as u64);
            let profile = if stressed {
                SynthConfig::stressed(base + STRESS_HR_OFFSET, record_seed)
            } else {
                SynthConfig::relaxed(base, record_seed)
            };
            let config = SynthConfig {
                fs: spec.fs,
                duration: spec.duration,
                noise_std: spec.noise_std,
                ..profile
            };
            config.validate()?;
            out.push(CorpusEntry {
                subject: format!("S{:02}", s + 1),
                activity: activity.clone(),
                label: if stressed { Label::Stressed } else { Label::NonStressed },
                config,
            });
        }
    }
    Ok(out)
}

/// Explicit per-record labels, no activity defaults.
pub fn manifest(entries: &[CorpusEntry]) -> LabelManifest {
    let mut m = LabelManifest::default();
    for e in entries {
        m.insert(&e.subject, e.activity.clone(), e.label)
            .expect("corpus keys are unique");
    }
    m
}

/// Name of the manifest file written next to the records.
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Writes `<stem>.csv` (ECG), `<stem>.peaks.txt` (true R-peak sample
/// indices, one per line) and the label manifest. Returns the number of
/// records written.
pub fn write(entries: &[CorpusEntry], dir: &Path) -> Result<usize, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for e in entries {
        let (mut record, peaks, _) = synth::generate(&e.config).map_err(|e| e.to_string())?;
        record.subject_id = e.subject.clone();
        record.activity = e.activity.clone();
        record.label = e.label;
        let stem = e.file_stem();
        ingest::write_csv(&record, &dir.join(format!("{stem}.csv"))).map_err(|e| e.to_string())?;
        let text: String = peaks.iter().map(|p| format!("{p}\n")).collect();
        let path = dir.join(format!("{stem}.peaks.txt"));
        std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest(entries).to_text()).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(entries.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_labels_balance_activities() {
        let entries = plan(&CorpusSpec::default()).unwrap();
        assert_eq!(entries.len(), 25);
        for activity in &Activity::PROTOCOL {
            let stressed = entries
                .iter()
                .filter(|e| &e.activity == activity && e.label == Label::Stressed)
                .count();
            assert!((2..=3).contains(&stressed), "{activity}: {stressed}");
        }
        let stressed: Vec<_> = entries.iter().filter(|e| e.label == Label::Stressed).collect();
        assert!(stressed.iter().all(|e| e.config.lf_amp > e.config.hf_amp));
        assert!(entries
            .iter()
            .filter(|e| e.label == Label::NonStressed)
            .all(|e| e.config.hf_amp > e.config.lf_amp));
    }

    #[test]
    fn zero_rate_is_rejected() {
        let spec = CorpusSpec {
            mean_hr: Some(0.0),
            ..CorpusSpec::default()
        };
        assert!(plan(&spec).is_err());
    }
}
