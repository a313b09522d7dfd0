//! Signal-side building blocks for ECG based stress prediction.
//!
//! The pipeline runs `ingest` → `dsp` (filtering, segmentation) → `rpeaks`
//! (Pan–Tompkins, NN series) → `hrv` (17-feature vectors). `synth` produces
//! ECG with known beat times and tachogram spectra and is used throughout the
//! test suites as ground truth.

pub mod dsp;
pub mod hrv;
pub mod ingest;
pub mod rpeaks;
pub mod synth;
pub mod table;

pub use dsp::{PsdEstimate, Segment};
pub use hrv::{FeatureRow, HrvFeatureVector, NormParams};
pub use ingest::{Activity, EcgRecord, Label, LabelManifest};
pub use rpeaks::RrSeries;
pub use synth::SynthConfig;
