//! ECG recordings, label manifests and the on-disk formats they come from.
//!
//! Two sample formats are understood:
//!
//! * CSV: one sample (mV) per line, optional `# key=value` comment headers
//!   (`fs`, `subject`, `activity`).
//! * WFDB-lite: a `.hea` text header describing exactly one 16-bit signal and
//!   the matching little-endian `.dat` file.
//!
//! Labels never come from the sample files. They are attached afterwards from a
//! [`LabelManifest`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no sampling rate: add a `# fs=<Hz>` header or pass an override")]
    MissingSamplingRate,
    #[error("non-numeric sample on line {0}")]
    NonNumericSample(usize),
    #[error("file contains no samples")]
    EmptyFile,
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("duplicate manifest entry for {subject}.{activity}")]
    DuplicateEntry { subject: String, activity: Activity },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Activity performed during a recording.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Activity {
    Sitting,
    Jogging,
    Handbike,
    Walking,
    MentalArithmetic,
    Other(String),
}

impl Activity {
    /// The five protocol activities, in recording order.
    pub const PROTOCOL: [Activity; 5] = [
        Activity::Sitting,
        Activity::Jogging,
        Activity::Handbike,
        Activity::Walking,
        Activity::MentalArithmetic,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Activity::Sitting => "sitting",
            Activity::Jogging => "jogging",
            Activity::Handbike => "handbike",
            Activity::Walking => "walking",
            Activity::MentalArithmetic => "mental_arithmetic",
            Activity::Other(name) => name,
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "sitting" | "sit" => Activity::Sitting,
            "jogging" | "jog" => Activity::Jogging,
            "handbike" | "handbikedriving" => Activity::Handbike,
            "walking" | "walk" => Activity::Walking,
            "mentalarithmetic" | "arithmetic" => Activity::MentalArithmetic,
            _ => Activity::Other(s.trim().to_lowercase()),
        })
    }
}

/// Stress label of a recording. `Stressed` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Stressed,
    NonStressed,
    Unlabeled,
}

impl Label {
    /// Class index used by the learners: 1 = stressed, 0 = non-stressed.
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Stressed => Some(1),
            Label::NonStressed => Some(0),
            Label::Unlabeled => None,
        }
    }

    pub fn from_class(class: usize) -> Label {
        if class == 1 {
            Label::Stressed
        } else {
            Label::NonStressed
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Stressed => "stressed",
            Label::NonStressed => "nonstressed",
            Label::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "stressed" | "stress" | "1" => Ok(Label::Stressed),
            "nonstressed" | "relaxed" | "0" => Ok(Label::NonStressed),
            "unlabeled" | "unlabelled" => Ok(Label::Unlabeled),
            _ => Err(format!("unknown label `{}`", s.trim())),
        }
    }
}

/// A single-lead ECG recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgRecord {
    /// Amplitudes in millivolts.
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub subject_id: String,
    pub activity: Activity,
    pub label: Label,
}

impl EcgRecord {
    pub fn new(
        samples: Vec<f64>,
        fs: f64,
        subject_id: impl Into<String>,
        activity: Activity,
    ) -> Result<Self, IngestError> {
        let record = EcgRecord {
            samples,
            fs,
            subject_id: subject_id.into(),
            activity,
            label: Label::Unlabeled,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(IngestError::InvalidRecord(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if self.samples.is_empty() {
            return Err(IngestError::EmptyFile);
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(IngestError::InvalidRecord(format!(
                "sample {i} is not finite"
            )));
        }
        Ok(())
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> EcgRecord {
        EcgRecord {
            samples,
            fs: self.fs,
            subject_id: self.subject_id.clone(),
            activity: self.activity.clone(),
            label: self.label,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

fn parse_header_pair(text: &str) -> Option<(String, String)> {
    let (key, value) = text.split_once('=').or_else(|| text.split_once(':'))?;
    let key = key.trim().to_lowercase();
    if key.is_empty() {
        return None;
    }
    Some((key, value.trim().to_string()))
}

/// Reads a one-sample-per-line CSV file.
///
/// `fs_override`, when given, takes precedence over an `fs` header. Subject and
/// activity default to the file stem and `Other("unknown")`.
pub fn read_csv(path: &Path, fs_override: Option<f64>) -> Result<EcgRecord, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, fs_override, &stem)
}

/// Parses the CSV sample format from memory. See [`read_csv`].
pub fn parse_csv(
    text: &str,
    fs_override: Option<f64>,
    default_subject: &str,
) -> Result<EcgRecord, IngestError> {
    let mut header_fs = None;
    let mut subject = default_subject.to_string();
    let mut activity = Activity::Other("unknown".into());
    let mut samples = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let header = line.strip_prefix('#').map(str::trim).or_else(|| {
            // A bare `fs=250` line is accepted before the first sample.
            (samples.is_empty() && line.contains('=')).then_some(line)
        });
        if let Some(body) = header {
            if let Some((key, value)) = parse_header_pair(body) {
                match key.as_str() {
                    "fs" => {
                        let fs: f64 = value
                            .trim_end_matches("Hz")
                            .trim()
                            .parse()
                            .map_err(|_| IngestError::NonNumericSample(line_no))?;
                        header_fs = Some(fs);
                    }
                    "subject" => subject = value,
                    "activity" => activity = value.parse().unwrap_or_else(|e| match e {}),
                    _ => {}
                }
            }
            continue;
        }
        // Accept a trailing comma from spreadsheet exports.
        let field = line.trim_end_matches(',').trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => samples.push(v),
            _ => return Err(IngestError::NonNumericSample(line_no)),
        }
    }

    let fs = fs_override
        .or(header_fs)
        .ok_or(IngestError::MissingSamplingRate)?;
    if samples.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    EcgRecord::new(samples, fs, subject, activity)
}

/// Writes `record` in the CSV format understood by [`read_csv`].
///
/// Samples are written with the shortest representation that parses back to
/// the same `f64`, so a read/write/read cycle is lossless.
pub fn write_csv(record: &EcgRecord, path: &Path) -> Result<(), IngestError> {
    let mut out = String::with_capacity(record.samples.len() * 12 + 64);
    out.push_str(&format!("# fs={}\n", record.fs));
    out.push_str(&format!("# subject={}\n", record.subject_id));
    out.push_str(&format!("# activity={}\n", record.activity));
    for v in &record.samples {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Lists the `*.csv` files of a directory in name order.
pub fn csv_files_in(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn leading_number(field: &str) -> Option<f64> {
    let end = field
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(field.len());
    field[..end].parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
struct WfdbSignal {
    file: String,
    byte_offset: usize,
    gain: f64,
    baseline: f64,
}

fn parse_signal_line(line: &str) -> Result<WfdbSignal, IngestError> {
    let mut fields = line.split_whitespace();
    let file = fields
        .next()
        .ok_or_else(|| IngestError::CorruptHeader("empty signal line".into()))?
        .to_string();
    let format = fields
        .next()
        .ok_or_else(|| IngestError::CorruptHeader("signal line lacks a format".into()))?;

    let digits_end = format
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(format.len());
    if &format[..digits_end] != "16" {
        return Err(IngestError::UnsupportedFormat(format!(
            "sample format `{format}` (only 16 is supported)"
        )));
    }
    let mut byte_offset = 0;
    let modifiers = &format[digits_end..];
    if modifiers.contains('x') || modifiers.contains(':') {
        return Err(IngestError::UnsupportedFormat(format!(
            "sample format modifiers in `{format}`"
        )));
    }
    if let Some(off) = modifiers.strip_prefix('+') {
        byte_offset = off
            .parse()
            .map_err(|_| IngestError::CorruptHeader(format!("bad byte offset in `{format}`")))?;
    }

    let mut gain: f64 = 0.0;
    let mut baseline = None;
    if let Some(gain_field) = fields.next() {
        let spec = gain_field.split('/').next().unwrap_or(gain_field);
        let (g, b) = match spec.split_once('(') {
            Some((g, rest)) => (g, Some(rest.trim_end_matches(')'))),
            None => (spec, None),
        };
        gain = g
            .parse()
            .map_err(|_| IngestError::CorruptHeader(format!("bad gain `{gain_field}`")))?;
        if let Some(b) = b {
            baseline =
                Some(b.parse().map_err(|_| {
                    IngestError::CorruptHeader(format!("bad baseline `{gain_field}`"))
                })?);
        }
    }
    let _adc_resolution = fields.next();
    let adc_zero = match fields.next() {
        Some(z) => z
            .parse::<f64>()
            .map_err(|_| IngestError::CorruptHeader(format!("bad ADC zero `{z}`")))?,
        None => 0.0,
    };
    if gain == 0.0 {
        // WFDB convention for an unspecified gain.
        gain = 200.0;
    }
    if !gain.is_finite() || gain < 0.0 {
        return Err(IngestError::CorruptHeader(format!("gain must be positive, got {gain}")));
    }
    Ok(WfdbSignal {
        file,
        byte_offset,
        gain,
        baseline: baseline.unwrap_or(adc_zero),
    })
}

/// Reads a single-signal, format-16 WFDB record given its `.hea` path.
///
/// Samples are converted to millivolts as `(raw - baseline) / gain`. A missing
/// sampling frequency takes the WFDB default of 250 Hz. Header comments of the
/// form `# subject: s1` / `# activity: walking` fill in the metadata.
pub fn read_wfdb16(header_path: &Path) -> Result<EcgRecord, IngestError> {
    let text = fs::read_to_string(header_path).map_err(io_err(header_path))?;
    let mut lines = Vec::new();
    let mut subject = None;
    let mut activity = Activity::Other("unknown".into());
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = parse_header_pair(comment) {
                match key.as_str() {
                    "subject" => subject = Some(value),
                    "activity" => activity = value.parse().unwrap_or_else(|e| match e {}),
                    _ => {}
                }
            }
        } else if !trimmed.is_empty() {
            lines.push(trimmed);
        }
    }
    let record_line = lines
        .first()
        .ok_or_else(|| IngestError::CorruptHeader("missing record line".into()))?;
    let mut fields = record_line.split_whitespace();
    let name = fields.next().unwrap_or_default();
    if name.contains('/') {
        return Err(IngestError::UnsupportedFormat(
            "multi-segment records".into(),
        ));
    }
    let n_signals: usize = fields
        .next()
        .ok_or_else(|| IngestError::CorruptHeader("record line lacks signal count".into()))?
        .parse()
        .map_err(|_| IngestError::CorruptHeader("bad signal count".into()))?;
    if n_signals != 1 {
        return Err(IngestError::UnsupportedFormat(format!(
            "{n_signals} signals (only single-signal records are supported)"
        )));
    }
    let fs = match fields.next() {
        Some(f) => leading_number(f)
            .ok_or_else(|| IngestError::CorruptHeader(format!("bad sampling frequency `{f}`")))?,
        None => 250.0,
    };
    let n_samples: Option<usize> = match fields.next() {
        Some(n) => Some(
            n.parse()
                .map_err(|_| IngestError::CorruptHeader(format!("bad sample count `{n}`")))?,
        ),
        None => None,
    };
    if lines.len() < 2 {
        return Err(IngestError::CorruptHeader("missing signal line".into()));
    }
    let signal = parse_signal_line(lines[1])?;

    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
    let dat_path = dir.join(&signal.file);
    let bytes = fs::read(&dat_path).map_err(io_err(&dat_path))?;
    let payload = bytes.get(signal.byte_offset..).unwrap_or_default();
    let available = payload.len() / 2;
    let count = match n_samples {
        Some(0) | None => available,
        Some(n) if n <= available => n,
        Some(n) => {
            return Err(IngestError::CorruptHeader(format!(
                "header declares {n} samples, data holds {available}"
            )))
        }
    };
    let samples: Vec<f64> = payload
        .chunks_exact(2)
        .take(count)
        .map(|b| (f64::from(i16::from_le_bytes([b[0], b[1]])) - signal.baseline) / signal.gain)
        .collect();
    if samples.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let subject = subject.unwrap_or_else(|| name.to_string());
    EcgRecord::new(samples, fs, subject, activity)
}

/// Maps `(subject, activity)` pairs to stress labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelManifest {
    pub entries: BTreeMap<(String, Activity), Label>,
    /// Fallback by activity, used when no exact entry exists.
    pub default_rule: Option<BTreeMap<Activity, Label>>,
}

impl LabelManifest {
    /// Shipped activity defaults: mental arithmetic is stressed, every physical
    /// or resting activity is not.
    pub fn shipped_default() -> Self {
        let rule = Activity::PROTOCOL
            .iter()
            .map(|a| {
                let label = if *a == Activity::MentalArithmetic {
                    Label::Stressed
                } else {
                    Label::NonStressed
                };
                (a.clone(), label)
            })
            .collect();
        LabelManifest {
            entries: BTreeMap::new(),
            default_rule: Some(rule),
        }
    }

    pub fn insert(
        &mut self,
        subject: &str,
        activity: Activity,
        label: Label,
    ) -> Result<(), IngestError> {
        let key = (subject.to_string(), activity);
        if self.entries.contains_key(&key) {
            return Err(IngestError::DuplicateEntry {
                subject: key.0,
                activity: key.1,
            });
        }
        self.entries.insert(key, label);
        Ok(())
    }

    pub fn lookup(&self, subject: &str, activity: &Activity) -> Label {
        if let Some(label) = self.entries.get(&(subject.to_string(), activity.clone())) {
            return *label;
        }
        self.default_rule
            .as_ref()
            .and_then(|rule| rule.get(activity).copied())
            .unwrap_or(Label::Unlabeled)
    }

    /// Parses `subject.activity = "stressed" | "nonstressed"` lines.
    ///
    /// A subject of `*` declares a default rule for that activity. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut manifest = LabelManifest::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw.trim(),
            };
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| IngestError::Manifest {
                line: line_no,
                message: message.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `subject.activity = \"label\"`"))?;
            let (subject, activity) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| bad("key must be `subject.activity`"))?;
            let (subject, activity) = (subject.trim(), activity.trim());
            if subject.is_empty() || activity.is_empty() {
                return Err(bad("empty subject or activity"));
            }
            let value = value.trim();
            let unquoted = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            let label: Label = unquoted.parse().map_err(|e: String| bad(&e))?;
            let activity: Activity = activity.parse().unwrap_or_else(|e| match e {});
            if subject == "*" {
                let rule = manifest.default_rule.get_or_insert_with(BTreeMap::new);
                if rule.insert(activity.clone(), label).is_some() {
                    return Err(IngestError::DuplicateEntry {
                        subject: "*".into(),
                        activity,
                    });
                }
            } else {
                manifest.insert(subject, activity, label)?;
            }
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    /// Renders the manifest in the format accepted by [`LabelManifest::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(rule) = &self.default_rule {
            for (activity, label) in rule {
                out.push_str(&format!("*.{activity} = \"{label}\"\n"));
            }
        }
        for ((subject, activity), label) in &self.entries {
            out.push_str(&format!("{subject}.{activity} = \"{label}\"\n"));
        }
        out
    }
}

/// Returns `record` with its label taken from `manifest`.
pub fn apply_manifest(mut record: EcgRecord, manifest: &LabelManifest) -> EcgRecord {
    record.label = manifest.lookup(&record.subject_id, &record.activity);
    record
}
