//! Feature table CSV: the 17 feature columns followed by subject, activity,
//! segment and label.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::hrv::{FeatureRow, HrvFeatureVector, FEATURE_NAMES};
use crate::ingest::{Activity, Label};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const META_COLUMNS: [&str; 4] = ["subject", "activity", "segment", "label"];

pub fn header() -> Vec<&'static str> {
    FEATURE_NAMES.iter().chain(META_COLUMNS.iter()).copied().collect()
}

pub fn write_rows<W: Write>(rows: &[FeatureRow], out: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for row in rows {
        let mut rec: Vec<String> = row
            .features
            .to_array()
            .iter()
            .map(|v| v.to_string())
            .collect();
        rec.push(row.subject_id.clone());
        rec.push(row.activity.to_string());
        rec.push(row.segment.to_string());
        rec.push(row.label.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| TableError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_csv(rows: &[FeatureRow], path: &Path) -> Result<(), TableError> {
    let file = std::fs::File::create(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_rows(rows, std::io::BufWriter::new(file))
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<FeatureRow>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    let expected = header();
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(TableError::Malformed {
            line: 1,
            message: format!("unexpected header, want {} columns in canonical order", expected.len()),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| TableError::Malformed { line, message };
        if rec.len() != expected.len() {
            return Err(bad(format!("expected {} fields, got {}", expected.len(), rec.len())));
        }
        let mut values = [0.0; 17];
        for (i, v) in values.iter_mut().enumerate() {
            *v = rec[i]
                .trim()
                .parse()
                .map_err(|_| bad(format!("column '{}': not a number: {:?}", FEATURE_NAMES[i], &rec[i])))?;
        }
        let activity: Activity = rec[18].parse().unwrap_or_else(|e| match e {});
        let segment = rec[19]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad segment index {:?}", &rec[19])))?;
        let label: Label = rec[20]
            .parse()
            .map_err(|_| bad(format!("bad label {:?}", &rec[20])))?;
        rows.push(FeatureRow {
            subject_id: rec[17].to_string(),
            activity,
            segment,
            label,
            features: HrvFeatureVector::from_array(values),
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<FeatureRow>, TableError> {
    let file = std::fs::File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_rows(std::io::BufReader::new(file))
}
