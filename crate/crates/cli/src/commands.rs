use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ecgstress_core::dsp::{self, bands, PsdEstimate};
use ecgstress_core::hrv::{self, ExtractOptions};
use ecgstress_core::ingest::{self, EcgRecord, Label, LabelManifest};
use ecgstress_core::rpeaks::{self, DetectionScore};
use ecgstress_core::{table, NormParams};
use ecgstress_eval::windows::{dataset_from_rows, raw_window};
use ecgstress_eval::{evaluate_all, Classifier, EvalConfig};

use crate::corpus::{self, CorpusSpec};
use crate::svg::{self, PsdSeries};
use crate::{data_err, CliError};

#[derive(Debug, Parser)]
#[command(name = "ecgstress", version, about = "Stress detection from single-lead ECG via HRV features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic ECG corpus with ground-truth peaks and a label manifest.
    Synth(SynthArgs),
    /// Extract the per-segment HRV feature table from a directory of ECG CSVs.
    Features(FeaturesArgs),
    /// Detect R peaks in one record.
    Rpeaks(RpeaksArgs),
    /// Tachogram power spectral density of one record, with band powers.
    Psd(PsdArgs),
    /// Plot stressed and non-stressed tachogram PSDs with the LF and HF bands shaded.
    PsdPlot(PsdPlotArgs),
    /// Train and compare all classifiers; writes JSON, CSV and SVG reports.
    Evaluate(EvaluateArgs),
    /// Print the default evaluation config, documenting every key.
    DefaultConfig,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub subjects: usize,
    /// Number of protocol activities (1 to 5).
    #[arg(long, default_value_t = 5)]
    pub activities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record length, seconds.
    #[arg(long, default_value_t = 120.0)]
    pub duration: f64,
    /// Sampling rate, Hz.
    #[arg(long, default_value_t = 250.0)]
    pub fs: f64,
    /// Additive white noise, mV.
    #[arg(long, default_value_t = 0.02)]
    pub noise_std: f64,
    /// Overrides the activity-dependent base heart rate, bpm.
    #[arg(long)]
    pub mean_hr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory of ECG CSV files.
    #[arg(long)]
    pub input: PathBuf,
    /// Label manifest; defaults to `<input>/manifest.txt`, else the activity defaults.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output feature CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Segments per record.
    #[arg(long, default_value_t = dsp::DEFAULT_SEGMENTS)]
    pub segments: usize,
    /// TOML file of population norms for the autonomic indices.
    #[arg(long)]
    pub norms: Option<PathBuf>,
    /// Sampling rate override, Hz.
    #[arg(long)]
    pub fs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RpeaksArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file, one sample index per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Reference peak indices to score against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Matching tolerance for scoring, milliseconds.
    #[arg(long, default_value_t = 20.0)]
    pub tolerance_ms: f64,
    #[arg(long)]
    pub fs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV of `freq_hz,power`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PsdPlotArgs {
    /// Record drawn as the stressed curve.
    #[arg(long)]
    pub stressed: Option<PathBuf>,
    /// Record drawn as the non-stressed curve.
    #[arg(long)]
    pub nonstressed: Option<PathBuf>,
    /// Output SVG.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature CSV written by `features`.
    #[arg(long)]
    pub features: PathBuf,
    /// Directory of the ECG CSVs the features came from; needed for CNN and LSTM.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// Evaluation config (see `default-config`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated classifiers to run, e.g. `knn,lstm`.
    #[arg(long)]
    pub only: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Features(a) => features(&a),
        Command::Rpeaks(a) => rpeaks_cmd(&a),
        Command::Psd(a) => psd(&a),
        Command::PsdPlot(a) => psd_plot(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::DefaultConfig => {
            print!("{}", EvalConfig::default().to_text());
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = CorpusSpec {
        subjects: a.subjects,
        activities: a.activities,
        seed: a.seed,
        duration: a.duration,
        fs: a.fs,
        noise_std: a.noise_std,
        mean_hr: a.mean_hr,
    };
    let entries = corpus::plan(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let n = corpus::write(&entries, &a.out).map_err(CliError::Data)?;
    println!("wrote {n} records to {}", a.out.display());
    Ok(())
}

fn load_manifest(a: &FeaturesArgs) -> Result<LabelManifest, CliError> {
    let default_path = a.input.join(corpus::MANIFEST_FILE);
    match &a.manifest {
        Some(p) => LabelManifest::load(p).map_err(data_err),
        None if default_path.exists() => LabelManifest::load(&default_path).map_err(data_err),
        None => Ok(LabelManifest::shipped_default()),
    }
}

pub fn features(a: &FeaturesArgs) -> Result<(), CliError> {
    if a.segments == 0 {
        return Err(CliError::Usage("--segments must be positive".into()));
    }
    let manifest = load_manifest(a)?;
    let norms = match &a.norms {
        Some(p) => NormParams::load(p).map_err(data_err)?,
        None => NormParams::default(),
    };
    let opts = ExtractOptions {
        n_segments: a.segments,
        norms,
        ..ExtractOptions::default()
    };
    let files = ingest::csv_files_in(&a.input).map_err(data_err)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("no CSV records in {}", a.input.display())));
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for path in &files {
        let record = ingest::read_csv(path, a.fs).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let record = ingest::apply_manifest(record, &manifest);
        if record.label == Label::Unlabeled {
            log::warn!(
                "{}: no manifest entry for {}/{}; rows labeled unlabeled and excluded from training",
                path.display(),
                record.subject_id,
                record.activity
            );
        }
        let out = hrv::extract_features(&record, &opts)
            .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        skipped += out.skipped;
        rows.extend(out.rows);
    }
    table::write_csv(&rows, &a.out).map_err(data_err)?;
    println!(
        "{} rows from {} records ({skipped} segments skipped) -> {}",
        rows.len(),
        files.len(),
        a.out.display()
    );
    Ok(())
}

fn load_clean(path: &Path, fs: Option<f64>) -> Result<EcgRecord, CliError> {
    let record = ingest::read_csv(path, fs).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    hrv::preprocess(&record, &ExtractOptions::default()).map_err(data_err)
}

pub fn rpeaks_cmd(a: &RpeaksArgs) -> Result<(), CliError> {
    let clean = load_clean(&a.input, a.fs)?;
    let peaks = rpeaks::detect_rpeaks(&clean).map_err(data_err)?;
    let text: String = peaks.iter().map(|p| format!("{p}\n")).collect();
    write_text(&a.out, &text)?;
    println!("{} peaks -> {}", peaks.len(), a.out.display());
    if let Some(truth_path) = &a.truth {
        let text = std::fs::read_to_string(truth_path)
            .map_err(|e| data_err(format!("{}: {e}", truth_path.display())))?;
        let truth = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<usize>().map_err(|_| {
                    data_err(format!("{} line {}: not a sample index", truth_path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tol = (a.tolerance_ms / 1000.0 * clean.fs).round() as usize;
        let score = DetectionScore::compute(&peaks, &truth, tol);
        println!(
            "sensitivity {:.4}  positive predictivity {:.4}",
            score.sensitivity(),
            score.positive_predictivity()
        );
    }
    Ok(())
}

/// Tachogram PSD of a record after the standard preprocessing.
pub fn record_psd(path: &Path, fs: Option<f64>) -> Result<PsdEstimate, CliError> {
    let clean = load_clean(path, fs)?;
    let peaks = rpeaks::detect_rpeaks(&clean).map_err(data_err)?;
    let rr = rpeaks::to_rr(&peaks, clean.fs).map_err(data_err)?;
    hrv::tachogram_psd(&rr).map_err(data_err)
}

pub fn psd(a: &PsdArgs) -> Result<(), CliError> {
    let est = record_psd(&a.input, a.fs)?;
    let mut text = String::from("freq_hz,power\n");
    for (f, p) in est.freqs.iter().zip(&est.power) {
        text.push_str(&format!("{f},{p}\n"));
    }
    write_text(&a.out, &text)?;
    let band = |b: (f64, f64)| dsp::band_power(&est, b.0, b.1).map_err(data_err);
    let (vlf, lf, hf) = (band(bands::VLF)?, band(bands::LF)?, band(bands::HF)?);
    println!("VLF {vlf:.6e}  LF {lf:.6e}  HF {hf:.6e}  LF/HF {:.4}", lf / hf);
    Ok(())
}

pub fn psd_plot(a: &PsdPlotArgs) -> Result<(), CliError> {
    let mut estimates = Vec::new();
    if let Some(p) = &a.stressed {
        estimates.push(("Stressed", "#c0392b", record_psd(p, a.fs)?));
    }
    if let Some(p) = &a.nonstressed {
        estimates.push(("Non-stressed", "#2463a8", record_psd(p, a.fs)?));
    }
    if estimates.is_empty() {
        return Err(CliError::Usage("give --stressed and/or --nonstressed".into()));
    }
    let series: Vec<PsdSeries<'_>> = estimates
        .iter()
        .map(|(name, color, psd)| PsdSeries { name, color, psd })
        .collect();
    let (doc, _) = svg::psd_plot(&series);
    write_text(&a.out, &doc)
}

fn file_name(c: Classifier) -> String {
    c.name().to_ascii_lowercase()
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(p) => EvalConfig::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => EvalConfig::default(),
    };
    if let Some(only) = &a.only {
        let parsed = only
            .split(',')
            .map(|s| s.parse::<Classifier>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Usage)?;
        config.only = Some(parsed);
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let classifiers = config.classifiers();
    let needs_raw = classifiers.iter().any(|c| c.is_network());
    if needs_raw && a.raw.is_none() {
        return Err(CliError::Usage("CNN and LSTM need --raw <dir>".into()));
    }

    let rows = table::read_csv(&a.features)
        .map_err(|e| data_err(format!("{}: {e}", a.features.display())))?;
    let (data, kept) = dataset_from_rows(&rows).map_err(data_err)?;

    let raw = match (&a.raw, needs_raw) {
        (Some(dir), true) => {
            let mut records: BTreeMap<(String, String), EcgRecord> = BTreeMap::new();
            for path in ingest::csv_files_in(dir).map_err(data_err)? {
                let r = ingest::read_csv(&path, None)
                    .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
                records.insert((r.subject_id.clone(), r.activity.to_string()), r);
            }
            let windows = kept
                .iter()
                .map(|&i| {
                    let row = &rows[i];
                    let key = (row.subject_id.clone(), row.activity.to_string());
                    let record = records.get(&key).ok_or_else(|| {
                        data_err(format!("no raw record for {}/{}", key.0, key.1))
                    })?;
                    raw_window(record, row.segment, config.segments, config.nn.window_s)
                        .map_err(data_err)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(windows)
        }
        _ => None,
    };

    let evaluation = evaluate_all(&data, raw.as_deref(), &config).map_err(data_err)?;
    let report = &evaluation.report;
    std::fs::create_dir_all(&a.out).map_err(|e| data_err(format!("{}: {e}", a.out.display())))?;
    report.write_json(&a.out.join("report.json")).map_err(data_err)?;
    report.write_csv(&a.out.join("table.csv")).map_err(data_err)?;
    let bars: Vec<(&str, f64)> = report
        .rows
        .iter()
        .map(|r| (r.name.as_str(), r.metrics.accuracy))
        .collect();
    write_text(&a.out.join("accuracy.svg"), &svg::accuracy_chart(&bars))?;
    for r in &report.rows {
        let title = format!("{} confusion matrix", r.name);
        write_text(
            &a.out.join(format!("confusion_{}.svg", file_name(r.classifier))),
            &svg::confusion_chart(&title, &r.confusion),
        )?;
        if !r.loss_curve.is_empty() {
            let mut text = String::from("epoch,loss\n");
            for (i, l) in r.loss_curve.iter().enumerate() {
                text.push_str(&format!("{},{l}\n", i + 1));
            }
            write_text(&a.out.join(format!("loss_{}.csv", file_name(r.classifier))), &text)?;
        }
    }
    print!("{}", report.to_csv());
    Ok(())
}
