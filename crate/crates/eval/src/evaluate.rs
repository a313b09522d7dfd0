use ecgstress_ml::{Dataset, TrainedModel};
use ecgstress_nn::{prepare_raw_input, to_tensor, Arch, Network, Tensor};

use crate::classifier::Classifier;
use crate::config::EvalConfig;
use crate::grid::grid_search;
use crate::metrics::{compute_metrics, ConfusionMatrix};
use crate::report::{EvalReport, ReportRow};
use crate::split::{stratified_split, subject_split, Split, SplitMode};
use crate::{EvalError, Result};

/// Report plus the fitted artifacts behind it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub split: Split,
    pub models: Vec<(Classifier, TrainedModel)>,
    pub networks: Vec<(Classifier, Network)>,
}

fn prepared_inputs(
    raw: &[Vec<f64>],
    idx: &[usize],
    config: &EvalConfig,
    arch: Arch,
) -> Result<Vec<Tensor>> {
    let net = config.nn.net_config(arch, config.seed);
    idx.iter()
        .map(|&i| {
            let w = prepare_raw_input(&raw[i], net.input_len)?;
            Ok(to_tensor(&net, w)?)
        })
        .collect()
}

/// Runs every configured classifier on one shared split.
///
/// `raw` holds the raw ECG window of each row of `data` and is required only
/// when CNN or LSTM is selected. Feature models are grid-searched on the
/// training rows; the networks train with the fixed settings in `config.nn`.
pub fn evaluate_all(data: &Dataset, raw: Option<&[Vec<f64>]>, config: &EvalConfig) -> Result<Evaluation> {
    config.validate()?;
    data.validate()?;
    if let Some(raw) = raw {
        if raw.len() != data.len() {
            return Err(EvalError::InvalidParameter(format!(
                "{} raw windows for {} rows",
                raw.len(),
                data.len()
            )));
        }
    }
    let split = match config.split {
        SplitMode::Row => stratified_split(data, config.test_frac, config.seed)?,
        SplitMode::Subject => subject_split(data, config.test_frac, config.seed)?,
    };
    let train = data.subset(&split.train);
    let test = data.subset(&split.test);

    let mut rows = Vec::new();
    let mut models = Vec::new();
    let mut networks = Vec::new();
    for classifier in config.classifiers() {
        log::info!("evaluating {classifier}");
        let (pred, selected, cv, loss_curve) = if classifier.is_network() {
            let raw = raw.ok_or_else(|| {
                EvalError::InvalidParameter(format!("{classifier} needs raw ECG windows"))
            })?;
            let arch = if classifier == Classifier::Cnn {
                Arch::Cnn
            } else {
                Arch::Lstm
            };
            let xs = prepared_inputs(raw, &split.train, config, arch)?;
            let net_config = config.nn.net_config(arch, config.seed);
            let (net, report) = ecgstress_nn::train(&net_config, &xs, &train.y)?;
            let test_xs = prepared_inputs(raw, &split.test, config, arch)?;
            let pred = test_xs
                .iter()
                .map(|x| net.predict(x).map(|p| p.0))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let selected = format!(
                "hidden={} epochs={} batch={} lr={}",
                net_config.hidden, net_config.epochs, net_config.batch_size, net_config.lr
            );
            networks.push((classifier, net));
            (pred, selected, Vec::new(), report.loss_curve)
        } else {
            let grid = config.grid(classifier);
            let result = grid_search(&grid, &train, config.folds, config.seed)?;
            let model = result.best.fit(&train, config.seed)?;
            let pred = model.predict_labels(&test.x)?;
            models.push((classifier, model));
            (pred, result.best.to_string(), result.table, Vec::new())
        };
        let confusion = ConfusionMatrix::from_predictions(&pred, &test.y);
        let metrics = compute_metrics(&confusion)?;
        log::info!("{classifier}: accuracy {:.4} ({selected})", metrics.accuracy);
        rows.push(ReportRow {
            classifier,
            name: classifier.name().to_string(),
            selected,
            metrics,
            confusion,
            cv,
            loss_curve,
        });
    }
    Ok(Evaluation {
        report: EvalReport {
            seed: config.seed,
            split: config.split,
            n_train: split.train.len(),
            n_test: split.test.len(),
            rows,
        },
        split,
        models,
        networks,
    })
}
