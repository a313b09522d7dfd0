//! Evaluation settings in a plain `key = value` format.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! knn.k = 1, 3, 5
//! svm.kernel = linear, rbf:0.1, rbf:1
//! tree.depth = 3, 8, none
//! only = knn, lstm
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ecgstress_ml::Kernel;
use ecgstress_nn::{Arch, NetConfig, Optimizer};
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ModelSpec, Mtry};
use crate::split::SplitMode;
use crate::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnSettings {
    pub input_len: usize,
    /// Seconds of ECG around each segment midpoint fed to the networks.
    pub window_s: f64,
    pub frame: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub cnn_hidden: usize,
    pub lstm_hidden: usize,
}

impl Default for NnSettings {
    fn default() -> Self {
        NnSettings {
            input_len: 512,
            window_s: 8.0,
            frame: 8,
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            cnn_hidden: 32,
            lstm_hidden: 16,
        }
    }
}

impl NnSettings {
    pub fn net_config(&self, arch: Arch, seed: u64) -> NetConfig {
        NetConfig {
            arch,
            input_len: self.input_len,
            hidden: match arch {
                Arch::Cnn => self.cnn_hidden,
                Arch::Lstm => self.lstm_hidden,
            },
            frame: self.frame,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            seed,
            optimizer: Optimizer::ADAM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub seed: u64,
    pub test_frac: f64,
    pub folds: usize,
    pub split: SplitMode,
    /// Segments per record used when the feature table was built.
    pub segments: usize,
    /// Restricts the run to these classifiers; `None` runs all ten.
    pub only: Option<Vec<Classifier>>,
    pub knn_k: Vec<usize>,
    pub svm_kernel: Vec<Kernel>,
    pub svm_c: Vec<f64>,
    pub tree_depth: Vec<Option<usize>>,
    pub forest_trees: Vec<usize>,
    pub forest_mtry: Vec<Mtry>,
    pub boost_trees: Vec<usize>,
    pub boost_lr: Vec<f64>,
    pub boost_depth: Vec<usize>,
    pub nn: NnSettings,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            test_frac: 0.2,
            folds: 5,
            split: SplitMode::Row,
            segments: 100,
            only: None,
            knn_k: vec![1, 3, 5, 7, 9, 11],
            svm_kernel: vec![
                Kernel::Linear,
                Kernel::Rbf { gamma: 0.1 },
                Kernel::Rbf { gamma: 1.0 },
                Kernel::Rbf { gamma: 10.0 },
            ],
            svm_c: vec![0.1, 1.0, 10.0],
            tree_depth: vec![Some(3), Some(5), Some(8), None],
            forest_trees: vec![25, 100],
            forest_mtry: vec![Mtry::Sqrt, Mtry::Half],
            boost_trees: vec![50, 200],
            boost_lr: vec![0.05, 0.1, 0.3],
            boost_depth: vec![3, 6],
            nn: NnSettings::default(),
        }
    }
}

fn list<T>(value: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse `{s}`"))
}

fn kernel(s: &str) -> std::result::Result<Kernel, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["linear"] => Ok(Kernel::Linear),
        ["rbf", g] => Ok(Kernel::Rbf { gamma: num(g)? }),
        ["poly", d, c] => Ok(Kernel::Poly {
            degree: num(d)?,
            coef: num(c)?,
        }),
        _ => Err(format!("kernel `{s}` is not linear, rbf:<gamma> or poly:<degree>:<coef>")),
    }
}

fn kernel_text(k: &Kernel) -> String {
    match k {
        Kernel::Linear => "linear".into(),
        Kernel::Rbf { gamma } => format!("rbf:{gamma}"),
        Kernel::Poly { degree, coef } => format!("poly:{degree}:{coef}"),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl EvalConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = EvalConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| EvalError::Config {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            c.set(key, value).map_err(err)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "seed" => self.seed = num(v)?,
            "test_frac" => self.test_frac = num(v)?,
            "folds" => self.folds = num(v)?,
            "segments" => self.segments = num(v)?,
            "split" => {
                self.split = match v {
                    "row" => SplitMode::Row,
                    "subject" => SplitMode::Subject,
                    _ => return Err(format!("split must be `row` or `subject`, got `{v}`")),
                }
            }
            "only" => {
                self.only = if v == "all" {
                    None
                } else {
                    Some(list(v, |s| s.parse())?)
                }
            }
            "knn.k" => self.knn_k = list(v, num)?,
            "svm.kernel" => self.svm_kernel = list(v, kernel)?,
            "svm.c" => self.svm_c = list(v, num)?,
            "tree.depth" => {
                self.tree_depth = list(v, |s| {
                    if s == "none" {
                        Ok(None)
                    } else {
                        num(s).map(Some)
                    }
                })?
            }
            "forest.trees" => self.forest_trees = list(v, num)?,
            "forest.mtry" => {
                self.forest_mtry = list(v, |s| match s {
                    "sqrt" => Ok(Mtry::Sqrt),
                    "half" => Ok(Mtry::Half),
                    _ => Err(format!("mtry must be `sqrt` or `half`, got `{s}`")),
                })?
            }
            "boost.trees" => self.boost_trees = list(v, num)?,
            "boost.lr" => self.boost_lr = list(v, num)?,
            "boost.depth" => self.boost_depth = list(v, num)?,
            "nn.input_len" => self.nn.input_len = num(v)?,
            "nn.window_s" => self.nn.window_s = num(v)?,
            "nn.frame" => self.nn.frame = num(v)?,
            "nn.epochs" => self.nn.epochs = num(v)?,
            "nn.batch_size" => self.nn.batch_size = num(v)?,
            "nn.lr" => self.nn.lr = num(v)?,
            "nn.cnn_hidden" => self.nn.cnn_hidden = num(v)?,
            "nn.lstm_hidden" => self.nn.lstm_hidden = num(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EvalError::InvalidParameter(m));
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return bad(format!("test_frac must lie in (0, 1), got {}", self.test_frac));
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.segments == 0 {
            return bad("segments must be positive".into());
        }
        if !(self.nn.window_s.is_finite() && self.nn.window_s > 0.0) {
            return bad(format!("nn.window_s must be positive, got {}", self.nn.window_s));
        }
        for arch in [Arch::Cnn, Arch::Lstm] {
            self.nn.net_config(arch, self.seed).validate()?;
        }
        Ok(())
    }

    /// Classifiers to run, in report order.
    pub fn classifiers(&self) -> Vec<Classifier> {
        Classifier::ALL
            .into_iter()
            .filter(|c| self.only.as_ref().is_none_or(|o| o.contains(c)))
            .collect()
    }

    /// Grid for a feature-based classifier; empty for the networks.
    pub fn grid(&self, classifier: Classifier) -> Vec<ModelSpec> {
        match classifier {
            Classifier::Knn => self.knn_k.iter().map(|&k| ModelSpec::Knn { k }).collect(),
            Classifier::Svm => self
                .svm_kernel
                .iter()
                .flat_map(|&kernel| self.svm_c.iter().map(move |&c| ModelSpec::Svm { kernel, c }))
                .collect(),
            Classifier::Lda => vec![ModelSpec::Lda],
            Classifier::Dt => self
                .tree_depth
                .iter()
                .map(|&max_depth| ModelSpec::Tree { max_depth })
                .collect(),
            Classifier::Rf => self
                .forest_trees
                .iter()
                .flat_map(|&n_trees| {
                    self.forest_mtry
                        .iter()
                        .map(move |&mtry| ModelSpec::Forest { n_trees, mtry })
                })
                .collect(),
            Classifier::XgBoost | Classifier::LightGbm | Classifier::CatBoost => {
                let growth = classifier.growth().expect("boosting classifier");
                let mut out = Vec::new();
                for &n_trees in &self.boost_trees {
                    for &learning_rate in &self.boost_lr {
                        for &max_depth in &self.boost_depth {
                            out.push(ModelSpec::Boost {
                                growth,
                                n_trees,
                                learning_rate,
                                max_depth,
                            });
                        }
                    }
                }
                out
            }
            Classifier::Cnn | Classifier::Lstm => Vec::new(),
        }
    }

    /// Renders every setting in the format accepted by [`EvalConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let split = match self.split {
            SplitMode::Row => "row",
            SplitMode::Subject => "subject",
        };
        let only = self
            .only
            .as_ref()
            .map_or("all".to_string(), |o| join(o, |c| c.name().to_ascii_lowercase()));
        let mtry = join(&self.forest_mtry, |m| match m {
            Mtry::Sqrt => "sqrt".into(),
            Mtry::Half => "half".into(),
        });
        let depth = join(&self.tree_depth, |d| d.map_or("none".into(), |d| d.to_string()));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "test_frac = {}", self.test_frac);
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "split = {split}");
        let _ = writeln!(s, "segments = {}", self.segments);
        let _ = writeln!(s, "only = {only}");
        let _ = writeln!(s, "knn.k = {}", join(&self.knn_k, |v| v.to_string()));
        let _ = writeln!(s, "svm.kernel = {}", join(&self.svm_kernel, kernel_text));
        let _ = writeln!(s, "svm.c = {}", join(&self.svm_c, |v| v.to_string()));
        let _ = writeln!(s, "tree.depth = {depth}");
        let _ = writeln!(s, "forest.trees = {}", join(&self.forest_trees, |v| v.to_string()));
        let _ = writeln!(s, "forest.mtry = {mtry}");
        let _ = writeln!(s, "boost.trees = {}", join(&self.boost_trees, |v| v.to_string()));
        let _ = writeln!(s, "boost.lr = {}", join(&self.boost_lr, |v| v.to_string()));
        let _ = writeln!(s, "boost.depth = {}", join(&self.boost_depth, |v| v.to_string()));
        let nn = &self.nn;
        let _ = writeln!(s, "nn.input_len = {}", nn.input_len);
        let _ = writeln!(s, "nn.window_s = {}", nn.window_s);
        let _ = writeln!(s, "nn.frame = {}", nn.frame);
        let _ = writeln!(s, "nn.epochs = {}", nn.epochs);
        let _ = writeln!(s, "nn.batch_size = {}", nn.batch_size);
        let _ = writeln!(s, "nn.lr = {}", nn.lr);
        let _ = writeln!(s, "nn.cnn_hidden = {}", nn.cnn_hidden);
        let _ = writeln!(s, "nn.lstm_hidden = {}", nn.lstm_hidden);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_roundtrips() {
        let c = EvalConfig::default();
        assert_eq!(EvalConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn default_grid_sizes() {
        let c = EvalConfig::default();
        assert_eq!(c.grid(Classifier::Knn).len(), 6);
        assert_eq!(c.grid(Classifier::Svm).len(), 12);
        assert_eq!(c.grid(Classifier::Dt).len(), 4);
        assert_eq!(c.grid(Classifier::Rf).len(), 4);
        assert_eq!(c.grid(Classifier::CatBoost).len(), 12);
        assert!(c.grid(Classifier::Lstm).is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = EvalConfig::parse("seed = 1\n\nknn.k = 3, x\n").unwrap_err();
        assert!(matches!(err, EvalError::Config { line: 3, .. }), "{err}");
        let err = EvalConfig::parse("bogus = 1").unwrap_err();
        assert!(matches!(err, EvalError::Config { line: 1, .. }));
    }

    #[test]
    fn only_filter_keeps_report_order() {
        let c = EvalConfig::parse("only = lstm, knn").unwrap();
        assert_eq!(c.classifiers(), vec![Classifier::Knn, Classifier::Lstm]);
    }
}
