//! Seeded toy problems with known structure, each with a matching raw-window
//! rendering so the networks can be scored on the same rows.

use ecgstress_ml::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Samples per rendered window.
pub const WINDOW_LEN: usize = 512;

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub data: Dataset,
    pub raw: Vec<Vec<f64>>,
}

/// Renders a feature vector as a window: a fixed reference bump followed by
/// one Gaussian bump per feature whose height is the feature value. The
/// reference keeps absolute scale visible after per-window standardization.
pub fn render_window(features: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = features.len() as f64;
    let sigma = WINDOW_LEN as f64 / 64.0;
    let noise = Normal::new(0.0, 0.05).expect("valid sd");
    let centers: Vec<(f64, f64)> = std::iter::once((0.5, 2.0))
        .chain(
            features
                .iter()
                .enumerate()
                .map(|(j, &v)| (0.5 + 0.4 * (j as f64 + 1.0) / (d + 1.0), v)),
        )
        .map(|(pos, amp)| (pos * WINDOW_LEN as f64, amp))
        .collect();
    (0..WINDOW_LEN)
        .map(|t| {
            let clean: f64 = centers
                .iter()
                .map(|&(c, a)| a * (-0.5 * ((t as f64 - c) / sigma).powi(2)).exp())
                .sum();
            clean + noise.sample(rng)
        })
        .collect()
}

fn assemble(x: Vec<Vec<f64>>, y: Vec<usize>, seed: u64) -> Benchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let raw = x.iter().map(|r| render_window(r, &mut rng)).collect();
    let n = x.len();
    let d = x[0].len();
    let data = Dataset {
        feature_names: (0..d).map(|i| format!("x{i}")).collect(),
        groups: (0..n).map(|i| (format!("b{}", i % 5), "bench".to_string())).collect(),
        x,
        y,
    };
    Benchmark { data, raw }
}

/// Two well separated Gaussian blobs in 2-D, alternating labels.
pub fn blobs(n: usize, seed: u64) -> Benchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, 0.6).expect("valid sd");
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = y
        .iter()
        .map(|&c| {
            let m = if c == 1 { 1.5 } else { -1.5 };
            vec![m + spread.sample(&mut rng), m + spread.sample(&mut rng)]
        })
        .collect();
    assemble(x, y, seed)
}

/// Overlapping blobs with a fraction `flip` of labels flipped at random.
pub fn noisy_blobs(n: usize, flip: f64, seed: u64) -> Benchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, 1.0).expect("valid sd");
    let mut y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = y
        .iter()
        .map(|&c| {
            let m = if c == 1 { 1.0 } else { -1.0 };
            vec![m + spread.sample(&mut rng), m + spread.sample(&mut rng)]
        })
        .collect();
    for label in &mut y {
        if rng.random_bool(flip) {
            *label = 1 - *label;
        }
    }
    assemble(x, y, seed)
}

/// Points in `[-1, 1]²` away from the axes, labeled by quadrant parity.
pub fn xor(n: usize, seed: u64) -> Benchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord = |rng: &mut ChaCha8Rng| loop {
        let v: f64 = rng.random_range(-1.0..1.0);
        if v.abs() > 0.15 {
            return v;
        }
    };
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![coord(&mut rng), coord(&mut rng)]).collect();
    let y = x.iter().map(|r| usize::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
    assemble(x, y, seed)
}

/// Label 1 iff both informative coordinates are positive; `distractors`
/// further uniform columns carry no signal.
pub fn quadrant_with_distractors(n: usize, distractors: usize, seed: u64) -> Benchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..2 + distractors).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y = x.iter().map(|r| usize::from(r[0] > 0.0 && r[1] > 0.0)).collect();
    assemble(x, y, seed)
}
