use crate::tensor::Tensor;
use crate::NnError;

/// Resamples a raw ECG window to `input_len` points by linear interpolation
/// and standardizes it to zero mean and unit variance. A flat window maps to
/// all zeros.
pub fn prepare_raw_input(window: &[f64], input_len: usize) -> Result<Vec<f64>, NnError> {
    if window.is_empty() || input_len < 2 {
        return Err(NnError::ShapeMismatch(format!(
            "cannot resample {} samples to {input_len}",
            window.len()
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(NnError::DegenerateData("non-finite sample in window".into()));
    }
    let n = window.len();
    if n == 1 {
        return Ok(vec![0.0; input_len]);
    }
    let step = (n - 1) as f64 / (input_len - 1) as f64;
    let mut out: Vec<f64> = (0..input_len)
        .map(|i| {
            let t = i as f64 * step;
            let lo = (t.floor() as usize).min(n - 2);
            let frac = t - lo as f64;
            window[lo] + frac * (window[lo + 1] - window[lo])
        })
        .collect();
    let mean = out.iter().sum::<f64>() / input_len as f64;
    let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / input_len as f64;
    let sd = var.sqrt();
    if sd < 1e-12 {
        out.iter_mut().for_each(|v| *v = 0.0);
    } else {
        out.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    Ok(out)
}

/// Wraps a prepared window as a tensor shaped for the configured network.
pub fn to_tensor(config: &crate::NetConfig, prepared: Vec<f64>) -> Result<Tensor, NnError> {
    Tensor::new(config.input_shape(), prepared)
}
