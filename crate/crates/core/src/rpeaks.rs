//! Pan–Tompkins R-peak detection and NN interval series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, DspError};
use crate::ingest::EcgRecord;

#[derive(Debug, Error, PartialEq)]
pub enum RpeakError {
    #[error("record of {len} samples is shorter than 2 s at {fs} Hz")]
    RecordTooShort { len: usize, fs: f64 },
    #[error("sampling rate {0} Hz is below 100 Hz")]
    SamplingTooLow(f64),
    #[error("need at least 3 peaks, got {0}")]
    TooFewPeaks(usize),
    #[error("invalid RR series: {0}")]
    InvalidSeries(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Shortest and longest NN interval kept after cleaning, seconds.
pub const NN_RANGE: (f64, f64) = (0.3, 2.0);

/// NN interval series.
///
/// Every interval is tagged with the time of the beat that closes it. A series
/// built from contiguous beats satisfies `intervals[k] == end_times[k] -
/// end_times[k - 1]`; after outlier removal a dropped interval leaves a gap,
/// so in general `intervals[k] <= end_times[k] - end_times[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    intervals: Vec<f64>,
    end_times: Vec<f64>,
}

impl RrSeries {
    /// Builds a series from explicit intervals and closing-beat times.
    pub fn new(intervals: Vec<f64>, end_times: Vec<f64>) -> Result<Self, RpeakError> {
        if intervals.len() != end_times.len() {
            return Err(RpeakError::InvalidSeries(format!(
                "{} intervals but {} end times",
                intervals.len(),
                end_times.len()
            )));
        }
        if intervals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(RpeakError::InvalidSeries("intervals must be positive".into()));
        }
        if end_times.iter().any(|t| !t.is_finite()) || end_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RpeakError::InvalidSeries(
                "beat times must be strictly increasing".into(),
            ));
        }
        for k in 1..intervals.len() {
            let start = end_times[k] - intervals[k];
            if start < end_times[k - 1] - 1e-9 {
                return Err(RpeakError::InvalidSeries(format!(
                    "interval {k} overlaps its predecessor"
                )));
            }
        }
        Ok(RrSeries {
            intervals,
            end_times,
        })
    }

    /// Contiguous series from beat times: `intervals[k] = t[k+1] - t[k]`.
    pub fn from_beat_times(times: &[f64]) -> Result<Self, RpeakError> {
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RpeakError::InvalidSeries(
                "beat times must be strictly increasing".into(),
            ));
        }
        let intervals = times.windows(2).map(|w| w[1] - w[0]).collect();
        let end_times = times.iter().skip(1).copied().collect();
        Ok(RrSeries {
            intervals,
            end_times,
        })
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn end_times(&self) -> &[f64] {
        &self.end_times
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Time of the beat opening the first interval.
    pub fn start_time(&self) -> f64 {
        match (self.end_times.first(), self.intervals.first()) {
            (Some(t), Some(rr)) => t - rr,
            _ => 0.0,
        }
    }

    /// Beat times: the opening beat followed by every closing beat.
    pub fn beat_times(&self) -> Vec<f64> {
        if self.is_empty() {
            return Vec::new();
        }
        std::iter::once(self.start_time())
            .chain(self.end_times.iter().copied())
            .collect()
    }

    /// Time from the first beat to the last, including any gaps.
    pub fn span(&self) -> f64 {
        self.end_times.last().map_or(0.0, |t| t - self.start_time())
    }

    pub fn mean(&self) -> f64 {
        self.intervals.iter().sum::<f64>() / self.intervals.len() as f64
    }

    /// Intervals lying entirely inside `[lo, hi]` seconds.
    pub fn window(&self, lo: f64, hi: f64) -> RrSeries {
        let (intervals, end_times) = self
            .intervals
            .iter()
            .zip(&self.end_times)
            .filter(|(rr, t)| **t - **rr >= lo && **t <= hi)
            .map(|(rr, t)| (*rr, *t))
            .unzip();
        RrSeries {
            intervals,
            end_times,
        }
    }
}

/// Converts peak sample indices into a cleaned NN series.
///
/// Intervals outside [`NN_RANGE`] are dropped; neighbouring intervals are not
/// merged across the gap.
pub fn to_rr(peaks: &[usize], fs: f64) -> Result<RrSeries, RpeakError> {
    if peaks.len() < 3 {
        return Err(RpeakError::TooFewPeaks(peaks.len()));
    }
    if peaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RpeakError::InvalidSeries("peaks must be strictly increasing".into()));
    }
    let (intervals, end_times) = peaks
        .windows(2)
        .map(|w| ((w[1] - w[0]) as f64 / fs, w[1] as f64 / fs))
        .filter(|(rr, _)| (NN_RANGE.0..=NN_RANGE.1).contains(rr))
        .unzip();
    Ok(RrSeries {
        intervals,
        end_times,
    })
}

/// Beat-by-beat agreement between detected and reference peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl DetectionScore {
    /// Greedy one-to-one matching of sorted peak lists within `tolerance` samples.
    pub fn compute(detected: &[usize], reference: &[usize], tolerance: usize) -> Self {
        let (mut i, mut j, mut tp) = (0, 0, 0);
        while i < detected.len() && j < reference.len() {
            let (d, r) = (detected[i], reference[j]);
            if d.abs_diff(r) <= tolerance {
                tp += 1;
                i += 1;
                j += 1;
            } else if d < r {
                i += 1;
            } else {
                j += 1;
            }
        }
        DetectionScore {
            true_positives: tp,
            false_positives: detected.len() - tp,
            false_negatives: reference.len() - tp,
        }
    }

    pub fn sensitivity(&self) -> f64 {
        self.true_positives as f64 / (self.true_positives + self.false_negatives).max(1) as f64
    }

    pub fn positive_predictivity(&self) -> f64 {
        self.true_positives as f64 / (self.true_positives + self.false_positives).max(1) as f64
    }
}

/// Pan–Tompkins tuning constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanTompkinsParams {
    pub band: (f64, f64),
    /// Moving-window integration width, seconds.
    pub integration: f64,
    /// Refractory period, seconds.
    pub refractory: f64,
    /// Window around a detection searched for the raw maximum, seconds.
    pub refine: f64,
    /// Beats closer than this to the previous one are checked for being T waves.
    pub t_wave_window: f64,
    /// Search back after `searchback_factor` times the running RR average.
    pub searchback_factor: f64,
    /// Seconds of signal used to seed the thresholds.
    pub learning: f64,
}

impl Default for PanTompkinsParams {
    fn default() -> Self {
        PanTompkinsParams {
            band: (5.0, 15.0),
            integration: 0.150,
            refractory: 0.200,
            refine: 0.050,
            t_wave_window: 0.360,
            searchback_factor: 1.66,
            learning: 2.0,
        }
    }
}

/// Intermediate signals of the detector, exposed for plotting and tests.
#[derive(Debug, Clone)]
pub struct PanTompkinsTrace {
    pub filtered: Vec<f64>,
    pub derivative: Vec<f64>,
    pub integrated: Vec<f64>,
    /// Detections on the integrated signal, before raw refinement.
    pub qrs: Vec<usize>,
}

/// Detects R peaks with the default [`PanTompkinsParams`].
pub fn detect_rpeaks(record: &EcgRecord) -> Result<Vec<usize>, RpeakError> {
    detect_rpeaks_with(record, &PanTompkinsParams::default()).map(|(peaks, _)| peaks)
}

fn check_preconditions(record: &EcgRecord) -> Result<(), RpeakError> {
    if record.fs < 100.0 {
        return Err(RpeakError::SamplingTooLow(record.fs));
    }
    if (record.len() as f64) < 2.0 * record.fs {
        return Err(RpeakError::RecordTooShort {
            len: record.len(),
            fs: record.fs,
        });
    }
    Ok(())
}

/// Local maxima of `x` that are strictly positive, thinned so that no two are
/// closer than `distance` samples (larger peaks win).
fn candidate_peaks(x: &[f64], distance: usize) -> Vec<usize> {
    let mut maxima = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] && x[i] > 0.0 {
            // Walk across a plateau.
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                maxima.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let mut order: Vec<usize> = (0..maxima.len()).collect();
    order.sort_by(|&a, &b| x[maxima[b]].total_cmp(&x[maxima[a]]).then(a.cmp(&b)));
    let mut keep = vec![false; maxima.len()];
    let mut taken: Vec<usize> = Vec::new();
    for idx in order {
        let p = maxima[idx];
        let pos = taken.partition_point(|&q| q < p);
        let clash_left = pos > 0 && p - taken[pos - 1] < distance;
        let clash_right = pos < taken.len() && taken[pos] - p < distance;
        if !clash_left && !clash_right {
            taken.insert(pos, p);
            keep[idx] = true;
        }
    }
    maxima
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

fn max_slope(derivative: &[f64], center: usize, half: usize) -> f64 {
    let lo = center.saturating_sub(half);
    let hi = (center + half + 1).min(derivative.len());
    derivative[lo..hi].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Pan–Tompkins with explicit parameters, returning refined peaks and the
/// intermediate signals.
///
/// All filtering stages are zero-phase or centered, so detections on the
/// integrated signal line up with the QRS complex without delay correction.
pub fn detect_rpeaks_with(
    record: &EcgRecord,
    params: &PanTompkinsParams,
) -> Result<(Vec<usize>, PanTompkinsTrace), RpeakError> {
    check_preconditions(record)?;
    let fs = record.fs;
    let n = record.len();
    let filtered = dsp::bandpass_samples(&record.samples, fs, params.band.0, params.band.1)?;

    // Five-point derivative, centered.
    let mut derivative = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        derivative[i] = (-filtered[i - 2] - 2.0 * filtered[i - 1]
            + 2.0 * filtered[i + 1]
            + filtered[i + 2])
            * fs
            / 8.0;
    }
    let squared: Vec<f64> = derivative.iter().map(|d| d * d).collect();

    // Centered moving-window integration.
    let width = ((params.integration * fs).round() as usize).max(1);
    let half = width / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + squared[i];
    }
    let integrated: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect();

    let refractory = (params.refractory * fs).round() as usize;
    let candidates = candidate_peaks(&integrated, refractory.max(1));

    let learn = ((params.learning * fs) as usize).min(n);
    let learn_max = integrated[..learn].iter().fold(0.0f64, |m, &v| m.max(v));
    let learn_mean = integrated[..learn].iter().sum::<f64>() / learn.max(1) as f64;
    let mut spki = learn_max / 3.0;
    let mut npki = learn_mean / 2.0;
    let threshold = |spki: f64, npki: f64| npki + 0.25 * (spki - npki);

    let t_wave = (params.t_wave_window * fs).round() as usize;
    let slope_half = (0.075 * fs).round() as usize;
    let mut qrs: Vec<usize> = Vec::new();
    let mut last_slope = 0.0;
    let mut rr_recent: Vec<usize> = Vec::new();
    // Candidates seen since the last accepted beat, for search-back.
    let mut pending: Vec<usize> = Vec::new();

    let rr_average = |recent: &[usize]| -> Option<f64> {
        (!recent.is_empty()).then(|| recent.iter().sum::<usize>() as f64 / recent.len() as f64)
    };

    for &c in &candidates {
        let peak = integrated[c];

        // Search back for a missed beat before handling this candidate.
        if let (Some(&last), Some(avg)) = (qrs.last(), rr_average(&rr_recent)) {
            if (c - last) as f64 > params.searchback_factor * avg {
                let t2 = 0.5 * threshold(spki, npki);
                let best = pending
                    .iter()
                    .copied()
                    .filter(|&p| p - last >= refractory && integrated[p] > t2)
                    .max_by(|&a, &b| integrated[a].total_cmp(&integrated[b]));
                if let Some(p) = best {
                    spki = 0.25 * integrated[p] + 0.75 * spki;
                    rr_recent.push(p - last);
                    qrs.push(p);
                    last_slope = max_slope(&derivative, p, slope_half);
                    pending.retain(|&q| q > p);
                }
            }
        }

        let t1 = threshold(spki, npki);
        let mut is_qrs = peak > t1;
        if is_qrs {
            if let Some(&last) = qrs.last() {
                if c - last < refractory {
                    is_qrs = false;
                } else if c - last < t_wave {
                    let slope = max_slope(&derivative, c, slope_half);
                    if slope < 0.5 * last_slope {
                        is_qrs = false;
                    }
                }
            }
        }

        if is_qrs {
            spki = 0.125 * peak + 0.875 * spki;
            if let Some(&last) = qrs.last() {
                rr_recent.push(c - last);
                if rr_recent.len() > 8 {
                    rr_recent.remove(0);
                }
            }
            last_slope = max_slope(&derivative, c, slope_half);
            qrs.push(c);
            pending.clear();
        } else {
            npki = 0.125 * peak + 0.875 * npki;
            pending.push(c);
        }
    }

    // Refine on the raw signal and enforce the refractory gap.
    let refine = (params.refine * fs).round() as usize;
    let mut peaks: Vec<usize> = Vec::with_capacity(qrs.len());
    for &q in &qrs {
        let lo = q.saturating_sub(refine);
        let hi = (q + refine + 1).min(n);
        let p = (lo..hi)
            .max_by(|&a, &b| record.samples[a].total_cmp(&record.samples[b]).then(b.cmp(&a)))
            .expect("non-empty refinement window");
        match peaks.last() {
            Some(&prev) if p <= prev || p - prev < refractory => {
                if record.samples[p] > record.samples[prev] && p > prev {
                    peaks.pop();
                    peaks.push(p);
                }
            }
            _ => peaks.push(p),
        }
    }

    Ok((
        peaks,
        PanTompkinsTrace {
            filtered,
            derivative,
            integrated,
            qrs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Activity;
    use crate::synth::{self, SynthConfig};

    #[test]
    fn rr_from_peaks() {
        let rr = to_rr(&[0, 250, 500], 250.0).unwrap();
        assert_eq!(rr.intervals(), &[1.0, 1.0]);
        assert_eq!(rr.beat_times(), vec![0.0, 1.0, 2.0]);

        let rr = to_rr(&[0, 250, 260, 510], 250.0).unwrap();
        assert_eq!(rr.intervals(), &[1.0, 1.0]);
        assert!(rr.intervals().iter().sum::<f64>() <= 510.0 / 250.0);

        assert!(matches!(to_rr(&[0, 250], 250.0), Err(RpeakError::TooFewPeaks(2))));
    }

    #[test]
    fn rr_series_validation() {
        assert!(RrSeries::new(vec![1.0, 1.0], vec![1.0, 1.5]).is_err());
        assert!(RrSeries::new(vec![1.0, 0.5], vec![1.0, 1.5]).is_ok());
        assert!(RrSeries::from_beat_times(&[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn window_selects_contained_intervals() {
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let rr = RrSeries::from_beat_times(&times).unwrap();
        let w = rr.window(3.5, 10.0);
        assert_eq!(w.end_times(), &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
    }

    #[test]
    fn flat_signal_has_no_beats() {
        let rec = EcgRecord::new(vec![0.0; 2500], 250.0, "z", Activity::Sitting).unwrap();
        assert!(detect_rpeaks(&rec).unwrap().is_empty());
    }

    #[test]
    fn preconditions() {
        let rec = EcgRecord::new(vec![0.0; 400], 250.0, "z", Activity::Sitting).unwrap();
        assert!(matches!(detect_rpeaks(&rec), Err(RpeakError::RecordTooShort { .. })));
        let rec = EcgRecord::new(vec![0.0; 400], 90.0, "z", Activity::Sitting).unwrap();
        assert!(matches!(detect_rpeaks(&rec), Err(RpeakError::SamplingTooLow(_))));
    }

    #[test]
    fn noiseless_constant_rr() {
        let cfg = SynthConfig {
            duration: 60.0,
            ..Default::default()
        };
        let (rec, truth, _) = synth::generate(&cfg).unwrap();
        let peaks = detect_rpeaks(&rec).unwrap();
        assert!((59..=60).contains(&peaks.len()), "{}", peaks.len());
        assert_eq!(peaks.len(), truth.len());
        for (p, t) in peaks.iter().zip(&truth) {
            assert!(p.abs_diff(*t) <= 1);
        }
        assert!(peaks.windows(2).all(|w| w[1] - w[0] >= 50));
    }

    #[test]
    fn detection_score_matching() {
        let s = DetectionScore::compute(&[10, 52, 99, 300], &[12, 50, 100, 200], 2);
        assert_eq!((s.true_positives, s.false_positives, s.false_negatives), (3, 1, 1));
        assert_eq!(s.sensitivity(), 0.75);
    }
}
