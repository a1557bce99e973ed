//! Score bookkeeping: the running-mean buffer, the offline shift and peak
//! extraction.

use alloc::vec;
use alloc::vec::Vec;

use crate::CpdError;

/// Sliding sum of raw scores over one lag window, updated in O(1) per step:
/// `d_bar(t) = d_bar(t - n) + (d(t) - d(t - l - n)) / l`.
///
/// Holds exactly `l / n + 1` raw scores; slots start at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningMean {
    slots: Vec<f64>,
    next: usize,
    value: f64,
    lag: f64,
}

impl RunningMean {
    /// `n` must divide `l`; callers validate this through
    /// [`DetectorConfig::validate`](super::DetectorConfig::validate).
    pub fn new(l: usize, n: usize) -> Self {
        debug_assert!(n >= 1 && l >= n && l.is_multiple_of(n));
        Self {
            slots: vec![0.0; l / n + 1],
            next: 0,
            value: 0.0,
            lag: l as f64,
        }
    }

    /// Pushes `d(t)` and returns the new `d_bar(t)`.
    pub fn update(&mut self, d_t: f64) -> f64 {
        let expired = core::mem::replace(&mut self.slots[self.next], d_t);
        self.next = (self.next + 1) % self.slots.len();
        self.value += (d_t - expired) / self.lag;
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Free-function form of [`RunningMean::update`].
pub fn update_running_mean(buffer: &mut RunningMean, d_t: f64) -> f64 {
    buffer.update(d_t)
}

/// Raw and smoothed scores on the processing grid `t0, t0 + n, ...`.
///
/// After [`ScoreSeries::shift_offline`] the same values are exposed on the
/// shifted axis `t - (l + n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSeries {
    times: Vec<i64>,
    raw: Vec<f64>,
    smoothed: Vec<f64>,
    shift: Option<i64>,
}

impl ScoreSeries {
    pub fn new(times: Vec<i64>, raw: Vec<f64>, smoothed: Vec<f64>) -> Result<Self, CpdError> {
        if times.len() != raw.len() || times.len() != smoothed.len() {
            return Err(CpdError::InvalidConfig("score columns differ in length".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CpdError::InvalidConfig("score times must increase".into()));
        }
        Ok(Self {
            times,
            raw,
            smoothed,
            shift: None,
        })
    }

    /// Processing times `t` (unshifted).
    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn smoothed(&self) -> &[f64] {
        &self.smoothed
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_shifted(&self) -> bool {
        self.shift.is_some()
    }

    /// Applied offset `l + n`, if shifted.
    pub fn shift(&self) -> Option<i64> {
        self.shift
    }

    /// Offline-equivalent score `d_bar'(t) = d_bar(t + l + n)`. Shifting an
    /// already shifted series is refused.
    pub fn shift_offline(&self, l: usize, n: usize) -> Result<ScoreSeries, CpdError> {
        if self.shift.is_some() {
            return Err(CpdError::AlreadyShifted);
        }
        let mut out = self.clone();
        out.shift = Some((l + n) as i64);
        Ok(out)
    }

    /// Times of the shifted score (`t - l - n`); equal to [`Self::times`] when
    /// not shifted.
    pub fn shifted_times(&self) -> impl ExactSizeIterator<Item = i64> + '_ {
        let off = self.shift.unwrap_or(0);
        self.times.iter().map(move |t| t - off)
    }

    /// Shifted score values; the smoothed values re-indexed.
    pub fn shifted(&self) -> &[f64] {
        &self.smoothed
    }

    /// Recomputes the smoothed column from the raw one with a fresh buffer.
    pub fn replay(&self, l: usize, n: usize) -> Vec<f64> {
        let mut buf = RunningMean::new(l, n);
        self.raw.iter().map(|&d| buf.update(d)).collect()
    }
}

/// How the detection threshold is chosen for a score series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Fixed value.
    Absolute(f64),
    /// `mean + factor * std` of the shifted score of the series itself.
    MeanPlusStd(f64),
    /// `factor` times the root-mean-square of the negative score values.
    ///
    /// The score sits near zero when both batches share a distribution and
    /// only turns positive around a change, so the negative half measures
    /// the no-change fluctuation without being inflated by change peaks.
    NoiseFloor(f64),
}

impl Threshold {
    pub fn resolve(&self, values: &[f64]) -> f64 {
        match *self {
            Threshold::Absolute(v) => v,
            Threshold::MeanPlusStd(factor) => {
                if values.is_empty() {
                    return f64::INFINITY;
                }
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                mean + factor * libm::sqrt(var)
            }
            Threshold::NoiseFloor(factor) => {
                let (sum_sq, count) = values
                    .iter()
                    .filter(|v| **v < 0.0)
                    .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
                if count == 0 {
                    return 0.0;
                }
                factor * libm::sqrt(sum_sq / count as f64)
            }
        }
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::NoiseFloor(2.0)
    }
}

/// Greedy non-maximum suppression over local maxima.
///
/// Candidates are local maxima of `values` (strictly above the left
/// neighbour, not below the right one) at or above `threshold`. The highest
/// remaining candidate is emitted and every candidate closer than
/// `min_distance` to it is discarded. Ties go to the earlier time. Output is
/// sorted by time.
pub fn extract_peaks(times: &[i64], values: &[f64], threshold: f64, min_distance: usize) -> Vec<i64> {
    debug_assert_eq!(times.len(), values.len());
    let len = values.len();
    let mut candidates: Vec<usize> = (0..len)
        .filter(|&i| {
            let v = values[i];
            v >= threshold
                && (i == 0 || v > values[i - 1])
                && (i + 1 == len || v >= values[i + 1])
        })
        .collect();
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let min_distance = min_distance.max(1) as i64;
    let mut picked: Vec<i64> = Vec::new();
    for i in candidates {
        let t = times[i];
        if picked.iter().all(|&p| (p - t).abs() >= min_distance) {
            picked.push(t);
        }
    }
    picked.sort_unstable();
    picked
}
