use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{DetectorConfig, OnlineDetector, StepScore};
use crate::series::MiniBatch;
use crate::CpdError;

/// Push-based wrapper that feeds a detector one observation at a time.
///
/// Only the last `k + l + n - 1` observations are retained, so memory does
/// not grow with the stream. The scores match a batch run over the same
/// observations bit for bit.
#[derive(Clone, Debug)]
pub struct StreamingDetector<D> {
    detector: D,
    k: usize,
    n: usize,
    l: usize,
    dim: usize,
    window: VecDeque<f64>,
    capacity_rows: usize,
    seen: usize,
    start_index: i64,
}

impl<D: OnlineDetector> StreamingDetector<D> {
    /// `dim` is the raw observation dimension `d`; the detector must accept
    /// vectors of length `k * d`.
    pub fn new(detector: D, config: &DetectorConfig, dim: usize, start_index: i64) -> Result<Self, CpdError> {
        config.validate()?;
        if dim == 0 {
            return Err(CpdError::InvalidConfig("observation dimension must be >= 1".into()));
        }
        let capacity_rows = config.k + config.l + config.n - 1;
        Ok(Self {
            detector,
            k: config.k,
            n: config.n,
            l: config.l,
            dim,
            window: VecDeque::with_capacity(capacity_rows * dim),
            capacity_rows,
            seen: 0,
            start_index,
        })
    }

    pub fn detector(&self) -> &D {
        &self.detector
    }

    /// Rows currently retained.
    pub fn buffered(&self) -> usize {
        self.window.len() / self.dim
    }

    /// Ingests `x(t)`; returns the step output when `t` falls on the
    /// processing grid.
    pub fn push(&mut self, observation: &[f64]) -> Result<Option<(i64, StepScore)>, CpdError> {
        if observation.len() != self.dim {
            return Err(CpdError::InputDimensionMismatch {
                expected: self.dim,
                got: observation.len(),
            });
        }
        if observation.iter().any(|v| !v.is_finite()) {
            return Err(CpdError::InvalidSeries("non-finite observation".into()));
        }
        self.window.extend(observation.iter().copied());
        if self.buffered() > self.capacity_rows {
            self.window.drain(..self.dim);
        }
        self.seen += 1;
        let t = self.start_index + self.seen as i64 - 1;
        let warm_up = self.k + self.n + self.l;
        if self.seen < warm_up || !(self.seen - warm_up).is_multiple_of(self.n) {
            return Ok(None);
        }
        let reference = self.batch(t - self.l as i64, t)?;
        let test = self.batch(t, t)?;
        let score = self.detector.step(&reference, &test)?;
        Ok(Some((t, score)))
    }

    fn batch(&self, end: i64, now: i64) -> Result<MiniBatch, CpdError> {
        let rows = self.buffered() as i64;
        let oldest = now - rows + 1;
        let mut data = Vec::with_capacity(self.n * self.k * self.dim);
        for j in 0..self.n as i64 {
            for lag in 0..self.k as i64 {
                let s = end - j - lag;
                debug_assert!(s >= oldest);
                let i = (s - oldest) as usize * self.dim;
                data.extend(self.window.range(i..i + self.dim));
            }
        }
        MiniBatch::from_flat(data, self.k * self.dim, end)
    }
}
