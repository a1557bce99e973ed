//! Time series, the autoregressive embedding and mini-batches.
//!
//! Time is 1-based by default: the first observation of a [`TimeSeries`] sits
//! at `start_index` (usually 1) and every time index used elsewhere in the
//! crate is expressed on that axis.

use alloc::format;
use alloc::vec::Vec;

use crate::CpdError;

/// `T` observations of dimension `d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    len: usize,
    dim: usize,
    start_index: i64,
}

impl TimeSeries {
    /// Builds a series from row-major values. Rejects empty input and any
    /// non-finite entry.
    pub fn new(values: Vec<f64>, dim: usize, start_index: i64) -> Result<Self, CpdError> {
        if dim == 0 {
            return Err(CpdError::InvalidSeries("dimension must be >= 1".into()));
        }
        if values.is_empty() {
            return Err(CpdError::InvalidSeries("series is empty".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(CpdError::InvalidSeries(format!(
                "{} values do not fill rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CpdError::InvalidSeries(format!(
                "non-finite value at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        let len = values.len() / dim;
        Ok(Self {
            values,
            len,
            dim,
            start_index,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], start_index: i64) -> Result<Self, CpdError> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(CpdError::InvalidSeries(format!(
                    "row {} has {} columns, expected {dim}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, dim, start_index)
    }

    /// One-dimensional series starting at index 1.
    pub fn univariate(values: Vec<f64>) -> Result<Self, CpdError> {
        Self::new(values, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    /// Time index of the last observation.
    pub fn end_index(&self) -> i64 {
        self.start_index + self.len as i64 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Observation at time `t`, if inside the series.
    pub fn at(&self, t: i64) -> Option<&[f64]> {
        let offset = t.checked_sub(self.start_index)?;
        if offset < 0 || offset as usize >= self.len {
            return None;
        }
        let i = offset as usize * self.dim;
        Some(&self.values[i..i + self.dim])
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    /// Concatenates `other` after `self`, keeping `self`'s start index.
    pub fn concat(&self, other: &TimeSeries) -> Result<TimeSeries, CpdError> {
        if other.dim != self.dim {
            return Err(CpdError::InvalidSeries(format!(
                "cannot concatenate dimension {} onto {}",
                other.dim, self.dim
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        TimeSeries::new(values, self.dim, self.start_index)
    }
}

/// `X(t) = [x(t); x(t-1); ...; x(t-k+1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedVector {
    pub data: Vec<f64>,
    pub time_index: i64,
}

/// Lazy autoregressive view over a series; no stacked copy is kept.
#[derive(Clone, Copy, Debug)]
pub struct Embedding<'a> {
    series: &'a TimeSeries,
    k: usize,
}

/// Builds the depth-`k` embedding of `series`.
pub fn embed(series: &TimeSeries, k: usize) -> Result<Embedding<'_>, CpdError> {
    Embedding::new(series, k)
}

impl<'a> Embedding<'a> {
    pub fn new(series: &'a TimeSeries, k: usize) -> Result<Self, CpdError> {
        if k == 0 {
            return Err(CpdError::InvalidConfig("embedding depth k must be >= 1".into()));
        }
        if series.len() < k {
            return Err(CpdError::SeriesTooShortForEmbedding {
                len: series.len(),
                k,
            });
        }
        Ok(Self { series, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn series(&self) -> &'a TimeSeries {
        self.series
    }

    /// Length of one combined vector, `k * d`.
    pub fn vector_dim(&self) -> usize {
        self.k * self.series.dim()
    }

    /// First time with a full history of `k` observations.
    pub fn first_time(&self) -> i64 {
        self.series.start_index() + self.k as i64 - 1
    }

    pub fn last_time(&self) -> i64 {
        self.series.end_index()
    }

    /// Number of combined vectors, `T - k + 1`.
    pub fn len(&self) -> usize {
        self.series.len() - self.k + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.first_time() && t <= self.last_time()
    }

    /// Writes `X(t)` into `out`, which must be `vector_dim()` long.
    pub fn write_vector(&self, t: i64, out: &mut [f64]) -> Result<(), CpdError> {
        if !self.contains(t) {
            return Err(CpdError::BatchOutOfRange { t, n: 1 });
        }
        debug_assert_eq!(out.len(), self.vector_dim());
        let d = self.series.dim();
        for (lag, chunk) in out.chunks_exact_mut(d).enumerate() {
            // in range: t - lag >= first_time - (k - 1) = start_index
            let row = self.series.at(t - lag as i64).expect("lag within embedding");
            chunk.copy_from_slice(row);
        }
        Ok(())
    }

    pub fn vector(&self, t: i64) -> Result<CombinedVector, CpdError> {
        let mut data = alloc::vec![0.0; self.vector_dim()];
        self.write_vector(t, &mut data)?;
        Ok(CombinedVector {
            data,
            time_index: t,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = CombinedVector> + '_ {
        (self.first_time()..=self.last_time()).map(move |t| self.vector(t).expect("in range"))
    }

    /// The `n` combined vectors at `t, t-1, ..., t-n+1`.
    pub fn mini_batch(&self, t: i64, n: usize) -> Result<MiniBatch, CpdError> {
        let mut batch = MiniBatch::with_capacity(self.vector_dim(), n);
        self.fill_batch(t, n, &mut batch)?;
        Ok(batch)
    }

    /// Like [`Embedding::mini_batch`] but reuses `batch`'s allocation.
    pub fn fill_batch(&self, t: i64, n: usize, batch: &mut MiniBatch) -> Result<(), CpdError> {
        if n == 0 || !self.contains(t) || !self.contains(t - n as i64 + 1) {
            return Err(CpdError::BatchOutOfRange { t, n });
        }
        let dim = self.vector_dim();
        batch.dim = dim;
        batch.end_time = t;
        batch.data.clear();
        batch.data.resize(n * dim, 0.0);
        for (j, chunk) in batch.data.chunks_exact_mut(dim).enumerate() {
            self.write_vector(t - j as i64, chunk)?;
        }
        Ok(())
    }
}

/// `n` consecutive combined vectors ending at `end_time`, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct MiniBatch {
    data: Vec<f64>,
    dim: usize,
    end_time: i64,
}

impl MiniBatch {
    fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            data: Vec::with_capacity(dim * n),
            dim,
            end_time: 0,
        }
    }

    /// Batch from flat row-major vectors (newest first).
    pub fn from_flat(data: Vec<f64>, dim: usize, end_time: i64) -> Result<Self, CpdError> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(CpdError::InvalidSeries(format!(
                "{} values do not form vectors of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            dim,
            end_time,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn end_time(&self) -> i64 {
        self.end_time
    }

    /// Time index of the `j`-th vector (0 = newest).
    pub fn time_of(&self, j: usize) -> i64 {
        self.end_time - j as i64
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }
}

/// Sorted, strictly increasing change-point positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotation {
    cps: Vec<i64>,
}

impl Annotation {
    pub fn new(cps: Vec<i64>) -> Result<Self, CpdError> {
        if let Some(w) = cps.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CpdError::InvalidAnnotation(format!(
                "positions must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { cps })
    }

    /// Checks that every position lies in `[lo, hi]`.
    pub fn check_range(&self, lo: i64, hi: i64) -> Result<(), CpdError> {
        match self.cps.iter().find(|&&c| c < lo || c > hi) {
            Some(c) => Err(CpdError::InvalidAnnotation(format!(
                "position {c} outside [{lo}, {hi}]"
            ))),
            None => Ok(()),
        }
    }

    pub fn positions(&self) -> &[i64] {
        &self.cps
    }

    pub fn len(&self) -> usize {
        self.cps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cps.is_empty()
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.cps
    }
}
