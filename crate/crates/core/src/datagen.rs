//! Seeded synthetic benchmark series.
//!
//! Every family splits the series into `num_segments` segments of
//! `segment_length` observations; segment `N` (1-based) covers
//! `segment_length * (N - 1) < t <= segment_length * N` and the annotation
//! lists `segment_length * j` for `j = 1..num_segments`. Gaussian draws use
//! the ziggurat sampler over a ChaCha8 stream seeded from `seed`.

use alloc::format;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::series::{Annotation, TimeSeries};
use crate::CpdError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    MeanJumps,
    VarianceJumps,
    CovJumps,
    ClassAlternation,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::MeanJumps => "mean_jumps",
            Family::VarianceJumps => "variance_jumps",
            Family::CovJumps => "cov_jumps",
            Family::ClassAlternation => "class_alternation",
        }
    }
}

impl FromStr for Family {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean_jumps" => Ok(Family::MeanJumps),
            "variance_jumps" => Ok(Family::VarianceJumps),
            "cov_jumps" => Ok(Family::CovJumps),
            "class_alternation" => Ok(Family::ClassAlternation),
            other => Err(CpdError::InvalidConfig(format!(
                "unknown family `{other}` (expected mean_jumps, variance_jumps, cov_jumps or class_alternation)"
            ))),
        }
    }
}

/// Geometry and seed of one generated series.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub family: Family,
    pub segment_length: usize,
    pub num_segments: usize,
    /// Standard deviation of the additive noise (class alternation only).
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            segment_length: 200,
            num_segments: 10,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CpdError> {
        if self.segment_length == 0 {
            return Err(CpdError::InvalidConfig("segment_length must be >= 1".into()));
        }
        if self.num_segments < 2 {
            return Err(CpdError::InvalidConfig("num_segments must be >= 2".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CpdError::InvalidConfig("noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segment_length * self.num_segments
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn annotation(&self) -> Annotation {
        Annotation::new(
            (1..self.num_segments)
                .map(|j| (j * self.segment_length) as i64)
                .collect(),
        )
        .expect("increasing by construction")
    }
}

/// `mu_1 = 0`, `mu_N = mu_{N-1} + 0.2 N`.
pub fn mean_levels(num_segments: usize) -> Vec<f64> {
    let mut mu = 0.0;
    (1..=num_segments)
        .map(|n| {
            if n > 1 {
                mu += 0.2 * n as f64;
            }
            mu
        })
        .collect()
}

/// `sigma_N = 1` for odd `N`, `1 + 0.25 N` for even `N`.
pub fn sigma_levels(num_segments: usize) -> Vec<f64> {
    (1..=num_segments)
        .map(|n| if n % 2 == 0 { 1.0 + 0.25 * n as f64 } else { 1.0 })
        .collect()
}

/// Off-diagonal of `Sigma_N`: `-0.1 N` for odd `N`, `+0.1 N` for even `N`.
pub fn correlation_levels(num_segments: usize) -> Vec<f64> {
    (1..=num_segments)
        .map(|n| {
            let r = 0.1 * n as f64;
            if n % 2 == 0 {
                r
            } else {
                -r
            }
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_family(spec: &SyntheticSpec, family: Family) -> Result<(), CpdError> {
    spec.validate()?;
    if spec.family != family {
        return Err(CpdError::InvalidConfig(format!(
            "spec family is {}, expected {}",
            spec.family.name(),
            family.name()
        )));
    }
    Ok(())
}

fn univariate_segments(spec: &SyntheticSpec, mean_sd: impl Fn(usize) -> (f64, f64)) -> Result<(TimeSeries, Annotation), CpdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(spec.len());
    for seg in 0..spec.num_segments {
        let (mu, sd) = mean_sd(seg);
        values.extend((0..spec.segment_length).map(|_| mu + sd * normal(&mut rng)));
    }
    Ok((TimeSeries::univariate(values)?, spec.annotation()))
}

/// Unit-variance Gaussian with stepwise increasing mean.
pub fn gen_mean_jumps(spec: &SyntheticSpec) -> Result<(TimeSeries, Annotation), CpdError> {
    check_family(spec, Family::MeanJumps)?;
    let mu = mean_levels(spec.num_segments);
    univariate_segments(spec, |seg| (mu[seg], 1.0))
}

/// Zero-mean Gaussian whose standard deviation grows on even segments.
pub fn gen_variance_jumps(spec: &SyntheticSpec) -> Result<(TimeSeries, Annotation), CpdError> {
    check_family(spec, Family::VarianceJumps)?;
    let sigma = sigma_levels(spec.num_segments);
    univariate_segments(spec, |seg| (0.0, sigma[seg]))
}

/// Bivariate zero-mean Gaussian with unit variances and alternating
/// correlation. Sampled as `x1 = z1`, `x2 = r z1 + sqrt(1 - r^2) z2`, which
/// stays valid at `|r| = 1` (the default tenth segment); `|r| > 1` is refused.
pub fn gen_cov_jumps(spec: &SyntheticSpec) -> Result<(TimeSeries, Annotation), CpdError> {
    check_family(spec, Family::CovJumps)?;
    let rho = correlation_levels(spec.num_segments);
    if let Some((seg, &r)) = rho.iter().enumerate().find(|(_, r)| r.abs() > 1.0) {
        return Err(CpdError::DegenerateCovariance {
            segment: seg + 1,
            correlation: r,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(2 * spec.len());
    for &r in &rho {
        let c = libm::sqrt((1.0 - r * r).max(0.0));
        for _ in 0..spec.segment_length {
            let z1 = normal(&mut rng);
            let z2 = normal(&mut rng);
            values.push(z1);
            values.push(r * z1 + c * z2);
        }
    }
    Ok((TimeSeries::new(values, 2, 1)?, spec.annotation()))
}

/// True when the cov-jumps covariance of some segment is singular.
pub fn cov_jumps_is_degenerate(num_segments: usize) -> bool {
    correlation_levels(num_segments).iter().any(|r| r.abs() >= 1.0)
}

/// Labelled feature vectors used by the class-alternation construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledPool {
    dim: usize,
    positive: Vec<f64>,
    negative: Vec<f64>,
}

impl LabeledPool {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            positive: Vec::new(),
            negative: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], positive: bool) -> Result<(), CpdError> {
        if features.len() != self.dim || self.dim == 0 {
            return Err(CpdError::InputDimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CpdError::InvalidSeries("non-finite feature in pool".into()));
        }
        let target = if positive { &mut self.positive } else { &mut self.negative };
        target.extend_from_slice(features);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positives(&self) -> usize {
        self.positive.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn negatives(&self) -> usize {
        self.negative.len().checked_div(self.dim).unwrap_or(0)
    }
}

/// Standardises every column to mean 0 and variance 1 in place. Constant
/// columns become all zeros.
pub fn standardize_columns(values: &mut [f64], dim: usize) {
    let rows = values.len() / dim;
    if rows == 0 {
        return;
    }
    for c in 0..dim {
        let mean = values.iter().skip(c).step_by(dim).sum::<f64>() / rows as f64;
        let var = values
            .iter()
            .skip(c)
            .step_by(dim)
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / rows as f64;
        let sd = libm::sqrt(var);
        for v in values.iter_mut().skip(c).step_by(dim) {
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
    }
}

/// Odd segments draw positives, even segments negatives (with replacement);
/// columns are then standardised and `N(0, noise_sigma)` noise is added.
pub fn gen_class_alternation(
    pool: &LabeledPool,
    segment_length: usize,
    num_segments: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(TimeSeries, Annotation), CpdError> {
    let spec = SyntheticSpec {
        family: Family::ClassAlternation,
        segment_length,
        num_segments,
        noise_sigma,
        seed,
    };
    spec.validate()?;
    if pool.positives() == 0 || pool.negatives() == 0 {
        return Err(CpdError::MissingClassExamples);
    }
    let dim = pool.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.len() * dim);
    for seg in 1..=num_segments {
        let (src, count) = if seg % 2 == 0 {
            (&pool.negative, pool.negatives())
        } else {
            (&pool.positive, pool.positives())
        };
        for _ in 0..segment_length {
            let i = rng.random_range(0..count);
            values.extend_from_slice(&src[i * dim..(i + 1) * dim]);
        }
    }
    standardize_columns(&mut values, dim);
    if noise_sigma > 0.0 {
        for v in values.iter_mut() {
            *v += noise_sigma * normal(&mut rng);
        }
    }
    Ok((TimeSeries::new(values, dim, 1)?, spec.annotation()))
}

/// Dispatches on `spec.family`; class alternation needs a pool.
pub fn generate(spec: &SyntheticSpec, pool: Option<&LabeledPool>) -> Result<(TimeSeries, Annotation), CpdError> {
    match spec.family {
        Family::MeanJumps => gen_mean_jumps(spec),
        Family::VarianceJumps => gen_variance_jumps(spec),
        Family::CovJumps => gen_cov_jumps(spec),
        Family::ClassAlternation => {
            let pool = pool.ok_or(CpdError::MissingClassExamples)?;
            gen_class_alternation(pool, spec.segment_length, spec.num_segments, spec.noise_sigma, spec.seed)
        }
    }
}

/// Independent identically distributed `N(0, 1)` series of length `len`.
pub fn gen_white_noise(len: usize, dim: usize, seed: u64) -> Result<TimeSeries, CpdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..len * dim).map(|_| normal(&mut rng)).collect();
    TimeSeries::new(values, dim, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn segment(series: &TimeSeries, seg: usize, len: usize) -> Vec<&[f64]> {
        series.rows().skip(seg * len).take(len).collect()
    }

    fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = xs.clone().count() as f64;
        xs.sum::<f64>() / n
    }

    #[test]
    fn level_sequences() {
        let mu = mean_levels(10);
        let expected = [0.0, 0.4, 1.0, 1.8, 2.8, 4.0, 5.4, 7.0, 8.8, 10.8];
        for (a, b) in mu.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{mu:?}");
        }
        assert_eq!(sigma_levels(10), vec![1.0, 1.5, 1.0, 2.0, 1.0, 2.5, 1.0, 3.0, 1.0, 3.5]);
        let rho = correlation_levels(10);
        assert!((rho[1] - 0.2).abs() < 1e-12 && (rho[2] + 0.3).abs() < 1e-12);
        assert_eq!(rho[9], 1.0);
        assert!(rho[..9].iter().all(|r| r.abs() < 1.0));
    }

    #[test]
    fn mean_jumps_geometry_and_moments() {
        let spec = SyntheticSpec::new(Family::MeanJumps, 7);
        let (s, a) = gen_mean_jumps(&spec).unwrap();
        assert_eq!((s.len(), s.dim()), (2000, 1));
        assert_eq!(a.positions(), &[200, 400, 600, 800, 1000, 1200, 1400, 1600, 1800]);
        let m = mean(segment(&s, 0, 200).into_iter().map(|r| r[0]));
        assert!(m.abs() < 0.21, "{m}");
        assert_eq!(gen_mean_jumps(&spec).unwrap().0, s);
        assert_ne!(gen_mean_jumps(&SyntheticSpec::new(Family::MeanJumps, 8)).unwrap().0, s);
    }

    #[test]
    fn variance_jumps_segment_std() {
        let (s, a) = gen_variance_jumps(&SyntheticSpec::new(Family::VarianceJumps, 3)).unwrap();
        assert_eq!(a.len(), 9);
        let seg: Vec<f64> = segment(&s, 3, 200).into_iter().map(|r| r[0]).collect();
        let m = mean(seg.iter().copied());
        let sd = libm::sqrt(mean(seg.iter().map(|v| (v - m) * (v - m))));
        assert!((sd - 2.0).abs() < 0.2, "{sd}");
    }

    fn correlation(rows: &[&[f64]]) -> f64 {
        let mx = mean(rows.iter().map(|r| r[0]));
        let my = mean(rows.iter().map(|r| r[1]));
        let cov = mean(rows.iter().map(|r| (r[0] - mx) * (r[1] - my)));
        let vx = mean(rows.iter().map(|r| (r[0] - mx) * (r[0] - mx)));
        let vy = mean(rows.iter().map(|r| (r[1] - my) * (r[1] - my)));
        cov / libm::sqrt(vx * vy)
    }

    #[test]
    fn cov_jumps_correlations() {
        // one segment of 200 has a sampling sd near 0.07, so average 10 series
        let seeds = 10;
        let mut avg = [0.0; 10];
        for seed in 0..seeds {
            let (s, _) = gen_cov_jumps(&SyntheticSpec::new(Family::CovJumps, seed)).unwrap();
            assert_eq!(s.dim(), 2);
            for (seg, a) in avg.iter_mut().enumerate() {
                *a += correlation(&segment(&s, seg, 200)) / seeds as f64;
            }
        }
        assert!((avg[1] - 0.2).abs() < 0.1, "{avg:?}");
        assert!((avg[2] + 0.3).abs() < 0.1, "{avg:?}");
        for (a, r) in avg.iter().zip(correlation_levels(10)) {
            assert!((a - r).abs() < 0.1, "{avg:?}");
        }
        assert!((avg[9] - 1.0).abs() < 1e-9);
        assert!(cov_jumps_is_degenerate(10));
        assert!(!cov_jumps_is_degenerate(9));
    }

    #[test]
    fn cov_jumps_beyond_unit_correlation_rejected() {
        let mut spec = SyntheticSpec::new(Family::CovJumps, 0);
        spec.num_segments = 11;
        assert!(matches!(
            gen_cov_jumps(&spec).unwrap_err(),
            CpdError::DegenerateCovariance { segment: 11, .. }
        ));
    }

    #[test]
    fn wrong_family_rejected() {
        assert!(gen_mean_jumps(&SyntheticSpec::new(Family::CovJumps, 0)).is_err());
        assert!("sine_waves".parse::<Family>().is_err());
        assert_eq!("cov_jumps".parse::<Family>().unwrap(), Family::CovJumps);
    }

    fn two_point_pool() -> LabeledPool {
        let mut pool = LabeledPool::new(2);
        pool.push(&[5.0, -1.0], true).unwrap();
        pool.push(&[1.0, 3.0], false).unwrap();
        pool
    }

    #[test]
    fn class_alternation_square_wave() {
        let (s, a) = gen_class_alternation(&two_point_pool(), 50, 4, 0.0, 1).unwrap();
        assert_eq!(a.positions(), &[50, 100, 150]);
        let col0: Vec<f64> = s.rows().map(|r| r[0]).collect();
        assert!(col0[..50].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(col0[50..100].iter().all(|v| (v + 1.0).abs() < 1e-12));
        let col1: Vec<f64> = s.rows().map(|r| r[1]).collect();
        assert!(col1[..50].iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn class_alternation_standardized_then_noised() {
        let mut pool = LabeledPool::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..40 {
            let row: Vec<f64> = (0..3).map(|c| normal(&mut rng) * (c + 1) as f64 + i as f64 * 0.1).collect();
            pool.push(&row, i % 3 == 0).unwrap();
        }
        let (clean, _) = gen_class_alternation(&pool, 200, 10, 0.0, 5).unwrap();
        for c in 0..3 {
            let col = clean.rows().map(|r| r[c]);
            let m = mean(col.clone());
            let v = mean(col.map(|x| (x - m) * (x - m)));
            assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        }
        let (noisy, _) = gen_class_alternation(&pool, 200, 10, 2.0, 5).unwrap();
        for c in 0..3 {
            let col = noisy.rows().map(|r| r[c]);
            let m = mean(col.clone());
            let v = mean(col.map(|x| (x - m) * (x - m)));
            assert!((v - 5.0).abs() < 0.5, "column {c} variance {v}");
        }
    }

    #[test]
    fn class_alternation_needs_both_classes() {
        let mut pool = LabeledPool::new(1);
        pool.push(&[1.0], true).unwrap();
        assert_eq!(
            gen_class_alternation(&pool, 10, 2, 0.0, 0).unwrap_err(),
            CpdError::MissingClassExamples
        );
    }
}
