//! The online detectors and the batch driver that runs them over a series.
//!
//! Both detectors move along the embedded series in steps of `n`. At time
//! `t` they compare the reference batch ending at `t - l` with the test batch
//! ending at `t`: first the pair is scored with the current network(s), the
//! raw score goes through the running mean, and only then the network(s)
//! take `n_epochs` Adam steps on that pair. Each pair is seen once.

mod loss;
mod score;
mod stream;

use alloc::format;
use alloc::vec::Vec;

pub use loss::{
    onnc_dissimilarity, onnc_dissimilarity_from_outputs, onnc_loss, onnc_loss_from_outputs, onnc_loss_grad,
    onnr_loss, onnr_loss_from_outputs, onnr_loss_grad, onnr_score, onnr_score_from_outputs, CLASSIFIER_CLAMP,
};
pub use score::{extract_peaks, update_running_mean, RunningMean, ScoreSeries, Threshold};
pub use stream::StreamingDetector;

use crate::nn::{Architecture, Head, NeuralNet};
use crate::series::{Embedding, MiniBatch, TimeSeries};
use crate::CpdError;

/// Peak extraction settings.
#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct PeakParams {
    pub threshold: Threshold,
    /// Minimum spacing of detections; `None` means the lag `l`.
    pub min_distance: Option<usize>,
}


/// Hyperparameters shared by both detectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    /// Embedding depth.
    pub k: usize,
    /// Mini-batch size.
    pub n: usize,
    /// Lag between the reference and test batches.
    pub l: usize,
    /// Optimizer steps per batch pair.
    pub n_epochs: usize,
    pub lr: f64,
    /// Relative-ratio mixing weight, ONNR only.
    pub alpha: f64,
    pub arch: Architecture,
    /// Output head of the ONNR ratio networks.
    pub ratio_head: Head,
    pub seed: u64,
    pub peaks: PeakParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k: 1,
            n: 10,
            l: 100,
            n_epochs: 10,
            lr: 0.01,
            alpha: 0.1,
            arch: Architecture::default(),
            ratio_head: Head::Linear,
            seed: 0,
            peaks: PeakParams::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), CpdError> {
        let fail = |msg: alloc::string::String| Err(CpdError::InvalidConfig(msg));
        if self.k == 0 {
            return fail("k must be >= 1".into());
        }
        if self.n == 0 {
            return fail("n must be >= 1".into());
        }
        if self.l < self.n {
            return fail(format!("l must be >= n (l={}, n={})", self.l, self.n));
        }
        if !self.l.is_multiple_of(self.n) {
            return fail(format!("n must divide l (l={}, n={})", self.l, self.n));
        }
        if self.n_epochs == 0 {
            return fail("n_epochs must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be finite and > 0 (lr={})", self.lr));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1) (alpha={})", self.alpha));
        }
        if self.arch.hidden.contains(&0) {
            return fail("hidden widths must be >= 1".into());
        }
        if !self.ratio_head.is_ratio() {
            return fail("ratio_head must be softplus or linear".into());
        }
        if self.peaks.min_distance == Some(0) {
            return fail("min_distance must be >= 1".into());
        }
        Ok(())
    }

    /// Minimum series length, `k + n + l`.
    pub fn warm_up(&self) -> usize {
        self.k + self.n + self.l
    }

    pub fn min_distance(&self) -> usize {
        self.peaks.min_distance.unwrap_or(self.l)
    }
}

/// Output of one detector step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepScore {
    pub raw: f64,
    pub smoothed: f64,
}

/// Common interface of the two online detectors.
pub trait OnlineDetector {
    /// Scores the pair, updates the running mean, then trains on the pair.
    fn step(&mut self, reference: &MiniBatch, test: &MiniBatch) -> Result<StepScore, CpdError>;

    /// Persistent state in `f64` slots: network parameters, Adam moments and
    /// the raw-score buffer. Independent of the series length.
    fn state_len(&self) -> usize;

    fn score_slots(&self) -> usize;

    /// Optimizer updates skipped because of a non-finite gradient.
    fn skipped_updates(&self) -> u64;
}

/// Runs `n_epochs` Adam steps on one pair. `first` holds the outputs of a
/// forward pass over `inputs` made with the current parameters.
fn train_pair(
    net: &mut NeuralNet,
    inputs: &[f64],
    n_ref: usize,
    n_epochs: usize,
    first: Vec<f64>,
    upstream: &mut Vec<f64>,
    grad_fn: impl Fn(&[f64], &[f64], &mut Vec<f64>),
) -> Result<(), CpdError> {
    let count = inputs.len() / net.dim_in();
    let mut outputs = first;
    for epoch in 0..n_epochs {
        if epoch > 0 {
            outputs = net.forward_flat(inputs, count)?;
        }
        grad_fn(&outputs[..n_ref], &outputs[n_ref..], upstream);
        let grad = net.backward(upstream)?;
        match net.adam_step(&grad) {
            Ok(()) | Err(CpdError::NonFiniteGradient) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn concat_into(buf: &mut Vec<f64>, a: &MiniBatch, b: &MiniBatch) {
    buf.clear();
    buf.extend_from_slice(a.as_flat());
    buf.extend_from_slice(b.as_flat());
}

fn check_pair(dim: usize, reference: &MiniBatch, test: &MiniBatch) -> Result<(), CpdError> {
    for b in [reference, test] {
        if b.dim() != dim {
            return Err(CpdError::InputDimensionMismatch {
                expected: dim,
                got: b.dim(),
            });
        }
    }
    if reference.batch_size() != test.batch_size() {
        return Err(CpdError::InvalidConfig(format!(
            "mini-batch sizes differ ({} vs {})",
            reference.batch_size(),
            test.batch_size()
        )));
    }
    Ok(())
}

/// Classification detector: one sigmoid network separates the reference
/// batch (class 0) from the test batch (class 1).
#[derive(Clone, Debug)]
pub struct Onnc {
    net: NeuralNet,
    buffer: RunningMean,
    n_epochs: usize,
    inputs: Vec<f64>,
    upstream: Vec<f64>,
}

impl Onnc {
    /// `dim` is the combined-vector length `k * d`.
    pub fn new(config: &DetectorConfig, dim: usize) -> Result<Self, CpdError> {
        config.validate()?;
        let net = NeuralNet::init(dim, &config.arch, Head::Sigmoid, config.lr, config.seed)?;
        Ok(Self::from_net(net, config))
    }

    /// Uses an existing classifier network.
    pub fn from_net(net: NeuralNet, config: &DetectorConfig) -> Self {
        Self {
            net,
            buffer: RunningMean::new(config.l, config.n),
            n_epochs: config.n_epochs,
            inputs: Vec::new(),
            upstream: Vec::new(),
        }
    }

    pub fn net(&self) -> &NeuralNet {
        &self.net
    }
}

impl OnlineDetector for Onnc {
    fn step(&mut self, reference: &MiniBatch, test: &MiniBatch) -> Result<StepScore, CpdError> {
        if self.net.head() != Head::Sigmoid {
            return Err(CpdError::ClassificationHeadRequired);
        }
        check_pair(self.net.dim_in(), reference, test)?;
        let n_ref = reference.batch_size();
        concat_into(&mut self.inputs, reference, test);
        let outputs = self.net.forward_flat(&self.inputs, 2 * n_ref)?;
        let raw = onnc_dissimilarity_from_outputs(&outputs[..n_ref], &outputs[n_ref..]);
        let smoothed = self.buffer.update(raw);
        train_pair(
            &mut self.net,
            &self.inputs,
            n_ref,
            self.n_epochs,
            outputs,
            &mut self.upstream,
            |r, t, up| {
                onnc_loss_grad(r, t, up);
            },
        )?;
        Ok(StepScore { raw, smoothed })
    }

    fn state_len(&self) -> usize {
        self.net.state_len() + self.buffer.len()
    }

    fn score_slots(&self) -> usize {
        self.buffer.len()
    }

    fn skipped_updates(&self) -> u64 {
        self.net.skipped_updates()
    }
}

/// Regression detector: two softplus networks estimate the density ratio in
/// both directions and their Pearson scores are summed.
#[derive(Clone, Debug)]
pub struct Onnr {
    forward_net: NeuralNet,
    backward_net: NeuralNet,
    buffer: RunningMean,
    n_epochs: usize,
    alpha: f64,
    inputs: Vec<f64>,
    swapped: Vec<f64>,
    upstream: Vec<f64>,
}

impl Onnr {
    /// Networks are seeded with `seed` and `seed + 1`.
    pub fn new(config: &DetectorConfig, dim: usize) -> Result<Self, CpdError> {
        Self::with_seeds(config, dim, config.seed, config.seed.wrapping_add(1))
    }

    pub fn with_seeds(config: &DetectorConfig, dim: usize, seed_forward: u64, seed_backward: u64) -> Result<Self, CpdError> {
        config.validate()?;
        let g1 = NeuralNet::init(dim, &config.arch, config.ratio_head, config.lr, seed_forward)?;
        let g2 = NeuralNet::init(dim, &config.arch, config.ratio_head, config.lr, seed_backward)?;
        Ok(Self {
            forward_net: g1,
            backward_net: g2,
            buffer: RunningMean::new(config.l, config.n),
            n_epochs: config.n_epochs,
            alpha: config.alpha,
            inputs: Vec::new(),
            swapped: Vec::new(),
            upstream: Vec::new(),
        })
    }

    /// Network estimating `p_test / p_ref`.
    pub fn forward_net(&self) -> &NeuralNet {
        &self.forward_net
    }

    /// Network estimating `p_ref / p_test`.
    pub fn backward_net(&self) -> &NeuralNet {
        &self.backward_net
    }
}

impl OnlineDetector for Onnr {
    fn step(&mut self, reference: &MiniBatch, test: &MiniBatch) -> Result<StepScore, CpdError> {
        check_pair(self.forward_net.dim_in(), reference, test)?;
        let n = reference.batch_size();
        concat_into(&mut self.inputs, reference, test);
        concat_into(&mut self.swapped, test, reference);

        let out1 = self.forward_net.forward_flat(&self.inputs, 2 * n)?;
        let out2 = self.backward_net.forward_flat(&self.swapped, 2 * n)?;
        let d1 = onnr_score_from_outputs(&out1[n..]);
        let d2 = onnr_score_from_outputs(&out2[n..]);
        let raw = d1 + d2;
        let smoothed = self.buffer.update(raw);

        let alpha = self.alpha;
        let grad = |r: &[f64], t: &[f64], up: &mut Vec<f64>| {
            onnr_loss_grad(r, t, alpha, up);
        };
        train_pair(&mut self.forward_net, &self.inputs, n, self.n_epochs, out1, &mut self.upstream, grad)?;
        train_pair(&mut self.backward_net, &self.swapped, n, self.n_epochs, out2, &mut self.upstream, grad)?;
        Ok(StepScore { raw, smoothed })
    }

    fn state_len(&self) -> usize {
        self.forward_net.state_len() + self.backward_net.state_len() + self.buffer.len()
    }

    fn score_slots(&self) -> usize {
        self.buffer.len()
    }

    fn skipped_updates(&self) -> u64 {
        self.forward_net.skipped_updates() + self.backward_net.skipped_updates()
    }
}

/// Source of monotonic nanoseconds for per-step timing.
pub trait Clock {
    fn now_nanos(&mut self) -> u64;
}

/// Clock that never advances; used when timing is not wanted.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_nanos(&mut self) -> u64 {
        0
    }
}

/// Wall-time statistics over all detector steps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepTiming {
    pub steps: usize,
    pub total_nanos: u64,
    pub max_nanos: u64,
}

impl StepTiming {
    pub fn mean_nanos(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_nanos as f64 / self.steps as f64
        }
    }
}

/// Shifted score, detected change points and run bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub score: ScoreSeries,
    pub detected: Vec<i64>,
    pub threshold: f64,
    pub timing: StepTiming,
    pub skipped_updates: u64,
    /// Persistent detector state in `f64` slots at the end of the run.
    pub state_len: usize,
}

/// Which detector to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Onnc,
    Onnr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Onnc => "onnc",
            Algorithm::Onnr => "onnr",
        }
    }
}

impl core::str::FromStr for Algorithm {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "onnc" => Ok(Algorithm::Onnc),
            "onnr" => Ok(Algorithm::Onnr),
            other => Err(CpdError::InvalidConfig(format!("unknown algorithm `{other}` (expected onnc or onnr)"))),
        }
    }
}

/// Feeds every batch pair of `series` through `detector` and returns the raw
/// score series (unshifted).
pub fn score_series<D: OnlineDetector, C: Clock>(
    detector: &mut D,
    series: &TimeSeries,
    config: &DetectorConfig,
    clock: &mut C,
) -> Result<(ScoreSeries, StepTiming), CpdError> {
    config.validate()?;
    if series.len() < config.warm_up() {
        return Err(CpdError::SeriesShorterThanWarmUp {
            len: series.len(),
            required: config.warm_up(),
        });
    }
    let embedding = Embedding::new(series, config.k)?;
    let (l, n) = (config.l as i64, config.n);
    let first = series.start_index() - 1 + config.warm_up() as i64;
    let last = series.end_index();
    let steps = ((last - first) / n as i64 + 1) as usize;

    let mut times = Vec::with_capacity(steps);
    let mut raw = Vec::with_capacity(steps);
    let mut smoothed = Vec::with_capacity(steps);
    let mut timing = StepTiming::default();
    let mut reference = embedding.mini_batch(first - l, n)?;
    let mut test = embedding.mini_batch(first, n)?;

    let mut t = first;
    while t <= last {
        embedding.fill_batch(t - l, n, &mut reference)?;
        embedding.fill_batch(t, n, &mut test)?;
        let start = clock.now_nanos();
        let s = detector.step(&reference, &test)?;
        let elapsed = clock.now_nanos().saturating_sub(start);
        timing.steps += 1;
        timing.total_nanos += elapsed;
        timing.max_nanos = timing.max_nanos.max(elapsed);
        times.push(t);
        raw.push(s.raw);
        smoothed.push(s.smoothed);
        t += n as i64;
    }
    Ok((ScoreSeries::new(times, raw, smoothed)?, timing))
}

/// Shifts a raw score series and extracts peaks with the configured rule.
pub fn detect_from_score(score: &ScoreSeries, config: &DetectorConfig) -> Result<(ScoreSeries, Vec<i64>, f64), CpdError> {
    let shifted = score.shift_offline(config.l, config.n)?;
    let threshold = config.peaks.threshold.resolve(shifted.shifted());
    let times: Vec<i64> = shifted.shifted_times().collect();
    let detected = extract_peaks(&times, shifted.shifted(), threshold, config.min_distance());
    Ok((shifted, detected, threshold))
}

/// Full pipeline with an arbitrary detector and clock.
pub fn run_detector<D: OnlineDetector, C: Clock>(
    mut detector: D,
    series: &TimeSeries,
    config: &DetectorConfig,
    clock: &mut C,
) -> Result<DetectionResult, CpdError> {
    let (score, timing) = score_series(&mut detector, series, config, clock)?;
    let (score, detected, threshold) = detect_from_score(&score, config)?;
    Ok(DetectionResult {
        score,
        detected,
        threshold,
        timing,
        skipped_updates: detector.skipped_updates(),
        state_len: detector.state_len(),
    })
}

pub fn run_onnc(series: &TimeSeries, config: &DetectorConfig) -> Result<DetectionResult, CpdError> {
    run_algorithm(Algorithm::Onnc, series, config, &mut NoClock)
}

pub fn run_onnr(series: &TimeSeries, config: &DetectorConfig) -> Result<DetectionResult, CpdError> {
    run_algorithm(Algorithm::Onnr, series, config, &mut NoClock)
}

pub fn run_algorithm<C: Clock>(
    algo: Algorithm,
    series: &TimeSeries,
    config: &DetectorConfig,
    clock: &mut C,
) -> Result<DetectionResult, CpdError> {
    let dim = config.k * series.dim();
    match algo {
        Algorithm::Onnc => run_detector(Onnc::new(config, dim)?, series, config, clock),
        Algorithm::Onnr => run_detector(Onnr::new(config, dim)?, series, config, clock),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ramp(len: usize) -> TimeSeries {
        TimeSeries::univariate((0..len).map(|i| libm::sin(i as f64 * 0.37)).collect()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = |f: fn(&mut DetectorConfig)| {
            let mut c = DetectorConfig::default();
            f(&mut c);
            c.validate().unwrap_err()
        };
        let e = bad(|c| c.n = 7);
        assert!(e.to_string_lossy().contains("n must divide l"), "{e:?}");
        bad(|c| c.n = 0);
        bad(|c| c.l = 5);
        bad(|c| c.k = 0);
        bad(|c| c.n_epochs = 0);
        bad(|c| c.alpha = 1.0);
        bad(|c| c.alpha = 0.0);
        bad(|c| c.lr = 0.0);
    }

    trait Lossy {
        fn to_string_lossy(&self) -> alloc::string::String;
    }
    impl Lossy for CpdError {
        fn to_string_lossy(&self) -> alloc::string::String {
            alloc::format!("{self}")
        }
    }

    #[test]
    fn too_short_series_rejected() {
        let cfg = DetectorConfig { l: 20, n: 5, ..Default::default() };
        let s = ramp(cfg.warm_up() - 1);
        assert_eq!(
            run_onnc(&s, &cfg).unwrap_err(),
            CpdError::SeriesShorterThanWarmUp { len: 25, required: 26 }
        );
        assert!(run_onnc(&ramp(cfg.warm_up()), &cfg).is_ok());
    }

    #[test]
    fn grid_and_shift_alignment() {
        let cfg = DetectorConfig { l: 20, n: 5, n_epochs: 1, ..Default::default() };
        let s = ramp(100);
        let res = run_onnr(&s, &cfg).unwrap();
        let times = res.score.times();
        assert_eq!(times[0], 26);
        assert_eq!(*times.last().unwrap(), 96);
        assert!(times.windows(2).all(|w| w[1] - w[0] == 5));
        assert_eq!(res.score.shifted_times().next(), Some(1));
        assert_eq!(res.score.replay(cfg.l, cfg.n), res.score.smoothed());
    }

    #[test]
    fn runs_are_bit_identical() {
        let cfg = DetectorConfig { l: 20, n: 2, n_epochs: 3, lr: 0.1, ..Default::default() };
        let s = ramp(300);
        assert_eq!(run_onnc(&s, &cfg).unwrap(), run_onnc(&s, &cfg).unwrap());
        assert_eq!(run_onnr(&s, &cfg).unwrap(), run_onnr(&s, &cfg).unwrap());
    }

    #[test]
    fn unit_ratio_networks_score_zero() {
        // zero weights plus an output bias mapping to 1 give g == 1
        for (head, b) in [
            (Head::Linear, 1.0),
            (Head::Softplus, libm::log(core::f64::consts::E - 1.0)),
        ] {
            let cfg = DetectorConfig { l: 10, n: 5, n_epochs: 1, lr: 1e-12, ratio_head: head, ..Default::default() };
            let mut det = Onnr::new(&cfg, 1).unwrap();
            for net in [&mut det.forward_net, &mut det.backward_net] {
                let p = net.parameters_mut();
                p.iter_mut().for_each(|x| *x = 0.0);
                *p.last_mut().unwrap() = b;
            }
            let reference = MiniBatch::from_flat(vec![0.1, 0.2, 0.3, 0.4, 0.5], 1, 5).unwrap();
            let test = MiniBatch::from_flat(vec![9.0, 8.0, 7.0, 6.0, 5.0], 1, 15).unwrap();
            let s = det.step(&reference, &test).unwrap();
            assert!(s.raw.abs() < 1e-12, "{head:?}: {}", s.raw);
        }
    }

    #[test]
    fn onnr_is_symmetric_under_role_swap() {
        let cfg = DetectorConfig { l: 20, n: 5, n_epochs: 3, lr: 0.05, ..Default::default() };
        let s = ramp(400);
        let e = Embedding::new(&s, 1).unwrap();
        let mut a = Onnr::with_seeds(&cfg, 1, 11, 22).unwrap();
        let mut b = Onnr::with_seeds(&cfg, 1, 22, 11).unwrap();
        let mut t = 26;
        while t <= 400 {
            let r = e.mini_batch(t - 20, 5).unwrap();
            let x = e.mini_batch(t, 5).unwrap();
            let sa = a.step(&r, &x).unwrap();
            let sb = b.step(&x, &r).unwrap();
            assert_eq!(sa.raw.to_bits(), sb.raw.to_bits(), "t={t}");
            t += 5;
        }
    }

    #[test]
    fn state_is_independent_of_length() {
        let cfg = DetectorConfig { l: 20, n: 5, n_epochs: 1, ..Default::default() };
        let short = run_onnc(&ramp(200), &cfg).unwrap();
        let long = run_onnc(&ramp(2000), &cfg).unwrap();
        assert_eq!(short.state_len, long.state_len);
        let det = Onnc::new(&cfg, 1).unwrap();
        assert_eq!(det.score_slots(), cfg.l / cfg.n + 1);
        assert_eq!(det.state_len(), det.net().state_len() + 5);
    }

    #[test]
    fn algorithm_names_parse() {
        assert_eq!("onnc".parse::<Algorithm>().unwrap(), Algorithm::Onnc);
        assert_eq!("onnr".parse::<Algorithm>().unwrap().name(), "onnr");
        assert!("pelt".parse::<Algorithm>().is_err());
    }
}
