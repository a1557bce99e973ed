//! Small dense feed-forward network with hand-written backpropagation and Adam.
//!
//! Parameters live in one flat vector, layer by layer: the `out x in` weight
//! matrix in row-major order followed by the `out` biases. Gradients and the
//! Adam moments share that layout.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::series::MiniBatch;
use crate::CpdError;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Output transform of the last layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Logistic output in `(0, 1)`; classifier for the ONNC detector.
    Sigmoid,
    /// `ln(1 + e^z) >= 0`; non-negative density-ratio regressor.
    Softplus,
    /// Identity output; unconstrained density-ratio regressor. The ratio
    /// loss is a convex quadratic in the output, so no squashing is needed.
    Linear,
}

impl Head {
    /// Whether the head may be used by the ratio (ONNR) losses.
    pub fn is_ratio(self) -> bool {
        matches!(self, Head::Softplus | Head::Linear)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Hidden layer widths and activation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            activation: Activation::Tanh,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

impl Head {
    fn apply(self, z: f64) -> f64 {
        match self {
            Head::Sigmoid => sigmoid(z),
            Head::Softplus => softplus(z),
            Head::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Head::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Head::Softplus => sigmoid(z),
            Head::Linear => 1.0,
        }
    }
}

/// Flat parameter gradient, same layout as [`NeuralNet::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|g| *g == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    skipped: u64,
}

#[derive(Clone, Debug, PartialEq)]
struct ForwardCache {
    count: usize,
    /// Post-activation values per layer input; `acts[0]` is the raw input.
    acts: Vec<Vec<f64>>,
    /// Pre-head values of the output unit.
    logits: Vec<f64>,
}

/// Dense network `dim_in -> hidden... -> 1` with its Adam optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralNet {
    widths: Vec<usize>,
    activation: Activation,
    head: Head,
    params: Vec<f64>,
    lr: f64,
    adam: AdamState,
    cache: Option<ForwardCache>,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl NeuralNet {
    /// Seeded initialization: weights uniform in `±1/sqrt(fan_in)`, zero
    /// biases, zero Adam moments.
    pub fn init(dim_in: usize, arch: &Architecture, head: Head, lr: f64, seed: u64) -> Result<Self, CpdError> {
        if dim_in == 0 {
            return Err(CpdError::InvalidConfig("network input dimension must be >= 1".into()));
        }
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(CpdError::InvalidConfig("learning rate must be finite and >= 0".into()));
        }
        if arch.hidden.contains(&0) {
            return Err(CpdError::InvalidConfig("hidden widths must be >= 1".into()));
        }
        let mut widths = Vec::with_capacity(arch.hidden.len() + 2);
        widths.push(dim_in);
        widths.extend_from_slice(&arch.hidden);
        widths.push(1);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&widths));
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            params.extend(core::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self::assemble(widths, arch.activation, head, lr, params))
    }

    /// Rebuilds a network from explicit parameters (e.g. a checkpoint).
    /// `widths` lists every layer size including input and the single output.
    pub fn from_parameters(
        widths: Vec<usize>,
        activation: Activation,
        head: Head,
        lr: f64,
        params: Vec<f64>,
    ) -> Result<Self, CpdError> {
        if widths.len() < 2 || widths.contains(&0) || *widths.last().unwrap() != 1 {
            return Err(CpdError::InvalidConfig(
                "widths must be [dim_in, hidden..., 1] with non-zero entries".into(),
            ));
        }
        if params.len() != param_count(&widths) {
            return Err(CpdError::GradientShapeMismatch);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(CpdError::InvalidConfig("non-finite parameter".into()));
        }
        Ok(Self::assemble(widths, activation, head, lr, params))
    }

    fn assemble(widths: Vec<usize>, activation: Activation, head: Head, lr: f64, params: Vec<f64>) -> Self {
        let n = params.len();
        Self {
            widths,
            activation,
            head,
            params,
            lr,
            adam: AdamState {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
                skipped: 0,
            },
            cache: None,
        }
    }

    pub fn dim_in(&self) -> usize {
        self.widths[0]
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        self.cache = None;
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.len()
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.step
    }

    /// Number of updates rejected because of a non-finite gradient.
    pub fn skipped_updates(&self) -> u64 {
        self.adam.skipped
    }

    /// Number of `f64` slots held as persistent state (parameters and both
    /// Adam moments). The forward cache is scratch and not counted.
    pub fn state_len(&self) -> usize {
        3 * self.params.len()
    }

    /// Evaluates one input without touching the backward cache.
    pub fn forward(&self, x: &[f64]) -> Result<f64, CpdError> {
        self.check_input(x.len())?;
        let mut cur: Vec<f64> = x.to_vec();
        let mut next = Vec::new();
        let mut offset = 0;
        let last = self.widths.len() - 2;
        for (li, w) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            next.clear();
            for (row, b) in weights.chunks_exact(fan_in).zip(bias) {
                let z = dot(row, &cur) + b;
                next.push(if li == last { z } else { self.activation.apply(z) });
            }
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(self.head.apply(cur[0]))
    }

    /// Evaluates every vector of `batch`, caching activations for
    /// [`NeuralNet::backward`].
    pub fn forward_batch(&mut self, batch: &MiniBatch) -> Result<Vec<f64>, CpdError> {
        self.forward_flat(batch.as_flat(), batch.batch_size())
    }

    /// Batch forward over `count` row-major inputs.
    pub fn forward_flat(&mut self, inputs: &[f64], count: usize) -> Result<Vec<f64>, CpdError> {
        if count == 0 || inputs.len() != count * self.dim_in() {
            return Err(CpdError::InputDimensionMismatch {
                expected: self.dim_in(),
                got: inputs.len().checked_div(count).unwrap_or(0),
            });
        }
        let mut cache = self.cache.take().unwrap_or(ForwardCache {
            count: 0,
            acts: Vec::new(),
            logits: Vec::new(),
        });
        cache.count = count;
        cache.acts.resize_with(self.widths.len() - 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(inputs);
        cache.logits.clear();

        let mut offset = 0;
        let last = self.widths.len() - 2;
        for (li, w) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let (before, after) = cache.acts.split_at_mut(li + 1);
            let input = &before[li];
            if li == last {
                for x in input.chunks_exact(fan_in) {
                    cache.logits.push(dot(&weights[..fan_in], x) + bias[0]);
                }
            } else {
                let out = &mut after[0];
                out.clear();
                for x in input.chunks_exact(fan_in) {
                    for (row, b) in weights.chunks_exact(fan_in).zip(bias) {
                        out.push(self.activation.apply(dot(row, x) + b));
                    }
                }
            }
        }
        let outputs = cache.logits.iter().map(|&z| self.head.apply(z)).collect();
        self.cache = Some(cache);
        Ok(outputs)
    }

    /// Gradient of `sum_i upstream[i] * y_i` with respect to the parameters,
    /// where `y_i` are the outputs of the last [`NeuralNet::forward_batch`].
    /// Leaves the parameters untouched.
    pub fn backward(&self, upstream: &[f64]) -> Result<Gradient, CpdError> {
        let cache = self.cache.as_ref().ok_or(CpdError::BackwardBeforeForward)?;
        if upstream.len() != cache.count {
            return Err(CpdError::GradientShapeMismatch);
        }
        let mut grad = vec![0.0; self.params.len()];
        let layer_offsets: Vec<usize> = self
            .widths
            .windows(2)
            .scan(0, |off, w| {
                let start = *off;
                *off += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();

        // delta holds dL/dz for the current layer, one row per example.
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&cache.logits)
            .map(|(g, &z)| g * self.head.derivative(z))
            .collect();
        let mut prev_delta = Vec::new();

        for li in (0..self.widths.len() - 1).rev() {
            let (fan_in, fan_out) = (self.widths[li], self.widths[li + 1]);
            let off = layer_offsets[li];
            let input = &cache.acts[li];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for (x, d) in input.chunks_exact(fan_in).zip(delta.chunks_exact(fan_out)) {
                    for (o, &dz) in d.iter().enumerate() {
                        if dz == 0.0 {
                            continue;
                        }
                        gb[o] += dz;
                        for (g, &xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                            *g += dz * xi;
                        }
                    }
                }
            }
            if li == 0 {
                break;
            }
            let weights = &self.params[off..off + fan_in * fan_out];
            prev_delta.clear();
            prev_delta.resize(cache.count * fan_in, 0.0);
            for ((pd, d), a) in prev_delta
                .chunks_exact_mut(fan_in)
                .zip(delta.chunks_exact(fan_out))
                .zip(input.chunks_exact(fan_in))
            {
                for (o, &dz) in d.iter().enumerate() {
                    for (p, &w) in pd.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                        *p += w * dz;
                    }
                }
                for (p, &ai) in pd.iter_mut().zip(a) {
                    *p *= self.activation.derivative_from_output(ai);
                }
            }
            core::mem::swap(&mut delta, &mut prev_delta);
        }
        Ok(Gradient(grad))
    }

    /// One Adam update with bias correction. A non-finite gradient is
    /// rejected without touching any state except the skip counter.
    pub fn adam_step(&mut self, gradient: &Gradient) -> Result<(), CpdError> {
        if gradient.0.len() != self.params.len() {
            return Err(CpdError::GradientShapeMismatch);
        }
        if gradient.0.iter().any(|g| !g.is_finite()) {
            self.adam.skipped += 1;
            return Err(CpdError::NonFiniteGradient);
        }
        self.cache = None;
        let st = &mut self.adam;
        st.step += 1;
        let step = st.step as f64;
        let bc1 = 1.0 - libm::pow(ADAM_BETA1, step);
        let bc2 = 1.0 - libm::pow(ADAM_BETA2, step);
        for (((p, m), v), &g) in self
            .params
            .iter_mut()
            .zip(st.m.iter_mut())
            .zip(st.v.iter_mut())
            .zip(&gradient.0)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
        }
        Ok(())
    }

    fn check_input(&self, len: usize) -> Result<(), CpdError> {
        if len != self.dim_in() {
            return Err(CpdError::InputDimensionMismatch {
                expected: self.dim_in(),
                got: len,
            });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
