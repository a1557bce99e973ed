//! Training losses and dissimilarity scores of both detectors.
//!
//! The `*_from_outputs` functions work on network outputs directly so the
//! detectors can reuse one forward pass for scoring and the first optimizer
//! step. The batch-level wrappers evaluate the network themselves.

use alloc::vec::Vec;

use crate::nn::{Head, NeuralNet};
use crate::series::MiniBatch;
use crate::CpdError;

/// Bounds applied to classifier outputs inside every logarithm.
pub const CLASSIFIER_CLAMP: f64 = 1e-6;

fn clamp_prob(f: f64) -> f64 {
    f.clamp(CLASSIFIER_CLAMP, 1.0 - CLASSIFIER_CLAMP)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Cross-entropy with the reference batch as class 0 and the test batch as
/// class 1.
pub fn onnc_loss_from_outputs(f_ref: &[f64], f_test: &[f64]) -> f64 {
    let neg: f64 = f_ref.iter().map(|&f| -libm::log(1.0 - clamp_prob(f))).sum();
    let pos: f64 = f_test.iter().map(|&f| -libm::log(clamp_prob(f))).sum();
    neg / f_ref.len() as f64 + pos / f_test.len() as f64
}

/// Loss value plus `dL/df` for each output. The clamp is part of the loss,
/// so outputs outside the clamp interval receive zero gradient.
pub fn onnc_loss_grad(f_ref: &[f64], f_test: &[f64], upstream: &mut Vec<f64>) -> f64 {
    upstream.clear();
    let inside = |f: f64| (CLASSIFIER_CLAMP..=1.0 - CLASSIFIER_CLAMP).contains(&f);
    let n_ref = f_ref.len() as f64;
    let n_test = f_test.len() as f64;
    upstream.extend(
        f_ref
            .iter()
            .map(|&f| if inside(f) { 1.0 / ((1.0 - f) * n_ref) } else { 0.0 }),
    );
    upstream.extend(
        f_test
            .iter()
            .map(|&f| if inside(f) { -1.0 / (f * n_test) } else { 0.0 }),
    );
    onnc_loss_from_outputs(f_ref, f_test)
}

/// Symmetrised log-odds score, an estimate of the KL-type divergence
/// between the two batches.
pub fn onnc_dissimilarity_from_outputs(f_ref: &[f64], f_test: &[f64]) -> f64 {
    let log_odds = |f: f64| {
        let f = clamp_prob(f);
        libm::log(f / (1.0 - f))
    };
    let r: f64 = f_ref.iter().map(|&f| -log_odds(f)).sum();
    let t: f64 = f_test.iter().map(|&f| log_odds(f)).sum();
    r / f_ref.len() as f64 + t / f_test.len() as f64
}

/// Relative least-squares density-ratio loss:
/// `(1-a)/2n sum_ref g^2 + a/2n sum_test g^2 - 1/n sum_test g`.
pub fn onnr_loss_from_outputs(g_ref: &[f64], g_test: &[f64], alpha: f64) -> f64 {
    let n_ref = g_ref.len() as f64;
    let n_test = g_test.len() as f64;
    let sq_ref: f64 = g_ref.iter().map(|g| g * g).sum();
    let sq_test: f64 = g_test.iter().map(|g| g * g).sum();
    let lin_test: f64 = g_test.iter().sum();
    (1.0 - alpha) / (2.0 * n_ref) * sq_ref + alpha / (2.0 * n_test) * sq_test - lin_test / n_test
}

pub fn onnr_loss_grad(g_ref: &[f64], g_test: &[f64], alpha: f64, upstream: &mut Vec<f64>) -> f64 {
    upstream.clear();
    let n_ref = g_ref.len() as f64;
    let n_test = g_test.len() as f64;
    upstream.extend(g_ref.iter().map(|&g| (1.0 - alpha) * g / n_ref));
    upstream.extend(g_test.iter().map(|&g| (alpha * g - 1.0) / n_test));
    onnr_loss_from_outputs(g_ref, g_test, alpha)
}

/// Pearson chi-squared estimate: mean ratio over the test batch minus one.
pub fn onnr_score_from_outputs(g_test: &[f64]) -> f64 {
    mean(g_test) - 1.0
}

fn outputs(net: &NeuralNet, batch: &MiniBatch) -> Result<Vec<f64>, CpdError> {
    batch.vectors().map(|x| net.forward(x)).collect()
}

fn require_classifier(net: &NeuralNet) -> Result<(), CpdError> {
    match net.head() {
        Head::Sigmoid => Ok(()),
        _ => Err(CpdError::ClassificationHeadRequired),
    }
}

fn require_ratio(net: &NeuralNet) -> Result<(), CpdError> {
    if net.head().is_ratio() {
        Ok(())
    } else {
        Err(CpdError::RatioHeadRequired)
    }
}

fn same_size(a: &MiniBatch, b: &MiniBatch) -> Result<(), CpdError> {
    if a.batch_size() != b.batch_size() {
        return Err(CpdError::InvalidConfig(alloc::format!(
            "mini-batch sizes differ ({} vs {})",
            a.batch_size(),
            b.batch_size()
        )));
    }
    Ok(())
}

pub fn onnc_loss(reference: &MiniBatch, test: &MiniBatch, net: &NeuralNet) -> Result<f64, CpdError> {
    require_classifier(net)?;
    same_size(reference, test)?;
    Ok(onnc_loss_from_outputs(&outputs(net, reference)?, &outputs(net, test)?))
}

pub fn onnc_dissimilarity(reference: &MiniBatch, test: &MiniBatch, net: &NeuralNet) -> Result<f64, CpdError> {
    require_classifier(net)?;
    same_size(reference, test)?;
    Ok(onnc_dissimilarity_from_outputs(
        &outputs(net, reference)?,
        &outputs(net, test)?,
    ))
}

pub fn onnr_loss(reference: &MiniBatch, test: &MiniBatch, net: &NeuralNet, alpha: f64) -> Result<f64, CpdError> {
    require_ratio(net)?;
    same_size(reference, test)?;
    Ok(onnr_loss_from_outputs(
        &outputs(net, reference)?,
        &outputs(net, test)?,
        alpha,
    ))
}

pub fn onnr_score(test: &MiniBatch, net: &NeuralNet) -> Result<f64, CpdError> {
    require_ratio(net)?;
    Ok(onnr_score_from_outputs(&outputs(net, test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use alloc::vec;

    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn onnc_loss_values() {
        assert!((onnc_loss_from_outputs(&[0.5; 4], &[0.5; 4]) - 2.0 * LN2).abs() < 1e-15);
        let l = onnc_loss_from_outputs(&[0.1], &[0.9]);
        assert!((l - 0.210_721_031_315_652_5).abs() < 1e-12, "{l}");
        // perfect separation saturates at the clamp, essentially zero
        assert!(onnc_loss_from_outputs(&[0.0], &[1.0]) < 3e-6);
    }

    #[test]
    fn onnc_dissimilarity_values() {
        assert_eq!(onnc_dissimilarity_from_outputs(&[0.5; 3], &[0.5; 3]), 0.0);
        let d = onnc_dissimilarity_from_outputs(&[0.25], &[0.75]);
        assert!((d - 2.0 * libm::log(3.0)).abs() < 1e-12);
        // relabelling f -> 1 - f while swapping batches leaves D unchanged
        let (fr, ft) = ([0.2, 0.6, 0.9], [0.7, 0.3, 0.55]);
        let flip = |xs: &[f64]| xs.iter().map(|f| 1.0 - f).collect::<Vec<_>>();
        let swapped = onnc_dissimilarity_from_outputs(&flip(&ft), &flip(&fr));
        assert!((swapped - onnc_dissimilarity_from_outputs(&fr, &ft)).abs() < 1e-12);
    }

    #[test]
    fn onnr_loss_values() {
        assert_eq!(onnr_loss_from_outputs(&[0.0; 3], &[0.0; 3], 0.1), 0.0);
        assert!((onnr_loss_from_outputs(&[2.0], &[1.0], 0.1) - 0.85).abs() < 1e-12);
        assert!((onnr_loss_from_outputs(&[1.0; 5], &[1.0; 5], 0.1) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn onnr_score_values() {
        assert_eq!(onnr_score_from_outputs(&[1.0; 4]), 0.0);
        assert_eq!(onnr_score_from_outputs(&[1.5, 0.5, 1.0, 3.0]), 0.5);
        assert_eq!(onnr_score_from_outputs(&[0.0; 2]), -1.0);
    }

    #[test]
    fn head_mismatch_is_reported() {
        let arch = Architecture::default();
        let clf = NeuralNet::init(1, &arch, Head::Sigmoid, 0.1, 0).unwrap();
        let reg = NeuralNet::init(1, &arch, Head::Softplus, 0.1, 0).unwrap();
        let b = MiniBatch::from_flat(vec![1.0, 2.0], 1, 2).unwrap();
        assert_eq!(onnc_loss(&b, &b, &reg).unwrap_err(), CpdError::ClassificationHeadRequired);
        assert_eq!(onnc_dissimilarity(&b, &b, &reg).unwrap_err(), CpdError::ClassificationHeadRequired);
        assert_eq!(onnr_loss(&b, &b, &clf, 0.1).unwrap_err(), CpdError::RatioHeadRequired);
        assert_eq!(onnr_score(&b, &clf).unwrap_err(), CpdError::RatioHeadRequired);
        assert!(onnc_loss(&b, &b, &clf).is_ok());
    }

    #[test]
    fn output_gradients_match_finite_differences() {
        let fr = [0.3, 0.7];
        let ft = [0.45, 0.2];
        let mut up = Vec::new();
        onnc_loss_grad(&fr, &ft, &mut up);
        let h = 1e-6;
        for i in 0..4 {
            let mut p = [fr[0], fr[1], ft[0], ft[1]];
            p[i] += h;
            let plus = onnc_loss_from_outputs(&p[..2], &p[2..]);
            p[i] -= 2.0 * h;
            let minus = onnc_loss_from_outputs(&p[..2], &p[2..]);
            assert!(((plus - minus) / (2.0 * h) - up[i]).abs() < 1e-6);
        }
        onnr_loss_grad(&fr, &ft, 0.1, &mut up);
        for i in 0..4 {
            let mut p = [fr[0], fr[1], ft[0], ft[1]];
            p[i] += h;
            let plus = onnr_loss_from_outputs(&p[..2], &p[2..], 0.1);
            p[i] -= 2.0 * h;
            let minus = onnr_loss_from_outputs(&p[..2], &p[2..], 0.1);
            assert!(((plus - minus) / (2.0 * h) - up[i]).abs() < 1e-6);
        }
    }
}
