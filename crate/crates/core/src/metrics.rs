//! Segmentation quality: margin-matched precision/recall/F1 and the Rand
//! index.
//!
//! Positions live on the axis `1..=T`. A change point `c` closes a segment:
//! observation `i` belongs to segment `#{c : c < i}`, so a change point at
//! `200` means observation 201 is the first one of the new regime.

use alloc::vec::Vec;

use crate::CpdError;

/// Default matching margin.
pub const DEFAULT_MARGIN: usize = 50;

/// One-to-one matching of detections to true change points.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    /// `(true, detected)` pairs, sorted by true position.
    pub pairs: Vec<(i64, i64)>,
}

impl Matching {
    pub fn tp_count(&self) -> usize {
        self.pairs.len()
    }

    /// True change points that were matched.
    pub fn true_positives(&self) -> Vec<i64> {
        self.pairs.iter().map(|p| p.0).collect()
    }
}

/// Greedy matching in increasing `|detected - true|`; ties go to the earlier
/// detection, then the earlier true point. A pair qualifies only when the
/// distance is strictly below `margin`.
pub fn match_change_points(true_cps: &[i64], detected: &[i64], margin: usize) -> Matching {
    let margin = margin as i64;
    let mut candidates: Vec<(i64, i64, i64, usize, usize)> = Vec::new();
    for (i, &t) in true_cps.iter().enumerate() {
        for (j, &d) in detected.iter().enumerate() {
            let dist = (d - t).abs();
            if dist < margin {
                candidates.push((dist, d, t, i, j));
            }
        }
    }
    candidates.sort_unstable();
    let mut used_true = alloc::vec![false; true_cps.len()];
    let mut used_det = alloc::vec![false; detected.len()];
    let mut pairs = Vec::new();
    for (_, d, t, i, j) in candidates {
        if !used_true[i] && !used_det[j] {
            used_true[i] = true;
            used_det[j] = true;
            pairs.push((t, d));
        }
    }
    pairs.sort_unstable();
    Matching { pairs }
}

/// `(precision, recall, f1)`. No detections gives precision 0; F1 is 0
/// whenever precision and recall are both 0.
pub fn precision_recall_f1(tp_count: usize, detected: usize, n_true: usize) -> Result<(f64, f64, f64), CpdError> {
    if n_true == 0 {
        return Err(CpdError::NoTrueChangePoints);
    }
    let precision = if detected == 0 {
        0.0
    } else {
        tp_count as f64 / detected as f64
    };
    let recall = tp_count as f64 / n_true as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

fn check_positions(cps: &[i64], len: usize) -> Result<(), CpdError> {
    if len < 2 {
        return Err(CpdError::TooFewObservations);
    }
    if cps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CpdError::InvalidAnnotation("positions must be strictly increasing".into()));
    }
    if let Some(c) = cps.iter().find(|&&c| c < 1 || c > len as i64) {
        return Err(CpdError::InvalidAnnotation(alloc::format!(
            "position {c} outside [1, {len}]"
        )));
    }
    Ok(())
}

fn pairs(count: u64) -> u64 {
    count * count.saturating_sub(1) / 2
}

/// Segment sizes for change points `cps` over `1..=len`.
fn segment_sizes(cps: &[i64], len: usize) -> Vec<u64> {
    let mut sizes = Vec::with_capacity(cps.len() + 1);
    let mut prev = 0;
    for &c in cps.iter().chain(core::iter::once(&(len as i64))) {
        if c > prev {
            sizes.push((c - prev) as u64);
            prev = c;
        }
    }
    sizes
}

/// Rand index via the overlap table of the two segmentations; cost is linear
/// in the number of change points, not in `T`.
pub fn rand_index(true_cps: &[i64], detected: &[i64], len: usize) -> Result<f64, CpdError> {
    check_positions(true_cps, len)?;
    check_positions(detected, len)?;

    let same_true: u64 = segment_sizes(true_cps, len).into_iter().map(pairs).sum();
    let same_det: u64 = segment_sizes(detected, len).into_iter().map(pairs).sum();

    // Cells of the common refinement: walk both boundary lists together.
    let mut same_both = 0u64;
    let (mut i, mut j) = (0, 0);
    let mut prev = 0i64;
    let end = len as i64;
    while prev < end {
        let next_true = true_cps.get(i).copied().unwrap_or(end);
        let next_det = detected.get(j).copied().unwrap_or(end);
        let cut = next_true.min(next_det);
        same_both += pairs((cut - prev) as u64);
        if next_true == cut {
            i += 1;
        }
        if next_det == cut {
            j += 1;
        }
        prev = cut;
    }

    let total = pairs(len as u64);
    let agree = total + 2 * same_both - same_true - same_det;
    Ok(agree as f64 / total as f64)
}

/// Literal pairwise Rand index, `O(T^2)`. Reference implementation for tests.
pub fn rand_index_bruteforce(true_cps: &[i64], detected: &[i64], len: usize) -> Result<f64, CpdError> {
    check_positions(true_cps, len)?;
    check_positions(detected, len)?;
    let label = |cps: &[i64], i: i64| cps.iter().filter(|&&c| c < i).count();
    let a: Vec<usize> = (1..=len as i64).map(|i| label(true_cps, i)).collect();
    let b: Vec<usize> = (1..=len as i64).map(|i| label(detected, i)).collect();
    let mut agree = 0u64;
    for x in 0..len {
        for y in x + 1..len {
            if (a[x] == a[y]) == (b[x] == b[y]) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (0.5 * len as f64 * (len as f64 - 1.0)))
}

/// All quality numbers for one series.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub margin: usize,
    pub n_true: usize,
    pub n_detected: usize,
    pub tp_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub rand_index: f64,
    pub pairs: Vec<(i64, i64)>,
}

/// Matches, scores and computes the Rand index over `1..=len`.
pub fn evaluate(true_cps: &[i64], detected: &[i64], len: usize, margin: usize) -> Result<EvalReport, CpdError> {
    if margin == 0 {
        return Err(CpdError::InvalidConfig("margin must be >= 1".into()));
    }
    let rand_index = rand_index(true_cps, detected, len)?;
    let matching = match_change_points(true_cps, detected, margin);
    let (precision, recall, f1) = precision_recall_f1(matching.tp_count(), detected.len(), true_cps.len())?;
    Ok(EvalReport {
        margin,
        n_true: true_cps.len(),
        n_detected: detected.len(),
        tp_count: matching.tp_count(),
        precision,
        recall,
        f1,
        rand_index,
        pairs: matching.pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn matching_examples() {
        let m = match_change_points(&[200, 400], &[205, 600], 50);
        assert_eq!(m.pairs, vec![(200, 205)]);
        assert_eq!(m.true_positives(), vec![200]);

        let cps = [200, 400, 600];
        assert_eq!(match_change_points(&cps, &cps, 50).tp_count(), 3);

        let tie = match_change_points(&[200], &[180, 220], 50);
        assert_eq!(tie.pairs, vec![(200, 180)]);
    }

    #[test]
    fn margin_is_strict() {
        assert_eq!(match_change_points(&[200], &[250], 50).tp_count(), 0);
        assert_eq!(match_change_points(&[200], &[249], 50).tp_count(), 1);
    }

    #[test]
    fn one_to_one_keeps_precision_bounded() {
        // two true points near one detection: only one may claim it
        let m = match_change_points(&[100, 120], &[110], 50);
        assert_eq!(m.tp_count(), 1);
        let (p, r, _) = precision_recall_f1(m.tp_count(), 1, 2).unwrap();
        assert_eq!((p, r), (1.0, 0.5));
    }

    #[test]
    fn prf_examples() {
        assert_eq!(precision_recall_f1(1, 2, 2).unwrap(), (0.5, 0.5, 0.5));
        assert_eq!(precision_recall_f1(4, 4, 4).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(precision_recall_f1(0, 5, 3).unwrap().2, 0.0);
        assert_eq!(precision_recall_f1(0, 0, 3).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(precision_recall_f1(0, 1, 0).unwrap_err(), CpdError::NoTrueChangePoints);
    }

    #[test]
    fn rand_index_examples() {
        assert_eq!(rand_index(&[3], &[4], 6).unwrap(), 2.0 / 3.0);
        assert_eq!(rand_index_bruteforce(&[3], &[4], 6).unwrap(), 2.0 / 3.0);
        assert_eq!(rand_index(&[], &[], 10).unwrap(), 1.0);
        assert_eq!(rand_index(&[2, 5], &[2, 5], 10).unwrap(), 1.0);
        assert_eq!(rand_index_bruteforce(&[], &[], 2).unwrap(), 1.0);
        assert_eq!(rand_index_bruteforce(&[1], &[], 2).unwrap(), 0.0);
        assert_eq!(rand_index(&[1], &[], 2).unwrap(), 0.0);
        assert_eq!(rand_index(&[], &[], 1).unwrap_err(), CpdError::TooFewObservations);
        assert!(rand_index(&[11], &[], 10).is_err());
    }

    #[test]
    fn evaluate_example() {
        let r = evaluate(&[200, 400], &[205, 600], 1000, 50).unwrap();
        assert_eq!(r.tp_count, 1);
        assert_eq!(r.f1, 0.5);
        let perfect = evaluate(&[200, 400], &[200, 400], 1000, 50).unwrap();
        assert_eq!((perfect.f1, perfect.rand_index), (1.0, 1.0));
    }
}
