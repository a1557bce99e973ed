use nncpd_core::detect::{
    extract_peaks, onnc_loss, onnc_loss_grad, onnr_loss, onnr_loss_grad, update_running_mean, RunningMean,
};
use nncpd_core::metrics::{evaluate, match_change_points, precision_recall_f1, rand_index, rand_index_bruteforce};
use nncpd_core::nn::{Activation, Architecture};
use nncpd_core::series::embed;
use nncpd_core::{Head, MiniBatch, NeuralNet, TimeSeries};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

fn positions(len: usize) -> impl Strategy<Value = Vec<i64>> {
    btree_set(1..=len as i64, 0..8).prop_map(|s| s.into_iter().collect())
}

fn segmentation_pair() -> impl Strategy<Value = (usize, Vec<i64>, Vec<i64>)> {
    (2usize..=200).prop_flat_map(|len| (Just(len), positions(len), positions(len)))
}

// Loss of the pair with the network as it is.
fn pair_loss(net: &NeuralNet, reference: &MiniBatch, test: &MiniBatch, alpha: f64) -> f64 {
    match net.head() {
        Head::Sigmoid => onnc_loss(reference, test, net).unwrap(),
        _ => onnr_loss(reference, test, net, alpha).unwrap(),
    }
}

fn max_gradient_error(mut net: NeuralNet, flat: &[f64], n: usize, alpha: f64) -> f64 {
    let dim = net.dim_in();
    let reference = MiniBatch::from_flat(flat[..n * dim].to_vec(), dim, 0).unwrap();
    let test = MiniBatch::from_flat(flat[n * dim..].to_vec(), dim, 100).unwrap();

    let out = net.forward_flat(flat, 2 * n).unwrap();
    let mut upstream = Vec::new();
    match net.head() {
        Head::Sigmoid => {
            onnc_loss_grad(&out[..n], &out[n..], &mut upstream);
        }
        _ => {
            onnr_loss_grad(&out[..n], &out[n..], alpha, &mut upstream);
        }
    }
    let analytic = net.backward(&upstream).unwrap();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.num_parameters() {
        let orig = net.parameters()[i];
        net.parameters_mut()[i] = orig + h;
        let up = pair_loss(&net, &reference, &test, alpha);
        net.parameters_mut()[i] = orig - h;
        let down = pair_loss(&net, &reference, &test, alpha);
        net.parameters_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.as_slice()[i];
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

fn small_net() -> impl Strategy<Value = (usize, usize, usize, Head, u64)> {
    (
        1usize..=8,
        0usize..=8,
        1usize..=4,
        prop_oneof![Just(Head::Sigmoid), Just(Head::Softplus), Just(Head::Linear)],
        any::<u64>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fast_rand_index_equals_pairwise((len, a, b) in segmentation_pair()) {
        prop_assert_eq!(rand_index(&a, &b, len).unwrap(), rand_index_bruteforce(&a, &b, len).unwrap());
    }

    #[test]
    fn rand_index_is_symmetric_and_bounded((len, a, b) in segmentation_pair()) {
        let ab = rand_index(&a, &b, len).unwrap();
        prop_assert_eq!(ab, rand_index(&b, &a, len).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(rand_index(&a, &a, len).unwrap(), 1.0);
    }

    #[test]
    fn precision_and_recall_bounded((len, a, b) in segmentation_pair(), margin in 1usize..80) {
        prop_assume!(!a.is_empty());
        let r = evaluate(&a, &b, len, margin).unwrap();
        prop_assert!(r.tp_count <= a.len().min(b.len()));
        for v in [r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // every matched pair is within the margin and used once
        let m = match_change_points(&a, &b, margin);
        let mut seen: Vec<i64> = m.pairs.iter().map(|p| p.1).collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), m.pairs.len());
        prop_assert!(m.pairs.iter().all(|&(t, d)| (t - d).abs() < margin as i64));
    }

    #[test]
    fn f1_invariant_under_common_shift((len, a, b) in segmentation_pair(), shift in -50i64..50) {
        prop_assume!(!a.is_empty());
        let base = evaluate(&a, &b, len, 50).unwrap();
        let moved = |v: &[i64]| v.iter().map(|x| x + shift).collect::<Vec<_>>();
        let (sa, sb) = (moved(&a), moved(&b));
        let m = match_change_points(&sa, &sb, 50);
        let (_, _, f1) = precision_recall_f1(m.tp_count(), sb.len(), sa.len()).unwrap();
        prop_assert_eq!(f1, base.f1);
    }

    #[test]
    fn consecutive_batches_are_disjoint_and_contiguous(
        len in 30usize..120,
        k in 1usize..4,
        n in 1usize..6,
        offset in 0usize..20,
    ) {
        let values: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let series = TimeSeries::new(values, 1, 1).unwrap();
        let e = embed(&series, k).unwrap();
        let t = e.first_time() + (2 * n + offset) as i64;
        prop_assume!(t <= e.last_time());
        let now = e.mini_batch(t, n).unwrap();
        let before = e.mini_batch(t - n as i64, n).unwrap();
        let times: Vec<i64> = (0..n).map(|j| now.time_of(j)).chain((0..n).map(|j| before.time_of(j))).collect();
        // newest first, and together they cover t-2n+1 ..= t without gaps
        let expected: Vec<i64> = (0..2 * n as i64).map(|j| t - j).collect();
        prop_assert_eq!(times, expected);
        // each combined vector leads with its own observation
        for (j, v) in now.vectors().enumerate() {
            prop_assert_eq!(v[0], (now.time_of(j) - 1) as f64);
        }
    }

    #[test]
    fn running_mean_matches_window_sum(l_over_n in 1usize..12, n in 1usize..5, raw in vec(-5.0f64..5.0, 1..80)) {
        let l = l_over_n * n;
        let mut buf = RunningMean::new(l, n);
        for (i, _) in raw.iter().enumerate() {
            let got = update_running_mean(&mut buf, raw[i]);
            let lo = i.saturating_sub(l / n);
            let direct: f64 = raw[lo..=i].iter().sum::<f64>() / l as f64;
            prop_assert!((got - direct).abs() < 1e-9);
        }
        prop_assert_eq!(buf.len(), l / n + 1);
    }

    #[test]
    fn peaks_are_separated_local_maxima(
        values in vec(-1.0f64..1.0, 1..300),
        threshold in -0.5f64..0.8,
        min_distance in 1usize..60,
    ) {
        let times: Vec<i64> = (1..=values.len() as i64).collect();
        let peaks = extract_peaks(&times, &values, threshold, min_distance);
        prop_assert!(peaks.windows(2).all(|w| w[1] - w[0] >= min_distance as i64));
        for p in &peaks {
            let i = (*p - 1) as usize;
            prop_assert!(values[i] >= threshold);
            prop_assert!(i == 0 || values[i] > values[i - 1]);
            prop_assert!(i + 1 == values.len() || values[i] >= values[i + 1]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_gradients_match_finite_differences(
        (dim, hidden, n, head, seed) in small_net(),
        data in vec(-2.0f64..2.0, 128),
    ) {
        let arch = Architecture {
            hidden: if hidden == 0 { vec![] } else { vec![hidden] },
            // smooth activation: ReLU kinks defeat finite differences
            activation: Activation::Tanh,
        };
        let net = NeuralNet::init(dim, &arch, head, 0.01, seed).unwrap();
        let flat = &data[..2 * n * dim];
        let err = max_gradient_error(net, flat, n, 0.1);
        prop_assert!(err < 1e-4, "relative error {err}");
    }
}
