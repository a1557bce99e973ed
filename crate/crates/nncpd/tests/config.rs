use nncpd::config::{format_threshold, parse_threshold, RunConfig};
use nncpd_core::detect::{Algorithm, Threshold};
use nncpd_core::{DetectorConfig, Head};

#[test]
fn minimal_file_takes_defaults() {
    let cfg = RunConfig::from_toml("algo = \"onnr\"\n").unwrap();
    assert_eq!(cfg, RunConfig::new(Algorithm::Onnr));
    let det = cfg.detector_config().unwrap();
    let base = DetectorConfig::default();
    assert_eq!((det.k, det.n, det.l, det.n_epochs), (base.k, base.n, base.l, base.n_epochs));
    assert_eq!(det.alpha, 0.1);
    assert_eq!(det.ratio_head, Head::Linear);
    assert_eq!(cfg.margin, 50);
}

#[test]
fn unknown_and_missing_keys_rejected() {
    assert!(RunConfig::from_toml("algo = \"onnc\"\nlearning_rate = 0.1\n").is_err());
    assert!(RunConfig::from_toml("n = 10\n").is_err());
}

#[test]
fn toml_round_trip() {
    let mut cfg = RunConfig::new(Algorithm::Onnc);
    cfg.hidden = vec![16, 8];
    cfg.min_distance = Some(150);
    cfg.threshold = "mean_std:1.5".into();
    cfg.scores = Some("out/s.csv".into());
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn violated_constraint_is_named() {
    let mut cfg = RunConfig::new(Algorithm::Onnc);
    cfg.n = 7;
    let msg = cfg.detector_config().unwrap_err().to_string();
    assert!(msg.contains("n must divide l"), "{msg}");

    let mut cfg = RunConfig::new(Algorithm::Onnr);
    cfg.ratio_head = "sigmoid".into();
    assert!(cfg.detector_config().is_err());
    cfg.ratio_head = "softplus".into();
    assert_eq!(cfg.detector_config().unwrap().ratio_head, Head::Softplus);

    let mut cfg = RunConfig::new(Algorithm::Onnc);
    cfg.margin = 0;
    assert!(cfg.detector_config().is_err());
    cfg.margin = 50;
    cfg.algo = "pelt".into();
    assert!(cfg.algorithm().is_err());
}

#[test]
fn threshold_specs() {
    assert_eq!(parse_threshold("noise_floor:2").unwrap(), Threshold::NoiseFloor(2.0));
    assert_eq!(parse_threshold("mean_std:0.5").unwrap(), Threshold::MeanPlusStd(0.5));
    assert_eq!(parse_threshold("absolute:-1e-3").unwrap(), Threshold::Absolute(-1e-3));
    for bad in ["noise_floor", "median:1", "absolute:nan", "absolute:x"] {
        assert!(parse_threshold(bad).is_err(), "{bad}");
    }
    for t in [Threshold::NoiseFloor(2.5), Threshold::MeanPlusStd(1.0), Threshold::Absolute(0.125)] {
        assert_eq!(parse_threshold(&format_threshold(t)).unwrap(), t);
    }
}
