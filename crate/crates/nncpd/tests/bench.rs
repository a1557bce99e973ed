use nncpd::bench::{self, default_grid, BenchmarkPlan, GridPoint};
use nncpd_core::datagen::Family;
use nncpd_core::detect::Algorithm;
use nncpd_core::nn::Architecture;
use nncpd_core::DetectorConfig;

fn small_base() -> DetectorConfig {
    DetectorConfig {
        arch: Architecture {
            hidden: vec![8],
            ..Default::default()
        },
        ..DetectorConfig::default()
    }
}

#[test]
fn grid_has_eight_points() {
    let grid = default_grid();
    assert_eq!(grid.len(), 8);
    for n in [1, 10] {
        for e in [1, 10] {
            for lr in [0.1, 0.01] {
                assert!(grid.contains(&GridPoint { n, n_epochs: e, lr }));
            }
        }
    }
}

#[test]
fn every_run_logged_and_averages_recompute() {
    let items = bench::generate_items(Family::MeanJumps, 3, 11, 0.0, None).unwrap();
    let base = small_base();
    let grid = [
        GridPoint { n: 10, n_epochs: 1, lr: 0.1 },
        GridPoint { n: 10, n_epochs: 2, lr: 0.01 },
    ];
    let plan = BenchmarkPlan {
        algo: Algorithm::Onnc,
        base: &base,
        grid: &grid,
        margin: 50,
        seed: 11,
        workers: 2,
    };
    let out = bench::run_benchmark(&items, &plan).unwrap();
    assert_eq!(out.runs.len(), grid.len() * items.len());
    assert_eq!(out.best_results.len(), items.len());

    let s = &out.summary;
    let ri: f64 = s.per_series.iter().map(|r| r.rand_index).sum::<f64>() / items.len() as f64;
    let f1: f64 = s.per_series.iter().map(|r| r.f1).sum::<f64>() / items.len() as f64;
    assert_eq!(s.mean_rand_index, ri);
    assert_eq!(s.mean_f1, f1);
    assert_eq!(s.grid[s.best].mean_rand_index, ri);
    assert!(s.grid.iter().all(|g| g.mean_rand_index <= ri));
    for (g, r) in s.grid.iter().enumerate() {
        let runs: Vec<_> = out.runs.iter().filter(|x| x.config == g).collect();
        let mean = runs.iter().map(|x| x.rand_index).sum::<f64>() / runs.len() as f64;
        assert_eq!(r.mean_rand_index, mean);
    }
    let seeds: Vec<u64> = out.runs.iter().take(3).map(|r| r.seed).collect();
    assert_eq!(seeds, [11, 12, 13]);
}

#[test]
fn worker_count_does_not_change_results() {
    let items = bench::generate_items(Family::VarianceJumps, 2, 4, 0.0, None).unwrap();
    let base = small_base();
    let grid = [GridPoint { n: 10, n_epochs: 1, lr: 0.1 }, GridPoint { n: 1, n_epochs: 1, lr: 0.01 }];
    let run = |workers| {
        let plan = BenchmarkPlan {
            algo: Algorithm::Onnr,
            base: &base,
            grid: &grid,
            margin: 50,
            seed: 4,
            workers,
        };
        bench::summary_json(&bench::run_benchmark(&items, &plan).unwrap().summary)
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn empty_directory_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(bench::load_items(dir.path()), Err(nncpd::Error::EmptyDataset(_))));
}

#[test]
fn written_dataset_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let items = bench::generate_items(Family::CovJumps, 2, 0, 0.0, None).unwrap();
    bench::write_items(dir.path(), &items).unwrap();
    let back = bench::load_items(dir.path()).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in items.iter().zip(&back) {
        assert_eq!((&a.name, &a.series, &a.annotation), (&b.name, &b.series, &b.annotation));
    }
}

#[test]
fn evaluation_rebases_offset_series() {
    let series = nncpd_core::TimeSeries::new(vec![0.0; 1000], 1, 101).unwrap();
    let r = bench::evaluate_on(&series, &[300, 500], &[305, 700], 50).unwrap();
    assert_eq!(r.f1, 0.5);
    assert_eq!(r.pairs, vec![(300, 305)]);
}
