//! Library round trip: synthetic data through training, checkpointing,
//! forecasting and evaluation.

use nmjd_core::{
    forecast_windows, generate_synthetic, prepare_dataset, protocol_metrics, read_series_csv,
    rebuild_dataset, render_table, train, write_series_csv, Baseline, DatasetRecipe, FitConfig,
    Forecaster, ModelCheckpoint, NetworkConfig, NormScope, SamplingConfig, SolverMode, SplitRule,
};

fn recipe() -> DatasetRecipe {
    DatasetRecipe {
        t_past: 8,
        t_future: 4,
        stride: 2,
        split: SplitRule::Fractions([0.6, 0.2, 0.2]),
        scope: NormScope::WindowPast,
    }
}

fn sampling(k: usize) -> SamplingConfig {
    SamplingConfig {
        k,
        steps_per_unit: 4,
        mode: SolverMode::Restart,
        seed: 11,
        kappa: 5,
    }
}

#[test]
fn synthetic_csv_round_trips() {
    let set = generate_synthetic(15, 40, 2).unwrap();
    let mut buf = vec![];
    write_series_csv(&mut buf, &set.series, &[]).unwrap();
    let back = read_series_csv(buf.as_slice()).unwrap();
    assert_eq!(back, set.series);
}

#[test]
fn train_checkpoint_forecast_evaluate() {
    let set = generate_synthetic(30, 40, 4).unwrap();
    let prepared = prepare_dataset(&set.series, "mem", "none", Some(4), &recipe()).unwrap();
    let splits = &prepared.splits;
    let config = NetworkConfig {
        max_epochs: 3,
        batch_size: 32,
        learning_rate: 5e-3,
        ..NetworkConfig::new(8, vec![16], 4)
    };
    let outcome = train(&config, &splits.train, &splits.valid, None).unwrap();
    let model = outcome.model.clone();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let normalization = prepared.manifest.normalization.clone();
    ModelCheckpoint::from_outcome(outcome, normalization, Some(prepared.manifest.clone()))
        .save(&path)
        .unwrap();
    let loaded = ModelCheckpoint::load(&path).unwrap();
    assert_eq!(loaded.model, model);
    let rebuilt = rebuild_dataset(&set.series, loaded.data.as_ref().unwrap()).unwrap();
    assert_eq!(&rebuilt, splits);

    let truths: Vec<Vec<f64>> = splits.test.iter().map(|w| w.future.clone()).collect();
    let mut rows = vec![];
    let neural = Forecaster::Neural(&loaded.model);
    let baseline = Forecaster::Baseline {
        kind: Baseline::Bs,
        fit: FitConfig::default(),
    };
    for (name, f) in [("neural", neural), ("bs", baseline)] {
        let fc = forecast_windows(&f, &splits.test, 4, &sampling(6)).unwrap();
        assert!(fc
            .iter()
            .all(|w| w.step_log_densities.as_ref().unwrap().len() == 4));
        let bundles: Vec<_> = fc.into_iter().map(|w| w.bundle).collect();
        assert!(bundles.iter().flat_map(|b| &b.mean).all(|v| *v > 0.0));
        let report = protocol_metrics(&bundles, &truths, 6).unwrap();
        assert!(report.best_of_k.unwrap().mae <= report.sample_average.unwrap().mae + 1e-12);
        rows.push((name.to_string(), report));
    }
    let table = render_table(&rows);
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn forecasts_do_not_depend_on_the_other_windows() {
    let set = generate_synthetic(20, 40, 6).unwrap();
    let prepared = prepare_dataset(&set.series, "mem", "none", None, &recipe()).unwrap();
    let test = &prepared.splits.test;
    let f = Forecaster::Baseline {
        kind: Baseline::Bs,
        fit: FitConfig::default(),
    };
    let all = forecast_windows(&f, test, 4, &sampling(3)).unwrap();
    let first = forecast_windows(&f, &test[..1], 4, &sampling(3)).unwrap();
    assert_eq!(all[0], first[0]);
}
