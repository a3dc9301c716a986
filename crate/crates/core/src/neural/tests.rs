use super::*;
use crate::data::{
    generate_synthetic, split_by_fractions, windowize, NormScope, NormalizationTable, SeriesWindow,
};
use crate::likelihood::{horizon_log_likelihood, Anchor};
use crate::rng::StreamRng;
use std::f64::consts::LN_2;

fn normalized(mut w: SeriesWindow) -> SeriesWindow {
    let scale = w.past.iter().cloned().fold(0.0, f64::max);
    w.norm_scale = Some(scale);
    w
}

fn random_window(rng: &mut StreamRng, t_past: usize, horizon: usize) -> SeriesWindow {
    let mut v = 1.0f64;
    let values: Vec<f64> = (0..t_past + horizon)
        .map(|_| {
            v *= (0.05 * rng.normal()
                + if rng.uniform() < 0.2 {
                    0.3 * rng.normal()
                } else {
                    0.0
                })
            .exp();
            v
        })
        .collect();
    normalized(SeriesWindow::new(
        "w",
        values[..t_past].to_vec(),
        values[t_past..].to_vec(),
    ))
}

fn small_config(seed: u64) -> NetworkConfig {
    NetworkConfig {
        seed,
        ..NetworkConfig::new(6, vec![5], 3)
    }
}

fn fd_check(model: &NeuralModel, w: &SeriesWindow, omega: f64, kappa: usize) {
    let (_, grad) = model.gradient(w, omega, kappa).unwrap();
    let h = 1e-5;
    for (i, &g) in grad.iter().enumerate() {
        let mut up = model.clone();
        up.net.params_mut()[i] += h;
        let mut dn = model.clone();
        dn.net.params_mut()[i] -= h;
        let fd = (up.loss(w, omega, kappa).unwrap().total
            - dn.loss(w, omega, kappa).unwrap().total)
            / (2.0 * h);
        let err = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-3);
        assert!(err < 1e-4, "param {i}: analytic {g} fd {fd}");
    }
}

#[test]
fn zero_output_layer_gives_fixed_schedule() {
    let mut model = NeuralModel::new(small_config(1)).unwrap();
    let n = model.net.n_params();
    let last = *model.net.layout().last().unwrap();
    model.net.params_mut()[n - last.n_params()..].fill(0.0);
    let w = random_window(&mut StreamRng::new(2, 0), 6, 3);
    let s = model.predict_schedule(&w).unwrap();
    for p in s.steps() {
        assert_eq!((p.mu(), p.nu()), (0.0, 0.0));
        assert!((p.sigma() - LN_2).abs() < 1e-3 && (p.lambda() - LN_2).abs() < 1e-12);
    }
}

#[test]
fn prediction_is_pure_and_sensitive() {
    let model = NeuralModel::new(small_config(3)).unwrap();
    let w = random_window(&mut StreamRng::new(4, 0), 6, 3);
    assert_eq!(
        model.predict_schedule(&w).unwrap(),
        model.predict_schedule(&w).unwrap()
    );
    let mut moved = w.clone();
    moved.past[2] *= 0.9;
    assert_ne!(
        model.predict_schedule(&w).unwrap(),
        model.predict_schedule(&moved).unwrap()
    );
    let (_, g) = model.gradient(&w, 1.0, 5).unwrap();
    assert!(g.iter().map(|x| x * x).sum::<f64>() > 0.0);
}

#[test]
fn omega_zero_is_negative_bootstrapped_likelihood() {
    let model = NeuralModel::new(small_config(5)).unwrap();
    let w = random_window(&mut StreamRng::new(6, 0), 6, 3);
    let schedule = model.predict_schedule(&w).unwrap();
    let ll = horizon_log_likelihood(
        &schedule,
        w.normalized_anchor().unwrap(),
        &w.normalized_future().unwrap(),
        5,
        Anchor::MeanBootstrapped,
    )
    .unwrap();
    let loss = model.loss(&w, 0.0, 5).unwrap();
    assert_eq!(loss.total, -ll.total);
}

#[test]
fn targets_at_the_mean_have_no_regression_term() {
    let model = NeuralModel::new(small_config(7)).unwrap();
    let mut w = random_window(&mut StreamRng::new(8, 0), 6, 3);
    let schedule = model.predict_schedule(&w).unwrap();
    let s0 = w.normalized_anchor().unwrap();
    let scale = w.norm_scale.unwrap();
    w.future = (1..=3)
        .map(|t| schedule.conditional_mean(s0, t as f64).unwrap() * scale)
        .collect();
    let loss = model.loss(&w, 1.0, 5).unwrap();
    assert!(
        loss.per_step.iter().all(|s| s.squared_error < 1e-28),
        "{loss:?}"
    );
}

#[test]
fn random_windows_have_finite_loss_and_gradient() {
    let mut rng = StreamRng::new(9, 0);
    for i in 0..100 {
        let model = NeuralModel::new(small_config(i)).unwrap();
        let w = random_window(&mut rng, 6, 3);
        let (l, g) = model.gradient(&w, 1.0, 5).unwrap();
        assert!(l.is_finite() && g.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = StreamRng::new(10, 0);
    for (seed, omega, kappa) in [(1, 0.0, 1), (2, 1.0, 5), (3, 1.0, 1)] {
        let model = NeuralModel::new(small_config(seed)).unwrap();
        fd_check(&model, &random_window(&mut rng, 6, 3), omega, kappa);
    }
}

#[test]
fn gradient_matches_finite_differences_teacher_forced_and_without_jumps() {
    let mut rng = StreamRng::new(11, 0);
    let teacher = NeuralModel::new(NetworkConfig {
        anchor: Anchor::TeacherForced,
        ..small_config(4)
    })
    .unwrap();
    fd_check(&teacher, &random_window(&mut rng, 6, 3), 1.0, 5);
    let bs = NeuralModel::new(NetworkConfig {
        jumps: false,
        ..small_config(5)
    })
    .unwrap();
    fd_check(&bs, &random_window(&mut rng, 6, 3), 1.0, 5);
}

#[test]
fn gradient_is_affine_in_omega() {
    let model = NeuralModel::new(small_config(12)).unwrap();
    let w = random_window(&mut StreamRng::new(13, 0), 6, 3);
    let g = |o: f64| model.gradient(&w, o, 5).unwrap().1;
    let (g0, g1, g2) = (g(0.0), g(1.0), g(2.0));
    for i in 0..g0.len() {
        let lhs = g2[i] - g0[i];
        let rhs = 2.0 * (g1[i] - g0[i]);
        assert!(
            (lhs - rhs).abs() <= 1e-12 * (1.0 + g2[i].abs()),
            "{i}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn stationary_point_of_toy_network() {
    // all weights zero: the schedule comes from the output biases alone
    let mut model = NeuralModel::new(NetworkConfig {
        jumps: false,
        ..NetworkConfig::new(2, vec![1], 1)
    })
    .unwrap();
    model.net.params_mut().fill(0.0);
    let n = model.net.n_params();
    let (mu_bias, sigma_bias) = (n - HEADS, n - HEADS + 1);
    model.net.params_mut()[sigma_bias] = -1.0;
    let sigma = softplus(-1.0) + POSITIVE_OFFSET;
    let w = normalized(SeriesWindow::new("toy", vec![0.5, 1.0], vec![1.3]));
    // −ψ is minimized where ln(1.3/1) = μ − σ²/2
    model.net.params_mut()[mu_bias] = 1.3f64.ln() + 0.5 * sigma * sigma;
    let (_, g) = model.gradient(&w, 0.0, 5).unwrap();
    assert!(g[mu_bias].abs() < 1e-12, "{}", g[mu_bias]);
    assert!(g[sigma_bias].abs() > 1e-3);
}

#[test]
fn parallel_loss_is_bitwise_sequential() {
    let model = NeuralModel::new(NetworkConfig::new(6, vec![7], 8)).unwrap();
    let w = random_window(&mut StreamRng::new(14, 0), 6, 8);
    assert_eq!(
        model.loss(&w, 1.0, 5).unwrap(),
        model.loss_parallel(&w, 1.0, 5).unwrap()
    );
}

#[test]
fn anchor_choice_only_affects_later_steps() {
    let boot = NeuralModel::new(small_config(15)).unwrap();
    let teacher = NeuralModel {
        config: NetworkConfig {
            anchor: Anchor::TeacherForced,
            ..boot.config.clone()
        },
        net: boot.net.clone(),
    };
    let w = random_window(&mut StreamRng::new(16, 0), 6, 3);
    let (a, b) = (
        boot.loss(&w, 1.0, 5).unwrap(),
        teacher.loss(&w, 1.0, 5).unwrap(),
    );
    assert_eq!(a.per_step[0], b.per_step[0]);
    assert!((1..3).all(|t| a.per_step[t].log_density != b.per_step[t].log_density));
}

#[test]
fn shape_errors() {
    let model = NeuralModel::new(small_config(1)).unwrap();
    let w = random_window(&mut StreamRng::new(1, 0), 5, 3);
    assert!(matches!(
        model.predict_schedule(&w),
        Err(crate::Error::Shape(_))
    ));
    let w = random_window(&mut StreamRng::new(1, 0), 6, 2);
    assert!(matches!(
        model.loss(&w, 1.0, 5),
        Err(crate::Error::Shape(_))
    ));
    let mut raw = random_window(&mut StreamRng::new(1, 0), 6, 3);
    raw.norm_scale = None;
    assert!(model.predict_schedule(&raw).is_err());
}

fn synthetic_splits(paths: usize) -> (Vec<SeriesWindow>, Vec<SeriesWindow>, NormalizationTable) {
    let set = generate_synthetic(paths, 40, 21).unwrap();
    let windows = windowize(&set.series, 6, 3, 4).unwrap().windows;
    let mut s = split_by_fractions(windows, [0.6, 0.2, 0.2]).unwrap();
    let table = NormalizationTable::fit(&s.train, NormScope::WindowPast).unwrap();
    table.apply(&mut s.train);
    table.apply(&mut s.valid);
    (s.train, s.valid, table)
}

fn train_config(max_epochs: usize) -> NetworkConfig {
    NetworkConfig {
        batch_size: 16,
        max_epochs,
        learning_rate: 3e-3,
        seed: 5,
        patience: 100,
        ..NetworkConfig::new(6, vec![12], 3)
    }
}

#[test]
fn training_improves_validation_and_is_deterministic() {
    let (tr, va, _) = synthetic_splits(40);
    let a = train(&train_config(8), &tr, &va, None).unwrap();
    let b = train(&train_config(8), &tr, &va, None).unwrap();
    assert_eq!(a, b);
    assert!(
        a.state.best_valid < a.state.history[0].valid_loss,
        "{:?}",
        a.state.history
    );
    assert_eq!(a.stop, StopReason::MaxEpochs);
}

#[test]
fn resume_continues_bitwise() {
    let (tr, va, _) = synthetic_splits(30);
    let straight = train(&train_config(6), &tr, &va, None).unwrap();
    let first = train(&train_config(3), &tr, &va, None).unwrap();
    let resumed = train(&train_config(6), &tr, &va, Some(first.state.clone())).unwrap();
    assert_eq!(resumed, straight);
    assert!(resumed.state.best_valid <= first.state.best_valid);
}

#[test]
fn early_stopping_and_empty_splits() {
    let (tr, va, _) = synthetic_splits(20);
    let cfg = NetworkConfig {
        patience: 0,
        ..train_config(5)
    };
    assert_eq!(
        train(&cfg, &tr, &va, None).unwrap().stop,
        StopReason::EarlyStopped
    );
    assert!(train(&cfg, &tr, &[], None).is_err());
}

#[test]
fn single_window_overfits() {
    let w = random_window(&mut StreamRng::new(17, 0), 6, 3);
    let cfg = NetworkConfig {
        batch_size: 1,
        max_epochs: 1500,
        learning_rate: 1e-2,
        patience: 2000,
        ..train_config(0)
    };
    let out = train(
        &cfg,
        std::slice::from_ref(&w),
        std::slice::from_ref(&w),
        None,
    )
    .unwrap();
    let start = out.state.history[0].valid_loss;
    let end = out.model.loss(&w, 1.0, 5).unwrap();
    assert!(end.total < start - 5.0, "{start} -> {}", end.total);
    assert!(
        end.per_step.iter().all(|s| s.squared_error < 1e-4),
        "{end:?}"
    );
}

#[test]
fn checkpoint_round_trip() {
    let (tr, va, table) = synthetic_splits(20);
    let out = train(&train_config(2), &tr, &va, None).unwrap();
    let ckpt = ModelCheckpoint::from_outcome(out, table, None);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ckpt.save(&path).unwrap();
    assert_eq!(ModelCheckpoint::load(&path).unwrap(), ckpt);

    let bin = dir.path().join("model.bin");
    let mut bytes = std::fs::read(&bin).unwrap();
    assert_eq!(&bytes[..8], b"NMJDWTS\0");
    bytes[30] ^= 1;
    std::fs::write(&bin, bytes).unwrap();
    assert!(matches!(
        ModelCheckpoint::load(&path),
        Err(crate::Error::Data(_))
    ));
}
