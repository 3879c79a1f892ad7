use ternspike_core::qtsnn::qt_forward;
use ternspike_core::topology::LayerShape;
use ternspike_core::training::{
    build_dataset, export_for_inference, forward, grad_check, init_model, train_toy, GradCheckOptions, Mode,
    QtSnnModel, TrainConfig, TrainLayer,
};

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        samples_per_class: 10,
        hidden: 8,
        timesteps: 8,
        fan_in: 8,
        ..TrainConfig::default()
    }
}

fn single_layer(cfg: &TrainConfig) -> QtSnnModel {
    let mut model = init_model(cfg);
    let mut layer: TrainLayer = model.layers.remove(0);
    layer.shape = LayerShape::dense(cfg.fan_in, 3);
    layer.w_latent.truncate(cfg.fan_in * 3);
    QtSnnModel {
        layers: vec![layer],
        ..model
    }
}

#[test]
fn eval_mode_matches_integer_engine() {
    let cfg = small_config();
    let outcome = train_toy(&cfg).unwrap();
    let exported = export_for_inference(&outcome.model).unwrap();
    for s in outcome.dataset.train.iter().chain(&outcome.dataset.test) {
        let pass = forward(&outcome.model, &s.inputs, cfg.gamma, Mode::Eval);
        let run = qt_forward(&exported, &s.inputs).unwrap();
        let scores: Vec<f64> = run.scores.iter().map(|&v| v as f64).collect();
        assert_eq!(pass.scores, scores);
        assert_eq!(pass.spikes, run.spikes);
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = small_config();
    let a = train_toy(&cfg).unwrap();
    let b = train_toy(&cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
}

#[test]
fn history_starts_with_untrained_row() {
    let cfg = small_config();
    let outcome = train_toy(&cfg).unwrap();
    assert_eq!(outcome.history.len(), cfg.epochs + 1);
    assert_eq!(outcome.history[0].epoch, 0);
}

#[test]
fn untrained_model_is_near_chance() {
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let acc = train_toy(&cfg).unwrap().final_metrics().test_acc;
    assert!((acc - 1.0 / 3.0).abs() <= 0.1, "{acc}");
}

#[test]
fn split_is_stratified() {
    let cfg = small_config();
    let data = build_dataset(&cfg).unwrap();
    assert_eq!(data.test.len(), 6);
    assert_eq!(data.train.len(), 24);
    for class in 0..3 {
        assert_eq!(data.test.iter().filter(|s| s.label == class).count(), 2);
    }
}

#[test]
fn relaxed_gradients_match_finite_differences() {
    let cfg = small_config();
    let data = build_dataset(&cfg).unwrap();
    let model = init_model(&cfg);
    for (seed, s) in data.train.iter().take(5).enumerate() {
        let opts = GradCheckOptions {
            seed: seed as u64,
            ..GradCheckOptions::default()
        };
        let report = grad_check(&model, &s.inputs, s.label, &opts).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert!(report.entries.iter().any(|e| e.analytic.abs() > 1e-3));
    }
}

#[test]
fn single_layer_gradients_match() {
    let cfg = small_config();
    let data = build_dataset(&cfg).unwrap();
    let model = single_layer(&cfg);
    let s = &data.train[0];
    let report = grad_check(&model, &s.inputs, s.label, &GradCheckOptions::default()).unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn dead_parameters_agree_on_zero() {
    let cfg = small_config();
    let data = build_dataset(&cfg).unwrap();
    let model = init_model(&cfg);
    let s = &data.train[0];
    let opts = GradCheckOptions {
        params: model.param_count(),
        ..GradCheckOptions::default()
    };
    let report = grad_check(&model, &s.inputs, s.label, &opts).unwrap();
    let dead: Vec<_> = report.entries.iter().filter(|e| e.analytic == 0.0).collect();
    assert!(!dead.is_empty());
    for e in dead {
        assert!(e.numeric.abs() < 1e-8, "{e:?}");
    }
}

#[test]
fn coarse_step_increases_error() {
    let cfg = small_config();
    let data = build_dataset(&cfg).unwrap();
    let model = init_model(&cfg);
    let s = &data.train[0];
    let fine = GradCheckOptions {
        params: model.param_count(),
        ..GradCheckOptions::default()
    };
    let coarse = GradCheckOptions { step: 1e-2, ..fine };
    let e_fine = grad_check(&model, &s.inputs, s.label, &fine).unwrap().max_rel_error;
    let e_coarse = grad_check(&model, &s.inputs, s.label, &coarse).unwrap().max_rel_error;
    assert!(e_coarse > e_fine, "{e_coarse} <= {e_fine}");
}

/// Soft monotonicity of the training loss. The default run reaches its
/// accuracy target but the epoch-to-epoch loss is too noisy to meet this.
#[test]
#[ignore = "not met by the default configuration; see README"]
fn training_loss_mostly_non_increasing() {
    let outcome = train_toy(&TrainConfig::default()).unwrap();
    let h = &outcome.history;
    let down = h.windows(2).filter(|w| w[1].train_loss <= w[0].train_loss).count();
    assert!(down as f64 >= 0.9 * (h.len() - 1) as f64, "{down}/{}", h.len() - 1);
}
