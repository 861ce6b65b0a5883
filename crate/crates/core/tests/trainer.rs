use aecif::dataset::{synth_generate, Sample};
use aecif::model::{save_checkpoint, load_checkpoint, ModelConfig, Variant};
use aecif::nn::{Param, Parameterized};
use aecif::trainer::{
    cosine_lr, evaluate, run_ablation_on, train_on, train_on_with, validation_loss, Adam, TrainConfig, TrainHistory,
};

fn tiny_config(epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::desk();
    cfg.model = ModelConfig::desk_scale_with_input(32, 32);
    cfg.epochs = epochs;
    cfg.batch_size = 2;
    cfg.seed = 5;
    cfg
}

fn tiny_data(n: usize, seed: u64) -> Vec<Sample> {
    synth_generate(n, (32, 32), seed).unwrap()
}

#[test]
fn cosine_schedule_examples() {
    let mut cfg = TrainConfig::full();
    cfg.epochs = 151;
    assert_eq!(cosine_lr(0, &cfg).unwrap(), 5e-4);
    assert_eq!(cosine_lr(150, &cfg).unwrap(), 5e-6);
    assert!((cosine_lr(75, &cfg).unwrap() - 2.525e-4).abs() < 1e-12);
    assert!(cosine_lr(151, &cfg).is_err());
    let lrs: Vec<f64> = (0..151).map(|e| cosine_lr(e, &cfg).unwrap()).collect();
    assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    cfg.epochs = 1;
    assert_eq!(cosine_lr(0, &cfg).unwrap(), 5e-4);
}

#[test]
fn history_starts_with_unit_weights_and_round_trips() {
    let data = tiny_data(4, 1);
    let mut seen = Vec::new();
    let out = train_on_with(&data, &data[..2], &tiny_config(3), |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    let h = &out.history;
    assert_eq!(h.len(), 3);
    for r in &h.epochs[..2] {
        assert_eq!((r.lambda_element, r.lambda_defect), (1.0, 1.0));
    }
    for r in &h.epochs {
        assert!((r.lambda_element + r.lambda_defect - 2.0).abs() < 1e-12);
        let total = r.lambda_element * r.loss_element + r.lambda_defect * r.loss_defect;
        assert!((r.loss_total - total).abs() < 1e-9);
    }
    assert_eq!(h.epochs.iter().filter(|r| r.checkpoint).count(), 1);
    let parsed = TrainHistory::parse(&h.render()).unwrap();
    assert_eq!(parsed.render(), h.render());
}

#[test]
fn same_seed_same_run() {
    let data = tiny_data(4, 2);
    let cfg = tiny_config(2);
    let a = train_on(&data, &data[..2], &cfg).unwrap();
    let b = train_on(&data, &data[..2], &cfg).unwrap();
    assert_eq!(a.history.render(), b.history.render());
    for (p, q) in a.last.params().into_iter().zip(b.last.params()) {
        assert_eq!(p.value, q.value, "{}", p.name);
    }
    let mut other = cfg.clone();
    other.seed = 6;
    let c = train_on(&data, &data[..2], &other).unwrap();
    assert_ne!(a.history.render(), c.history.render());
}

#[test]
fn best_checkpoint_reproduces_its_validation_loss() {
    let data = tiny_data(6, 3);
    let (train, val) = data.split_at(4);
    let cfg = tiny_config(4);
    let out = train_on(train, val, &cfg).unwrap();
    let best = out.history.best().unwrap();
    let min = out.history.epochs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_loss, min);

    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&out.best, dir.path()).unwrap();
    let reloaded = load_checkpoint(dir.path()).unwrap();
    let again = validation_loss(&reloaded, val, cfg.batch_size).unwrap();
    assert!((again - best.val_loss).abs() <= 1e-6, "{again} vs {}", best.val_loss);
}

#[test]
fn training_reduces_the_loss() {
    let data = tiny_data(4, 4);
    let mut cfg = tiny_config(25);
    cfg.augment = false;
    let out = train_on(&data, &data, &cfg).unwrap();
    let first = out.history.epochs[0].loss_total;
    let last = out.history.epochs.last().unwrap().loss_total;
    assert!(last < 0.7 * first, "{first} -> {last}");
}

#[test]
fn adam_moves_every_parameter_with_a_gradient() {
    let mut p = Param::<f32>::new("w", &[3], 1.0, true);
    p.grad = vec![1.0, -2.0, 0.0];
    let mut frozen = Param::<f32>::new("r", &[1], 4.0, false);
    frozen.grad = vec![1.0];
    let mut adam = Adam::new(0.9, 0.999, 1e-8);
    adam.step(vec![&mut p, &mut frozen], 0.1);
    // First bias-corrected step has magnitude lr in the gradient's sign direction.
    assert!((p.value[0] - 0.9).abs() < 1e-6);
    assert!((p.value[1] - 1.1).abs() < 1e-6);
    assert_eq!(p.value[2], 1.0);
    assert_eq!(frozen.value[0], 4.0);
    assert_eq!(adam.steps(), 1);
}

#[test]
fn invalid_configs_are_rejected() {
    let data = tiny_data(2, 5);
    let mut cfg = tiny_config(0);
    assert!(train_on(&data, &data, &cfg).is_err());
    cfg.epochs = 1;
    assert!(train_on(&[], &data, &cfg).is_err());
    cfg.batch_size = 0;
    assert!(train_on(&data, &data, &cfg).is_err());
    assert!(TrainConfig::parse("epochs=3\nbogus=1\n", &TrainConfig::desk()).is_err());
}

#[test]
fn config_text_round_trip() {
    let mut cfg = tiny_config(7);
    cfg.lr_initial = 1e-3;
    cfg.augment = false;
    let text = cfg.to_kv().render();
    assert_eq!(TrainConfig::parse(&text, &TrainConfig::full()).unwrap(), cfg);
    let tweaked = cfg.with_overrides(["epochs=9", "model.use_fusion=false"]).unwrap();
    assert_eq!(tweaked.epochs, 9);
    assert!(!tweaked.model.use_fusion);
}

#[test]
fn ablation_produces_six_rows_with_deltas_on_multi_task_models() {
    let data = tiny_data(8, 6);
    let (train, rest) = data.split_at(4);
    let (val, test) = rest.split_at(2);
    let mut seen = Vec::new();
    let report = run_ablation_on(train, val, test, &tiny_config(2), |v, _| seen.push(v)).unwrap();
    assert_eq!(seen, Variant::ALL.to_vec());
    assert_eq!(report.rows.len(), 6);
    for (v, row) in Variant::ALL.iter().zip(&report.rows) {
        assert_eq!(row.label, v.label());
        match v {
            Variant::SingleTask(t) => {
                assert!(row.delta.is_none());
                assert!(row.task(*t).is_some() && row.task(t.other()).is_none());
            }
            _ => {
                assert!(row.delta.is_some());
                assert!(row.element.is_some() && row.defect.is_some());
            }
        }
    }
    let base = report.baseline.task_values().unwrap();
    assert_eq!(base[0], report.rows[0].element.as_ref().unwrap().mean_iou);
    assert_eq!(base[3], report.rows[1].defect.as_ref().unwrap().mean_iou);
    assert_eq!(report.histories.len(), 6);
    // Evaluating the same snapshot twice gives the same report.
    let out = train_on(train, val, &tiny_config(1)).unwrap();
    assert_eq!(evaluate(&out.best, test, "x").unwrap(), evaluate(&out.best, test, "x").unwrap());
}
