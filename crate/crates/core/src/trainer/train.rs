use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{augment, io, sample_rng, AugmentConfig, Sample, Split};
use crate::error::{config_err, Error, Result};
use crate::loss::{cross_entropy, cross_entropy_grad, weighted_total, DwaState};
use crate::model::{AecifNet, PredictionScores, TaskId};
use crate::nn::Parameterized;
use crate::trainer::config::{cosine_lr, TrainConfig};
use crate::trainer::eval::{stack_images, stack_targets, validation_loss};
use crate::trainer::history::{EpochRecord, TrainHistory};
use crate::trainer::optim::Adam;

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Snapshot at the epoch with the lowest validation loss.
    pub best: AecifNet<f32>,
    /// Weights after the final epoch.
    pub last: AecifNet<f32>,
    pub history: TrainHistory,
}

/// Loads the dataset named by `config.data_dir` and trains on its train and
/// validation splits.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let root = config
        .data_dir
        .as_deref()
        .ok_or_else(|| config_err!("data_dir is not set"))?;
    let (train_set, val_set) = load_training_splits(root)?;
    train_on(&train_set, &val_set, config)
}

pub fn load_training_splits(root: &Path) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let manifest = io::read_manifest(root)?;
    Ok((
        io::load_samples(root, manifest.ids(Split::Train))?,
        io::load_samples(root, manifest.ids(Split::Validation))?,
    ))
}

pub fn train_on(train_set: &[Sample], val_set: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    train_on_with(train_set, val_set, config, |_| {})
}

/// [`train_on`] with a callback invoked after every epoch.
pub fn train_on_with(
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(config_err!("training set is empty"));
    }
    let mut model = AecifNet::<f32>::new(config.model.clone(), config.seed)?;
    let tasks = model.tasks();
    let multi_task = tasks.len() == 2;
    let mut optimizer = Adam::new(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    let mut dwa = DwaState::new(config.dwa_temperature);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let augment_cfg = AugmentConfig::default();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, AecifNet<f32>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config)?;
        let weights = if multi_task { dwa.weights() } else { [1.0, 1.0] };
        order.shuffle(&mut shuffle_rng);
        let mut sums = [0.0f64; 2];
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            let augmented: Vec<Sample>;
            let batch: Vec<&Sample> = if config.augment {
                let stream_seed = config.seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                augmented = chunk
                    .iter()
                    .map(|&i| {
                        let s = &train_set[i];
                        augment(s, &mut sample_rng(stream_seed, s.id), &augment_cfg)
                    })
                    .collect();
                augmented.iter().collect()
            } else {
                chunk.iter().map(|&i| &train_set[i]).collect()
            };
            let images = stack_images::<f32>(&batch)?;
            model.zero_grad();
            let (scores, cache) = model.forward_train(&images)?;
            let mut grads = PredictionScores::default();
            for &task in &tasks {
                let target = stack_targets::<f32>(&batch, task)?;
                let probs = scores.get(task).expect("active task has scores");
                let loss = f64::from(cross_entropy(probs, &target)?);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite {task} loss at epoch {}, batch {}",
                        epoch + 1,
                        batch_index + 1
                    )));
                }
                sums[task.index()] += loss * batch.len() as f64;
                let lambda = weights[task.index()] as f32;
                let g = cross_entropy_grad(probs, &target)?.map(|v| v * lambda);
                grads.set(task, g);
            }
            model.backward(&cache, &grads)?;
            optimizer.step(model.params_mut(), lr);
        }
        let n = train_set.len() as f64;
        let losses = [sums[0] / n, sums[1] / n];
        let val_loss = validation_loss(&model, val_set, config.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite validation loss at epoch {}", epoch + 1)));
        }
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            lr,
            loss_element: losses[TaskId::Element.index()],
            loss_defect: losses[TaskId::Defect.index()],
            lambda_element: weights[0],
            lambda_defect: weights[1],
            loss_total: weighted_total(losses[0], losses[1], weights),
            val_loss,
            checkpoint: false,
        };
        on_epoch(&record);
        history.epochs.push(record);
        if multi_task {
            dwa.update(losses)?;
        }
    }
    history.mark_best();
    let (_, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        last: model,
        history,
    })
}
