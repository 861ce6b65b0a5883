use crate::dataset::{argmax_mask, one_hot, ClassIndexMask, Sample};
use crate::error::{shape_err, Result};
use crate::loss::cross_entropy;
use crate::metrics::{task_metrics, ConfusionCounts, MetricsReport};
use crate::model::{AecifNet, Encoder, TaskId};
use crate::nn::{FeatureMap, Real};

/// Stacks the images of `samples` into one `B x 3 x H x W` batch.
pub fn stack_images<T: Real>(samples: &[&Sample]) -> Result<FeatureMap<T>> {
    let parts: Vec<FeatureMap<T>> = samples.iter().map(|s| s.image.cast()).collect();
    FeatureMap::stack(&parts)
}

/// Stacked one-hot targets for `task`.
pub fn stack_targets<T: Real>(samples: &[&Sample], task: TaskId) -> Result<FeatureMap<T>> {
    let spec = task.spec();
    let parts = samples
        .iter()
        .map(|s| one_hot(mask_for(s, task), &spec))
        .collect::<Result<Vec<FeatureMap<T>>>>()?;
    FeatureMap::stack(&parts)
}

pub fn mask_for(sample: &Sample, task: TaskId) -> &ClassIndexMask {
    match task {
        TaskId::Element => &sample.element_mask,
        TaskId::Defect => &sample.defect_mask,
    }
}

/// Per-task argmax masks for one image.
pub fn predict<T: Real, E: Encoder<T>>(
    model: &AecifNet<T, E>,
    image: &FeatureMap<T>,
) -> Result<Vec<(TaskId, ClassIndexMask)>> {
    if image.batch() != 1 {
        return Err(shape_err!("predict takes one image, got batch {}", image.batch()));
    }
    let out = model.forward_eval(image)?;
    model
        .tasks()
        .into_iter()
        .map(|t| {
            let scores = out.scores.get(t).expect("active task has scores");
            Ok((t, argmax_mask(scores, 0)?))
        })
        .collect()
}

/// Unit-weighted eval-mode loss averaged over every pixel of `samples`.
pub fn validation_loss<T: Real, E: Encoder<T>>(
    model: &AecifNet<T, E>,
    samples: &[Sample],
    batch_size: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let out = model.forward_eval(&stack_images(&refs)?)?;
        for t in model.tasks() {
            let target = stack_targets(&refs, t)?;
            let scores = out.scores.get(t).expect("active task has scores");
            total += cross_entropy(scores, &target)?.to_f64_lossy() * chunk.len() as f64;
        }
    }
    Ok(total / samples.len() as f64)
}

/// Dataset-level metrics from counts aggregated over all `samples`.
pub fn evaluate<T: Real, E: Encoder<T>>(
    model: &AecifNet<T, E>,
    samples: &[Sample],
    label: &str,
) -> Result<MetricsReport> {
    let tasks = model.tasks();
    let mut counts: Vec<ConfusionCounts> = tasks
        .iter()
        .map(|t| ConfusionCounts::new(t.spec().class_count()))
        .collect();
    for s in samples {
        for ((t, pred), c) in predict(model, &s.image.cast())?.into_iter().zip(&mut counts) {
            c.accumulate(&pred, mask_for(s, t))?;
        }
    }
    let mut report = MetricsReport::new(label);
    for (t, c) in tasks.into_iter().zip(&counts) {
        report.set_task(task_metrics(c, &t.spec())?);
    }
    Ok(report)
}
