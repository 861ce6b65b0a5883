use std::path::Path;

use crate::dataset::{io, Sample, Split};
use crate::error::{config_err, Result};
use crate::metrics::{model_delta, MetricsReport};
use crate::model::{TaskId, Variant};
use crate::trainer::config::TrainConfig;
use crate::trainer::eval::evaluate;
use crate::trainer::history::TrainHistory;
use crate::trainer::train::train_on;

/// Test-split results of the six ablation models.
#[derive(Clone, Debug)]
pub struct AblationReport {
    /// One row per [`Variant::ALL`] entry, in that order. Multi-task rows carry
    /// their Δ over `baseline`.
    pub rows: Vec<MetricsReport>,
    /// Element metrics of the element-only model joined with defect metrics
    /// of the defect-only model.
    pub baseline: MetricsReport,
    pub histories: Vec<(Variant, TrainHistory)>,
}

impl AblationReport {
    pub fn row(&self, variant: Variant) -> Option<&MetricsReport> {
        Variant::ALL
            .iter()
            .position(|&v| v == variant)
            .and_then(|i| self.rows.get(i))
    }
}

pub fn run_ablation(base: &TrainConfig) -> Result<AblationReport> {
    let root = base
        .data_dir
        .as_deref()
        .ok_or_else(|| config_err!("data_dir is not set"))?;
    let (train, val, test) = load_all_splits(root)?;
    run_ablation_on(&train, &val, &test, base, |_, _| {})
}

pub fn load_all_splits(root: &Path) -> Result<(Vec<Sample>, Vec<Sample>, Vec<Sample>)> {
    let m = io::read_manifest(root)?;
    Ok((
        io::load_samples(root, m.ids(Split::Train))?,
        io::load_samples(root, m.ids(Split::Validation))?,
        io::load_samples(root, m.ids(Split::Test))?,
    ))
}

/// Trains every variant with the same seed and schedule, evaluates each best
/// checkpoint on `test`, and attaches Δ to the multi-task rows.
pub fn run_ablation_on(
    train: &[Sample],
    val: &[Sample],
    test: &[Sample],
    base: &TrainConfig,
    mut on_variant: impl FnMut(Variant, &MetricsReport),
) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(Variant::ALL.len());
    let mut histories = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let mut cfg = base.clone();
        cfg.model = base.model.clone().with_variant(variant);
        let outcome = train_on(train, val, &cfg)?;
        let report = evaluate(&outcome.best, test, variant.label())?;
        on_variant(variant, &report);
        rows.push(report);
        histories.push((variant, outcome.history));
    }
    let mut baseline = MetricsReport::new("Single-task baseline");
    for task in TaskId::ALL {
        let idx = Variant::ALL
            .iter()
            .position(|&v| v == Variant::SingleTask(task))
            .expect("single-task variants are listed");
        let m = rows[idx].task(task).expect("single-task row has its task").clone();
        baseline.set_task(m);
    }
    for (row, variant) in rows.iter_mut().zip(Variant::ALL) {
        if !matches!(variant, Variant::SingleTask(_)) {
            row.delta = Some(model_delta(row, &baseline)?);
        }
    }
    Ok(AblationReport {
        rows,
        baseline,
        histories,
    })
}
