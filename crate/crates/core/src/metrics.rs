//! Segmentation metrics: per-class IoU / Precision / Recall, per-task
//! mIoU / mAcc / pAcc, and the model-level mean percent increase over a
//! baseline.
//!
//! All ratios are computed from confusion counts aggregated over the whole
//! evaluation set. A class that never occurs in either truth or prediction
//! has undefined metrics and is left out of the task means.

use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::dataset::ClassIndexMask;
use crate::error::{config_err, data_err, shape_err, Error, Result};
use crate::model::{TaskId, TaskSpec};

/// Per-class true-positive, false-positive and false-negative pixel counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positive: Vec<u64>,
    pub false_positive: Vec<u64>,
    pub false_negative: Vec<u64>,
    pub total: u64,
}

impl ConfusionCounts {
    pub fn new(class_count: usize) -> Self {
        ConfusionCounts {
            true_positive: vec![0; class_count],
            false_positive: vec![0; class_count],
            false_negative: vec![0; class_count],
            total: 0,
        }
    }

    pub fn class_count(&self) -> usize {
        self.true_positive.len()
    }

    /// Adds one prediction/truth pair.
    pub fn accumulate(&mut self, pred: &ClassIndexMask, truth: &ClassIndexMask) -> Result<()> {
        if !pred.same_size(truth) {
            return Err(shape_err!(
                "prediction {}x{} vs truth {}x{}",
                pred.height(),
                pred.width(),
                truth.height(),
                truth.width()
            ));
        }
        let n = self.class_count();
        pred.validate(n)?;
        truth.validate(n)?;
        for (&p, &t) in pred.data().iter().zip(truth.data()) {
            if p == t {
                self.true_positive[p as usize] += 1;
            } else {
                self.false_positive[p as usize] += 1;
                self.false_negative[t as usize] += 1;
            }
        }
        self.total += pred.data().len() as u64;
        Ok(())
    }
}

impl AddAssign<&ConfusionCounts> for ConfusionCounts {
    fn add_assign(&mut self, rhs: &ConfusionCounts) {
        assert_eq!(self.class_count(), rhs.class_count(), "merging counts of different tasks");
        for j in 0..self.class_count() {
            self.true_positive[j] += rhs.true_positive[j];
            self.false_positive[j] += rhs.false_positive[j];
            self.false_negative[j] += rhs.false_negative[j];
        }
        self.total += rhs.total;
    }
}

pub fn confusion_counts(pred: &ClassIndexMask, truth: &ClassIndexMask, task: &TaskSpec) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::new(task.class_count());
    c.accumulate(pred, truth)?;
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-class metrics; `None` marks a 0/0 ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub iou: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn class_metrics(counts: &ConfusionCounts, class: usize) -> ClassMetrics {
    let tp = counts.true_positive[class];
    let fp = counts.false_positive[class];
    let fn_ = counts.false_negative[class];
    ClassMetrics {
        iou: ratio(tp, tp + fp + fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    MeanIou,
    MeanAccuracy,
    PixelAccuracy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::MeanIou, MetricKind::MeanAccuracy, MetricKind::PixelAccuracy];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::MeanIou => "mIoU",
            MetricKind::MeanAccuracy => "mAcc",
            MetricKind::PixelAccuracy => "pAcc",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskMetrics {
    pub task: TaskId,
    pub classes: Vec<ClassMetrics>,
    pub mean_iou: f64,
    pub mean_accuracy: f64,
    pub pixel_accuracy: f64,
}

impl TaskMetrics {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::MeanIou => self.mean_iou,
            MetricKind::MeanAccuracy => self.mean_accuracy,
            MetricKind::PixelAccuracy => self.pixel_accuracy,
        }
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn task_metrics(counts: &ConfusionCounts, task: &TaskSpec) -> Result<TaskMetrics> {
    if counts.class_count() != task.class_count() {
        return Err(config_err!(
            "counts carry {} classes, the {} task has {}",
            counts.class_count(),
            task.id,
            task.class_count()
        ));
    }
    let classes: Vec<ClassMetrics> = (0..counts.class_count()).map(|j| class_metrics(counts, j)).collect();
    let mean_iou = mean_defined(classes.iter().map(|c| c.iou))
        .ok_or_else(|| data_err!("no class of the {} task is defined", task.id))?;
    let mean_accuracy = mean_defined(classes.iter().map(|c| c.recall))
        .ok_or_else(|| data_err!("no class of the {} task has ground-truth pixels", task.id))?;
    let pixel_accuracy = ratio(counts.true_positive.iter().sum(), counts.total)
        .ok_or_else(|| data_err!("no pixels counted for the {} task", task.id))?;
    Ok(TaskMetrics {
        task: task.id,
        classes,
        mean_iou,
        mean_accuracy,
        pixel_accuracy,
    })
}

/// Evaluation results for one model (one row of the comparison tables).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub label: String,
    pub element: Option<TaskMetrics>,
    pub defect: Option<TaskMetrics>,
    pub delta: Option<ModelDelta>,
}

impl MetricsReport {
    pub fn new(label: impl Into<String>) -> Self {
        MetricsReport {
            label: label.into(),
            element: None,
            defect: None,
            delta: None,
        }
    }

    pub fn task(&self, task: TaskId) -> Option<&TaskMetrics> {
        match task {
            TaskId::Element => self.element.as_ref(),
            TaskId::Defect => self.defect.as_ref(),
        }
    }

    pub fn set_task(&mut self, metrics: TaskMetrics) {
        match metrics.task {
            TaskId::Element => self.element = Some(metrics),
            TaskId::Defect => self.defect = Some(metrics),
        }
    }

    /// The six task-level values in table order, if both tasks are present.
    pub fn task_values(&self) -> Option<[f64; 6]> {
        let e = self.element.as_ref()?;
        let d = self.defect.as_ref()?;
        Some([
            e.mean_iou,
            e.mean_accuracy,
            e.pixel_accuracy,
            d.mean_iou,
            d.mean_accuracy,
            d.pixel_accuracy,
        ])
    }
}

/// Percent increases `delta_{i,l}` over a baseline and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDelta {
    pub increments: Vec<(TaskId, MetricKind, f64)>,
    pub mean: f64,
}

pub fn model_delta(mtl: &MetricsReport, baseline: &MetricsReport) -> Result<ModelDelta> {
    let mut increments = Vec::with_capacity(6);
    for task in TaskId::ALL {
        let m = mtl
            .task(task)
            .ok_or_else(|| data_err!("`{}` lacks {} metrics", mtl.label, task))?;
        let b = baseline
            .task(task)
            .ok_or_else(|| data_err!("baseline `{}` lacks {} metrics", baseline.label, task))?;
        for kind in MetricKind::ALL {
            let base = b.get(kind);
            if base == 0.0 {
                return Err(Error::Numeric(format!(
                    "baseline {task} {} is zero; percent increase undefined",
                    kind.name()
                )));
            }
            increments.push((task, kind, 100.0 * (m.get(kind) - base) / base));
        }
    }
    let mean = increments.iter().map(|(_, _, v)| v).sum::<f64>() / increments.len() as f64;
    Ok(ModelDelta { increments, mean })
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

pub const TASK_TABLE_HEADER: &str =
    "method,element_miou,element_macc,element_pacc,defect_miou,defect_macc,defect_pacc,delta";

/// Delimited task-level table; percentages with two decimals, blank cells for
/// missing tasks.
pub fn render_task_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(TASK_TABLE_HEADER);
    out.push('\n');
    for r in reports {
        let mut cells = vec![r.label.replace(',', ";")];
        for task in TaskId::ALL {
            for kind in MetricKind::ALL {
                cells.push(r.task(task).map(|m| pct(m.get(kind))).unwrap_or_default());
            }
        }
        cells.push(r.delta.as_ref().map(|d| format!("{:.2}", d.mean)).unwrap_or_default());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One parsed row of [`render_task_csv`]; values are percentages.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskTableRow {
    pub method: String,
    pub values: [Option<f64>; 6],
    pub delta: Option<f64>,
}

pub fn parse_task_csv(text: &str) -> Result<Vec<TaskTableRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TASK_TABLE_HEADER) {
        return Err(config_err!("metrics table must start with `{TASK_TABLE_HEADER}`"));
    }
    let cell = |s: &str, row: usize| -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|e| config_err!("metrics row {row}: `{s}`: {e}"))?;
        if !v.is_finite() {
            return Err(config_err!("metrics row {row}: non-finite value"));
        }
        Ok(Some(v))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(config_err!("metrics row {}: expected 8 fields, got {}", i + 1, f.len()));
            }
            let mut values = [None; 6];
            for (k, v) in values.iter_mut().enumerate() {
                *v = cell(f[k + 1], i + 1)?;
            }
            Ok(TaskTableRow {
                method: f[0].to_string(),
                values,
                delta: cell(f[7], i + 1)?,
            })
        })
        .collect()
}

/// Aligned task-level table: method rows, per-task mIoU/mAcc/pAcc columns and Δ.
pub fn render_task_table(reports: &[MetricsReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.label.chars().count())
        .max()
        .unwrap_or(0)
        .max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} | {:^26} | {:^26} | {:>7}",
        "",
        "Element segmentation",
        "Defect segmentation",
        ""
    );
    let _ = writeln!(
        out,
        "{:<width$} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>7}",
        "Method", "mIoU", "mAcc", "pAcc", "mIoU", "mAcc", "pAcc", "Δ"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 67));
    for r in reports {
        let mut line = format!("{:<width$} |", r.label);
        for task in TaskId::ALL {
            for kind in MetricKind::ALL {
                let v = r.task(task).map(|m| pct(m.get(kind))).unwrap_or_else(|| "-".into());
                let _ = write!(line, " {v:>8}");
            }
            line.push_str(" |");
        }
        let d = r.delta.as_ref().map(|d| format!("{:+.2}", d.mean)).unwrap_or_else(|| "-".into());
        let _ = write!(line, " {d:>7}");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Aligned per-class IoU table: class rows grouped by task, one column per report.
pub fn render_class_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<18}", "Class");
    for r in reports {
        let _ = write!(out, " {:>22}", r.label);
    }
    out.push('\n');
    for task in TaskId::ALL {
        let spec = task.spec();
        let _ = writeln!(out, "{}", if task == TaskId::Element { "Element" } else { "Defect" });
        for (j, name) in spec.classes.iter().enumerate() {
            let _ = write!(out, "  {name:<16}");
            for r in reports {
                let v = r
                    .task(task)
                    .and_then(|m| m.classes.get(j))
                    .and_then(|c| c.iou)
                    .map(pct)
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, " {v:>22}");
            }
            out.push('\n');
        }
    }
    out
}
