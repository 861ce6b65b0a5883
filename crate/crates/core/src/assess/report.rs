use std::fmt::Write as _;

use crate::assess::regions::{extract_regions, grade_counts, ConditionState, ElementRegion};
use crate::dataset::{format_id, ClassIndexMask, Sample};
use crate::error::{data_err, Result};
use crate::model::{AecifNet, Encoder, TaskId, BACKGROUND, CORROSION, ELEMENT_CLASSES};
use crate::nn::Real;
use crate::trainer::predict;

#[derive(Clone, Debug, PartialEq)]
pub struct AssessConfig {
    /// Components smaller than this are ignored.
    pub min_area: usize,
    /// Element classes to grade.
    pub classes: Vec<u8>,
}

impl AssessConfig {
    pub fn with_min_area(min_area: usize) -> Self {
        AssessConfig {
            min_area,
            classes: (0..BACKGROUND).collect(),
        }
    }

    /// 64-pixel minimum for full-size images.
    pub fn full() -> Self {
        Self::with_min_area(64)
    }

    /// 16-pixel minimum for small images.
    pub fn desk() -> Self {
        Self::with_min_area(16)
    }
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// A graded region. `id` is 1-based within its report.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedRegion {
    pub id: usize,
    pub region: ElementRegion,
    pub corroded: u64,
    pub ratio: f64,
    pub state: ConditionState,
}

impl GradedRegion {
    pub fn class_name(&self) -> &'static str {
        ELEMENT_CLASSES[self.region.class as usize]
    }
}

/// All pixels of one class pooled across its regions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassAggregate {
    pub class: u8,
    pub area: u64,
    pub corroded: u64,
    pub ratio: f64,
    pub state: ConditionState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub sample_id: u32,
    pub regions: Vec<GradedRegion>,
    pub classes: Vec<ClassAggregate>,
    /// Corrosion pixels on background, which cannot belong to any element.
    pub background_corrosion: u64,
}

/// Grades the element regions of a pair of masks.
pub fn assess_masks(
    sample_id: u32,
    element: &ClassIndexMask,
    defect: &ClassIndexMask,
    config: &AssessConfig,
) -> Result<ConditionReport> {
    if !element.same_size(defect) {
        return Err(data_err!(
            "element mask {}x{} vs defect mask {}x{}",
            element.height(),
            element.width(),
            defect.height(),
            defect.width()
        ));
    }
    let mut regions = Vec::new();
    for region in extract_regions(element, config.min_area) {
        if !config.classes.contains(&region.class) {
            continue;
        }
        let corroded = region.corroded(defect);
        let area = region.area();
        regions.push(GradedRegion {
            id: regions.len() + 1,
            state: grade_counts(corroded, area)?,
            ratio: corroded as f64 / area as f64,
            corroded,
            region,
        });
    }
    let mut classes = Vec::new();
    for &class in &config.classes {
        let (area, corroded) = regions
            .iter()
            .filter(|r| r.region.class == class)
            .fold((0, 0), |(a, c), r| (a + r.region.area(), c + r.corroded));
        if area > 0 {
            classes.push(ClassAggregate {
                class,
                area,
                corroded,
                ratio: corroded as f64 / area as f64,
                state: grade_counts(corroded, area)?,
            });
        }
    }
    let background_corrosion = element
        .data()
        .iter()
        .zip(defect.data())
        .filter(|&(&e, &d)| e == BACKGROUND && d == CORROSION)
        .count() as u64;
    Ok(ConditionReport {
        sample_id,
        regions,
        classes,
        background_corrosion,
    })
}

/// Predicted element and defect masks for one sample.
pub fn predict_masks<T: Real, E: Encoder<T>>(
    sample: &Sample,
    model: &AecifNet<T, E>,
) -> Result<(ClassIndexMask, ClassIndexMask)> {
    let preds = predict(model, &sample.image.cast())?;
    let take = |task: TaskId| {
        preds
            .iter()
            .find(|(t, _)| *t == task)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| data_err!("model does not predict the {task} task"))
    };
    Ok((take(TaskId::Element)?, take(TaskId::Defect)?))
}

/// Predicts both masks and grades the predicted element regions.
pub fn assess_image<T: Real, E: Encoder<T>>(
    sample: &Sample,
    model: &AecifNet<T, E>,
    config: &AssessConfig,
) -> Result<(ConditionReport, ClassIndexMask, ClassIndexMask)> {
    let (element, defect) = predict_masks(sample, model)?;
    let report = assess_masks(sample.id, &element, &defect, config)?;
    Ok((report, element, defect))
}

pub fn render_report(report: &ConditionReport) -> String {
    let mut out = format!("sample {}\n", format_id(report.sample_id));
    let _ = writeln!(
        out,
        "{:>6}  {:<14} {:>8} {:>8} {:>7}  grade",
        "region", "class", "area", "corroded", "ratio"
    );
    for r in &report.regions {
        let _ = writeln!(
            out,
            "{:>6}  {:<14} {:>8} {:>8} {:>7.4}  {}",
            r.id,
            r.class_name(),
            r.region.area(),
            r.corroded,
            r.ratio,
            r.state
        );
    }
    if report.regions.is_empty() {
        out.push_str("no element regions\n");
    }
    out.push_str("class totals\n");
    for c in &report.classes {
        let _ = writeln!(
            out,
            "{:>6}  {:<14} {:>8} {:>8} {:>7.4}  {}",
            "-",
            ELEMENT_CLASSES[c.class as usize],
            c.area,
            c.corroded,
            c.ratio,
            c.state
        );
    }
    let _ = writeln!(out, "corrosion pixels on background: {}", report.background_corrosion);
    out
}

/// Region grade counts per element class over many reports.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GradeSummary {
    /// `counts[class][state]`.
    pub counts: [[u64; 4]; 6],
    pub background_corrosion: u64,
}

impl GradeSummary {
    pub fn add(&mut self, report: &ConditionReport) {
        for r in &report.regions {
            self.counts[r.region.class as usize][r.state.index()] += 1;
        }
        self.background_corrosion += report.background_corrosion;
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<14}", "class");
        for s in ConditionState::ALL {
            let _ = write!(out, " {:>7}", s.name());
        }
        out.push('\n');
        for (class, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{:<14}", ELEMENT_CLASSES[class]);
            for v in row {
                let _ = write!(out, " {v:>7}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "corrosion pixels on background: {}", self.background_corrosion);
        out
    }
}
