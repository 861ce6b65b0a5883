use std::fmt;

use crate::dataset::ClassIndexMask;
use crate::error::{Error, Result};
use crate::model::{BACKGROUND, CORROSION};

/// Condition states in increasing order of severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionState {
    Good,
    Fair,
    Poor,
    Severe,
}

impl ConditionState {
    pub const ALL: [ConditionState; 4] = [
        ConditionState::Good,
        ConditionState::Fair,
        ConditionState::Poor,
        ConditionState::Severe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionState::Good => "Good",
            ConditionState::Fair => "Fair",
            ConditionState::Poor => "Poor",
            ConditionState::Severe => "Severe",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ConditionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Upper coverage bounds (inclusive) of Fair and Poor.
pub const FAIR_MAX: f64 = 0.25;
pub const POOR_MAX: f64 = 0.50;

/// `0` is Good, `(0, 0.25]` Fair, `(0.25, 0.5]` Poor, above that Severe.
pub fn grade_ratio(ratio: f64) -> ConditionState {
    if ratio <= 0.0 {
        ConditionState::Good
    } else if ratio <= FAIR_MAX {
        ConditionState::Fair
    } else if ratio <= POOR_MAX {
        ConditionState::Poor
    } else {
        ConditionState::Severe
    }
}

/// Grade from exact pixel counts; compares `4 * corroded` against `area`
/// and `2 * corroded` against `area` so boundary cases are decided without
/// rounding.
pub fn grade_counts(corroded: u64, area: u64) -> Result<ConditionState> {
    if area == 0 {
        return Err(Error::Precondition("cannot grade a region with zero area".into()));
    }
    if corroded > area {
        return Err(Error::Precondition(format!(
            "corroded count {corroded} exceeds area {area}"
        )));
    }
    Ok(if corroded == 0 {
        ConditionState::Good
    } else if 4 * corroded <= area {
        ConditionState::Fair
    } else if 2 * corroded <= area {
        ConditionState::Poor
    } else {
        ConditionState::Severe
    })
}

/// One 4-connected component of a single element class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElementRegion {
    pub class: u8,
    /// Flat row-major pixel indices, ascending.
    pub pixels: Vec<usize>,
    /// `(y0, x0, y1, x1)`, half-open.
    pub bbox: (usize, usize, usize, usize),
}

impl ElementRegion {
    pub fn area(&self) -> u64 {
        self.pixels.len() as u64
    }

    pub fn corroded(&self, defect: &ClassIndexMask) -> u64 {
        self.pixels
            .iter()
            .filter(|&&i| defect.data()[i] == CORROSION)
            .count() as u64
    }
}

/// 4-connected components of every non-background class, in row-major order
/// of their first pixel; components smaller than `min_area` are dropped.
pub fn extract_regions(element: &ClassIndexMask, min_area: usize) -> Vec<ElementRegion> {
    let (h, w) = (element.height(), element.width());
    let data = element.data();
    let mut seen = vec![false; h * w];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if seen[start] || data[start] == BACKGROUND {
            continue;
        }
        let class = data[start];
        let mut pixels = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (y, x) = (i / w, i % w);
            let mut visit = |j: usize| {
                if !seen[j] && data[j] == class {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
        }
        if pixels.len() < min_area.max(1) {
            continue;
        }
        pixels.sort_unstable();
        let mut bbox = (usize::MAX, usize::MAX, 0, 0);
        for &i in &pixels {
            let (y, x) = (i / w, i % w);
            bbox.0 = bbox.0.min(y);
            bbox.1 = bbox.1.min(x);
            bbox.2 = bbox.2.max(y + 1);
            bbox.3 = bbox.3.max(x + 1);
        }
        regions.push(ElementRegion { class, pixels, bbox });
    }
    regions
}

/// Condition of `region` given the corrosion mask.
pub fn grade(region: &ElementRegion, defect: &ClassIndexMask) -> Result<ConditionState> {
    if region.pixels.last().is_some_and(|&i| i >= defect.data().len()) {
        return Err(Error::Precondition("region lies outside the defect mask".into()));
    }
    grade_counts(region.corroded(defect), region.area())
}
