//! Per-element corrosion coverage, condition grading and visual exports.

mod overlay;
mod regions;
mod report;
mod viz;

pub use crate::dataset::argmax_mask;
pub use overlay::{render_overlay, state_color, DEFECT_PALETTE, ELEMENT_PALETTE};
pub use regions::{
    extract_regions, grade, grade_counts, grade_ratio, ConditionState, ElementRegion, FAIR_MAX, POOR_MAX,
};
pub use report::{
    assess_image, assess_masks, predict_masks, render_report, AssessConfig, ClassAggregate, ConditionReport,
    GradeSummary, GradedRegion,
};
pub use viz::{colorize_mask, rescale_channel, viz_features, viz_mask, GrayImage};
