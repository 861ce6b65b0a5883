use crate::assess::regions::ConditionState;
use crate::assess::report::ConditionReport;
use crate::dataset::{ClassIndexMask, Sample};
use crate::dataset::io::quantize;
use crate::model::{BACKGROUND, CORROSION};

/// Display colors per element class.
pub const ELEMENT_PALETTE: [[u8; 3]; 7] = [
    [230, 25, 75],
    [255, 225, 25],
    [128, 128, 128],
    [0, 130, 200],
    [60, 180, 75],
    [245, 130, 48],
    [0, 0, 0],
];
pub const DEFECT_PALETTE: [[u8; 3]; 2] = [[200, 30, 30], [0, 0, 0]];
const HATCH: [u8; 3] = [255, 0, 0];

pub fn state_color(state: ConditionState) -> [u8; 3] {
    match state {
        ConditionState::Good => [40, 200, 40],
        ConditionState::Fair => [240, 220, 30],
        ConditionState::Poor => [250, 130, 20],
        ConditionState::Severe => [220, 20, 20],
    }
}

// 3x5 glyphs, one row per byte, bit 2 = left column.
fn glyph(state: ConditionState) -> [u8; 5] {
    match state {
        ConditionState::Good => [0b111, 0b100, 0b101, 0b101, 0b111],
        ConditionState::Fair => [0b111, 0b100, 0b110, 0b100, 0b100],
        ConditionState::Poor => [0b110, 0b101, 0b110, 0b100, 0b100],
        ConditionState::Severe => [0b111, 0b100, 0b111, 0b001, 0b111],
    }
}

/// Packed RGB: image blended with element colors, corroded pixels hatched,
/// and a grade letter on a grade-colored tag at each region's corner.
pub fn render_overlay(
    sample: &Sample,
    element: &ClassIndexMask,
    defect: &ClassIndexMask,
    report: &ConditionReport,
) -> Vec<u8> {
    let (h, w) = (sample.height(), sample.width());
    let mut rgb = vec![0u8; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let class = element.data()[i];
            let px: [u8; 3] = std::array::from_fn(|c| quantize(sample.image.get(0, c, y, x)));
            let out: [u8; 3] = if defect.data()[i] == CORROSION && (x + y) % 3 == 0 {
                HATCH
            } else if class == BACKGROUND {
                px
            } else {
                let tint = ELEMENT_PALETTE[class as usize];
                std::array::from_fn(|c| ((px[c] as u16 + tint[c] as u16) / 2) as u8)
            };
            rgb[i * 3..i * 3 + 3].copy_from_slice(&out);
        }
    }
    for r in &report.regions {
        let (y0, x0, _, _) = r.region.bbox;
        let color = state_color(r.state);
        let rows = glyph(r.state);
        for dy in 0..7 {
            for dx in 0..5 {
                let (y, x) = (y0 + dy, x0 + dx);
                if y >= h || x >= w {
                    continue;
                }
                let on = (1..6).contains(&dy)
                    && (1..4).contains(&dx)
                    && rows[dy - 1] & (0b100 >> (dx - 1)) != 0;
                let v = if on { [0, 0, 0] } else { color };
                rgb[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&v);
            }
        }
    }
    rgb
}
