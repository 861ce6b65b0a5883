use crate::dataset::ClassIndexMask;
use crate::error::{data_err, Result};
use crate::model::TaskSpec;
use crate::nn::{FeatureMap, Shape};

/// An RGB image with its element and defect annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: u32,
    /// `1 x 3 x H x W`, values in `[0, 1]`.
    pub image: FeatureMap<f32>,
    pub element_mask: ClassIndexMask,
    pub defect_mask: ClassIndexMask,
}

impl Sample {
    pub fn new(
        id: u32,
        image: FeatureMap<f32>,
        element_mask: ClassIndexMask,
        defect_mask: ClassIndexMask,
    ) -> Result<Self> {
        let s = image.shape();
        if s.batch != 1 || s.channels != 3 {
            return Err(data_err!("sample {}: image must be 1x3xHxW, got {s}", format_id(id)));
        }
        for (name, m) in [("element", &element_mask), ("defect", &defect_mask)] {
            if (m.height(), m.width()) != (s.height, s.width) {
                return Err(data_err!(
                    "sample {}: {name} mask {}x{} does not match image {}x{}",
                    format_id(id),
                    m.height(),
                    m.width(),
                    s.height,
                    s.width
                ));
            }
        }
        element_mask
            .validate(TaskSpec::element().class_count())
            .map_err(|e| data_err!("sample {} element mask: {e}", format_id(id)))?;
        defect_mask
            .validate(TaskSpec::defect().class_count())
            .map_err(|e| data_err!("sample {} defect mask: {e}", format_id(id)))?;
        Ok(Sample {
            id,
            image,
            element_mask,
            defect_mask,
        })
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn image_shape(&self) -> Shape {
        self.image.shape()
    }
}

pub const ID_WIDTH: usize = 5;

/// Zero-padded decimal sample id.
pub fn format_id(id: u32) -> String {
    format!("{id:0width$}", width = ID_WIDTH)
}

pub fn parse_id(raw: &str) -> Result<u32> {
    if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(data_err!("sample id `{raw}` is not a decimal string"));
    }
    raw.parse().map_err(|e| data_err!("sample id `{raw}`: {e}"))
}
