use rand::Rng;

use crate::error::{config_err, Result};
use crate::model::layers::{ConvBnRelu, ConvBnReluCache};
use crate::model::ModelConfig;
use crate::nn::{resize_bilinear, resize_bilinear_backward, FeatureMap, Param, Parameterized, Real, Shape};

/// Shared image encoder: `input_channels x H x W` image to the embedding `f`.
pub trait Encoder<T: Real>: Parameterized<T> + Clone + Send + Sync {
    type Cache: Send;

    fn out_channels(&self) -> usize;

    /// Spatial size of the embedding.
    fn embedding_size(&self) -> (usize, usize);

    fn forward_train(&mut self, image: &FeatureMap<T>) -> Result<(FeatureMap<T>, Self::Cache)>;

    fn forward_eval(&self, image: &FeatureMap<T>) -> Result<FeatureMap<T>>;

    /// Accumulates parameter gradients; the image gradient is discarded.
    fn backward(&mut self, cache: &Self::Cache, grad: &FeatureMap<T>) -> Result<()>;

    /// Appends the on/off state of every kinked unit seen in the forward pass.
    fn relu_pattern(&self, _cache: &Self::Cache, _out: &mut Vec<bool>) {}
}

pub const STAGE_STRIDES: [usize; 4] = [1, 2, 2, 1];

/// Small convolutional stand-in for a high-resolution backbone.
///
/// Four 3x3 conv-BN-ReLU stages with strides 1, 2, 2, 1 give a x4 spatial
/// reduction. If the configured embedding size differs from that natural
/// size, a final bilinear resample enforces the contract.
#[derive(Clone, Debug)]
pub struct StandInEncoder<T> {
    pub stages: Vec<ConvBnRelu<T>>,
    input_channels: usize,
    input_size: (usize, usize),
    embedding_size: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct StandInCache<T> {
    stages: Vec<ConvBnReluCache<T>>,
    pre_resize: Option<Shape>,
}

impl<T: Real> StandInEncoder<T> {
    pub fn new(config: &ModelConfig) -> Self {
        let [a, b, c] = config.encoder_stage_channels;
        let widths = [config.input_channels, a, b, c, config.encoder_out_channels];
        let stages = STAGE_STRIDES
            .iter()
            .enumerate()
            .map(|(i, &stride)| ConvBnRelu::new(&format!("encoder.stage{i}"), widths[i], widths[i + 1], 3, stride))
            .collect();
        StandInEncoder {
            stages,
            input_channels: config.input_channels,
            input_size: config.input_size,
            embedding_size: config.embedding_size,
        }
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        for s in &mut self.stages {
            s.init(rng);
        }
    }

    fn check(&self, image: &FeatureMap<T>) -> Result<()> {
        let s = image.shape();
        if s.channels != self.input_channels || (s.height, s.width) != self.input_size {
            return Err(config_err!(
                "encoder configured for {}x{}x{} images, got {}x{}x{}",
                self.input_channels,
                self.input_size.0,
                self.input_size.1,
                s.channels,
                s.height,
                s.width
            ));
        }
        Ok(())
    }

    fn needs_resize(&self, x: &FeatureMap<T>) -> bool {
        (x.height(), x.width()) != self.embedding_size
    }
}

impl<T: Real> Encoder<T> for StandInEncoder<T> {
    type Cache = StandInCache<T>;

    fn out_channels(&self) -> usize {
        self.stages.last().map_or(0, |s| s.out_channels())
    }

    fn embedding_size(&self) -> (usize, usize) {
        self.embedding_size
    }

    fn forward_train(&mut self, image: &FeatureMap<T>) -> Result<(FeatureMap<T>, Self::Cache)> {
        self.check(image)?;
        let mut x = image.clone();
        let mut caches = Vec::with_capacity(self.stages.len());
        for stage in &mut self.stages {
            let (y, c) = stage.forward_train(&x)?;
            caches.push(c);
            x = y;
        }
        let pre_resize = self.needs_resize(&x).then(|| x.shape());
        if pre_resize.is_some() {
            x = resize_bilinear(&x, self.embedding_size.0, self.embedding_size.1)?;
        }
        Ok((
            x,
            StandInCache {
                stages: caches,
                pre_resize,
            },
        ))
    }

    fn forward_eval(&self, image: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        self.check(image)?;
        let mut x = image.clone();
        for stage in &self.stages {
            x = stage.forward_eval(&x)?;
        }
        if self.needs_resize(&x) {
            x = resize_bilinear(&x, self.embedding_size.0, self.embedding_size.1)?;
        }
        Ok(x)
    }

    fn backward(&mut self, cache: &Self::Cache, grad: &FeatureMap<T>) -> Result<()> {
        let mut g = match cache.pre_resize {
            Some(shape) => resize_bilinear_backward(grad, shape)?,
            None => grad.clone(),
        };
        for (stage, c) in self.stages.iter_mut().zip(&cache.stages).rev() {
            g = stage.backward(c, &g)?;
        }
        Ok(())
    }

    fn relu_pattern(&self, cache: &Self::Cache, out: &mut Vec<bool>) {
        for c in &cache.stages {
            c.relu_pattern(out);
        }
    }
}

impl<T> Parameterized<T> for StandInEncoder<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.stages.iter().flat_map(|s| s.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.stages.iter_mut().flat_map(|s| s.params_mut()).collect()
    }
}
