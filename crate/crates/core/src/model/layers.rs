//! Building blocks of the network: conv-BN-ReLU, attention gate and
//! segmentation head.

use rand::Rng;

use crate::error::{config_err, Result};
use crate::nn::{
    bilinear_upsample, bilinear_upsample_backward, channel_softmax, channel_softmax_backward, relu,
    relu_backward, sigmoid, sigmoid_backward, BatchNorm2d, BatchNormCache, Conv2d, FeatureMap,
    Param, Parameterized, Real, Shape,
};

/// `ReLU(BN(conv(x)))`. Used for encoder stages and the task relearning subnets.
#[derive(Clone, Debug)]
pub struct ConvBnRelu<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
}

#[derive(Clone, Debug)]
pub struct ConvBnReluCache<T> {
    input: FeatureMap<T>,
    bn: BatchNormCache<T>,
    output: FeatureMap<T>,
}

impl<T: Real> ConvBnReluCache<T> {
    /// Appends the on/off state of every ReLU unit.
    pub fn relu_pattern(&self, out: &mut Vec<bool>) {
        out.extend(self.output.data().iter().map(|&v| v > T::zero()));
    }
}

impl<T: Real> ConvBnRelu<T> {
    pub fn new(prefix: &str, in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        ConvBnRelu {
            conv: Conv2d::new(
                &format!("{prefix}.conv"),
                in_channels,
                out_channels,
                kernel,
                stride,
                kernel / 2,
                true,
            ),
            bn: BatchNorm2d::new(&format!("{prefix}.bn"), out_channels),
        }
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        self.conv.init_kaiming(rng);
    }

    pub fn out_channels(&self) -> usize {
        self.conv.out_channels()
    }

    pub fn forward_train(&mut self, input: &FeatureMap<T>) -> Result<(FeatureMap<T>, ConvBnReluCache<T>)> {
        let z = self.conv.forward(input)?;
        let (b, bn) = self.bn.forward_train(&z)?;
        let output = relu(&b);
        Ok((
            output.clone(),
            ConvBnReluCache {
                input: input.clone(),
                bn,
                output,
            },
        ))
    }

    pub fn forward_eval(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let z = self.conv.forward(input)?;
        Ok(relu(&self.bn.forward_eval(&z)?))
    }

    pub fn backward(&mut self, cache: &ConvBnReluCache<T>, grad_out: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let g = relu_backward(&cache.output, grad_out);
        let g = self.bn.backward(&cache.bn, &g)?;
        self.conv.backward(&cache.input, &g)
    }
}

impl<T> Parameterized<T> for ConvBnRelu<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.conv.params();
        p.extend(self.bn.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.conv.params_mut();
        p.extend(self.bn.params_mut());
        p
    }
}

/// Spatial attention gate, `sigmoid(conv3x3(f_i))`.
#[derive(Clone, Debug)]
pub struct AttentionModule<T> {
    pub conv: Conv2d<T>,
}

impl<T: Real> AttentionModule<T> {
    pub fn new(prefix: &str, channels: usize) -> Self {
        AttentionModule {
            conv: Conv2d::new(&format!("{prefix}.conv"), channels, channels, 3, 1, 1, true),
        }
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        self.conv.init_kaiming(rng);
    }

    pub fn forward(&self, task_features: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        Ok(sigmoid(&self.conv.forward(task_features)?))
    }

    /// Returns the gradient with respect to the task features.
    pub fn backward(&mut self, input: &FeatureMap<T>, mask: &FeatureMap<T>, grad_mask: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let g = sigmoid_backward(mask, grad_mask);
        self.conv.backward(input, &g)
    }
}

impl<T> Parameterized<T> for AttentionModule<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.conv.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.conv.params_mut()
    }
}

/// Reconstruction decoder: 1x1 conv, BN, ReLU, 1x1 conv to class logits,
/// bilinear upsampling to the input size and a per-pixel channel softmax.
#[derive(Clone, Debug)]
pub struct SegmentationHead<T> {
    pub conv1: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
    pub conv2: Conv2d<T>,
}

#[derive(Clone, Debug)]
pub struct HeadCache<T> {
    input: FeatureMap<T>,
    bn: BatchNormCache<T>,
    hidden: FeatureMap<T>,
    logits_shape: Shape,
    probs: FeatureMap<T>,
}

impl<T: Real> HeadCache<T> {
    pub fn relu_pattern(&self, out: &mut Vec<bool>) {
        out.extend(self.hidden.data().iter().map(|&v| v > T::zero()));
    }
}

impl<T: Real> SegmentationHead<T> {
    pub fn new(prefix: &str, in_channels: usize, hidden: usize, classes: usize) -> Self {
        SegmentationHead {
            conv1: Conv2d::new(&format!("{prefix}.conv1"), in_channels, hidden, 1, 1, 0, true),
            bn: BatchNorm2d::new(&format!("{prefix}.bn"), hidden),
            conv2: Conv2d::new(&format!("{prefix}.conv2"), hidden, classes, 1, 1, 0, true),
        }
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        self.conv1.init_kaiming(rng);
        self.conv2.init_kaiming(rng);
    }

    pub fn class_count(&self) -> usize {
        self.conv2.out_channels()
    }

    fn check_classes(&self, expected: usize) -> Result<()> {
        if self.class_count() != expected {
            return Err(config_err!(
                "segmentation head emits {} classes, task has {expected}",
                self.class_count()
            ));
        }
        Ok(())
    }

    /// Low-resolution class logits (before upsampling), eval mode.
    pub fn logits_eval(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let z = self.conv1.forward(input)?;
        let h = relu(&self.bn.forward_eval(&z)?);
        self.conv2.forward(&h)
    }

    pub fn forward_eval(&self, input: &FeatureMap<T>, classes: usize, out_size: (usize, usize)) -> Result<FeatureMap<T>> {
        self.check_classes(classes)?;
        let logits = self.logits_eval(input)?;
        channel_softmax(&bilinear_upsample(&logits, out_size.0, out_size.1)?)
    }

    pub fn forward_train(
        &mut self,
        input: &FeatureMap<T>,
        classes: usize,
        out_size: (usize, usize),
    ) -> Result<(FeatureMap<T>, HeadCache<T>)> {
        self.check_classes(classes)?;
        let z = self.conv1.forward(input)?;
        let (b, bn) = self.bn.forward_train(&z)?;
        let hidden = relu(&b);
        let logits = self.conv2.forward(&hidden)?;
        let probs = channel_softmax(&bilinear_upsample(&logits, out_size.0, out_size.1)?)?;
        Ok((
            probs.clone(),
            HeadCache {
                input: input.clone(),
                bn,
                hidden,
                logits_shape: logits.shape(),
                probs,
            },
        ))
    }

    pub fn backward(&mut self, cache: &HeadCache<T>, grad_probs: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let g = channel_softmax_backward(&cache.probs, grad_probs)?;
        let g = bilinear_upsample_backward(&g, cache.logits_shape)?;
        let g = self.conv2.backward(&cache.hidden, &g)?;
        let g = relu_backward(&cache.hidden, &g);
        let g = self.bn.backward(&cache.bn, &g)?;
        self.conv1.backward(&cache.input, &g)
    }
}

impl<T> Parameterized<T> for SegmentationHead<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.conv1.params();
        p.extend(self.bn.params());
        p.extend(self.conv2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.conv1.params_mut();
        p.extend(self.bn.params_mut());
        p.extend(self.conv2.params_mut());
        p
    }
}
