use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::Real;

/// A named parameter array with its accumulated gradient.
///
/// Non-trainable arrays (batch-norm running moments) live here too so that a
/// checkpoint is simply the ordered list of every `Param` in a model.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub trainable: bool,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, shape: &[usize], fill: T, trainable: bool) -> Self {
        let len = shape.iter().product();
        Param {
            name: name.into(),
            shape: shape.to_vec(),
            value: vec![fill; len],
            grad: vec![T::zero(); len],
            trainable,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Fan-in scaled normal initialisation, `N(0, 2 / fan_in)`.
    pub fn init_kaiming(&mut self, fan_in: usize, rng: &mut impl Rng) {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        for v in &mut self.value {
            let z: f64 = rng.sample(StandardNormal);
            *v = T::lit(z * std);
        }
    }

    pub fn cast<U: Real>(&self) -> Param<U> {
        Param {
            name: self.name.clone(),
            shape: self.shape.clone(),
            value: self.value.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            grad: self.grad.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            trainable: self.trainable,
        }
    }
}

/// Anything that owns parameter arrays.
pub trait Parameterized<T> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;
}

/// Total number of trainable scalars across `params`.
pub fn count_parameters<'a, T: 'a>(params: impl IntoIterator<Item = &'a Param<T>>) -> usize {
    params
        .into_iter()
        .filter(|p| p.trainable)
        .map(|p| p.value.len())
        .sum()
}

/// Trainable parameter count over a list of layers.
pub fn count_layer_parameters<T>(layers: &[&dyn Parameterized<T>]) -> usize {
    layers
        .iter()
        .map(|layer| count_parameters(layer.params()))
        .sum()
}

pub fn zero_grads<T: Real>(module: &mut dyn Parameterized<T>) {
    for p in module.params_mut() {
        p.zero_grad();
    }
}
