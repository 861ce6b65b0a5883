use crate::error::{shape_err, Result};
use crate::nn::Real;

/// Dimensions of a batched activation tensor, `batch x channels x height x width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Shape {
            batch,
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    pub const fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

/// Dense row-major activation tensor.
///
/// A single feature map is a tensor with `batch == 1`; primitives accept any
/// batch size so batch-norm statistics can span several samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn zeros(shape: Shape) -> Self {
        FeatureMap {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        FeatureMap {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(shape_err!(
                "buffer of {} values does not match shape {shape}",
                data.len()
            ));
        }
        Ok(FeatureMap { shape, data })
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` at every position.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        FeatureMap { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape.batch
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let s = self.shape;
        ((n * s.channels + c) * s.height + y) * s.width + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: T) {
        let i = self.index(n, c, y, x);
        self.data[i] = value;
    }

    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.channels + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let p = self.shape.plane();
        let start = (n * self.shape.channels + c) * p;
        &mut self.data[start..start + p]
    }

    /// All channels of sample `n` as one contiguous slice.
    pub fn sample(&self, n: usize) -> &[T] {
        let len = self.shape.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [T] {
        let len = self.shape.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    /// Copies sample `n` out as a batch-1 tensor.
    pub fn select(&self, n: usize) -> FeatureMap<T> {
        let shape = Shape {
            batch: 1,
            ..self.shape
        };
        FeatureMap {
            shape,
            data: self.sample(n).to_vec(),
        }
    }

    /// Concatenates tensors along the batch axis.
    pub fn stack(parts: &[FeatureMap<T>]) -> Result<FeatureMap<T>> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err!("cannot stack an empty list"))?;
        let mut shape = first.shape;
        let mut data = Vec::new();
        shape.batch = 0;
        for part in parts {
            let s = part.shape;
            if (s.channels, s.height, s.width) != (shape.channels, shape.height, shape.width) {
                return Err(shape_err!("cannot stack {s} onto {shape}"));
            }
            shape.batch += s.batch;
            data.extend_from_slice(&part.data);
        }
        Ok(FeatureMap { shape, data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> FeatureMap<T> {
        FeatureMap {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> FeatureMap<U> {
        FeatureMap {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &FeatureMap<T>, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err!("{what}: {} vs {}", self.shape, other.shape));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &FeatureMap<T>) -> Result<()> {
        self.ensure_same_shape(other, "add")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_max(&self) -> Option<(T, T)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }
}
