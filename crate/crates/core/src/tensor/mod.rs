//! Dense real/complex tensors with a reverse-mode differentiation tape.
//!
//! A [`Tensor`] is an immutable, reference-counted buffer plus an optional
//! record on a [`Tape`]. Operations in [`ops`] produce recorded outputs
//! whenever any input is recorded; otherwise they produce constants and
//! nothing is written to a tape.
//!
//! Complex tensors store interleaved `(re, im)` pairs. Gradients use the
//! same layout: the gradient of a real loss `L` with respect to a complex
//! element `z = a + ib` is stored as `(dL/da, dL/db)`. Under this
//! convention the adjoint rule of any complex-linear map `A` is `A^H`.

pub(crate) mod fft;
pub mod gradcheck;
pub mod ops;
mod tape;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub(crate) use tape::record_op;
pub use tape::{backward, Gradients, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DType {
    Real,
    Complex,
}

impl DType {
    /// Number of `f64` slots per element.
    pub fn width(self) -> usize {
        match self {
            DType::Real => 1,
            DType::Complex => 2,
        }
    }
}

#[derive(Clone)]
pub(crate) struct Record {
    pub(crate) tape: Tape,
    pub(crate) id: usize,
}

#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    dtype: DType,
    data: Arc<Vec<f64>>,
    record: Option<Record>,
}

impl Tensor {
    fn build(shape: Vec<usize>, dtype: DType, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel * dtype.width() != data.len() {
            return Err(Error::invalid(
                "tensor",
                format!(
                    "shape {:?} ({:?}) needs {} values, got {}",
                    shape,
                    dtype,
                    numel * dtype.width(),
                    data.len()
                ),
            ));
        }
        Ok(Tensor {
            shape,
            dtype,
            data: Arc::new(data),
            record: None,
        })
    }

    pub fn real(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::build(shape.to_vec(), DType::Real, data)
    }

    /// Complex tensor from interleaved `(re, im)` values.
    pub fn complex(shape: &[usize], interleaved: Vec<f64>) -> Result<Self> {
        Self::build(shape.to_vec(), DType::Complex, interleaved)
    }

    pub fn complex_from_parts(shape: &[usize], re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::invalid(
                "tensor",
                "real and imaginary parts differ in length",
            ));
        }
        let data = re.iter().zip(im).flat_map(|(&a, &b)| [a, b]).collect();
        Self::complex(shape, data)
    }

    pub fn zeros(shape: &[usize], dtype: DType) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            dtype,
            data: Arc::new(vec![0.0; numel * dtype.width()]),
            record: None,
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            dtype: DType::Real,
            data: Arc::new(vec![value; numel]),
            record: None,
        }
    }

    /// Real scalar of shape `[]`.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            dtype: DType::Real,
            data: Arc::new(vec![value]),
            record: None,
        }
    }

    /// A constant of the same shape and dtype carrying new values.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Tensor {
            shape: self.shape.clone(),
            dtype: self.dtype,
            data: Arc::new(data),
            record: None,
        }
    }

    /// Checked [`Tensor::with_data`]: a constant shaped like `self` holding
    /// `data` (interleaved when complex).
    pub fn with_values(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::invalid(
                "with_values",
                format!("expected {} values, got {}", self.data.len(), data.len()),
            ));
        }
        Ok(self.with_data(data))
    }

    pub(crate) fn from_parts(shape: Vec<usize>, dtype: DType, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>() * dtype.width(), data.len());
        Tensor {
            shape,
            dtype,
            data: Arc::new(data),
            record: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn is_complex(&self) -> bool {
        self.dtype == DType::Complex
    }

    /// Number of elements (a complex element counts once).
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Raw storage; complex tensors are interleaved.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_arc(&self) -> &Arc<Vec<f64>> {
        &self.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.as_ref().clone()
    }

    /// Value of a single-element real tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 || self.is_complex() {
            return Err(Error::invalid(
                "item",
                format!("expected a real scalar, got {:?} {:?}", self.shape, self.dtype),
            ));
        }
        Ok(self.data[0])
    }

    pub fn is_recorded(&self) -> bool {
        self.record.is_some()
    }

    pub(crate) fn record(&self) -> Option<&Record> {
        self.record.as_ref()
    }

    pub(crate) fn with_record(mut self, record: Record) -> Self {
        self.record = Some(record);
        self
    }

    /// Same values, no tape record.
    pub fn detach(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            dtype: self.dtype,
            data: Arc::clone(&self.data),
            record: None,
        }
    }

    /// Squared Euclidean norm over all real components.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Real inner product `Re<self, other>` over interleaved storage.
    pub fn dot_re(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape || self.dtype != other.dtype {
            return Err(Error::shape("dot", &self.shape, &other.shape));
        }
        Ok(self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).sum())
    }

    /// Complex inner product `<self, other> = sum conj(self) * other`.
    pub fn dot_complex(&self, other: &Tensor) -> Result<(f64, f64)> {
        if self.shape != other.shape || !self.is_complex() || !other.is_complex() {
            return Err(Error::shape("dot_complex", &self.shape, &other.shape));
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (a, b) in self.data.chunks_exact(2).zip(other.data.chunks_exact(2)) {
            re += a[0] * b[0] + a[1] * b[1];
            im += a[0] * b[1] - a[1] * b[0];
        }
        Ok((re, im))
    }

    /// Per-element magnitudes (absolute values for real tensors).
    pub fn abs_values(&self) -> Vec<f64> {
        match self.dtype {
            DType::Real => self.data.iter().map(|v| v.abs()).collect(),
            DType::Complex => self.data.chunks_exact(2).map(|c| c[0].hypot(c[1])).collect(),
        }
    }

    pub(crate) fn expect_dtype(&self, op: &'static str, dtype: DType) -> Result<()> {
        if self.dtype != dtype {
            return Err(Error::invalid(
                op,
                format!("expected {:?} input, got {:?}", dtype, self.dtype),
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("dtype", &self.dtype)
            .field("recorded", &self.record.is_some())
            .finish()
    }
}

pub(crate) fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}
