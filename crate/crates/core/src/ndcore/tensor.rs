use std::fmt;

use crate::error::{Error, Result};
use crate::par;

/// Dense row-major array of `f64` with shape metadata.
///
/// A tensor with an empty shape is a scalar; it broadcasts against any other
/// tensor in the elementwise operations. No other broadcasting exists.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape, self.data)
    }
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericOverflow { op })
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) || expected != data.len() {
            return Err(Error::InvalidShape {
                shape,
                len: data.len(),
            });
        }
        check_finite("new", &data)?;
        Ok(Tensor { shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Stacks equal-length rows into a `[rows, cols]` matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("from_rows: no rows"));
        };
        let cols = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape("from_rows", &[cols], &[r.len()]));
            }
            data.extend_from_slice(r);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access for in-place parameter updates. Callers keep values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::NonScalarLoss(self.shape.clone()))
        }
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[1..].iter().product(),
        }
    }

    /// Row `i` of a matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::InvalidShape {
                shape,
                len: self.data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data: self.data,
        })
    }

    fn require_matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        if self.shape.len() == 2 {
            Ok((self.shape[0], self.shape[1]))
        } else {
            Err(Error::shape(op, &self.shape, &[0, 0]))
        }
    }

    fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (shape, data): (Vec<usize>, Vec<f64>) = if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect();
            (self.shape.clone(), data)
        } else if other.is_scalar() {
            let b = other.data[0];
            (
                self.shape.clone(),
                self.data.iter().map(|&a| f(a, b)).collect(),
            )
        } else if self.is_scalar() {
            let a = self.data[0];
            (
                other.shape.clone(),
                other.data.iter().map(|&b| f(a, b)).collect(),
            )
        } else {
            return Err(Error::shape(op, &self.shape, &other.shape));
        };
        check_finite(op, &data)?;
        Ok(Tensor { shape, data })
    }

    fn map(&self, op: &'static str, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data.iter().map(|&a| f(a)).collect();
        check_finite(op, &data)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Result<Tensor> {
        self.map("scale", |a| a * k)
    }

    pub fn exp(&self) -> Result<Tensor> {
        self.map("exp", f64::exp)
    }

    pub fn log(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data.iter().find(|&&v| v <= 0.0) {
            return Err(Error::OpDomain {
                op: "log",
                value: bad,
            });
        }
        self.map("log", f64::ln)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        self.map("tanh", f64::tanh)
    }

    pub fn relu(&self) -> Result<Tensor> {
        self.map("relu", |a| if a > 0.0 { a } else { 0.0 })
    }

    pub fn neg(&self) -> Result<Tensor> {
        self.map("neg", |a| -a)
    }

    pub fn reciprocal(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data.iter().find(|&&v| v == 0.0) {
            return Err(Error::OpDomain {
                op: "reciprocal",
                value: bad,
            });
        }
        self.map("reciprocal", |a| 1.0 / a)
    }

    pub fn abs(&self) -> Result<Tensor> {
        self.map("abs", f64::abs)
    }

    /// Sum of all elements, accumulated left to right.
    pub fn sum(&self) -> Result<Tensor> {
        let mut acc = 0.0;
        for &v in &self.data {
            acc += v;
        }
        check_finite("sum", &[acc])?;
        Ok(Tensor::scalar(acc))
    }

    /// Per-row sums of a matrix as a `[rows, 1]` column, each accumulated left to right.
    pub fn row_sums(&self) -> Result<Tensor> {
        let (r, c) = self.require_matrix("row_sums")?;
        let mut out = Vec::with_capacity(r);
        for i in 0..r {
            let mut acc = 0.0;
            for &v in &self.data[i * c..(i + 1) * c] {
                acc += v;
            }
            out.push(acc);
        }
        check_finite("row_sums", &out)?;
        Ok(Tensor {
            shape: vec![r, 1],
            data: out,
        })
    }

    /// Matrix product. A 1-D right operand is treated as a column vector and
    /// the result is 1-D. Each output entry accumulates in increasing inner index.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.require_matrix("matmul")?;
        let (k2, n, vector_rhs) = match other.shape.len() {
            1 => (other.shape[0], 1, true),
            2 => (other.shape[0], other.shape[1], false),
            _ => return Err(Error::shape("matmul", &self.shape, &other.shape)),
        };
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![0.0; m * n];
        let a = &self.data;
        let b = &other.data;
        par::for_each_row(&mut out, n, m * k * n, |i, row| {
            let a_row = &a[i * k..(i + 1) * k];
            for (kk, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &b[kk * n..(kk + 1) * n];
                for (o, &bkj) in row.iter_mut().zip(b_row) {
                    *o += aik * bkj;
                }
            }
        });
        check_finite("matmul", &out)?;
        let shape = if vector_rhs { vec![m] } else { vec![m, n] };
        Ok(Tensor { shape, data: out })
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.require_matrix("transpose")?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Tensor {
            shape: vec![c, r],
            data: out,
        })
    }

    /// Columns `idx` of a matrix, in the given order.
    pub fn gather_cols(&self, idx: &[usize]) -> Result<Tensor> {
        let (r, c) = self.require_matrix("gather_cols")?;
        if idx.is_empty() || idx.iter().any(|&j| j >= c) {
            return Err(Error::shape("gather_cols", &self.shape, &[idx.len()]));
        }
        let mut out = Vec::with_capacity(r * idx.len());
        for i in 0..r {
            let row = &self.data[i * c..(i + 1) * c];
            out.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(Tensor {
            shape: vec![r, idx.len()],
            data: out,
        })
    }

    /// Inverse of [`gather_cols`](Self::gather_cols): places column `k` of
    /// `self` at column `idx[k]` of a zero `[rows, width]` matrix, summing
    /// duplicates in order.
    pub fn scatter_cols(&self, idx: &[usize], width: usize) -> Result<Tensor> {
        let (r, c) = self.require_matrix("scatter_cols")?;
        if idx.len() != c || idx.iter().any(|&j| j >= width) {
            return Err(Error::shape("scatter_cols", &self.shape, &[width]));
        }
        let mut out = vec![0.0; r * width];
        for i in 0..r {
            for (k, &j) in idx.iter().enumerate() {
                out[i * width + j] += self.data[i * c + k];
            }
        }
        Ok(Tensor {
            shape: vec![r, width],
            data: out,
        })
    }

    /// `[a | b]` for matrices with equal row counts.
    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor> {
        let (r, ca) = self.require_matrix("concat_cols")?;
        let (r2, cb) = other.require_matrix("concat_cols")?;
        if r != r2 {
            return Err(Error::shape("concat_cols", &self.shape, &other.shape));
        }
        let mut out = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            out.extend_from_slice(&self.data[i * ca..(i + 1) * ca]);
            out.extend_from_slice(&other.data[i * cb..(i + 1) * cb]);
        }
        Ok(Tensor {
            shape: vec![r, ca + cb],
            data: out,
        })
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Tensor> {
        let (r, c) = self.require_matrix("slice_cols")?;
        if start >= end || end > c {
            return Err(Error::shape("slice_cols", &self.shape, &[start, end]));
        }
        let w = end - start;
        let mut out = Vec::with_capacity(r * w);
        for i in 0..r {
            out.extend_from_slice(&self.data[i * c + start..i * c + end]);
        }
        Ok(Tensor {
            shape: vec![r, w],
            data: out,
        })
    }

    /// Largest absolute elementwise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
