//! Dense 3-way tensor storage and the matricization kernels used by ALS
//! and the core consistency diagnostic.
//!
//! Layout convention: entry `(i, j, k)` of an `I x J x K` tensor is stored
//! at linear offset `i + j*I + k*I*J` (first mode fastest). Unfoldings
//! follow the Kolda-Bader convention, so the mode-1 matricization of a CP
//! model equals `A * diag(lambda) * khatri_rao(C, B)^T`.

use crate::error::{Error, Result};

/// Column-major dense matrix; element `(r, c)` lives at `r + c * rows`.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Dense 3-way tensor with fixed first-mode-fastest layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl DenseTensor3 {
    /// Builds a tensor from its dimensions and a layout-ordered value vector.
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let (i, j, k) = dims;
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must be positive, got {i}x{j}x{k}"
            )));
        }
        if values.len() != i * j * k {
            return Err(Error::InvalidArgument(format!(
                "value count {} does not match dimensions {i}x{j}x{k}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "tensor values must be finite".into(),
            ));
        }
        Ok(Self { dims, values })
    }

    pub(crate) fn from_vec_unchecked(dims: (usize, usize, usize), values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dims.0 * dims.1 * dims.2);
        Self { dims, values }
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self::from_vec_unchecked(dims, vec![0.0; dims.0 * dims.1 * dims.2])
    }

    /// Fills entries from an index function, in layout order.
    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let (di, dj, dk) = dims;
        let mut values = Vec::with_capacity(di * dj * dk);
        for k in 0..dk {
            for j in 0..dj {
                for i in 0..di {
                    values.push(f(i, j, k));
                }
            }
        }
        Self::from_vec_unchecked(dims, values)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + j * self.dims.0 + k * self.dims.0 * self.dims.1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let off = self.offset(i, j, k);
        self.values[off] = value;
    }

    /// Layout-ordered view of all entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Mode-n matricization (Kolda-Bader column ordering).
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        let (di, dj, dk) = self.dims;
        match mode {
            // Mode-1 columns are already contiguous in the layout.
            1 => Ok(Matrix::from_column_slice(di, dj * dk, &self.values)),
            2 => {
                let mut m = Matrix::zeros(dj, di * dk);
                for k in 0..dk {
                    for j in 0..dj {
                        for i in 0..di {
                            m[(j, i + k * di)] = self.values[self.offset(i, j, k)];
                        }
                    }
                }
                Ok(m)
            }
            3 => {
                let mut m = Matrix::zeros(dk, di * dj);
                for k in 0..dk {
                    for j in 0..dj {
                        for i in 0..di {
                            m[(k, i + j * di)] = self.values[self.offset(i, j, k)];
                        }
                    }
                }
                Ok(m)
            }
            _ => Err(Error::InvalidArgument(format!(
                "unfold mode must be 1, 2 or 3, got {mode}"
            ))),
        }
    }

    /// Inverse of [`unfold`](Self::unfold) for the given mode and dimensions.
    pub fn fold(m: &Matrix, mode: usize, dims: (usize, usize, usize)) -> Result<Self> {
        let (di, dj, dk) = dims;
        let expected = match mode {
            1 => (di, dj * dk),
            2 => (dj, di * dk),
            3 => (dk, di * dj),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "fold mode must be 1, 2 or 3, got {mode}"
                )))
            }
        };
        if (m.nrows(), m.ncols()) != expected {
            return Err(Error::InvalidArgument(format!(
                "fold mode {mode} for dims {di}x{dj}x{dk} expects a {}x{} matrix, got {}x{}",
                expected.0,
                expected.1,
                m.nrows(),
                m.ncols()
            )));
        }
        let mut t = Self::zeros(dims);
        match mode {
            1 => t.values.copy_from_slice(m.as_slice()),
            2 => {
                for k in 0..dk {
                    for j in 0..dj {
                        for i in 0..di {
                            let off = t.offset(i, j, k);
                            t.values[off] = m[(j, i + k * di)];
                        }
                    }
                }
            }
            3 => {
                for k in 0..dk {
                    for j in 0..dj {
                        for i in 0..di {
                            let off = t.offset(i, j, k);
                            t.values[off] = m[(k, i + j * di)];
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Column-wise Kronecker product of two matrices with equal column counts.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::InvalidArgument(format!(
            "khatri-rao requires equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb, cols) = (a.nrows(), b.nrows(), a.ncols());
    let mut out = Matrix::zeros(ra * rb, cols);
    for c in 0..cols {
        for ia in 0..ra {
            let av = a[(ia, c)];
            for ib in 0..rb {
                out[(ia * rb + ib, c)] = av * b[(ib, c)];
            }
        }
    }
    Ok(out)
}
