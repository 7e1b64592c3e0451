//! Kruskal (CP factor) models: weights plus one factor matrix per mode.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::tensor::{khatri_rao, DenseTensor3, Matrix};

/// A rank-R CP model: weights `lambda` and factor matrices `A (IxR)`,
/// `B (JxR)`, `C (KxR)`. The represented tensor is
/// `x(i,j,k) = sum_r lambda_r * A(i,r) * B(j,r) * C(k,r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel {
    weights: Vec<f64>,
    a: Matrix,
    b: Matrix,
    c: Matrix,
    normalized: bool,
    degenerate: Vec<usize>,
}

impl KruskalModel {
    pub fn new(weights: Vec<f64>, a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let rank = weights.len();
        if rank == 0 {
            return Err(Error::InvalidArgument("model rank must be >= 1".into()));
        }
        if a.ncols() != rank || b.ncols() != rank || c.ncols() != rank {
            return Err(Error::InvalidArgument(format!(
                "factor column counts ({}, {}, {}) must equal the rank {rank}",
                a.ncols(),
                b.ncols(),
                c.ncols()
            )));
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self {
            weights,
            a,
            b,
            c,
            normalized: false,
            degenerate: Vec::new(),
        })
    }

    pub(crate) fn from_parts(weights: Vec<f64>, a: Matrix, b: Matrix, c: Matrix) -> Self {
        debug_assert_eq!(weights.len(), a.ncols());
        debug_assert_eq!(weights.len(), b.ncols());
        debug_assert_eq!(weights.len(), c.ncols());
        Self {
            weights,
            a,
            b,
            c,
            normalized: false,
            degenerate: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Row counts of the three factors, i.e. the dimensions of the tensor
    /// this model represents.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// True once the model passed through [`normalize`](Self::normalize).
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Component indices whose zero factor columns were replaced during
    /// normalization (weights forced to 0).
    pub fn degenerate_components(&self) -> &[usize] {
        &self.degenerate
    }

    /// Materializes the CP model as a dense tensor via the mode-1
    /// matricized identity `X_(1) = A * diag(lambda) * (C kr B)^T`.
    pub fn reconstruct(&self) -> DenseTensor3 {
        let kr = khatri_rao(&self.c, &self.b).expect("factor column counts match by invariant");
        let scaled = &self.a * Matrix::from_diagonal(&DVector::from_column_slice(&self.weights));
        let x1 = scaled * kr.transpose();
        DenseTensor3::fold(&x1, 1, self.dims()).expect("mode-1 shape matches by construction")
    }

    /// Relative reconstruction error `||t - reconstruct()||_F / ||t||_F`.
    pub fn relative_error(&self, t: &DenseTensor3) -> Result<f64> {
        if t.dims() != self.dims() {
            return Err(Error::InvalidArgument(format!(
                "model dims {:?} do not match tensor dims {:?}",
                self.dims(),
                t.dims()
            )));
        }
        let norm_t = t.frobenius_norm();
        if norm_t == 0.0 {
            return Err(Error::Domain(
                "relative error is undefined for a zero tensor".into(),
            ));
        }
        let recon = self.reconstruct();
        let resid: f64 = t
            .values()
            .iter()
            .zip(recon.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(resid.sqrt() / norm_t)
    }

    /// Rescales every factor column to unit norm, absorbing scales into the
    /// weights, flips paired column signs so weights are non-negative, and
    /// sorts components by descending weight. Zero columns get weight 0 and
    /// are replaced by `e1`; their indices are reported by
    /// [`degenerate_components`](Self::degenerate_components).
    pub fn normalize(&self) -> KruskalModel {
        let rank = self.rank();
        struct Comp {
            weight: f64,
            a: DVector<f64>,
            b: DVector<f64>,
            c: DVector<f64>,
            degenerate: bool,
        }
        let mut comps: Vec<Comp> = Vec::with_capacity(rank);
        for r in 0..rank {
            let mut ca = DVector::from(self.a.column(r).clone_owned());
            let mut cb = DVector::from(self.b.column(r).clone_owned());
            let mut cc = DVector::from(self.c.column(r).clone_owned());
            let (na, nb, nc) = (ca.norm(), cb.norm(), cc.norm());
            let degenerate = na == 0.0 || nb == 0.0 || nc == 0.0;
            let mut weight = if degenerate {
                0.0
            } else {
                self.weights[r] * na * nb * nc
            };
            for (col, norm) in [(&mut ca, na), (&mut cb, nb), (&mut cc, nc)] {
                if norm > 0.0 {
                    *col /= norm;
                } else {
                    col.fill(0.0);
                    col[0] = 1.0;
                }
            }
            if weight < 0.0 {
                weight = -weight;
                ca.neg_mut();
            }
            comps.push(Comp {
                weight,
                a: ca,
                b: cb,
                c: cc,
                degenerate,
            });
        }
        // Stable sort: equal weights keep their original component order.
        comps.sort_by(|x, y| y.weight.partial_cmp(&x.weight).expect("weights are finite"));

        let (di, dj, dk) = self.dims();
        let mut a = Matrix::zeros(di, rank);
        let mut b = Matrix::zeros(dj, rank);
        let mut c = Matrix::zeros(dk, rank);
        let mut weights = Vec::with_capacity(rank);
        let mut degenerate = Vec::new();
        for (r, comp) in comps.into_iter().enumerate() {
            a.set_column(r, &comp.a);
            b.set_column(r, &comp.b);
            c.set_column(r, &comp.c);
            weights.push(comp.weight);
            if comp.degenerate {
                degenerate.push(r);
            }
        }
        KruskalModel {
            weights,
            a,
            b,
            c,
            normalized: true,
            degenerate,
        }
    }
}
