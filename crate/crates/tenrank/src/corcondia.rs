//! The Core Consistency Diagnostic: fit an unconstrained Tucker core on top
//! of fixed CP factors and score how close it is to the superdiagonal
//! identity. 100 means the data obey the CP structure at this rank; scores
//! near or below zero indicate overfactoring or model misfit.

use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::linalg::{pinv, PINV_REL_TOL};
use crate::tensor::{DenseTensor3, Matrix};

/// Least-squares Tucker core `G` for fixed factors, an `R x R x R` array in
/// the same layout as [`DenseTensor3`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoreTensor {
    rank: usize,
    values: Vec<f64>,
}

impl CoreTensor {
    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize) -> f64 {
        self.values[p + q * self.rank + r * self.rank * self.rank]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Weights are split evenly across the three factors so the ideal core is
/// the all-ones superdiagonal regardless of the model's scaling.
fn absorb_weights(m: &KruskalModel) -> (Matrix, Matrix, Matrix) {
    let mut a = m.a().clone();
    let mut b = m.b().clone();
    let mut c = m.c().clone();
    for (r, &w) in m.weights().iter().enumerate() {
        let s = w.cbrt();
        a.column_mut(r).scale_mut(s);
        b.column_mut(r).scale_mut(s);
        c.column_mut(r).scale_mut(s);
    }
    (a, b, c)
}

/// Solves `min_G ||X - G x1 A x2 B x3 C||_F` mode-wise:
/// `G = X x1 pinv(A) x2 pinv(B) x3 pinv(C)`.
pub fn fit_core(t: &DenseTensor3, m: &KruskalModel) -> Result<CoreTensor> {
    if t.dims() != m.dims() {
        return Err(Error::InvalidArgument(format!(
            "model dims {:?} do not match tensor dims {:?}",
            m.dims(),
            t.dims()
        )));
    }
    let finite = |f: &Matrix| f.iter().all(|v| v.is_finite());
    if !(finite(m.a()) && finite(m.b()) && finite(m.c())) {
        return Err(Error::Numerical(
            "non-finite factor entries in core fit".into(),
        ));
    }
    let rank = m.rank();
    let (_, dj, dk) = t.dims();
    let (a, b, c) = absorb_weights(m);

    let y1 = pinv(&a, PINV_REL_TOL) * t.unfold(1)?;
    let t1 = DenseTensor3::fold(&y1, 1, (rank, dj, dk))?;
    let y2 = pinv(&b, PINV_REL_TOL) * t1.unfold(2)?;
    let t2 = DenseTensor3::fold(&y2, 2, (rank, rank, dk))?;
    let y3 = pinv(&c, PINV_REL_TOL) * t2.unfold(3)?;
    let t3 = DenseTensor3::fold(&y3, 3, (rank, rank, rank))?;

    Ok(CoreTensor {
        rank,
        values: t3.values().to_vec(),
    })
}

/// Core consistency score
/// `100 * (1 - sum_{p,q,r} (g(p,q,r) - delta(p,q,r))^2 / R)`, where `delta`
/// is 1 on the superdiagonal and 0 elsewhere. Never exceeds 100; can be
/// arbitrarily negative. Returned raw, without clamping.
pub fn corcondia(t: &DenseTensor3, m: &KruskalModel) -> Result<f64> {
    let core = fit_core(t, m)?;
    let rank = core.rank();
    let mut sum_sq = 0.0;
    for r in 0..rank {
        for q in 0..rank {
            for p in 0..rank {
                let target = if p == q && q == r { 1.0 } else { 0.0 };
                let d = core.get(p, q, r) - target;
                sum_sq += d * d;
            }
        }
    }
    Ok(100.0 * (1.0 - sum_sq / rank as f64))
}
