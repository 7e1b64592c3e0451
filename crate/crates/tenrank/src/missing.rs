//! Missing-value CP decomposition (EM imputation around the ALS sweep) and
//! held-out prediction scoring.

use rand::Rng;

use crate::als::init_factors;
use crate::als::{als_sweep, model_unfold3, AlsOptions, AlsTrace, Factors};
use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::seed::{derive_seed, seeded_rng};
use crate::tensor::DenseTensor3;

/// A set of tensor cells withheld from fitting and used for prediction
/// scoring. Indices are stored sorted in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutMask {
    dims: (usize, usize, usize),
    fraction: f64,
    linear: Vec<usize>,
}

impl HoldoutMask {
    /// Builds a mask from explicit index triples. Triples must be unique,
    /// in bounds, nonempty, and must not cover the whole tensor.
    pub fn from_triples(
        dims: (usize, usize, usize),
        triples: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self> {
        let (di, dj, dk) = dims;
        let total = di * dj * dk;
        let mut linear = Vec::new();
        for (i, j, k) in triples {
            if i >= di || j >= dj || k >= dk {
                return Err(Error::InvalidArgument(format!(
                    "held-out index ({i},{j},{k}) out of bounds for {di}x{dj}x{dk}"
                )));
            }
            linear.push(i + j * di + k * di * dj);
        }
        linear.sort_unstable();
        let before = linear.len();
        linear.dedup();
        if linear.len() != before {
            return Err(Error::InvalidArgument(
                "held-out indices must be unique".into(),
            ));
        }
        if linear.is_empty() {
            return Err(Error::InvalidArgument(
                "held-out set must be nonempty".into(),
            ));
        }
        if linear.len() >= total {
            return Err(Error::InvalidArgument(
                "held-out set must not cover the whole tensor".into(),
            ));
        }
        let fraction = linear.len() as f64 / total as f64;
        Ok(Self {
            dims,
            fraction,
            linear,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        let off = i + j * self.dims.0 + k * self.dims.0 * self.dims.1;
        self.linear.binary_search(&off).is_ok()
    }

    pub(crate) fn linear_indices(&self) -> &[usize] {
        &self.linear
    }

    /// Held-out triples in layout order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (di, dj, _) = self.dims;
        self.linear.iter().map(move |&off| {
            let i = off % di;
            let j = (off / di) % dj;
            let k = off / (di * dj);
            (i, j, k)
        })
    }
}

/// Uniform sample without replacement of `round(fraction * I*J*K)` cells,
/// deterministic in `seed`.
pub fn holdout_split(dims: (usize, usize, usize), fraction: f64, seed: u64) -> Result<HoldoutMask> {
    if fraction.is_nan() || fraction <= 0.0 || fraction >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let total = dims.0 * dims.1 * dims.2;
    let n = (fraction * total as f64).round() as usize;
    if n < 1 {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {fraction} rounds to an empty mask for {total} cells"
        )));
    }
    if n >= total {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {fraction} rounds to the full index set ({n} of {total} cells)"
        )));
    }
    // Partial Fisher-Yates over all linear offsets.
    let mut rng = seeded_rng(seed);
    let mut pool: Vec<usize> = (0..total).collect();
    for i in 0..n {
        let j = rng.random_range(i..total);
        pool.swap(i, j);
    }
    let mut linear: Vec<usize> = pool[..n].to_vec();
    linear.sort_unstable();
    Ok(HoldoutMask {
        dims,
        fraction,
        linear,
    })
}

/// Root mean squared error of the model's predictions on held-out cells.
pub fn rmse(m: &KruskalModel, t: &DenseTensor3, mask: &HoldoutMask) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::InvalidArgument("mask must be nonempty".into()));
    }
    if t.dims() != mask.dims() || t.dims() != m.dims() {
        return Err(Error::InvalidArgument(format!(
            "dims mismatch: tensor {:?}, mask {:?}, model {:?}",
            t.dims(),
            mask.dims(),
            m.dims()
        )));
    }
    let recon = m.reconstruct();
    let sum_sq: f64 = mask
        .linear_indices()
        .iter()
        .map(|&off| {
            let d = t.values()[off] - recon.values()[off];
            d * d
        })
        .sum();
    Ok((sum_sq / mask.len() as f64).sqrt())
}

/// CP decomposition with held-out cells treated as missing, via EM
/// imputation: held-out cells start at the observed mean, and each outer
/// iteration refits one ALS sweep on the completed tensor, then overwrites
/// the held-out cells with the model's reconstruction. The trace records
/// relative error over observed entries only.
pub fn cp_wals(
    t: &DenseTensor3,
    mask: &HoldoutMask,
    rank: usize,
    opts: &AlsOptions,
) -> Result<(KruskalModel, AlsTrace)> {
    opts.validate()?;
    if rank < 1 {
        return Err(Error::InvalidArgument("rank must be >= 1".into()));
    }
    if mask.dims() != t.dims() {
        return Err(Error::InvalidArgument(format!(
            "mask dims {:?} do not match tensor dims {:?}",
            mask.dims(),
            t.dims()
        )));
    }

    let total = t.len();
    let held = mask.linear_indices();
    let mut is_held = vec![false; total];
    for &off in held {
        is_held[off] = true;
    }
    let observed: Vec<usize> = (0..total).filter(|&off| !is_held[off]).collect();
    let obs_sq: f64 = observed.iter().map(|&off| t.values()[off].powi(2)).sum();
    let obs_norm = obs_sq.sqrt();
    if obs_norm == 0.0 {
        return Err(Error::Domain(
            "observed entries have zero norm; nothing to fit".into(),
        ));
    }
    let obs_mean: f64 =
        observed.iter().map(|&off| t.values()[off]).sum::<f64>() / observed.len() as f64;

    let mut best: Option<(Vec<f64>, Factors, AlsTrace)> = None;
    for restart in 0..opts.n_restarts {
        let seed = derive_seed(opts.seed, restart as u64);
        let init = init_factors(t.dims(), rank, seed);
        let mut f = Factors {
            a: init.a().clone(),
            b: init.b().clone(),
            c: init.c().clone(),
        };
        let mut work = t.clone();
        for &off in held {
            work.values_mut()[off] = obs_mean;
        }
        let mut weights = vec![1.0; rank];
        let mut rel_errors: Vec<f64> = Vec::new();
        let mut converged = false;
        for iter in 0..opts.max_iters {
            let x1 = work.unfold(1)?;
            let x2 = work.unfold(2)?;
            let x3 = work.unfold(3)?;
            let (w, kr_ba) = als_sweep(&x1, &x2, &x3, &mut f);
            weights = w;
            let recon = DenseTensor3::fold(&model_unfold3(&f, &weights, &kr_ba), 3, t.dims())?;
            for &off in held {
                work.values_mut()[off] = recon.values()[off];
            }
            let err_sq: f64 = observed
                .iter()
                .map(|&off| {
                    let d = t.values()[off] - recon.values()[off];
                    d * d
                })
                .sum();
            let err = err_sq.sqrt() / obs_norm;
            if !err.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite observed-entry error at iteration {iter}"
                )));
            }
            rel_errors.push(err);
            if rel_errors.len() >= 2 {
                let prev = rel_errors[rel_errors.len() - 2];
                if (prev - err).abs() < opts.tol {
                    converged = true;
                    break;
                }
            }
        }
        let trace = AlsTrace {
            iterations: rel_errors.len(),
            rel_errors,
            converged,
        };
        let err = *trace.rel_errors.last().expect("max_iters >= 1");
        let improves = match &best {
            None => true,
            Some((_, _, b)) => err < *b.rel_errors.last().expect("nonempty"),
        };
        if improves {
            best = Some((weights, f, trace));
        }
    }
    let (weights, f, trace) = best.expect("n_restarts >= 1");
    let model = KruskalModel::from_parts(weights, f.a, f.b, f.c).normalize();
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::als::cp_als;

    #[test]
    fn holdout_cardinality_contract() {
        let mask = holdout_split((10, 10, 10), 0.1, 42).unwrap();
        assert_eq!(mask.len(), 100);
        let mut seen = mask.linear_indices().to_vec();
        seen.dedup();
        assert_eq!(seen.len(), 100);
        assert!(mask.triples().all(|(i, j, k)| i < 10 && j < 10 && k < 10));
    }

    #[test]
    fn holdout_is_deterministic() {
        let m1 = holdout_split((6, 5, 4), 0.2, 7).unwrap();
        let m2 = holdout_split((6, 5, 4), 0.2, 7).unwrap();
        assert_eq!(m1, m2);
        let m3 = holdout_split((6, 5, 4), 0.2, 8).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn holdout_rejects_degenerate_fractions() {
        assert!(matches!(
            holdout_split((2, 2, 2), 0.999, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            holdout_split((10, 10, 10), 0.0001, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            holdout_split((2, 2, 2), 1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            holdout_split((2, 2, 2), 0.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn from_triples_validates() {
        assert!(HoldoutMask::from_triples((2, 2, 2), [(0, 0, 0)]).is_ok());
        assert!(matches!(
            HoldoutMask::from_triples((2, 2, 2), [(2, 0, 0)]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            HoldoutMask::from_triples((2, 2, 2), [(0, 0, 0), (0, 0, 0)]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            HoldoutMask::from_triples((2, 2, 2), std::iter::empty()),
            Err(Error::InvalidArgument(_))
        ));
        let all = (0..2).flat_map(|i| (0..2).flat_map(move |j| (0..2).map(move |k| (i, j, k))));
        assert!(matches!(
            HoldoutMask::from_triples((2, 2, 2), all),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rmse_exact_fit_is_zero() {
        let truth = init_factors((4, 4, 4), 2, 3);
        let t = truth.reconstruct();
        let mask = holdout_split((4, 4, 4), 0.1, 1).unwrap();
        assert!(rmse(&truth, &t, &mask).unwrap() < 1e-12);
    }

    #[test]
    fn rmse_single_cell_formula() {
        // Truth 2 at the held-out cell, model predicts 0 there.
        let t = DenseTensor3::from_fn(
            (2, 2, 2),
            |i, j, k| {
                if (i, j, k) == (0, 1, 0) {
                    2.0
                } else {
                    1.0
                }
            },
        );
        let m = KruskalModel::new(
            vec![0.0],
            crate::tensor::Matrix::zeros(2, 1),
            crate::tensor::Matrix::zeros(2, 1),
            crate::tensor::Matrix::zeros(2, 1),
        )
        .unwrap();
        let mask = HoldoutMask::from_triples((2, 2, 2), [(0, 1, 0)]).unwrap();
        assert!((rmse(&m, &t, &mask).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_cell_holdout_recovers_rank1() {
        let truth = init_factors((5, 5, 5), 1, 17);
        let t = truth.reconstruct();
        let mask = HoldoutMask::from_triples((5, 5, 5), [(2, 3, 1)]).unwrap();
        let (model, _) = cp_wals(&t, &mask, 1, &AlsOptions::with_seed(5)).unwrap();
        let err = rmse(&model, &t, &mask).unwrap();
        assert!(err < 1e-4, "held-out prediction error {err}");
    }

    #[test]
    fn observed_trace_is_non_increasing() {
        let truth = init_factors((6, 6, 6), 2, 23);
        let t = truth.reconstruct();
        let mask = holdout_split((6, 6, 6), 0.1, 9).unwrap();
        let (_, trace) = cp_wals(&t, &mask, 2, &AlsOptions::with_seed(4)).unwrap();
        for w in trace.rel_errors.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-10,
                "trace increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn tiny_mask_agrees_with_full_als() {
        let truth = init_factors((10, 10, 10), 2, 31);
        let t = truth.reconstruct();
        let mask = HoldoutMask::from_triples((10, 10, 10), [(0, 0, 0)]).unwrap();
        let opts = AlsOptions::with_seed(12);
        let (m_full, _) = cp_als(&t, 2, &opts).unwrap();
        let (m_miss, _) = cp_wals(&t, &mask, 2, &opts).unwrap();
        // Both outputs are normalized and weight-sorted, so factors must
        // agree componentwise up to sign.
        for (wf, wm) in m_full.weights().iter().zip(m_miss.weights()) {
            assert!((wf - wm).abs() < 1e-3 * wf.max(1.0));
        }
        for (ff, fm) in [
            (m_full.a(), m_miss.a()),
            (m_full.b(), m_miss.b()),
            (m_full.c(), m_miss.c()),
        ] {
            for r in 0..m_full.rank() {
                let direct = (ff.column(r) - fm.column(r)).norm();
                let flipped = (ff.column(r) + fm.column(r)).norm();
                assert!(direct.min(flipped) < 1e-3, "component {r} differs");
            }
        }
    }
}
