//! Frobenius-norm alternating least squares for CP decomposition.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::linalg::{column_norm, pinv, PINV_REL_TOL};
use crate::seed::{derive_seed, seeded_rng};
use crate::tensor::{khatri_rao, DenseTensor3, Matrix};

/// Solver controls for [`cp_als`] and [`crate::missing::cp_wals`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlsOptions {
    /// Cap on full ALS sweeps per restart.
    pub max_iters: usize,
    /// Stop when the relative error changes by less than this between sweeps.
    pub tol: f64,
    /// Independent random initializations; the best final fit wins.
    pub n_restarts: usize,
    /// Base seed for all restart streams.
    pub seed: u64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            n_restarts: 3,
            seed: 0,
        }
    }
}

impl AlsOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument("tol must be > 0".into()));
        }
        if self.n_restarts < 1 {
            return Err(Error::InvalidArgument("n_restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Convergence record of one solver run (the winning restart).
#[derive(Debug, Clone, PartialEq)]
pub struct AlsTrace {
    /// Relative error after each full sweep; non-increasing up to roundoff.
    pub rel_errors: Vec<f64>,
    /// True when the tolerance stop fired before `max_iters`.
    pub converged: bool,
    pub iterations: usize,
}

/// Random-normal factor initialization; `lambda` starts at all ones.
/// Identical `(dims, rank, seed)` yield bitwise-identical factors.
pub fn init_factors(dims: (usize, usize, usize), rank: usize, seed: u64) -> KruskalModel {
    let mut rng = seeded_rng(seed);
    let mut draw = |rows: usize| {
        Matrix::from_iterator(
            rows,
            rank,
            std::iter::repeat_with(|| rng.sample::<f64, _>(StandardNormal)).take(rows * rank),
        )
    };
    let a = draw(dims.0);
    let b = draw(dims.1);
    let c = draw(dims.2);
    KruskalModel::from_parts(vec![1.0; rank], a, b, c)
}

pub(crate) struct Factors {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

/// Scales each column to unit norm and returns the norms. Zero columns are
/// left untouched and report norm 0.
fn normalize_columns(m: &mut Matrix) -> Vec<f64> {
    (0..m.ncols())
        .map(|c| {
            let norm = column_norm(m, c);
            if norm > 0.0 {
                let mut col = m.column_mut(c);
                col /= norm;
            }
            norm
        })
        .collect()
}

fn gram(m: &Matrix) -> Matrix {
    m.transpose() * m
}

/// One full ALS sweep over modes 1, 2, 3 on the given unfoldings. Each mode
/// solves its exact least-squares subproblem via the pseudoinverse of the
/// Hadamard product of the other factors' Gram matrices, then renormalizes.
/// Returns the absorbed weights (from the mode-3 update) and the mode-3
/// Khatri-Rao product for cheap residual evaluation.
pub(crate) fn als_sweep(
    x1: &Matrix,
    x2: &Matrix,
    x3: &Matrix,
    f: &mut Factors,
) -> (Vec<f64>, Matrix) {
    let kr_cb = khatri_rao(&f.c, &f.b).expect("equal rank");
    let g1 = gram(&f.c).component_mul(&gram(&f.b));
    f.a = x1 * kr_cb * pinv(&g1, PINV_REL_TOL);
    normalize_columns(&mut f.a);

    let kr_ca = khatri_rao(&f.c, &f.a).expect("equal rank");
    let g2 = gram(&f.c).component_mul(&gram(&f.a));
    f.b = x2 * kr_ca * pinv(&g2, PINV_REL_TOL);
    normalize_columns(&mut f.b);

    let kr_ba = khatri_rao(&f.b, &f.a).expect("equal rank");
    let g3 = gram(&f.b).component_mul(&gram(&f.a));
    f.c = x3 * &kr_ba * pinv(&g3, PINV_REL_TOL);
    let weights = normalize_columns(&mut f.c);
    (weights, kr_ba)
}

/// Mode-3 matricization of the current model.
pub(crate) fn model_unfold3(f: &Factors, weights: &[f64], kr_ba: &Matrix) -> Matrix {
    let scaled = &f.c * Matrix::from_diagonal(&DVector::from_column_slice(weights));
    scaled * kr_ba.transpose()
}

struct RestartOutcome {
    weights: Vec<f64>,
    factors: Factors,
    trace: AlsTrace,
}

fn run_restart(
    (x1, x2, x3): (&Matrix, &Matrix, &Matrix),
    dims: (usize, usize, usize),
    rank: usize,
    opts: &AlsOptions,
    norm_x: f64,
    seed: u64,
) -> Result<RestartOutcome> {
    let init = init_factors(dims, rank, seed);
    let mut f = Factors {
        a: init.a().clone(),
        b: init.b().clone(),
        c: init.c().clone(),
    };
    let mut weights = vec![1.0; rank];
    let mut rel_errors = Vec::new();
    let mut converged = false;
    for iter in 0..opts.max_iters {
        let (w, kr_ba) = als_sweep(x1, x2, x3, &mut f);
        weights = w;
        let resid = x3 - model_unfold3(&f, &weights, &kr_ba);
        let err = resid.norm() / norm_x;
        if !err.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite relative error at iteration {iter}"
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
    let iterations = rel_errors.len();
    Ok(RestartOutcome {
        weights,
        factors: f,
        trace: AlsTrace {
            rel_errors,
            converged,
            iterations,
        },
    })
}

/// CP decomposition by alternating least squares with restarts. Returns the
/// normalized model of the best restart (lowest final relative error) and
/// its convergence trace.
pub fn cp_als(
    t: &DenseTensor3,
    rank: usize,
    opts: &AlsOptions,
) -> Result<(KruskalModel, AlsTrace)> {
    opts.validate()?;
    if rank < 1 {
        return Err(Error::InvalidArgument("rank must be >= 1".into()));
    }
    let norm_x = t.frobenius_norm();
    if norm_x == 0.0 {
        return Err(Error::Domain("cannot decompose a zero tensor".into()));
    }
    let x1 = t.unfold(1)?;
    let x2 = t.unfold(2)?;
    let x3 = t.unfold(3)?;

    let mut best: Option<RestartOutcome> = None;
    for restart in 0..opts.n_restarts {
        let outcome = run_restart(
            (&x1, &x2, &x3),
            t.dims(),
            rank,
            opts,
            norm_x,
            derive_seed(opts.seed, restart as u64),
        )?;
        let err = *outcome.trace.rel_errors.last().expect("max_iters >= 1");
        let improves = match &best {
            None => true,
            Some(b) => err < *b.trace.rel_errors.last().expect("nonempty"),
        };
        if improves {
            best = Some(outcome);
        }
    }
    let best = best.expect("n_restarts >= 1");
    let model =
        KruskalModel::from_parts(best.weights, best.factors.a, best.factors.b, best.factors.c)
            .normalize();
    Ok((model, best.trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_model(dims: (usize, usize, usize), rank: usize, seed: u64) -> KruskalModel {
        init_factors(dims, rank, seed)
    }

    #[test]
    fn init_is_deterministic() {
        let m1 = init_factors((4, 4, 4), 2, 7);
        let m2 = init_factors((4, 4, 4), 2, 7);
        assert_eq!(m1, m2);
    }

    #[test]
    fn init_seeds_differ() {
        let m1 = init_factors((4, 4, 4), 2, 7);
        let m2 = init_factors((4, 4, 4), 2, 8);
        assert_ne!(m1.a(), m2.a());
    }

    #[test]
    fn init_shapes() {
        let m = init_factors((4, 4, 4), 2, 0);
        assert_eq!(m.a().shape(), (4, 2));
        assert_eq!(m.b().shape(), (4, 2));
        assert_eq!(m.c().shape(), (4, 2));
        assert_eq!(m.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn recovers_planted_rank2() {
        let truth = random_model((4, 4, 4), 2, 11);
        let t = truth.reconstruct();
        let (model, trace) = cp_als(&t, 2, &AlsOptions::with_seed(3)).unwrap();
        let err = *trace.rel_errors.last().unwrap();
        assert!(err < 1e-6, "final relative error {err}");
        assert!(model.is_normalized());
    }

    #[test]
    fn trace_is_non_increasing() {
        for seed in 0..5u64 {
            let t = random_model((5, 4, 3), 3, 100 + seed).reconstruct();
            let (_, trace) = cp_als(&t, 2, &AlsOptions::with_seed(seed)).unwrap();
            for w in trace.rel_errors.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-10,
                    "trace increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn zero_tensor_is_domain_error() {
        let t = DenseTensor3::zeros((3, 3, 3));
        assert!(matches!(
            cp_als(&t, 1, &AlsOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deterministic_given_options() {
        let t = random_model((4, 3, 5), 2, 5).reconstruct();
        let opts = AlsOptions::with_seed(9);
        let (m1, tr1) = cp_als(&t, 2, &opts).unwrap();
        let (m2, tr2) = cp_als(&t, 2, &opts).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(tr1, tr2);
    }

    #[test]
    fn output_is_sorted_and_unit_norm() {
        let t = random_model((5, 5, 5), 3, 21).reconstruct();
        let (m, _) = cp_als(&t, 3, &AlsOptions::with_seed(2)).unwrap();
        for w in m.weights().windows(2) {
            assert!(w[0] >= w[1]);
        }
        for r in 0..m.rank() {
            assert!((m.a().column(r).norm() - 1.0).abs() < 1e-12);
            assert!((m.b().column(r).norm() - 1.0).abs() < 1e-12);
            assert!((m.c().column(r).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let t = random_model((3, 3, 3), 1, 0).reconstruct();
        let bad = AlsOptions {
            max_iters: 0,
            ..AlsOptions::default()
        };
        assert!(matches!(
            cp_als(&t, 1, &bad),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            cp_als(&t, 0, &AlsOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
