//! Shared test oracles, independent of the library's computation paths.
#![allow(dead_code)]

use nalgebra::DVector;
use tenrank::*;

/// Entry-by-entry CP reconstruction straight from the definition.
pub fn reconstruct_triple_loop(m: &KruskalModel) -> DenseTensor3 {
    let (di, dj, dk) = m.dims();
    DenseTensor3::from_fn((di, dj, dk), |i, j, k| {
        (0..m.rank())
            .map(|r| m.weights()[r] * m.a()[(i, r)] * m.b()[(j, r)] * m.c()[(k, r)])
            .sum()
    })
}

/// Least-squares Tucker core fitted by solving the full dense system over
/// all I*J*K entries and R^3 unknowns: design[(i,j,k),(p,q,r)] =
/// A(i,p)*B(j,q)*C(k,r), weights absorbed as cube roots. Minimal-norm
/// solution via SVD.
pub fn dense_core_oracle(t: &DenseTensor3, m: &KruskalModel) -> Vec<f64> {
    let (di, dj, dk) = t.dims();
    let rank = m.rank();
    let mut a = m.a().clone();
    let mut b = m.b().clone();
    let mut c = m.c().clone();
    for (r, &w) in m.weights().iter().enumerate() {
        let s = w.cbrt();
        a.column_mut(r).scale_mut(s);
        b.column_mut(r).scale_mut(s);
        c.column_mut(r).scale_mut(s);
    }
    let n_rows = di * dj * dk;
    let n_cols = rank * rank * rank;
    let mut design = Matrix::zeros(n_rows, n_cols);
    for k in 0..dk {
        for j in 0..dj {
            for i in 0..di {
                let row = i + j * di + k * di * dj;
                for r in 0..rank {
                    for q in 0..rank {
                        for p in 0..rank {
                            let col = p + q * rank + r * rank * rank;
                            design[(row, col)] = a[(i, p)] * b[(j, q)] * c[(k, r)];
                        }
                    }
                }
            }
        }
    }
    let x = DVector::from_column_slice(t.values());
    let svd = design.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let g = svd.solve(&x, eps).expect("svd solve");
    g.as_slice().to_vec()
}

pub fn oracle_corcondia(t: &DenseTensor3, m: &KruskalModel) -> f64 {
    let g = dense_core_oracle(t, m);
    let rank = m.rank();
    let mut sum_sq = 0.0;
    for r in 0..rank {
        for q in 0..rank {
            for p in 0..rank {
                let target = if p == q && q == r { 1.0 } else { 0.0 };
                let d = g[p + q * rank + r * rank * rank] - target;
                sum_sq += d * d;
            }
        }
    }
    100.0 * (1.0 - sum_sq / rank as f64)
}

pub fn zscore(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let d = points[0].len();
    let mut out = vec![vec![0.0; d]; n];
    for col in 0..d {
        let mean: f64 = points.iter().map(|p| p[col]).sum::<f64>() / n as f64;
        let var: f64 = points.iter().map(|p| (p[col] - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 0.0 {
            for (row, p) in points.iter().enumerate() {
                out[row][col] = (p[col] - mean) / std;
            }
        }
    }
    out
}

/// Brute force over all bipartitions: minimum within-cluster variance on
/// z-scored features. Returns labels (0 = cluster containing point 0) and
/// the index of the good cluster (larger first-feature centroid).
pub fn brute_force_two_clusters(points: &[Vec<f64>]) -> (Vec<usize>, usize) {
    let z = zscore(points);
    let n = z.len();
    let d = z[0].len();
    if z.iter().all(|p| p == &z[0]) {
        return (vec![0; n], 0);
    }
    let wcss = |members: &[usize]| -> f64 {
        let mut mean = vec![0.0; d];
        for &i in members {
            for (m, v) in mean.iter_mut().zip(&z[i]) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= members.len() as f64;
        }
        members
            .iter()
            .map(|&i| {
                z[i].iter()
                    .zip(&mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum()
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for assignment in 0..(1u32 << (n - 1)) {
        let labels: Vec<usize> = std::iter::once(0)
            .chain((0..n - 1).map(|i| ((assignment >> i) & 1) as usize))
            .collect();
        let c0: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
        let c1: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
        if c1.is_empty() {
            continue;
        }
        let total = wcss(&c0) + wcss(&c1);
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, labels));
        }
    }
    let (_, labels) = best.expect("n >= 2");
    let centroid_f0 = |cluster: usize| -> f64 {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == cluster).collect();
        members.iter().map(|&i| z[i][0]).sum::<f64>() / members.len() as f64
    };
    let good = if centroid_f0(1) > centroid_f0(0) {
        1
    } else {
        0
    };
    (labels, good)
}

pub fn oracle_chosen_rank(ranks: &[usize], features: &[Vec<f64>]) -> usize {
    let (labels, good) = brute_force_two_clusters(features);
    ranks
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == good)
        .map(|(&r, _)| r)
        .max()
        .expect("good cluster nonempty")
}
