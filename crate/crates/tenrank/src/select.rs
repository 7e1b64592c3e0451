//! Rank scanning and the four rank estimators: AutoTen (core consistency
//! only), AutoTen-REC (core consistency + reconstruction error), AutoTen-MV
//! (core consistency + held-out prediction), and Baseline-1 (error plateau).
//!
//! The clustering estimators share one mechanism: orient every feature so
//! larger is better, z-score each column, split the per-rank solutions into
//! two clusters with 2-means, and pick the highest rank inside the
//! higher-quality cluster.

use rayon::prelude::*;

use crate::als::{cp_als, AlsOptions};
use crate::corcondia::corcondia;
use crate::error::{Error, Result};
use crate::missing::{cp_wals, rmse, HoldoutMask};
use crate::seed::derive_seed;
use crate::tensor::DenseTensor3;

/// Per-rank diagnostics from one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScanRow {
    pub rank: usize,
    /// Final relative reconstruction error; `+inf` sentinel for failed solves.
    pub fit_error: f64,
    /// Raw core consistency score; absent when the solve failed.
    pub corcondia: Option<f64>,
    /// Held-out prediction RMSE; present when the scan ran the
    /// missing-value path.
    pub rmse_holdout: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Which estimator produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectorMethod {
    Autoten,
    AutotenRec,
    AutotenMv,
    Baseline1,
}

impl SelectorMethod {
    pub const ALL: [SelectorMethod; 4] = [
        SelectorMethod::Autoten,
        SelectorMethod::AutotenRec,
        SelectorMethod::AutotenMv,
        SelectorMethod::Baseline1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SelectorMethod::Autoten => "AUTOTEN",
            SelectorMethod::AutotenRec => "AUTOTEN_REC",
            SelectorMethod::AutotenMv => "AUTOTEN_MV",
            SelectorMethod::Baseline1 => "BASELINE1",
        }
    }
}

impl std::fmt::Display for SelectorMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cluster quality label for a scanned rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityLabel {
    Good,
    Bad,
}

/// A rank choice together with the cluster labels that justified it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDecision {
    pub method: SelectorMethod,
    pub chosen_rank: usize,
    /// `(rank, label)` for every row that entered clustering; empty for
    /// Baseline-1.
    pub labels: Vec<(usize, QualityLabel)>,
    pub features_used: Vec<String>,
}

/// Output of the parameter-free 2-means split.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeansResult {
    /// Cluster index (0 or 1) per input point.
    pub labels: Vec<usize>,
    /// Final centroids in z-scored feature space.
    pub centroids: [Vec<f64>; 2],
    /// Index of the higher-quality cluster.
    pub good_cluster: usize,
}

fn zscore(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
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

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// 2-means (Lloyd iteration to a label fixpoint) on z-score-standardized
/// features. Initialization is deterministic: one centroid at the point
/// with the minimum first feature, the other at the maximum (ties broken by
/// lowest index). The good cluster is the one whose centroid ends with the
/// larger first feature; features must be oriented so larger is better.
pub fn two_means(points: &[Vec<f64>]) -> Result<TwoMeansResult> {
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "two_means requires at least one point".into(),
        ));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidArgument(
            "two_means points must share a positive dimension".into(),
        ));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "two_means features must be finite".into(),
        ));
    }

    let z = zscore(points);
    let mut lo = 0;
    let mut hi = 0;
    for (idx, p) in z.iter().enumerate() {
        if p[0] < z[lo][0] {
            lo = idx;
        }
        if p[0] > z[hi][0] {
            hi = idx;
        }
    }
    let mut centroids = [z[lo].clone(), z[hi].clone()];
    let assign = |centroids: &[Vec<f64>; 2]| -> Vec<usize> {
        z.iter()
            .map(|p| {
                let d0 = dist_sq(p, &centroids[0]);
                let d1 = dist_sq(p, &centroids[1]);
                usize::from(d1 < d0)
            })
            .collect()
    };
    let mut labels = assign(&centroids);
    for _ in 0..100 {
        for (cluster, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = z
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == cluster)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; d];
            for p in &members {
                for (m, v) in mean.iter_mut().zip(p.iter()) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= members.len() as f64;
            }
            *centroid = mean;
        }
        let next = assign(&centroids);
        if next == labels {
            break;
        }
        labels = next;
    }

    let count1 = labels.iter().filter(|&&l| l == 1).count();
    let good_cluster = if count1 == 0 {
        0
    } else if count1 == labels.len() || centroids[1][0] > centroids[0][0] {
        1
    } else {
        0
    };
    Ok(TwoMeansResult {
        labels,
        centroids,
        good_cluster,
    })
}

/// Rows eligible for clustering: convergent solves with a diagnostic score.
fn clusterable(rows: &[RankScanRow]) -> Vec<&RankScanRow> {
    rows.iter()
        .filter(|r| r.converged && r.corcondia.is_some() && r.fit_error.is_finite())
        .collect()
}

fn cluster_decision(
    method: SelectorMethod,
    rows: &[&RankScanRow],
    features: &[Vec<f64>],
    feature_names: &[&str],
) -> Result<RankDecision> {
    let result = two_means(features)?;
    let labels: Vec<(usize, QualityLabel)> = rows
        .iter()
        .zip(&result.labels)
        .map(|(row, &l)| {
            let label = if l == result.good_cluster {
                QualityLabel::Good
            } else {
                QualityLabel::Bad
            };
            (row.rank, label)
        })
        .collect();
    let chosen_rank = labels
        .iter()
        .filter(|(_, l)| *l == QualityLabel::Good)
        .map(|(rank, _)| *rank)
        .max()
        .ok_or_else(|| Error::Estimation("good cluster is empty".into()))?;
    Ok(RankDecision {
        method,
        chosen_rank,
        labels,
        features_used: feature_names.iter().map(|s| s.to_string()).collect(),
    })
}

/// AutoTen: cluster on core consistency alone, then take the highest rank
/// in the good cluster.
pub fn autoten(rows: &[RankScanRow]) -> Result<RankDecision> {
    let usable = clusterable(rows);
    if usable.is_empty() {
        return Err(Error::Estimation(
            "no convergent rows to select from".into(),
        ));
    }
    let features: Vec<Vec<f64>> = usable
        .iter()
        .map(|r| vec![r.corcondia.expect("filtered")])
        .collect();
    cluster_decision(SelectorMethod::Autoten, &usable, &features, &["corcondia"])
}

/// AutoTen-REC: cluster on (core consistency, negated fit error).
pub fn autoten_rec(rows: &[RankScanRow]) -> Result<RankDecision> {
    let usable = clusterable(rows);
    if usable.is_empty() {
        return Err(Error::Estimation(
            "no convergent rows to select from".into(),
        ));
    }
    let features: Vec<Vec<f64>> = usable
        .iter()
        .map(|r| vec![r.corcondia.expect("filtered"), -r.fit_error])
        .collect();
    cluster_decision(
        SelectorMethod::AutotenRec,
        &usable,
        &features,
        &["corcondia", "neg_fit_error"],
    )
}

/// AutoTen-MV: cluster on (core consistency, negated held-out RMSE).
/// Every convergent row must carry an RMSE value.
pub fn autoten_mv(rows: &[RankScanRow]) -> Result<RankDecision> {
    let usable = clusterable(rows);
    if usable.is_empty() {
        return Err(Error::Estimation(
            "no convergent rows to select from".into(),
        ));
    }
    let features: Vec<Vec<f64>> = usable
        .iter()
        .map(|r| {
            r.rmse_holdout
                .map(|v| vec![r.corcondia.expect("filtered"), -v])
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "rank {} has no held-out RMSE; run the scan with a holdout mask",
                        r.rank
                    ))
                })
        })
        .collect::<Result<_>>()?;
    cluster_decision(
        SelectorMethod::AutotenMv,
        &usable,
        &features,
        &["corcondia", "neg_rmse_holdout"],
    )
}

/// Baseline-1: the smallest rank whose fit error stops decreasing (by less
/// than `epsilon`) toward the next rank; the maximum scanned rank if the
/// error keeps dropping. Non-monotone increases count as stopped.
pub fn baseline1(rows: &[RankScanRow], epsilon: f64) -> Result<RankDecision> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "baseline1 requires at least one row".into(),
        ));
    }
    let mut chosen_rank = rows.last().expect("nonempty").rank;
    for pair in rows.windows(2) {
        if pair[0].fit_error - pair[1].fit_error < epsilon {
            chosen_rank = pair[0].rank;
            break;
        }
    }
    Ok(RankDecision {
        method: SelectorMethod::Baseline1,
        chosen_rank,
        labels: Vec::new(),
        features_used: vec!["fit_error".into()],
    })
}

/// Default plateau threshold for [`baseline1`].
pub const BASELINE1_EPSILON: f64 = 1e-6;

fn scan_rank(
    t: &DenseTensor3,
    rank: usize,
    opts: &AlsOptions,
    holdout: Option<&HoldoutMask>,
) -> RankScanRow {
    let mut als_opts = opts.clone();
    als_opts.seed = derive_seed(opts.seed, (rank as u64) << 1);
    match cp_als(t, rank, &als_opts) {
        Ok((model, trace)) => {
            let fit_error = *trace.rel_errors.last().expect("nonempty trace");
            let cc = corcondia(t, &model).ok();
            let rmse_holdout = holdout.and_then(|mask| {
                let mut wals_opts = opts.clone();
                wals_opts.seed = derive_seed(opts.seed, ((rank as u64) << 1) | 1);
                cp_wals(t, mask, rank, &wals_opts)
                    .and_then(|(m, _)| rmse(&m, t, mask))
                    .ok()
            });
            RankScanRow {
                rank,
                fit_error,
                corcondia: cc,
                rmse_holdout,
                iterations: trace.iterations,
                converged: trace.converged,
            }
        }
        Err(_) => RankScanRow {
            rank,
            fit_error: f64::INFINITY,
            corcondia: None,
            rmse_holdout: None,
            iterations: 0,
            converged: false,
        },
    }
}

/// Decomposes `t` at every rank in `[min_rank, max_rank]` and collects
/// per-rank diagnostics. Ranks are evaluated in parallel; each draws an
/// independent seed stream from `opts.seed`, so the result does not depend
/// on scheduling. When `holdout` is given, the missing-value path also runs
/// and fills `rmse_holdout`.
pub fn scan(
    t: &DenseTensor3,
    min_rank: usize,
    max_rank: usize,
    opts: &AlsOptions,
    holdout: Option<&HoldoutMask>,
) -> Result<Vec<RankScanRow>> {
    opts.validate()?;
    if min_rank < 1 || min_rank > max_rank {
        return Err(Error::InvalidArgument(format!(
            "scan range must satisfy 1 <= min_rank <= max_rank, got {min_rank}..={max_rank}"
        )));
    }
    if let Some(mask) = holdout {
        if mask.dims() != t.dims() {
            return Err(Error::InvalidArgument(format!(
                "mask dims {:?} do not match tensor dims {:?}",
                mask.dims(),
                t.dims()
            )));
        }
    }
    if t.frobenius_norm() == 0.0 {
        return Err(Error::Domain("cannot scan a zero tensor".into()));
    }
    Ok((min_rank..=max_rank)
        .into_par_iter()
        .map(|rank| scan_rank(t, rank, opts, holdout))
        .collect())
}
