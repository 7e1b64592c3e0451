//! Generate a small low-rank tensor, scan candidate ranks, and print what
//! each estimator decides.
//!
//! Run with: cargo run --example rank_scan

use tenrank::*;

fn main() -> Result<()> {
    let true_rank = 3;
    let dims = (6, 6, 6);
    let seed = 7;

    let (tensor, _truth) = synth_kruskal(true_rank, dims, 0.0, seed)?;
    let mask = holdout_split(dims, 0.1, seed + 1)?;
    let opts = AlsOptions::with_seed(seed + 2);
    let rows = scan(&tensor, 1, true_rank + 3, &opts, Some(&mask))?;

    println!("true rank: {true_rank}");
    println!("rank  fit_error    corcondia    rmse_holdout");
    for r in &rows {
        println!(
            "{:<5} {:<12.3e} {:<12.4} {:<12.3e}",
            r.rank,
            r.fit_error,
            r.corcondia.unwrap_or(f64::NAN),
            r.rmse_holdout.unwrap_or(f64::NAN),
        );
    }
    for decision in [
        autoten(&rows)?,
        autoten_rec(&rows)?,
        autoten_mv(&rows)?,
        baseline1(&rows, BASELINE1_EPSILON)?,
    ] {
        println!(
            "{:<12} -> rank {}",
            decision.method.name(),
            decision.chosen_rank
        );
    }
    Ok(())
}
