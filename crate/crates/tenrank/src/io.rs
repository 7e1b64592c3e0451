//! Text file formats: tensors, factor models, holdout masks, and scan CSVs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::missing::HoldoutMask;
use crate::select::{RankDecision, RankScanRow};
use crate::tensor::{DenseTensor3, Matrix};

/// Renders a tensor in the coordinate text format: a `dims I J K` header
/// followed by one `i j k v` line per nonzero entry, in layout order.
/// Entries not listed are zero.
pub fn tensor_to_string(t: &DenseTensor3) -> String {
    let (di, dj, dk) = t.dims();
    let mut out = format!("# tenrank tensor\ndims {di} {dj} {dk}\n");
    for k in 0..dk {
        for j in 0..dj {
            for i in 0..di {
                let v = t.get(i, j, k);
                if v != 0.0 {
                    out.push_str(&format!("{i} {j} {k} {v}\n"));
                }
            }
        }
    }
    out
}

/// Parses the tensor text format. Lines starting with `#` are comments.
pub fn tensor_from_str(src: &str) -> Result<DenseTensor3> {
    let mut tensor: Option<DenseTensor3> = None;
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match &mut tensor {
            None => {
                if fields.len() != 4 || fields[0] != "dims" {
                    return Err(Error::parse(lineno, "expected header `dims I J K`"));
                }
                let dims: Vec<usize> = fields[1..]
                    .iter()
                    .map(|f| f.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(lineno, format!("bad dimension: {e}")))?;
                if dims.contains(&0) {
                    return Err(Error::parse(lineno, "dimensions must be positive"));
                }
                tensor = Some(DenseTensor3::zeros((dims[0], dims[1], dims[2])));
            }
            Some(t) => {
                if fields.len() != 4 {
                    return Err(Error::parse(lineno, "expected entry `i j k v`"));
                }
                let idx: Vec<usize> = fields[..3]
                    .iter()
                    .map(|f| f.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(lineno, format!("bad index: {e}")))?;
                let v: f64 = fields[3]
                    .parse()
                    .map_err(|e| Error::parse(lineno, format!("bad value: {e}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(lineno, "values must be finite"));
                }
                let (di, dj, dk) = t.dims();
                if idx[0] >= di || idx[1] >= dj || idx[2] >= dk {
                    return Err(Error::parse(
                        lineno,
                        format!("index ({},{},{}) out of bounds", idx[0], idx[1], idx[2]),
                    ));
                }
                t.set(idx[0], idx[1], idx[2], v);
            }
        }
    }
    tensor.ok_or_else(|| Error::parse(0, "missing `dims I J K` header"))
}

pub fn write_tensor(t: &DenseTensor3, path: &Path) -> Result<()> {
    std::fs::write(path, tensor_to_string(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor3> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tensor_from_str(&src)
}

fn push_matrix_rows(out: &mut String, m: &Matrix) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

/// Renders a factor model: `rank R`, `lambda ...`, then `A`, `B`, `C`
/// blocks listing factor rows.
pub fn model_to_string(m: &KruskalModel) -> String {
    let mut out = format!("rank {}\n", m.rank());
    let lambda: Vec<String> = m.weights().iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("lambda {}\n", lambda.join(" ")));
    for (name, factor) in [("A", m.a()), ("B", m.b()), ("C", m.c())] {
        out.push_str(name);
        out.push('\n');
        push_matrix_rows(&mut out, factor);
    }
    out
}

pub fn model_from_str(src: &str) -> Result<KruskalModel> {
    let lines: Vec<(usize, &str)> = src
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let mut pos = 0;
    fn take<'a>(
        lines: &[(usize, &'a str)],
        pos: &mut usize,
        expect: &str,
    ) -> Result<(usize, &'a str)> {
        let item = lines
            .get(*pos)
            .copied()
            .ok_or_else(|| Error::parse(0, format!("missing {expect}")))?;
        *pos += 1;
        Ok(item)
    }

    let (lineno, header) = take(&lines, &mut pos, "`rank R` header")?;
    let rank: usize = header
        .strip_prefix("rank ")
        .ok_or_else(|| Error::parse(lineno, "expected `rank R`"))?
        .trim()
        .parse()
        .map_err(|e| Error::parse(lineno, format!("bad rank: {e}")))?;
    if rank == 0 {
        return Err(Error::parse(lineno, "rank must be >= 1"));
    }

    let (lineno, lambda_line) = take(&lines, &mut pos, "`lambda` line")?;
    let weights: Vec<f64> = lambda_line
        .strip_prefix("lambda")
        .ok_or_else(|| Error::parse(lineno, "expected `lambda v1 ... vR`"))?
        .split_whitespace()
        .map(|f| f.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(lineno, format!("bad weight: {e}")))?;
    if weights.len() != rank {
        return Err(Error::parse(lineno, format!("expected {rank} weights")));
    }

    let mut factors: Vec<Matrix> = Vec::new();
    for name in ["A", "B", "C"] {
        let (lineno, label) = take(&lines, &mut pos, &format!("`{name}` block"))?;
        if label != name {
            return Err(Error::parse(lineno, format!("expected `{name}` block")));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        while let Some(&(n, l)) = lines.get(pos) {
            if l == "B" || l == "C" {
                break;
            }
            pos += 1;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|f| f.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(n, format!("bad factor entry: {e}")))?;
            if row.len() != rank {
                return Err(Error::parse(n, format!("expected {rank} columns")));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::parse(lineno, format!("`{name}` block is empty")));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        factors.push(Matrix::from_row_slice(rows.len(), rank, &flat));
    }
    let c = factors.pop().expect("three blocks");
    let b = factors.pop().expect("three blocks");
    let a = factors.pop().expect("three blocks");
    KruskalModel::new(weights, a, b, c)
}

pub fn write_model(m: &KruskalModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<KruskalModel> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&src)
}

/// Renders a holdout mask: `mask I J K n` then `i j k` lines.
pub fn mask_to_string(mask: &HoldoutMask) -> String {
    let (di, dj, dk) = mask.dims();
    let mut out = format!("mask {di} {dj} {dk} {}\n", mask.len());
    for (i, j, k) in mask.triples() {
        out.push_str(&format!("{i} {j} {k}\n"));
    }
    out
}

pub fn mask_from_str(src: &str) -> Result<HoldoutMask> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty mask file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "mask" {
        return Err(Error::parse(lineno, "expected header `mask I J K n`"));
    }
    let nums: Vec<usize> = fields[1..]
        .iter()
        .map(|f| f.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(lineno, format!("bad header field: {e}")))?;
    let (dims, n) = ((nums[0], nums[1], nums[2]), nums[3]);
    let mut triples = Vec::with_capacity(n);
    for (lineno, line) in lines {
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|f| f.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(lineno, format!("bad index: {e}")))?;
        if idx.len() != 3 {
            return Err(Error::parse(lineno, "expected `i j k`"));
        }
        triples.push((idx[0], idx[1], idx[2]));
    }
    if triples.len() != n {
        return Err(Error::parse(
            0,
            format!("header announced {n} entries, found {}", triples.len()),
        ));
    }
    HoldoutMask::from_triples(dims, triples)
}

pub fn write_mask(mask: &HoldoutMask, path: &Path) -> Result<()> {
    std::fs::write(path, mask_to_string(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<HoldoutMask> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    mask_from_str(&src)
}

/// Renders scan rows as CSV with any decisions appended as comment lines.
pub fn scan_to_csv(rows: &[RankScanRow], decisions: &[RankDecision]) -> String {
    let mut out = String::from("rank,fit_error,corcondia,rmse_holdout,iterations,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.rank,
            r.fit_error,
            r.corcondia.map(|v| v.to_string()).unwrap_or_default(),
            r.rmse_holdout.map(|v| v.to_string()).unwrap_or_default(),
            r.iterations,
            r.converged
        ));
    }
    if !decisions.is_empty() {
        out.push_str("# feature_standardization=zscore\n");
    }
    for d in decisions {
        out.push_str(&format!(
            "# method={} chosen_rank={}\n",
            d.method, d.chosen_rank
        ));
    }
    out
}

pub fn write_scan_csv(rows: &[RankScanRow], decisions: &[RankDecision], path: &Path) -> Result<()> {
    std::fs::write(path, scan_to_csv(rows, decisions)).map_err(|e| Error::io(path, e))
}
