//! LIBSVM text format: `label idx:val idx:val ...` with 1-based, strictly
//! increasing feature indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Dataset;
use crate::error::{DiscoError, Result};
use crate::linalg::{DenseVec, SparseBlock};

/// Reads a LIBSVM file. `d` is the largest index seen unless `dim` is given,
/// in which case every index must fit.
pub fn read_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, dim, path.display().to_string())
}

pub fn parse_libsvm(text: &str, dim: Option<usize>, source: impl Into<String>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut triplets = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |msg: String| DiscoError::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("label {label_tok:?} is not a number")))?;
        if !label.is_finite() {
            return Err(err(format!("label {label_tok:?} is not finite")));
        }
        let sample = labels.len();
        labels.push(label);

        let mut prev = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| err(format!("feature index {idx_s:?} is not a positive integer")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(format!("feature index {idx} does not increase (previous {prev})")));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| err(format!("value {val_s:?} is not a number")))?;
            if !val.is_finite() {
                return Err(err(format!("value {val_s:?} is not finite")));
            }
            if let Some(d) = dim {
                if idx > d {
                    return Err(err(format!("feature index {idx} exceeds --dim {d}")));
                }
            }
            prev = idx;
            max_index = max_index.max(idx);
            triplets.push((idx - 1, sample, val));
        }
    }
    if labels.is_empty() {
        return Err(DiscoError::Parse {
            line: 0,
            msg: "no samples".into(),
        });
    }
    let d = dim.unwrap_or(max_index).max(1);
    let x = SparseBlock::from_triplets(d, labels.len(), &triplets)?;
    Dataset::new(x, DenseVec::from_vec(labels), source)
}

/// Writes a dataset so that [`read_libsvm`] reproduces every value exactly.
pub fn write_libsvm(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let xt = data.x.transpose();
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for j in 0..data.n {
        write!(out, "{}", data.y[j])?;
        let (cols, vals) = xt.row(j);
        for (c, v) in cols.iter().zip(vals) {
            write!(out, " {}:{}", c + 1, v)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
