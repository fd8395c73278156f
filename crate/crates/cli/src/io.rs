//! Readers for LIBSVM and dense CSV data files and for weight files.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use slope_newt::{CsrMatrix, DesignMatrix, LambdaSeq, ProblemData};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] slope_newt::Error),
}

fn read_to_string(path: &Path) -> Result<String, ReadError> {
    fs::read_to_string(path).map_err(|source| ReadError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, ReadError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ReadError::Parse {
            line,
            msg: format!("invalid {what} '{tok}'"),
        }),
    }
}

/// Parses `label idx:val ...` lines with 1-based feature indices. Blank lines
/// and `#` comments are skipped. The feature count is the largest index seen
/// unless `num_features` is given.
pub fn parse_libsvm(text: &str, num_features: Option<usize>) -> Result<ProblemData, ReadError> {
    let mut b = Vec::new();
    let mut indptr = vec![0usize];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut max_idx = 0usize;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let label = toks.next().unwrap_or_default();
        b.push(parse_f64(label, line, "label")?);

        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| ReadError::Parse {
                line,
                msg: format!("expected idx:val, got '{tok}'"),
            })?;
            let idx: i64 = i.parse().map_err(|_| ReadError::Parse {
                line,
                msg: format!("invalid feature index '{i}'"),
            })?;
            if idx <= 0 {
                return Err(ReadError::Parse {
                    line,
                    msg: format!("feature index {idx} is not positive (indices are 1-based)"),
                });
            }
            let val = parse_f64(v, line, "feature value")?;
            row.push((idx as usize - 1, val));
        }
        row.sort_by_key(|&(i, _)| i);
        if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ReadError::Parse {
                line,
                msg: format!("duplicate feature index {}", w[0].0 + 1),
            });
        }
        for (i, v) in row {
            max_idx = max_idx.max(i + 1);
            if v != 0.0 {
                indices.push(i);
                data.push(v);
            }
        }
        indptr.push(indices.len());
    }

    if b.is_empty() {
        return Err(ReadError::Invalid("no data rows".into()));
    }
    let n = match num_features {
        Some(n) if n < max_idx => {
            return Err(ReadError::Invalid(format!(
                "feature index {max_idx} exceeds --num-features {n}"
            )))
        }
        Some(n) => n,
        None => max_idx,
    };
    let csr = CsrMatrix::new(b.len(), n, indptr, indices, data)?;
    Ok(ProblemData::new(DesignMatrix::from_sparse(csr), DVector::from_vec(b))?)
}

pub fn read_libsvm(path: &Path, num_features: Option<usize>) -> Result<ProblemData, ReadError> {
    parse_libsvm(&read_to_string(path)?, num_features)
}

/// Header-less dense rows; the last column is the response.
pub fn parse_csv(text: &str) -> Result<ProblemData, ReadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if width.is_none() {
            if rec.len() < 2 {
                return Err(ReadError::Parse {
                    line,
                    msg: "need at least one feature column and the response".into(),
                });
            }
            width = Some(rec.len());
        }
        for (j, tok) in rec.iter().enumerate() {
            let v = parse_f64(tok, line, "value")?;
            if j + 1 == rec.len() {
                b.push(v);
            } else {
                vals.push(v);
            }
        }
    }
    let Some(w) = width else {
        return Err(ReadError::Invalid("no data rows".into()));
    };
    let a = DMatrix::from_row_slice(b.len(), w - 1, &vals);
    Ok(ProblemData::dense(a, DVector::from_vec(b))?)
}

pub fn read_csv(path: &Path) -> Result<ProblemData, ReadError> {
    parse_csv(&read_to_string(path)?)
}

/// Weights separated by whitespace or commas.
pub fn parse_lambda(text: &str, n: usize) -> Result<LambdaSeq, ReadError> {
    let mut lam = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            lam.push(parse_f64(tok, k + 1, "weight")?);
        }
    }
    if lam.len() != n {
        return Err(ReadError::Invalid(format!(
            "weight file has {} entries, the design has {n} features",
            lam.len()
        )));
    }
    Ok(LambdaSeq::new(lam)?)
}

pub fn read_lambda(path: &Path, n: usize) -> Result<LambdaSeq, ReadError> {
    parse_lambda(&read_to_string(path)?, n)
}
