//! Row-sparse datasets, LIBSVM text I/O and synthetic generators.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DataError;

/// `N x d` feature matrix in compressed sparse row form plus one label per row.
/// Column indices are 0-based; the LIBSVM wire format is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    /// Builds from per-row `(index, value)` lists with 0-based, strictly increasing indices.
    pub fn from_sparse_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, dim: usize) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Invalid(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if rows.is_empty() {
            return Err(DataError::Invalid("dataset has no samples".into()));
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, row) in rows.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (j, v) in row {
                if j >= dim {
                    return Err(DataError::Invalid(format!("row {r}: index {j} outside dimension {dim}")));
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(DataError::Invalid(format!("row {r}: indices not strictly increasing")));
                }
                prev = Some(j);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self { indptr, indices, values, labels, dim })
    }

    pub fn from_dense_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self, DataError> {
        let dim = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().collect::<Vec<_>>())
            .collect();
        Self::from_sparse_rows(sparse, labels, dim)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Nonzero `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * w[j]).sum()
    }

    /// `out += scale * a_i`.
    pub fn row_axpy(&self, i: usize, scale: f64, out: &mut [f64]) {
        for (j, v) in self.row(i) {
            out[j] += scale * v;
        }
    }

    /// Copy with every feature value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self, DataError> {
        let picked = rows
            .iter()
            .map(|&r| {
                if r >= self.len() {
                    Err(DataError::IndexOutOfRange { index: r, len: self.len() })
                } else {
                    Ok(self.row(r).collect::<Vec<_>>())
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::from_sparse_rows(picked, labels, self.dim)
    }

    /// Sorted distinct labels. Class id `k` is the position of a label in this list.
    pub fn classes(&self) -> Vec<f64> {
        let mut c = self.labels.clone();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }

    /// Labels remapped to contiguous class ids `0..k`.
    pub fn class_ids(&self) -> Vec<usize> {
        let classes = self.classes();
        self.labels
            .iter()
            .map(|l| classes.binary_search_by(|c| c.total_cmp(l)).expect("label present"))
            .collect()
    }
}

/// Parses LIBSVM text: one `<label> <idx>:<val> ...` sample per line with
/// 1-based, strictly increasing indices. Blank lines and `#` comments are
/// skipped. The dimension is the largest index seen unless `dim` is given.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| DataError::Io(e.to_string()))?;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = tokens_with_columns(content);
        let Some((col, label_tok)) = tokens.next() else {
            continue;
        };
        let label: f64 = parse_number(label_tok).ok_or(DataError::Parse {
            line: line_no,
            column: col,
            message: format!("bad label {label_tok:?}"),
        })?;
        let mut row = Vec::new();
        let mut prev = 0usize;
        for (col, tok) in tokens {
            let parse_err = |message: String| DataError::Parse { line: line_no, column: col, message };
            let (idx_tok, val_tok) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx_tok.parse().map_err(|_| parse_err(format!("bad index {idx_tok:?}")))?;
            if idx == 0 {
                return Err(parse_err("indices are 1-based".into()));
            }
            let val = parse_number(val_tok).ok_or_else(|| DataError::Parse {
                line: line_no,
                column: col + idx_tok.len() + 1,
                message: format!("bad value {val_tok:?}"),
            })?;
            if idx <= prev {
                return Err(DataError::NonMonotoneIndex { line: line_no, column: col });
            }
            prev = idx;
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }
    let dim = match dim {
        Some(d) if d < max_index => {
            return Err(DataError::Invalid(format!("index {max_index} exceeds declared dimension {d}")));
        }
        Some(d) => d,
        None => max_index,
    };
    Dataset::from_sparse_rows(rows, labels, dim)
}

fn parse_number(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Whitespace-separated tokens with their 1-based byte column.
fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let col = offset + start + 1;
        let tok = &tail[..len];
        offset += start + len;
        rest = &tail[len..];
        Some((col, tok))
    })
}

pub fn serialize_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..data.len() {
        let _ = write!(out, "{}", data.label(i));
        for (j, v) in data.row(i) {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

pub(crate) fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Two Gaussian clusters centred at `+/- separation * u` for a random unit
/// vector `u`; labels are `+1` / `-1` with equal probability.
pub fn synth_logistic<R: Rng + ?Sized>(dim: usize, samples: usize, separation: f64, rng: &mut R) -> Result<Dataset, DataError> {
    if dim == 0 || samples == 0 {
        return Err(DataError::Invalid("synthetic data needs dim >= 1 and samples >= 1".into()));
    }
    let mut u: Vec<f64> = (0..dim).map(|_| std_normal(rng)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    u.iter_mut().for_each(|v| *v /= norm);
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let row: Vec<f64> = u
            .iter()
            .map(|&ui| label * separation * ui + std_normal(rng))
            .collect();
        rows.push(row);
        labels.push(label);
    }
    Dataset::from_dense_rows(&rows, labels)
}

/// `k` Gaussian blobs with random centres of norm `separation`; labels `0..k`.
pub fn synth_multiclass<R: Rng + ?Sized>(
    dim: usize,
    samples: usize,
    classes: usize,
    separation: f64,
    rng: &mut R,
) -> Result<Dataset, DataError> {
    if dim == 0 || samples == 0 || classes < 2 {
        return Err(DataError::Invalid("multiclass data needs dim >= 1, samples >= 1, classes >= 2".into()));
    }
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let c: Vec<f64> = (0..dim).map(|_| std_normal(rng)).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            c.into_iter().map(|v| separation * v / norm).collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let k = rng.random_range(0..classes);
        rows.push(centres[k].iter().map(|&c| c + std_normal(rng)).collect());
        labels.push(k as f64);
    }
    Dataset::from_dense_rows(&rows, labels)
}
