//! Sparse linear constraint systems `<d^i, x> = h_i` and their squared-residual
//! proximity function.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::parallel::{map_indexed, sum_indexed, Execution};

/// One sparse row with strictly increasing column indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row from `(column, value)` pairs in any order. Zero values are
    /// discarded; a repeated column is an error.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(j, _)| j);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::UnsortedRow { row: 0 });
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(Self { indices, values })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            s += v * x[j];
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroRowPolicy {
    Reject,
    #[default]
    Drop,
}

/// A dense image on a `width x height` grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageVector {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("image dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: values.len() });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("pixel {j} is not finite")));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

impl AsRef<[f64]> for ImageVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// The constraint set `T`: rows `d^i`, right-hand sides `h_i`, and a
/// column-major transpose built once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    dim: usize,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    norms_sq: Vec<f64>,
    /// Position of each row in the input it was built from.
    source_index: Vec<usize>,
    dropped: usize,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
}

impl ConstraintSystem {
    /// Validates rows and builds the column index. Row order is preserved.
    pub fn build(
        rows: Vec<SparseRow>,
        rhs: Vec<f64>,
        dim: usize,
        policy: ZeroRowPolicy,
    ) -> Result<Self> {
        let ids = (0..rows.len()).collect();
        Self::build_with_ids(rows, rhs, ids, dim, policy)
    }

    /// Like [`ConstraintSystem::build`], with explicit source ids for each row
    /// (for example the candidate ray index a row was traced from).
    pub fn build_with_ids(
        rows: Vec<SparseRow>,
        rhs: Vec<f64>,
        ids: Vec<usize>,
        dim: usize,
        policy: ZeroRowPolicy,
    ) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), actual: rhs.len() });
        }
        if rows.len() != ids.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), actual: ids.len() });
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let mut kept_rows = Vec::with_capacity(rows.len());
        let mut kept_rhs = Vec::with_capacity(rows.len());
        let mut kept_ids = Vec::with_capacity(rows.len());
        let mut norms_sq = Vec::with_capacity(rows.len());
        let mut dropped = 0;
        for (i, ((row, h), id)) in rows.into_iter().zip(rhs).zip(ids).enumerate() {
            if row.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::UnsortedRow { row: i });
            }
            if let Some(&j) = row.indices.last() {
                if j >= dim {
                    return Err(Error::ColumnOutOfRange { row: i, column: j, dim });
                }
            }
            let n2 = row.norm_sq();
            if n2 == 0.0 {
                match policy {
                    ZeroRowPolicy::Reject => return Err(Error::ZeroRow { row: i }),
                    ZeroRowPolicy::Drop => {
                        dropped += 1;
                        continue;
                    }
                }
            }
            kept_rows.push(row);
            kept_rhs.push(h);
            kept_ids.push(id);
            norms_sq.push(n2);
        }
        if kept_rows.is_empty() {
            return Err(Error::EmptySystem);
        }

        let mut counts = vec![0usize; dim + 1];
        for row in &kept_rows {
            for &j in &row.indices {
                counts[j + 1] += 1;
            }
        }
        for j in 0..dim {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts;
        let nnz = col_ptr[dim];
        let mut fill = col_ptr.clone();
        let mut col_rows = vec![0; nnz];
        let mut col_vals = vec![0.0; nnz];
        for (i, row) in kept_rows.iter().enumerate() {
            for (j, v) in row.iter() {
                col_rows[fill[j]] = i;
                col_vals[fill[j]] = v;
                fill[j] += 1;
            }
        }

        Ok(Self {
            dim,
            rows: kept_rows,
            rhs: kept_rhs,
            norms_sq,
            source_index: kept_ids,
            dropped,
            col_ptr,
            col_rows,
            col_vals,
        })
    }

    /// Builds a consistent system `h = A x_star`.
    pub fn consistent(rows: Vec<SparseRow>, x_star: &[f64]) -> Result<Self> {
        let rhs = rows.iter().map(|r| r.dot(x_star)).collect();
        Self::build(rows, rhs, x_star.len(), ZeroRowPolicy::Drop)
    }

    /// Vector dimension `J`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows `I`.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.col_vals.len()
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.norms_sq[i]
    }

    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    /// Number of zero-norm rows discarded during construction.
    pub fn dropped_rows(&self) -> usize {
        self.dropped
    }

    /// Rows touching column `j`, as `(row, coefficient)` pairs in row order.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        self.col_rows[span.clone()].iter().copied().zip(self.col_vals[span].iter().copied())
    }

    pub fn column_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        Ok(())
    }

    /// `r_i = <d^i, x> - h_i` for every row.
    pub fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.residuals_with(x, Execution::default())
    }

    pub fn residuals_with(&self, x: &[f64], exec: Execution) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(map_indexed(self.rows.len(), exec, |i| self.rows[i].dot(x) - self.rhs[i]))
    }

    /// Squared-residual proximity `sum_i (<d^i, x> - h_i)^2`.
    pub fn proximity(&self, x: &[f64]) -> Result<f64> {
        self.proximity_with(x, Execution::default())
    }

    pub fn proximity_with(&self, x: &[f64], exec: Execution) -> Result<f64> {
        self.check_dim(x)?;
        Ok(sum_indexed(self.rows.len(), exec, |i| {
            let r = self.rows[i].dot(x) - self.rhs[i];
            r * r
        }))
    }

    /// Writes the text form: header `J I`, then `id nnz (j:value)* h` per row.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.dim, self.rows.len())?;
        let mut line = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            line.clear();
            write!(line, "{} {}", self.source_index[i], row.nnz()).unwrap();
            for (j, v) in row.iter() {
                write!(line, " {j}:{v}").unwrap();
            }
            write!(line, " {}", self.rhs[i]).unwrap();
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let io_err = |line: usize, e: std::io::Error| Error::Parse { line, msg: e.to_string() };
        let (dim, count) = loop {
            let Some((n, line)) = lines.next() else {
                return Err(Error::Parse { line: 1, msg: "missing header".into() });
            };
            let line = line.map_err(|e| io_err(n + 1, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let dim = parse_tok::<usize>(it.next(), n + 1, "J")?;
            let count = parse_tok::<usize>(it.next(), n + 1, "I")?;
            break (dim, count);
        };
        let mut rows = Vec::with_capacity(count);
        let mut rhs = Vec::with_capacity(count);
        let mut ids = Vec::with_capacity(count);
        for (n, line) in lines {
            let line = line.map_err(|e| io_err(n + 1, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let id = parse_tok::<usize>(toks.first().copied(), n + 1, "row id")?;
            let nnz = parse_tok::<usize>(toks.get(1).copied(), n + 1, "nnz")?;
            if toks.len() != nnz + 3 {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected {} fields, found {}", nnz + 3, toks.len()),
                });
            }
            let mut entries = Vec::with_capacity(nnz);
            for tok in &toks[2..2 + nnz] {
                let (j, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                    line: n + 1,
                    msg: format!("bad entry '{tok}'"),
                })?;
                entries.push((
                    parse_tok::<usize>(Some(j), n + 1, "column")?,
                    parse_tok::<f64>(Some(v), n + 1, "value")?,
                ));
            }
            rows.push(SparseRow::new(entries).map_err(|_| Error::Parse {
                line: n + 1,
                msg: "repeated column index".into(),
            })?);
            rhs.push(parse_tok::<f64>(toks.last().copied(), n + 1, "rhs")?);
            ids.push(id);
        }
        if rows.len() != count {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {count} rows, found {}", rows.len()),
            });
        }
        Self::build_with_ids(rows, rhs, ids, dim, ZeroRowPolicy::Reject)
    }
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?;
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad {what} '{tok}'") })
}
