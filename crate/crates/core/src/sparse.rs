//! Compressed sparse row matrices with coordinate-triplet text I/O.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real CSR matrix. Explicitly stored zeros count towards `nnz`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from triplets; duplicates are summed and columns sorted per row.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for r in 0..rows {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        let mut t = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = data[r * cols + c];
                if v != 0.0 {
                    t.push((r, c, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows, cols, &t).expect("indices in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = self * x`, accumulating each row in column order.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// Complex `y = self * x`.
    pub fn mul_vec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += x[self.indices[k]] * self.values[k];
            }
            *out = acc;
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for (c, v) in self.indices.iter().zip(&self.values) {
            s[*c] += v;
        }
        s
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for (r, c, v) in self.triplets() {
            d[r * self.cols + c] = v;
        }
        d
    }

    /// Coordinate text: header `rows cols nnz`, then one `row col value` line per entry.
    /// The reader skips lines starting with `#`.
    pub fn to_triplet_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.rows, self.cols, self.nnz());
        for (r, c, v) in self.triplets() {
            writeln!(s, "{r} {c} {v:e}").unwrap();
        }
        s
    }

    pub fn from_triplet_text(text: &str, source_name: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            message,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| parse_err("empty file".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("bad header: {e}")))?;
        let [rows, cols, nnz] = h[..] else {
            return Err(parse_err("header must be `rows cols nnz`".into()));
        };
        let mut t = Vec::with_capacity(nnz);
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(format!("entry {}: expected 3 fields", n + 1)));
            }
            let r = f[0].parse().map_err(|e| parse_err(format!("entry {}: {e}", n + 1)))?;
            let c = f[1].parse().map_err(|e| parse_err(format!("entry {}: {e}", n + 1)))?;
            let v = f[2].parse().map_err(|e| parse_err(format!("entry {}: {e}", n + 1)))?;
            t.push((r, c, v));
        }
        if t.len() != nnz {
            return Err(parse_err(format!("header says {nnz} entries, found {}", t.len())));
        }
        CsrMatrix::from_triplets(rows, cols, &t)
    }
}
