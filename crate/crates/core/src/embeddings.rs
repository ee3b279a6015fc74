//! Embedding-matrix extension for new supertoken rows.
//!
//! Binary layout: `u32` rows, `u32` dim, then `rows * dim` little-endian
//! `f32` values in row-major order. The text layout is a `rows dim` header
//! line followed by one whitespace-separated row per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::format;
use crate::scalar::{CompensatedSum, Scalar};
use crate::trainer::MergeTable;

/// Dense row-major `rows x dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Embeddings<T> {
    pub fn new(rows: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if rows.checked_mul(dim) != Some(data.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{rows}x{dim} = {} values", rows * dim),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: format!("rows of width {dim}"),
                found: format!("row of width {}", bad.len()),
            });
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.data.len() * 4);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            let f = v.to_f32().unwrap_or(f32::NAN);
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::InvalidInput("embedding file shorter than its header".into()));
        }
        let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if Some(body.len()) != rows.checked_mul(dim).and_then(|n| n.checked_mul(4)) {
            return Err(Error::DimensionMismatch {
                expected: format!("{} payload bytes", rows * dim * 4),
                found: format!("{} payload bytes", body.len()),
            });
        }
        let data = body
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap_or_else(T::nan))
            .collect();
        Self::new(rows, dim, data)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.dim);
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty embedding text".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::InvalidInput(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [rows, dim] = dims[..] else {
            return Err(Error::InvalidInput(format!("bad header {header:?}")));
        };
        let mut data = Vec::with_capacity(rows * dim);
        for line in lines {
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad value {tok:?}")))?;
                data.push(T::lit(v));
            }
        }
        Self::new(rows, dim, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_binary(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        format::write_bytes(path, &self.to_binary())
    }
}

/// How a new row is derived from its constituents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EmbeddingInit {
    /// Mean of the left and right constituent rows, composed along the chain.
    #[default]
    Pairwise,
    /// Flat mean of all base rows the supertoken spans.
    Flat,
}

/// Appends one row per merge not yet present in `matrix`.
///
/// `matrix` may already hold the rows of a table prefix; its row count must
/// lie in `base_vocab_size ..= base_vocab_size + merges`.
pub fn extend_embeddings<T: Scalar>(
    matrix: &Embeddings<T>,
    table: &MergeTable,
    init: EmbeddingInit,
) -> Result<Embeddings<T>> {
    let base = table.base_vocab_size as usize;
    if matrix.dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: "embedding width >= 1".into(),
            found: "width 0".into(),
        });
    }
    if matrix.rows < base || matrix.rows > base + table.merges.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("between {base} and {} rows", base + table.merges.len()),
            found: format!("{} rows", matrix.rows),
        });
    }
    let dim = matrix.dim;
    let mut data = matrix.data.clone();
    data.reserve((base + table.merges.len() - matrix.rows) * dim);
    let half = T::lit(0.5);
    for m in &table.merges[matrix.rows - base..] {
        let row: Vec<T> = match init {
            EmbeddingInit::Pairwise => {
                let (l, r) = (m.left as usize * dim, m.right as usize * dim);
                (0..dim).map(|j| (data[l + j] + data[r + j]) * half).collect()
            }
            EmbeddingInit::Flat => {
                let ids = base_constituents(table, m.new_id);
                let n = T::from_count(ids.len());
                (0..dim)
                    .map(|j| {
                        let s: CompensatedSum<T> = ids.iter().map(|&id| data[id as usize * dim + j]).collect();
                        s.total() / n
                    })
                    .collect()
            }
        };
        data.extend(row);
    }
    Embeddings::new(base + table.merges.len(), dim, data)
}

fn base_constituents(table: &MergeTable, id: TokenId) -> Vec<TokenId> {
    match table.merge_for(id) {
        Some(m) => {
            let mut out = base_constituents(table, m.left);
            out.extend(base_constituents(table, m.right));
            out
        }
        None => vec![id],
    }
}
