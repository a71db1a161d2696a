//! Embedding matrices and the `AJEM` binary container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"AJEM"
//! version u16 (= 1)
//! dim     u32
//! count   u64
//! ids     count x (u32 byte length, UTF-8 bytes)
//! data    count x dim x f32, row-major
//! ```
//!
//! The `normalized` flag is not stored; it is recomputed on read from the row norms.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"AJEM";
pub const FORMAT_VERSION: u16 = 1;
/// Rows within this distance of unit norm count as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("zero vector for id {0}")]
    ZeroVector(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("unknown id {0}")]
    UnknownId(String),
}

pub type Result<T> = std::result::Result<T, StoreError>;

/// Id-keyed row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    normalized: bool,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(StoreError::Format("dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(StoreError::Format(format!(
                "payload has {} floats, expected {} x {}",
                data.len(),
                ids.len(),
                dim
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(StoreError::DuplicateId(id.clone()));
            }
        }
        let mut m = Self {
            dim,
            ids,
            data,
            normalized: false,
            index,
        };
        m.normalized = m.count() > 0 && m.rows_are_unit();
        Ok(m)
    }

    /// Builds a matrix from `(id, row)` pairs; every row must have length `dim`.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (id, row) in rows {
            if row.len() != dim {
                return Err(StoreError::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            ids.push(id.into());
            data.extend_from_slice(&row);
        }
        Self::new(dim, ids, data)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.get(id).ok_or_else(|| StoreError::UnknownId(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }

    /// Row as `f64`, the precision every downstream computation runs in.
    pub fn row_f64(&self, id: &str) -> Result<Vec<f64>> {
        Ok(self.require(id)?.iter().map(|&x| x as f64).collect())
    }

    fn rows_are_unit(&self) -> bool {
        self.data
            .chunks_exact(self.dim)
            .all(|r| (norm(r) - 1.0).abs() <= UNIT_NORM_TOLERANCE)
    }
}

/// Euclidean norm accumulated in `f64`.
pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// `f32` dot product with an `f32` accumulator; only used on hot index paths.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Cosine similarity; symmetric, accumulated in `f64`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(StoreError::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(StoreError::ZeroVector("lhs".into()));
    }
    if nb == 0.0 {
        return Err(StoreError::ZeroVector("rhs".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Returns a copy with every row scaled to unit length.
pub fn l2_normalize(matrix: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let mut data = Vec::with_capacity(matrix.data.len());
    for (id, row) in matrix.rows() {
        let n = norm(row);
        if n == 0.0 {
            return Err(StoreError::ZeroVector(id.to_string()));
        }
        data.extend(row.iter().map(|&x| (x as f64 / n) as f32));
    }
    let mut out = EmbeddingMatrix::new(matrix.dim, matrix.ids.clone(), data)?;
    out.normalized = true;
    Ok(out)
}

/// Aggregates rows into one vector: uniform mean when `weights` is `None`,
/// otherwise the weighted sum (weights are used as given).
pub fn aggregate_rows(matrix: &EmbeddingMatrix, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = matrix.count();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(StoreError::DimMismatch {
                expected: n,
                found: w.len(),
            });
        }
    }
    let mut out = vec![0.0f64; matrix.dim];
    for (i, (_, row)) in matrix.rows().enumerate() {
        let a = weights.map_or(1.0 / n as f64, |w| w[i]);
        for (o, &x) in out.iter_mut().zip(row) {
            *o += a * x as f64;
        }
    }
    Ok(out)
}

/// Parses a weights file: one decimal value per line, blank lines ignored.
pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| StoreError::Format(format!("bad weight {l:?}: {e}")))
        })
        .collect()
}

pub fn encode(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let id_bytes: usize = matrix.ids.iter().map(|s| 4 + s.len()).sum();
    let mut buf = Vec::with_capacity(18 + id_bytes + matrix.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(matrix.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(matrix.count() as u64).to_le_bytes());
    for id in &matrix.ids {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    for x in &matrix.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(StoreError::Format(format!("truncated {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(StoreError::Format("bad magic".into()));
    }
    let version = cur.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(StoreError::Format(format!("unsupported version {version}")));
    }
    let dim = cur.u32("dim")? as usize;
    if dim == 0 {
        return Err(StoreError::Format("dim must be positive".into()));
    }
    let count = cur.u64("count")?;
    let count = usize::try_from(count)
        .map_err(|_| StoreError::Format(format!("count {count} too large")))?;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = cur.u32("id length")? as usize;
        let raw = cur.take(len, "id")?;
        let id = std::str::from_utf8(raw)
            .map_err(|e| StoreError::Format(format!("id is not UTF-8: {e}")))?;
        ids.push(id.to_string());
    }
    let floats = count
        .checked_mul(dim)
        .ok_or_else(|| StoreError::Format("payload size overflow".into()))?;
    let payload = cur.take(floats * 4, "payload")?;
    if cur.pos != bytes.len() {
        return Err(StoreError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(dim, ids, data)
}

pub fn write_store(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(matrix))?;
    f.flush()?;
    Ok(())
}

pub fn read_store(path: &Path) -> Result<EmbeddingMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
