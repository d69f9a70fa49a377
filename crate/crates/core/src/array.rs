//! Dense real/complex arrays and the little-endian `BSTM` container.
//!
//! Layout on disk:
//!
//! ```text
//! offset  size        field
//! 0       4           magic  b"BSTM"
//! 4       1           version (1)
//! 5       1           dtype  (0 = real64, 1 = complex128)
//! 6       1           ndim   (1..=4)
//! 7       8 * ndim    extents, u64 little-endian
//! ..      payload     row-major scalars, f64 little-endian;
//!                     complex stored as (re, im) pairs
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BSTM";
pub const VERSION: u8 = 1;
pub const MAX_NDIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    Real64,
    Complex128,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::Real64 => 0,
            DType::Complex128 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::Real64),
            1 => Some(DType::Complex128),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major dense array with at most four axes.
#[derive(Clone, Debug, PartialEq)]
pub struct NdArray {
    shape: Vec<usize>,
    data: ArrayData,
}

impl NdArray {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_NDIM {
            return Err(Error::Dimension(format!(
                "array must have 1..={MAX_NDIM} axes, got {}",
                shape.len()
            )));
        }
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {count} elements but data has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn real(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(shape, ArrayData::Real(data))
    }

    pub fn complex(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        Self::new(shape, ArrayData::Complex(data))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            ArrayData::Real(_) => DType::Real64,
            ArrayData::Complex(_) => DType::Complex128,
        }
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn into_data(self) -> ArrayData {
        self.data
    }

    pub fn from_complex_matrix(m: &DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let data = (0..rows).flat_map(|i| (0..cols).map(move |j| m[(i, j)])).collect();
        Self::new(vec![rows, cols], ArrayData::Complex(data))
    }

    pub fn from_real_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let data = (0..rows).flat_map(|i| (0..cols).map(move |j| m[(i, j)])).collect();
        Self::new(vec![rows, cols], ArrayData::Real(data))
    }

    pub fn from_real_vec(v: &[f64]) -> Result<Self> {
        Self::real(vec![v.len()], v.to_vec())
    }

    /// Interprets a 2-D array as a matrix. Real payloads are promoted.
    pub fn to_complex_matrix(&self) -> Result<DMatrix<Complex64>> {
        let (rows, cols) = self.matrix_dims()?;
        Ok(match &self.data {
            ArrayData::Complex(v) => DMatrix::from_row_slice(rows, cols, v),
            ArrayData::Real(v) => DMatrix::from_fn(rows, cols, |i, j| Complex64::new(v[i * cols + j], 0.0)),
        })
    }

    pub fn to_real_matrix(&self) -> Result<DMatrix<f64>> {
        let (rows, cols) = self.matrix_dims()?;
        match &self.data {
            ArrayData::Real(v) => Ok(DMatrix::from_row_slice(rows, cols, v)),
            ArrayData::Complex(_) => Err(Error::Dimension("expected a real64 array, found complex128".into())),
        }
    }

    pub fn to_real_vec(&self) -> Result<Vec<f64>> {
        match &self.data {
            ArrayData::Real(v) => Ok(v.clone()),
            ArrayData::Complex(_) => Err(Error::Dimension("expected a real64 array, found complex128".into())),
        }
    }

    fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            [n] => Ok((*n, 1)),
            other => Err(Error::Dimension(format!("expected a matrix, got shape {other:?}"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let scalars = match &self.data {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => 2 * v.len(),
        };
        let mut out = Vec::with_capacity(7 + 8 * self.shape.len() + 8 * scalars);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype().code());
        out.push(self.shape.len() as u8);
        for &e in &self.shape {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        match &self.data {
            ArrayData::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            ArrayData::Complex(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format("magic", format!("expected \"BSTM\", found {magic:?}")));
        }
        let version = cur.take(1, "version")?[0];
        if version != VERSION {
            return Err(Error::format("version", format!("unsupported version {version}, expected {VERSION}")));
        }
        let code = cur.take(1, "dtype")?[0];
        let dtype = DType::from_code(code).ok_or_else(|| Error::format("dtype", format!("unknown dtype code {code}")))?;
        let ndim = cur.take(1, "ndim")?[0] as usize;
        if ndim == 0 || ndim > MAX_NDIM {
            return Err(Error::format("ndim", format!("ndim {ndim} outside 1..={MAX_NDIM}")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for axis in 0..ndim {
            let e = u64::from_le_bytes(cur.take(8, "extent")?.try_into().unwrap());
            if e == 0 {
                return Err(Error::format("extent", format!("axis {axis} has zero extent")));
            }
            shape.push(usize::try_from(e).map_err(|_| Error::format("extent", format!("axis {axis} extent {e} overflows")))?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or_else(|| Error::format("extent", "element count overflows".to_string()))?;
        let per = match dtype {
            DType::Real64 => 8,
            DType::Complex128 => 16,
        };
        let need = count
            .checked_mul(per)
            .ok_or_else(|| Error::format("extent", "payload size overflows".to_string()))?;
        let payload = cur.take(need, "payload")?;
        if cur.pos != bytes.len() {
            return Err(Error::format(
                "payload",
                format!("{} trailing bytes after payload", bytes.len() - cur.pos),
            ));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
        let data = match dtype {
            DType::Real64 => ArrayData::Real(payload.chunks_exact(8).map(f).collect()),
            DType::Complex128 => ArrayData::Complex(
                payload
                    .chunks_exact(16)
                    .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
                    .collect(),
            ),
        };
        Ok(Self { shape, data })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(
                field,
                format!("truncated: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn write_array(path: impl AsRef<Path>, a: &NdArray) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(&a.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_array(path: impl AsRef<Path>) -> Result<NdArray> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path.as_ref())?).read_to_end(&mut bytes)?;
    NdArray::from_bytes(&bytes)
}
