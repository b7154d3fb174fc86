//! Binary array container.
//!
//! Layout: magic `SPRM0001`, element code (`u8`: 1 = f64, 2 = complex f64),
//! layout flag (`u8`: 0 = column-major), rank (`u64`), dims (`u64` each),
//! raw little-endian payload, CRC-32 of the payload (`u32`).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, C64};

pub const MAGIC: &[u8; 8] = b"SPRM0001";
const CODE_F64: u8 = 1;
const CODE_C128: u8 = 2;
const COLUMN_MAJOR: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    C128(Vec<C64>),
}

/// An n-dimensional array stored in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: ArrayData,
}

impl Array {
    pub fn real(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::checked(dims, ArrayData::F64(data))
    }

    pub fn complex(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        Self::checked(dims, ArrayData::C128(data))
    }

    fn checked(dims: Vec<usize>, data: ArrayData) -> Result<Self> {
        let n: usize = dims.iter().product();
        let len = match &data {
            ArrayData::F64(v) => v.len(),
            ArrayData::C128(v) => v.len(),
        };
        if n != len {
            return Err(Error::dim("array payload", n, len));
        }
        Ok(Self { dims, data })
    }

    pub fn from_cmat(m: &CMat) -> Self {
        Self {
            dims: vec![m.nrows(), m.ncols()],
            data: ArrayData::C128(m.as_slice().to_vec()),
        }
    }

    pub fn from_rmat(m: &RMat) -> Self {
        Self {
            dims: vec![m.nrows(), m.ncols()],
            data: ArrayData::F64(m.as_slice().to_vec()),
        }
    }

    pub fn from_reals(v: &[f64]) -> Self {
        Self {
            dims: vec![v.len()],
            data: ArrayData::F64(v.to_vec()),
        }
    }

    fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [r, c] => Ok((*r, *c)),
            [n] => Ok((*n, 1)),
            d => Err(Error::Format(format!(
                "expected a matrix, found rank {}",
                d.len()
            ))),
        }
    }

    pub fn to_cmat(&self) -> Result<CMat> {
        let (r, c) = self.matrix_dims()?;
        Ok(match &self.data {
            ArrayData::C128(v) => CMat::from_column_slice(r, c, v),
            ArrayData::F64(v) => CMat::from_iterator(r, c, v.iter().map(|&x| C64::new(x, 0.0))),
        })
    }

    pub fn to_rmat(&self) -> Result<RMat> {
        let (r, c) = self.matrix_dims()?;
        match &self.data {
            ArrayData::F64(v) => Ok(RMat::from_column_slice(r, c, v)),
            ArrayData::C128(_) => Err(Error::Format("expected a real array, found complex".into())),
        }
    }

    pub fn reals(&self) -> Result<&[f64]> {
        match &self.data {
            ArrayData::F64(v) => Ok(v),
            ArrayData::C128(_) => Err(Error::Format("expected a real array, found complex".into())),
        }
    }
}

pub fn write_array<W: Write>(mut out: W, a: &Array) -> Result<()> {
    let mut payload = Vec::new();
    let code = match &a.data {
        ArrayData::F64(v) => {
            payload.reserve(8 * v.len());
            v.iter()
                .for_each(|x| payload.extend_from_slice(&x.to_le_bytes()));
            CODE_F64
        }
        ArrayData::C128(v) => {
            payload.reserve(16 * v.len());
            v.iter().for_each(|z| {
                payload.extend_from_slice(&z.re.to_le_bytes());
                payload.extend_from_slice(&z.im.to_le_bytes());
            });
            CODE_C128
        }
    };
    out.write_all(MAGIC)?;
    out.write_all(&[code, COLUMN_MAJOR])?;
    out.write_all(&(a.dims.len() as u64).to_le_bytes())?;
    for d in &a.dims {
        out.write_all(&(*d as u64).to_le_bytes())?;
    }
    out.write_all(&payload)?;
    out.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_array<R: Read>(mut input: R) -> Result<Array> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an array container (bad magic)".into()));
    }
    let mut flags = [0u8; 2];
    input.read_exact(&mut flags)?;
    if flags[1] != COLUMN_MAJOR {
        return Err(Error::Format(format!(
            "unsupported layout flag {}",
            flags[1]
        )));
    }
    let width = match flags[0] {
        CODE_F64 => 8,
        CODE_C128 => 16,
        c => return Err(Error::Format(format!("unknown element code {c}"))),
    };
    let rank = read_u64(&mut input)?;
    if rank > 16 {
        return Err(Error::Format(format!("implausible rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        dims.push(read_u64(&mut input)? as usize);
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::Format("array dimensions overflow".into()))?;
    let mut payload = vec![0u8; n];
    input.read_exact(&mut payload)?;
    let mut crc = [0u8; 4];
    input.read_exact(&mut crc)?;
    if u32::from_le_bytes(crc) != crc32fast::hash(&payload) {
        return Err(Error::Format("CRC mismatch: container is corrupted".into()));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let data = if width == 8 {
        ArrayData::F64(payload.chunks_exact(8).map(f).collect())
    } else {
        ArrayData::C128(
            payload
                .chunks_exact(16)
                .map(|c| C64::new(f(&c[..8]), f(&c[8..])))
                .collect(),
        )
    };
    Ok(Array { dims, data })
}

pub fn save(path: &Path, a: &Array) -> Result<()> {
    let mut buf = Vec::new();
    write_array(&mut buf, a)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Array> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    read_array(bytes.as_slice()).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Io(io) => Error::Format(format!("{}: truncated container ({io})", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(a: &Array) -> Array {
        let mut buf = Vec::new();
        write_array(&mut buf, a).unwrap();
        read_array(buf.as_slice()).unwrap()
    }

    #[test]
    fn empty_zero_dim() {
        let a = Array::real(vec![], vec![3.5]).unwrap();
        assert_eq!(round_trip(&a), a);
        let e = Array::real(vec![0], vec![]).unwrap();
        assert_eq!(round_trip(&e), e);
    }

    #[test]
    fn complex_matrix_bit_exact() {
        let m = CMat::from_fn(3, 2, |i, j| C64::new(i as f64 / 3.0, -(j as f64) * 1e-300));
        let back = round_trip(&Array::from_cmat(&m)).to_cmat().unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn corrupted_crc_is_rejected() {
        let mut buf = Vec::new();
        write_array(&mut buf, &Array::from_reals(&[1.0, 2.0])).unwrap();
        let n = buf.len();
        buf[n - 6] ^= 1;
        assert!(matches!(read_array(buf.as_slice()), Err(Error::Format(_))));
        buf[0] = b'X';
        assert!(read_array(buf.as_slice()).is_err());
    }

    #[test]
    fn mismatched_dims() {
        assert!(Array::real(vec![2, 2], vec![1.0]).is_err());
    }
}
