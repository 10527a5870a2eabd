//! `DSRB` v1 tensor files.
//!
//! Layout, all little-endian: magic `DSRB`, version `u8 = 1`, dtype `u8`
//! (1 = f32, 2 = f64), ndim `u8`, reserved `u8 = 0`, `ndim` x `u32` extents,
//! then the row-major payload.

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSRB";
pub const VERSION: u8 = 1;
pub const MAX_DIMS: usize = 8;
const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > MAX_DIMS {
            return Err(Error::Param(format!("{} dims exceeds maximum of {MAX_DIMS}", dims.len())));
        }
        if let Some(d) = dims.iter().find(|&&d| d > u32::MAX as usize) {
            return Err(Error::Param(format!("extent {d} does not fit in u32")));
        }
        let count: usize = dims.iter().product();
        if count != data.len() {
            return Err(Error::DimMismatch(format!(
                "dims {dims:?} hold {count} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn f64(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(dims, TensorData::F64(values))
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

pub fn encode_tensor(tensor: &TensorFile) -> Vec<u8> {
    let dtype = tensor.dtype();
    let mut out =
        Vec::with_capacity(HEADER_LEN + 4 * tensor.dims.len() + dtype.width() * tensor.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, dtype.code(), tensor.dims.len() as u8, 0]);
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match &tensor.data {
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected DSRB"));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(4, format!("unsupported version {}", bytes[4])));
    }
    let dtype = match bytes[5] {
        1 => DType::F32,
        2 => DType::F64,
        other => return Err(Error::format(5, format!("unknown dtype {other}"))),
    };
    let ndim = bytes[6] as usize;
    if ndim > MAX_DIMS {
        return Err(Error::format(6, format!("{ndim} dims exceeds maximum of {MAX_DIMS}")));
    }
    if bytes[7] != 0 {
        return Err(Error::format(7, "reserved byte must be zero"));
    }
    let dims_end = HEADER_LEN + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(Error::format(bytes.len(), "truncated dims"));
    }
    let dims: Vec<usize> = bytes[HEADER_LEN..dims_end]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(HEADER_LEN, "element count overflows"))?;
    let payload = &bytes[dims_end..];
    if Some(payload.len()) != count.checked_mul(dtype.width()) {
        return Err(Error::format(
            dims_end,
            format!(
                "payload is {} bytes, dims {dims:?} of {} need {}",
                payload.len(),
                dtype.name(),
                count.saturating_mul(dtype.width())
            ),
        ));
    }
    let data = match dtype {
        DType::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::F64 => TensorData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok(TensorFile { dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_of_small_f64() {
        let t = TensorFile::f64(vec![2], vec![1.0, 2.0]).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(bytes.len(), 8 + 4 + 16);
        assert_eq!(&bytes[..8], b"DSRB\x01\x02\x01\x00");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
    }

    #[test]
    fn zero_extent_has_no_payload() {
        let t = TensorFile::f64(vec![0], vec![]).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(bytes.len(), 12);
        assert_eq!(decode_tensor(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_bad_inputs() {
        let good = encode_tensor(&TensorFile::f64(vec![1], vec![3.0]).unwrap());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tensor(&bad), Err(Error::Format { offset: 0, .. })));
        let mut bad = good.clone();
        bad[5] = 9;
        assert!(matches!(decode_tensor(&bad), Err(Error::Format { offset: 5, .. })));
        assert!(decode_tensor(&good[..good.len() - 1]).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(decode_tensor(&long).is_err());
        assert!(TensorFile::f64(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(TensorFile::f64(vec![1; 9], vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dims in proptest::collection::vec(0usize..4, 0..5),
            wide in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let n: usize = dims.iter().product();
            let mut rng = crate::Rng::new(seed);
            let data = if wide {
                TensorData::F64((0..n).map(|_| f64::from_bits(rng.next_u64())).collect())
            } else {
                TensorData::F32((0..n).map(|_| f32::from_bits(rng.next_u64() as u32)).collect())
            };
            let t = TensorFile::new(dims, data).unwrap();
            let bytes = encode_tensor(&t);
            let back = decode_tensor(&bytes).unwrap();
            prop_assert_eq!(encode_tensor(&back), bytes);
        }
    }
}
