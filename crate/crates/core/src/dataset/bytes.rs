//! Little-endian encode/decode helpers.

use super::DatasetError;

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f32>) {
        for v in vs {
            self.bytes(&v.to_le_bytes());
        }
    }

    pub fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.bytes(&v.to_le_bytes());
        }
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    /// Describes the buffer in truncation errors.
    what: String,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], what: impl Into<String>) -> Self {
        Self {
            buf,
            pos: 0,
            what: what.into(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        if self.remaining() < n {
            return Err(DatasetError::Truncated(format!(
                "{}: needed {n} bytes at offset {}, {} left",
                self.what,
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DatasetError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u32(&mut self) -> Result<u32, DatasetError> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn u64(&mut self) -> Result<u64, DatasetError> {
        self.array().map(u64::from_le_bytes)
    }

    pub fn i32(&mut self) -> Result<i32, DatasetError> {
        self.array().map(i32::from_le_bytes)
    }

    /// Non-negative `i32` count or index.
    pub fn count(&mut self, field: &str) -> Result<usize, DatasetError> {
        let v = self.i32()?;
        usize::try_from(v)
            .map_err(|_| DatasetError::Corrupt(format!("{}: negative {field} {v}", self.what)))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DatasetError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.overflow())?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DatasetError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.overflow())?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }

    fn overflow(&self) -> DatasetError {
        DatasetError::Corrupt(format!("{}: size overflow", self.what))
    }

    pub fn finish(&self) -> Result<(), DatasetError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(DatasetError::Corrupt(format!(
                "{}: {} trailing bytes",
                self.what,
                self.remaining()
            )))
        }
    }
}
