//! Little-endian encoding helpers shared by the binary artifact formats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_capacity(n: usize) -> Self {
        Writer {
            buf: Vec::with_capacity(n),
        }
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        fs::write(path, self.buf).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                field,
                format!("file ends after {} bytes", self.buf.len()),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let got = self.take(8, "magic")?;
        if got != expected {
            return Err(Error::format(
                "magic",
                format!(
                    "expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(got)
                ),
            ));
        }
        Ok(())
    }

    pub fn version(&mut self) -> Result<()> {
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::format(
                "version",
                format!("unsupported version {v}, expected {FORMAT_VERSION}"),
            ));
        }
        Ok(())
    }

    pub fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self, field: &'static str) -> Result<u64> {
        let b = self.take(8, field)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    /// Checks that exactly `count` records of `record_size` bytes follow.
    pub fn expect_records(&self, count: u64, record_size: usize) -> Result<()> {
        let have = (self.remaining() / record_size) as u64;
        if have != count || !self.remaining().is_multiple_of(record_size) {
            return Err(Error::LengthMismatch {
                expected: count,
                actual: have,
            });
        }
        Ok(())
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn f32_le(chunk: &[u8]) -> f32 {
    f32::from_le_bytes(chunk.try_into().unwrap())
}

pub(crate) fn u32_le(chunk: &[u8]) -> u32 {
    u32::from_le_bytes(chunk.try_into().unwrap())
}

pub(crate) fn u64_le(chunk: &[u8]) -> u64 {
    u64::from_le_bytes(chunk.try_into().unwrap())
}
