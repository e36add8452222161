//! Little-endian binary container shared by every on-disk artifact.
//!
//! All binary files in the pipeline follow one scheme: a 4-byte ASCII
//! magic, a `u16` format version, then a format-specific payload. All
//! multi-byte integers are little-endian; all tensors are packed
//! little-endian `f64`, row-major, with dimensions stated in the
//! header. [`ByteWriter`] and [`ByteReader`] are the only primitives
//! formats are built from, so endianness and bounds checking live in
//! one place.

use crate::error::{Error, Result};

/// Growable little-endian byte sink.
#[derive(Debug, Default, Clone)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    /// Empty writer.
    pub fn new() -> Self {
        Self::default()
    }

    /// Writer starting with a magic and format version header.
    pub fn with_header(magic: [u8; 4], version: u16) -> Self {
        let mut w = Self::new();
        w.bytes(&magic);
        w.u16(version);
        w
    }

    /// Consumes the writer, yielding the accumulated bytes.
    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    /// Appends raw bytes.
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// Appends a `u8`.
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    /// Appends a little-endian `u16`.
    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    /// Appends a little-endian `u32`.
    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    /// Appends a little-endian `u64`.
    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    /// Appends a little-endian IEEE-754 `f64`.
    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    /// Appends a length-prefixed (`u32`) UTF-8 string.
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    /// Appends a packed `f64` slice (no length prefix).
    pub fn f64_slice(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
}

/// Bounds-checked little-endian byte reader.
#[derive(Debug)]
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    /// Reader over `data`; `what` names the format in error messages.
    pub fn new(data: &'a [u8], what: &'static str) -> Self {
        ByteReader { data, pos: 0, what }
    }

    /// Reads and validates the magic/version header, returning the
    /// version. Errors if the magic differs or the version is newer
    /// than `max_version`.
    pub fn header(&mut self, magic: [u8; 4], max_version: u16) -> Result<u16> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::format(format!(
                "{}: bad magic {:02x?}, expected {:02x?}",
                self.what, got, magic
            )));
        }
        let version = self.u16()?;
        if version == 0 || version > max_version {
            return Err(Error::format(format!(
                "{}: unsupported format version {} (supported: 1..={})",
                self.what, version, max_version
            )));
        }
        Ok(version)
    }

    /// Reads and validates a bare 4-byte magic, for formats that carry
    /// no version field.
    pub fn magic_only(&mut self, magic: [u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::format(format!(
                "{}: bad magic {:02x?}, expected {:02x?}",
                self.what, got, magic
            )));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::format(format!(
                "{}: truncated at byte {} (needed {} more)",
                self.what, self.pos, n
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Reads a `u8`.
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    /// Reads a little-endian `u16`.
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    /// Reads a little-endian `u32`.
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Reads a little-endian `u64`.
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads a little-endian `f64`.
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads a `u32` length then that many bytes as UTF-8.
    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::format(format!("{}: invalid UTF-8 string", self.what)))
    }

    /// Reads `n` packed `f64`s.
    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    /// Errors unless every byte has been consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(format!(
                "{}: {} trailing bytes after payload",
                self.what,
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }

    /// A `u32` length field validated against a sanity cap, for
    /// pre-allocation without trusting hostile headers.
    pub fn len_capped(&mut self, cap: usize, field: &str) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > cap {
            return Err(Error::format(format!(
                "{}: {} = {} exceeds cap {}",
                self.what, field, n, cap
            )));
        }
        Ok(n)
    }
}

/// FNV-1a 64-bit hash; used to fingerprint serialized artifacts.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
