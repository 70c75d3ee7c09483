//! Little-endian binary framing shared by the index and model files.
//!
//! Layout: 4 magic bytes, `u32` format version, payload, then a CRC-32 of
//! everything before it. Strings are a `u32` byte length followed by UTF-8.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut e = Encoder { buf: Vec::new() };
        e.buf.extend_from_slice(magic);
        e.u32(version);
        e
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("section sizes fit in u32"));
    }

    pub fn str(&mut self, s: &str) {
        self.len(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let bytes = self.finish();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Checks magic, version and checksum; the decoder then yields the payload.
    pub fn open(bytes: &'a [u8], magic: &'static [u8; 4], version: u32) -> Result<Self> {
        let expected = std::str::from_utf8(magic).unwrap_or("?");
        if bytes.len() >= 4 && &bytes[..4] != magic {
            return Err(Error::BadMagic { expected });
        }
        if bytes.len() < 12 {
            return Err(Error::Checksum);
        }
        let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if found != version {
            return Err(Error::UnsupportedVersion {
                found,
                expected: version,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::Checksum);
        }
        Ok(Decoder { buf: body, pos: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt("unexpected end of payload".into()))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Corrupt("invalid UTF-8 string".into()))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Corrupt(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip_and_corruption() {
        let mut e = Encoder::new(b"TEST", 3);
        e.str("héllo");
        e.f64(-0.125);
        e.u64(u64::MAX);
        let bytes = e.finish();

        let mut d = Decoder::open(&bytes, b"TEST", 3).unwrap();
        assert_eq!(d.str().unwrap(), "héllo");
        assert_eq!(d.f64().unwrap(), -0.125);
        assert_eq!(d.u64().unwrap(), u64::MAX);
        d.finish().unwrap();

        assert!(matches!(Decoder::open(&bytes, b"NOPE", 3), Err(Error::BadMagic { .. })));
        assert!(matches!(
            Decoder::open(&bytes, b"TEST", 4),
            Err(Error::UnsupportedVersion { found: 3, .. })
        ));
        assert!(matches!(
            Decoder::open(&bytes[..bytes.len() - 3], b"TEST", 3),
            Err(Error::Checksum)
        ));
        assert!(matches!(Decoder::open(&bytes[..6], b"TEST", 3), Err(Error::Checksum)));
        let mut flipped = bytes.clone();
        flipped[10] ^= 1;
        assert!(matches!(Decoder::open(&flipped, b"TEST", 3), Err(Error::Checksum)));
    }
}
