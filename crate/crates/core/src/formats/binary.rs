//! Little-endian helpers shared by the binary formats.

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const LABEL_BYTES: usize = 16;

pub(crate) struct Reader<'a> {
    format: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks the four magic bytes before anything else is read.
    pub fn new(format: &'static str, bytes: &'a [u8]) -> Result<Self> {
        let magic = format.as_bytes();
        if bytes.len() < magic.len() || &bytes[..magic.len()] != magic {
            let found = &bytes[..bytes.len().min(magic.len())];
            return Err(Error::Format(format!(
                "bad magic bytes: expected {format}, found {:?}",
                String::from_utf8_lossy(found)
            )));
        }
        Ok(Self { format, bytes, pos: magic.len() })
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "truncated {} file: needed {len} bytes at offset {}, {} remain",
                self.format,
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn version(&mut self, supported: u16) -> Result<()> {
        let v = self.u16()?;
        if v != supported {
            return Err(Error::Format(format!(
                "unsupported {} version {v} (expected {supported})",
                self.format
            )));
        }
        Ok(())
    }

    /// `count` values, refusing sizes the remaining bytes cannot hold.
    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = self.take(count.checked_mul(4).ok_or_else(|| self.overflow())?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| self.overflow())?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn label(&mut self) -> Result<String> {
        let raw = self.take(LABEL_BYTES)?;
        let end = raw.iter().position(|&b| b == 0).unwrap_or(LABEL_BYTES);
        if raw[end..].iter().any(|&b| b != 0) || !raw[..end].is_ascii() {
            return Err(Error::Format(format!("malformed {} channel label", self.format)));
        }
        Ok(String::from_utf8(raw[..end].to_vec()).expect("ascii"))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {} payload",
                self.bytes.len() - self.pos,
                self.format
            )));
        }
        Ok(())
    }

    fn overflow(&self) -> Error {
        Error::Format(format!("{} header sizes overflow", self.format))
    }
}

pub(crate) fn dim(v: u32) -> usize {
    v as usize
}

pub(crate) fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}
pub(crate) fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}
pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}
pub(crate) fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}
pub(crate) fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    out.reserve(vs.len() * 4);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn put_label(out: &mut Vec<u8>, label: &str) -> Result<()> {
    if label.len() > LABEL_BYTES || !label.is_ascii() {
        return Err(Error::Format(format!("label {label:?} is not ASCII of at most {LABEL_BYTES} bytes")));
    }
    out.extend_from_slice(label.as_bytes());
    out.extend(std::iter::repeat_n(0u8, LABEL_BYTES - label.len()));
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}
