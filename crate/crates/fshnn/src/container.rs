//! The `FSH1` container: a flat list of named little-endian `f64` arrays.
//!
//! Layout: magic `FSH1`, `u32` record count, then per record a kind byte,
//! `u32` name length and UTF-8 name, a dtype byte (1 = `f64` LE), `u32`
//! rank, `u64` dims, and `8 · Π dims` payload bytes. All integers are
//! little-endian.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"FSH1";
pub const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Dataset = 1,
    Params = 2,
    Metrics = 3,
}

impl RecordKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::Dataset),
            2 => Some(Self::Params),
            3 => Some(Self::Metrics),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub kind: RecordKind,
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

impl Record {
    pub fn new(kind: RecordKind, name: impl Into<String>, dims: &[usize], data: Vec<f64>) -> Self {
        Self { kind, name: name.into(), dims: dims.iter().map(|&d| d as u64).collect(), data }
    }

    fn expected_len(&self) -> Option<u64> {
        self.dims.iter().try_fold(1u64, |a, &d| a.checked_mul(d))
    }
}

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad magic: not an FSH1 container")]
    BadMagic,
    #[error("truncated payload in record {record}")]
    Truncated { record: usize },
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("unknown record kind {0}")]
    UnknownKind(u8),
    #[error("record {name}: dims give {expected} values, payload has {got}")]
    DimMismatch { name: String, expected: u64, got: usize },
    #[error("record name is not UTF-8")]
    BadName,
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("missing record {0}")]
    Missing(String),
}

impl ContainerError {
    /// Stable numeric code for each failure class.
    pub fn code(&self) -> u8 {
        match self {
            Self::Io { .. } => 1,
            Self::BadMagic => 2,
            Self::Truncated { .. } => 3,
            Self::UnknownDtype(_) => 4,
            Self::UnknownKind(_) => 5,
            Self::DimMismatch { .. } => 6,
            Self::BadName => 7,
            Self::TrailingBytes(_) => 8,
            Self::Missing(_) => 9,
        }
    }
}

pub fn encode(records: &[Record]) -> Result<Vec<u8>, ContainerError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        let expected = r.expected_len().unwrap_or(u64::MAX);
        if expected != r.data.len() as u64 {
            return Err(ContainerError::DimMismatch { name: r.name.clone(), expected, got: r.data.len() });
        }
        out.push(r.kind as u8);
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(DTYPE_F64);
        out.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
        for d in &r.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    record: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(ContainerError::Truncated { record: self.record })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ContainerError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Record>, ContainerError> {
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut r = Reader { buf, pos: 4, record: 0 };
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        r.record = i;
        let kind_byte = r.u8()?;
        let kind = RecordKind::from_byte(kind_byte).ok_or(ContainerError::UnknownKind(kind_byte))?;
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| ContainerError::BadName)?.to_string();
        let dtype = r.u8()?;
        if dtype != DTYPE_F64 {
            return Err(ContainerError::UnknownDtype(dtype));
        }
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(64));
        for _ in 0..rank {
            dims.push(r.u64()?);
        }
        let n = dims
            .iter()
            .try_fold(1u64, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .and_then(|b| usize::try_from(b).ok())
            .ok_or(ContainerError::Truncated { record: i })?;
        let data = r.take(n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        records.push(Record { kind, name, dims, data });
    }
    if r.pos != buf.len() {
        return Err(ContainerError::TrailingBytes(buf.len() - r.pos));
    }
    Ok(records)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ContainerError> {
    let io = |source| ContainerError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_container(path: &Path, records: &[Record]) -> Result<(), ContainerError> {
    write_atomic(path, &encode(records)?)
}

pub fn read_container(path: &Path) -> Result<Vec<Record>, ContainerError> {
    let bytes = std::fs::read(path).map_err(|source| ContainerError::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}

/// Finds a record by name.
pub fn find<'a>(records: &'a [Record], name: &str) -> Result<&'a Record, ContainerError> {
    records.iter().find(|r| r.name == name).ok_or_else(|| ContainerError::Missing(name.to_string()))
}
