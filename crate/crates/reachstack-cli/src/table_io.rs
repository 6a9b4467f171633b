//! Binary value-table files.
//!
//! Layout (little endian):
//!
//! ```text
//! magic   [u8; 4]  = "HJVT"
//! version u16      = 1
//! dims    u16
//! per dimension: min f64, max f64, node count u32, periodic u8
//! horizon f64
//! precision u8     = 4 (f32 payload) or 8 (f64 payload)
//! payload          node values, row major
//! crc32   u32      over every preceding byte
//! ```
//!
//! The f32 mode halves the file at ~1e-7 relative precision loss; values are
//! widened back to f64 on load.

use std::fs;
use std::path::Path;

use reachstack_core::{GridSpec, ValueTable};

use crate::error::AppError;

const MAGIC: &[u8; 4] = b"HJVT";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    fn flag(self) -> u8 {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

pub fn encode(table: &ValueTable, precision: Precision) -> Vec<u8> {
    let spec = table.spec();
    let dim = spec.dim();
    let payload_bytes = table.data().len() * precision.flag() as usize;
    let mut out = Vec::with_capacity(4 + 2 + 2 + dim * 21 + 9 + payload_bytes + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u16).to_le_bytes());
    for d in 0..dim {
        out.extend_from_slice(&spec.lower()[d].to_le_bytes());
        out.extend_from_slice(&spec.upper()[d].to_le_bytes());
        out.extend_from_slice(&(spec.node_counts()[d] as u32).to_le_bytes());
        out.push(spec.periodic()[d] as u8);
    }
    out.extend_from_slice(&table.horizon_tau().to_le_bytes());
    out.push(precision.flag());
    match precision {
        Precision::F32 => {
            for v in table.data() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        Precision::F64 => {
            for v in table.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<ValueTable, AppError> {
    let corrupt = |msg: &str| AppError::CorruptTable(msg.to_string());
    if bytes.len() < 4 + 2 + 2 + 8 + 1 + 4 {
        return Err(corrupt("file too short"));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(corrupt("CRC mismatch"));
    }

    let mut cur = 0usize;
    let mut take = |n: usize| -> Result<&[u8], AppError> {
        if cur + n > body.len() {
            return Err(corrupt("truncated header"));
        }
        let s = &body[cur..cur + n];
        cur += n;
        Ok(s)
    };

    if take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(corrupt("unsupported version"));
    }
    let dim = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    let mut counts = Vec::with_capacity(dim);
    let mut periodic = Vec::with_capacity(dim);
    for _ in 0..dim {
        lower.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        upper.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        counts.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        periodic.push(take(1)?[0] != 0);
    }
    let horizon = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let flag = take(1)?[0];

    let spec = GridSpec::new(lower, upper, counts, periodic)
        .map_err(|e| corrupt(&format!("invalid grid header: {e}")))?;
    let n = spec.len();
    let data: Vec<f64> = match flag {
        4 => {
            let payload = take(n * 4)?;
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        8 => {
            let payload = take(n * 8)?;
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        _ => return Err(corrupt("unknown precision flag")),
    };
    if cur != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    ValueTable::new(spec, horizon, data).map_err(|e| corrupt(&format!("invalid payload: {e}")))
}

pub fn write_table(path: &Path, table: &ValueTable, precision: Precision) -> Result<(), AppError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, encode(table, precision))?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<ValueTable, AppError> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AppError::MissingDependency(format!("table file not found: {}", path.display()))
        } else {
            AppError::Io(e)
        }
    })?;
    decode(&bytes)
}

/// Resolve a table path: absolute paths and existing relative paths win, a
/// bare relative path falls back to `$REACHSTACK_TABLE_DIR`.
pub fn resolve_table_path(path: &Path) -> std::path::PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os("REACHSTACK_TABLE_DIR") {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}
