//! Self-describing binary container for parameter checkpoints and other
//! named payloads: a version header followed by (name, shape, dtype, data)
//! entries.

use super::mat::Mat;
use super::params::ParamStore;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"SNCK";
const VERSION: u32 = 1;

const DTYPE_F64: u8 = 0;
const DTYPE_TEXT: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Matrix(Mat),
    Text(String),
}

pub fn write_container(path: &Path, entries: &[(String, Entry)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, entry) in entries {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        match entry {
            Entry::Matrix(m) => {
                w.write_all(&[DTYPE_F64])?;
                w.write_all(&(m.rows as u32).to_le_bytes())?;
                w.write_all(&(m.cols as u32).to_le_bytes())?;
                for v in &m.data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            Entry::Text(s) => {
                w.write_all(&[DTYPE_TEXT])?;
                let bytes = s.as_bytes();
                w.write_all(&(bytes.len() as u32).to_le_bytes())?;
                w.write_all(bytes)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Vec<(String, Entry)>> {
    let mut r = BufReader::new(
        File::open(path).map_err(|_| Error::MissingCheckpoint(path.display().to_string()))?,
    );
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::CheckpointCorrupt("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::CheckpointCorrupt("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::CheckpointCorrupt(format!(
            "unsupported version {version}"
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| Error::CheckpointCorrupt("truncated name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::CheckpointCorrupt("non-utf8 name".into()))?;
        let mut dtype = [0u8; 1];
        r.read_exact(&mut dtype)
            .map_err(|_| Error::CheckpointCorrupt("truncated dtype".into()))?;
        match dtype[0] {
            DTYPE_F64 => {
                let rows = read_u32(&mut r)? as usize;
                let cols = read_u32(&mut r)? as usize;
                let mut data = Vec::with_capacity(rows * cols);
                let mut buf = [0u8; 8];
                for _ in 0..rows * cols {
                    r.read_exact(&mut buf)
                        .map_err(|_| Error::CheckpointCorrupt("truncated data".into()))?;
                    data.push(f64::from_le_bytes(buf));
                }
                entries.push((name, Entry::Matrix(Mat::from_vec(rows, cols, data))));
            }
            DTYPE_TEXT => {
                let len = read_u32(&mut r)? as usize;
                let mut bytes = vec![0u8; len];
                r.read_exact(&mut bytes)
                    .map_err(|_| Error::CheckpointCorrupt("truncated text".into()))?;
                let s = String::from_utf8(bytes)
                    .map_err(|_| Error::CheckpointCorrupt("non-utf8 text".into()))?;
                entries.push((name, Entry::Text(s)));
            }
            other => {
                return Err(Error::CheckpointCorrupt(format!("unknown dtype {other}")));
            }
        }
    }
    Ok(entries)
}

pub fn save_params(path: &Path, store: &ParamStore) -> Result<()> {
    let entries: Vec<(String, Entry)> = store
        .snapshot()
        .into_iter()
        .map(|(name, value)| (name, Entry::Matrix(value)))
        .collect();
    write_container(path, &entries)
}

pub fn load_params(path: &Path) -> Result<ParamStore> {
    let entries = read_container(path)?;
    let mats = entries
        .into_iter()
        .map(|(name, entry)| match entry {
            Entry::Matrix(m) => Ok((name, m)),
            Entry::Text(_) => Err(Error::CheckpointCorrupt(
                "text entry where matrix expected".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamStore::from_entries(mats))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::CheckpointCorrupt("truncated u32".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)
        .map_err(|_| Error::CheckpointCorrupt("truncated u16".into()))?;
    Ok(u16::from_le_bytes(buf))
}
