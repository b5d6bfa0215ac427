//! Little-endian binary artifacts.
//!
//! `DBNA` holds an abstraction: magic, `u32` version, `u32` n, `u64` bin
//! counts, `f64` edge arrays, parent lists as a `u32` length followed by
//! `u32` indices, then every table in its stored layout.
//!
//! `DBNV` holds a value table: magic, `u32` version, `u32` n, `u64` counts,
//! then `f64` values row-major.

use std::io::{Read, Write};

use crate::abstraction::{Cpd, DiscreteDbn};
use crate::checker::ValueTable;
use crate::partition::{GridPartition, Partition1d};
use crate::{Error, Result};

pub const ABSTRACTION_MAGIC: &[u8; 4] = b"DBNA";
pub const VALUES_MAGIC: &[u8; 4] = b"DBNV";
pub const FORMAT_VERSION: u32 = 1;

/// Refuses headers announcing more than this many `f64`s.
const MAX_PAYLOAD: u64 = 1 << 34;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    Ok(w.write_all(&buf)?)
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, len: u64) -> Result<Vec<f64>> {
    if len > MAX_PAYLOAD {
        return Err(Error::Format(format!("header announces {len} values")));
    }
    let mut buf = vec![0u8; len as usize * 8];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn header(r: &mut impl Read, magic: &[u8; 4]) -> Result<usize> {
    let mut m = [0; 4];
    r.read_exact(&mut m).map_err(truncated)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "expected magic {}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    let version = get_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(get_u32(r)? as usize)
}

fn get_counts(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    (0..n)
        .map(|_| {
            let c = get_u64(r)?;
            if c == 0 || c > MAX_PAYLOAD {
                return Err(Error::Format(format!("invalid bin count {c}")));
            }
            Ok(c as usize)
        })
        .collect()
}

fn expect_end(r: &mut impl Read) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after the payload".into())),
    }
}

pub fn write_dbn(w: &mut impl Write, dbn: &DiscreteDbn) -> Result<()> {
    w.write_all(ABSTRACTION_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u32(w, dbn.dim() as u32)?;
    for c in dbn.counts() {
        put_u64(w, c as u64)?;
    }
    for p in dbn.partition().dims() {
        put_f64s(w, p.edges())?;
    }
    for ps in dbn.parent_sets() {
        put_u32(w, ps.len() as u32)?;
        for &i in ps {
            put_u32(w, i as u32)?;
        }
    }
    for c in dbn.cpds() {
        put_f64s(w, c.table())?;
    }
    Ok(())
}

pub fn read_dbn(r: &mut impl Read) -> Result<DiscreteDbn> {
    let n = header(r, ABSTRACTION_MAGIC)?;
    if n == 0 || n > 4096 {
        return Err(Error::Format(format!("implausible dimension {n}")));
    }
    let counts = get_counts(r, n)?;
    let dims = counts
        .iter()
        .map(|&c| Partition1d::from_edges(get_f64s(r, c as u64 + 1)?))
        .collect::<Result<Vec<_>>>()?;
    let partition = GridPartition::new(dims);
    let mut parents = Vec::with_capacity(n);
    for _ in 0..n {
        let k = get_u32(r)? as usize;
        if k > n {
            return Err(Error::Format(format!("parent list of length {k} for {n} dimensions")));
        }
        let ps = (0..k)
            .map(|_| {
                let i = get_u32(r)? as usize;
                if i >= n {
                    return Err(Error::Format(format!("parent index {i} out of range")));
                }
                Ok(i)
            })
            .collect::<Result<Vec<_>>>()?;
        parents.push(ps);
    }
    let mut cpds = Vec::with_capacity(n);
    for (j, ps) in parents.into_iter().enumerate() {
        let pb: Vec<usize> = ps.iter().map(|&i| counts[i]).collect();
        let len = pb
            .iter()
            .try_fold(counts[j] as u64 + 1, |acc, &b| acc.checked_mul(b as u64))
            .ok_or_else(|| Error::Format("table size overflows".into()))?;
        let table = get_f64s(r, len)?;
        cpds.push(Cpd::from_parts(j, ps, pb, counts[j], table)?);
    }
    expect_end(r)?;
    DiscreteDbn::from_parts(partition, cpds)
}

pub fn write_values(w: &mut impl Write, v: &ValueTable) -> Result<()> {
    w.write_all(VALUES_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u32(w, v.counts().len() as u32)?;
    for &c in v.counts() {
        put_u64(w, c as u64)?;
    }
    put_f64s(w, v.values())
}

/// Reads a value table; the time index is not stored and comes back as 0.
pub fn read_values(r: &mut impl Read) -> Result<ValueTable> {
    let n = header(r, VALUES_MAGIC)?;
    let counts = get_counts(r, n)?;
    let len = counts
        .iter()
        .try_fold(1u64, |acc, &c| acc.checked_mul(c as u64))
        .ok_or_else(|| Error::Format("table size overflows".into()))?;
    let values = get_f64s(r, len)?;
    expect_end(r)?;
    ValueTable::new(counts, values, 0)
}
