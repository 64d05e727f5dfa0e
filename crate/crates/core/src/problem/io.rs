//! Binary instance file.
//!
//! Layout (little-endian): the 6-byte magic `FBCD1\0`, a `u32` header length,
//! a UTF-8 `key=value` header (one pair per line), the `f64` payload
//! (`A` row-major, `b`, then `x_true` when present) and finally the CRC32 of
//! the payload bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GeneratorKind, Instance, InstanceMeta};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 6] = b"FBCD1\0";

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_instance(inst, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let mut r = BufReader::new(File::open(path)?);
    read_instance(&mut r)
}

pub fn write_instance(inst: &Instance, w: &mut impl Write) -> Result<()> {
    let meta = inst.meta();
    let header = format!(
        "n={}\nm={}\ntau={}\nkind={}\nseed={}\nrho={}\ndensity={}\nnoise_var={}\nhas_x_true={}\n",
        inst.n(),
        inst.m(),
        inst.tau(),
        meta.kind,
        meta.seed,
        meta.rho,
        meta.density,
        meta.noise_var,
        u8::from(inst.x_true().is_some()),
    );
    let mut payload = Vec::with_capacity(8 * (inst.m() * inst.n() + inst.m() + inst.n()));
    let values = inst
        .a()
        .to_row_major()
        .into_iter()
        .chain(inst.b().iter().copied())
        .chain(inst.x_true().into_iter().flatten().copied());
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    w.write_all(&payload)?;
    w.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(())
}

pub fn read_instance(r: &mut impl Read) -> Result<Instance> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut pos = MAGIC.len();
    let header_len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;
    let header_bytes = bytes
        .get(pos..pos + header_len)
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    let header = std::str::from_utf8(header_bytes).map_err(|e| Error::Format(format!("header is not UTF-8: {e}")))?;
    pos += header_len;

    let fields = parse_header(header)?;
    let n: usize = field(&fields, "n")?;
    let m: usize = field(&fields, "m")?;
    let tau: f64 = field(&fields, "tau")?;
    let kind: GeneratorKind = field_str(&fields, "kind")?.parse()?;
    let has_x_true: u8 = field(&fields, "has_x_true")?;
    let meta = InstanceMeta {
        kind,
        seed: field(&fields, "seed")?,
        rho: field(&fields, "rho")?,
        density: field(&fields, "density")?,
        noise_var: field(&fields, "noise_var")?,
    };

    let count = m
        .checked_mul(n)
        .and_then(|mn| mn.checked_add(m))
        .and_then(|c| c.checked_add(if has_x_true != 0 { n } else { 0 }))
        .ok_or_else(|| Error::Size(format!("header dimensions overflow: m={m}, n={n}")))?;
    let expected = count * 8 + 4;
    let remaining = bytes.len() - pos;
    if remaining != expected {
        return Err(Error::Size(format!(
            "header declares m={m}, n={n} ({count} values, {expected} bytes) but {remaining} bytes follow"
        )));
    }
    let payload = &bytes[pos..pos + count * 8];
    let stored = u32::from_le_bytes(bytes[pos + count * 8..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let a = DenseMatrix::from_row_major(m, n, &values[..m * n])?;
    let b = values[m * n..m * n + m].to_vec();
    let x_true = (has_x_true != 0).then(|| values[m * n + m..].to_vec());
    Instance::with_parts(a, b, tau, x_true, meta)
}

fn parse_header(header: &str) -> Result<HashMap<&str, &str>> {
    header
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Format(format!("malformed header line '{line}'")))
        })
        .collect()
}

fn field_str<'a>(fields: &HashMap<&str, &'a str>, key: &str) -> Result<&'a str> {
    fields
        .get(key)
        .copied()
        .ok_or_else(|| Error::Format(format!("header is missing '{key}'")))
}

fn field<T: std::str::FromStr>(fields: &HashMap<&str, &str>, key: &str) -> Result<T> {
    let raw = field_str(fields, key)?;
    raw.parse()
        .map_err(|_| Error::Format(format!("header field '{key}' has invalid value '{raw}'")))
}
