//! The RFLD1 field dump: one ASCII header line, then little-endian f64 samples
//! in row-major node order with tensor components innermost.
//!
//! ```text
//! RFLD1 rank=2 dims=16,16,9 extents=6.283185307179586,6.283185307179586,1 periodic=1,1,0
//! ```
//!
//! A trailing `dim=<d>` key is written only when the tensor dimension differs
//! from the grid dimension (normals of hypersurfaces, for instance).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{Field, Grid};
use crate::error::{Error, Result};

const MAGIC: &str = "RFLD1";

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn header(field: &Field) -> String {
    let g = field.grid();
    let per: Vec<u8> = g.periodic().iter().map(|&p| p as u8).collect();
    let mut h = format!(
        "{MAGIC} rank={} dims={} extents={} periodic={}",
        field.rank(),
        join(g.dims()),
        join(g.extents()),
        join(&per)
    );
    if field.rank() > 0 && field.dim() != g.ndim() {
        h.push_str(&format!(" dim={}", field.dim()));
    }
    h
}

pub fn write_to(field: &Field, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", header(field))?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn to_bytes(field: &Field) -> Vec<u8> {
    let mut out = Vec::new();
    write_to(field, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_file(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_to(field, std::io::BufWriter::new(f))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|_| Error::Format(format!("bad {key} entry '{x}'")))).collect()
}

pub fn from_bytes(bytes: &[u8]) -> Result<Field> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Format("missing RFLD1 header line".into()))?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut parts = head.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format("not an RFLD1 stream".into()));
    }
    let (mut rank, mut dims, mut extents, mut periodic, mut dim) = (None, None, None, None, None);
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Format(format!("bad header token '{kv}'")))?;
        match k {
            "rank" => rank = Some(v.parse::<usize>().map_err(|_| Error::Format("bad rank".into()))?),
            "dims" => dims = Some(parse_list::<usize>(v, k)?),
            "extents" => extents = Some(parse_list::<f64>(v, k)?),
            "periodic" => periodic = Some(parse_list::<u8>(v, k)?.into_iter().map(|p| p != 0).collect::<Vec<bool>>()),
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| Error::Format("bad dim".into()))?),
            _ => return Err(Error::Format(format!("unknown header key '{k}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks '{k}'"));
    let grid = Grid::new(
        &dims.ok_or_else(|| missing("dims"))?,
        &extents.ok_or_else(|| missing("extents"))?,
        &periodic.ok_or_else(|| missing("periodic"))?,
    )?;
    let rank = rank.ok_or_else(|| missing("rank"))?;
    let dim = dim.unwrap_or(grid.ndim());
    let body = &bytes[nl + 1..];
    if body.len() % 8 != 0 {
        return Err(Error::Format("payload is not a whole number of f64 samples".into()));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Field::from_parts(Arc::new(grid), rank, dim, values)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let g = Grid::new(&[4, 5], &[std::f64::consts::TAU, 1.0], &[true, false]).unwrap();
        let f = Field::scalar_from_fn(&g, |x| x[0].sin() * x[1] + 1.0 / 3.0);
        let bytes = to_bytes(&f);
        assert!(bytes.starts_with(b"RFLD1 rank=0 dims=4,5 extents=6.283185307179586,1 periodic=1,0\n"));
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_bytes(b"RFLD2 rank=0\n").is_err());
        assert!(from_bytes(b"RFLD1 rank=0 dims=4 extents=1 periodic=1\n\x00\x00").is_err());
    }
}
