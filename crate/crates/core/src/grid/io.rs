//! Field and mask files.
//!
//! Binary field container, all integers and floats little-endian:
//!
//! ```text
//! magic   b"TVFD"
//! u32     version (1)
//! u32     m (number of axes)
//! u32 × m dims
//! f64     spacing h
//! u8      boundary (0 = neumann_reflect, 1 = periodic)
//! u8      mask flag (0 / 1)
//! u32     N (ambient dimension)
//! u32     byte length of the manifold identifier, then its UTF-8 bytes
//! u8 × Q  mask (only if the flag is set), 1 = inside
//! f64 × Q·N  values, row-major cells, components contiguous
//! ```
//!
//! Mask text files start with a `dims a b ...` line and a `spacing h` line,
//! followed by one line of `0`/`1` characters per run of the last axis.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Manifold;
use crate::grid::{Boundary, Field, GridDomain};

const MAGIC: &[u8; 4] = b"TVFD";
const VERSION: u32 = 1;

pub fn encode_field(field: &Field) -> Vec<u8> {
    let d = field.domain();
    let id = field.manifold().to_string();
    let mut buf = Vec::with_capacity(64 + field.values().len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(d.dim() as u32).to_le_bytes());
    for &n in d.dims() {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    buf.extend_from_slice(&d.spacing().to_le_bytes());
    buf.push(match d.boundary() {
        Boundary::NeumannReflect => 0,
        Boundary::Periodic => 1,
    });
    buf.push(d.mask().is_some() as u8);
    buf.extend_from_slice(&(field.n_comp() as u32).to_le_bytes());
    buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
    buf.extend_from_slice(id.as_bytes());
    if let Some(mask) = d.mask() {
        buf.extend(mask.iter().map(|&b| b as u8));
    }
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_field(bytes: &[u8]) -> std::result::Result<Field, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let m = c.u32()? as usize;
    if !(1..=3).contains(&m) {
        return Err(format!("bad axis count {m}"));
    }
    let dims = (0..m)
        .map(|_| c.u32().map(|v| v as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let h = c.f64()?;
    let boundary = match c.u8()? {
        0 => Boundary::NeumannReflect,
        1 => Boundary::Periodic,
        b => return Err(format!("bad boundary code {b}")),
    };
    let has_mask = c.u8()? != 0;
    let n = c.u32()? as usize;
    let id_len = c.u32()? as usize;
    let id = std::str::from_utf8(c.take(id_len)?).map_err(|e| e.to_string())?;
    let manifold: Manifold = id.parse().map_err(|e: Error| e.to_string())?;
    if manifold.ambient_dim() != n {
        return Err(format!("N = {n} does not match manifold {id}"));
    }
    let cells: usize = dims.iter().product();
    let domain = if has_mask {
        let mask = c.take(cells)?.iter().map(|&b| b != 0).collect();
        GridDomain::with_mask(&dims, h, boundary, mask)
    } else {
        GridDomain::new(&dims, h, boundary)
    }
    .map_err(|e| e.to_string())?;
    let values = (0..cells * n)
        .map(|_| c.f64())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if c.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    Field::new(Arc::new(domain), Arc::new(manifold), values).map_err(|e| e.to_string())
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    std::fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_field(&bytes).map_err(|reason| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    })
}

/// CSV of a one-dimensional field: `index,x,u0,...,u{N-1}`.
pub fn write_field_csv<W: Write>(mut w: W, field: &Field) -> std::io::Result<()> {
    let d = field.domain();
    assert_eq!(d.dim(), 1, "CSV export is for one-dimensional fields");
    let n = field.n_comp();
    write!(w, "index,x")?;
    for c in 0..n {
        write!(w, ",u{c}")?;
    }
    writeln!(w)?;
    for i in 0..d.num_cells() {
        write!(w, "{i},{}", d.center(i)[0])?;
        for v in field.value(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_mask(path: &Path, dims: &[usize], spacing: f64, mask: &[bool]) -> Result<()> {
    let mut s = String::new();
    s.push_str("dims");
    for n in dims {
        s.push_str(&format!(" {n}"));
    }
    s.push_str(&format!("\nspacing {spacing}\n"));
    let last = *dims.last().unwrap();
    for row in mask.chunks(last) {
        s.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a mask file, returning `(dims, spacing, mask)`.
pub fn read_mask(path: &Path) -> Result<(Vec<usize>, f64, Vec<bool>)> {
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<Option<String>> {
        lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))
    };
    let dims_line = next()?.ok_or_else(|| malformed("empty file".into()))?;
    let mut parts = dims_line.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(malformed("expected `dims` header".into()));
    }
    let dims = parts
        .map(|t| t.parse::<usize>().map_err(|e| malformed(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let sp_line = next()?.ok_or_else(|| malformed("missing spacing".into()))?;
    let spacing = sp_line
        .strip_prefix("spacing")
        .and_then(|t| t.trim().parse::<f64>().ok())
        .ok_or_else(|| malformed("expected `spacing h`".into()))?;
    let mut mask = Vec::with_capacity(dims.iter().product());
    while let Some(line) = next()? {
        for ch in line.trim().chars() {
            match ch {
                '1' => mask.push(true),
                '0' => mask.push(false),
                other => return Err(malformed(format!("unexpected character {other:?}"))),
            }
        }
    }
    if mask.len() != dims.iter().product::<usize>() {
        return Err(malformed(format!(
            "{} mask entries for dims {dims:?}",
            mask.len()
        )));
    }
    Ok((dims, spacing, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_roundtrip(nx in 1usize..6, ny in 1usize..6, h in 0.01f64..2.0, seed in 0u64..1000) {
            let d = Arc::new(GridDomain::new(&[nx, ny], h, Boundary::Periodic).unwrap());
            let m = Arc::new(Manifold::sphere(3, 1.0));
            let u = Field::from_fn(d, m, |x| {
                let s = seed as f64;
                vec![(x[0] + s).cos(), (x[1] * s).sin(), 0.5]
            }).unwrap();
            let back = decode_field(&encode_field(&u)).unwrap();
            prop_assert_eq!(back, u);
        }
    }

    #[test]
    fn masked_roundtrip_and_corruption() {
        let mask = vec![true, true, false, true, true, true];
        let d = Arc::new(GridDomain::with_mask(&[2, 3], 0.5, Boundary::NeumannReflect, mask).unwrap());
        let u = Field::constant(d, Arc::new(Manifold::cylinder(1)), &[1.0, 0.0, 2.0]).unwrap();
        let bytes = encode_field(&u);
        assert_eq!(decode_field(&bytes).unwrap(), u);
        assert!(decode_field(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
    }

    #[test]
    fn mask_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let mask = vec![false, true, true, true, true, false];
        write_mask(&p, &[2, 3], 0.25, &mask).unwrap();
        let (dims, h, back) = read_mask(&p).unwrap();
        assert_eq!((dims, h, back), (vec![2, 3], 0.25, mask));
    }
}
