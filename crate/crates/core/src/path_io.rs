//! Path export: CSV (`t, x_1..x_d`) and a binary column-major float64 dump.
//!
//! Binary layout (little-endian), 32-byte header followed by `(n+1)·d` f64 values,
//! coordinate-major:
//!
//! | offset | size | field                 |
//! |--------|------|-----------------------|
//! | 0      | 4    | magic `FBMP`          |
//! | 4      | 1    | version (u8, = 1)     |
//! | 5      | 1    | d (u8)                |
//! | 6      | 2    | reserved, zero        |
//! | 8      | 4    | n (u32)               |
//! | 12     | 8    | H (f64)               |
//! | 20     | 4    | T (f32)               |
//! | 24     | 8    | seed (u64)            |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fbm::Path;
use crate::params::{ModelParams, TimeGrid};

pub const MAGIC: &[u8; 4] = b"FBMP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 32;

pub fn write_csv<W: Write>(path: &Path, mut out: W) -> Result<()> {
    let d = path.d();
    let mut header = String::from("t");
    for c in 1..=d {
        header.push_str(&format!(",x_{c}"));
    }
    writeln!(out, "{header}")?;
    for k in 0..=path.grid.n {
        write!(out, "{:?}", path.grid.point(k))?;
        for c in 0..d {
            write!(out, ",{:?}", path.coord(c)[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn encode_header(path: &Path) -> Result<[u8; HEADER_LEN]> {
    let d = u8::try_from(path.d())
        .map_err(|_| Error::Format(format!("binary format supports d <= 255, got {}", path.d())))?;
    let n = u32::try_from(path.grid.n)
        .map_err(|_| Error::Format(format!("binary format supports n < 2^32, got {}", path.grid.n)))?;
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(MAGIC);
    h[4] = VERSION;
    h[5] = d;
    h[8..12].copy_from_slice(&n.to_le_bytes());
    h[12..20].copy_from_slice(&path.params.hurst.to_le_bytes());
    h[20..24].copy_from_slice(&(path.params.horizon as f32).to_le_bytes());
    h[24..32].copy_from_slice(&path.seed.to_le_bytes());
    Ok(h)
}

pub fn write_binary<W: Write>(path: &Path, mut out: W) -> Result<()> {
    out.write_all(&encode_header(path)?)?;
    for v in path.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Decoded header fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryHeader {
    pub version: u8,
    pub d: usize,
    pub n: usize,
    pub hurst: f64,
    pub horizon: f32,
    pub seed: u64,
}

pub fn decode_header(h: &[u8; HEADER_LEN]) -> Result<BinaryHeader> {
    if &h[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected FBMP".into()));
    }
    if h[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", h[4])));
    }
    let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().unwrap());
    Ok(BinaryHeader {
        version: h[4],
        d: h[5] as usize,
        n: u32_at(8) as usize,
        hurst: f64::from_le_bytes(h[12..20].try_into().unwrap()),
        horizon: f32::from_le_bytes(h[20..24].try_into().unwrap()),
        seed: u64::from_le_bytes(h[24..32].try_into().unwrap()),
    })
}

/// Reads a binary dump back. `path_index` is not stored and is set to 0.
pub fn read_binary<R: Read>(mut input: R) -> Result<Path> {
    let mut h = [0u8; HEADER_LEN];
    input.read_exact(&mut h)?;
    let header = decode_header(&h)?;
    let params = ModelParams::new(header.d, header.hurst, header.horizon as f64)?;
    let grid = TimeGrid::new(header.n, header.horizon as f64)?;
    let len = header.n + 1;
    let mut columns = Vec::with_capacity(header.d);
    let mut buf = [0u8; 8];
    for _ in 0..header.d {
        let mut col = Vec::with_capacity(len);
        for _ in 0..len {
            input.read_exact(&mut buf)?;
            col.push(f64::from_le_bytes(buf));
        }
        columns.push(col);
    }
    Path::from_columns(params, grid, header.seed, 0, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{generate_path, Method};

    fn sample() -> Path {
        let params = ModelParams::new(2, 0.4, 1.0).unwrap();
        let grid = TimeGrid::new(16, 1.0).unwrap();
        generate_path(params, grid, 3, 0, Method::Fast).unwrap()
    }

    #[test]
    fn binary_layout() {
        let path = sample();
        let mut bytes = Vec::new();
        write_binary(&path, &mut bytes).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 17 * 2 * 8);
        assert_eq!(&bytes[0..4], b"FBMP");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 0.4);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 3);
        // column-major: second coordinate starts after n+1 values
        let second = f64::from_le_bytes(bytes[HEADER_LEN + 17 * 8 + 8..HEADER_LEN + 17 * 8 + 16].try_into().unwrap());
        assert_eq!(second, path.coord(1)[1]);
        let back = read_binary(bytes.as_slice()).unwrap();
        assert_eq!(back.values(), path.values());
    }

    #[test]
    fn bad_magic_rejected() {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(b"NOPE");
        assert!(decode_header(&h).is_err());
    }

    #[test]
    fn csv_shape() {
        let path = sample();
        let mut out = Vec::new();
        write_csv(&path, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2");
        assert_eq!(lines.len(), 18);
        assert_eq!(lines[1], "0.0,0.0,0.0");
        let last: Vec<f64> = lines[17].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last[0], 1.0);
        assert_eq!(last[2], path.coord(1)[16]);
    }
}
