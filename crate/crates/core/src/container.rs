//! The "MSL1" binary array container: a 16-byte header (magic `MSL1`,
//! width and height as little-endian `u32`, four reserved zero bytes)
//! followed by `width * height` little-endian `f32` values, row-major.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSL1";
pub const HEADER_LEN: usize = 16;

pub fn encode(width: u32, height: u32, values: &[f64]) -> Vec<u8> {
    debug_assert_eq!(values.len(), width as usize * height as usize);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Decodes a container, returning `(width, height, values)` with values
/// widened to `f64`.
pub fn decode(bytes: &[u8]) -> std::result::Result<(u32, u32, Vec<f64>), String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic".into());
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if bytes[12..16] != [0u8; 4] {
        return Err("reserved header bytes are not zero".into());
    }
    let count = width as usize * height as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * count {
        return Err(format!(
            "expected {} payload bytes for {}x{}, found {}",
            4 * count,
            width,
            height,
            body.len()
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((width, height, values))
}

pub fn write(path: &Path, width: u32, height: u32, values: &[f64]) -> Result<()> {
    fs::write(path, encode(width, height, values)).map_err(Error::io(path))
}

pub fn read(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|reason| Error::Container {
        path: path.to_path_buf(),
        reason,
    })
}

/// Rounds through `f32` so in-memory values equal what the container stores.
pub fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let bytes = encode(3, 2, &[0.0; 6]);
        assert_eq!(&bytes[..4], b"MSL1");
        assert_eq!(&bytes[4..8], &[3, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[0, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 24);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = encode(2, 2, &[1.0; 4]);
        assert!(decode(&bytes[..20]).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).unwrap_err().contains("magic"));
    }

    proptest! {
        #[test]
        fn f32_representable_values_survive(vals in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
            let vals: Vec<f64> = vals.into_iter().map(f64::from).collect();
            let bytes = encode(vals.len() as u32, 1, &vals);
            let (w, h, back) = decode(&bytes).unwrap();
            prop_assert_eq!((w as usize, h), (vals.len(), 1));
            prop_assert_eq!(back, vals);
        }
    }
}
