//! Binary netpbm (P5 PGM / P6 PPM) decoding and PGM encoding.
//!
//! This is the only mandatory image codec: zero dependencies and bit-exact,
//! which keeps synthetic corpora reproducible byte for byte.

use std::path::Path;

use crate::features::ImagePatch;
use crate::{Error, Result};

/// Decodes a binary PGM (P5) or PPM (P6) buffer. `maxval` must be 255.
pub fn decode(bytes: &[u8], path: &Path) -> Result<ImagePatch> {
    let mut cursor = 0usize;
    let magic = take_token(bytes, &mut cursor)
        .ok_or_else(|| Error::data(path, "missing netpbm magic"))?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::data(
                path,
                format!(
                    "unsupported netpbm magic {:?} (binary P5/P6 only)",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };
    let width = parse_dim(bytes, &mut cursor, path, "width")?;
    let height = parse_dim(bytes, &mut cursor, path, "height")?;
    let maxval = parse_dim(bytes, &mut cursor, path, "maxval")?;
    if maxval != 255 {
        return Err(Error::data(path, format!("maxval {maxval} unsupported, need 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    cursor += 1;
    let expected = width * height * channels;
    let raster = bytes
        .get(cursor..cursor + expected)
        .ok_or_else(|| {
            Error::data(
                path,
                format!(
                    "raster truncated: need {expected} bytes, have {}",
                    bytes.len().saturating_sub(cursor)
                ),
            )
        })?;
    ImagePatch::new(height, width, channels, raster.to_vec())
}

fn parse_dim(bytes: &[u8], cursor: &mut usize, path: &Path, what: &str) -> Result<usize> {
    let token = take_token(bytes, cursor)
        .ok_or_else(|| Error::data(path, format!("missing {what} in header")))?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .ok_or_else(|| {
            Error::data(
                path,
                format!("bad {what} {:?}", String::from_utf8_lossy(token)),
            )
        })
}

/// Next whitespace-delimited token, skipping `#` comments.
fn take_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if *cursor > start {
        Some(&bytes[start..*cursor])
    } else {
        None
    }
}

/// Encodes a grayscale patch as binary PGM (P5, maxval 255).
pub fn encode_pgm(patch: &ImagePatch) -> Vec<u8> {
    let gray = patch.to_gray();
    let header = format!("P5\n{} {}\n255\n", gray.width(), gray.height());
    let mut out = header.into_bytes();
    out.extend_from_slice(gray.data());
    out
}

pub fn read_file(path: &Path) -> Result<ImagePatch> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write_pgm_file(path: &Path, patch: &ImagePatch) -> Result<()> {
    std::fs::write(path, encode_pgm(patch)).map_err(|e| Error::io(path, e))
}
