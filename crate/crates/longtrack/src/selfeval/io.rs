//! Model serialization: a JSON header line with the architecture, followed
//! by the flat parameter vector as little-endian f64.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::selfeval::net::{Arch, SelfEvalNet};
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    arch: Arch,
    param_count: usize,
}

pub fn save_model(path: &Path, net: &SelfEvalNet) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        arch: *net.arch(),
        param_count: net.params().len(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::data(path, e.to_string()))?;
    out.push(b'\n');
    for v in net.params() {
        out.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SelfEvalNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::data(path, "missing header line"))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::data(path, format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::data(
            path,
            format!("unsupported model version {}", header.version),
        ));
    }
    let payload = &bytes[newline + 1..];
    if payload.len() != header.param_count * 8 {
        return Err(Error::data(
            path,
            format!(
                "parameter payload is {} bytes, expected {}",
                payload.len(),
                header.param_count * 8
            ),
        ));
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SelfEvalNet::from_params(header.arch, params).map_err(|e| match e {
        Error::Shape(m) | Error::NonFinite(m) => Error::data(path, m),
        other => other,
    })
}
