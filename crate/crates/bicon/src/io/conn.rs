//! Connectivity-grid files.
//!
//! Layout: magic `CONN1\n`, an ASCII dimension line `<height> <width> 8\n`,
//! then `height * width * 8` little-endian IEEE-754 32-bit floats in
//! `(y, x, channel)` row-major order. All values must be finite and in
//! [0, 1].

use crate::error::{Error, Result};
use crate::grid::{ConnGrid, CHANNELS};
use crate::scalar::Real;

const MAGIC: &[u8] = b"CONN1\n";

pub fn read_conn<T: Real>(bytes: &[u8]) -> Result<ConnGrid<T>> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "expected magic 'CONN1'".into(),
        });
    }
    let header_start = MAGIC.len();
    let line_end = bytes[header_start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|i| header_start + i)
        .ok_or(Error::Format {
            offset: header_start as u64,
            message: "missing dimension line".into(),
        })?;
    let line = std::str::from_utf8(&bytes[header_start..line_end]).map_err(|_| Error::Format {
        offset: header_start as u64,
        message: "dimension line is not ASCII".into(),
    })?;
    let mut parts = line.split_whitespace();
    let mut next_dim = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or(Error::Format {
                offset: header_start as u64,
                message: format!("bad {what} in dimension line '{line}'"),
            })
    };
    let height = next_dim("height")?;
    let width = next_dim("width")?;
    let channels = next_dim("channel count")?;
    if parts.next().is_some() || channels != CHANNELS {
        return Err(Error::Format {
            offset: header_start as u64,
            message: format!("dimension line must be '<height> <width> 8', got '{line}'"),
        });
    }
    if height == 0 || width == 0 {
        return Err(Error::EmptyInput);
    }

    let payload_start = line_end + 1;
    let need = height * width * CHANNELS * 4;
    let have = bytes.len() - payload_start;
    if have != need {
        return Err(Error::Format {
            offset: bytes.len().min(payload_start + need) as u64,
            message: format!("payload must be exactly {need} bytes, have {have}"),
        });
    }

    let mut data = Vec::with_capacity(height * width * CHANNELS);
    for (i, chunk) in bytes[payload_start..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(Error::Format {
                offset: (payload_start + i * 4) as u64,
                message: format!("float #{i} = {v} is not a finite value in [0, 1]"),
            });
        }
        data.push(T::from_f64_c(v as f64));
    }
    ConnGrid::from_vec(height, width, data)
}

pub fn write_conn<T: Real>(grid: &ConnGrid<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + grid.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(format!("{} {} {}\n", grid.height(), grid.width(), CHANNELS).as_bytes());
    for &v in grid.data() {
        let f = v.to_f64().expect("scalar converts") as f32;
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}
