//! Binary NetPBM P5 images.
//!
//! Files are written with the exact header `P5\n<width> <height>\n255\n`
//! followed by `width * height` bytes; masks hold only 0 and 255, maps
//! hold `round(value * 255)`. The reader reports the byte offset of the
//! first violation.

use crate::error::{Error, Result};
use crate::grid::{Map, Mask};
use crate::scalar::Real;

/// Raw decoded P5 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: self.pos as u64,
            message: message.into(),
        })
    }

    fn expect(&mut self, lit: &[u8], what: &str) -> Result<()> {
        if self.bytes.len() < self.pos + lit.len()
            || &self.bytes[self.pos..self.pos + lit.len()] != lit
        {
            return self.fail(format!("expected {what}"));
        }
        self.pos += lit.len();
        Ok(())
    }

    fn skip_whitespace(&mut self) -> Result<()> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail("expected whitespace");
        }
        Ok(())
    }

    fn read_number(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail(format!("expected {what}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Format {
                offset: start as u64,
                message: format!("unreadable {what}"),
            })
    }
}

/// Parse a P5 image, rejecting anything but maxval 255 and exact payload
/// length.
pub fn read_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut c = Cursor { bytes, pos: 0 };
    c.expect(b"P5", "magic 'P5'")?;
    c.skip_whitespace()?;
    let width = c.read_number("width")?;
    c.skip_whitespace()?;
    let height = c.read_number("height")?;
    c.skip_whitespace()?;
    let maxval = c.read_number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format {
            offset: c.pos as u64,
            message: format!("maxval must be 255, got {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the payload.
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return c.fail("expected single whitespace before payload");
    }
    c.pos += 1;
    if width == 0 || height == 0 {
        return Err(Error::EmptyInput);
    }
    let need = width * height;
    let have = bytes.len() - c.pos;
    if have < need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("payload truncated: need {need} bytes, have {have}"),
        });
    }
    if have > need {
        return Err(Error::Format {
            offset: (c.pos + need) as u64,
            message: format!("trailing data: {} extra byte(s)", have - need),
        });
    }
    Ok(Pgm {
        width,
        height,
        data: bytes[c.pos..].to_vec(),
    })
}

/// Serialize a P5 image with the canonical header.
pub fn write_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// Decode a binary mask; every byte must be 0 or 255.
pub fn read_mask(bytes: &[u8]) -> Result<Mask> {
    let pgm = read_pgm(bytes)?;
    let offenders = pgm.data.iter().filter(|&&b| b != 0 && b != 255).count();
    if offenders > 0 {
        return Err(Error::NotBinary { count: offenders });
    }
    Mask::new(
        pgm.height,
        pgm.width,
        pgm.data.iter().map(|&b| (b == 255) as u8).collect(),
    )
}

pub fn mask_bytes(mask: &Mask) -> Vec<u8> {
    let data: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    write_pgm(mask.width(), mask.height(), &data)
}

/// Decode a continuous map: byte / 255.
pub fn read_map<T: Real>(bytes: &[u8]) -> Result<Map<T>> {
    let pgm = read_pgm(bytes)?;
    let inv = T::from_f64_c(1.0 / 255.0);
    Map::from_vec(
        pgm.height,
        pgm.width,
        pgm.data
            .iter()
            .map(|&b| T::from_count(b as usize) * inv)
            .collect(),
    )
}

/// Quantize a [0, 1] map to bytes: `round(value * 255)`.
pub fn map_bytes<T: Real>(map: &Map<T>) -> Vec<u8> {
    let scale = T::from_f64_c(255.0);
    let data: Vec<u8> = map
        .data()
        .iter()
        .map(|&v| {
            (v.max(T::zero()).min(T::one()) * scale)
                .round()
                .to_u8()
                .expect("rounded value fits a byte")
        })
        .collect();
    write_pgm(map.width(), map.height(), &data)
}
