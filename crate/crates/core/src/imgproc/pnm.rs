//! Binary PGM (P5) / PPM (P6) codec, maxval 255 only.

use std::fs;
use std::path::Path;

use super::ImageU8;
use crate::error::{Error, Result};

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("missing {what} in PNM header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageU8> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Format("bad magic, expected P5 or P6".into())),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}, only 255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty image {width}×{height}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let payload = &bytes[r.pos..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "truncated payload: need {need} bytes, got {}",
            payload.len()
        )));
    }
    ImageU8::new(width, height, channels, payload[..need].to_vec())
}

pub fn encode_pnm(img: &ImageU8) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<ImageU8> {
    decode_pnm(&fs::read(path)?)
}

pub fn write_pnm(path: impl AsRef<Path>, img: &ImageU8) -> Result<()> {
    fs::write(path, encode_pnm(img))?;
    Ok(())
}
