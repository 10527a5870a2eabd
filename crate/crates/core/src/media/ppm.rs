//! Binary PPM (`P6`, maxval 255).
//!
//! Decoding maps each byte `v` to `v / 255`; encoding quantizes with
//! `round(v * 255)` (half away from zero), so decode/encode is bit-exact for
//! any 8-bit input.

use super::Image;
use crate::error::{Error, Result};

const MAX_PIXELS: usize = 1 << 28;

struct Header {
    width: usize,
    height: usize,
    payload_offset: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Returns the value and the offset where it starts.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| Error::format(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format(start, format!("expected {what}")));
        }
        Ok((value, start))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::format(0, "missing P6 magic"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    match bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        _ => return Err(Error::format(2, "expected whitespace after magic")),
    }
    let (width, _) = cur.number("width")?;
    let (height, _) = cur.number("height")?;
    let (maxval, maxval_offset) = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(maxval_offset, format!("maxval {maxval} unsupported, need 255")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(Error::format(cur.pos, "expected single whitespace before payload")),
    }
    if width == 0 || height == 0 {
        return Err(Error::format(3, format!("empty image {width}x{height}")));
    }
    if width.checked_mul(height).map_or(true, |n| n > MAX_PIXELS) {
        return Err(Error::format(3, format!("image {width}x{height} too large")));
    }
    Ok(Header {
        width,
        height,
        payload_offset: cur.pos + 1,
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let header = parse_header(bytes)?;
    let n = header.width * header.height * 3;
    let payload = &bytes[header.payload_offset..];
    if payload.len() < n {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: need {n} bytes, found {}", payload.len()),
        ));
    }
    let data = payload[..n].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Image::from_raw(header.height, header.width, data))
}

pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}
