//! Portable graymap (P2 / P5) reading and writing.
//!
//! A stored sample `b` maps to occupancy `b / maxval`. Writers always emit
//! 8-bit images (`maxval = 255`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::silhouette::Silhouette;

/// Decodes raw file bytes into a silhouette. Implement this to attach other
/// image formats to [`load_silhouette_with`].
pub trait ImageDecoder<T> {
    fn decode(&self, bytes: &[u8]) -> std::result::Result<Silhouette<T>, String>;
}

/// The built-in graymap decoder.
#[derive(Clone, Copy, Debug, Default)]
pub struct PgmDecoder;

impl<T: Real> ImageDecoder<T> for PgmDecoder {
    fn decode(&self, bytes: &[u8]) -> std::result::Result<Silhouette<T>, String> {
        decode_pgm(bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    /// `P2`
    Ascii,
    /// `P5`
    Binary,
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> std::result::Result<u32, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected an integer at byte {start}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse::<u32>()
            .map_err(|e| format!("bad integer at byte {start}: {e}"))
    }
}

fn read_header(cur: &mut Cursor<'_>) -> std::result::Result<Header, String> {
    if cur.bytes.len() < 2 {
        return Err("file too short".into());
    }
    let magic = [cur.bytes[0], cur.bytes[1]];
    if magic != *b"P2" && magic != *b"P5" {
        return Err(format!(
            "unsupported magic {:?}, expected P2 or P5",
            String::from_utf8_lossy(&magic)
        ));
    }
    cur.pos = 2;
    let width = cur.token()? as usize;
    let height = cur.token()? as usize;
    let maxval = cur.token()?;
    if width == 0 || height == 0 {
        return Err("image has zero size".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    Ok(Header { magic, width, height, maxval })
}

/// Parses a P2 or P5 graymap.
pub fn decode_pgm<T: Real>(bytes: &[u8]) -> std::result::Result<Silhouette<T>, String> {
    let mut cur = Cursor { bytes, pos: 0 };
    let header = read_header(&mut cur)?;
    let n = header.width * header.height;
    let mut samples = Vec::with_capacity(n);
    if header.magic == *b"P2" {
        for _ in 0..n {
            let v = cur.token()?;
            if v > header.maxval {
                return Err(format!("sample {v} exceeds maxval {}", header.maxval));
            }
            samples.push(v);
        }
    } else {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err("missing whitespace after header".into());
        }
        let raster = &bytes[cur.pos + 1..];
        let wide = header.maxval > 255;
        let need = if wide { 2 * n } else { n };
        if raster.len() < need {
            return Err(format!("raster truncated: {} of {need} bytes", raster.len()));
        }
        if wide {
            samples.extend(raster[..need].chunks_exact(2).map(|c| u32::from(c[0]) << 8 | u32::from(c[1])));
        } else {
            samples.extend(raster[..n].iter().map(|b| u32::from(*b)));
        }
        if let Some(v) = samples.iter().find(|v| **v > header.maxval) {
            return Err(format!("sample {v} exceeds maxval {}", header.maxval));
        }
    }
    let scale = T::from_u32(header.maxval).unwrap();
    let values = samples
        .into_iter()
        .map(|v| T::from_u32(v).unwrap() / scale)
        .collect();
    Silhouette::new(header.width, header.height, values).map_err(|e| e.to_string())
}

fn quantize<T: Real>(v: T) -> u8 {
    (v * T::lit(255.0)).round().to_u8().unwrap_or(255)
}

/// Encodes as an 8-bit graymap.
pub fn encode_pgm<T: Real>(s: &Silhouette<T>, encoding: PgmEncoding) -> Vec<u8> {
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", s.width(), s.height()).into_bytes();
    match encoding {
        PgmEncoding::Binary => out.extend(s.values().iter().map(|v| quantize(*v))),
        PgmEncoding::Ascii => {
            for row in s.values().chunks(s.width()) {
                let line: Vec<String> = row.iter().map(|v| quantize(*v).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn load_silhouette<T: Real>(path: &Path) -> Result<Silhouette<T>> {
    load_silhouette_with(path, &PgmDecoder)
}

pub fn load_silhouette_with<T: Real>(path: &Path, decoder: &dyn ImageDecoder<T>) -> Result<Silhouette<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decoder.decode(&bytes).map_err(|m| Error::format(path, m))
}

pub fn save_silhouette<T: Real>(path: &Path, s: &Silhouette<T>, encoding: PgmEncoding) -> Result<()> {
    fs::write(path, encode_pgm(s, encoding)).map_err(|e| Error::io(path, e))
}
