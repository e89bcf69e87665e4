//! Image loading and mask serialization.
//!
//! Inputs are PGM (P2 or P5) and 8-bit PNG (grayscale or RGB). RGB is
//! reduced to luminance with the BT.601 weights. Masks are written as binary
//! PGM (P5, maxval 255) with foreground = 255 and background = 0; loading a
//! mask treats any pixel above 127 as foreground so anti-aliased ground
//! truth survives a round trip.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::segment::Mask;

/// A real-valued luminance image, row-major, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel buffer has {} entries, expected {}",
                data.len(),
                width * height
            )));
        }
        if data
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || *v > 255.0)
        {
            return Err(Error::invalid(
                "luminance values must be finite and within [0, 255]",
            ));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(row, col)`; values are clamped to
    /// `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col).clamp(0.0, 255.0));
            }
        }
        GrayImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Loads a PGM or PNG file as luminance. 8-bit grayscale passes through
/// unchanged; RGB converts via `Y = 0.299 R + 0.587 G + 0.114 B`.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    match bytes.first() {
        Some(b'P') => decode_pgm(path, &bytes),
        Some(0x89) => decode_png(path, &bytes),
        _ => Err(Error::format(
            path,
            "unsupported image format (expected PGM or PNG)",
        )),
    }
}

/// Writes a mask as binary PGM: foreground pixels 255, background 0.
pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let payload: Vec<u8> = mask
        .bits()
        .iter()
        .map(|&fg| if fg { 255 } else { 0 })
        .collect();
    write_pgm(&mut w, mask.width(), mask.height(), &payload).map_err(|e| Error::io(path, e))
}

/// Loads a grayscale image as a mask: pixels above 127 are foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = load_image(path)?;
    let bits = img.data().iter().map(|&v| v > 127.0).collect();
    Mask::new(img.width(), img.height(), bits)
}

/// Writes a luminance image as binary PGM, rounding to the nearest integer.
pub fn save_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let payload: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    write_pgm(&mut w, img.width(), img.height(), &payload).map_err(|e| Error::io(path, e))
}

fn write_pgm<W: Write>(
    w: &mut W,
    width: usize,
    height: usize,
    payload: &[u8],
) -> std::io::Result<()> {
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(payload)?;
    w.flush()
}

struct PgmHeader {
    binary: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_pgm_header(path: &Path, bytes: &[u8]) -> Result<PgmHeader> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => {
            return Err(Error::format(
                path,
                "not a PGM file (expected P2 or P5 magic)",
            ))
        }
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and '#' comments between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::format(path, "truncated PGM header")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::format(path, "malformed PGM header"));
        }
        let token = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = token
            .parse()
            .map_err(|_| Error::format(path, "malformed PGM header"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "PGM dimensions must be nonzero"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            path,
            format!("unsupported PGM maxval {maxval} (expected 1..=255)"),
        ));
    }
    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            return Err(Error::format(path, "missing separator before PGM payload"));
        }
        pos += 1;
    }
    Ok(PgmHeader {
        binary,
        width: width as usize,
        height: height as usize,
        maxval,
        data_start: pos,
    })
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let header = parse_pgm_header(path, bytes)?;
    let count = header.width * header.height;
    let mut data = Vec::with_capacity(count);
    if header.binary {
        let payload = bytes
            .get(header.data_start..header.data_start + count)
            .ok_or_else(|| Error::format(path, "truncated PGM payload"))?;
        for &b in payload {
            if u32::from(b) > header.maxval {
                return Err(Error::format(path, "PGM sample exceeds maxval"));
            }
            data.push(f64::from(b));
        }
    } else {
        let text = std::str::from_utf8(&bytes[header.data_start..])
            .map_err(|_| Error::format(path, "non-ASCII data in plain PGM"))?;
        for token in text.split_ascii_whitespace() {
            if data.len() == count {
                return Err(Error::format(path, "extra samples in plain PGM"));
            }
            let v: u32 = token
                .parse()
                .map_err(|_| Error::format(path, "malformed plain PGM sample"))?;
            if v > header.maxval {
                return Err(Error::format(path, "PGM sample exceeds maxval"));
            }
            data.push(f64::from(v));
        }
        if data.len() != count {
            return Err(Error::format(path, "truncated plain PGM payload"));
        }
    }
    GrayImage::new(header.width, header.height, data)
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(path, format!("invalid PNG: {e}")))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, format!("invalid PNG: {e}")))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            path,
            "unsupported PNG bit depth (expected 8)",
        ));
    }
    let width = info.width as usize;
    let height = info.height as usize;
    let pixels = &buf[..info.buffer_size()];
    let data: Vec<f64> = match info.color_type {
        png::ColorType::Grayscale => pixels.iter().map(|&v| f64::from(v)).collect(),
        png::ColorType::Rgb => pixels
            .chunks_exact(3)
            .map(|px| {
                let y =
                    0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
                y.clamp(0.0, 255.0)
            })
            .collect(),
        other => {
            return Err(Error::format(
                path,
                format!("unsupported PNG color type {other:?} (expected 8-bit gray or RGB)"),
            ))
        }
    };
    GrayImage::new(width, height, data)
}
