//! 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

pub const PGM_MAX: u16 = u16::MAX;

fn image_hw(op: &'static str, image: &Tensor) -> Result<(usize, usize)> {
    image.expect_dtype(op, DType::Real)?;
    match *image.shape() {
        [h, w] => Ok((h, w)),
        ref s => Err(Error::invalid(op, format!("expected an H x W image, got {s:?}"))),
    }
}

/// Encodes `image` with `[0, range]` mapped linearly onto `[0, 65535]`;
/// values outside the interval are clamped. `range` defaults to the image
/// maximum (1 for an all-zero image).
pub fn pgm_bytes(image: &Tensor, range: Option<f64>) -> Result<Vec<u8>> {
    let (h, w) = image_hw("export_pgm", image)?;
    if let Some(v) = image.data().iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "export_pgm",
            format!("image contains non-finite value {v}"),
        ));
    }
    let range = match range {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => {
            return Err(Error::invalid(
                "export_pgm",
                format!("range must be finite and > 0, got {r}"),
            ))
        }
        None => match image.data().iter().cloned().fold(0.0, f64::max) {
            m if m > 0.0 => m,
            _ => 1.0,
        },
    };
    let mut out = format!("P5\n{w} {h}\n{PGM_MAX}\n").into_bytes();
    out.reserve(2 * h * w);
    for &v in image.data() {
        let q = (v / range * PGM_MAX as f64).round().clamp(0.0, PGM_MAX as f64) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn export_pgm(image: &Tensor, path: &Path, range: Option<f64>) -> Result<()> {
    std::fs::write(path, pgm_bytes(image, range)?).map_err(|e| Error::io(path, e))
}

/// Decoded PGM: raw samples and the header maxval.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    /// Samples mapped back from `[0, maxval]` to `[0, range]`.
    pub fn to_image(&self, range: f64) -> Result<Tensor> {
        let scale = range / self.maxval as f64;
        Tensor::real(
            &[self.height, self.width],
            self.samples.iter().map(|&s| s as f64 * scale).collect(),
        )
    }
}

/// Parses a binary PGM, 8- or 16-bit, with `#` comments in the header.
pub fn parse_pgm(bytes: &[u8], origin: &Path) -> Result<Pgm> {
    let bad = |msg: &str| Error::format(origin, msg.to_string());
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("PGM header is not ASCII"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (expected P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval == 0 || maxval > PGM_MAX as usize {
        return Err(bad("PGM maxval out of range"));
    }
    pos += 1; // single whitespace byte after maxval
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let n = width * height;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != n * bytes_per {
        return Err(bad("PGM payload size does not match header"));
    }
    let samples = if bytes_per == 2 {
        payload
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    } else {
        payload.iter().map(|&b| b as u16).collect()
    };
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}
