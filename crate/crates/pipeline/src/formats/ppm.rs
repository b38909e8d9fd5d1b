//! Binary PPM (P6) images, the dependency-free raster format used by the
//! augment command for bit-exact round trips. Max value must be 255.

use std::path::Path;

use detkit_core::augment::RasterImage;

use super::atomic::write_atomic;
use crate::error::PipelineError;

fn bad(path: &Path, message: &str) -> PipelineError {
    PipelineError::data(format!("{}: {message}", path.display()))
}

/// Reads the next whitespace-delimited token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    while *pos < bytes.len() {
        let b = bytes[*pos];
        if b == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(bytes[start..*pos].to_vec())
}

pub fn read_ppm(path: &Path) -> Result<RasterImage, PipelineError> {
    let bytes = std::fs::read(path)
        .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "missing PPM header"))?;
    if magic != b"P6" {
        return Err(bad(path, "not a binary PPM (expected magic P6)"));
    }
    let mut dims = [0usize; 3];
    for slot in dims.iter_mut() {
        let token = next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "truncated header"))?;
        let text = std::str::from_utf8(&token).map_err(|_| bad(path, "invalid header token"))?;
        *slot = text
            .parse::<usize>()
            .map_err(|_| bad(path, "invalid header number"))?;
    }
    let [width, height, maxval] = dims;
    if maxval != 255 {
        return Err(bad(path, "only maxval 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err(bad(path, "zero image dimension"));
    }
    // exactly one whitespace byte separates the header from pixel data
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad(path, "missing pixel data separator"));
    }
    pos += 1;
    let expected = width * height * 3;
    let pixels = bytes[pos..].to_vec();
    if pixels.len() != expected {
        return Err(bad(
            path,
            &format!(
                "pixel payload holds {} bytes, expected {expected}",
                pixels.len()
            ),
        ));
    }
    RasterImage::new(width as u32, height as u32, pixels).map_err(|e| bad(path, &e.to_string()))
}

pub fn write_ppm(img: &RasterImage, path: &Path) -> Result<(), PipelineError> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    write_atomic(path, &out)
}
