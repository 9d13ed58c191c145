//! Binary 8-bit PPM (`P6`) images.

use std::path::Path;

use eswt_core::{Shape, Tensor};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

/// Parses a `P6` image with `maxval` 255 into a `(1, 3, h, w)` tensor in
/// `[0, 1]`.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor<f32>> {
    let bad = |d: &str| Error::format(path, format!("not a binary 8-bit PPM: {d}"));
    if !bytes.starts_with(b"P6") {
        return Err(bad("missing P6 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed header"))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(bad(&format!("maxval {maxval}, only 255 is supported")));
    }
    if w == 0 || h == 0 {
        return Err(bad("zero-sized image"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("malformed header"));
    }
    let data = &bytes[pos + 1..];
    if data.len() < w * h * 3 {
        return Err(bad(&format!("truncated pixel data ({} of {} bytes)", data.len(), w * h * 3)));
    }
    Ok(Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| data[(y * w + x) * 3 + c] as f32 / 255.0))
}

/// Rounds to 8 bits and serialises the first batch item as `P6`.
pub fn encode(img: &Tensor<f32>) -> Result<Vec<u8>> {
    let s = img.shape();
    if s.c != 3 || s.n < 1 {
        return Err(Error::Usage(format!("PPM output needs a 3-channel image, got {s}")));
    }
    let mut out = format!("P6\n{} {}\n255\n", s.w, s.h).into_bytes();
    out.reserve(s.h * s.w * 3);
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..3 {
                out.push((img.at(0, c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Tensor<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(path: &Path, img: &Tensor<f32>) -> Result<()> {
    write_atomic(path, &encode(img)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_on_8_bit_values() {
        let img = Tensor::from_fn(Shape::new(1, 3, 3, 5), |_, c, y, x| ((c * 70 + y * 20 + x * 3) % 256) as f32 / 255.0);
        let bytes = encode(&img).unwrap();
        assert_eq!(decode(&bytes, Path::new("t")).unwrap(), img);
    }

    #[test]
    fn header_comments_and_errors() {
        let mut b = b"P6\n# made by hand\n2 1\n255\n".to_vec();
        b.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        let img = decode(&b, Path::new("t")).unwrap();
        assert_eq!(img.at(0, 0, 0, 0), 1.0);
        assert_eq!(img.at(0, 2, 0, 1), 1.0);
        assert!(decode(b"P5\n1 1\n255\n\0", Path::new("t")).is_err());
        assert!(decode(b"P6\n2 2\n255\n\0\0\0", Path::new("t")).is_err());
        assert!(decode(b"P6\n1 1\n65535\n\0\0\0\0\0\0", Path::new("t")).is_err());
    }
}
