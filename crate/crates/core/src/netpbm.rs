//! Binary Netpbm (PGM "P5" / PPM "P6") readers and writers, maxval 255.
//!
//! The on-disk layout is fixed so files round-trip bit-exactly on every
//! platform: magic, single spaces between header tokens, a newline after the
//! maxval, then raw row-major samples.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, RgbImage};

/// Write a grayscale image as binary PGM.
pub fn write_pgm<W: Write>(img: &GrayImage, sink: &mut W) -> Result<()> {
    sink.write_all(format!("P5\n{} {}\n255\n", img.width, img.height).as_bytes())?;
    sink.write_all(&img.pixels)?;
    Ok(())
}

/// Write an RGB image as binary PPM, samples interleaved r,g,b.
pub fn write_ppm<W: Write>(img: &RgbImage, sink: &mut W) -> Result<()> {
    sink.write_all(format!("P6\n{} {}\n255\n", img.width, img.height).as_bytes())?;
    for px in &img.pixels {
        sink.write_all(px)?;
    }
    Ok(())
}

/// Read a binary PGM produced by [`write_pgm`] (or any P5 file with
/// maxval 255).
pub fn read_pgm<R: Read>(source: &mut R) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let (width, height, payload_at) = parse_header(&bytes, b"P5")?;
    let n = width * height;
    let payload = bytes
        .get(payload_at..payload_at + n)
        .ok_or_else(|| Error::format(bytes.len(), "truncated pixel payload"))?;
    Ok(GrayImage {
        width,
        height,
        pixels: payload.to_vec(),
    })
}

/// Read a binary PPM produced by [`write_ppm`].
pub fn read_ppm<R: Read>(source: &mut R) -> Result<RgbImage> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let (width, height, payload_at) = parse_header(&bytes, b"P6")?;
    let n = width * height * 3;
    let payload = bytes
        .get(payload_at..payload_at + n)
        .ok_or_else(|| Error::format(bytes.len(), "truncated pixel payload"))?;
    let pixels = payload
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

/// Parse `magic`, width, height and maxval; return (width, height, offset of
/// the first payload byte).
fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<(usize, usize, usize)> {
    if bytes.len() < 2 || &bytes[0..2] != magic {
        return Err(Error::format(
            0,
            format!("expected magic {:?}", std::str::from_utf8(magic).unwrap()),
        ));
    }
    let mut pos = 2;
    let width = parse_field(bytes, &mut pos, "width")?;
    let height = parse_field(bytes, &mut pos, "height")?;
    let maxval_at = skip_whitespace(bytes, pos)?;
    let (maxval, after_maxval) = parse_int(bytes, maxval_at, "maxval")?;
    if maxval != 255 {
        return Err(Error::format(maxval_at, format!("maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the maxval from the payload.
    if after_maxval >= bytes.len() || !bytes[after_maxval].is_ascii_whitespace() {
        return Err(Error::format(after_maxval, "expected whitespace after maxval"));
    }
    Ok((width, height, after_maxval + 1))
}

fn parse_field(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let start = skip_whitespace(bytes, *pos)?;
    let (value, end) = parse_int(bytes, start, what)?;
    *pos = end;
    Ok(value)
}

fn skip_whitespace(bytes: &[u8], mut pos: usize) -> Result<usize> {
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(pos, "expected whitespace separator"));
    }
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    Ok(pos)
}

fn parse_int(bytes: &[u8], start: usize, what: &str) -> Result<(usize, usize)> {
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::format(start, format!("expected integer {what}")));
    }
    let text = std::str::from_utf8(&bytes[start..end]).unwrap();
    let value = text
        .parse::<usize>()
        .map_err(|_| Error::format(start, format!("{what} out of range")))?;
    Ok((value, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn minimal_pgm_bytes_are_exact() {
        let img = GrayImage {
            width: 1,
            height: 1,
            pixels: vec![0],
        };
        let mut out = Vec::new();
        write_pgm(&img, &mut out).unwrap();
        assert_eq!(out, b"P5\n1 1\n255\n\x00");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let err = read_pgm(&mut Cursor::new(b"P4\n1 1\n255\n\x00".to_vec())).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_maxval_is_rejected() {
        let err = read_pgm(&mut Cursor::new(b"P5\n1 1\n65535\n\x00".to_vec())).unwrap_err();
        match err {
            Error::Format { offset, msg } => {
                assert_eq!(offset, 7);
                assert!(msg.contains("maxval"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_file_length() {
        let err = read_ppm(&mut Cursor::new(b"P6\n2 1\n255\nab".to_vec())).unwrap_err();
        match err {
            Error::Format { offset, msg } => {
                assert_eq!(offset, 13);
                assert!(msg.contains("truncated"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ppm_roundtrip_is_identity() {
        let img = RgbImage {
            width: 3,
            height: 2,
            pixels: vec![
                [0, 1, 2],
                [255, 254, 253],
                [10, 20, 30],
                [0, 0, 0],
                [128, 128, 128],
                [9, 99, 199],
            ],
        };
        let mut bytes = Vec::new();
        write_ppm(&img, &mut bytes).unwrap();
        let back = read_ppm(&mut Cursor::new(bytes)).unwrap();
        assert_eq!(back, img);
    }
}
