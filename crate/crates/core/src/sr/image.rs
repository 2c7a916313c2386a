//! Netpbm image I/O and color conversions.
//!
//! Supports 8-bit PGM (P2 ASCII, P5 binary) and PPM (P3 ASCII, P6 binary)
//! with maxval 255. Samples are held as doubles in `[0, 1]`; color images
//! keep their interleaved RGB data alongside a BT.601 luma plane
//! (`Y = 0.299 R + 0.587 G + 0.114 B`), which is the channel every metric
//! and reconstruction operates on.

use std::path::Path;

use crate::error::{Error, Result};

/// A raster image: luma plane plus optional interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    luma: Vec<f64>,
    rgb: Option<Vec<f64>>,
}

impl Image {
    /// Grayscale image from a luma plane with samples in `[0, 1]`.
    pub fn from_luma(width: usize, height: usize, luma: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(
                "image dimensions must be at least 1".into(),
            ));
        }
        if luma.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: luma.len(),
            });
        }
        check_unit_range(&luma)?;
        Ok(Image {
            width,
            height,
            luma,
            rgb: None,
        })
    }

    /// Color image from interleaved RGB samples in `[0, 1]`; the luma
    /// plane is derived via BT.601.
    pub fn from_rgb(width: usize, height: usize, rgb: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(
                "image dimensions must be at least 1".into(),
            ));
        }
        if rgb.len() != 3 * width * height {
            return Err(Error::LengthMismatch {
                expected: 3 * width * height,
                actual: rgb.len(),
            });
        }
        check_unit_range(&rgb)?;
        let luma = rgb
            .chunks_exact(3)
            .map(|p| luma_bt601(p[0], p[1], p[2]))
            .collect();
        Ok(Image {
            width,
            height,
            luma,
            rgb: Some(rgb),
        })
    }

    /// Image with an explicit luma plane and separately produced display
    /// RGB (the luma is authoritative for metrics; no derivation happens).
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        luma: Vec<f64>,
        rgb: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut img = Image::from_luma(width, height, luma)?;
        if let Some(rgb) = rgb {
            if rgb.len() != 3 * width * height {
                return Err(Error::LengthMismatch {
                    expected: 3 * width * height,
                    actual: rgb.len(),
                });
            }
            check_unit_range(&rgb)?;
            img.rgb = Some(rgb);
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Luma plane, row-major.
    pub fn luma(&self) -> &[f64] {
        &self.luma
    }

    /// Interleaved RGB samples, if this image carries color.
    pub fn rgb(&self) -> Option<&[f64]> {
        self.rgb.as_deref()
    }

    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.luma[y * self.width + x]
    }
}

fn check_unit_range(samples: &[f64]) -> Result<()> {
    for (index, &value) in samples.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidConfig(format!(
                "sample {index} out of [0, 1]: {value}"
            )));
        }
    }
    Ok(())
}

/// BT.601 luma from unit-range RGB.
pub fn luma_bt601(r: f64, g: f64, b: f64) -> f64 {
    (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0)
}

/// Full-range BT.601 chroma planes `(Cb, Cr)` of an interleaved RGB buffer.
pub fn chroma_bt601(rgb: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut cb = Vec::with_capacity(rgb.len() / 3);
    let mut cr = Vec::with_capacity(rgb.len() / 3);
    for p in rgb.chunks_exact(3) {
        cb.push(0.5 - 0.168736 * p[0] - 0.331264 * p[1] + 0.5 * p[2]);
        cr.push(0.5 + 0.5 * p[0] - 0.418688 * p[1] - 0.081312 * p[2]);
    }
    (cb, cr)
}

/// Recombines a luma plane with chroma planes into clamped interleaved RGB.
pub fn rgb_from_ycbcr(y: &[f64], cb: &[f64], cr: &[f64]) -> Vec<f64> {
    let mut rgb = Vec::with_capacity(3 * y.len());
    for i in 0..y.len() {
        let (yv, cbv, crv) = (y[i], cb[i] - 0.5, cr[i] - 0.5);
        rgb.push((yv + 1.402 * crv).clamp(0.0, 1.0));
        rgb.push((yv - 0.344136 * cbv - 0.714136 * crv).clamp(0.0, 1.0));
        rgb.push((yv + 1.772 * cbv).clamp(0.0, 1.0));
    }
    rgb
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn dequantize(v: u8) -> f64 {
    v as f64 / 255.0
}

/// Loads a PGM or PPM file (P2/P3/P5/P6, maxval 255).
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut parser = PnmParser::new(&bytes, path);
    parser.parse()
}

/// Saves an image: PPM (P6) when it carries color, PGM (P5) otherwise.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let mut out: Vec<u8>;
    match img.rgb() {
        Some(rgb) => {
            out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend(rgb.iter().map(|&v| quantize(v)));
        }
        None => {
            out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend(img.luma.iter().map(|&v| quantize(v)));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct PnmParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> PnmParser<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        PnmParser { bytes, pos: 0, path }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::malformed(self.path, reason)
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("invalid {what}")))
    }

    fn parse(&mut self) -> Result<Image> {
        let magic = self.token()?;
        let (color, ascii) = match magic {
            b"P2" => (false, true),
            b"P3" => (true, true),
            b"P5" => (false, false),
            b"P6" => (true, false),
            other => {
                let shown = String::from_utf8_lossy(other);
                return Err(self.err(format!("unsupported magic '{shown}'")));
            }
        };
        let width = self.number("width")?;
        let height = self.number("height")?;
        let maxval = self.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(self.err("zero image dimension"));
        }
        if maxval != 255 {
            return Err(self.err(format!("unsupported maxval {maxval} (only 255)")));
        }
        let samples = width * height * if color { 3 } else { 1 };
        let raw = if ascii {
            let mut values = Vec::with_capacity(samples);
            for _ in 0..samples {
                let v = self.number("sample")?;
                if v > 255 {
                    return Err(self.err(format!("sample {v} exceeds maxval")));
                }
                values.push(v as u8);
            }
            values
        } else {
            // Exactly one whitespace byte separates the header from the
            // payload.
            if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
                return Err(self.err("missing separator before binary payload"));
            }
            self.pos += 1;
            let payload = &self.bytes[self.pos..];
            if payload.len() < samples {
                return Err(self.err(format!(
                    "truncated payload: expected {samples} bytes, found {}",
                    payload.len()
                )));
            }
            payload[..samples].to_vec()
        };
        let data: Vec<f64> = raw.iter().map(|&b| dequantize(b)).collect();
        if color {
            Image::from_rgb(width, height, data)
        } else {
            Image::from_luma(width, height, data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("hspa-image-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn gray_round_trip_is_bit_identical() {
        let luma: Vec<f64> = (0..16).map(|i| dequantize((i * 17) as u8)).collect();
        let img = Image::from_luma(4, 4, luma).unwrap();
        let path = tmp("gray.pgm");
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn color_round_trip_is_bit_identical() {
        let rgb: Vec<f64> = (0..27).map(|i| dequantize((i * 9) as u8)).collect();
        let img = Image::from_rgb(3, 3, rgb).unwrap();
        let path = tmp("color.ppm");
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn ascii_variants_parse() {
        let path = tmp("ascii.pgm");
        std::fs::write(&path, "P2\n# comment\n2 2\n255\n0 128\n255 64\n").unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(1, 0), 128.0 / 255.0);
        assert_eq!(img.pixel(1, 1), 64.0 / 255.0);

        let path = tmp("ascii.ppm");
        std::fs::write(&path, "P3\n1 1\n255\n255 0 0\n").unwrap();
        let img = load_image(&path).unwrap();
        // BT.601 red coefficient.
        assert!((img.pixel(0, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn white_has_unit_luma() {
        let img = Image::from_rgb(2, 1, vec![1.0; 6]).unwrap();
        for &y in img.luma() {
            assert!((y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let cases: [(&str, &[u8]); 4] = [
            ("bad_magic.pgm", b"P9\n1 1\n255\n\x00"),
            ("bad_maxval.pgm", b"P5\n1 1\n65535\n\x00\x00"),
            ("truncated.pgm", b"P5\n4 4\n255\n\x00\x01"),
            ("no_header.pgm", b"P5"),
        ];
        for (name, bytes) in cases {
            let path = tmp(name);
            std::fs::write(&path, bytes).unwrap();
            let err = load_image(&path).unwrap_err();
            assert!(matches!(err, Error::MalformedImage { .. }), "{name}: {err}");
        }
    }

    #[test]
    fn chroma_round_trip_stays_close() {
        let rgb: Vec<f64> = (0..30).map(|i| dequantize((i * 8) as u8)).collect();
        let img = Image::from_rgb(5, 2, rgb.clone()).unwrap();
        let (cb, cr) = chroma_bt601(&rgb);
        let back = rgb_from_ycbcr(img.luma(), &cb, &cr);
        for (a, b) in rgb.iter().zip(&back) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
