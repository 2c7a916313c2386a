//! Resampling and degradation: Gaussian blur, Catmull-Rom bicubic
//! interpolation, and the blur-downscale pipeline used to synthesize
//! low-resolution inputs.
//!
//! Conventions:
//!
//! * Out-of-range indices reflect with the edge sample repeated
//!   (`[b a | a b c d | d c]`), in every pass of every filter.
//! * Bicubic uses the Catmull-Rom kernel (`a = -0.5`), radius 2, applied
//!   separably with center-aligned coordinates: output pixel `o` samples
//!   input coordinate `(o + 0.5) * ratio - 0.5`.
//! * Gaussian kernels are truncated at `4 sigma` (radius `floor(4 sigma)`)
//!   and normalized to sum 1.
//!
//! Every operation maps constants to constants and runs on all planes an
//! image carries (luma, and RGB when present).

use crate::error::{Error, Result};
use crate::sr::image::Image;

/// Symmetric reflection with edge repeat, valid for any distance out of
/// range.
pub fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Catmull-Rom kernel, `a = -0.5`.
fn catmull_rom(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        (1.5 * x - 2.5) * x * x + 1.0
    } else if x < 2.0 {
        ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
    } else {
        0.0
    }
}

/// Resamples one row-major plane along x to `out_w` columns.
fn resample_axis_x(plane: &[f64], w: usize, h: usize, out_w: usize) -> Vec<f64> {
    let ratio = w as f64 / out_w as f64;
    let mut out = vec![0.0; out_w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for ox in 0..out_w {
            let src = (ox as f64 + 0.5) * ratio - 0.5;
            let base = src.floor();
            let f = src - base;
            let base = base as isize;
            let mut acc = 0.0;
            for tap in -1..=2isize {
                let weight = catmull_rom(f - tap as f64);
                acc += weight * row[reflect_index(base + tap, w)];
            }
            out[y * out_w + ox] = acc;
        }
    }
    out
}

fn transpose(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = plane[y * w + x];
        }
    }
    out
}

/// Separable bicubic resample of a plane to `out_w x out_h`.
fn resample_plane(plane: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let horizontal = resample_axis_x(plane, w, h, out_w);
    let flipped = transpose(&horizontal, out_w, h);
    let vertical = resample_axis_x(&flipped, h, out_w, out_h);
    transpose(&vertical, out_h, out_w)
}

fn clamp_unit(plane: &mut [f64]) {
    for v in plane.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Splits interleaved RGB into planes.
fn rgb_planes(rgb: &[f64]) -> [Vec<f64>; 3] {
    let n = rgb.len() / 3;
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, p) in rgb.chunks_exact(3).enumerate() {
        planes[0][i] = p[0];
        planes[1][i] = p[1];
        planes[2][i] = p[2];
    }
    planes
}

fn interleave(planes: [Vec<f64>; 3]) -> Vec<f64> {
    let n = planes[0].len();
    let mut rgb = Vec::with_capacity(3 * n);
    for i in 0..n {
        rgb.push(planes[0][i]);
        rgb.push(planes[1][i]);
        rgb.push(planes[2][i]);
    }
    rgb
}

/// Applies a plane operation to every plane of `img`, preserving color.
fn map_planes(
    img: &Image,
    out_w: usize,
    out_h: usize,
    op: impl Fn(&[f64], usize, usize) -> Vec<f64>,
) -> Image {
    let (w, h) = (img.width(), img.height());
    match img.rgb() {
        Some(rgb) => {
            let planes = rgb_planes(rgb).map(|p| {
                let mut out = op(&p, w, h);
                clamp_unit(&mut out);
                out
            });
            Image::from_rgb(out_w, out_h, interleave(planes))
                .expect("plane op preserves sample count and range")
        }
        None => {
            let mut out = op(img.luma(), w, h);
            clamp_unit(&mut out);
            Image::from_luma(out_w, out_h, out)
                .expect("plane op preserves sample count and range")
        }
    }
}

/// Normalized Gaussian taps for `sigma`, truncated at `4 sigma`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).floor() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn convolve_axis_x(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &weight) in taps.iter().enumerate() {
                let offset = t as isize - radius;
                acc += weight * row[reflect_index(x as isize + offset, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn blur_plane(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let horizontal = convolve_axis_x(plane, w, h, taps);
    let flipped = transpose(&horizontal, w, h);
    let vertical = convolve_axis_x(&flipped, h, w, taps);
    transpose(&vertical, h, w)
}

/// Separable Gaussian blur with reflect padding.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let taps = gaussian_kernel(sigma);
    Ok(map_planes(img, img.width(), img.height(), |p, w, h| {
        blur_plane(p, w, h, &taps)
    }))
}

/// Catmull-Rom upsampling by an integer factor. Factor 1 is the identity.
pub fn upsample_bicubic(img: &Image, scale: usize) -> Result<Image> {
    if scale == 0 {
        return Err(Error::InvalidConfig("scale must be at least 1".into()));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let (out_w, out_h) = (img.width() * scale, img.height() * scale);
    Ok(map_planes(img, out_w, out_h, |p, w, h| {
        resample_plane(p, w, h, out_w, out_h)
    }))
}

/// Catmull-Rom decimation by an integer factor; dimensions must divide.
pub fn downsample_bicubic(img: &Image, scale: usize) -> Result<Image> {
    if scale == 0 {
        return Err(Error::InvalidConfig("scale must be at least 1".into()));
    }
    if img.width() % scale != 0 || img.height() % scale != 0 {
        return Err(Error::InvalidConfig(format!(
            "dimensions {}x{} not divisible by scale {scale}",
            img.width(),
            img.height()
        )));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let (out_w, out_h) = (img.width() / scale, img.height() / scale);
    Ok(map_planes(img, out_w, out_h, |p, w, h| {
        resample_plane(p, w, h, out_w, out_h)
    }))
}

/// Top-left crop to the largest size divisible by `scale`.
pub fn crop_to_multiple(img: &Image, scale: usize) -> Result<Image> {
    if scale == 0 {
        return Err(Error::InvalidConfig("scale must be at least 1".into()));
    }
    let out_w = img.width() / scale * scale;
    let out_h = img.height() / scale * scale;
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidConfig(format!(
            "image {}x{} too small to crop to a multiple of {scale}",
            img.width(),
            img.height()
        )));
    }
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let crop = |plane: &[f64], channels: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(out_w * out_h * channels);
        for y in 0..out_h {
            let start = y * img.width() * channels;
            out.extend_from_slice(&plane[start..start + out_w * channels]);
        }
        out
    };
    Ok(match img.rgb() {
        Some(rgb) => Image::from_rgb(out_w, out_h, crop(rgb, 3)).expect("crop preserves range"),
        None => {
            Image::from_luma(out_w, out_h, crop(img.luma(), 1)).expect("crop preserves range")
        }
    })
}

/// How a high-resolution image is degraded into its low-resolution input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradationKind {
    /// Plain bicubic decimation.
    Bicubic,
    /// Gaussian blur followed by bicubic decimation.
    BlurBicubic,
}

impl std::str::FromStr for DegradationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bicubic" => Ok(DegradationKind::Bicubic),
            "blur_bicubic" => Ok(DegradationKind::BlurBicubic),
            other => Err(format!(
                "unknown degradation '{other}' (expected bicubic, blur_bicubic)"
            )),
        }
    }
}

/// Degradation parameters; sigma only applies to [`DegradationKind::BlurBicubic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub gaussian_sigma: f64,
    pub scale: usize,
}

impl DegradationSpec {
    pub fn bicubic(scale: usize) -> Self {
        DegradationSpec {
            kind: DegradationKind::Bicubic,
            gaussian_sigma: 1.6,
            scale,
        }
    }

    pub fn blur_bicubic(scale: usize, sigma: f64) -> Self {
        DegradationSpec {
            kind: DegradationKind::BlurBicubic,
            gaussian_sigma: sigma,
            scale,
        }
    }
}

/// Crops to a multiple of the scale, optionally blurs, then decimates.
pub fn degrade(img: &Image, spec: &DegradationSpec) -> Result<Image> {
    let cropped = crop_to_multiple(img, spec.scale)?;
    let filtered = match spec.kind {
        DegradationKind::Bicubic => cropped,
        DegradationKind::BlurBicubic => gaussian_blur(&cropped, spec.gaussian_sigma)?,
    };
    downsample_bicubic(&filtered, spec.scale)
}

/// Reference image for metrics: the same crop `degrade` applies.
pub fn degradation_reference(img: &Image, spec: &DegradationSpec) -> Result<Image> {
    crop_to_multiple(img, spec.scale)
}
