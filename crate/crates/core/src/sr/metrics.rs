//! Luma-plane image quality metrics.
//!
//! PSNR is `10 log10(1 / MSE)` on the `[0, 1]` scale; identical images
//! report `+inf`. SSIM follows the standard single-scale formulation:
//! `K1 = 0.01`, `K2 = 0.03`, unit dynamic range, an 11x11 Gaussian window
//! with `sigma = 1.5` normalized to sum 1, averaged over valid window
//! positions only (no padding).

use crate::error::{Error, Result};
use crate::sr::image::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_same_size(a: &Image, b: &Image) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::InvalidConfig(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over the luma planes.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_same_size(a, b)?;
    let n = a.luma().len() as f64;
    let mse: f64 = a
        .luma()
        .iter()
        .zip(b.luma())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Normalized 11x11 Gaussian window, row-major.
fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for dy in -r..=r {
        for dx in -r..=r {
            w.push((-((dx * dx + dy * dy) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean structural similarity over the luma planes.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_same_size(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidConfig(format!(
            "image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window"
        )));
    }
    let window = ssim_window();
    let (pa, pb) = (a.luma(), b.luma());
    let r = SSIM_WINDOW / 2;
    let mut total = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut aa = 0.0;
            let mut bb = 0.0;
            let mut ab = 0.0;
            let mut wi = 0;
            for dy in 0..SSIM_WINDOW {
                let row = (cy + dy - r) * w + cx - r;
                for dx in 0..SSIM_WINDOW {
                    let weight = window[wi];
                    wi += 1;
                    let va = pa[row + dx];
                    let vb = pb[row + dx];
                    mu_a += weight * va;
                    mu_b += weight * vb;
                    aa += weight * va * va;
                    bb += weight * vb * vb;
                    ab += weight * va * vb;
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            let numerator = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let denominator = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
            total += numerator / denominator;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Image::from_luma(w, h, data).unwrap()
    }

    #[test]
    fn identical_images_saturate_both_metrics() {
        let img = image_from_fn(16, 16, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_offset_has_analytic_psnr() {
        let a = image_from_fn(8, 8, |_, _| 0.4);
        let b = image_from_fn(8, 8, |_, _| 0.5);
        // MSE = 0.01 exactly, so PSNR = 20 dB.
        let db = psnr(&a, &b).unwrap();
        assert!((db - 20.0).abs() < 1e-9, "{db}");
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let a = image_from_fn(8, 8, |_, _| 0.1);
        let b = image_from_fn(8, 9, |_, _| 0.1);
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn ssim_needs_a_full_window() {
        let a = image_from_fn(8, 8, |_, _| 0.1);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn ssim_penalizes_structure_loss() {
        let a = image_from_fn(32, 32, |x, _| if x % 4 < 2 { 0.2 } else { 0.8 });
        let b = image_from_fn(32, 32, |_, _| 0.5);
        let s = ssim(&a, &b).unwrap();
        assert!(s < 0.2, "{s}");
    }
}
