//! Training-free patch-based self-similarity reconstruction.
//!
//! The pipeline upscales a low-resolution image bicubically, then replaces
//! every luma pixel with a weighted fusion of similar candidates:
//!
//! 1. each pixel's feature is its raw `(2r+1)^2` luma patch from the
//!    bicubic estimate (reflect padding at borders),
//! 2. candidates are the pixels of a search window (or the whole image)
//!    on a stride grid anchored at the query,
//! 3. similarities are plain dot products of patch features,
//! 4. weights come from soft thresholding (exact or top-k), softmax, or
//!    softmax over a seeded random candidate subset,
//! 5. the output pixel is the weighted sum of candidate center values.
//!
//! Queries run in parallel and random subsets come from per-pixel
//! substreams, so a fixed seed gives bit-identical output at any thread
//! count. Color inputs are fused on luma only; chroma is carried over
//! from the bicubic estimate for display.

use rayon::prelude::*;

use crate::attention::{AttentionConfig, AttentionMode};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{soft_threshold_exact, soft_threshold_topk, softmax, SimilarityVector};
use crate::sr::image::{chroma_bt601, rgb_from_ycbcr, Image};
use crate::sr::resample::{reflect_index, upsample_bicubic};

/// Candidate search region per query pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchSpace {
    /// Every pixel of the upscaled image.
    Full,
    /// A `w x w` window centered on the query.
    Window(usize),
}

impl std::str::FromStr for SearchSpace {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "full" {
            return Ok(SearchSpace::Full);
        }
        if let Some(w) = s.strip_prefix("window:") {
            let w: usize = w
                .parse()
                .map_err(|_| format!("invalid window width '{w}'"))?;
            return Ok(SearchSpace::Window(w));
        }
        Err(format!(
            "unknown search space '{s}' (expected full or window:<w>)"
        ))
    }
}

/// Patch search and weighting parameters.
#[derive(Debug, Clone)]
pub struct PatchConfig {
    /// Feature window is `(2 * patch_radius + 1)^2` luma samples.
    pub patch_radius: usize,
    /// Candidate grid spacing, anchored at the query pixel.
    pub stride: usize,
    pub search: SearchSpace,
    /// Upscaling factor, 2 to 4.
    pub scale: usize,
    pub mode: AttentionConfig,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            patch_radius: 2,
            stride: 1,
            search: SearchSpace::Window(31),
            scale: 2,
            mode: AttentionConfig::default(),
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be at least 1".into()));
        }
        if !(2..=4).contains(&self.scale) {
            return Err(Error::InvalidConfig(format!(
                "scale must be 2, 3, or 4, got {}",
                self.scale
            )));
        }
        if let SearchSpace::Window(w) = self.search {
            if w < 2 * self.patch_radius + 1 {
                return Err(Error::InvalidConfig(format!(
                    "window width {w} smaller than patch diameter {}",
                    2 * self.patch_radius + 1
                )));
            }
        }
        self.mode.validate()
    }
}

/// Per-run aggregates over all query pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconStats {
    /// Mean number of candidates receiving nonzero weight.
    pub mean_support_size: f64,
    /// Mean candidate count per query.
    pub mean_candidate_count: f64,
}

/// Reconstructed image plus fusion statistics.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: Image,
    pub stats: ReconStats,
}

/// Raw patch features of a luma plane, one row per pixel.
struct PatchGrid {
    dim: usize,
    data: Vec<f64>,
}

impl PatchGrid {
    fn build(luma: &[f64], w: usize, h: usize, radius: usize) -> Self {
        let side = 2 * radius + 1;
        let dim = side * side;
        let r = radius as isize;
        let data: Vec<f64> = (0..w * h)
            .into_par_iter()
            .flat_map_iter(|p| {
                let (x, y) = ((p % w) as isize, (p / w) as isize);
                (-r..=r).flat_map(move |dy| {
                    let row = reflect_index(y + dy, h) * w;
                    (-r..=r).map(move |dx| luma[row + reflect_index(x + dx, w)])
                })
            })
            .collect();
        PatchGrid { dim, data }
    }

    fn patch(&self, p: usize) -> &[f64] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }
}

/// Candidate positions for one query: a stride grid over the search
/// region, in ascending row-major order. Always contains the query.
fn candidates_for(
    q: usize,
    w: usize,
    h: usize,
    search: SearchSpace,
    stride: usize,
) -> Vec<usize> {
    let (qx, qy) = (q % w, q / w);
    let (left, right, up, down) = match search {
        SearchSpace::Full => (qx, w - 1 - qx, qy, h - 1 - qy),
        SearchSpace::Window(win) => {
            let l = (win - 1) / 2;
            let r = win / 2;
            (qx.min(l), (w - 1 - qx).min(r), qy.min(l), (h - 1 - qy).min(r))
        }
    };
    let mut out = Vec::new();
    let mut y = qy - (up / stride) * stride;
    while y <= qy + down {
        let mut x = qx - (left / stride) * stride;
        while x <= qx + right {
            out.push(y * w + x);
            x += stride;
        }
        y += stride;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fused value and nonzero-weight count for one query pixel.
fn fuse_pixel(
    q: usize,
    luma: &[f64],
    patches: &PatchGrid,
    candidates: &[usize],
    cfg: &AttentionConfig,
) -> (f64, usize) {
    let query_patch = patches.patch(q);
    let mut sims: Vec<f64> = candidates
        .iter()
        .map(|&c| dot(query_patch, patches.patch(c)))
        .collect();
    if cfg.temperature != 1.0 {
        for s in &mut sims {
            *s /= cfg.temperature;
        }
    }
    match cfg.mode {
        AttentionMode::HspaExact | AttentionMode::HspaTopk => {
            let s = SimilarityVector::new(sims).expect("unit-range patches are finite");
            let st = match cfg.mode {
                AttentionMode::HspaTopk => {
                    soft_threshold_topk(&s, cfg.k).expect("k validated upfront")
                }
                _ => soft_threshold_exact(&s),
            };
            let w = st.weights();
            let value = st
                .support()
                .iter()
                .map(|&ci| w[ci] * luma[candidates[ci]])
                .sum::<f64>();
            (value.clamp(0.0, 1.0), st.support_size())
        }
        AttentionMode::Nla => {
            let s = SimilarityVector::new(sims).expect("unit-range patches are finite");
            let w = softmax(&s);
            let value = w
                .iter()
                .zip(candidates)
                .map(|(&wi, &c)| wi * luma[c])
                .sum::<f64>();
            (value.clamp(0.0, 1.0), candidates.len())
        }
        AttentionMode::NlaRandom => {
            let mut rng = SplitMix64::substream(cfg.seed, q as u64);
            let sampled = rng.sample_indices(candidates.len(), cfg.m);
            let sub: Vec<f64> = sampled.iter().map(|&ci| sims[ci]).collect();
            let s = SimilarityVector::new(sub).expect("unit-range patches are finite");
            let w = softmax(&s);
            let value = w
                .iter()
                .zip(&sampled)
                .map(|(&wi, &ci)| wi * luma[candidates[ci]])
                .sum::<f64>();
            (value.clamp(0.0, 1.0), sampled.len())
        }
    }
}

/// Upscales `lr` by `cfg.scale` and fuses every pixel from its most
/// similar patches. See the module docs for the full pipeline.
pub fn reconstruct(lr: &Image, cfg: &PatchConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let estimate = upsample_bicubic(lr, cfg.scale)?;
    let (w, h) = (estimate.width(), estimate.height());
    let luma = estimate.luma();
    let patches = PatchGrid::build(luma, w, h, cfg.patch_radius);

    let per_pixel: Vec<(f64, usize, usize)> = (0..w * h)
        .into_par_iter()
        .map(|q| {
            let candidates = candidates_for(q, w, h, cfg.search, cfg.stride);
            if candidates.len() < 2 {
                return Err(Error::DegenerateSearch(format!(
                    "query pixel ({}, {}) has {} candidate(s); need at least 2",
                    q % w,
                    q / w,
                    candidates.len()
                )));
            }
            let (value, support) = fuse_pixel(q, luma, &patches, &candidates, &cfg.mode);
            Ok((value, support, candidates.len()))
        })
        .collect::<Result<_>>()?;

    let mut fused = Vec::with_capacity(w * h);
    let mut support_total = 0.0;
    let mut candidate_total = 0.0;
    for (value, support, count) in per_pixel {
        fused.push(value);
        support_total += support as f64;
        candidate_total += count as f64;
    }
    let queries = (w * h) as f64;
    let stats = ReconStats {
        mean_support_size: support_total / queries,
        mean_candidate_count: candidate_total / queries,
    };

    let rgb = estimate.rgb().map(|est_rgb| {
        let (cb, cr) = chroma_bt601(est_rgb);
        rgb_from_ycbcr(&fused, &cb, &cr)
    });
    let image = Image::from_parts(w, h, fused, rgb)?;
    Ok(Reconstruction { image, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(mode: AttentionMode) -> PatchConfig {
        PatchConfig {
            patch_radius: 1,
            stride: 1,
            search: SearchSpace::Window(9),
            scale: 2,
            mode: AttentionConfig {
                mode,
                k: 16,
                m: 8,
                seed: 0,
                temperature: 1.0,
            },
        }
    }

    fn lr_from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Image::from_luma(w, h, data).unwrap()
    }

    #[test]
    fn constant_input_reconstructs_constant() {
        let lr = lr_from_fn(8, 8, |_, _| 0.62);
        for mode in [
            AttentionMode::HspaExact,
            AttentionMode::HspaTopk,
            AttentionMode::Nla,
            AttentionMode::NlaRandom,
        ] {
            let out = reconstruct(&lr, &config(mode)).unwrap();
            assert_eq!(out.image.width(), 16);
            for &v in out.image.luma() {
                assert!((v - 0.62).abs() < 1e-12, "{mode:?}: {v}");
            }
        }
    }

    #[test]
    fn output_stays_within_candidate_range() {
        let lr = lr_from_fn(8, 8, |x, y| ((x * 13 + y * 7) % 10) as f64 / 9.0);
        for mode in [AttentionMode::HspaExact, AttentionMode::Nla] {
            let out = reconstruct(&lr, &config(mode)).unwrap();
            for &v in out.image.luma() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let lr = lr_from_fn(6, 6, |x, y| ((x ^ y) & 3) as f64 / 4.0);
        let mut cfg = config(AttentionMode::NlaRandom);
        cfg.mode.m = 5;
        let a = reconstruct(&lr, &cfg).unwrap();
        let b = reconstruct(&lr, &cfg).unwrap();
        assert_eq!(a.image.luma(), b.image.luma());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| reconstruct(&lr, &cfg)).unwrap();
        assert_eq!(a.image.luma(), c.image.luma());
    }

    #[test]
    fn sparse_support_vs_full_softmax() {
        // Two identical texture blocks on a flat background: ST
        // concentrates weight, softmax never does.
        let lr = lr_from_fn(12, 6, |x, y| {
            let in_left = (1..4).contains(&x) && (1..4).contains(&y);
            let in_right = (7..10).contains(&x) && (1..4).contains(&y);
            if in_left || in_right {
                ((x % 3) * 2 + y % 3) as f64 / 10.0 + 0.3
            } else {
                0.1
            }
        });
        let mut cfg = config(AttentionMode::HspaExact);
        cfg.search = SearchSpace::Full;
        let sparse = reconstruct(&lr, &cfg).unwrap();
        cfg.mode.mode = AttentionMode::Nla;
        let dense = reconstruct(&lr, &cfg).unwrap();
        assert!(
            sparse.stats.mean_support_size < 0.25 * sparse.stats.mean_candidate_count,
            "support {} of {}",
            sparse.stats.mean_support_size,
            sparse.stats.mean_candidate_count
        );
        assert_eq!(
            dense.stats.mean_support_size,
            dense.stats.mean_candidate_count
        );
    }

    #[test]
    fn topk_caps_support_size() {
        let lr = lr_from_fn(8, 8, |x, y| ((x * 5 + y * 11) % 13) as f64 / 12.0);
        let mut cfg = config(AttentionMode::HspaTopk);
        cfg.mode.k = 3;
        let out = reconstruct(&lr, &cfg).unwrap();
        assert!(out.stats.mean_support_size <= 3.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let lr = lr_from_fn(4, 4, |_, _| 0.5);
        let mut cfg = config(AttentionMode::HspaExact);
        cfg.scale = 5;
        assert!(reconstruct(&lr, &cfg).is_err());
        let mut cfg = config(AttentionMode::HspaExact);
        cfg.stride = 0;
        assert!(reconstruct(&lr, &cfg).is_err());
        let mut cfg = config(AttentionMode::HspaExact);
        cfg.search = SearchSpace::Window(1);
        assert!(reconstruct(&lr, &cfg).is_err());
    }

    #[test]
    fn oversized_stride_degenerates() {
        let lr = lr_from_fn(2, 2, |_, _| 0.5);
        let mut cfg = config(AttentionMode::HspaExact);
        cfg.patch_radius = 0;
        cfg.search = SearchSpace::Window(3);
        cfg.stride = 64;
        let err = reconstruct(&lr, &cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateSearch(_)), "{err}");
    }

    #[test]
    fn search_space_parses() {
        assert_eq!("full".parse::<SearchSpace>().unwrap(), SearchSpace::Full);
        assert_eq!(
            "window:31".parse::<SearchSpace>().unwrap(),
            SearchSpace::Window(31)
        );
        assert!("window:x".parse::<SearchSpace>().is_err());
        assert!("circle".parse::<SearchSpace>().is_err());
    }
}
