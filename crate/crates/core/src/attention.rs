//! Non-local attention fusion over flattened feature maps.
//!
//! A feature map `X` of shape `H x W x C` is treated as `N = H * W` feature
//! vectors. For a query position `i`, similarities against every position
//! are plain dot products of projected features:
//!
//! ```text
//! s_j = phi_q(x_i)^T phi_k(x_j)
//! ```
//!
//! (no `1/sqrt(d)` scaling). The fused response is a weighted sum of value
//! projections `sum_j w_j * phi_v(x_j)`, where the weights come from one of
//! four schemes:
//!
//! * `hspa_exact` - soft thresholding over all N scores (sparse weights),
//! * `hspa_topk`  - soft thresholding restricted to the k largest scores,
//! * `nla`        - softmax over all N scores (dense weights),
//! * `nla_random` - softmax over a seeded random subset of m positions.
//!
//! Weighted sums accumulate in ascending index order and random subsets are
//! drawn from per-query substreams, so every result is independent of
//! thread count.

use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{soft_threshold_exact, soft_threshold_topk, softmax, SimilarityVector};

/// Dense `H x W x C` feature grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidConfig(
                "feature map dimensions must be at least 1".into(),
            ));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        ensure_finite(&data)?;
        Ok(FeatureMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of spatial positions `N = H * W`.
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    /// The feature vector at flattened position `j`.
    pub fn feature(&self, j: usize) -> &[f64] {
        let c = self.channels;
        &self.data[j * c..(j + 1) * c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Which projection a [`LinearMap`] plays in the attention block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapRole {
    Query,
    Key,
    Value,
}

impl MapRole {
    pub fn name(self) -> &'static str {
        match self {
            MapRole::Query => "query",
            MapRole::Key => "key",
            MapRole::Value => "value",
        }
    }
}

/// Dense linear projection standing in for a 1x1 convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    role: MapRole,
}

impl LinearMap {
    /// `rows x cols` matrix in row-major order.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, role: MapRole) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(
                "projection dimensions must be at least 1".into(),
            ));
        }
        let expected = rows * cols;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        ensure_finite(&data)?;
        Ok(LinearMap {
            rows,
            cols,
            data,
            role,
        })
    }

    pub fn identity(dim: usize, role: MapRole) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        LinearMap {
            rows: dim,
            cols: dim,
            data,
            role,
        }
    }

    /// Seeded random orthogonal `dim x dim` matrix (Gram-Schmidt on
    /// standard-normal draws).
    pub fn random_orthogonal(dim: usize, role: MapRole, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
        while rows.len() < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            for prev in &rows {
                let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= dot * pi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue; // degenerate draw; try again
            }
            for vi in &mut v {
                *vi /= norm;
            }
            rows.push(v);
        }
        LinearMap {
            rows: dim,
            cols: dim,
            data: rows.concat(),
            role,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cols
    }

    pub fn output_dim(&self) -> usize {
        self.rows
    }

    pub fn role(&self) -> MapRole {
        self.role
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *out_r = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// The query/key/value projection triple.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub query: LinearMap,
    pub key: LinearMap,
    pub value: LinearMap,
}

impl ProjectionSet {
    pub fn identity(dim: usize) -> Self {
        ProjectionSet {
            query: LinearMap::identity(dim, MapRole::Query),
            key: LinearMap::identity(dim, MapRole::Key),
            value: LinearMap::identity(dim, MapRole::Value),
        }
    }

    /// Three independent seeded orthogonal maps.
    pub fn random_orthogonal(dim: usize, seed: u64) -> Self {
        let sub = |i: u64| SplitMix64::substream(seed, i).next_u64();
        ProjectionSet {
            query: LinearMap::random_orthogonal(dim, MapRole::Query, sub(0)),
            key: LinearMap::random_orthogonal(dim, MapRole::Key, sub(1)),
            value: LinearMap::random_orthogonal(dim, MapRole::Value, sub(2)),
        }
    }

    fn check_against(&self, fmap: &FeatureMap) -> Result<()> {
        for map in [&self.query, &self.key, &self.value] {
            if map.input_dim() != fmap.channels() {
                return Err(Error::ChannelMismatch {
                    role: map.role().name(),
                    expected: map.input_dim(),
                    actual: fmap.channels(),
                });
            }
        }
        if self.query.output_dim() != self.key.output_dim() {
            return Err(Error::InvalidConfig(format!(
                "query and key output dimensions differ: {} vs {}",
                self.query.output_dim(),
                self.key.output_dim()
            )));
        }
        Ok(())
    }
}

/// Weighting scheme used when fusing non-local features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionMode {
    HspaExact,
    HspaTopk,
    Nla,
    NlaRandom,
}

impl AttentionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AttentionMode::HspaExact => "hspa_exact",
            AttentionMode::HspaTopk => "hspa_topk",
            AttentionMode::Nla => "nla",
            AttentionMode::NlaRandom => "nla_random",
        }
    }
}

impl std::str::FromStr for AttentionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hspa_exact" => Ok(AttentionMode::HspaExact),
            "hspa_topk" => Ok(AttentionMode::HspaTopk),
            "nla" => Ok(AttentionMode::Nla),
            "nla_random" => Ok(AttentionMode::NlaRandom),
            other => Err(format!(
                "unknown attention mode '{other}' (expected hspa_exact, hspa_topk, nla, nla_random)"
            )),
        }
    }
}

/// Attention configuration: mode, top-k width, random-subset size, seed.
#[derive(Debug, Clone, Copy)]
pub struct AttentionConfig {
    pub mode: AttentionMode,
    /// Top-k width for `hspa_topk`.
    pub k: usize,
    /// Subset size for `nla_random`.
    pub m: usize,
    /// Master seed for the per-query subset streams.
    pub seed: u64,
    /// Optional softness knob applied as `s / temperature`; 1.0 leaves the
    /// scores untouched bit-for-bit.
    pub temperature: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            mode: AttentionMode::HspaExact,
            k: 128,
            m: 512,
            seed: 0,
            temperature: 1.0,
        }
    }
}

impl AttentionConfig {
    pub fn with_mode(mode: AttentionMode) -> Self {
        AttentionConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Projected queries, keys, and values for one feature map.
///
/// Both the per-row entry points and [`attend_full`] fuse through this
/// structure, so batched and row-at-a-time calls are bitwise identical.
struct Prepared {
    n: usize,
    dim_qk: usize,
    dim_v: usize,
    queries: Vec<f64>,
    keys: Vec<f64>,
    values: Vec<f64>,
}

impl Prepared {
    fn build(fmap: &FeatureMap, maps: &ProjectionSet) -> Result<Self> {
        maps.check_against(fmap)?;
        let n = fmap.positions();
        let dim_qk = maps.query.output_dim();
        let dim_v = maps.value.output_dim();
        let mut queries = Vec::with_capacity(n * dim_qk);
        let mut keys = Vec::with_capacity(n * dim_qk);
        let mut values = Vec::with_capacity(n * dim_v);
        for j in 0..n {
            let x = fmap.feature(j);
            queries.extend_from_slice(&maps.query.apply(x));
            keys.extend_from_slice(&maps.key.apply(x));
            values.extend_from_slice(&maps.value.apply(x));
        }
        Ok(Prepared {
            n,
            dim_qk,
            dim_v,
            queries,
            keys,
            values,
        })
    }

    fn query(&self, i: usize) -> &[f64] {
        &self.queries[i * self.dim_qk..(i + 1) * self.dim_qk]
    }

    fn key(&self, j: usize) -> &[f64] {
        &self.keys[j * self.dim_qk..(j + 1) * self.dim_qk]
    }

    fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim_v..(j + 1) * self.dim_v]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        Ok(())
    }

    /// Similarity of query `i` against every position.
    fn similarities(&self, i: usize) -> Vec<f64> {
        let q = self.query(i);
        (0..self.n)
            .map(|j| dot(q, self.key(j)))
            .collect()
    }

    /// Similarity of query `i` against the given positions only.
    fn similarities_among(&self, i: usize, among: &[usize]) -> Vec<f64> {
        let q = self.query(i);
        among.iter().map(|&j| dot(q, self.key(j))).collect()
    }

    /// `sum_j w_j * value_j` accumulated in ascending index order.
    fn weighted_sum(&self, pairs: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_v];
        for (j, w) in pairs {
            let v = self.value(j);
            for (o, &vc) in out.iter_mut().zip(v) {
                *o += w * vc;
            }
        }
        out
    }

    fn fuse_row(&self, i: usize, cfg: &AttentionConfig) -> Result<Vec<f64>> {
        self.check_index(i)?;
        match cfg.mode {
            AttentionMode::HspaExact | AttentionMode::HspaTopk => {
                let mut sims = self.similarities(i);
                apply_temperature(&mut sims, cfg.temperature);
                let s = SimilarityVector::new(sims)?;
                let st = match cfg.mode {
                    AttentionMode::HspaTopk => soft_threshold_topk(&s, cfg.k)?,
                    _ => soft_threshold_exact(&s),
                };
                let w = st.weights();
                Ok(self.weighted_sum(st.support().iter().map(|&j| (j, w[j]))))
            }
            AttentionMode::Nla => {
                let mut sims = self.similarities(i);
                apply_temperature(&mut sims, cfg.temperature);
                let w = softmax(&SimilarityVector::new(sims)?);
                Ok(self.weighted_sum(w.iter().copied().enumerate()))
            }
            AttentionMode::NlaRandom => {
                let mut rng = SplitMix64::substream(cfg.seed, i as u64);
                let sampled = rng.sample_indices(self.n, cfg.m);
                let mut sims = self.similarities_among(i, &sampled);
                apply_temperature(&mut sims, cfg.temperature);
                let w = softmax(&SimilarityVector::new(sims)?);
                Ok(self.weighted_sum(sampled.iter().copied().zip(w.iter().copied())))
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_temperature(sims: &mut [f64], temperature: f64) {
    for s in sims.iter_mut() {
        *s /= temperature;
    }
}

/// Dot-product similarities of query position `i` against all positions.
pub fn similarity_row(
    i: usize,
    fmap: &FeatureMap,
    phi_q: &LinearMap,
    phi_k: &LinearMap,
) -> Result<SimilarityVector> {
    if phi_q.input_dim() != fmap.channels() {
        return Err(Error::ChannelMismatch {
            role: phi_q.role().name(),
            expected: phi_q.input_dim(),
            actual: fmap.channels(),
        });
    }
    if phi_k.input_dim() != fmap.channels() {
        return Err(Error::ChannelMismatch {
            role: phi_k.role().name(),
            expected: phi_k.input_dim(),
            actual: fmap.channels(),
        });
    }
    if phi_q.output_dim() != phi_k.output_dim() {
        return Err(Error::InvalidConfig(format!(
            "query and key output dimensions differ: {} vs {}",
            phi_q.output_dim(),
            phi_k.output_dim()
        )));
    }
    let n = fmap.positions();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    let q = phi_q.apply(fmap.feature(i));
    let sims: Vec<f64> = (0..n)
        .map(|j| dot(&q, &phi_k.apply(fmap.feature(j))))
        .collect();
    SimilarityVector::new(sims)
}

/// Fused response of query `i` with soft-thresholded weights (exact or
/// top-k per `cfg.mode`).
pub fn hspa_fuse(
    i: usize,
    fmap: &FeatureMap,
    maps: &ProjectionSet,
    cfg: &AttentionConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mode = match cfg.mode {
        AttentionMode::HspaTopk => AttentionMode::HspaTopk,
        _ => AttentionMode::HspaExact,
    };
    let cfg = AttentionConfig { mode, ..*cfg };
    Prepared::build(fmap, maps)?.fuse_row(i, &cfg)
}

/// Fused response of query `i` with softmax weights over all positions.
pub fn nla_fuse(
    i: usize,
    fmap: &FeatureMap,
    maps: &ProjectionSet,
    cfg: &AttentionConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let cfg = AttentionConfig {
        mode: AttentionMode::Nla,
        ..*cfg
    };
    Prepared::build(fmap, maps)?.fuse_row(i, &cfg)
}

/// Fused response of query `i` with softmax weights over a seeded random
/// subset of `min(m, N)` positions, sampled without replacement.
pub fn nla_random_fuse(
    i: usize,
    fmap: &FeatureMap,
    maps: &ProjectionSet,
    cfg: &AttentionConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let cfg = AttentionConfig {
        mode: AttentionMode::NlaRandom,
        ..*cfg
    };
    Prepared::build(fmap, maps)?.fuse_row(i, &cfg)
}

/// Applies the configured fusion to every query position.
///
/// Rows are independent and processed in parallel; the output layout and
/// values do not depend on the number of threads.
pub fn attend_full(
    fmap: &FeatureMap,
    maps: &ProjectionSet,
    cfg: &AttentionConfig,
) -> Result<FeatureMap> {
    cfg.validate()?;
    let prepared = Prepared::build(fmap, maps)?;
    let rows: Vec<Vec<f64>> = (0..prepared.n)
        .into_par_iter()
        .map(|i| prepared.fuse_row(i, cfg))
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(prepared.n * prepared.dim_v);
    for row in rows {
        data.extend_from_slice(&row);
    }
    FeatureMap::new(fmap.height(), fmap.width(), prepared.dim_v, data)
}
