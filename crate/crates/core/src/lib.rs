//! High-similarity-pass attention kernels.
//!
//! Non-local attention normally converts similarity scores to weights with
//! softmax, which keeps every candidate in play: as the candidate count
//! grows the distribution flattens and relevant features drown in
//! irrelevant ones. This crate implements the sparse alternative - a
//! soft-thresholding operation that projects the score vector onto the
//! probability simplex, truncating low similarities to exact zeros - along
//! with everything needed to use and validate it:
//!
//! * [`simplex`]: exact and top-k soft thresholding, softmax, and the
//!   closed-form Jacobian / O(support) Jacobian-vector product,
//! * [`attention`]: fusion operators over feature maps (sparse, dense
//!   softmax, and random-subset softmax baselines),
//! * [`gradcheck`]: finite-difference validation of the analytic JVP,
//! * [`diagnostics`]: Monte-Carlo softmax-flattening profiles and
//!   support-size bound checks, with CSV emission,
//! * [`sr`]: a training-free patch-based super-resolution demo that
//!   exercises the operators end to end on real images,
//! * [`bench`]: a single-threaded latency harness for the kernels,
//! * [`rng`]: the fully documented SplitMix64/Box-Muller generator that
//!   keeps every randomized result reproducible.
//!
//! All numerics are in `f64`. Every operation is a pure function of its
//! inputs; parallel code paths draw from per-index substreams and reduce
//! in fixed order, so results never depend on the thread count.

pub mod attention;
pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod gradcheck;
pub mod rng;
pub mod simplex;
pub mod sr;

pub use attention::{
    attend_full, hspa_fuse, nla_fuse, nla_random_fuse, similarity_row, AttentionConfig,
    AttentionMode, FeatureMap, LinearMap, MapRole, ProjectionSet,
};
pub use error::{Error, Result};
pub use simplex::{
    soft_threshold_exact, soft_threshold_topk, softmax, JacobianContext, SimilarityVector,
    SparseWeights,
};
