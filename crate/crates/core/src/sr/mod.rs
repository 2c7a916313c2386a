//! Self-similarity super-resolution demo: image I/O, degradation,
//! patch-based reconstruction, and quality metrics.

pub mod corpus;
pub mod image;
pub mod metrics;
pub mod reconstruct;
pub mod resample;

pub use image::{load_image, save_image, Image};
pub use metrics::{psnr, ssim};
pub use reconstruct::{reconstruct, PatchConfig, ReconStats, Reconstruction, SearchSpace};
pub use resample::{
    crop_to_multiple, degradation_reference, degrade, downsample_bicubic, gaussian_blur,
    upsample_bicubic, DegradationKind, DegradationSpec,
};
