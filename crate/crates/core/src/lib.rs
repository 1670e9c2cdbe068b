//! Multi-pose face recognition built on hybrid face feature descriptors (HFFD).
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: load grayscale faces from `<root>/<class>/<image>` trees and
//!    normalize them to 128x128 intensities in `[0, 1]`.
//! 2. [`transforms`]: single-level orthonormal Haar decomposition into four
//!    sub-bands, orthonormal 2D DCT-II of each band and a zigzag scan that keeps
//!    the lowest-frequency coefficients.
//! 3. [`descriptor`]: per-pose frequency features are fused into one descriptor
//!    per class sample. Auxiliary poses only keep the coefficients that differ
//!    from the base pose.
//! 4. [`lda`]: Fisher discriminant training on the descriptors.
//! 5. [`matcher`]: direct point-count matching and Euclidean nearest neighbour
//!    in the discriminant space.
//! 6. [`harness`]: first-k train/test protocols, timing and report output.

pub mod codec;
pub mod dataset;
pub mod descriptor;
pub mod error;
pub mod gallery;
pub mod harness;
pub mod lda;
pub mod matcher;
pub mod transforms;

pub use crate::dataset::{load_image, scan_dataset, split_first_k, DatasetIndex, FaceImage};
pub use crate::descriptor::{
    enroll_class, extract_freq_features, fuse_hffd, redundancy_mask, FeatureParams, FreqFeature,
    Hffd, RedundancyMask,
};
pub use crate::error::{Error, Result};
pub use crate::gallery::Gallery;
pub use crate::lda::{fit_lda, scatter_matrices, LdaModel, Prior, ScatterPair};
pub use crate::matcher::{classify_direct, classify_lda, direct_match_score, GalleryEntry};
