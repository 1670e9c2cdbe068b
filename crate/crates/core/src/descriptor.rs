//! Per-pose frequency features and their fusion into a multi-pose descriptor.
//!
//! A frequency feature concatenates the zigzag-ordered low-frequency DCT
//! coefficients of the four Haar sub-bands (`ll | lh | hl | hh`).
//!
//! Fusion keeps a fixed slot layout so every descriptor has the same
//! dimension:
//!
//! ```text
//! [ base | mask_1 * aux_1 | ... | mask_{n_p-1} * aux_{n_p-1} ]
//! ```
//!
//! An auxiliary coefficient is redundant (masked to zero) when it lies within
//! a relative tolerance of the base coefficient at the same index.

use rayon::prelude::*;

use crate::dataset::FaceImage;
use crate::error::{Error, Result};
use crate::transforms::{dct2, dwt_haar_2d_levels, zigzag_take};

/// Floor on the base magnitude used by the redundancy test.
pub const REDUNDANCY_ABS_FLOOR: f64 = 1e-6;

pub const DEFAULT_K_COEFF: usize = 60;
pub const DEFAULT_SLOTS: usize = 5;
pub const DEFAULT_TAU_REL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureParams {
    /// Zigzag coefficients kept per sub-band.
    pub k_coeff: usize,
    pub wavelet_levels: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            k_coeff: DEFAULT_K_COEFF,
            wavelet_levels: 1,
        }
    }
}

impl FeatureParams {
    pub fn feature_len(&self) -> usize {
        4 * self.k_coeff
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqFeature {
    pub values: Vec<f64>,
    pub class_id: usize,
    pub pose_index: usize,
}

/// `true` marks a kept (non-redundant) coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedundancyMask {
    pub bits: Vec<bool>,
}

impl RedundancyMask {
    pub fn empty(len: usize) -> Self {
        RedundancyMask {
            bits: vec![false; len],
        }
    }

    pub fn kept(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Fused multi-pose descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Hffd {
    /// `n_p * n_f` values, slot-major.
    pub slots: Vec<f64>,
    /// One mask per auxiliary slot (`n_p - 1` of them).
    pub masks: Vec<RedundancyMask>,
    pub class_id: usize,
    pub n_p: usize,
    pub n_f: usize,
}

impl Hffd {
    pub fn dim(&self) -> usize {
        self.n_p * self.n_f
    }

    pub fn slot(&self, i: usize) -> &[f64] {
        &self.slots[i * self.n_f..(i + 1) * self.n_f]
    }

    pub fn base(&self) -> &[f64] {
        self.slot(0)
    }

    /// Descriptor for a lone probe image: the feature in slot 0, every
    /// auxiliary slot empty.
    pub fn single(feature: &FreqFeature, n_p: usize) -> Result<Hffd> {
        fuse_hffd(feature, &[], n_p, DEFAULT_TAU_REL)
    }

    /// Checks the layout invariants; used by decoders on untrusted input.
    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0 || self.n_f == 0 {
            return Err(Error::shape("descriptor needs n_p >= 1 and n_f >= 1"));
        }
        if self.slots.len() != self.dim() || self.masks.len() != self.n_p - 1 {
            return Err(Error::shape(format!(
                "descriptor layout mismatch: {} values, {} masks for n_p = {}, n_f = {}",
                self.slots.len(),
                self.masks.len(),
                self.n_p,
                self.n_f
            )));
        }
        for (i, mask) in self.masks.iter().enumerate() {
            if mask.bits.len() != self.n_f {
                return Err(Error::shape(format!("mask {} has wrong length", i + 1)));
            }
            let slot = self.slot(i + 1);
            if let Some(j) = (0..self.n_f).find(|&j| !mask.bits[j] && slot[j] != 0.0) {
                return Err(Error::invalid(format!(
                    "slot {} entry {j} is nonzero but masked out",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Haar decomposition, DCT of every sub-band, then the first `k_coeff`
/// zigzag coefficients of each band concatenated as `ll | lh | hl | hh`.
pub fn extract_freq_features(image: &FaceImage, params: FeatureParams) -> Result<FreqFeature> {
    let bands = dwt_haar_2d_levels(&image.pixels, params.wavelet_levels)?;
    let (side, _) = bands.shape();
    if params.k_coeff == 0 || params.k_coeff > side * side {
        return Err(Error::invalid(format!(
            "k_coeff = {} must lie in 1..={} for {side}x{side} sub-bands",
            params.k_coeff,
            side * side
        )));
    }
    let mut values = Vec::with_capacity(params.feature_len());
    for band in bands.bands() {
        values.extend(zigzag_take(&dct2(band)?, params.k_coeff)?);
    }
    Ok(FreqFeature {
        values,
        class_id: image.class_id,
        pose_index: image.pose_index,
    })
}

/// Marks coefficient `j` of `f_i` redundant when
/// `|f_i[j] - f_b[j]| <= tau_rel * max(|f_b[j]|, 1e-6)`.
pub fn redundancy_mask(f_i: &FreqFeature, f_b: &FreqFeature, tau_rel: f64) -> Result<RedundancyMask> {
    if f_i.values.len() != f_b.values.len() {
        return Err(Error::shape(format!(
            "feature lengths differ: {} vs {}",
            f_i.values.len(),
            f_b.values.len()
        )));
    }
    if tau_rel.is_nan() || tau_rel < 0.0 {
        return Err(Error::invalid(format!("tau_rel must be >= 0, got {tau_rel}")));
    }
    let bits = f_i
        .values
        .iter()
        .zip(&f_b.values)
        .map(|(&a, &b)| {
            let tol = tau_rel * b.abs().max(REDUNDANCY_ABS_FLOOR);
            (a - b).abs() > tol
        })
        .collect();
    Ok(RedundancyMask { bits })
}

pub fn fuse_hffd(base: &FreqFeature, aux: &[FreqFeature], n_p: usize, tau_rel: f64) -> Result<Hffd> {
    if n_p == 0 {
        return Err(Error::invalid("slot count n_p must be at least 1"));
    }
    if aux.len() > n_p - 1 {
        return Err(Error::invalid(format!(
            "{} auxiliary poses do not fit in {} slots",
            aux.len(),
            n_p
        )));
    }
    let n_f = base.values.len();
    if n_f == 0 {
        return Err(Error::shape("empty base feature"));
    }
    let mut slots = vec![0.0; n_p * n_f];
    slots[..n_f].copy_from_slice(&base.values);
    let mut masks = Vec::with_capacity(n_p - 1);
    for (i, f) in aux.iter().enumerate() {
        if f.class_id != base.class_id {
            return Err(Error::invalid(format!(
                "auxiliary pose of class {} fused into class {}",
                f.class_id, base.class_id
            )));
        }
        let mask = redundancy_mask(f, base, tau_rel)?;
        let dst = &mut slots[(i + 1) * n_f..(i + 2) * n_f];
        for ((d, &v), &keep) in dst.iter_mut().zip(&f.values).zip(&mask.bits) {
            if keep {
                *d = v;
            }
        }
        masks.push(mask);
    }
    masks.resize(n_p - 1, RedundancyMask::empty(n_f));
    Ok(Hffd {
        slots,
        masks,
        class_id: base.class_id,
        n_p,
        n_f,
    })
}

/// One descriptor per base choice: sample `r` uses pose `r` as base and the
/// remaining poses, in pose order, as auxiliaries.
pub fn enroll_features(features: &[FreqFeature], n_p: usize, tau_rel: f64) -> Result<Vec<Hffd>> {
    if features.is_empty() {
        return Err(Error::invalid("cannot enroll a class without images"));
    }
    if features.len() > n_p {
        return Err(Error::invalid(format!(
            "{} training images exceed the {n_p} descriptor slots",
            features.len()
        )));
    }
    (0..features.len())
        .map(|r| {
            let aux: Vec<FreqFeature> = features
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != r)
                .map(|(_, f)| f.clone())
                .collect();
            fuse_hffd(&features[r], &aux, n_p, tau_rel)
        })
        .collect()
}

pub fn enroll_class(
    train_images: &[FaceImage],
    n_p: usize,
    params: FeatureParams,
    tau_rel: f64,
) -> Result<Vec<Hffd>> {
    if train_images.is_empty() {
        return Err(Error::invalid("cannot enroll a class without images"));
    }
    let features = train_images
        .par_iter()
        .map(|img| extract_freq_features(img, params))
        .collect::<Result<Vec<_>>>()?;
    enroll_features(&features, n_p, tau_rel)
}
