//! Direct point-count matching and Euclidean matching in LDA space.

use std::cmp::Ordering;

use crate::descriptor::Hffd;
use crate::error::{Error, Result};
use crate::lda::LdaModel;

/// Fraction of the per-index gallery range used as the default point
/// matching tolerance.
pub const DEFAULT_TAU_M_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub class_id: usize,
    pub hffd: Hffd,
    /// `W^T D`, present once a model has been applied.
    pub projected: Option<Vec<f64>>,
}

impl GalleryEntry {
    pub fn new(hffd: Hffd) -> Self {
        GalleryEntry {
            class_id: hffd.class_id,
            hffd,
            projected: None,
        }
    }

    /// Values present at coefficient index `j`: the base value plus every
    /// auxiliary value whose mask bit is set.
    fn values_at(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let h = &self.hffd;
        std::iter::once(h.slots[j]).chain(
            h.masks
                .iter()
                .enumerate()
                .filter(move |(_, m)| m.bits[j])
                .map(move |(i, _)| h.slots[(i + 1) * h.n_f + j]),
        )
    }
}

pub fn project_gallery(model: &LdaModel, entries: &mut [GalleryEntry]) -> Result<()> {
    for e in entries.iter_mut() {
        e.projected = Some(model.project(&e.hffd.slots)?);
    }
    Ok(())
}

/// Point matching tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// One tolerance per coefficient index.
    PerIndex(Vec<f64>),
}

impl Tolerance {
    fn at(&self, j: usize) -> f64 {
        match self {
            Tolerance::Absolute(t) => *t,
            Tolerance::PerIndex(ts) => ts[j],
        }
    }

    /// `fraction * (max - min)` of the values present at each coefficient
    /// index across the gallery.
    pub fn adaptive(gallery: &[GalleryEntry], fraction: f64) -> Result<Tolerance> {
        let n_f = gallery
            .first()
            .map(|e| e.hffd.n_f)
            .ok_or_else(|| Error::invalid("empty gallery"))?;
        let mut lo = vec![f64::INFINITY; n_f];
        let mut hi = vec![f64::NEG_INFINITY; n_f];
        for e in gallery {
            if e.hffd.n_f != n_f {
                return Err(Error::shape("gallery entries differ in n_f"));
            }
            for j in 0..n_f {
                for v in e.values_at(j) {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        Ok(Tolerance::PerIndex(
            lo.iter().zip(&hi).map(|(l, h)| fraction * (h - l)).collect(),
        ))
    }

    fn check(&self, n_f: usize) -> Result<()> {
        match self {
            Tolerance::Absolute(t) if t.is_nan() || *t < 0.0 => {
                Err(Error::invalid(format!("matching tolerance must be >= 0, got {t}")))
            }
            Tolerance::PerIndex(ts) if ts.len() != n_f => Err(Error::shape(format!(
                "{} per-index tolerances for {n_f} coefficients",
                ts.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    pub matched_points: usize,
    pub sum_distance: f64,
    pub class_id: usize,
}

impl MatchScore {
    /// More points first, then smaller total distance, then smaller class id.
    fn better_than(&self, other: &MatchScore) -> bool {
        match self.matched_points.cmp(&other.matched_points) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match self.sum_distance.total_cmp(&other.sum_distance) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.class_id < other.class_id,
            },
        }
    }
}

/// Counts probe points that have a gallery value within tolerance at the same
/// coefficient index.
///
/// Probe points are every base coefficient plus every kept auxiliary
/// coefficient. A point matches when the nearest gallery value at its index
/// is within tolerance; the matched distances are summed.
pub fn direct_match_score(probe: &Hffd, entry: &GalleryEntry, tau_m: &Tolerance) -> Result<MatchScore> {
    let n_f = probe.n_f;
    if entry.hffd.n_f != n_f {
        return Err(Error::shape(format!(
            "probe has {n_f} coefficients per slot, gallery entry has {}",
            entry.hffd.n_f
        )));
    }
    tau_m.check(n_f)?;
    let mut matched_points = 0;
    let mut sum_distance = 0.0;
    let mut score_point = |j: usize, v: f64| {
        let nearest = entry
            .values_at(j)
            .map(|g| (v - g).abs())
            .fold(f64::INFINITY, f64::min);
        if nearest <= tau_m.at(j) {
            matched_points += 1;
            sum_distance += nearest;
        }
    };
    for (j, &v) in probe.base().iter().enumerate() {
        score_point(j, v);
    }
    for (i, mask) in probe.masks.iter().enumerate() {
        let slot = probe.slot(i + 1);
        for j in (0..n_f).filter(|&j| mask.bits[j]) {
            score_point(j, slot[j]);
        }
    }
    Ok(MatchScore {
        matched_points,
        sum_distance,
        class_id: entry.class_id,
    })
}

/// Class with the largest number of matching points.
pub fn classify_direct(probe: &Hffd, gallery: &[GalleryEntry], tau_m: &Tolerance) -> Result<MatchScore> {
    let mut best: Option<MatchScore> = None;
    for entry in gallery {
        let score = direct_match_score(probe, entry, tau_m)?;
        if best.as_ref().is_none_or(|b| score.better_than(b)) {
            best = Some(score);
        }
    }
    best.ok_or_else(|| Error::invalid("cannot classify against an empty gallery"))
}

/// What a projected probe is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LdaReference {
    /// Every projected training sample.
    #[default]
    Samples,
    /// The mean projection of each class.
    ClassMeans,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn nearest<'a>(probe: &[f64], refs: impl Iterator<Item = (usize, &'a [f64])>) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (class_id, r) in refs {
        if r.len() != probe.len() {
            return Err(Error::shape(format!(
                "gallery projection has {} dimensions, model produces {}",
                r.len(),
                probe.len()
            )));
        }
        let d = euclidean(probe, r);
        let better = match best {
            None => true,
            Some((c, bd)) => match d.total_cmp(&bd) {
                Ordering::Less => true,
                Ordering::Equal => class_id < c,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((class_id, d));
        }
    }
    best.ok_or_else(|| Error::invalid("cannot classify against an empty gallery"))
}

/// Projects the probe and returns the class of the nearest projected gallery
/// sample with its Euclidean distance. Ties go to the smaller class id.
pub fn classify_lda(probe: &Hffd, model: &LdaModel, gallery: &[GalleryEntry]) -> Result<(usize, f64)> {
    classify_lda_with(probe, model, gallery, LdaReference::Samples)
}

pub fn classify_lda_with(
    probe: &Hffd,
    model: &LdaModel,
    gallery: &[GalleryEntry],
    reference: LdaReference,
) -> Result<(usize, f64)> {
    let q = model.project(&probe.slots)?;
    classify_projected(&q, gallery, reference)
}

fn projected(e: &GalleryEntry) -> Result<&[f64]> {
    e.projected
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("gallery entry of class {} is not projected", e.class_id)))
}

/// Nearest-neighbour decision for an already projected probe.
pub fn classify_projected(q: &[f64], gallery: &[GalleryEntry], reference: LdaReference) -> Result<(usize, f64)> {
    match reference {
        LdaReference::Samples => {
            let refs = gallery
                .iter()
                .map(|e| projected(e).map(|p| (e.class_id, p)))
                .collect::<Result<Vec<_>>>()?;
            nearest(q, refs.into_iter())
        }
        LdaReference::ClassMeans => {
            let mut means: Vec<(usize, Vec<f64>, usize)> = Vec::new();
            for e in gallery {
                let p = projected(e)?;
                match means.iter_mut().find(|(c, _, _)| *c == e.class_id) {
                    Some((_, sum, count)) => {
                        if sum.len() != p.len() {
                            return Err(Error::shape("gallery projections differ in length"));
                        }
                        sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
                        *count += 1;
                    }
                    None => means.push((e.class_id, p.to_vec(), 1)),
                }
            }
            for (_, sum, count) in means.iter_mut() {
                sum.iter_mut().for_each(|s| *s /= *count as f64);
            }
            nearest(q, means.iter().map(|(c, m, _)| (*c, m.as_slice())))
        }
    }
}
