//! The enrolled descriptor file ("HFFD" gallery).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   "HFFD"
//! version u16
//! L, n_p, n_f            u32 x 3
//! L times:
//!   class_id, count      u32 x 2
//!   count x (n_p * n_f)  f64 slot values
//!   count x (n_p - 1)    masks, each ceil(n_f / 8) bytes, LSB-first
//! ```

use std::fs;
use std::path::Path;

use crate::codec::{packed_len, Reader, Writer};
use crate::descriptor::{Hffd, RedundancyMask};
use crate::error::{Error, Result};

pub const GALLERY_MAGIC: &[u8; 4] = b"HFFD";
pub const GALLERY_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryClass {
    pub class_id: usize,
    pub samples: Vec<Hffd>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    pub n_p: usize,
    pub n_f: usize,
    pub classes: Vec<GalleryClass>,
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{what} = {v} does not fit in u32")))
}

impl Gallery {
    /// Groups enrolled samples by class, keeping first-seen class order.
    pub fn from_samples(n_p: usize, n_f: usize, samples: Vec<Hffd>) -> Result<Self> {
        let mut classes: Vec<GalleryClass> = Vec::new();
        for s in samples {
            if s.n_p != n_p || s.n_f != n_f {
                return Err(Error::shape(format!(
                    "descriptor of class {} is {}x{}, gallery is {n_p}x{n_f}",
                    s.class_id, s.n_p, s.n_f
                )));
            }
            match classes.iter_mut().find(|c| c.class_id == s.class_id) {
                Some(c) => c.samples.push(s),
                None => classes.push(GalleryClass {
                    class_id: s.class_id,
                    samples: vec![s],
                }),
            }
        }
        Ok(Gallery { n_p, n_f, classes })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Hffd> {
        self.classes.iter().flat_map(|c| c.samples.iter())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mask_bytes = packed_len(self.n_f) * self.n_p.saturating_sub(1);
        let per_sample = self.n_p * self.n_f * 8 + mask_bytes;
        let total: usize = self.classes.iter().map(|c| 8 + c.samples.len() * per_sample).sum();
        let mut w = Writer::with_capacity(18 + total);
        w.bytes(GALLERY_MAGIC);
        w.u16(GALLERY_VERSION);
        w.u32(to_u32(self.classes.len(), "class count")?);
        w.u32(to_u32(self.n_p, "n_p")?);
        w.u32(to_u32(self.n_f, "n_f")?);
        for class in &self.classes {
            w.u32(to_u32(class.class_id, "class id")?);
            w.u32(to_u32(class.samples.len(), "sample count")?);
            for s in &class.samples {
                if s.n_p != self.n_p || s.n_f != self.n_f {
                    return Err(Error::shape("sample layout differs from gallery layout"));
                }
                w.f64s(&s.slots);
            }
            for s in &class.samples {
                for m in &s.masks {
                    w.bits(&m.bits);
                }
            }
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "gallery");
        if r.take(4)? != GALLERY_MAGIC {
            return Err(r.err("bad magic (expected \"HFFD\")"));
        }
        let version = r.u16()?;
        if version != GALLERY_VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let num_classes = r.u32()? as usize;
        let n_p = r.u32()? as usize;
        let n_f = r.u32()? as usize;
        if n_p == 0 || n_f == 0 {
            return Err(r.err("n_p and n_f must be positive"));
        }
        let dim = n_p
            .checked_mul(n_f)
            .ok_or_else(|| r.err("descriptor dimension overflows"))?;
        let mut classes = Vec::new();
        for _ in 0..num_classes {
            let class_id = r.u32()? as usize;
            let count = r.u32()? as usize;
            let values = r.f64s(
                count
                    .checked_mul(dim)
                    .ok_or_else(|| r.err("sample block overflows"))?,
            )?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(r.err(format!("class {class_id} holds non-finite values")));
            }
            let mut samples = Vec::with_capacity(count);
            for chunk in values.chunks_exact(dim) {
                samples.push(Hffd {
                    slots: chunk.to_vec(),
                    masks: Vec::with_capacity(n_p - 1),
                    class_id,
                    n_p,
                    n_f,
                });
            }
            for s in samples.iter_mut() {
                for _ in 1..n_p {
                    s.masks.push(RedundancyMask { bits: r.bits(n_f)? });
                }
                s.validate().map_err(|e| r.err(e.to_string()))?;
            }
            if classes.iter().any(|c: &GalleryClass| c.class_id == class_id) {
                return Err(r.err(format!("class {class_id} listed twice")));
            }
            classes.push(GalleryClass { class_id, samples });
        }
        r.expect_end()?;
        Ok(Gallery { n_p, n_f, classes })
    }

    pub fn save(&self, path: &Path) -> Result<usize> {
        let bytes = self.to_bytes()?;
        fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(bytes.len())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
