//! Shared fixtures: a deterministic synthetic face generator that writes
//! ORL-shaped datasets (92x112 8-bit PGM, one directory per subject).

#![allow(dead_code)]

pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};

pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Approximately standard normal (sum of uniforms).
    pub fn normal(&mut self) -> f64 {
        (0..12).map(|_| self.unit()).sum::<f64>() - 6.0
    }
}

pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) {
    fs::write(path, encode_pgm(width, height, data)).unwrap();
}

struct Blob {
    x: f64,
    y: f64,
    sx: f64,
    sy: f64,
    amp: f64,
}

struct Identity {
    skin: f64,
    face_rx: f64,
    face_ry: f64,
    blobs: Vec<Blob>,
}

impl Identity {
    fn new(rng: &mut SplitMix) -> Self {
        let eye_y = rng.range(-14.0, -8.0);
        let eye_dx = rng.range(8.0, 13.0);
        let eye_size = rng.range(2.5, 4.5);
        let eye_amp = rng.range(-0.45, -0.25);
        let nose_len = rng.range(6.0, 12.0);
        let mouth_y = rng.range(14.0, 22.0);
        let mouth_w = rng.range(6.0, 12.0);
        let brow = rng.range(-0.3, -0.1);
        let mut blobs = vec![
            Blob { x: -eye_dx, y: eye_y, sx: eye_size, sy: eye_size * 0.6, amp: eye_amp },
            Blob { x: eye_dx, y: eye_y, sx: eye_size, sy: eye_size * 0.6, amp: eye_amp },
            Blob { x: -eye_dx, y: eye_y - 6.0, sx: eye_size * 1.6, sy: 1.2, amp: brow },
            Blob { x: eye_dx, y: eye_y - 6.0, sx: eye_size * 1.6, sy: 1.2, amp: brow },
            Blob { x: 0.0, y: eye_y + nose_len * 0.5, sx: 2.0, sy: nose_len * 0.5, amp: rng.range(0.05, 0.15) },
            Blob { x: 0.0, y: eye_y + nose_len + 2.0, sx: 3.5, sy: 1.5, amp: rng.range(-0.25, -0.1) },
            Blob { x: 0.0, y: mouth_y, sx: mouth_w, sy: 1.8, amp: rng.range(-0.35, -0.15) },
        ];
        // identity-specific texture
        for _ in 0..6 {
            blobs.push(Blob {
                x: rng.range(-22.0, 22.0),
                y: rng.range(-30.0, 30.0),
                sx: rng.range(3.0, 9.0),
                sy: rng.range(3.0, 9.0),
                amp: rng.range(-0.15, 0.15),
            });
        }
        Identity {
            skin: rng.range(0.5, 0.8),
            face_rx: rng.range(26.0, 33.0),
            face_ry: rng.range(36.0, 44.0),
            blobs,
        }
    }

    fn render(&self, rng: &mut SplitMix, width: usize, height: usize) -> Vec<u8> {
        let shift_x = rng.range(-4.0, 4.0);
        let shift_y = rng.range(-2.0, 2.0);
        let scale = rng.range(0.95, 1.05);
        let gain = rng.range(0.85, 1.15);
        let side_light = rng.range(-0.08, 0.08);
        let expression = rng.range(0.8, 1.2);
        let (cx, cy) = (width as f64 / 2.0 + shift_x, height as f64 / 2.0 + shift_y);
        let mut out = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                let x = (c as f64 - cx) / scale;
                let y = (r as f64 - cy) / scale;
                let ellipse = (x / self.face_rx).powi(2) + (y / self.face_ry).powi(2);
                let mut v = 0.08 + 0.04 * (r as f64 / height as f64);
                if ellipse < 1.0 {
                    let edge = ((1.0 - ellipse) * 6.0).min(1.0);
                    let mut face = self.skin;
                    for (i, b) in self.blobs.iter().enumerate() {
                        let sx = if i == 6 { b.sx * expression } else { b.sx };
                        let d = ((x - b.x) / sx).powi(2) + ((y - b.y) / b.sy).powi(2);
                        face += b.amp * (-0.5 * d).exp();
                    }
                    v = v * (1.0 - edge) + face * edge;
                }
                v = v * gain * (1.0 + side_light * x / 30.0) + 0.02 * rng.normal();
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Writes `classes` subjects with `poses` images each under `root`, named
/// like ORL (`s1/1.pgm` ...). Returns the class directories.
pub fn write_synthetic_faces(root: &Path, classes: usize, poses: usize, seed: u64) -> Vec<PathBuf> {
    let (w, h) = (92, 112);
    let mut rng = SplitMix::new(seed);
    let mut dirs = Vec::new();
    for k in 0..classes {
        let id = Identity::new(&mut rng);
        let dir = root.join(format!("s{}", k + 1));
        fs::create_dir_all(&dir).unwrap();
        for p in 0..poses {
            let img = id.render(&mut rng, w, h);
            write_pgm(&dir.join(format!("{}.pgm", p + 1)), w, h, &img);
        }
        dirs.push(dir);
    }
    dirs
}

/// Two subjects whose images are flat 0.2 and 0.8 gray.
pub fn write_constant_pair(root: &Path, poses: usize) {
    for (name, value) in [("a", 51u8), ("b", 204u8)] {
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        for p in 0..poses {
            write_pgm(&dir.join(format!("{p}.pgm")), 16, 16, &[value; 256]);
        }
    }
}
