//! Face image loading, normalization and first-k protocol splits.
//!
//! A dataset is a directory with one subdirectory per subject:
//!
//! ```text
//! <root>/<class_dir>/<image files>
//! ```
//!
//! Classes are ordered by subdirectory name and images within a class by file
//! name, both lexicographically. The position of an image in that order is its
//! pose index.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Side length of the canonical face input.
pub const FACE_SIDE: usize = 128;

/// A normalized square grayscale face with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    /// Row-major view: `pixels[(row, col)]`.
    pub pixels: DMatrix<f64>,
    pub class_id: usize,
    pub pose_index: usize,
    pub source_path: PathBuf,
}

impl FaceImage {
    /// Wraps an in-memory matrix, checking the size and range invariants.
    pub fn new(pixels: DMatrix<f64>, class_id: usize, pose_index: usize) -> Result<Self> {
        if pixels.nrows() != FACE_SIDE || pixels.ncols() != FACE_SIDE {
            return Err(Error::shape(format!(
                "face image must be {FACE_SIDE}x{FACE_SIDE}, got {}x{}",
                pixels.nrows(),
                pixels.ncols()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(FaceImage {
            pixels,
            class_id,
            pose_index,
            source_path: PathBuf::new(),
        })
    }
}

/// Decoded grayscale raster, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Bilinear resize with corner-aligned sampling: output corners land
    /// exactly on input corners.
    pub fn resize(&self, out_w: usize, out_h: usize) -> GrayImage {
        let scale = |n_in: usize, n_out: usize| {
            if n_out <= 1 || n_in <= 1 {
                0.0
            } else {
                (n_in - 1) as f64 / (n_out - 1) as f64
            }
        };
        let sx = scale(self.width, out_w);
        let sy = scale(self.height, out_h);
        let mut data = Vec::with_capacity(out_w * out_h);
        for r in 0..out_h {
            let y = r as f64 * sy;
            let y0 = (y.floor() as usize).min(self.height - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = y - y0 as f64;
            for c in 0..out_w {
                let x = c as f64 * sx;
                let x0 = (x.floor() as usize).min(self.width - 1);
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = x - x0 as f64;
                // a + (b - a) t keeps constant regions bit-exact.
                let (p00, p01) = (self.get(y0, x0), self.get(y0, x1));
                let (p10, p11) = (self.get(y1, x0), self.get(y1, x1));
                let top = p00 + (p01 - p00) * tx;
                let bottom = p10 + (p11 - p10) * tx;
                data.push((top + (bottom - top) * ty).clamp(0.0, 1.0));
            }
        }
        GrayImage {
            width: out_w,
            height: out_h,
            data,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.height, self.width, &self.data)
    }
}

/// Decodes a binary PGM (P5) with an 8-bit maxval.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' && bytes[pos] != b'\r' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated PGM header".into()),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(format!("expected a number in PGM header at byte {start}"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?;
        *field = text
            .parse()
            .map_err(|_| format!("PGM header value {text:?} out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("degenerate PGM size {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PGM maxval {maxval} (8-bit only)"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after PGM maxval".into()),
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| "PGM dimensions overflow".to_string())?;
    let raster = bytes
        .get(pos..)
        .filter(|r| r.len() >= count)
        .ok_or_else(|| format!("PGM raster truncated: need {count} bytes"))?;
    let max = maxval as f64;
    let data = raster[..count]
        .iter()
        .map(|&b| (b as f64 / max).min(1.0))
        .collect();
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

/// Decodes an 8-bit PNG. Colour inputs are reduced to BT.601 luma.
pub fn decode_png(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    // EXPAND widens palette and sub-byte depths to 8 bits; 16-bit stays 16.
    if reader.info().bit_depth == png::BitDepth::Sixteen {
        return Err("16-bit PNG is not supported".into());
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| "PNG output size overflows".to_string())?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(format!("unsupported PNG bit depth {:?}", frame.bit_depth));
    }
    let (width, height) = (frame.width as usize, frame.height as usize);
    let channels = frame.color_type.samples();
    let luma = |px: &[u8]| -> f64 {
        let v = match channels {
            1 | 2 => px[0] as f64,
            _ => 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64,
        };
        (v / 255.0).clamp(0.0, 1.0)
    };
    let data = buf[..frame.buffer_size()]
        .chunks_exact(frame.line_size)
        .take(height)
        .flat_map(|line| line[..width * channels].chunks_exact(channels).map(luma))
        .collect::<Vec<_>>();
    if data.len() != width * height {
        return Err("PNG frame shorter than its header".into());
    }
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

/// Dispatches on the file signature.
pub fn decode_image(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    const PNG_SIG: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(PNG_SIG) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err("unsupported image format (expected binary PGM or PNG)".into())
    }
}

/// Loads an image file and normalizes it to a `size`x`size` face.
pub fn load_image(path: &Path, size: usize) -> Result<FaceImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let gray = decode_image(&bytes).map_err(|reason| Error::Image {
        path: path.to_path_buf(),
        reason,
    })?;
    Ok(FaceImage {
        pixels: gray.resize(size, size).to_matrix(),
        class_id: 0,
        pose_index: 0,
        source_path: path.to_path_buf(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub id: usize,
    pub name: String,
    pub images: Vec<PathBuf>,
}

/// Immutable listing of a dataset tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub name: String,
    pub classes: Vec<ClassEntry>,
    /// Non-fatal observations made while scanning (skipped directories).
    pub warnings: Vec<String>,
}

/// One image of the dataset with its class and pose.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageRef {
    pub class_id: usize,
    pub pose_index: usize,
    pub path: PathBuf,
}

impl ImageRef {
    pub fn load(&self) -> Result<FaceImage> {
        let mut face = load_image(&self.path, FACE_SIDE)?;
        face.class_id = self.class_id;
        face.pose_index = self.pose_index;
        Ok(face)
    }
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
            .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

pub fn scan_dataset(root: &Path) -> Result<DatasetIndex> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!(
            "dataset root {} does not exist or is not a directory",
            root.display()
        )));
    }
    let mut classes = Vec::new();
    let mut warnings = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let images: Vec<PathBuf> = sorted_entries(&dir)?
            .into_iter()
            .filter(|p| is_image_file(p))
            .collect();
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if images.is_empty() {
            let msg = format!("skipping {}: no PGM/PNG images", dir.display());
            warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        classes.push(ClassEntry {
            id: classes.len(),
            name,
            images,
        });
    }
    if classes.is_empty() {
        return Err(Error::Dataset(format!(
            "no classes found under {}",
            root.display()
        )));
    }
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string());
    Ok(DatasetIndex {
        name,
        classes,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<ImageRef>,
    pub test: Vec<ImageRef>,
}

impl DatasetIndex {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// The first `k` images of every class (or all of them when a class is
    /// smaller), without the disjointness requirement of [`split_first_k`].
    pub fn first_k(&self, k: usize) -> Vec<Vec<ImageRef>> {
        self.classes
            .iter()
            .map(|c| {
                c.images
                    .iter()
                    .take(k)
                    .enumerate()
                    .map(|(pose, p)| ImageRef {
                        class_id: c.id,
                        pose_index: pose,
                        path: p.clone(),
                    })
                    .collect()
            })
            .collect()
    }
}

/// First `k` images of every class train, the rest test.
pub fn split_first_k(index: &DatasetIndex, k: usize) -> Result<Split> {
    if k == 0 {
        return Err(Error::invalid("k_train must be at least 1"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in &index.classes {
        if class.images.len() <= k {
            return Err(Error::Dataset(format!(
                "class {:?} has {} images; need more than k_train = {k} so that testing is non-empty",
                class.name,
                class.images.len()
            )));
        }
        for (pose, path) in class.images.iter().enumerate() {
            let r = ImageRef {
                class_id: class.id,
                pose_index: pose,
                path: path.clone(),
            };
            if pose < k {
                train.push(r);
            } else {
                test.push(r);
            }
        }
    }
    Ok(Split { train, test })
}
