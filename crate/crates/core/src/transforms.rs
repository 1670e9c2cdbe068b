//! Orthonormal Haar wavelet, orthonormal DCT-II and zigzag scanning.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The four half-resolution outputs of one 2D Haar level.
///
/// Naming follows the filter applied along (columns, rows): `hl` is high-pass
/// across columns and low-pass across rows, `lh` the opposite.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBandSet {
    pub ll: DMatrix<f64>,
    pub lh: DMatrix<f64>,
    pub hl: DMatrix<f64>,
    pub hh: DMatrix<f64>,
}

impl SubBandSet {
    pub fn shape(&self) -> (usize, usize) {
        self.ll.shape()
    }

    /// Bands in feature order: ll, lh, hl, hh.
    pub fn bands(&self) -> [&DMatrix<f64>; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }
}

/// Single-level orthonormal 2D Haar transform.
///
/// Each 2x2 block `[[a, b], [c, d]]` maps to
/// `ll = (a+b+c+d)/2`, `hl = (a-b+c-d)/2`, `lh = (a+b-c-d)/2`, `hh = (a-b-c+d)/2`.
pub fn dwt_haar_2d(image: &DMatrix<f64>) -> Result<SubBandSet> {
    let (rows, cols) = image.shape();
    if rows == 0 || cols == 0 || rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::shape(format!(
            "Haar transform needs even, non-zero dimensions, got {rows}x{cols}"
        )));
    }
    let (hr, hc) = (rows / 2, cols / 2);
    let mut ll = DMatrix::zeros(hr, hc);
    let mut lh = DMatrix::zeros(hr, hc);
    let mut hl = DMatrix::zeros(hr, hc);
    let mut hh = DMatrix::zeros(hr, hc);
    for j in 0..hc {
        for i in 0..hr {
            let a = image[(2 * i, 2 * j)];
            let b = image[(2 * i, 2 * j + 1)];
            let c = image[(2 * i + 1, 2 * j)];
            let d = image[(2 * i + 1, 2 * j + 1)];
            ll[(i, j)] = (a + b + c + d) * 0.5;
            hl[(i, j)] = (a - b + c - d) * 0.5;
            lh[(i, j)] = (a + b - c - d) * 0.5;
            hh[(i, j)] = (a - b - c + d) * 0.5;
        }
    }
    Ok(SubBandSet { ll, lh, hl, hh })
}

/// Exact inverse of [`dwt_haar_2d`].
pub fn idwt_haar_2d(bands: &SubBandSet) -> Result<DMatrix<f64>> {
    let shape = bands.ll.shape();
    if bands.lh.shape() != shape || bands.hl.shape() != shape || bands.hh.shape() != shape {
        return Err(Error::shape(format!(
            "sub-band shapes differ: ll {:?}, lh {:?}, hl {:?}, hh {:?}",
            shape,
            bands.lh.shape(),
            bands.hl.shape(),
            bands.hh.shape()
        )));
    }
    let (hr, hc) = shape;
    let mut out = DMatrix::zeros(hr * 2, hc * 2);
    for j in 0..hc {
        for i in 0..hr {
            let (s, h, v, d) = (
                bands.ll[(i, j)],
                bands.hl[(i, j)],
                bands.lh[(i, j)],
                bands.hh[(i, j)],
            );
            out[(2 * i, 2 * j)] = (s + h + v + d) * 0.5;
            out[(2 * i, 2 * j + 1)] = (s - h + v - d) * 0.5;
            out[(2 * i + 1, 2 * j)] = (s + h - v - d) * 0.5;
            out[(2 * i + 1, 2 * j + 1)] = (s - h - v + d) * 0.5;
        }
    }
    Ok(out)
}

/// Repeats the Haar step on the approximation band `levels` times and returns
/// the sub-bands of the deepest level.
pub fn dwt_haar_2d_levels(image: &DMatrix<f64>, levels: usize) -> Result<SubBandSet> {
    if levels == 0 {
        return Err(Error::invalid("wavelet depth must be at least 1"));
    }
    let mut bands = dwt_haar_2d(image)?;
    for _ in 1..levels {
        bands = dwt_haar_2d(&bands.ll)?;
    }
    Ok(bands)
}

/// Orthonormal DCT-II basis: `basis[(k, n)] = a(k) cos(pi (2n+1) k / 2N)`.
pub fn dct_basis(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        scale * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

fn check_square(block: &DMatrix<f64>) -> Result<usize> {
    let (r, c) = block.shape();
    if r != c || r == 0 {
        return Err(Error::shape(format!("DCT needs a non-empty square block, got {r}x{c}")));
    }
    Ok(r)
}

/// Separable orthonormal 2D DCT-II.
pub fn dct2(block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(block)?;
    let c = dct_basis(n);
    Ok(&c * block * c.transpose())
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(coeffs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(coeffs)?;
    let c = dct_basis(n);
    Ok(c.transpose() * coeffs * c)
}

/// JPEG-style anti-diagonal traversal of an `n`x`n` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZigzagOrder {
    pub n: usize,
    pub permutation: Vec<(usize, usize)>,
}

impl ZigzagOrder {
    pub fn new(n: usize) -> Self {
        let mut permutation = Vec::with_capacity(n * n);
        if n > 0 {
            for s in 0..(2 * n - 1) {
                let lo = s.saturating_sub(n - 1);
                let hi = s.min(n - 1);
                if s % 2 == 0 {
                    // up-right: row decreasing
                    for row in (lo..=hi).rev() {
                        permutation.push((row, s - row));
                    }
                } else {
                    for row in lo..=hi {
                        permutation.push((row, s - row));
                    }
                }
            }
        }
        ZigzagOrder { n, permutation }
    }
}

/// The first `k` entries of `coeffs` in zigzag order.
pub fn zigzag_take(coeffs: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let n = check_square(coeffs)?;
    if k > n * n {
        return Err(Error::invalid(format!(
            "cannot take {k} zigzag coefficients from a {n}x{n} block"
        )));
    }
    Ok(ZigzagOrder::new(n)
        .permutation
        .iter()
        .take(k)
        .map(|&(r, c)| coeffs[(r, c)])
        .collect())
}
