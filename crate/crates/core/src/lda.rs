//! Fisher linear discriminant analysis.
//!
//! Scatter matrices:
//!
//! ```text
//! S_b = sum_k P_k (mu_k - mu)(mu_k - mu)^T
//! S_w = 1/N sum_k sum_i (d_i^k - mu_k)(d_i^k - mu_k)^T
//! ```
//!
//! The projection maximizes `|W^T S_b W| / |W^T S_w W|`. It is obtained by
//! regularizing `S_w' = S_w + eps I`, factoring `S_w' = C C^T`, solving the
//! symmetric eigenproblem of `C^-1 S_b C^-T` and mapping back with
//! `W = C^-T U`. Columns satisfy `W^T S_w' W = I`.
//!
//! Descriptors are usually much longer than the number of training samples.
//! In that case the scatter matrices are low rank and the solver works on
//! their factors instead of the dense `n x n` matrices; both routes solve the
//! same generalized eigenproblem.

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, QR};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"HLDA";
pub const MODEL_VERSION: u16 = 1;
pub const DEFAULT_EPSILON_REL: f64 = 1e-6;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_CUTOFF_REL: f64 = 1e-10;

/// Class prior used in the between-class scatter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Prior {
    /// `P_k = N_k / N`; total scatter equals `S_w + S_b`.
    #[default]
    OverN,
    /// `P_k = N_k / L`. Differs from `OverN` by a positive factor on `S_b`
    /// when classes are balanced.
    OverL,
}

impl Prior {
    pub fn name(self) -> &'static str {
        match self {
            Prior::OverN => "over_N",
            Prior::OverL => "over_L",
        }
    }
}

impl std::str::FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "over_N" | "over_n" | "n" => Ok(Prior::OverN),
            "over_L" | "over_l" | "l" => Ok(Prior::OverL),
            _ => Err(Error::invalid(format!("unknown prior {s:?} (over_N | over_L)"))),
        }
    }
}

/// Samples of one class, all of equal length.
#[derive(Debug, Clone)]
pub struct ClassSamples<'a> {
    pub label: usize,
    pub samples: Vec<&'a [f64]>,
}

/// Low-rank factors with `S_b = between * between^T` and
/// `S_w = within * within^T`.
#[derive(Debug, Clone)]
struct ScatterFactors {
    between: DMatrix<f64>,
    within: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ScatterPair {
    pub s_b: DMatrix<f64>,
    pub s_w: DMatrix<f64>,
    pub mu_overall: DVector<f64>,
    pub class_means: Vec<DVector<f64>>,
    pub class_counts: Vec<usize>,
    pub total_count: usize,
    pub class_count: usize,
    pub class_labels: Vec<usize>,
    factors: Option<ScatterFactors>,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl ScatterPair {
    /// A pair given directly as matrices, without sample statistics.
    /// `class_count` bounds the default retained dimension (`L - 1`).
    pub fn from_matrices(s_b: DMatrix<f64>, s_w: DMatrix<f64>, class_count: usize) -> Result<Self> {
        let n = s_b.nrows();
        if !s_b.is_square() || s_w.shape() != s_b.shape() {
            return Err(Error::shape(format!(
                "scatter matrices must be square and equal-sized, got {:?} and {:?}",
                s_b.shape(),
                s_w.shape()
            )));
        }
        Ok(ScatterPair {
            s_b,
            s_w,
            mu_overall: DVector::zeros(n),
            class_means: Vec::new(),
            class_counts: Vec::new(),
            total_count: 0,
            class_count,
            class_labels: (0..class_count).collect(),
            factors: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.s_b.nrows()
    }

    /// `(1/N) sum (d - mu)(d - mu)^T` over all samples, for checking
    /// `T = S_w + S_b`.
    pub fn total_scatter(classes: &[ClassSamples<'_>]) -> Result<DMatrix<f64>> {
        let rows: Vec<&[f64]> = classes.iter().flat_map(|c| c.samples.iter().copied()).collect();
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        let x = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        let mean = x.row_mean();
        let mut xc = x;
        for mut row in xc.row_iter_mut() {
            row -= &mean;
        }
        let mut t = xc.transpose() * &xc / rows.len() as f64;
        symmetrize(&mut t);
        Ok(t)
    }
}

pub fn scatter_matrices(classes: &[ClassSamples<'_>], prior: Prior) -> Result<ScatterPair> {
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "LDA needs at least two classes, got {}",
            classes.len()
        )));
    }
    let n = classes
        .iter()
        .flat_map(|c| c.samples.first())
        .map(|s| s.len())
        .next()
        .unwrap_or(0);
    if n == 0 {
        return Err(Error::shape("empty samples"));
    }
    for c in classes {
        if c.samples.is_empty() {
            return Err(Error::invalid(format!("class {} has no samples", c.label)));
        }
        if let Some(bad) = c.samples.iter().find(|s| s.len() != n) {
            return Err(Error::shape(format!(
                "class {} has a sample of length {} (expected {n})",
                c.label,
                bad.len()
            )));
        }
    }
    let class_count = classes.len();
    let class_counts: Vec<usize> = classes.iter().map(|c| c.samples.len()).collect();
    let total_count: usize = class_counts.iter().sum();

    let class_means: Vec<DVector<f64>> = classes
        .iter()
        .map(|c| {
            let mut mean = DVector::zeros(n);
            for s in &c.samples {
                for (m, v) in mean.iter_mut().zip(s.iter()) {
                    *m += v;
                }
            }
            mean / c.samples.len() as f64
        })
        .collect();
    let mut mu_overall = DVector::zeros(n);
    for (mean, &count) in class_means.iter().zip(&class_counts) {
        mu_overall.axpy(count as f64, mean, 1.0);
    }
    mu_overall /= total_count as f64;

    // Centered samples as columns: S_w = within * within^T.
    let scale = (1.0 / total_count as f64).sqrt();
    let mut within = DMatrix::zeros(n, total_count);
    let mut col = 0;
    for (c, mean) in classes.iter().zip(&class_means) {
        for s in &c.samples {
            for j in 0..n {
                within[(j, col)] = (s[j] - mean[j]) * scale;
            }
            col += 1;
        }
    }
    let mut between = DMatrix::zeros(n, class_count);
    for (k, (mean, &count)) in class_means.iter().zip(&class_counts).enumerate() {
        let p = match prior {
            Prior::OverN => count as f64 / total_count as f64,
            Prior::OverL => count as f64 / class_count as f64,
        };
        between.set_column(k, &((mean - &mu_overall) * p.sqrt()));
    }

    let mut s_w = &within * within.transpose();
    symmetrize(&mut s_w);
    let mut s_b = &between * between.transpose();
    symmetrize(&mut s_b);

    Ok(ScatterPair {
        s_b,
        s_w,
        mu_overall,
        class_means,
        class_counts,
        total_count,
        class_count,
        class_labels: classes.iter().map(|c| c.label).collect(),
        factors: Some(ScatterFactors { between, within }),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// `n x m` projection, columns by descending eigenvalue.
    pub w: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Ridge added to `S_w`.
    pub epsilon: f64,
    pub class_labels: Vec<usize>,
}

/// Makes the largest-magnitude entry of every column positive.
fn fix_signs(w: &mut DMatrix<f64>) {
    for mut col in w.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

fn sym_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigen solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((values, vectors))
}

fn retained(values: &[f64], limit: usize) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    values
        .iter()
        .take_while(|&&v| v > EIGEN_CUTOFF_REL * top)
        .count()
        .min(limit)
}

/// Dense route: Cholesky `S_w' = L L^T`, eigen of `L^-1 S_b L^-T`.
fn solve_dense(s_b: &DMatrix<f64>, s_w: &DMatrix<f64>, eps: f64, limit: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = s_b.nrows();
    let regularized = s_w + DMatrix::identity(n, n) * eps;
    let chol = Cholesky::new(regularized).ok_or_else(|| {
        Error::Numerical("regularized within-class scatter is not positive definite".into())
    })?;
    let l = chol.l();
    let singular = || Error::Numerical("singular Cholesky factor".into());
    let y = l.solve_lower_triangular(s_b).ok_or_else(singular)?;
    let mut whitened = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(singular)?;
    symmetrize(&mut whitened);
    let (values, vectors) = sym_eigen(whitened)?;
    let m = retained(&values, limit);
    let u = vectors.columns(0, m).into_owned();
    let w = l.tr_solve_lower_triangular(&u).ok_or_else(singular)?;
    Ok((values[..m].to_vec(), w))
}

/// Low-rank route. With `within = Q R` and `R R^T = V diag(lambda) V^T`,
/// `S_w' = U diag(lambda + eps) U^T + eps (I - U U^T)` for `U = Q V`. The
/// symmetric square root of that is the factor `C`, so `C^-1 S_b C^-1` has the
/// same non-zero spectrum as the small matrix `G^T G` with `G = C^-1 between`.
fn solve_factored(f: &ScatterFactors, eps: f64, limit: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let qr = QR::new(f.within.clone());
    let q = qr.q();
    let r = qr.r();
    let mut rrt = &r * r.transpose();
    symmetrize(&mut rrt);
    let (lambda, v) = sym_eigen(rrt)?;
    let u = q * v;
    let inv_sqrt: DVector<f64> =
        DVector::from_iterator(lambda.len(), lambda.iter().map(|&l| 1.0 / (l.max(0.0) + eps).sqrt()));
    let eps_inv_sqrt = 1.0 / eps.sqrt();
    let whiten = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let coords = u.transpose() * x;
        let complement = x - &u * &coords;
        let mut scaled = coords;
        for (mut row, s) in scaled.row_iter_mut().zip(inv_sqrt.iter()) {
            row *= *s;
        }
        &u * scaled + complement * eps_inv_sqrt
    };
    let g = whiten(&f.between);
    let mut gram = g.transpose() * &g;
    symmetrize(&mut gram);
    let (theta, vecs) = sym_eigen(gram)?;
    let m = retained(&theta, limit);
    let mut dirs = &g * vecs.columns(0, m);
    for (mut col, t) in dirs.column_iter_mut().zip(&theta) {
        col /= t.sqrt();
    }
    Ok((theta[..m].to_vec(), whiten(&dirs)))
}

/// Solves the regularized Fisher eigenproblem.
///
/// `epsilon_rel` sets the ridge `eps = epsilon_rel * trace(S_w) / n`
/// (`epsilon_rel` itself when the trace vanishes). The number of kept
/// directions is `min(m_requested or L-1, #{lambda > 1e-10 lambda_max})`.
pub fn fit_lda(scatter: &ScatterPair, m_requested: Option<usize>, epsilon_rel: f64) -> Result<LdaModel> {
    let n = scatter.dim();
    if n == 0 {
        return Err(Error::shape("empty scatter matrices"));
    }
    if !scatter.s_b.iter().chain(scatter.s_w.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numerical("scatter matrices contain non-finite entries".into()));
    }
    if !(epsilon_rel.is_finite() && epsilon_rel >= 0.0) {
        return Err(Error::invalid(format!("epsilon_rel must be finite and >= 0, got {epsilon_rel}")));
    }
    if m_requested == Some(0) {
        return Err(Error::invalid("requested LDA dimension must be positive"));
    }
    let trace = scatter.s_w.trace();
    let epsilon = if trace > 0.0 {
        epsilon_rel * trace / n as f64
    } else {
        epsilon_rel
    };
    let limit = m_requested.unwrap_or(scatter.class_count.saturating_sub(1).max(1));

    let (eigenvalues, mut w) = match &scatter.factors {
        Some(f) if f.within.ncols() < n && epsilon > 0.0 => solve_factored(f, epsilon, limit)?,
        _ => solve_dense(&scatter.s_b, &scatter.s_w, epsilon, limit)?,
    };
    if eigenvalues.is_empty() {
        return Err(Error::Numerical(
            "between-class scatter vanishes; no discriminant direction".into(),
        ));
    }
    fix_signs(&mut w);
    Ok(LdaModel {
        w,
        eigenvalues,
        epsilon,
        class_labels: scatter.class_labels.clone(),
    })
}

impl LdaModel {
    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `W^T d`.
    pub fn project(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "cannot project a {}-vector with a model for {} inputs",
                d.len(),
                self.input_dim()
            )));
        }
        Ok(self
            .w
            .column_iter()
            .map(|col| col.iter().zip(d).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `||S_b w - lambda S_w' w||` for unit-length column `i`, together with
    /// the bound `1e-8 (||S_b|| + lambda ||S_w'||)` it should respect.
    pub fn eigen_residual(&self, scatter: &ScatterPair, i: usize) -> (f64, f64) {
        let n = self.input_dim();
        let regularized = &scatter.s_w + DMatrix::identity(n, n) * self.epsilon;
        let w = self.w.column(i).normalize();
        let lambda = self.eigenvalues[i];
        let r = &scatter.s_b * &w - (&regularized * &w) * lambda;
        let bound = 1e-8 * (scatter.s_b.norm() + lambda * regularized.norm());
        (r.norm(), bound)
    }

    /// Rayleigh quotient `w^T S_b w / w^T S_w' w` of column `i`.
    pub fn fisher_ratio(&self, scatter: &ScatterPair, i: usize) -> f64 {
        let n = self.input_dim();
        let regularized = &scatter.s_w + DMatrix::identity(n, n) * self.epsilon;
        let w = self.w.column(i);
        (w.transpose() * &scatter.s_b * w)[(0, 0)] / (w.transpose() * regularized * w)[(0, 0)]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (n, m) = self.w.shape();
        let mut w = Writer::with_capacity(30 + 8 * (n * m + m) + 4 * self.class_labels.len());
        w.bytes(MODEL_MAGIC);
        w.u16(MODEL_VERSION);
        let to_u32 = |v: usize| {
            u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit in u32")))
        };
        w.u32(to_u32(n)?);
        w.u32(to_u32(m)?);
        w.f64(self.epsilon);
        // nalgebra storage is column-major already
        w.f64s(self.w.as_slice());
        w.f64s(&self.eigenvalues);
        w.u32(to_u32(self.class_labels.len())?);
        for &label in &self.class_labels {
            w.u32(to_u32(label)?);
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "model");
        if r.take(4)? != MODEL_MAGIC {
            return Err(r.err("bad magic (expected \"HLDA\")"));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let m = r.u32()? as usize;
        if n == 0 || m == 0 || m > n {
            return Err(r.err(format!("invalid dimensions n = {n}, m = {m}")));
        }
        let epsilon = r.f64()?;
        let values = r.f64s(n.checked_mul(m).ok_or_else(|| r.err("dimension overflow"))?)?;
        let eigenvalues = r.f64s(m)?;
        let count = r.u32()? as usize;
        if count > r.remaining() / 4 {
            return Err(r.err("class label list truncated"));
        }
        let class_labels = (0..count)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        r.expect_end()?;
        if !epsilon.is_finite() || values.iter().chain(&eigenvalues).any(|v| !v.is_finite()) {
            return Err(r.err("non-finite values"));
        }
        Ok(LdaModel {
            w: DMatrix::from_vec(n, m, values),
            eigenvalues,
            epsilon,
            class_labels,
        })
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

pub fn project(model: &LdaModel, d: &[f64]) -> Result<Vec<f64>> {
    model.project(d)
}
