//! Reference generalized eigen-solver built from scratch (Cholesky,
//! triangular solves, cyclic Jacobi) for checking the LDA solver.

#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;

use super::SplitMix;

pub type Grid = Vec<Vec<f64>>;

fn to_grid(m: &DMatrix<f64>) -> Grid {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Plain Cholesky, lower triangular.
fn cholesky(a: &Grid) -> Grid {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves `L x = b` column by column for every column of `b`.
fn forward(l: &Grid, b: &Grid) -> Grid {
    let n = l.len();
    let cols = b[0].len();
    let mut x = vec![vec![0.0; cols]; n];
    for c in 0..cols {
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * x[k][c]).sum();
            x[i][c] = (b[i][c] - s) / l[i][i];
        }
    }
    x
}

fn transpose(a: &Grid) -> Grid {
    (0..a[0].len()).map(|j| (0..a.len()).map(|i| a[i][j]).collect()).collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
fn jacobi_eigenvalues(mut a: Grid) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Generalized eigenvalues of `(s_b, s_w + eps I)`, descending.
pub fn oracle(s_b: &DMatrix<f64>, s_w: &DMatrix<f64>, eps: f64) -> Vec<f64> {
    let n = s_b.nrows();
    let mut w = to_grid(s_w);
    for (i, row) in w.iter_mut().enumerate() {
        row[i] += eps;
    }
    let l = cholesky(&w);
    // A = L^-1 S_b L^-T
    let x = forward(&l, &to_grid(s_b));
    let a = transpose(&forward(&l, &transpose(&x)));
    let sym: Grid = (0..n).map(|i| (0..n).map(|j| 0.5 * (a[i][j] + a[j][i])).collect()).collect();
    jacobi_eigenvalues(sym)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut a: Grid) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

pub fn random_psd(rng: &mut SplitMix, n: usize, rank: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, rank, |_, _| rng.normal());
    &b * b.transpose()
}

pub fn random_pair(seed: u64, n: usize, rank_b: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = SplitMix::new(seed);
    let s_b = random_psd(&mut rng, n, rank_b);
    let s_w = random_psd(&mut rng, n, n + 2) + DMatrix::identity(n, n) * 0.1;
    (s_b, s_w)
}
