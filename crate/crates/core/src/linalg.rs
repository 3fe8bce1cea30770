//! Small dense complex linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    rank_of(&singular_values(m), tol)
}

pub(crate) fn rank_of(sv: &[f64], tol: f64) -> usize {
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > tol * smax).count(),
        _ => 0,
    }
}

/// Minimum-norm left inverse of a tall matrix with full column rank.
#[derive(Debug, Clone)]
pub struct Pinv {
    pub inverse: CMatrix,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl Pinv {
    pub fn condition_number(&self) -> f64 {
        if self.sigma_min > 0.0 {
            self.sigma_max / self.sigma_min
        } else {
            f64::INFINITY
        }
    }
}

/// Moore-Penrose pseudo-inverse through the SVD, with rank read at `tol`.
pub fn pinv(m: &CMatrix, tol: f64) -> Pinv {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Pinv { inverse: CMatrix::zeros(c, r), rank: 0, sigma_max: 0.0, sigma_min: 0.0 };
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let kk = sv.len();
    let mut inv = CMatrix::zeros(c, r);
    let mut rank = 0;
    for k in 0..kk {
        let s = sv[k];
        if smax > 0.0 && s > tol * smax {
            rank += 1;
            let scale = 1.0 / s;
            for i in 0..c {
                let vik = vt[(k, i)].conj() * scale;
                for j in 0..r {
                    inv[(i, j)] += vik * u[(j, k)].conj();
                }
            }
        }
    }
    let smin = if kk < c { 0.0 } else { sv.iter().copied().fold(f64::INFINITY, f64::min) };
    Pinv { inverse: inv, rank, sigma_max: smax, sigma_min: smin }
}

/// Frobenius norm of a complex slice.
pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
