//! Finite Gabor systems in C^L.
//!
//! The full Gabor matrix of a window `c` is the `L x L^2` matrix
//! `[D_0 W_L | D_1 W_L | ... | D_{L-1} W_L]` with `D_q = diag(T^q c)` and
//! `W_L` the unnormalized DFT matrix. The column for the cell `(q, m)` sits at
//! position `q * L + m` and has entries `c_{p-q} * w^{pm}`, which equals
//! `e^{2 pi i q m / L} (T^q M^m c)_p`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{rank_of, singular_values, CMatrix};
use crate::par;

/// Entries with modulus at or below this count as zero in `support_size`.
pub const ZERO_TOL: f64 = 1e-12;
/// Default relative threshold for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Largest L for which `spark` runs an exhaustive search.
pub const SPARK_LIMIT: usize = 7;
/// Largest L accepted by `minors_nonzero`.
pub const MINOR_LIMIT: usize = 5;
/// Cap on the number of column subsets examined by restricted spark checks.
pub const SUBSET_BUDGET: u64 = 20_000_000;

/// `e^{2 pi i k / n}` with `k` reduced first so large indices stay accurate.
pub fn unit_root(k: i64, n: usize) -> Complex64 {
    let n = n as i64;
    let r = k.rem_euclid(n);
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
}

/// A period-L weight sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub weights: Vec<Complex64>,
    pub seed: Option<u64>,
}

impl Window {
    pub fn new(weights: Vec<Complex64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameters("window length must be at least 1".into()));
        }
        Ok(Self { weights, seed: None })
    }

    pub fn from_real(weights: &[f64]) -> Result<Self> {
        Self::new(weights.iter().map(|&w| Complex64::new(w, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `c_n` for any integer `n`, reading the weights periodically.
    pub fn at(&self, n: i64) -> Complex64 {
        self.weights[n.rem_euclid(self.len() as i64) as usize]
    }

    /// Number of entries with modulus above `ZERO_TOL`.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|w| w.norm() > ZERO_TOL).count()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }
}

/// Cyclic shift: `result_p = x_{p-q}`.
pub fn translate(x: &[Complex64], q: i64) -> Vec<Complex64> {
    let l = x.len() as i64;
    (0..l).map(|p| x[(p - q).rem_euclid(l) as usize]).collect()
}

/// Modulation: `result_p = w^{pm} x_p`.
pub fn modulate(x: &[Complex64], m: i64) -> Vec<Complex64> {
    let l = x.len();
    x.iter().enumerate().map(|(p, &v)| unit_root(p as i64 * m, l) * v).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborMatrix {
    l: usize,
    entries: CMatrix,
}

impl GaborMatrix {
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Column position of the cell `(q, m)`.
    pub fn column_index(&self, q: usize, m: usize) -> usize {
        q * self.l + m
    }

    /// Inverse of `column_index`.
    pub fn cell_of(&self, col: usize) -> (usize, usize) {
        (col / self.l, col % self.l)
    }

    pub fn column(&self, q: usize, m: usize) -> Vec<Complex64> {
        self.entries.column(self.column_index(q, m)).iter().copied().collect()
    }

    /// The `L x |gamma|` submatrix of the listed cells, in list order.
    pub fn restricted(&self, gamma: &[(usize, usize)]) -> CMatrix {
        let cols: Vec<usize> = gamma.iter().map(|&(q, m)| self.column_index(q, m)).collect();
        self.columns(&cols)
    }

    pub fn columns(&self, cols: &[usize]) -> CMatrix {
        CMatrix::from_fn(self.l, cols.len(), |p, k| self.entries[(p, cols[k])])
    }

    /// Rows `p,q,m,re,im`, rows outer, columns in storage order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,q,m,re,im\n");
        for p in 0..self.l {
            for col in 0..self.l * self.l {
                let (q, m) = self.cell_of(col);
                let z = self.entries[(p, col)];
                s.push_str(&format!("{p},{q},{m},{:.16e},{:.16e}\n", z.re, z.im));
            }
        }
        s
    }
}

pub fn build_gabor_matrix(c: &Window) -> GaborMatrix {
    let l = c.len();
    let entries = DMatrix::from_fn(l, l * l, |p, col| {
        let (q, m) = (col / l, col % l);
        c.at(p as i64 - q as i64) * unit_root((p * m) as i64, l)
    });
    GaborMatrix { l, entries }
}

// --- combinatorics ---------------------------------------------------------

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// The `rank`-th k-subset of `0..n` in colexicographic order, ascending.
pub(crate) fn colex_unrank(mut rank: u64, k: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0usize; k];
    let mut hi = n;
    for i in (1..=k).rev() {
        // largest c in [i-1, hi) with C(c, i) <= rank
        let (mut lo, mut up) = (i - 1, hi - 1);
        while lo < up {
            let mid = (lo + up).div_ceil(2);
            if binomial(mid as u64, i as u64) <= rank {
                lo = mid;
            } else {
                up = mid - 1;
            }
        }
        out[i - 1] = lo;
        rank -= binomial(lo as u64, i as u64);
        hi = lo;
    }
    out
}

fn subset_rank(g: &GaborMatrix, cols: &[usize], tol: f64) -> usize {
    rank_of(&singular_values(&g.columns(cols)), tol)
}

/// Colex rank of the first dependent k-subset containing column 0, if any.
///
/// Translations and modulations act transitively on the columns and are
/// unitary, so every subset is equivalent to one containing column 0.
fn first_dependent_anchored(g: &GaborMatrix, k: usize, tol: f64) -> Option<Vec<usize>> {
    let n = g.l * g.l;
    if k == 0 || k > n {
        return None;
    }
    let count = binomial((n - 1) as u64, (k - 1) as u64);
    let subset = |r: u64| -> Vec<usize> {
        let mut cols = Vec::with_capacity(k);
        cols.push(0);
        cols.extend(colex_unrank(r, k - 1, n - 1).into_iter().map(|c| c + 1));
        cols
    };
    par::find_first(count, |r| subset_rank(g, &subset(r), tol) < k).map(subset)
}

fn anchored_count(g: &GaborMatrix, k: usize) -> u64 {
    let n = (g.l * g.l) as u64;
    binomial(n - 1, k as u64 - 1)
}

/// Size of the smallest numerically dependent column subset, or L+1.
pub fn spark(g: &GaborMatrix, tol: f64) -> Result<usize> {
    let l = g.l;
    if l > SPARK_LIMIT {
        return Err(Error::SearchBudgetExceeded(format!(
            "exhaustive spark is limited to L <= {SPARK_LIMIT}, got L = {l}"
        )));
    }
    // A dependent subset makes every superset dependent, so checking the
    // L-subsets first settles the full-spark case in one pass.
    if first_dependent_anchored(g, l, tol).is_none() {
        return Ok(l + 1);
    }
    for k in 1..l {
        if first_dependent_anchored(g, k, tol).is_some() {
            return Ok(k);
        }
    }
    Ok(l)
}

/// True iff every column subset of size below `s` is numerically independent.
pub fn spark_at_least(g: &GaborMatrix, s: usize, tol: f64) -> Result<bool> {
    if s <= 1 {
        return Ok(true);
    }
    let k = s - 1;
    if k > g.l {
        return Ok(false);
    }
    if anchored_count(g, k) > SUBSET_BUDGET {
        return Err(Error::SearchBudgetExceeded(format!(
            "{} subsets of size {k} exceed the budget",
            anchored_count(g, k)
        )));
    }
    Ok(first_dependent_anchored(g, k, tol).is_none())
}

/// True iff every square minor has modulus above `tol` times the product of
/// its column norms.
pub fn minors_nonzero(g: &GaborMatrix, tol: f64) -> Result<bool> {
    let l = g.l;
    if l > MINOR_LIMIT {
        return Err(Error::SearchBudgetExceeded(format!(
            "minor enumeration is limited to L <= {MINOR_LIMIT}, got L = {l}"
        )));
    }
    let n = l * l;
    for k in 1..=l {
        let row_sets: Vec<Vec<usize>> =
            (0..binomial(l as u64, k as u64)).map(|r| colex_unrank(r, k, l)).collect();
        let count = binomial(n as u64, k as u64);
        let bad = par::find_first(count, |r| {
            let cols = colex_unrank(r, k, n);
            row_sets.iter().any(|rows| {
                let sub = CMatrix::from_fn(k, k, |i, j| g.entries[(rows[i], cols[j])]);
                let scale: f64 = (0..k).map(|j| sub.column(j).norm()).product();
                sub.determinant().norm() <= tol * scale || scale == 0.0
            })
        });
        if bad.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

// --- window generation ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparkTarget {
    /// Spark `L + 1`.
    Full,
    /// Weights on the first `k` indices and spark `k + 1`.
    K(usize),
}

#[derive(Debug, Clone)]
pub struct GeneratedWindow {
    pub window: Window,
    pub draws: usize,
    pub spark: usize,
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Independent uniform phases, moduli uniform on `[1/2, 1]`, zero past `k`.
pub fn random_window<R: Rng>(l: usize, k: usize, rng: &mut R) -> Window {
    let weights = (0..l)
        .map(|n| {
            if n < k {
                let r = 0.5 + 0.5 * rng.random::<f64>();
                let th = 2.0 * PI * rng.random::<f64>();
                Complex64::from_polar(r, th)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Window { weights, seed: None }
}

/// Draws seeded random windows until one meets the spark target.
pub fn generate_window(
    l: usize,
    target: SparkTarget,
    seed: u64,
    max_draws: usize,
) -> Result<GeneratedWindow> {
    if l == 0 {
        return Err(Error::InvalidParameters("L must be at least 1".into()));
    }
    let k = match target {
        SparkTarget::Full => l,
        SparkTarget::K(k) => {
            if k == 0 || k > l {
                return Err(Error::InvalidParameters(format!("need 1 <= k <= L, got k = {k}")));
            }
            if k < l && !is_prime(l) {
                return Err(Error::InvalidParameters(format!(
                    "small-spark windows need prime L, got L = {l}"
                )));
            }
            k
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for draw in 1..=max_draws {
        let mut w = random_window(l, k, &mut rng);
        w.seed = Some(seed);
        let g = build_gabor_matrix(&w);
        let ok = if l <= SPARK_LIMIT {
            spark(&g, DEFAULT_RANK_TOL)? == k + 1
        } else {
            // k + 1 columns of one translation block live on k rows, so
            // spark <= k + 1 always holds and only the lower bound is checked.
            spark_at_least(&g, k + 1, DEFAULT_RANK_TOL)?
        };
        if ok {
            return Ok(GeneratedWindow { window: w, draws: draw, spark: k + 1 });
        }
    }
    Err(Error::GenerationFailed { draws: max_draws })
}
