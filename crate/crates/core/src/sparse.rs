//! Recovery when the active cells are unknown: joint-sparse greedy decoding
//! of the measurement vectors followed by known-support reconstruction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{z_vector, ZakGrid};
use crate::error::{Error, Result};
use crate::gabor::{GaborMatrix, DEFAULT_RANK_TOL};
use crate::linalg::{pinv, CMatrix};
use crate::par;
use crate::reconstruct::{recover_eta_known_support, ReconstructionReport};
use crate::support::{check_identifiable, periodization_count, rectify, Cell, CellSupport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportEstimate {
    pub gamma_hat: Vec<Cell>,
    /// Relative Frobenius residual after each selection.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub exact_match: Option<bool>,
    pub k_max: usize,
    pub tol: f64,
    pub seed: Option<u64>,
}

impl SupportEstimate {
    pub fn compare(mut self, truth: &[Cell]) -> Self {
        let mut a = self.gamma_hat.clone();
        let mut b = truth.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        self.exact_match = Some(a == b);
        self
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Columns `Z_vec(u, v)` for the given base points; when there are more than
/// `4 L^2` points a seeded stride keeps `4 L^2` of them.
pub fn measurement_matrix(zgrid: &ZakGrid, points: &[(usize, usize)], seed: u64) -> CMatrix {
    let l = zgrid.grid.l;
    let cap = 4 * l * l;
    let chosen: Vec<(usize, usize)> = if points.len() <= cap {
        points.to_vec()
    } else {
        let stride = points.len() / cap;
        let offset = ChaCha8Rng::seed_from_u64(seed).random_range(0..points.len());
        (0..cap).map(|k| points[(offset + k * stride) % points.len()]).collect()
    };
    let cols = par::map_slice(&chosen, |&(u, v)| z_vector(zgrid, u, v));
    CMatrix::from_fn(l, cols.len(), |p, c| cols[c][p])
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis of the numerical range of `m`.
fn range_basis(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > DEFAULT_RANK_TOL * smax)
        .collect();
    CMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Rank-aware simultaneous orthogonal matching pursuit over the columns of `G`.
///
/// Each step projects the candidate columns off the selected span and scores
/// them by the fraction of their energy inside the residual range.
pub fn mmv_omp(y: &CMatrix, g: &GaborMatrix, k_max: usize, tol: f64) -> Result<SupportEstimate> {
    let l = g.l();
    if y.nrows() != l {
        return Err(Error::GridMismatch(format!("measurements have {} rows, L = {l}", y.nrows())));
    }
    if k_max == 0 || k_max > l {
        return Err(Error::InvalidParameters(format!("need 1 <= k_max <= L, got k_max = {k_max}")));
    }
    let e = g.entries();
    let ncols = l * l;
    let y_norm = frobenius(y);
    let mut est = SupportEstimate {
        gamma_hat: Vec::new(),
        residual_history: Vec::new(),
        converged: y_norm == 0.0,
        exact_match: None,
        k_max,
        tol,
        seed: None,
    };
    if est.converged {
        return Ok(est);
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    while selected.len() < k_max {
        let basis = range_basis(&residual);
        let a = g.columns(&selected);
        let a_pinv = pinv(&a, DEFAULT_RANK_TOL).inverse;
        let scores = par::map_range(ncols, |c| {
            if selected.contains(&c) {
                return -1.0;
            }
            let gc = e.column(c).into_owned();
            let pc = if selected.is_empty() { gc.clone() } else { &gc - &a * (&a_pinv * &gc) };
            let n2 = pc.norm_squared();
            if n2 <= 1e-20 * gc.norm_squared().max(f64::MIN_POSITIVE) {
                return -1.0;
            }
            (basis.adjoint() * pc).norm_squared() / n2
        });
        // strict comparison keeps the lowest index on ties
        let mut best = 0;
        for c in 1..ncols {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        if scores[best] < 0.0 {
            break;
        }
        selected.push(best);
        let a = g.columns(&selected);
        let x = pinv(&a, DEFAULT_RANK_TOL).inverse * y;
        residual = y - &a * x;
        let r = frobenius(&residual) / y_norm;
        est.residual_history.push(r);
        if r <= tol {
            est.converged = true;
            break;
        }
    }
    let mut cells: Vec<Cell> = selected.iter().map(|&c| g.cell_of(c)).collect();
    cells.sort_unstable();
    est.gamma_hat = cells;
    Ok(est)
}

/// `1/2 + 1/(2L)`.
pub fn uniqueness_threshold(l: usize) -> f64 {
    0.5 + 0.5 / l as f64
}

/// Both supports have periodization count at most `Delta L` and their union
/// is identifiable, so any two operators on them differ by an identifiable
/// operator.
pub fn verify_uniqueness_class(s1: &CellSupport, s2: &CellSupport, delta: f64) -> Result<bool> {
    let union = s1.union(s2)?;
    let cap = (delta * s1.l() as f64 + 1e-12).floor() as u32;
    let within = |s: &CellSupport| periodization_count(s).max() <= cap;
    Ok(within(s1) && within(s2) && check_identifiable(&union))
}

#[derive(Debug, Clone)]
pub struct UnknownSupportOptions {
    pub k_max: usize,
    pub tol: f64,
    /// Base rectangle split into `blocks x blocks` squares with their own pattern.
    pub blocks: usize,
    /// Lower-left subcell of the fundamental domain holding the support.
    pub domain_origin: (i64, i64),
    pub seed: u64,
}

impl UnknownSupportOptions {
    pub fn new(k_max: usize) -> Self {
        Self { k_max, tol: 1e-9, blocks: 1, domain_origin: (0, 0), seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct UnknownSupportReport {
    pub report: ReconstructionReport,
    pub support: CellSupport,
    /// One estimate per block, block-row-major.
    pub estimates: Vec<SupportEstimate>,
}

/// Estimates the active cells block by block, then reconstructs on them.
pub fn recover_unknown_support(
    zgrid: &ZakGrid,
    g: &GaborMatrix,
    opts: &UnknownSupportOptions,
) -> Result<UnknownSupportReport> {
    let grid = zgrid.grid;
    let p = grid.p;
    if opts.blocks == 0 || !p.is_multiple_of(opts.blocks) {
        return Err(Error::InvalidParameters(format!("P = {p} is not divisible into {} blocks", opts.blocks)));
    }
    let bs = p / opts.blocks;
    let n = grid.side() as i64;
    let (o_i, o_j) = opts.domain_origin;
    // representative of a folded subcell inside the domain
    let place = |a: i64, b: i64| (o_i + (a - o_i).rem_euclid(n), o_j + (b - o_j).rem_euclid(n));
    let mut estimates = Vec::new();
    let mut subcells = Vec::new();
    for bu in 0..opts.blocks {
        for bv in 0..opts.blocks {
            let points: Vec<(usize, usize)> =
                (0..bs).flat_map(|a| (0..bs).map(move |b| (bu * bs + a, bv * bs + b))).collect();
            let seed = opts.seed.wrapping_add((bu * opts.blocks + bv) as u64);
            let y = measurement_matrix(zgrid, &points, seed);
            let mut est = mmv_omp(&y, g, opts.k_max, opts.tol)?;
            est.seed = Some(seed);
            if !est.converged {
                return Err(Error::NoConvergence { residuals: est.residual_history });
            }
            for &(u, v) in &points {
                for &(q, m) in &est.gamma_hat {
                    subcells.push(place((u + q * p) as i64, (v + m * p) as i64));
                }
            }
            estimates.push(est);
        }
    }
    let support = CellSupport::from_subcells(grid.t, grid.l, grid.p, subcells)?;
    let rect = rectify(&support)?;
    let report = recover_eta_known_support(zgrid, g, &support, &rect)?;
    Ok(UnknownSupportReport { report, support, estimates })
}
