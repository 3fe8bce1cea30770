//! Recovery of the spreading function from the identifier response.

mod formula;
mod smooth;
mod symplectic;

pub use formula::{eta_from_response, reconstruct_h_formula, reconstruct_h_sharp};
pub use smooth::{recover_eta_smooth, smooth_windows, SmoothWindows};
pub use symplectic::{dechirp_response, recover_symplectic, reconstruct_h_symplectic, shear_support};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{z_vector, DiscreteSpreadingFunction, ZakGrid};
use crate::error::{Error, Result};
use crate::gabor::{unit_root, GaborMatrix, DEFAULT_RANK_TOL};
use crate::linalg::{pinv, CMatrix};
use crate::par;
use crate::support::{rectify, Cell, CellSupport, Grid, RectificationReport};

/// Scaled left inverse of the restricted column matrix `G_Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftInverse {
    pub gamma: Vec<Cell>,
    /// `|Gamma| x L`; row `k` holds `b_{gamma[k], p}`.
    pub coefficients: CMatrix,
    pub condition_number: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl LeftInverse {
    pub fn b(&self, row: usize, p: usize) -> Complex64 {
        self.coefficients[(row, p)]
    }
}

/// `b = diag((1/Omega) e^{2 pi i q m / L}) G_Gamma^+`, so that
/// `sum_p b_{(q,m),p} G_{p,(q',m')} = (1/Omega) e^{2 pi i q m / L} [q = q'][m = m']`.
pub fn left_inverse(g: &GaborMatrix, gamma: &[Cell], omega: f64) -> Result<LeftInverse> {
    let l = g.l();
    if gamma.len() > l {
        return Err(Error::RankDeficient { rank: l, needed: gamma.len() });
    }
    let a = g.restricted(gamma);
    let pi = pinv(&a, DEFAULT_RANK_TOL);
    if pi.rank < gamma.len() {
        return Err(Error::RankDeficient { rank: pi.rank, needed: gamma.len() });
    }
    let mut b = pi.inverse.clone();
    for (k, &(q, m)) in gamma.iter().enumerate() {
        let s = unit_root((q * m) as i64, l) / omega;
        for p in 0..l {
            b[(k, p)] *= s;
        }
    }
    Ok(LeftInverse {
        gamma: gamma.to_vec(),
        coefficients: b,
        condition_number: pi.condition_number(),
        sigma_min: pi.sigma_min,
        sigma_max: pi.sigma_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Sharp,
    Multiclass,
    Smooth,
    Symplectic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub eta_hat: DiscreteSpreadingFunction,
    pub relative_l2_error: Option<f64>,
    /// Per nonempty class, in class order.
    pub per_class_conditioning: Vec<f64>,
    pub class_gammas: Vec<Vec<Cell>>,
    pub formula: Formula,
}

impl ReconstructionReport {
    pub fn with_truth(mut self, truth: &DiscreteSpreadingFunction) -> Self {
        self.relative_l2_error = Some(self.eta_hat.relative_error(truth));
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "formula": self.formula,
            "gamma": self.eta_hat.support().active_cells(),
            "classes": self.class_gammas,
            "per_class_condition_numbers": self.per_class_conditioning,
            "relative_l2_error": self.relative_l2_error,
        })
    }
}

/// Solved quasiperiodization on the folded support, plus per-class data.
pub(crate) struct QpSolution {
    pub grid: Grid,
    /// Indexed by folded subcell `i * LP + j`; `None` where not solved.
    pub values: Vec<Option<Complex64>>,
    pub inverses: Vec<LeftInverse>,
}

impl QpSolution {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.side() + j].unwrap_or_default()
    }
}

pub(crate) fn check_grid(zgrid: &ZakGrid, g: &GaborMatrix, s: &CellSupport) -> Result<()> {
    if zgrid.grid != s.grid() {
        return Err(Error::GridMismatch("Zak grid and support use different grids".into()));
    }
    if g.l() != s.l() {
        return Err(Error::GridMismatch(format!("Gabor matrix has L = {}, support L = {}", g.l(), s.l())));
    }
    Ok(())
}

/// Per-class restricted solves at every base point.
pub(crate) fn solve_qp(zgrid: &ZakGrid, g: &GaborMatrix, rect: &RectificationReport) -> Result<QpSolution> {
    let grid = zgrid.grid;
    let (l, p, n) = (grid.l, grid.p, grid.side());
    let omega = grid.omega();
    let classes: Vec<_> = rect.nonempty_classes().collect();
    let inverses = classes
        .iter()
        .map(|c| left_inverse(g, &c.gamma, omega))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![None; n * n];
    for (class, li) in classes.iter().zip(&inverses) {
        let solved = par::map_slice(&class.points, |&(u, v)| {
            let z = z_vector(zgrid, u, v);
            li.gamma
                .iter()
                .enumerate()
                .map(|(k, &(q, _))| {
                    let acc: Complex64 = (0..l).map(|pp| li.b(k, pp) * z[pp]).sum();
                    acc * unit_root((v * q) as i64, n)
                })
                .collect::<Vec<_>>()
        });
        for (&(u, v), vals) in class.points.iter().zip(solved) {
            for (&(q, m), val) in li.gamma.iter().zip(vals) {
                values[(u + q * p) * n + v + m * p] = Some(val);
            }
        }
    }
    Ok(QpSolution { grid, values, inverses })
}

/// `eta(i, j) = eta^QP(fold(i, j)) e^{2 pi i k nu_j / Omega}` on the support,
/// where `i` sits `k` fundamental periods from the rectangle.
pub(crate) fn unfold(qp: &QpSolution, s: &CellSupport) -> DiscreteSpreadingFunction {
    let n = s.side() as i64;
    DiscreteSpreadingFunction::from_fn(s, |i, j| {
        let (a, b) = s.fold(i, j);
        qp.get(a, b) * unit_root(i.div_euclid(n) * j, s.p())
    })
}

/// Sharp-cutoff recovery for a known identifiable support.
pub fn recover_eta_known_support(
    zgrid: &ZakGrid,
    g: &GaborMatrix,
    s: &CellSupport,
    rect: &RectificationReport,
) -> Result<ReconstructionReport> {
    check_grid(zgrid, g, s)?;
    if !rect.identifiable {
        return Err(Error::NotIdentifiable("rectification reports a non-identifiable support".into()));
    }
    let qp = solve_qp(zgrid, g, rect)?;
    let eta_hat = unfold(&qp, s);
    let formula = if qp.inverses.len() <= 1 { Formula::Sharp } else { Formula::Multiclass };
    Ok(ReconstructionReport {
        eta_hat,
        relative_l2_error: None,
        per_class_conditioning: qp.inverses.iter().map(|li| li.condition_number).collect(),
        class_gammas: qp.inverses.iter().map(|li| li.gamma.clone()).collect(),
        formula,
    })
}

/// `rectify` followed by `recover_eta_known_support`.
pub fn recover_known(zgrid: &ZakGrid, g: &GaborMatrix, s: &CellSupport) -> Result<ReconstructionReport> {
    let rect = rectify(s)?;
    recover_eta_known_support(zgrid, g, s, &rect)
}
