//! Reconstruction with overlapping raised-cosine windows in place of sharp
//! cell indicators.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{check_grid, solve_qp, Formula, ReconstructionReport};
use crate::channel::{DiscreteSpreadingFunction, ZakGrid};
use crate::error::{Error, Result};
use crate::gabor::{unit_root, GaborMatrix};
use crate::support::{check_identifiable, rectify, CellSupport, Grid};

/// Raised-cosine windows `r` (delay) and `phi_hat` (Doppler) forming a
/// partition of unity over cell translates. Both overlap their neighbours by
/// `eps_steps` subcells; one step gives the sharp cell indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothWindows {
    pub grid: Grid,
    pub eps_steps: usize,
}

/// Rising edge: 0 below `-e/2`, 1 above `e/2`, and `ramp(x) + ramp(-x) = 1`
/// exactly in floating point.
fn ramp(x: f64, e: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - ramp(-x, e);
    }
    if x >= e / 2.0 {
        1.0
    } else {
        0.5 * (1.0 + (PI * x / e).sin())
    }
}

impl SmoothWindows {
    /// Window of cell 0 at subcell offset `i`; cell `q` uses `i - qP`.
    fn window(&self, i: i64) -> f64 {
        let e = self.eps_steps as f64;
        let p = self.grid.p as f64;
        let x = i as f64;
        // edges sit half a step outside the first and last sample of the cell
        ramp(x + 0.5, e) * ramp(p - 0.5 - x, e)
    }

    /// `r(t_i)` for the delay cell starting at 0.
    pub fn r(&self, i: i64) -> f64 {
        self.window(i)
    }

    /// `phi_hat(nu_j)` for the Doppler cell starting at 0.
    pub fn phi_hat(&self, j: i64) -> f64 {
        self.window(j)
    }

    /// Number of subcells each window reaches past its cell on either side.
    pub fn reach(&self) -> usize {
        (1..=self.grid.p as i64).take_while(|&k| self.window(-k) > 0.0).count()
    }

    /// Window of cell `c` periodized over the fundamental rectangle.
    fn periodized(&self, x: i64, c: usize) -> f64 {
        let n = self.grid.side() as i64;
        let p = self.grid.p as i64;
        let off = (x - c as i64 * p).rem_euclid(n);
        // only the translates within reach can be nonzero
        [off - n, off, off + n].iter().map(|&y| self.window(y)).sum()
    }
}

/// Windows overlapping by `eps_steps` subcells on both axes.
pub fn smooth_windows(grid: Grid, eps_steps: usize) -> Result<SmoothWindows> {
    if eps_steps == 0 || 2 * eps_steps >= grid.p {
        return Err(Error::InvalidOverlap(format!(
            "overlap of {eps_steps} subcells must satisfy 1 <= eps < P/2 = {}",
            grid.p as f64 / 2.0
        )));
    }
    Ok(SmoothWindows { grid, eps_steps })
}

/// `eta = sum_{(q,m)} eta^QP r(t - qT) phi_hat(nu - m Omega)`, masked to the
/// support. The windows reach past each cell, so the support fattened by that
/// reach must stay identifiable.
pub fn recover_eta_smooth(
    zgrid: &ZakGrid,
    g: &GaborMatrix,
    s: &CellSupport,
    windows: &SmoothWindows,
) -> Result<ReconstructionReport> {
    check_grid(zgrid, g, s)?;
    if windows.grid != s.grid() {
        return Err(Error::GridMismatch("windows and support use different grids".into()));
    }
    let fat = s.dilated(windows.reach());
    if !check_identifiable(&fat) {
        return Err(Error::NotIdentifiable(format!(
            "support fattened by {} subcells is not identifiable",
            windows.reach()
        )));
    }
    let rect = rectify(&fat)?;
    let qp = solve_qp(zgrid, g, &rect)?;
    let cells = fat.active_cells();
    let n = s.side() as i64;
    let eta_hat = DiscreteSpreadingFunction::from_fn(s, |i, j| {
        let (a, b) = s.fold(i, j);
        let value = qp.get(a, b);
        let sum: Complex64 = cells
            .iter()
            .map(|&(q, m)| value * (windows.periodized(a as i64, q) * windows.periodized(b as i64, m)))
            .sum();
        sum * unit_root(i.div_euclid(n) * j, s.p())
    });
    Ok(ReconstructionReport {
        eta_hat,
        relative_l2_error: None,
        per_class_conditioning: qp.inverses.iter().map(|li| li.condition_number).collect(),
        class_gammas: qp.inverses.iter().map(|li| li.gamma.clone()).collect(),
        formula: Formula::Smooth,
    })
}
