//! Chirped identifiers for sheared (lower-triangular) support geometries.
//!
//! With weights `c_n e^{pi i T a n^2}` the identifier is the chirp
//! `e^{pi i beta x^2}`, `beta = a/T`, applied to the plain train. Conjugating
//! the channel by that chirp shears the spreading function,
//! `eta~(t, nu) = e^{-pi i beta t^2} eta(t, nu + beta t)`, so dechirping the
//! response reduces recovery to the unsheared support. On the grid the shear
//! moves `K = L T a` Doppler subcells per delay subcell.

use super::{formula::reconstruct_h_formula, recover_known, Formula, ReconstructionReport};
use crate::channel::{chirp_steps, zak_transform, ChannelResponse, DiscreteSpreadingFunction, ImpulseResponseGrid};
use crate::error::{Error, Result};
use crate::gabor::{unit_root, GaborMatrix};
use crate::support::{check_identifiable, CellSupport};

/// `e^{-pi i beta x_s^2} Hg(x_s)` over one superperiod.
pub fn dechirp_response(hg: &ChannelResponse, k: i64) -> ChannelResponse {
    let n2 = 2 * hg.grid.period();
    let samples = hg
        .samples
        .iter()
        .enumerate()
        .map(|(s, &v)| {
            let e = (k as i128 * (s * s) as i128).rem_euclid(n2 as i128) as i64;
            v * unit_root(-e, n2)
        })
        .collect();
    ChannelResponse { samples, ..hg.clone() }
}

/// `{(i, j - K i)}`: the support seen through the dechirped response.
pub fn shear_support(s: &CellSupport, k: i64) -> Result<CellSupport> {
    CellSupport::from_subcells(s.t(), s.l(), s.p(), s.subcells().iter().map(|&(i, j)| (i, j - k * i)))
}

fn sheared(hg: &ChannelResponse, g: &GaborMatrix, s: &CellSupport, a: f64) -> Result<(i64, ChannelResponse, CellSupport)> {
    if hg.grid != s.grid() || g.l() != s.l() {
        return Err(Error::GridMismatch("response, Gabor matrix and support disagree".into()));
    }
    let k = chirp_steps(s.t(), s.l(), a)?;
    let flat = shear_support(s, k)?;
    if !check_identifiable(&flat) {
        return Err(Error::ShearNotRectifiable(format!("support sheared by {k} subcells per column")));
    }
    Ok((k, dechirp_response(hg, k), flat))
}

/// Recovers `eta` on a sheared support from the response to a chirped train.
pub fn recover_symplectic(hg: &ChannelResponse, g: &GaborMatrix, s: &CellSupport, a: f64) -> Result<ReconstructionReport> {
    let (k, flat_hg, flat) = sheared(hg, g, s, a)?;
    let z = zak_transform(&flat_hg, 1.0 / s.omega())?;
    let inner = recover_known(&z, g, &flat)?;
    let n2 = 2 * s.grid().period();
    let eta_hat = DiscreteSpreadingFunction::from_fn(s, |i, j| {
        let e = (k as i128 * (i * i) as i128).rem_euclid(n2 as i128) as i64;
        inner.eta_hat.get(i, j - k * i) * unit_root(e, n2)
    });
    Ok(ReconstructionReport { eta_hat, formula: Formula::Symplectic, ..inner })
}

/// `h(x, t) = e^{pi i beta t^2} e^{2 pi i beta t (x - t)} h~(x, t)` with `h~`
/// from the explicit formula applied to the dechirped response.
pub fn reconstruct_h_symplectic(hg: &ChannelResponse, g: &GaborMatrix, s: &CellSupport, a: f64) -> Result<ImpulseResponseGrid> {
    let (k, flat_hg, flat) = sheared(hg, g, s, a)?;
    let mut h = reconstruct_h_formula(&flat_hg, g, &flat)?;
    let n2 = 2 * s.grid().period() as i128;
    for (r, row) in h.rows.iter_mut().enumerate() {
        let i = h.i0 + r as i64;
        for (sx, v) in row.iter_mut().enumerate() {
            let e = (k as i128 * i as i128 * (2 * sx as i128 - i as i128)).rem_euclid(n2) as i64;
            *v *= unit_root(e, n2 as usize);
        }
    }
    Ok(h)
}
