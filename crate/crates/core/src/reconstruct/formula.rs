//! Explicit reconstruction formulas that read `Hg` directly.
//!
//! For a subcell `(i, j)` of the support whose folded cell is `(q, m)`,
//!
//! `eta(i, j) = sum_k b_{(q,m), k mod L} e^{2 pi i (nu_j - m Omega)(q - k) T} Hg(t_i - (q - k) T)`
//!
//! with `k` running over one superperiod, `-(P-1)L <= k < L`. Integrating
//! against `e^{2 pi i nu (x - t)}` gives
//!
//! `h(x, t) = sum_{(q,m)} sum_k b_{(q,m),k} e^{-2 pi i m (q-k) / L} Hg(t - (q-k)T) Phi_{(q,m)}(t, x - t + (q-k)T)`
//!
//! where `Phi_{(q,m)}(t, s) = dnu * sum_{nu_j in S_(q,m)(t)} e^{2 pi i nu_j s}`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::BTreeMap;

use super::{left_inverse, LeftInverse, ReconstructionReport};
use crate::channel::{ChannelResponse, DiscreteSpreadingFunction, ImpulseResponseGrid};
use crate::error::{Error, Result};
use crate::gabor::{unit_root, GaborMatrix};
use crate::par;
use crate::support::{occupancy_patterns, rectify, Cell, CellSupport};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Support subcells grouped by (occupancy class, folded cell).
struct Pieces {
    /// Class index per piece, into `inverses`.
    class: Vec<usize>,
    /// Row of `(q, m)` inside the class left inverse.
    row: Vec<usize>,
    cell: Vec<Cell>,
    /// Subcells of each piece.
    members: Vec<Vec<(i64, i64)>>,
}

fn split_pieces(s: &CellSupport, inverses: &[LeftInverse]) -> Pieces {
    let p = s.p() as i64;
    let pats = occupancy_patterns(s);
    let class_of: BTreeMap<&Vec<Cell>, usize> =
        inverses.iter().enumerate().map(|(c, li)| (&li.gamma, c)).collect();
    let mut map: BTreeMap<(usize, Cell), Vec<(i64, i64)>> = BTreeMap::new();
    for &(i, j) in s.subcells() {
        let idx = i.rem_euclid(p) as usize * s.p() + j.rem_euclid(p) as usize;
        let c = class_of[&pats[idx]];
        map.entry((c, s.folded_cell(i, j))).or_default().push((i, j));
    }
    let mut out = Pieces { class: vec![], row: vec![], cell: vec![], members: vec![] };
    for ((c, cell), members) in map {
        let row = inverses[c].gamma.iter().position(|&g| g == cell).expect("cell in its class pattern");
        out.class.push(c);
        out.row.push(row);
        out.cell.push(cell);
        out.members.push(members);
    }
    out
}

fn class_inverses(g: &GaborMatrix, s: &CellSupport) -> Result<Vec<LeftInverse>> {
    let rect = rectify(s)?;
    rect.nonempty_classes().map(|c| left_inverse(g, &c.gamma, s.omega())).collect()
}

fn check(hg: &ChannelResponse, g: &GaborMatrix, s: &CellSupport) -> Result<()> {
    if hg.grid != s.grid() || g.l() != s.l() {
        return Err(Error::GridMismatch("response, Gabor matrix and support disagree".into()));
    }
    Ok(())
}

/// `eta` on the support straight from the response samples.
pub fn eta_from_response(hg: &ChannelResponse, g: &GaborMatrix, s: &CellSupport) -> Result<DiscreteSpreadingFunction> {
    check(hg, g, s)?;
    let inverses = class_inverses(g, s)?;
    let pieces = split_pieces(s, &inverses);
    let (l, p, n) = (s.l() as i64, s.p() as i64, s.side());
    let mut eta = DiscreteSpreadingFunction::zeros(s);
    for k in 0..pieces.members.len() {
        let li = &inverses[pieces.class[k]];
        let (q, m) = pieces.cell[k];
        let (q, m) = (q as i64, m as i64);
        let row = pieces.row[k];
        let vals = par::map_slice(&pieces.members[k], |&(i, j)| {
            (-(p - 1) * l..l)
                .map(|kk| {
                    let d = q - kk;
                    li.b(row, kk.rem_euclid(l) as usize) * unit_root((j - m * p) * d, n) * hg.at(i - d * p)
                })
                .sum::<Complex64>()
        });
        for (&(i, j), v) in pieces.members[k].iter().zip(vals) {
            eta.set(i, j, v)?;
        }
    }
    Ok(eta)
}

/// `Phi` for one piece and one delay row, indexed by `s mod N`.
fn phi_row(members: &[(i64, i64)], i: i64, n: usize, dnu: f64, fft: &dyn rustfft::Fft<f64>) -> Option<Vec<Complex64>> {
    let mut buf = vec![C0; n];
    let mut any = false;
    for &(ii, j) in members {
        if ii == i {
            buf[j.rem_euclid(n as i64) as usize] += Complex64::new(dnu, 0.0);
            any = true;
        }
    }
    if !any {
        return None;
    }
    fft.process(&mut buf);
    Some(buf)
}

/// `h` from the response samples through the cell cutoffs `Phi_{(q,m)}`.
pub fn reconstruct_h_formula(hg: &ChannelResponse, g: &GaborMatrix, s: &CellSupport) -> Result<ImpulseResponseGrid> {
    check(hg, g, s)?;
    let inverses = class_inverses(g, s)?;
    let pieces = split_pieces(s, &inverses);
    let grid = s.grid();
    let (l, p, n) = (grid.l as i64, grid.p as i64, grid.period());
    let shape = DiscreteSpreadingFunction::zeros(s);
    let ((i0, _), rows, _) = shape.extent();
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let out = par::map_range(rows, |r| {
        let i = i0 + r as i64;
        let mut row = vec![C0; n];
        for k in 0..pieces.members.len() {
            let Some(phi) = phi_row(&pieces.members[k], i, n, grid.dnu(), fft.as_ref()) else {
                continue;
            };
            let li = &inverses[pieces.class[k]];
            let (q, m) = (pieces.cell[k].0 as i64, pieces.cell[k].1 as i64);
            for kk in -(p - 1) * l..l {
                let d = q - kk;
                let coef = li.b(pieces.row[k], kk.rem_euclid(l) as usize) * unit_root(-m * d, grid.l) * hg.at(i - d * p);
                for (sx, h) in row.iter_mut().enumerate() {
                    *h += coef * phi[(sx as i64 - i + d * p).rem_euclid(n as i64) as usize];
                }
            }
        }
        row
    });
    Ok(ImpulseResponseGrid { grid, i0, rows: out })
}

/// Occupancy pattern and folded cell.
type Piece = (Vec<Cell>, Cell);

/// `h` as the sum over support pieces of the masked nu-transforms of the
/// recovered `eta`.
pub fn reconstruct_h_sharp(report: &ReconstructionReport) -> ImpulseResponseGrid {
    let eta = &report.eta_hat;
    let s = eta.support();
    let grid = s.grid();
    let n = grid.period();
    let ((i0, _), rows, _) = eta.extent();
    let p = s.p() as i64;
    let pats = occupancy_patterns(s);
    let mut pieces: BTreeMap<Piece, Vec<(i64, i64)>> = BTreeMap::new();
    for &(i, j) in s.subcells() {
        let idx = i.rem_euclid(p) as usize * s.p() + j.rem_euclid(p) as usize;
        pieces.entry((pats[idx].clone(), s.folded_cell(i, j))).or_default().push((i, j));
    }
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let out = par::map_range(rows, |r| {
        let i = i0 + r as i64;
        let mut row = vec![C0; n];
        for members in pieces.values() {
            let mut buf = vec![C0; n];
            for &(ii, j) in members {
                if ii == i {
                    buf[j.rem_euclid(n as i64) as usize] += eta.get(ii, j) * grid.dnu();
                }
            }
            fft.process(&mut buf);
            for (sx, h) in row.iter_mut().enumerate() {
                *h += buf[(sx as i64 - i).rem_euclid(n as i64) as usize];
            }
        }
        row
    });
    ImpulseResponseGrid { grid, i0, rows: out }
}
