//! Sampling-rate diagnostics for an identifier and a support.

use serde::Serialize;

use crate::channel::IdentifierTrain;
use crate::error::{Error, Result};
use crate::gabor::{build_gabor_matrix, generate_window, is_prime, SparkTarget, Window};
use crate::reconstruct::left_inverse;
use crate::support::{bandwidth, check_identifiable, periodization_count, rectify, CellSupport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// `||c||_0 / (T L)`.
    pub rate: f64,
    pub bandwidth: f64,
    /// Rate at least the bandwidth, up to one subcell height.
    pub necessary_ok: bool,
    pub area: f64,
    pub eps: f64,
    /// `|S| (1 + eps) - ||c||_0 / L`.
    pub sufficient_margin: f64,
    /// `1 - (T ||c||_0 + K) / (L T)` with `K` the support memory.
    pub dead_time_fraction: f64,
    /// Every occupancy class of the support is solvable with this window.
    /// Never set when `necessary_ok` is false.
    pub identification_claim: bool,
}

pub fn sampling_rate(g: &IdentifierTrain) -> f64 {
    g.rate()
}

pub fn check_necessary(g: &IdentifierTrain, s: &CellSupport) -> bool {
    sampling_rate(g) >= bandwidth(s) - s.dnu() * (1.0 + 1e-12)
}

fn solvable(g: &IdentifierTrain, s: &CellSupport) -> bool {
    if g.l() != s.l() || !check_identifiable(s) {
        return false;
    }
    let gm = build_gabor_matrix(&g.window);
    match rectify(s) {
        Ok(rect) => rect.nonempty_classes().all(|c| left_inverse(&gm, &c.gamma, s.omega()).is_ok()),
        Err(_) => false,
    }
}

pub fn rate_report(g: &IdentifierTrain, s: &CellSupport, eps: f64) -> RateReport {
    let l = s.l() as f64;
    let nnz = g.window.support_size() as f64;
    let necessary_ok = check_necessary(g, s);
    RateReport {
        rate: sampling_rate(g),
        bandwidth: bandwidth(s),
        necessary_ok,
        area: s.area(),
        eps,
        sufficient_margin: s.area() * (1.0 + eps) - nnz / l,
        dead_time_fraction: 1.0 - (s.t() * nnz + s.memory()) / (l * s.t()),
        identification_claim: necessary_ok && solvable(g, s),
    }
}

/// Window supported on its first `k` indices, `k` the largest cover count of
/// the support, with spark `k + 1`.
pub fn bunched_window_plan(s: &CellSupport, eps: f64, seed: u64, max_draws: usize) -> Result<(Window, RateReport)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameters(format!("eps must be positive, got {eps}")));
    }
    let l = s.l();
    if !is_prime(l) {
        return Err(Error::NoPrimeInRange(format!("bunched windows need prime L, support uses L = {l}")));
    }
    if s.is_empty() || s.area() >= 1.0 {
        return Err(Error::InvalidParameters(format!("need 0 < |S| < 1, got {}", s.area())));
    }
    if !check_identifiable(s) {
        return Err(Error::NotIdentifiable("support fails the cover conditions".into()));
    }
    let k = periodization_count(s).max() as usize;
    let bound = s.area() * (1.0 + eps);
    if k as f64 / l as f64 >= bound {
        return Err(Error::InsufficientMargin(format!(
            "||c||_0 / L = {k}/{l} is not below |S|(1 + eps) = {bound}"
        )));
    }
    let gen = generate_window(l, SparkTarget::K(k), seed, max_draws).map_err(|e| match e {
        Error::GenerationFailed { draws } => Error::SparkTargetUnmet { draws },
        other => other,
    })?;
    let g = IdentifierTrain::new(s.t(), gen.window.clone());
    Ok((gen.window, rate_report(&g, s, eps)))
}
