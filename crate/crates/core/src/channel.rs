//! The discrete operator model.
//!
//! A channel is described by samples `eta(i, j)` of its spreading function at
//! `(i T/P, j Omega/P)`. Its time-varying impulse response is
//! `h(x, t) = dnu * sum_j eta(t, nu_j) e^{2 pi i nu_j (x - t)}`, which is
//! periodic in `x` with period `P L T` (`L P^2` samples). The identifier is a
//! train of deltas at `n T` with weights `w_n = c_n e^{pi i T a n^2}`, so
//! `Hg(x) = sum_n w_n h(x, x - n T)`.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gabor::{unit_root, GaborMatrix, Window};
use crate::linalg::norm2;
use crate::par;
use crate::support::{grid_steps, CellSupport, Grid};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Spreading-function samples on a rectangle of subcells containing the
/// fundamental rectangle and the support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpreadingFunction {
    support: CellSupport,
    origin: (i64, i64),
    rows: usize,
    cols: usize,
    values: Vec<Complex64>,
}

impl DiscreteSpreadingFunction {
    pub fn zeros(support: &CellSupport) -> Self {
        let n = support.side() as i64;
        let (mut i0, mut j0, mut i1, mut j1) = (0, 0, n - 1, n - 1);
        if let Some((a, b, c, d)) = support.bounding_box() {
            i0 = i0.min(a);
            j0 = j0.min(b);
            i1 = i1.max(c);
            j1 = j1.max(d);
        }
        let rows = (i1 - i0 + 1) as usize;
        let cols = (j1 - j0 + 1) as usize;
        Self { support: support.clone(), origin: (i0, j0), rows, cols, values: vec![C0; rows * cols] }
    }

    pub fn from_fn<F: FnMut(i64, i64) -> Complex64>(support: &CellSupport, mut f: F) -> Self {
        let mut eta = Self::zeros(support);
        let cells: Vec<(i64, i64)> = support.subcells().iter().copied().collect();
        for (i, j) in cells {
            let k = eta.index(i, j).expect("support inside the grid");
            eta.values[k] = f(i, j);
        }
        eta
    }

    /// Independent entries with real and imaginary parts uniform on `[-1, 1]`.
    pub fn random<R: Rng>(support: &CellSupport, rng: &mut R) -> Self {
        Self::from_fn(support, |_, _| {
            Complex64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0)
        })
    }

    pub fn support(&self) -> &CellSupport {
        &self.support
    }
    pub fn grid(&self) -> Grid {
        self.support.grid()
    }
    /// `(origin, rows, cols)` of the stored rectangle.
    pub fn extent(&self) -> ((i64, i64), usize, usize) {
        (self.origin, self.rows, self.cols)
    }

    fn index(&self, i: i64, j: i64) -> Option<usize> {
        let a = i - self.origin.0;
        let b = j - self.origin.1;
        if a < 0 || b < 0 || a as usize >= self.rows || b as usize >= self.cols {
            None
        } else {
            Some(a as usize * self.cols + b as usize)
        }
    }

    pub fn get(&self, i: i64, j: i64) -> Complex64 {
        self.index(i, j).map_or(C0, |k| self.values[k])
    }

    /// Sets a sample; only support subcells may be nonzero.
    pub fn set(&mut self, i: i64, j: i64, v: Complex64) -> Result<()> {
        if !self.support.contains(i, j) {
            if v == C0 {
                return Ok(());
            }
            return Err(Error::IndexOutOfRange(format!("subcell ({i}, {j}) is outside the support")));
        }
        let k = self.index(i, j).expect("support inside the grid");
        self.values[k] = v;
        Ok(())
    }

    /// Support samples in subcell order.
    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.support.subcells().iter().map(move |&(i, j)| ((i, j), self.get(i, j)))
    }

    /// Stored delay rows `i_min..=i_max`.
    pub fn row_range(&self) -> (i64, i64) {
        (self.origin.0, self.origin.0 + self.rows as i64 - 1)
    }

    /// `(j, eta(i, j))` for the nonzero-capable samples of row `i`.
    pub fn row(&self, i: i64) -> Vec<(i64, Complex64)> {
        if i < self.origin.0 || i >= self.origin.0 + self.rows as i64 {
            return Vec::new();
        }
        let a = (i - self.origin.0) as usize;
        (0..self.cols)
            .map(|b| (self.origin.1 + b as i64, self.values[a * self.cols + b]))
            .filter(|(_, v)| *v != C0)
            .collect()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }

    /// `||self - truth|| / ||truth||` over all samples of both.
    pub fn relative_error(&self, truth: &Self) -> f64 {
        let mut num = 0.0;
        for ((i, j), v) in truth.iter() {
            num += (self.get(i, j) - v).norm_sqr();
        }
        for ((i, j), v) in self.iter() {
            if !truth.support.contains(i, j) {
                num += v.norm_sqr();
            }
        }
        let den = truth.norm();
        if den == 0.0 {
            num.sqrt()
        } else {
            num.sqrt() / den
        }
    }

    /// Pointwise linear combination `a * self + b * other` on a shared support.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        let s = self.support.union(&other.support)?;
        Ok(Self::from_fn(&s, |i, j| a * self.get(i, j) + b * other.get(i, j)))
    }
}

// --- identifier --------------------------------------------------------------

/// Weighted delta train `sum_n c_n e^{pi i T a n^2} delta_{nT}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierTrain {
    pub t: f64,
    pub window: Window,
    pub chirp_a: f64,
}

impl IdentifierTrain {
    pub fn new(t: f64, window: Window) -> Self {
        Self { t, window, chirp_a: 0.0 }
    }

    pub fn chirped(t: f64, window: Window, a: f64) -> Self {
        Self { t, window, chirp_a: a }
    }

    pub fn l(&self) -> usize {
        self.window.len()
    }

    /// `K = L T a`; see [`chirp_steps`].
    pub fn chirp_steps(&self) -> Result<i64> {
        chirp_steps(self.t, self.l(), self.chirp_a)
    }

    /// Weight of the delta at `n T`.
    pub fn weight(&self, n: i64) -> Result<Complex64> {
        let k = self.chirp_steps()?;
        let l = self.l();
        // pi T a n^2 = pi K n^2 / L
        let e = (k as i128 * n as i128 * n as i128).rem_euclid(2 * l as i128) as i64;
        Ok(self.window.at(n) * unit_root(e, 2 * l))
    }

    /// Sampling rate `||c||_0 / (T L)`.
    pub fn rate(&self) -> f64 {
        self.window.support_size() as f64 / (self.t * self.l() as f64)
    }
}

/// `K = L T a`, required to be an integer. It is the shear in Doppler
/// subcells per delay subcell and makes the chirped weights `2L`-periodic.
pub fn chirp_steps(t: f64, l: usize, a: f64) -> Result<i64> {
    let k = l as f64 * t * a;
    grid_steps(k, 1.0, "L T a").map_err(|_| Error::NonIntegerChirpPeriod(format!("L T a = {k} is not an integer")))
}

// --- response ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    pub grid: Grid,
    pub samples: Vec<Complex64>,
    pub x_step: f64,
}

impl ChannelResponse {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, samples: vec![C0; grid.period()], x_step: grid.dt() }
    }

    /// Sample at any integer index, read periodically.
    pub fn at(&self, s: i64) -> Complex64 {
        self.samples[s.rem_euclid(self.samples.len() as i64) as usize]
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.samples)
    }
}

/// `h(x_s, t_i)` by direct summation over the nu grid.
pub fn impulse_response(eta: &DiscreteSpreadingFunction, s: i64, i: i64) -> Complex64 {
    let g = eta.grid();
    let n = g.period();
    let acc: Complex64 = eta.row(i).into_iter().map(|(j, v)| v * unit_root(j * (s - i), n)).sum();
    acc * g.dnu()
}

/// `h` on the full x-grid for every stored delay row.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseGrid {
    pub grid: Grid,
    /// First delay row.
    pub i0: i64,
    /// `rows[r][s] = h(x_s, t_{i0 + r})`.
    pub rows: Vec<Vec<Complex64>>,
}

impl ImpulseResponseGrid {
    pub fn get(&self, s: i64, i: i64) -> Complex64 {
        let r = i - self.i0;
        if r < 0 || r as usize >= self.rows.len() {
            return C0;
        }
        let row = &self.rows[r as usize];
        row[s.rem_euclid(row.len() as i64) as usize]
    }
}

/// All delay rows of `h`, one inverse FFT of length `L P^2` per row.
pub fn impulse_response_grid(eta: &DiscreteSpreadingFunction) -> ImpulseResponseGrid {
    let g = eta.grid();
    let n = g.period();
    let (i0, i1) = eta.row_range();
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let dnu = g.dnu();
    let rows = par::map_range((i1 - i0 + 1) as usize, |r| {
        let i = i0 + r as i64;
        let mut buf = vec![C0; n];
        for (j, v) in eta.row(i) {
            buf[j.rem_euclid(n as i64) as usize] += v;
        }
        fft.process(&mut buf);
        // buf[r] = sum_j eta(i, j) e^{2 pi i j r / N}; h(x_s, t_i) uses r = s - i
        (0..n as i64).map(|s| buf[(s - i).rem_euclid(n as i64) as usize] * dnu).collect()
    });
    ImpulseResponseGrid { grid: g, i0, rows }
}

fn check_train(grid: &Grid, g: &IdentifierTrain) -> Result<()> {
    if g.t != grid.t {
        return Err(Error::GridMismatch(format!("identifier T = {} but support T = {}", g.t, grid.t)));
    }
    if g.l() != grid.l {
        return Err(Error::GridMismatch(format!("identifier L = {} but support L = {}", g.l(), grid.l)));
    }
    let k = g.chirp_steps()?;
    if (k as i128 * grid.period() as i128 * grid.p as i128) % 2 != 0 {
        return Err(Error::NonIntegerChirpPeriod(format!(
            "chirp with L T a = {k} is not periodic over the superperiod at P = {}",
            grid.p
        )));
    }
    Ok(())
}

/// `Hg` over one superperiod.
pub fn apply_channel(eta: &DiscreteSpreadingFunction, g: &IdentifierTrain) -> Result<ChannelResponse> {
    let grid = eta.grid();
    check_train(&grid, g)?;
    let h = impulse_response_grid(eta);
    let p = grid.p as i64;
    let (i0, i1) = eta.row_range();
    let samples = par::map_range(grid.period(), |s| {
        let s = s as i64;
        // rows i = s - n P within [i0, i1]
        let n_lo = (s - i1).div_euclid(p) + i64::from((s - i1).rem_euclid(p) != 0);
        let n_hi = (s - i0).div_euclid(p);
        (n_lo..=n_hi)
            .map(|n| g.weight(n).expect("checked") * h.get(s, s - n * p))
            .sum::<Complex64>()
    });
    Ok(ChannelResponse { grid, samples, x_step: grid.dt() })
}

// --- Zak transform -------------------------------------------------------------

/// `Z f(t_u, nu_v)` for `u < L P`, `v < P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZakGrid {
    pub grid: Grid,
    values: Vec<Complex64>,
}

impl ZakGrid {
    /// Value at any integer `u`, extended quasi-periodically in `u` and
    /// periodically in `v`.
    pub fn get(&self, u: i64, v: i64) -> Complex64 {
        let n = self.grid.side() as i64;
        let p = self.grid.p as i64;
        let (k, u0) = (u.div_euclid(n), u.rem_euclid(n));
        let v0 = v.rem_euclid(p);
        // Z(t + k/Omega, nu) = e^{2 pi i k nu / Omega} Z(t, nu)
        self.values[(u0 * p + v0) as usize] * unit_root(k * v, self.grid.p)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
}

/// Non-normalized Zak transform with period `a = 1/Omega`.
///
/// Because `f` repeats every `P a`, the sum over shifts reduces to
/// `Z(u, v) = sum_{r < P} f(u - r L P) e^{2 pi i r v / P}`.
pub fn zak_transform(f: &ChannelResponse, a: f64) -> Result<ZakGrid> {
    let grid = f.grid;
    let expected = 1.0 / grid.omega();
    if (a - expected).abs() > 1e-12 * expected {
        return Err(Error::UnsupportedZakPeriod { a, expected });
    }
    let (n, p) = (grid.side(), grid.p);
    let rows = par::map_range(n, |u| {
        (0..p)
            .map(|v| {
                (0..p)
                    .map(|r| f.at(u as i64 - (r * n) as i64) * unit_root((r * v) as i64, p))
                    .sum::<Complex64>()
            })
            .collect::<Vec<_>>()
    });
    Ok(ZakGrid { grid, values: rows.concat() })
}

// --- quasiperiodization -----------------------------------------------------------

/// `eta^QP` on the fundamental rectangle, `L P x L P`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicGrid {
    pub grid: Grid,
    values: Vec<Complex64>,
}

impl QuasiPeriodicGrid {
    /// Value at any subcell, extended by the quasi-periodicity relations.
    pub fn get(&self, i: i64, j: i64) -> Complex64 {
        let n = self.grid.side() as i64;
        let (k, i0) = (i.div_euclid(n), i.rem_euclid(n));
        let j0 = j.rem_euclid(n);
        // eta^QP(t + k/Omega, nu) = e^{2 pi i k nu / Omega} eta^QP(t, nu)
        self.values[(i0 * n + j0) as usize] * unit_root(k * j, self.grid.p)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// `(1/Omega, 1/T)`-quasiperiodization of arbitrary subcell samples.
pub fn quasiperiodize_samples<I>(grid: Grid, samples: I) -> QuasiPeriodicGrid
where
    I: IntoIterator<Item = ((i64, i64), Complex64)>,
{
    let n = grid.side() as i64;
    let mut values = vec![C0; (n * n) as usize];
    for ((i, j), v) in samples {
        let (k, i0) = (i.div_euclid(n), i.rem_euclid(n));
        let j0 = j.rem_euclid(n);
        values[(i0 * n + j0) as usize] += v * unit_root(-k * j, grid.p);
    }
    QuasiPeriodicGrid { grid, values }
}

pub fn quasiperiodize(eta: &DiscreteSpreadingFunction) -> QuasiPeriodicGrid {
    quasiperiodize_samples(eta.grid(), eta.iter())
}

// --- linear system -----------------------------------------------------------------

/// The measurement vector and unknown vector at one base grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSample {
    pub u: usize,
    pub v: usize,
    /// `L` entries.
    pub z: Vec<Complex64>,
    /// `L^2` entries in the column order of the Gabor matrix.
    pub eta: Vec<Complex64>,
}

impl SystemSample {
    /// `||z - G eta||`.
    pub fn residual(&self, g: &GaborMatrix) -> f64 {
        let l = self.z.len();
        let e = g.entries();
        let r: Vec<Complex64> = (0..l)
            .map(|p| self.z[p] - (0..l * l).map(|c| e[(p, c)] * self.eta[c]).sum::<Complex64>())
            .collect();
        norm2(&r)
    }
}

/// Measurement vector `Z_p = Z(t_u + pT, nu_v) e^{-2 pi i nu_v p T}`.
pub fn z_vector(zf: &ZakGrid, u: usize, v: usize) -> Vec<Complex64> {
    let grid = zf.grid;
    let (p, n) = (grid.p, grid.side());
    (0..grid.l)
        .map(|k| zf.get((u + k * p) as i64, v as i64) * unit_root(-((v * k) as i64), n))
        .collect()
}

/// Builds both sides of the `L x L^2` system at the base point `(u, v)`.
pub fn assemble_system(
    eta_qp: &QuasiPeriodicGrid,
    zf: &ZakGrid,
    g: &GaborMatrix,
    u: usize,
    v: usize,
) -> Result<SystemSample> {
    let grid = zf.grid;
    if eta_qp.grid != grid || g.l() != grid.l {
        return Err(Error::GridMismatch("system inputs use different grids".into()));
    }
    if u >= grid.p || v >= grid.p {
        return Err(Error::IndexOutOfRange(format!("base point ({u}, {v}) outside 0..{}", grid.p)));
    }
    let (l, p, n) = (grid.l, grid.p, grid.side());
    let omega = grid.omega();
    let z = z_vector(zf, u, v);
    let mut eta = vec![C0; l * l];
    for q in 0..l {
        for m in 0..l {
            let val = eta_qp.get((u + q * p) as i64, (v + m * p) as i64);
            let phase = unit_root(-((v * q) as i64), n) * unit_root(-((q * m) as i64), l);
            eta[g.column_index(q, m)] = val * phase * omega;
        }
    }
    Ok(SystemSample { u, v, z, eta })
}
