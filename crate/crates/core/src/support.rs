//! Spreading-support geometry on the subcell grid.
//!
//! A support lives on the lattice of subcells of size `(T/P) x (Omega/P)` with
//! `Omega = 1/(T L)`. Subcell `(i, j)` covers the point `(i T/P, j Omega/P)`;
//! cell `(q, m)` is the block `i in [qP, (q+1)P)`, `j in [mP, (m+1)P)`. The
//! fundamental rectangle `[0, LT) x [0, 1/T)` holds `LP x LP` subcells and the
//! base rectangle `[0, T) x [0, Omega)` holds `P x P`.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

pub type Cell = (usize, usize);

/// Discretization parameters shared by every grid object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t: f64,
    pub l: usize,
    pub p: usize,
}

impl Grid {
    pub fn new(t: f64, l: usize, p: usize) -> Result<Self> {
        validate(t, l, p)?;
        Ok(Self { t, l, p })
    }
    pub fn omega(&self) -> f64 {
        1.0 / (self.t * self.l as f64)
    }
    pub fn dt(&self) -> f64 {
        self.t / self.p as f64
    }
    pub fn dnu(&self) -> f64 {
        self.omega() / self.p as f64
    }
    /// `L P`, the side of the fundamental rectangle in subcells.
    pub fn side(&self) -> usize {
        self.l * self.p
    }
    /// `L P^2`, the number of x-samples in one superperiod.
    pub fn period(&self) -> usize {
        self.l * self.p * self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSupport {
    t: f64,
    l: usize,
    p: usize,
    subcells: BTreeSet<(i64, i64)>,
    shift: (i64, i64),
}

fn validate(t: f64, l: usize, p: usize) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameters(format!("T must be positive, got {t}")));
    }
    if l == 0 || p == 0 {
        return Err(Error::InvalidParameters(format!("L and P must be positive, got {l}, {p}")));
    }
    Ok(())
}

impl CellSupport {
    /// Support made of whole cells; cells may sit outside `[0, L)^2`.
    pub fn from_cells(t: f64, l: usize, p: usize, cells: &[(i64, i64)]) -> Result<Self> {
        validate(t, l, p)?;
        let pi = p as i64;
        let mut subcells = BTreeSet::new();
        for &(q, m) in cells {
            for a in 0..pi {
                for b in 0..pi {
                    subcells.insert((q * pi + a, m * pi + b));
                }
            }
        }
        Ok(Self { t, l, p, subcells, shift: (0, 0) })
    }

    pub fn from_subcells<I>(t: f64, l: usize, p: usize, subcells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, i64)>,
    {
        validate(t, l, p)?;
        Ok(Self { t, l, p, subcells: subcells.into_iter().collect(), shift: (0, 0) })
    }

    pub fn empty(t: f64, l: usize, p: usize) -> Result<Self> {
        Self::from_subcells(t, l, p, std::iter::empty())
    }

    /// Translate by a whole number of subcells in each direction.
    pub fn shifted(&self, di: i64, dj: i64) -> Self {
        Self {
            t: self.t,
            l: self.l,
            p: self.p,
            subcells: self.subcells.iter().map(|&(i, j)| (i + di, j + dj)).collect(),
            shift: (self.shift.0 + di, self.shift.1 + dj),
        }
    }

    /// Translate by `(t0, nu0)` in seconds and hertz; both must be grid aligned.
    pub fn shifted_by(&self, t0: f64, nu0: f64) -> Result<Self> {
        let di = grid_steps(t0, self.dt(), "t0")?;
        let dj = grid_steps(nu0, self.dnu(), "nu0")?;
        Ok(self.shifted(di, dj))
    }

    pub fn grid(&self) -> Grid {
        Grid { t: self.t, l: self.l, p: self.p }
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn l(&self) -> usize {
        self.l
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn omega(&self) -> f64 {
        1.0 / (self.t * self.l as f64)
    }
    /// Subcell width `T/P`.
    pub fn dt(&self) -> f64 {
        self.t / self.p as f64
    }
    /// Subcell height `Omega/P`.
    pub fn dnu(&self) -> f64 {
        self.omega() / self.p as f64
    }
    /// Side of the fundamental rectangle in subcells, `L P`.
    pub fn side(&self) -> usize {
        self.l * self.p
    }
    /// Accumulated shift in subcells.
    pub fn shift(&self) -> (i64, i64) {
        self.shift
    }
    pub fn shift_seconds(&self) -> (f64, f64) {
        (self.shift.0 as f64 * self.dt(), self.shift.1 as f64 * self.dnu())
    }
    pub fn subcells(&self) -> &BTreeSet<(i64, i64)> {
        &self.subcells
    }
    pub fn contains(&self, i: i64, j: i64) -> bool {
        self.subcells.contains(&(i, j))
    }
    pub fn len(&self) -> usize {
        self.subcells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.subcells.is_empty()
    }

    /// Area in the time-frequency plane; one cell has area `T Omega = 1/L`.
    pub fn area(&self) -> f64 {
        self.len() as f64 / (self.l * self.p * self.p) as f64
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.t == other.t && self.l == other.l && self.p == other.p
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch("supports use different grids".into()));
        }
        let subcells = self.subcells.union(&other.subcells).copied().collect();
        Ok(Self { subcells, shift: (0, 0), ..self.clone() })
    }

    /// Support with every subcell of the given cell removed.
    pub fn without_cell(&self, q: i64, m: i64) -> Self {
        let p = self.p as i64;
        let subcells = self
            .subcells
            .iter()
            .copied()
            .filter(|&(i, j)| (i.div_euclid(p), j.div_euclid(p)) != (q, m))
            .collect();
        Self { subcells, ..self.clone() }
    }

    /// Square dilation by `r` subcells.
    pub fn dilated(&self, r: usize) -> Self {
        let r = r as i64;
        let mut out = BTreeSet::new();
        for &(i, j) in &self.subcells {
            for a in -r..=r {
                for b in -r..=r {
                    out.insert((i + a, j + b));
                }
            }
        }
        Self { subcells: out, ..self.clone() }
    }

    /// Cells touched by the support, in absolute cell coordinates.
    pub fn occupied_cells(&self) -> BTreeSet<(i64, i64)> {
        let p = self.p as i64;
        self.subcells.iter().map(|&(i, j)| (i.div_euclid(p), j.div_euclid(p))).collect()
    }

    /// Cells touched after folding into the fundamental rectangle, row-major.
    pub fn active_cells(&self) -> Vec<Cell> {
        let set: BTreeSet<Cell> = self.subcells.iter().map(|&(i, j)| self.folded_cell(i, j)).collect();
        set.into_iter().collect()
    }

    /// Position of a subcell inside the fundamental rectangle.
    pub fn fold(&self, i: i64, j: i64) -> (usize, usize) {
        let s = self.side() as i64;
        (i.rem_euclid(s) as usize, j.rem_euclid(s) as usize)
    }

    pub fn folded_cell(&self, i: i64, j: i64) -> Cell {
        let (a, b) = self.fold(i, j);
        (a / self.p, b / self.p)
    }

    /// Bounding box `(i_min, j_min, i_max, j_max)`, inclusive.
    pub fn bounding_box(&self) -> Option<(i64, i64, i64, i64)> {
        let mut it = self.subcells.iter();
        let &(i0, j0) = it.next()?;
        Some(it.fold((i0, j0, i0, j0), |(a, b, c, d), &(i, j)| (a.min(i), b.min(j), c.max(i), d.max(j))))
    }

    /// Memory `K`: the delay extent measured from `t = 0`.
    pub fn memory(&self) -> f64 {
        match self.bounding_box() {
            Some((i0, _, i1, _)) => (i1 - i0.min(0) + 1) as f64 * self.dt(),
            None => 0.0,
        }
    }
}

pub(crate) fn grid_steps(x: f64, step: f64, what: &str) -> Result<i64> {
    let k = x / step;
    let r = k.round();
    if (k - r).abs() > 1e-9 * (1.0 + k.abs()) {
        return Err(Error::InvalidParameters(format!("{what} = {x} is not a multiple of the grid step {step}")));
    }
    Ok(r as i64)
}

/// Counts over a square grid of side `n`, row-major in the first index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountGrid {
    pub n: usize,
    pub counts: Vec<u32>,
}

impl CountGrid {
    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.counts[u * self.n + v]
    }
    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
    pub fn min(&self) -> u32 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// How often each subcell of the fundamental rectangle is hit by the
/// `(LT, 1/T)`-translates of the support.
pub fn fundamental_count(s: &CellSupport) -> CountGrid {
    let n = s.side();
    let mut counts = vec![0u32; n * n];
    for &(i, j) in s.subcells() {
        let (a, b) = s.fold(i, j);
        counts[a * n + b] += 1;
    }
    CountGrid { n, counts }
}

pub fn check_fundamental_domain(s: &CellSupport) -> bool {
    fundamental_count(s).max() <= 1
}

/// How often each base subcell is hit by the `(kT, l Omega)`-translates.
pub fn periodization_count(s: &CellSupport) -> CountGrid {
    let p = s.p() as i64;
    let n = s.p();
    let mut counts = vec![0u32; n * n];
    for &(i, j) in s.subcells() {
        counts[i.rem_euclid(p) as usize * n + j.rem_euclid(p) as usize] += 1;
    }
    CountGrid { n, counts }
}

pub fn check_identifiable(s: &CellSupport) -> bool {
    check_fundamental_domain(s) && periodization_count(s).max() as usize <= s.l()
}

/// Base subcells sharing one folded occupancy pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionClass {
    /// Cells whose translates cover the class, row-major.
    pub gamma: Vec<Cell>,
    /// Base subcells `(u, v)` with `0 <= u, v < P`.
    pub points: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectificationReport {
    pub gamma: Vec<Cell>,
    pub classes: Vec<PartitionClass>,
    pub max_cover: usize,
    /// Cover count equals L on every base subcell.
    pub exact_cover: bool,
    pub identifiable: bool,
}

impl RectificationReport {
    /// Classes with at least one unknown.
    pub fn nonempty_classes(&self) -> impl Iterator<Item = &PartitionClass> {
        self.classes.iter().filter(|c| !c.gamma.is_empty())
    }
}

/// Occupancy pattern of every base subcell, indexed `u * P + v`.
pub fn occupancy_patterns(s: &CellSupport) -> Vec<Vec<Cell>> {
    let p = s.p() as i64;
    let n = s.p();
    let mut pats: Vec<BTreeSet<Cell>> = vec![BTreeSet::new(); n * n];
    for &(i, j) in s.subcells() {
        let idx = i.rem_euclid(p) as usize * n + j.rem_euclid(p) as usize;
        pats[idx].insert(s.folded_cell(i, j));
    }
    pats.into_iter().map(|b| b.into_iter().collect()).collect()
}

pub fn rectify(s: &CellSupport) -> Result<RectificationReport> {
    if !check_fundamental_domain(s) {
        return Err(Error::NotIdentifiable("support overlaps its (LT, 1/T) translates".into()));
    }
    let cover = periodization_count(s);
    let max_cover = cover.max() as usize;
    if max_cover > s.l() {
        return Err(Error::NotIdentifiable(format!(
            "periodization count {max_cover} exceeds L = {}",
            s.l()
        )));
    }
    let n = s.p();
    let pats = occupancy_patterns(s);
    let mut order: Vec<Vec<Cell>> = Vec::new();
    let mut groups: BTreeMap<Vec<Cell>, Vec<(usize, usize)>> = BTreeMap::new();
    for (idx, pat) in pats.into_iter().enumerate() {
        let e = groups.entry(pat.clone()).or_default();
        if e.is_empty() {
            order.push(pat);
        }
        e.push((idx / n, idx % n));
    }
    let classes = order
        .into_iter()
        .map(|gamma| {
            let points = groups.remove(&gamma).unwrap_or_default();
            PartitionClass { gamma, points }
        })
        .collect();
    Ok(RectificationReport {
        gamma: s.active_cells(),
        classes,
        max_cover,
        exact_cover: cover.min() as usize == s.l(),
        identifiable: true,
    })
}

/// Largest total nu-extent over delay columns, on the grid.
pub fn bandwidth(s: &CellSupport) -> f64 {
    let mut cols: BTreeMap<i64, usize> = BTreeMap::new();
    for &(i, _) in s.subcells() {
        *cols.entry(i).or_default() += 1;
    }
    cols.values().copied().max().unwrap_or(0) as f64 * s.dnu()
}

/// Least L with `A, B <= (L-1)/2` and `4 (U / sqrt(L) + N / L) <= eps`.
pub fn jordan_rectification_bound(a: f64, b: f64, u: f64, n: u64, eps: f64, sigma: f64) -> Result<u64> {
    let positive = [a, b, u, eps, sigma].iter().all(|x| x.is_finite() && *x > 0.0);
    if !positive || sigma > 1.0 || n == 0 {
        return Err(Error::InvalidParameters(
            "need A, B, U, eps > 0, 0 < sigma <= 1 and N >= 1".into(),
        ));
    }
    let f = |l: u64| 4.0 * (u / (l as f64).sqrt() + n as f64 / l as f64);
    let start = (2.0 * a + 1.0).max(2.0 * b + 1.0).ceil().max(1.0) as u64;
    if f(start) <= eps {
        return Ok(start);
    }
    // f is decreasing in L, so bracket and bisect.
    let mut lo = start;
    let mut hi = start;
    while f(hi) > eps {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::InvalidParameters("eps too small".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

// --- example geometries -------------------------------------------------------

/// Three whole cells `(0,0), (1,0), (2,1)` for `L = 3`.
pub fn staircase_support(t: f64, p: usize) -> Result<CellSupport> {
    CellSupport::from_cells(t, 3, p, &[(0, 0), (1, 0), (2, 1)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quarter {
    Bottom,
    Left,
    Right,
    Top,
}

/// Splits a cell into four triangles by nearest edge, ties resolved in the
/// order bottom, left, right, top.
fn quarter(a: usize, b: usize, p: usize) -> Quarter {
    let d = [b, a, p - 1 - a, p - 1 - b];
    let qs = [Quarter::Bottom, Quarter::Left, Quarter::Right, Quarter::Top];
    let min = *d.iter().min().expect("four distances");
    qs[d.iter().position(|&x| x == min).expect("minimum exists")]
}

/// Seven-cell triangle mosaic for `L = 3` with an exact 3-cover, three
/// occupancy classes and bandwidth `2 Omega`.
pub fn triangle_mosaic_support(t: f64, p: usize) -> Result<CellSupport> {
    let pieces: [((i64, i64), &[Quarter]); 9] = [
        ((0, 0), &[Quarter::Bottom]),
        ((1, 0), &[Quarter::Bottom]),
        ((2, 3), &[Quarter::Bottom]),
        ((0, 0), &[Quarter::Left]),
        ((1, 1), &[Quarter::Left]),
        ((3, 1), &[Quarter::Left]),
        ((2, 2), &[Quarter::Top, Quarter::Right]),
        ((1, 1), &[Quarter::Top, Quarter::Right]),
        ((2, 1), &[Quarter::Top, Quarter::Right]),
    ];
    let pi = p as i64;
    let mut sub = Vec::new();
    for ((q, m), qs) in pieces {
        for a in 0..p {
            for b in 0..p {
                if qs.contains(&quarter(a, b, p)) {
                    sub.push((q * pi + a as i64, m * pi + b as i64));
                }
            }
        }
    }
    CellSupport::from_subcells(t, 3, p, sub)
}

/// Parallelogram `{(i, j) : k i <= j < k i + P, 0 <= i < L P}`, the image of
/// the strip `[0, LT) x [0, Omega)` under a shear of `k` subcells per column.
pub fn parallelogram_support(t: f64, l: usize, p: usize, k: i64) -> Result<CellSupport> {
    let (n, pi) = ((l * p) as i64, p as i64);
    let sub = (0..n).flat_map(|i| (k * i..k * i + pi).map(move |j| (i, j)));
    CellSupport::from_subcells(t, l, p, sub)
}

// --- file format ----------------------------------------------------------

/// Run-length encoded boolean mask over a rectangle of subcells, row-major
/// with the nu index fastest; runs alternate starting with `false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRle {
    pub origin: [i64; 2],
    pub shape: [usize; 2],
    pub runs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportFile {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub cells: Vec<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_mask_rle: Option<MaskRle>,
    #[serde(default)]
    pub shift: [f64; 2],
}

impl SupportFile {
    pub fn from_support(s: &CellSupport) -> Self {
        let base = s.shifted(-s.shift.0, -s.shift.1);
        let cells: Vec<[i64; 2]> = base.occupied_cells().into_iter().map(|(q, m)| [q, m]).collect();
        let full = CellSupport::from_cells(s.t, s.l, s.p, &cells.iter().map(|c| (c[0], c[1])).collect::<Vec<_>>())
            .expect("grid already validated");
        let fine_mask_rle = if full.subcells == base.subcells {
            None
        } else {
            let (i0, j0, i1, j1) = base.bounding_box().expect("nonempty when masks differ");
            let shape = [(i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize];
            let mut runs = Vec::new();
            let mut cur = false;
            let mut len = 0usize;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let bit = base.contains(i, j);
                    if bit != cur {
                        runs.push(len);
                        cur = bit;
                        len = 0;
                    }
                    len += 1;
                }
            }
            runs.push(len);
            Some(MaskRle { origin: [i0, j0], shape, runs })
        };
        let (t0, nu0) = s.shift_seconds();
        Self { t: s.t, l: s.l, p: s.p, cells, fine_mask_rle, shift: [t0, nu0] }
    }

    pub fn to_support(&self) -> Result<CellSupport> {
        let cells: Vec<(i64, i64)> = self.cells.iter().map(|c| (c[0], c[1])).collect();
        let full = CellSupport::from_cells(self.t, self.l, self.p, &cells)?;
        let base = match &self.fine_mask_rle {
            None => full,
            Some(rle) => {
                let total: usize = rle.runs.iter().sum();
                if total != rle.shape[0] * rle.shape[1] {
                    return Err(Error::Format(format!(
                        "mask runs cover {total} subcells, shape needs {}",
                        rle.shape[0] * rle.shape[1]
                    )));
                }
                let mut sub = Vec::new();
                let mut idx = 0usize;
                for (r, &len) in rle.runs.iter().enumerate() {
                    if r % 2 == 1 {
                        for k in idx..idx + len {
                            let i = rle.origin[0] + (k / rle.shape[1]) as i64;
                            let j = rle.origin[1] + (k % rle.shape[1]) as i64;
                            if !full.contains(i, j) {
                                return Err(Error::Format(format!(
                                    "mask subcell ({i}, {j}) lies outside the listed cells"
                                )));
                            }
                            sub.push((i, j));
                        }
                    }
                    idx += len;
                }
                let masked = CellSupport::from_subcells(self.t, self.l, self.p, sub)?;
                if masked.occupied_cells().len() != cells.iter().collect::<BTreeSet<_>>().len() {
                    return Err(Error::Format("a listed cell has no subcell in the mask".into()));
                }
                masked
            }
        };
        base.shifted_by(self.shift[0], self.shift[1])
    }
}
