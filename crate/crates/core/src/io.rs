//! File formats.
//!
//! CSV files start with one `#` line of `key=value` pairs. Floats are written
//! with 17 significant digits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::channel::{ChannelResponse, DiscreteSpreadingFunction, ImpulseResponseGrid, ZakGrid};
use crate::error::{Error, Result};
use crate::gabor::Window;
use crate::support::{CellSupport, Grid};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFile {
    #[serde(rename = "L")]
    pub l: usize,
    pub weights: Vec<[f64; 2]>,
    pub seed: Option<u64>,
}

impl WindowFile {
    pub fn from_window(w: &Window) -> Self {
        Self { l: w.len(), weights: w.weights.iter().map(|z| [z.re, z.im]).collect(), seed: w.seed }
    }

    pub fn to_window(&self) -> Result<Window> {
        if self.weights.len() != self.l {
            return Err(Error::Format(format!("L = {} but {} weights", self.l, self.weights.len())));
        }
        let mut w = Window::new(self.weights.iter().map(|c| Complex64::new(c[0], c[1])).collect())?;
        w.seed = self.seed;
        Ok(w)
    }
}

fn header(grid: &Grid) -> String {
    format!("# T={},L={},P={}", fmt_f64(grid.t), grid.l, grid.p)
}

fn parse_header(line: &str) -> Result<BTreeMap<String, String>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing '#' header line".into()))?;
    let mut out = BTreeMap::new();
    for kv in body.split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header entry '{kv}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(h: &BTreeMap<String, String>, key: &str) -> Result<T> {
    h.get(key)
        .ok_or_else(|| Error::Format(format!("header lacks '{key}'")))?
        .parse()
        .map_err(|_| Error::Format(format!("header field '{key}' is malformed")))
}

fn grid_of(h: &BTreeMap<String, String>) -> Result<Grid> {
    Grid::new(field(h, "T")?, field(h, "L")?, field(h, "P")?)
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Format(format!("line {line}: cannot parse '{s}'")))
}

type Header = BTreeMap<String, String>;
type Rows<'a> = Vec<(usize, Vec<&'a str>)>;

/// Data rows after the header and the column-name line.
fn rows(text: &str, ncols: usize) -> Result<(Header, Rows<'_>)> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let h = parse_header(first)?;
    lines.next();
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != ncols {
            return Err(Error::Format(format!("line {}: expected {ncols} fields", n + 1)));
        }
        out.push((n + 1, parts));
    }
    Ok((h, out))
}

/// `i,j,re,im` over the support subcells.
pub fn write_spreading_csv(eta: &DiscreteSpreadingFunction) -> String {
    let mut s = header(&eta.grid());
    s.push_str("\ni,j,re,im\n");
    for ((i, j), v) in eta.iter() {
        s.push_str(&format!("{i},{j},{},{}\n", fmt_f64(v.re), fmt_f64(v.im)));
    }
    s
}

/// Reads samples; the listed subcells form the support.
pub fn read_spreading_csv(text: &str) -> Result<DiscreteSpreadingFunction> {
    let (h, data) = rows(text, 4)?;
    let grid = grid_of(&h)?;
    let mut vals = Vec::with_capacity(data.len());
    for (n, p) in data {
        vals.push(((num::<i64>(p[0], n)?, num::<i64>(p[1], n)?), Complex64::new(num(p[2], n)?, num(p[3], n)?)));
    }
    let support = CellSupport::from_subcells(grid.t, grid.l, grid.p, vals.iter().map(|v| v.0))?;
    let map: BTreeMap<(i64, i64), Complex64> = vals.into_iter().collect();
    Ok(DiscreteSpreadingFunction::from_fn(&support, |i, j| map[&(i, j)]))
}

pub fn write_response_csv(r: &ChannelResponse) -> String {
    let g = r.grid;
    let mut s = format!("# x_step={},T={},L={},P={}\ni,re,im\n", fmt_f64(r.x_step), fmt_f64(g.t), g.l, g.p);
    for (i, v) in r.samples.iter().enumerate() {
        s.push_str(&format!("{i},{},{}\n", fmt_f64(v.re), fmt_f64(v.im)));
    }
    s
}

pub fn read_response_csv(text: &str) -> Result<ChannelResponse> {
    let (h, data) = rows(text, 3)?;
    let grid = grid_of(&h)?;
    let mut r = ChannelResponse::zeros(grid);
    if data.len() != r.samples.len() {
        return Err(Error::Format(format!("expected {} samples, found {}", r.samples.len(), data.len())));
    }
    for (n, p) in data {
        let i: usize = num(p[0], n)?;
        let slot = r
            .samples
            .get_mut(i)
            .ok_or_else(|| Error::Format(format!("line {n}: index {i} out of range")))?;
        *slot = Complex64::new(num(p[1], n)?, num(p[2], n)?);
    }
    Ok(r)
}

/// `u,v,re,im` with `u < L P`, `v < P`.
pub fn write_zak_csv(z: &ZakGrid) -> String {
    let g = z.grid;
    let mut s = header(&g);
    s.push_str("\nu,v,re,im\n");
    for u in 0..g.side() {
        for v in 0..g.p {
            let val = z.get(u as i64, v as i64);
            s.push_str(&format!("{u},{v},{},{}\n", fmt_f64(val.re), fmt_f64(val.im)));
        }
    }
    s
}

/// `x,i,re,im` rows of an impulse-response grid.
pub fn write_impulse_csv(h: &ImpulseResponseGrid) -> String {
    let mut s = header(&h.grid);
    s.push_str("\nx,i,re,im\n");
    for (r, row) in h.rows.iter().enumerate() {
        let i = h.i0 + r as i64;
        for (x, v) in row.iter().enumerate() {
            s.push_str(&format!("{x},{i},{},{}\n", fmt_f64(v.re), fmt_f64(v.im)));
        }
    }
    s
}
