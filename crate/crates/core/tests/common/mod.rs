#![allow(dead_code)]

use num_complex::Complex64;
use opsample::channel::{apply_channel, zak_transform, ChannelResponse, DiscreteSpreadingFunction, IdentifierTrain, ZakGrid};
use opsample::gabor::{generate_window, SparkTarget, Window};
use opsample::support::CellSupport;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn full_spark_window(l: usize, seed: u64) -> Window {
    generate_window(l, SparkTarget::Full, seed, 1000).expect("full-spark window").window
}

/// `Hg` summed subcell by subcell, without the impulse-response grid.
pub fn response_oracle(eta: &DiscreteSpreadingFunction, g: &IdentifierTrain) -> Vec<Complex64> {
    let grid = eta.grid();
    let n = grid.period() as i64;
    let p = grid.p as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); n as usize];
    for ((i, j), v) in eta.iter() {
        let mut s = i.rem_euclid(p);
        while s < n {
            let k = (s - i) / p;
            let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j * (s - i)) as f64 / n as f64);
            out[s as usize] += g.weight(k).unwrap() * v * phase * grid.dnu();
            s += p;
        }
    }
    out
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn simulate(eta: &DiscreteSpreadingFunction, g: &IdentifierTrain) -> (ChannelResponse, ZakGrid) {
    let hg = apply_channel(eta, g).expect("forward model");
    let z = zak_transform(&hg, 1.0 / eta.grid().omega()).expect("Zak transform");
    (hg, z)
}

pub fn random_eta(s: &CellSupport, seed: u64) -> DiscreteSpreadingFunction {
    DiscreteSpreadingFunction::random(s, &mut rng(seed))
}
