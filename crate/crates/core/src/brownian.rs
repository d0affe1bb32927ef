//! Discretized Brownian drivers on uniform grids.
//!
//! Draws are counter-based: every normal variate is keyed by
//! (seed, refinement level, driver, index), so bridge refinement and
//! parallel dispatch never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One standard normal draw for a (seed, level, stream, index) counter.
fn counter_normal(seed: u64, level: u32, stream: u32, index: u64) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&level.to_le_bytes());
    key[12..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(b"stoflow\0");
    let mut rng = ChaCha8Rng::from_seed(key);
    StandardNormal.sample(&mut rng)
}

/// Deterministic per-member seed derived from a master seed (splitmix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// An m-dimensional Brownian path sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    drivers: usize,
    horizon: f64,
    steps: usize,
    level: u32,
    seed: u64,
    /// (steps + 1) x m, row-major; row 0 is exactly zero.
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn drivers(&self) -> usize {
        self.drivers
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid time t_j; exact at both endpoints.
    pub fn time(&self, j: usize) -> f64 {
        self.horizon * (j as f64 / self.steps as f64)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    pub fn value(&self, j: usize, driver: usize) -> f64 {
        self.values[j * self.drivers + driver]
    }

    pub fn increment(&self, j: usize, driver: usize) -> f64 {
        self.value(j + 1, driver) - self.value(j, driver)
    }

    /// The values of one driver over the whole grid.
    pub fn driver_values(&self, driver: usize) -> Vec<f64> {
        (0..=self.steps).map(|j| self.value(j, driver)).collect()
    }
}

/// Sample a fresh path: increments are i.i.d. N(0, T/steps) per driver.
pub fn sample_brownian(
    drivers: usize,
    horizon: f64,
    steps: usize,
    seed: u64,
) -> Result<BrownianPath> {
    if steps == 0 {
        return Err(Error::argument("steps must be at least 1"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::argument("horizon must be positive and finite"));
    }
    let m = drivers;
    let mut values = vec![0.0; (steps + 1) * m];
    let sd = (horizon / steps as f64).sqrt();
    for j in 0..steps {
        for k in 0..m {
            let z = counter_normal(seed, 0, k as u32, j as u64);
            values[(j + 1) * m + k] = values[j * m + k] + sd * z;
        }
    }
    Ok(BrownianPath {
        drivers,
        horizon,
        steps,
        level: 0,
        seed,
        values,
    })
}

/// Brownian-bridge refinement: even indices keep the parent values
/// exactly, odd indices are conditional midpoints N(mean of neighbours,
/// dt/4) where dt is the parent spacing.
pub fn refine_brownian(path: &BrownianPath) -> BrownianPath {
    let m = path.drivers;
    let new_steps = path.steps * 2;
    let new_level = path.level + 1;
    let mut values = vec![0.0; (new_steps + 1) * m];
    let half_sd = (path.dt() / 4.0).sqrt();
    for j in 0..=path.steps {
        for k in 0..m {
            values[(2 * j) * m + k] = path.value(j, k);
        }
    }
    for j in 0..path.steps {
        for k in 0..m {
            let mid = 0.5 * (path.value(j, k) + path.value(j + 1, k));
            let z = counter_normal(path.seed, new_level, k as u32, j as u64);
            values[(2 * j + 1) * m + k] = mid + half_sd * z;
        }
    }
    BrownianPath {
        drivers: m,
        horizon: path.horizon,
        steps: new_steps,
        level: new_level,
        seed: path.seed,
        values,
    }
}
