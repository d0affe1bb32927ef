//! Discrete stochastic calculus on real-valued grid paths.
//!
//! All integrals are cumulative sums over the shared uniform grid, in a
//! fixed left-to-right order: Stratonovich uses trapezoidal (midpoint)
//! evaluation, Ito uses the left point, and the quadratic covariation is
//! the running sum of increment products.

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};

/// A real-valued path sampled on the same grid as the driving noise.
#[derive(Clone, Debug)]
pub struct RealPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl RealPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::argument(
                "path needs matching times/values with at least two samples",
            ));
        }
        Ok(RealPath { times, values })
    }

    /// One driver column of a Brownian path.
    pub fn driver(path: &BrownianPath, k: usize) -> RealPath {
        RealPath {
            times: path.times(),
            values: path.driver_values(k),
        }
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn check_same_grid(&self, other: &RealPath) -> Result<()> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| a != b)
        {
            return Err(Error::argument("paths live on different grids"));
        }
        Ok(())
    }
}

/// Cumulative Stratonovich integral: sum of (Y_j + Y_{j+1})/2 * dB_j.
pub fn stratonovich_integral(y: &RealPath, b: &RealPath) -> Result<RealPath> {
    y.check_same_grid(b)?;
    let mut values = Vec::with_capacity(y.times.len());
    let mut acc = 0.0;
    values.push(acc);
    for j in 0..y.steps() {
        let db = b.values[j + 1] - b.values[j];
        acc += 0.5 * (y.values[j] + y.values[j + 1]) * db;
        values.push(acc);
    }
    RealPath::new(y.times.clone(), values)
}

/// Cumulative Ito integral: sum of Y_j * dB_j.
pub fn ito_integral(y: &RealPath, b: &RealPath) -> Result<RealPath> {
    y.check_same_grid(b)?;
    let mut values = Vec::with_capacity(y.times.len());
    let mut acc = 0.0;
    values.push(acc);
    for j in 0..y.steps() {
        let db = b.values[j + 1] - b.values[j];
        acc += y.values[j] * db;
        values.push(acc);
    }
    RealPath::new(y.times.clone(), values)
}

/// Cumulative quadratic covariation: sum of dY_j * dB_j.
pub fn quadratic_covariation(y: &RealPath, b: &RealPath) -> Result<RealPath> {
    y.check_same_grid(b)?;
    let mut values = Vec::with_capacity(y.times.len());
    let mut acc = 0.0;
    values.push(acc);
    for j in 0..y.steps() {
        let dy = y.values[j + 1] - y.values[j];
        let db = b.values[j + 1] - b.values[j];
        acc += dy * db;
        values.push(acc);
    }
    RealPath::new(y.times.clone(), values)
}

/// Cumulative trapezoidal ds-integral of a path.
pub fn time_integral(y: &RealPath) -> RealPath {
    let mut values = Vec::with_capacity(y.times.len());
    let mut acc = 0.0;
    values.push(acc);
    for j in 0..y.steps() {
        let dt = y.times[j + 1] - y.times[j];
        acc += 0.5 * (y.values[j] + y.values[j + 1]) * dt;
        values.push(acc);
    }
    RealPath {
        times: y.times.clone(),
        values,
    }
}
