//! The five model families and what they share.

pub mod antivoter;
pub mod binarycode;
pub mod combinatorial;
pub mod curieweiss;
pub mod independent;

use serde::{Deserialize, Serialize};

use crate::dist::ExactDistribution;
use crate::error::Result;
use crate::stein::{fit_constant, RatioTable};

/// A ratio table under a model's own rate together with its fitted constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub table: RatioTable,
    pub fitted_constant: f64,
    /// The model's error rate, e.g. `1/√n`.
    pub rate: f64,
    /// Largest `x` the band is claimed for.
    pub cap: f64,
}

impl BandReport {
    /// Table with half-width `(1 + x³)·rate` over the part of `grid` up to
    /// the cap (rows beyond it are kept and flagged out of range).
    pub fn from_rate(law: &ExactDistribution, grid: &[f64], rate: f64, cap: f64) -> Result<Self> {
        let table = RatioTable::with_rate(law, grid, rate, cap)?;
        let fitted_constant = fit_constant(&table)?;
        Ok(BandReport {
            table,
            fitted_constant,
            rate,
            cap,
        })
    }
}

/// `points` evenly spaced values on `[0, x_max]`.
pub fn linear_grid(x_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| x_max * i as f64 / (points - 1) as f64).collect(),
    }
}
