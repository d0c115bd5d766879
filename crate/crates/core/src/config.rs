//! Numerical settings shared by the quadrature, series and Monte Carlo code.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::TanhSinh;
use crate::specfun::SeriesTolerance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericsConfig {
    /// Relative tolerance of the tanh-sinh rule.
    pub quad_tol: f64,
    /// Maximum number of tanh-sinh halvings.
    pub quad_levels: usize,
    /// Relative tail bound for hypergeometric series.
    pub series_eps: f64,
    pub series_max_terms: usize,
    /// Base step of finite-difference stencils.
    pub fd_step: f64,
    pub seed: u64,
    /// Monte Carlo sample count per estimate.
    pub samples: usize,
    /// Euclidean radius beyond which Monte Carlo sampling is truncated;
    /// `None` picks it from the analytic tail bound.
    pub r_max: Option<f64>,
    /// Standard error above which Monte Carlo results carry a warning.
    pub mc_tolerance: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-13,
            quad_levels: 12,
            series_eps: 1e-16,
            series_max_terms: 200_000,
            fd_step: 1e-3,
            seed: 20240601,
            samples: 100_000,
            r_max: None,
            mc_tolerance: 1e-2,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0) || self.quad_levels < 3 {
            return Err(Error::InvalidParameter("quadrature settings".into()));
        }
        SeriesTolerance::new(self.series_eps, self.series_max_terms)?;
        if !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return Err(Error::InvalidParameter(format!("fd_step {} outside (0, 0.1)", self.fd_step)));
        }
        if self.samples < 100 {
            return Err(Error::InvalidParameter("at least 100 samples are required".into()));
        }
        if !(self.mc_tolerance > 0.0) {
            return Err(Error::InvalidParameter("mc_tolerance must be positive".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidParameter(format!("r_max {r} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn quadrature(&self) -> TanhSinh {
        TanhSinh {
            rel_tol: self.quad_tol,
            max_level: self.quad_levels,
        }
    }

    pub fn series(&self) -> SeriesTolerance {
        SeriesTolerance {
            rel_eps: self.series_eps,
            max_terms: self.series_max_terms,
        }
    }
}
