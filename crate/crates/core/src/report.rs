use serde::Serialize;

/// Outcome of a residual check over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub check: String,
    pub max_residual: f64,
    /// Grid location of the largest residual.
    pub worst_at: f64,
    pub tolerance: f64,
    pub points: usize,
    pub passed: bool,
}

impl ResidualReport {
    /// Folds `(location, residual)` pairs; NaN residuals count as failures.
    pub fn from_residuals(
        check: impl Into<String>,
        tolerance: f64,
        residuals: impl IntoIterator<Item = (f64, f64)>,
    ) -> Self {
        let mut max_residual = 0.0_f64;
        let mut worst_at = f64::NAN;
        let mut points = 0;
        let mut saw_nan = false;
        for (at, res) in residuals {
            points += 1;
            let res = res.abs();
            if res.is_nan() {
                saw_nan = true;
                worst_at = at;
            } else if res >= max_residual {
                max_residual = res;
                if !saw_nan {
                    worst_at = at;
                }
            }
        }
        if saw_nan {
            max_residual = f64::NAN;
        }
        Self {
            check: check.into(),
            max_residual,
            worst_at,
            tolerance,
            points,
            passed: !saw_nan && points > 0 && max_residual < tolerance,
        }
    }
}
