//! Quadrature rules: tanh-sinh (double exponential) for integrands with
//! algebraic endpoint singularities, and composite Gauss–Legendre for smooth
//! integrands.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Settings for the tanh-sinh rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhSinh {
    /// Relative change between successive levels accepted as converged.
    pub rel_tol: f64,
    /// Maximum number of step halvings.
    pub max_level: usize,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_level: 12,
        }
    }
}

/// A quadrature node as seen by the integrand: the abscissa plus its
/// distances to both endpoints, computed without cancellation.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub x: f64,
    pub from_lower: f64,
    pub to_upper: f64,
}

const T_MAX: f64 = 4.0;

impl TanhSinh {
    /// Integrates `f` over `[a, b]`. The integrand receives a [`Node`], which
    /// lets it evaluate factors such as `(1 - x)` exactly near `x = 1`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(Node) -> f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let eval = |t: f64| -> f64 {
            let u = FRAC_PI_2 * t.sinh();
            let cu = u.cosh();
            let w = FRAC_PI_2 * t.cosh() / (cu * cu);
            // 1 - tanh u = e^{-u}/cosh u ; 1 + tanh u = e^{u}/cosh u
            let to_upper = half * (-u).exp() / cu;
            let from_lower = half * u.exp() / cu;
            if !(to_upper > 0.0 && from_lower > 0.0) || w == 0.0 {
                return 0.0;
            }
            let x = mid + half * u.tanh();
            let val = f(Node {
                x,
                from_lower,
                to_upper,
            });
            if val.is_finite() {
                half * w * val
            } else {
                0.0
            }
        };

        let mut h = 1.0;
        let mut sum = eval(0.0);
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 1;
        }
        let mut estimate = sum * h;
        let mut last_change = f64::INFINITY;
        for level in 1..=self.max_level {
            h *= 0.5;
            let mut k = 1;
            while (k as f64) * h <= T_MAX {
                let t = k as f64 * h;
                sum += eval(t) + eval(-t);
                k += 2;
            }
            let next = sum * h;
            last_change = (next - estimate).abs();
            estimate = next;
            if level >= 3 && last_change <= self.rel_tol * estimate.abs() {
                return Ok(estimate);
            }
        }
        Err(Error::QuadratureFailure {
            levels: self.max_level,
            last_change,
        })
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..(order + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 20-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + i as f64 * width;
                self.integrate(lo, lo + width, &f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
