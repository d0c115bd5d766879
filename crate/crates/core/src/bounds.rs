//! The sharp concentration bound `θ(s)`, its inverse, and residual checks for
//! the identities that relate `θ`, the weight and the isoperimetric profile.

use std::f64::consts::PI;

use serde::Serialize;

use crate::config::NumericsConfig;
use crate::error::{domain, Result};
use crate::geometry::{
    ball_volume, euclidean_radius, hyperbolic_radius_from_volume, isoperimetric_profile,
    one_minus_sq, radius_derivative, radius_from_volume, radius_second_derivative, volume_hyp,
};
use crate::quadrature::GaussLegendre;
use crate::report::ResidualReport;
use crate::specfun::{gamma, hyp2f1, SeriesTolerance};
use crate::weights::{log_phi, log_phi_derivatives, radial_integral, WeightParams};

const TABLE_NODES: usize = 2048;
const TABLE_MIN_S: f64 = 1e-4;

/// `θ(s)` for `n = 2`: `1 − (1 + s/4π)^{1−α}`.
pub fn theta_n2(alpha: f64, s: f64) -> f64 {
    -((1.0 - alpha) * (s / (4.0 * PI)).ln_1p()).exp_m1()
}

/// Tabulated `θ` with exact slopes, for fast repeated queries.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaProfile {
    pub params: WeightParams,
    #[serde(skip)]
    cfg: NumericsConfig,
    s: Vec<f64>,
    v: Vec<f64>,
    theta: Vec<f64>,
    slope: Vec<f64>,
}

impl ThetaProfile {
    pub fn new(params: &WeightParams, cfg: &NumericsConfig) -> Result<Self> {
        let n = params.n;
        // s_max: grow until θ(s_max) > 0.9999
        let mut s_max = 100.0;
        while theta_direct(params, cfg, s_max)? <= 0.9999 {
            s_max *= 4.0;
        }
        let ratio = (s_max / TABLE_MIN_S).ln() / (TABLE_NODES - 1) as f64;
        let s: Vec<f64> = (0..TABLE_NODES)
            .map(|k| if k + 1 == TABLE_NODES { s_max } else { TABLE_MIN_S * (ratio * k as f64).exp() })
            .collect();
        let rho: Vec<f64> = s.iter().map(|&x| hyperbolic_radius_from_volume(n, x)).collect();
        let gl = GaussLegendre::standard();
        let mut theta = Vec::with_capacity(TABLE_NODES);
        theta.push(theta_direct(params, cfg, s[0])?);
        for k in 1..TABLE_NODES {
            let step = gl.integrate(rho[k - 1], rho[k], |r| params.radial_density(r));
            theta.push(theta[k - 1] + step);
        }
        let v: Vec<f64> = rho.iter().map(|&r| euclidean_radius(r)).collect();
        let slope = v.iter().map(|&v| theta_slope(params, v)).collect();
        Ok(Self {
            params: *params,
            cfg: *cfg,
            s,
            v,
            theta,
            slope,
        })
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Table rows `(s, v(s), θ(s))`.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.s
            .iter()
            .zip(&self.v)
            .zip(&self.theta)
            .map(|((s, v), t)| (*s, *v, *t))
    }

    /// `θ(s)`: cubic Hermite interpolation with exact slopes inside the
    /// table, direct quadrature outside.
    pub fn theta(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return 0.0;
        }
        if s < self.s[0] || s > self.s_max() {
            return theta_direct(&self.params, &self.cfg, s).unwrap_or(f64::NAN);
        }
        let k = self.s.partition_point(|&x| x <= s).clamp(1, TABLE_NODES - 1) - 1;
        let (s0, s1) = (self.s[k], self.s[k + 1]);
        let h = s1 - s0;
        let t = (s - s0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.theta[k]
            + (t3 - 2.0 * t2 + t) * h * self.slope[k]
            + (-2.0 * t3 + 3.0 * t2) * self.theta[k + 1]
            + (t3 - t2) * h * self.slope[k + 1]
    }

    pub fn theta_direct(&self, s: f64) -> Result<f64> {
        theta_direct(&self.params, &self.cfg, s)
    }

    /// `T(x) = θ⁻¹(x)`.
    pub fn theta_inverse(&self, x: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(domain("theta_inverse", format!("x = {x} outside [0, 1)")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let k = self.theta.partition_point(|&t| t <= x);
        let (mut lo, mut hi) = if k == 0 {
            (0.0, self.s[0])
        } else if k == TABLE_NODES {
            let mut hi = self.s_max() * 2.0;
            while self.theta_direct(hi)? <= x {
                hi *= 2.0;
            }
            (self.s_max(), hi)
        } else {
            (self.s[k - 1], self.s[k])
        };
        let mut s = 0.5 * (lo + hi);
        for _ in 0..100 {
            let f = self.theta_direct(s)? - x;
            if f.abs() <= 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = theta_slope(&self.params, radius_from_volume(self.params.n, s));
            let mut next = s - f / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - s).abs() <= 1e-15 * s;
            s = next;
            if done {
                break;
            }
        }
        Ok(s)
    }

    /// `(θ′(s), θ″(s))`.
    pub fn derivatives(&self, s: f64) -> Result<(f64, f64)> {
        theta_derivatives(&self.params, s)
    }
}

/// `θ(s)` by direct quadrature; `1 − θ` is integrated instead once the
/// radius passes 0.9.
pub fn theta_direct(params: &WeightParams, cfg: &NumericsConfig, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Ok(0.0);
    }
    let rho = hyperbolic_radius_from_volume(params.n, s);
    let v = euclidean_radius(rho);
    let e = (-rho).exp();
    let defect = 2.0 * e / (1.0 + e);
    let (n, a, c) = (params.n, params.alpha, params.c_alpha);
    if v <= 0.9 {
        Ok(c * radial_integral(n, a, 0.0, defect, cfg)?)
    } else {
        Ok(1.0 - c * radial_integral(n, a, v, 0.0, cfg)?)
    }
}

/// `θ′(s) = n c v^{n−1} Φₙ^α(v) (1−v²)^{−n} v′(s)` in terms of `v = v(s)`.
fn theta_slope(params: &WeightParams, v: f64) -> f64 {
    let n = params.n as f64;
    n * params.c_alpha * v.powf(n - 1.0) * (params.alpha * log_phi(params.n, v)).exp()
        * one_minus_sq(v).powf(-n)
        * radius_derivative(params.n, v)
}

/// `(θ′(s), θ″(s))`, differentiating the closed integrand once by the product
/// and chain rules.
pub fn theta_derivatives(params: &WeightParams, s: f64) -> Result<(f64, f64)> {
    let n = params.n;
    let nf = n as f64;
    let v = radius_from_volume(n, s);
    let d1 = theta_slope(params, v);
    let vp = radius_derivative(n, v);
    let vpp = radius_second_derivative(n, v);
    let (_, lp, _) = log_phi_derivatives(n, v)?;
    let log_slope = (nf - 1.0) * vp / v
        + 2.0 * nf * v * vp / one_minus_sq(v)
        + params.alpha * lp * vp
        + vpp / vp;
    Ok((d1, d1 * log_slope))
}

/// Residual of `θ″/θ′ + γ Υ(s)` over `grid`.
pub fn certify_theta_ode(profile: &ThetaProfile, grid: &[f64]) -> ResidualReport {
    let p = &profile.params;
    let tol = if p.n == 2 { 1e-8 } else { 1e-5 };
    ResidualReport::from_residuals(
        format!("theta-ode n={} alpha={}", p.n, p.alpha),
        tol,
        grid.iter().map(|&s| {
            let res = profile
                .derivatives(s)
                .map_or(f64::NAN, |(d1, d2)| d2 / d1 + p.gamma * isoperimetric_profile(p.n, s));
            (s, res)
        }),
    )
}

/// Relative residual of `(log Φₙ)′(v)·v′ = −(n−1)² Υ(s)` at `s = V(v)`, with
/// the right side from the closed expression of `Υ` in `v`.
pub fn certify_merk(n: usize, grid: &[f64]) -> ResidualReport {
    let nf = n as f64;
    ResidualReport::from_residuals(
        format!("merk n={n}"),
        1e-7,
        grid.iter().map(|&v| {
            let res = (|| -> Result<f64> {
                let (_, lp, _) = log_phi_derivatives(n, v)?;
                let lhs = lp * radius_derivative(n, v);
                let upsilon = one_minus_sq(v).powf(2.0 * nf - 2.0) * gamma(nf / 2.0) * volume_hyp(n, v * v)?
                    / (nf * 2f64.powf(nf - 1.0) * PI.powf(nf / 2.0) * v.powf(nf - 2.0));
                let rhs = -(nf - 1.0).powi(2) * upsilon;
                Ok((lhs - rhs).abs() / lhs.abs())
            })()
            .unwrap_or(f64::NAN);
            (v, res)
        }),
    )
}

/// Relative residual of `−((n−1)+(n+1)v²) v′/(v(v²−1)) + v″/v′ = 0` with
/// `v′, v″` from centered differences of `radius_from_volume`.
pub fn certify_claim(n: usize, grid: &[f64]) -> ResidualReport {
    let nf = n as f64;
    ResidualReport::from_residuals(
        format!("claim n={n}"),
        1e-4,
        grid.iter().map(|&s| {
            let h = 1e-3 * s;
            let v = radius_from_volume(n, s);
            let vp = radius_from_volume(n, s + h);
            let vm = radius_from_volume(n, s - h);
            let d1 = (vp - vm) / (2.0 * h);
            let d2 = (vp - 2.0 * v + vm) / (h * h);
            let a = -((nf - 1.0) + (nf + 1.0) * v * v) * d1 / (v * (v * v - 1.0));
            let b = d2 / d1;
            (s, (a + b) / a.abs().max(b.abs()))
        }),
    )
}

/// Euler transformation `F[a,b,c,x] = (1−x)^{c−a−b} F[c−a,c−b,c,x]` for the
/// parameter triples `(n/2, n, 1+n/2)` and `(1, 2−n/2, 1+n/2)`.
pub fn certify_euler(ns: &[usize], grid: &[f64]) -> ResidualReport {
    let tol = SeriesTolerance::default();
    let mut residuals = Vec::new();
    for &n in ns {
        let h = n as f64 / 2.0;
        for (a, b, c) in [(h, n as f64, 1.0 + h), (1.0, 2.0 - h, 1.0 + h)] {
            for &x in grid {
                let res = (|| -> Result<f64> {
                    let lhs = hyp2f1(a, b, c, x, tol)?;
                    let rhs = (1.0 - x).powf(c - a - b) * hyp2f1(c - a, c - b, c, x, tol)?;
                    Ok((lhs - rhs).abs() / lhs.abs())
                })()
                .unwrap_or(f64::NAN);
                residuals.push((x, res));
            }
        }
    }
    ResidualReport::from_residuals("euler", 1e-10, residuals)
}

/// `2Γ(m+n−1)/((2m+n)Γ(1+m)Γ(n−2)) + 2Γ(m+n−1)/(Γ(1+m)Γ(n−1))
///  = 4Γ(m+n)/((2m+n)Γ(1+m)Γ(n−1))`, relative residual.
pub fn certify_gamma_identity(ms: std::ops::RangeInclusive<u32>, ns: std::ops::RangeInclusive<u32>) -> ResidualReport {
    let mut residuals = Vec::new();
    for n in ns {
        for m in ms.clone() {
            let (m, n) = (m as f64, n as f64);
            let g1 = gamma(1.0 + m);
            let lhs = 2.0 * gamma(m + n - 1.0) / ((2.0 * m + n) * g1 * gamma(n - 2.0))
                + 2.0 * gamma(m + n - 1.0) / (g1 * gamma(n - 1.0));
            let rhs = 4.0 * gamma(m + n) / ((2.0 * m + n) * g1 * gamma(n - 1.0));
            residuals.push((m, (lhs - rhs).abs() / rhs.abs()));
        }
    }
    ResidualReport::from_residuals("gamma-identity", 1e-10, residuals)
}

/// `d/ds F[n/2,n,1+n/2,s] = n((1−s)^{−n} − F)/(2s)`, checked against a
/// centered difference.
pub fn certify_hyp_derivative(ns: &[usize], grid: &[f64]) -> ResidualReport {
    let mut residuals = Vec::new();
    for &n in ns {
        let nf = n as f64;
        for &s in grid {
            let res = (|| -> Result<f64> {
                let h = 1e-5;
                let fd = (volume_hyp(n, s + h)? - volume_hyp(n, s - h)?) / (2.0 * h);
                let f = volume_hyp(n, s)?;
                let exact = nf * ((1.0 - s).powf(-nf) - f) / (2.0 * s);
                Ok((fd - exact).abs() / exact.abs())
            })()
            .unwrap_or(f64::NAN);
            residuals.push((s, res));
        }
    }
    ResidualReport::from_residuals("hyp2f1-derivative", 1e-6, residuals)
}

/// `θ(V(v))` through the profile table against the direct integral to `v`.
pub fn theta_consistency(profile: &ThetaProfile, radii: &[f64]) -> ResidualReport {
    let p = &profile.params;
    ResidualReport::from_residuals(
        "theta-consistency",
        1e-10,
        radii.iter().map(|&v| {
            let res = ball_volume(p.n, v).and_then(|s| {
                let direct = p.c_alpha * radial_integral(p.n, p.alpha, 0.0, 1.0 - v, &profile.cfg)?;
                Ok(profile.theta(s) - direct)
            });
            (v, res.unwrap_or(f64::NAN))
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (0..k)
            .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
            .collect()
    }

    fn profile(n: usize, alpha: f64) -> ThetaProfile {
        let cfg = NumericsConfig::default();
        ThetaProfile::new(&WeightParams::new(n, alpha, &cfg).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn theta_examples() {
        let p = profile(2, 2.0);
        assert_eq!(p.theta(0.0), 0.0);
        assert!((p.theta(4.0 * PI) - 0.5).abs() < 1e-10);
        assert!((p.theta_direct(4.0 * PI).unwrap() - 0.5).abs() < 1e-12);
        assert!(p.theta(1e9) > 1.0 - 1e-7);
        for s in log_grid(1e-3, 1e4, 60) {
            let exact = theta_n2(2.0, s);
            assert!((p.theta_direct(s).unwrap() - exact).abs() < 1e-12);
            assert!((p.theta(s) - exact).abs() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn theta_inverse_round_trip() {
        let p = profile(2, 2.0);
        assert_eq!(p.theta_inverse(0.0).unwrap(), 0.0);
        assert!((p.theta_inverse(0.5).unwrap() - 4.0 * PI).abs() < 1e-9);
        assert!(p.theta_inverse(1.0).is_err());
        let q = profile(3, 1.5);
        for i in 1..50 {
            let x = i as f64 / 50.0 + 0.0001;
            let s = q.theta_inverse(x).unwrap();
            let back = q.theta_direct(s).unwrap();
            assert!((back - x).abs() < 1e-10, "x = {x}, s = {s}, back = {back}");
        }
        let x = 0.999_99;
        assert!((q.theta_direct(q.theta_inverse(x).unwrap()).unwrap() - x).abs() < 1e-10);
    }

    #[test]
    fn theta_monotone_concave() {
        let p = profile(3, 2.0);
        for s in log_grid(0.01, 100.0, 40) {
            let (d1, d2) = p.derivatives(s).unwrap();
            assert!(d1 > 0.0 && d2 < 0.0);
        }
        let rows: Vec<_> = p.table().collect();
        assert!(rows.windows(2).all(|w| w[1].2 > w[0].2));
        assert!(rows.last().unwrap().2 > 0.9999);
    }

    #[test]
    fn theta_ode() {
        let grid = log_grid(0.1, 50.0, 40);
        for (n, alpha) in [(2, 2.0), (3, 1.5), (4, 3.0)] {
            let rep = certify_theta_ode(&profile(n, alpha), &grid);
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn merk_and_claim() {
        let grid: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).collect();
        for n in 2..7 {
            let rep = certify_merk(n, &grid);
            assert!(rep.passed, "{rep:?}");
            assert!(certify_claim(n, &log_grid(0.1, 50.0, 30)).passed);
        }
        assert!(certify_merk(2, &[0.3, 0.6]).max_residual < 1e-10);
    }

    #[test]
    fn identity_suite() {
        let grid: Vec<f64> = (0..=18).map(|i| 0.05 * i as f64).collect();
        assert!(certify_euler(&[2, 3, 4, 5, 6], &grid).passed);
        assert!(certify_gamma_identity(0..=20, 3..=10).passed);
        let grid: Vec<f64> = (0..=15).map(|i| 0.05 + 0.05 * i as f64).collect();
        assert!(certify_hyp_derivative(&[2, 3, 4, 5, 6], &grid).passed);
    }

    #[test]
    fn table_matches_direct_integral() {
        let p = profile(4, 2.0);
        let radii: Vec<f64> = (1..99).map(|i| 0.01 * i as f64).collect();
        let rep = theta_consistency(&p, &radii);
        assert!(rep.passed, "{rep:?}");
    }
}
