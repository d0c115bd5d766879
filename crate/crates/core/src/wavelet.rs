//! Radial wavelet windows `r^β K_{n/2}(r)`, their characterizing ODE, the
//! upper-half-space hyperbolic Laplacian, and the search for points where
//! `log u` fails to be `M`-subharmonic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::specfun::{bessel_i, bessel_k_halves, gamma};

/// Radial window with Fourier profile `r^β Z_{n/2}(r)` and weight `t^{−β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSpec {
    pub n: usize,
    pub beta: f64,
    /// `α = n/2 − β`.
    pub alpha_exp: f64,
}

impl WindowSpec {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n == 0 || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("window n = {n}, beta = {beta}")));
        }
        Ok(Self {
            n,
            beta,
            alpha_exp: n as f64 / 2.0 - beta,
        })
    }

    /// `β > n/2`, the condition for a finite admissibility constant.
    pub fn is_admissible(&self) -> bool {
        self.beta > self.n as f64 / 2.0
    }
}

/// The two independent solutions of the window ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WindowKind {
    /// `r^β K_{n/2}(r)`, the integrable one.
    K,
    /// `r^β I_{n/2}(r)`, growing like `e^r`.
    I,
}

/// A point `(y₁, t)` of the upper half-space; the other horizontal
/// coordinates are inert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfSpacePoint {
    pub y1: f64,
    pub t: f64,
}

impl HalfSpacePoint {
    pub fn new(y1: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(domain("HalfSpacePoint", format!("t = {t} must be positive")));
        }
        Ok(Self { y1, t })
    }
}

/// `(Z, Z′, Z″)` for `Z = K_{n/2}` or `I_{n/2}` from the order recurrences.
fn bessel_jet(kind: WindowKind, n: usize, r: f64) -> Result<(f64, f64, f64)> {
    let m = n as i64;
    match kind {
        WindowKind::K => {
            let k = |d: i64| bessel_k_halves(m + d, r);
            let (km4, km2, k0, kp2, kp4) = (k(-4)?, k(-2)?, k(0)?, k(2)?, k(4)?);
            Ok((k0, -0.5 * (km2 + kp2), 0.25 * (km4 + 2.0 * k0 + kp4)))
        }
        WindowKind::I => {
            let nu = n as f64 / 2.0;
            let i = |d: f64| bessel_i(nu + d, r);
            let (im2, im1, i0, ip1, ip2) = (i(-2.0)?, i(-1.0)?, i(0.0)?, i(1.0)?, i(2.0)?);
            Ok((i0, 0.5 * (im1 + ip1), 0.25 * (im2 + 2.0 * i0 + ip2)))
        }
    }
}

/// `(φ, φ′, φ″)` for `φ(r) = r^β Z_{n/2}(r)`.
pub fn window_jet(spec: &WindowSpec, kind: WindowKind, r: f64) -> Result<(f64, f64, f64)> {
    if !(r > 0.0) {
        return Err(domain("window", format!("r = {r} must be positive")));
    }
    let (z, z1, z2) = bessel_jet(kind, spec.n, r)?;
    let b = spec.beta;
    let p = r.powf(b);
    Ok((
        p * z,
        p * (b / r * z + z1),
        p * (b * (b - 1.0) / (r * r) * z + 2.0 * b / r * z1 + z2),
    ))
}

/// Residual of the window ODE together with the size of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeResidual {
    pub residual: f64,
    pub scale: f64,
}

impl OdeResidual {
    pub fn relative(&self) -> f64 {
        self.residual.abs() / self.scale
    }
}

/// `(nα − α² + r²)φ + (n−1−2α)rφ′ − r²φ″` for the chosen window.
pub fn ode_residual(spec: &WindowSpec, kind: WindowKind, r: f64) -> Result<OdeResidual> {
    let (phi, d1, d2) = window_jet(spec, kind, r)?;
    Ok(ode_residual_of(spec, r, phi, d1, d2))
}

/// The ODE residual for arbitrary values `(φ, φ′, φ″)` at `r`.
pub fn ode_residual_of(spec: &WindowSpec, r: f64, phi: f64, d1: f64, d2: f64) -> OdeResidual {
    let n = spec.n as f64;
    let a = spec.alpha_exp;
    let terms = [
        (n * a - a * a + r * r) * phi,
        (n - 1.0 - 2.0 * a) * r * d1,
        -r * r * d2,
    ];
    OdeResidual {
        residual: terms.iter().sum(),
        scale: terms.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE),
    }
}

/// `P_n(t) = t^{n/2} K_{n/2}(t)`.
pub fn p_n(n: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("p_n", format!("t = {t} must be positive")));
    }
    Ok(t.powf(n as f64 / 2.0) * bessel_k_halves(n as i64, t)?)
}

/// `P_n(0) = 2^{n/2−1} Γ(n/2)`.
pub fn p_n_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let nu = n as f64 / 2.0;
    Ok(2f64.powf(nu - 1.0) * gamma(nu))
}

/// `P_n″(0) = −2^{n/2−2} Γ(n/2−1)` for `n > 2`, from the first two even
/// terms of the ascending series; infinite for `n ≤ 2`.
pub fn p_n_second_zero(n: usize) -> Result<f64> {
    if n <= 2 {
        return Err(domain("p_n_second_zero", format!("P_{n}'' is unbounded at 0")));
    }
    let nu = n as f64 / 2.0;
    Ok(-(2f64.powf(nu - 2.0)) * gamma(nu - 1.0))
}

/// `(P_n, P_n′, P_n″)` at `t > 0`, using `P′ = −t^ν K_{ν−1}`.
pub fn p_n_jet(n: usize, t: f64) -> Result<(f64, f64, f64)> {
    if !(t > 0.0) {
        return Err(domain("p_n", format!("t = {t} must be positive")));
    }
    let m = n as i64;
    let nu = n as f64 / 2.0;
    let tp = t.powf(nu);
    let (km4, km2, k0) = (bessel_k_halves(m - 4, t)?, bessel_k_halves(m - 2, t)?, bessel_k_halves(m, t)?);
    Ok((tp * k0, -tp * km2, -nu * tp / t * km2 + 0.5 * tp * (km4 + k0)))
}

/// `u(y₁, t) = P(t)² + P(2t)² − 2P(t)P(2t)cos y₁`, evaluated as
/// `(P(t) − P(2t))² + 4P(t)P(2t)sin²(y₁/2)`.
pub fn wavelet_u(n: usize, y1: f64, t: f64) -> Result<f64> {
    Ok(u_with_noise(n, y1, t)?.0)
}

/// `u` and a bound on the absolute rounding error of `log u`, assuming `P`
/// is accurate to a few units in the last place.
fn u_with_noise(n: usize, y1: f64, t: f64) -> Result<(f64, f64)> {
    let a = p_n(n, t)?;
    let b = p_n(n, 2.0 * t)?;
    let s = (0.5 * y1).sin();
    let d = a - b;
    let u = d * d + 4.0 * a * b * s * s;
    let delta = 8.0 * f64::EPSILON;
    let noise = delta * (4.0 + 2.0 * a.max(b) * (2.0 * d.abs() + 4.0 * a.min(b) * s * s) / u);
    Ok((u, noise))
}

/// `u` and its first and second partial derivatives from the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UJet {
    pub u: f64,
    pub u_y: f64,
    pub u_yy: f64,
    pub u_t: f64,
    pub u_tt: f64,
}

pub fn wavelet_u_jet(n: usize, y1: f64, t: f64) -> Result<UJet> {
    let (a, a1, a2) = p_n_jet(n, t)?;
    let (b, b1, b2) = p_n_jet(n, 2.0 * t)?;
    let (s, c) = y1.sin_cos();
    Ok(UJet {
        u: a * a + b * b - 2.0 * a * b * c,
        u_y: 2.0 * a * b * s,
        u_yy: 2.0 * a * b * c,
        u_t: 2.0 * a * a1 + 4.0 * b * b1 - 2.0 * (a1 * b + 2.0 * a * b1) * c,
        u_tt: 2.0 * a1 * a1 + 2.0 * a * a2 + 8.0 * b1 * b1 + 8.0 * b * b2
            - 2.0 * (a2 * b + 4.0 * a1 * b1 + 4.0 * a * b2) * c,
    })
}

impl UJet {
    /// `Δ_h u = t²(u_yy + u_tt) − (n−1)t u_t`.
    pub fn laplacian_h(&self, n: usize, t: f64) -> f64 {
        t * t * (self.u_yy + self.u_tt) - (n as f64 - 1.0) * t * self.u_t
    }

    /// `u Δ_h u / t² − (|∇_y u|² + |∂_t u|²)`, which has the sign of
    /// `Δ_h log u`.
    pub fn equivalence(&self, n: usize, t: f64) -> f64 {
        self.u * self.laplacian_h(n, t) / (t * t) - (self.u_y * self.u_y + self.u_t * self.u_t)
    }

    /// `Δ_h log u = t² · equivalence / u²`.
    pub fn laplacian_h_log(&self, n: usize, t: f64) -> f64 {
        t * t * self.equivalence(n, t) / (self.u * self.u)
    }
}

/// The small-`t` limit `2P(0)²(1−cos y₁)(10(n−2)P(0)P″(0)(1−cos y₁) + 2P(0)²)`,
/// with `(n−2)P″(0)` read as `−1` when `n = 2`.
pub fn limit_expression(n: usize, y1: f64) -> Result<f64> {
    let p0 = p_n_zero(n)?;
    let curv = limit_curvature(n)?;
    let g = 1.0 - y1.cos();
    Ok(2.0 * p0 * p0 * g * (10.0 * p0 * curv * g + 2.0 * p0 * p0))
}

/// `(n−2) P_n″(0)`, regularized to `−1` at `n = 2`.
fn limit_curvature(n: usize) -> Result<f64> {
    match n {
        0 | 1 => Err(Error::InvalidParameter(format!("the limit expression needs n >= 2, got {n}"))),
        2 => Ok(-1.0),
        _ => Ok((n as f64 - 2.0) * p_n_second_zero(n)?),
    }
}

/// Largest `y₁ ∈ (0, π]` up to which the limit expression stays positive.
pub fn limit_positive_range(n: usize) -> Result<f64> {
    let p0 = p_n_zero(n)?;
    // 10 p0 curv g + 2 p0² > 0  ⇔  g < p0 / (5 |curv|)
    let g_max = p0 / (5.0 * limit_curvature(n)?.abs());
    Ok(if g_max >= 2.0 { std::f64::consts::PI } else { (1.0 - g_max).acos() })
}

/// Finite-difference Laplacian and its pieces, with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdLaplacian {
    pub value: f64,
    pub error: f64,
    pub d_yy: f64,
    pub d_t: f64,
    pub d_tt: f64,
}

/// `Δ_h F = t²∂²_{y₁}F + t²∂²_t F − (n−1)t∂_t F` by central differences with
/// steps `h` and `h/2`, Richardson-extrapolated. The error estimate adds the
/// extrapolation change to a rounding bound built from `noise`, the absolute
/// error of each evaluation of `F` (at least one ulp of the largest value).
pub fn laplacian_h_halfspace(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    n: usize,
    p: HalfSpacePoint,
    h_y: f64,
    h_t: f64,
    noise: f64,
) -> Result<FdLaplacian> {
    let HalfSpacePoint { y1, t } = p;
    if t - h_t <= 0.0 {
        return Err(Error::Stencil { t, step: h_t });
    }
    let f0 = f(y1, t);
    let mut size = f0.abs();
    let mut level = |hy: f64, ht: f64| {
        let (yp, ym) = (f(y1 + hy, t), f(y1 - hy, t));
        let (tp, tm) = (f(y1, t + ht), f(y1, t - ht));
        size = size.max(yp.abs()).max(ym.abs()).max(tp.abs()).max(tm.abs());
        (
            (yp - 2.0 * f0 + ym) / (hy * hy),
            (tp - tm) / (2.0 * ht),
            (tp - 2.0 * f0 + tm) / (ht * ht),
        )
    };
    let coarse = level(h_y, h_t);
    let fine = level(0.5 * h_y, 0.5 * h_t);
    let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    let (d_yy, d_t, d_tt) = (rich(coarse.0, fine.0), rich(coarse.1, fine.1), rich(coarse.2, fine.2));
    let m = n as f64 - 1.0;
    let combine = |yy: f64, dt: f64, tt: f64| t * t * (yy + tt) - m * t * dt;
    let value = combine(d_yy, d_t, d_tt);
    let trunc = (value - combine(fine.0, fine.1, fine.2)).abs();
    let eps = noise.max(f64::EPSILON * size);
    let rounding = 16.0 * eps * (t * t * (4.0 / (h_y * h_y) + 4.0 / (h_t * h_t)) + m * t / h_t);
    Ok(FdLaplacian {
        value,
        error: trunc + rounding,
        d_yy,
        d_t,
        d_tt,
    })
}

/// Relative step for the `t` direction and absolute step for `y₁`.
pub const WITNESS_STEP: f64 = 1e-3;

/// The witness criterion: `Δ_h log u` must be below `−WITNESS_MARGIN × error`.
pub const WITNESS_MARGIN: f64 = 10.0;

/// A certified point where `Δ_h log u < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessReport {
    pub n: usize,
    pub y1: f64,
    pub t: f64,
    pub u: f64,
    /// `Δ_h log u` by finite differences.
    pub laplacian: f64,
    pub fd_error: f64,
    /// `Δ_h log u` from the closed-form derivatives.
    pub laplacian_closed: f64,
    /// `u Δ_h u / t² − |∇u|²` from the closed form.
    pub equivalence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessGrid {
    pub y_points: usize,
    pub t_points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for WitnessGrid {
    fn default() -> Self {
        Self {
            y_points: 200,
            t_points: 200,
            t_min: 1e-3,
            t_max: 0.5,
        }
    }
}

/// `Δ_h log u` by finite differences at a point.
pub fn log_u_laplacian(n: usize, y1: f64, t: f64) -> Result<FdLaplacian> {
    let f = move |y: f64, s: f64| wavelet_u(n, y, s).map_or(f64::NAN, f64::ln);
    let (h_y, h_t) = (WITNESS_STEP, WITNESS_STEP * t);
    let mut noise: f64 = 0.0;
    for (y, s) in [(y1, t), (y1 - h_y, t), (y1 + h_y, t), (y1, t - h_t), (y1, t + h_t)] {
        noise = noise.max(u_with_noise(n, y, s)?.1);
    }
    laplacian_h_halfspace(&f, n, HalfSpacePoint::new(y1, t)?, h_y, h_t, noise)
}

/// Score `value + margin·error`; negative scores are witnesses.
fn score(l: &FdLaplacian) -> f64 {
    let s = l.value + WITNESS_MARGIN * l.error;
    if s.is_nan() {
        f64::INFINITY
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    y1: f64,
    t: f64,
    lap: FdLaplacian,
}

fn best_on(n: usize, ys: &[f64], ts: &[f64]) -> Result<Option<Candidate>> {
    let rows: Vec<Option<Candidate>> = ts
        .par_iter()
        .map(|&t| -> Result<Option<Candidate>> {
            let mut best: Option<Candidate> = None;
            for &y1 in ys {
                let lap = log_u_laplacian(n, y1, t)?;
                let s = score(&lap);
                if best.map_or(true, |b| s < b.score) {
                    best = Some(Candidate { score: s, y1, t, lap });
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    // rows are in index order; strict comparison keeps the smallest index
    let mut best: Option<Candidate> = None;
    for c in rows.into_iter().flatten() {
        if best.map_or(true, |b| c.score < b.score) {
            best = Some(c);
        }
    }
    Ok(best)
}

/// Grid search for a point where `Δ_h log u < 0` with a margin of ten
/// finite-difference error estimates: a log-spaced grid in `t`, linear in
/// `y₁ ∈ (0, π)`, refined once around the best cell.
pub fn find_negativity_witness(n: usize, grid: &WitnessGrid) -> Result<WitnessReport> {
    if n == 0 || grid.y_points < 2 || grid.t_points < 2 || !(grid.t_min > 0.0 && grid.t_max > grid.t_min) {
        return Err(Error::InvalidParameter("witness grid".into()));
    }
    let dy = std::f64::consts::PI / grid.y_points as f64;
    let ys: Vec<f64> = (0..grid.y_points).map(|j| (j as f64 + 0.5) * dy).collect();
    let ratio = (grid.t_max / grid.t_min).ln() / (grid.t_points - 1) as f64;
    let ts: Vec<f64> = (0..grid.t_points).map(|i| grid.t_min * (ratio * i as f64).exp()).collect();
    let coarse = best_on(n, &ys, &ts)?;
    let Some(c) = coarse else {
        return Err(Error::NoWitnessFound { n, best: f64::NAN, margin: WITNESS_MARGIN });
    };
    let fine_ys: Vec<f64> = (0..21).map(|k| c.y1 + (k as f64 - 10.0) / 10.0 * dy).filter(|y| *y > 0.0).collect();
    let fine_ts: Vec<f64> = (0..21).map(|k| c.t * (ratio * (k as f64 - 10.0) / 10.0).exp()).collect();
    let best = match best_on(n, &fine_ys, &fine_ts)? {
        Some(f) if f.score < c.score => f,
        _ => c,
    };
    if !(best.score < 0.0) {
        return Err(Error::NoWitnessFound {
            n,
            best: best.lap.value,
            margin: WITNESS_MARGIN,
        });
    }
    let jet = wavelet_u_jet(n, best.y1, best.t)?;
    Ok(WitnessReport {
        n,
        y1: best.y1,
        t: best.t,
        u: jet.u,
        laplacian: best.lap.value,
        fd_error: best.lap.error,
        laplacian_closed: jet.laplacian_h_log(n, best.t),
        equivalence: jet.equivalence(n, best.t),
    })
}

/// Finite-difference pieces of `u` near `t = 0` next to their stated limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCheck {
    pub n: usize,
    pub y1: f64,
    pub t: f64,
    pub d_yy: f64,
    pub d_yy_limit: f64,
    pub d_t: f64,
    /// `∂²_t u` for `n > 2`, `∂²_t u − ∂_t u / t` for `n = 2`.
    pub curvature: f64,
    pub curvature_limit: f64,
}

impl LimitCheck {
    pub fn max_relative_error(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        rel(self.d_yy, self.d_yy_limit).max(rel(self.curvature, self.curvature_limit))
    }
}

pub fn boundary_limits(n: usize, y1: f64, t: f64) -> Result<LimitCheck> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("limits need n >= 2, got {n}")));
    }
    let f = move |y: f64, s: f64| wavelet_u(n, y, s).unwrap_or(f64::NAN);
    let fd = laplacian_h_halfspace(&f, n, HalfSpacePoint::new(y1, t)?, WITNESS_STEP, 0.1 * t, 0.0)?;
    let p0 = p_n_zero(n)?;
    let g = 1.0 - y1.cos();
    let (curvature, curvature_limit) = if n == 2 {
        (fd.d_tt - fd.d_t / t, 10.0 * p0 * g)
    } else {
        (fd.d_tt, 10.0 * p0 * p_n_second_zero(n)? * g)
    };
    Ok(LimitCheck {
        n,
        y1,
        t,
        d_yy: fd.d_yy,
        d_yy_limit: 2.0 * p0 * p0 * y1.cos(),
        d_t: fd.d_t,
        curvature,
        curvature_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn p_n_at_zero() {
        assert!(rel(p_n_zero(3).unwrap(), (PI / 2.0).sqrt()) < 1e-14);
        assert!(rel(p_n_zero(2).unwrap(), 1.0) < 1e-14);
        for n in 1..7 {
            let near = p_n(n, 1e-7).unwrap();
            assert!(rel(near, p_n_zero(n).unwrap()) < 1e-5, "n = {n}");
        }
        for n in 2..7 {
            let h = 1e-3;
            let slope = (p_n(n, 2.0 * h).unwrap() - p_n(n, h).unwrap()) / h;
            assert!(slope.abs() < 1e-2, "n = {n}: {slope}");
        }
        assert!(p_n(3, 0.0).is_err());
    }

    #[test]
    fn p_n_jet_matches_closed_form_n3() {
        let c = (PI / 2.0).sqrt();
        for t in [0.01, 0.3, 2.0] {
            let (p, d1, d2) = p_n_jet(3, t).unwrap();
            let e = (-t).exp();
            assert!(rel(p, c * (1.0 + t) * e) < 1e-13);
            assert!(rel(d1, -c * t * e) < 1e-13);
            assert!(rel(d2, c * (t - 1.0) * e) < 1e-12);
        }
        for n in [4, 5, 6] {
            let t = 1e-4;
            assert!(rel(p_n_jet(n, t).unwrap().2, p_n_second_zero(n).unwrap()) < 1e-2, "n = {n}");
        }
    }

    #[test]
    fn window_ode_examples() {
        let k = WindowSpec::new(3, 2.0).unwrap();
        assert!(k.is_admissible());
        for r in [0.5, 1.0, 4.0] {
            assert!(ode_residual(&k, WindowKind::K, r).unwrap().relative() < 1e-8);
        }
        let i = WindowSpec::new(2, 1.5).unwrap();
        assert!(ode_residual(&i, WindowKind::I, 1.0).unwrap().relative() < 1e-8);
        assert!(!WindowSpec::new(4, 1.0).unwrap().is_admissible());
    }

    #[test]
    fn power_window_satisfies_first_order_relation() {
        let spec = WindowSpec::new(3, 2.5).unwrap();
        let c = spec.alpha_exp;
        for r in [0.3f64, 1.0, 5.0] {
            let phi = r.powf(c);
            let d1 = c * r.powf(c - 1.0);
            assert!((d1 * r - c * phi).abs() < 1e-14 * phi.abs());
        }
    }

    #[test]
    fn halfspace_laplacian_annihilates_constants_and_t_power() {
        let p = HalfSpacePoint::new(0.3, 0.7).unwrap();
        let c = laplacian_h_halfspace(&|_, _| 2.5, 3, p, 1e-3, 1e-3, 0.0).unwrap();
        assert_eq!(c.value, 0.0);
        for n in 2..6 {
            let f = move |_: f64, t: f64| t.powi(n as i32);
            let l = laplacian_h_halfspace(&f, n, p, 1e-3, 1e-3, 0.0).unwrap();
            assert!(l.value.abs() < 1e-6, "n = {n}: {}", l.value);
        }
        assert!(matches!(
            laplacian_h_halfspace(&|_, _| 1.0, 3, HalfSpacePoint::new(0.0, 1e-3).unwrap(), 1e-3, 2e-3, 0.0),
            Err(Error::Stencil { .. })
        ));
    }

    #[test]
    fn u_closed_form_and_derivatives() {
        assert!(wavelet_u(3, 0.0, 1e-6).unwrap().abs() < 1e-10);
        assert!(rel(wavelet_u(3, PI, 1e-6).unwrap(), 4.0 * PI / 2.0) < 1e-5);
        let a = p_n(3, 0.01).unwrap();
        let b = p_n(3, 0.02).unwrap();
        assert!(rel(wavelet_u(3, 0.1, 0.01).unwrap(), a * a + b * b - 2.0 * a * b * 0.1f64.cos()) < 1e-14);
        for n in 2..6 {
            let (y1, t) = (0.8, 0.2);
            let jet = wavelet_u_jet(n, y1, t).unwrap();
            let f = move |y: f64, s: f64| wavelet_u(n, y, s).unwrap();
            let fd = laplacian_h_halfspace(&f, n, HalfSpacePoint::new(y1, t).unwrap(), 1e-3, 1e-3 * t, 0.0).unwrap();
            assert!(rel(fd.d_yy, jet.u_yy) < 1e-5);
            assert!(rel(fd.d_t, jet.u_t) < 1e-5);
            assert!(rel(fd.d_tt, jet.u_tt) < 1e-5);
            assert!(rel(fd.value, jet.laplacian_h(n, t)) < 1e-5);
        }
    }

    #[test]
    fn limit_expression_sign() {
        for n in 2..6 {
            assert_eq!(limit_expression(n, 0.0).unwrap(), 0.0);
            assert!(limit_expression(n, 0.1).unwrap() > 0.0);
            let ymax = limit_positive_range(n).unwrap();
            assert!(ymax > 0.0);
            assert!(limit_expression(n, 0.99 * ymax).unwrap() > 0.0);
            if ymax < PI {
                assert!(limit_expression(n, 1.01 * ymax).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn limits_near_zero() {
        for n in 2..6 {
            let l = boundary_limits(n, 1.0, 1e-3).unwrap();
            assert!(l.max_relative_error() < 5e-2, "{l:?}");
            assert!(l.d_t.abs() < 5e-2);
        }
    }

    #[test]
    fn witnesses_and_control() {
        let grid = WitnessGrid {
            y_points: 60,
            t_points: 60,
            ..Default::default()
        };
        for n in [2, 3] {
            let w = find_negativity_witness(n, &grid).unwrap();
            assert!(w.laplacian < -WITNESS_MARGIN * w.fd_error);
            assert!(w.equivalence < 0.0 && w.laplacian_closed < 0.0);
        }
        assert!(matches!(find_negativity_witness(1, &grid), Err(Error::NoWitnessFound { .. })));
    }
}
