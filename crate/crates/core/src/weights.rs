//! The radial weights `Φₙ`, the normalization `c(α)`, the weighted measure
//! `dν = c Φₙ^α dτ / (2ⁿ ωₙ)` and Bergman-type norms.
//!
//! `Φₙ(r) = exp{κ r² F[1,1,2−n/2; 2,1+n/2; r²]}·(1−r²)^{n−1}` with
//! `κ = (n−1)(2−n)/n`. In the hyperbolic radius it satisfies
//! `d log Φₙ/dρ = −(n−1)² h_{n−1}(ρ)`, `h_m = sinh^{-m}ρ ∫₀^ρ sinh^m`, which
//! is how it is continued close to the boundary when the series is slow.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::{Symmetry, TestFunction};
use crate::config::NumericsConfig;
use crate::error::{domain, Error, Result};
use crate::geometry::{
    euclidean_radius, hyperbolic_radius, one_minus_sq, laplacian_h_radial, sinh_power_ratio,
    sphere_area, unit_ball_volume, RadialFunction, SERIES_MAX_ARG,
};
use crate::mc::{random_direction, substream, Estimate};
use crate::quadrature::GaussLegendre;
use crate::report::ResidualReport;
use crate::specfun::{hyp2f1, hyp3f2, HypParams32, SeriesTolerance};

fn kappa(n: usize) -> f64 {
    let nf = n as f64;
    (nf - 1.0) * (2.0 - nf) / nf
}

/// `ln cosh y`, stable for large `y`.
pub(crate) fn ln_cosh(y: f64) -> f64 {
    let y = y.abs();
    y + (-2.0 * y).exp().ln_1p() - LN_2
}

/// `ln sinh ρ` for `ρ > 0`.
pub(crate) fn ln_sinh(rho: f64) -> f64 {
    if rho < 1.0 {
        rho.sinh().ln()
    } else {
        rho + (-(-2.0 * rho).exp()).ln_1p() - LN_2
    }
}

/// `log Φₙ` from the series, given `x = r²` and `ln(1−x)`.
fn log_phi_series(n: usize, x: f64, ln_defect: f64) -> f64 {
    let nf = n as f64;
    if n == 2 {
        return ln_defect;
    }
    let f3 = hyp3f2(HypParams32::weight_exponent(n), x, SeriesTolerance::default()).unwrap_or(f64::NAN);
    kappa(n) * x * f3 + (nf - 1.0) * ln_defect
}

const CONT_SPAN: usize = 40;

/// Boundary continuation for odd `n`: anchor at `r² = SERIES_MAX_ARG` and
/// cumulative integrals of `h_{n−1} − 1/(n−1)` over unit panels.
struct Continuation {
    rho0: f64,
    log0: f64,
    cum: Vec<f64>,
}

fn continuation(n: usize) -> &'static Continuation {
    static TABLES: [OnceLock<Continuation>; 32] = [const { OnceLock::new() }; 32];
    let build = || {
        let x0 = SERIES_MAX_ARG;
        let rho0 = hyperbolic_radius(x0.sqrt());
        let log0 = log_phi_series(n, x0, (1.0 - x0).ln());
        let gl = GaussLegendre::standard();
        let mut cum = vec![0.0; CONT_SPAN + 1];
        for k in 0..CONT_SPAN {
            let lo = rho0 + k as f64;
            cum[k + 1] = cum[k] + gl.integrate(lo, lo + 1.0, |s| continuation_integrand(n, s));
        }
        Continuation { rho0, log0, cum }
    };
    match TABLES.get(n) {
        Some(cell) => cell.get_or_init(build),
        None => Box::leak(Box::new(build())),
    }
}

fn continuation_integrand(n: usize, rho: f64) -> f64 {
    sinh_power_ratio(n - 1, rho) - 1.0 / (n as f64 - 1.0)
}

fn log_phi_continued(n: usize, rho: f64) -> f64 {
    let c = continuation(n);
    let m = n as f64 - 1.0;
    let top = rho.min(c.rho0 + CONT_SPAN as f64);
    let k = ((top - c.rho0).floor() as usize).min(CONT_SPAN - 1);
    let lo = c.rho0 + k as f64;
    let g = c.cum[k] + GaussLegendre::standard().integrate(lo, top, |s| continuation_integrand(n, s));
    c.log0 - m * (rho - c.rho0) - m * m * g
}

/// `log Φₙ` as a function of the hyperbolic radius; `−∞` at `ρ = ∞`.
pub fn log_phi_rho(n: usize, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    if rho.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let r = euclidean_radius(rho);
    let x = r * r;
    let ln_defect = -2.0 * ln_cosh(0.5 * rho);
    if n == 2 || n % 2 == 0 || x <= SERIES_MAX_ARG {
        log_phi_series(n, x, ln_defect)
    } else {
        log_phi_continued(n, rho)
    }
}

/// `log Φₙ(r)` for `r ∈ [0, 1]`; NaN outside.
pub fn log_phi(n: usize, r: f64) -> f64 {
    if !(0.0..=1.0).contains(&r) {
        return f64::NAN;
    }
    if r == 1.0 {
        return f64::NEG_INFINITY;
    }
    let x = r * r;
    if x <= SERIES_MAX_ARG {
        log_phi_series(n, x, one_minus_sq(r).ln())
    } else {
        log_phi_rho(n, hyperbolic_radius(r))
    }
}

/// `Φₙ(r)` with the series summed under `tol`; radii past the series range
/// use the same continuation as [`phi`].
pub fn phi_with(n: usize, r: f64, tol: SeriesTolerance) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(domain("phi", format!("r = {r} outside [0, 1]")));
    }
    let x = r * r;
    if n <= 2 || x > SERIES_MAX_ARG {
        return Ok(phi(n, r));
    }
    let f3 = hyp3f2(HypParams32::weight_exponent(n), x, tol)?;
    Ok((kappa(n) * x * f3 + (n as f64 - 1.0) * one_minus_sq(r).ln()).exp())
}

/// `Φₙ(r)`, with `Φₙ(1) = 0`; NaN outside `[0, 1]`.
pub fn phi(n: usize, r: f64) -> f64 {
    if n == 2 && r.abs() <= 1.0 {
        return one_minus_sq(r);
    }
    log_phi(n, r).exp()
}

/// Explicit formulas for `n ∈ {2, 3, 4}`.
pub fn phi_closed_form(n: usize, r: f64) -> Option<f64> {
    match n {
        2 => Some(1.0 - r * r),
        3 if r == 0.0 => Some(1.0),
        3 => {
            // e² ((1−r)/(1+r))^{(1+r²)/r} = exp(2 − 2ρ coth ρ)
            let rho = hyperbolic_radius(r);
            Some((2.0 - (1.0 + r * r) / r * rho).exp())
        }
        4 => Some((-1.5 * r * r).exp() * one_minus_sq(r).powi(3)),
        _ => None,
    }
}

/// `(log Φₙ, d/dr, d²/dr²)` at `r ∈ (0, 1)`.
pub fn log_phi_derivatives(n: usize, r: f64) -> Result<(f64, f64, f64)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(domain("log_phi_derivatives", format!("r = {r} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
    }
    let nf = n as f64;
    let x = r * r;
    let d = one_minus_sq(r);
    let value = log_phi(n, r);
    if x <= SERIES_MAX_ARG {
        let tol = SeriesTolerance::default();
        let k = kappa(n);
        let (g, dg) = if n == 2 {
            (0.0, 0.0)
        } else {
            let b = 2.0 - nf / 2.0;
            let c = 1.0 + nf / 2.0;
            (hyp2f1(1.0, b, c, x, tol)?, b / c * hyp2f1(2.0, b + 1.0, c + 1.0, x, tol)?)
        };
        let d1 = -2.0 * (nf - 1.0) * r / d + 2.0 * k * r * g;
        let d2 = -2.0 * (nf - 1.0) * (1.0 + x) / (d * d) + k * (2.0 * g + 4.0 * x * dg);
        Ok((value, d1, d2))
    } else {
        let m = n - 1;
        let rho = hyperbolic_radius(r);
        let h = sinh_power_ratio(m, rho);
        let dh = 1.0 - m as f64 / rho.tanh() * h;
        let c = (nf - 1.0).powi(2);
        let drho = 2.0 / d;
        let d1 = -c * h * drho;
        let d2 = -c * (dh * drho * drho + h * 4.0 * r / (d * d));
        Ok((value, d1, d2))
    }
}

/// `log Φₙ` as a [`RadialFunction`] carrying its analytic derivatives.
pub fn log_phi_radial(n: usize) -> RadialFunction {
    RadialFunction::with_derivatives(
        move |r| log_phi(n, r),
        move |r| if r == 0.0 { 0.0 } else { log_phi_derivatives(n, r).map_or(f64::NAN, |v| v.1) },
        move |r| {
            if r == 0.0 {
                // (log Φ)″(0) = −2(n−1) + 2κ
                -2.0 * (n as f64 - 1.0) + 2.0 * kappa(n)
            } else {
                log_phi_derivatives(n, r).map_or(f64::NAN, |v| v.2)
            }
        },
    )
}

/// `Eₙ = exp{κ F[1,1,2−n/2; 2,1+n/2; 1]}`, the lower sandwich constant.
pub fn sandwich_constant(n: usize) -> Result<f64> {
    Ok((kappa(n) * hyp3f2(HypParams32::weight_exponent(n), 1.0, SeriesTolerance::default())?).exp())
}

/// Maximum of `|Δ_h log Φₙ + 4(n−1)²|` over `grid`.
pub fn certify_weight_ode(n: usize, grid: &[f64]) -> ResidualReport {
    let target = 4.0 * (n as f64 - 1.0).powi(2);
    let u = log_phi_radial(n);
    let tol = if n == 2 { 1e-10 } else { 1e-6 };
    ResidualReport::from_residuals(
        format!("weight-ode n={n}"),
        tol,
        grid.iter().map(|&r| {
            let res = laplacian_h_radial(n, &u, r).map_or(f64::NAN, |l| l + target);
            (r, res)
        }),
    )
}

/// `n r^{n−1} Φₙ^α (1−r²)^{−n}` evaluated from `r` and `1 − r`.
fn radial_integrand(n: usize, alpha: f64, r: f64, one_minus_r: f64) -> f64 {
    if r == 0.0 {
        return if n == 1 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    let rho = if r < 0.5 {
        hyperbolic_radius(r)
    } else {
        (1.0 + r).ln() - one_minus_r.ln()
    };
    let ln_defect = one_minus_r.ln() + (1.0 + r).ln();
    nf * r.powi(n as i32 - 1) * (alpha * log_phi_rho(n, rho) - nf * ln_defect).exp()
}

/// `n ∫_a^b r^{n−1} Φₙ^α (1−r²)^{−n} dr` with `b = 1 − b_defect`.
pub(crate) fn radial_integral(
    n: usize,
    alpha: f64,
    a: f64,
    b_defect: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    cfg.quadrature()
        .integrate(a, 1.0 - b_defect, |node| {
            radial_integrand(n, alpha, node.x, b_defect + node.to_upper)
        })
}

/// The constant `c(α)` making `‖1‖ = 1`:
/// `1/c(α) = n ∫₀¹ r^{n−1} Φₙ^α(r) (1−r²)^{−n} dr`.
pub fn normalization(n: usize, alpha: f64, cfg: &NumericsConfig) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed 1")));
    }
    Ok(1.0 / radial_integral(n, alpha, 0.0, 0.0, cfg)?)
}

/// Dimension, exponent, `γ = α(n−1)²` and the normalization `c(α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightParams {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub c_alpha: f64,
}

impl WeightParams {
    pub fn new(n: usize, alpha: f64, cfg: &NumericsConfig) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
        }
        let c_alpha = normalization(n, alpha, cfg)?;
        Ok(Self {
            n,
            alpha,
            gamma: alpha * (n as f64 - 1.0).powi(2),
            c_alpha,
        })
    }

    /// `ln(c / (2ⁿ ωₙ))`, the log-density of `ν` relative to `Φₙ^α dτ`.
    pub fn ln_nu_scale(&self) -> f64 {
        self.c_alpha.ln() - self.n as f64 * LN_2 - unit_ball_volume(self.n).ln()
    }

    /// Density of the radial marginal of `ν` in the hyperbolic radius,
    /// `c n 2^{−n} sinh^{n−1}ρ Φₙ^α(ρ)`.
    pub fn radial_density(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let nf = self.n as f64;
        (self.c_alpha.ln() + nf.ln() - nf * LN_2
            + (nf - 1.0) * ln_sinh(rho)
            + self.alpha * log_phi_rho(self.n, rho))
        .exp()
    }

    /// Upper bound for `ν(ρ > rho)` from `Φₙ ≤ (1−r²)^{n−1}`.
    pub fn tail_bound(&self, rho: f64) -> f64 {
        let m = self.n as f64 - 1.0;
        let decay = (self.alpha - 1.0) * m;
        self.c_alpha * self.n as f64 / 2f64.powi(self.n as i32)
            * 2f64.powf((2.0 * self.alpha - 1.0) * m)
            * (-decay * rho).exp()
            / decay
    }

    /// Smallest hyperbolic radius with `tail_bound ≤ target`, capped at 28
    /// so that sampled points remain representable inside the ball.
    pub fn truncation_radius(&self, target: f64) -> f64 {
        let m = self.n as f64 - 1.0;
        let decay = (self.alpha - 1.0) * m;
        let at_zero = self.tail_bound(0.0);
        let rho = if at_zero <= target { 0.0 } else { (at_zero / target).ln() / decay };
        rho.clamp(4.0, MAX_SAMPLING_RHO)
    }
}

/// Largest hyperbolic radius used by the samplers; `tanh(14)` is still
/// distinguishable from 1 in double precision.
pub const MAX_SAMPLING_RHO: f64 = 28.0;

const SAMPLER_CELLS: usize = 4096;
const SAMPLE_CHUNK: usize = 4096;

/// A point drawn from the sampler, with its importance weight relative to
/// `ν` and the `τ`-measure it represents.
#[derive(Debug, Clone)]
pub struct WeightSample {
    pub x: Vec<f64>,
    pub rho: f64,
    pub weight: f64,
    pub tau_mass: f64,
}

/// Stratified sampler for `ν` restricted to `ρ < rho_max`: radii come from
/// a piecewise-uniform approximation of the radial marginal, directions are
/// uniform.
#[derive(Debug, Clone)]
pub struct WeightSampler {
    params: WeightParams,
    rho_max: f64,
    width: f64,
    cum: Vec<f64>,
}

impl WeightSampler {
    pub fn new(params: &WeightParams, cfg: &NumericsConfig) -> Self {
        let auto = params.truncation_radius(1e-6);
        let rho_max = match cfg.r_max {
            Some(r) => hyperbolic_radius(r).min(MAX_SAMPLING_RHO),
            None => auto,
        };
        Self::with_rho_max(params, rho_max)
    }

    pub fn with_rho_max(params: &WeightParams, rho_max: f64) -> Self {
        let width = rho_max / SAMPLER_CELLS as f64;
        let gl = GaussLegendre::new(8);
        let mut cum = Vec::with_capacity(SAMPLER_CELLS + 1);
        cum.push(0.0);
        for k in 0..SAMPLER_CELLS {
            let lo = k as f64 * width;
            // floor keeps every cell reachable
            let mass = gl.integrate(lo, lo + width, |r| params.radial_density(r)).max(1e-300);
            cum.push(cum[k] + mass);
        }
        Self {
            params: *params,
            rho_max,
            width,
            cum,
        }
    }

    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Analytic bound for the `ν`-mass beyond `rho_max`.
    pub fn truncation_tail(&self) -> f64 {
        self.params.tail_bound(self.rho_max)
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// `count` stratified samples. Chunk `k` draws from substream `k` of
    /// `seed`, so the result does not depend on the thread count.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<WeightSample> {
        let n = self.params.n;
        let total = self.total();
        let sphere = sphere_area(n);
        let chunks = count.div_ceil(SAMPLE_CHUNK);
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = substream(seed, c as u64);
                let start = c * SAMPLE_CHUNK;
                let end = (start + SAMPLE_CHUNK).min(count);
                (start..end)
                    .map(|i| {
                        let u = (i as f64 + rand::Rng::gen::<f64>(&mut rng)) / count as f64 * total;
                        let k = self.cum.partition_point(|&m| m <= u).clamp(1, SAMPLER_CELLS) - 1;
                        let mass = self.cum[k + 1] - self.cum[k];
                        let frac = ((u - self.cum[k]) / mass).clamp(0.0, 1.0);
                        let rho = (k as f64 + frac) * self.width;
                        let q = mass / (self.width * total);
                        let p = self.params.radial_density(rho);
                        let r = euclidean_radius(rho);
                        let x = random_direction(n, &mut rng).into_iter().map(|d| d * r).collect();
                        let tau_mass = if rho > 0.0 {
                            sphere * (ln_sinh(rho) * (n as f64 - 1.0)).exp() / (count as f64 * q)
                        } else {
                            0.0
                        };
                        WeightSample {
                            x,
                            rho,
                            weight: p / q,
                            tau_mass,
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// How a norm was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: Estimate,
    pub method: NormMethod,
    /// Bound on the omitted mass beyond the sampling radius (Monte Carlo
    /// only), when it exceeds `1e-6` of the estimate.
    pub truncation_warning: Option<f64>,
}

fn quadrature_end(params: &WeightParams, ln_sup: f64) -> f64 {
    let m = params.n as f64 - 1.0;
    let decay = (params.alpha - 1.0) * m;
    let bound0 = params.tail_bound(0.0).ln() + ln_sup;
    ((bound0 - (1e-15f64).ln()) / decay).clamp(20.0, 4000.0)
}

/// `‖f‖²` in `B²_α`, i.e. `∫ |f|² dν`.
///
/// Radial and axially symmetric functions are integrated by product
/// Gauss–Legendre rules in `(ρ, ψ)`; anything else by Monte Carlo over `ν`.
pub fn bergman_norm_sq(f: &TestFunction, params: &WeightParams, cfg: &NumericsConfig) -> Result<NormEstimate> {
    if f.dim().is_some_and(|d| d != params.n) {
        return Err(Error::InvalidParameter("test function dimension differs from n".into()));
    }
    let ln_sup = f.ln_sup_bound(params);
    match f.symmetry() {
        Symmetry::Radial => {
            let end = quadrature_end(params, 2.0 * ln_sup);
            let panels = (end / 0.5).ceil() as usize;
            let v = GaussLegendre::standard().integrate_composite(0.0, end, panels, |rho| {
                let lf = f.log_abs_polar(params.n, rho, 0.0, None);
                params.radial_density(rho) * (2.0 * lf).exp()
            });
            Ok(NormEstimate {
                value: Estimate::exact(v),
                method: NormMethod::Quadrature,
                truncation_warning: None,
            })
        }
        Symmetry::Axial(axis) => {
            let v = axial_quadrature(params, 2.0 * ln_sup, |rho, psi| {
                2.0 * f.log_abs_polar(params.n, rho, psi, Some(&axis))
            });
            Ok(NormEstimate {
                value: Estimate::exact(v),
                method: NormMethod::Quadrature,
                truncation_warning: None,
            })
        }
        Symmetry::General => {
            let sampler = WeightSampler::new(params, cfg);
            let samples = sampler.samples(cfg.samples, cfg.seed);
            norm_from_samples(f, &sampler, &samples)
        }
    }
}

/// `∫ exp(log_integrand(ρ, ψ)) dν` for integrands depending only on the
/// hyperbolic radius and the angle to a fixed axis.
pub(crate) fn axial_quadrature(
    params: &WeightParams,
    ln_sup: f64,
    log_integrand: impl Fn(f64, f64) -> f64 + Sync,
) -> f64 {
    let n = params.n;
    let end = quadrature_end(params, ln_sup);
    let gl = GaussLegendre::standard();
    let rho_panels = (end / 0.25).ceil() as usize;
    let width = end / rho_panels as f64;
    let psi_panels = 8;
    // ∫ over S^{n−1} of g(ψ) = |S^{n−2}| ∫₀^π g sin^{n−2}ψ dψ, normalized by |S^{n−1}|
    let angular = if n >= 2 { sphere_area(n - 1) / sphere_area(n) } else { 1.0 };
    let total: f64 = (0..rho_panels)
        .into_par_iter()
        .map(|k| {
            let lo = k as f64 * width;
            gl.integrate(lo, lo + width, |rho| {
                let dens = params.radial_density(rho);
                if dens == 0.0 {
                    return 0.0;
                }
                let ang = gl.integrate_composite(0.0, std::f64::consts::PI, psi_panels, |psi| {
                    psi.sin().powi(n as i32 - 2) * log_integrand(rho, psi).exp()
                });
                dens * angular * ang
            })
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total
}

/// `∫|f|² dν` over the sampled region, with a truncation warning attached
/// when the omitted mass could exceed `1e-6` of the estimate.
pub fn norm_from_samples(f: &TestFunction, sampler: &WeightSampler, samples: &[WeightSample]) -> Result<NormEstimate> {
    let vals: Vec<f64> = samples
        .par_iter()
        .map(|s| f.log_abs(&s.x).map(|l| s.weight * (2.0 * l).exp()))
        .collect::<Result<_>>()?;
    let est = crate::mc::mean_and_stderr(&vals);
    let tail = sampler.truncation_tail() * (2.0 * f.ln_sup_bound(sampler.params())).exp();
    Ok(NormEstimate {
        value: est,
        method: NormMethod::MonteCarlo,
        truncation_warning: (tail > 1e-6 * est.value).then_some(tail),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn phi_examples() {
        for r in [0.0, 0.3, 0.5, 0.99] {
            assert!((phi(2, r) - (1.0 - r * r)).abs() < 1e-15);
        }
        assert!(rel(phi(3, 0.5), 0.474_008_169_752_761_88) < 1e-13);
        assert!(rel(phi(4, 0.5), 0.289_950_164_489_941_4) < 1e-13);
        assert!(rel(phi(5, 0.5), 0.175_554_704_329_048_12) < 1e-12);
        assert!(rel(phi(6, 0.5), 0.105_853_202_272_990_05) < 1e-12);
        assert!(rel(phi(3, 0.95), 0.004_811_414_111_681_778_2) < 1e-11);
        assert!(rel(phi(5, 0.95), 1.205_366_495_527_954_9e-5) < 1e-10);
        assert!(rel(phi(6, 0.95), 6.108_158_990_521_487_7e-7) < 1e-11);
        for n in 2..7 {
            assert_eq!(phi(n, 0.0), 1.0);
            assert_eq!(phi(n, 1.0), 0.0);
        }
        assert!(phi(3, 1.5).is_nan());
    }

    #[test]
    fn closed_forms_match_series() {
        for i in 0..=99 {
            let r = 0.01 * i as f64;
            for n in [3, 4] {
                let c = phi_closed_form(n, r).unwrap();
                assert!(rel(phi(n, r), c) < 1e-10, "n = {n}, r = {r}");
            }
        }
    }

    #[test]
    fn continuation_matches_closed_form_near_boundary() {
        for rho in [3.7f64, 5.0, 10.0, 30.0, 60.0] {
            let exact = 2.0 - 2.0 * rho / rho.tanh();
            assert!((log_phi_rho(3, rho) - exact).abs() < 1e-10 * exact.abs().max(1.0));
        }
        // n = 4 far from the origin through the terminating series
        let rho = 20.0;
        let x = euclidean_radius(rho).powi(2);
        let exact = -1.5 * x - 6.0 * ln_cosh(0.5 * rho);
        assert!((log_phi_rho(4, rho) - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn derivatives_n2() {
        for r in [0.1, 0.5, 0.96] {
            let (v, d1, d2) = log_phi_derivatives(2, r).unwrap();
            let d = 1.0 - r * r;
            assert!((v - d.ln()).abs() < 1e-14);
            assert!(rel(d1, -2.0 * r / d) < 1e-13);
            assert!(rel(d2, -2.0 * (1.0 + r * r) / (d * d)) < 1e-12);
        }
        assert!(log_phi_derivatives(3, 0.0).is_err());
        assert!(log_phi_derivatives(3, 1.0).is_err());
        let (_, d1, _) = log_phi_derivatives(5, 1e-6).unwrap();
        assert!(rel(d1, (-8.0 + 2.0 * kappa(5)) * 1e-6) < 1e-9);
    }

    #[test]
    fn derivatives_match_fd_and_branches_agree() {
        for n in 2..7 {
            for r in [0.3, 0.5, 0.9, 0.97] {
                let h = 1e-5;
                let (_, d1, d2) = log_phi_derivatives(n, r).unwrap();
                let fd1 = (log_phi(n, r + h) - log_phi(n, r - h)) / (2.0 * h);
                assert!(rel(d1, fd1) < 1e-7, "n = {n}, r = {r}");
                let (_, a1, _) = log_phi_derivatives(n, r + h).unwrap();
                let (_, b1, _) = log_phi_derivatives(n, r - h).unwrap();
                assert!(rel(d2, (a1 - b1) / (2.0 * h)) < 1e-6);
            }
            let edge = SERIES_MAX_ARG.sqrt();
            let below = log_phi_derivatives(n, edge * (1.0 - 1e-12)).unwrap();
            let above = log_phi_derivatives(n, edge * (1.0 + 1e-12)).unwrap();
            assert!(rel(below.1, above.1) < 1e-9);
            assert!(rel(below.2, above.2) < 1e-8);
        }
    }

    #[test]
    fn weight_ode() {
        let grid: Vec<f64> = (0..=85).map(|i| 0.05 + 0.01 * i as f64).collect();
        for n in 2..7 {
            let rep = certify_weight_ode(n, &grid);
            assert!(rep.passed, "{rep:?}");
        }
        assert!(certify_weight_ode(2, &[0.2, 0.7]).max_residual < 1e-10);
    }

    #[test]
    fn sandwich_bounds() {
        assert!(rel(sandwich_constant(3).unwrap(), 0.461_816_006_183_165_64) < 1e-9);
        assert!(rel(sandwich_constant(5).unwrap(), 0.109_498_534_744_242_71) < 1e-8);
        for n in 3..7 {
            let e = sandwich_constant(n).unwrap();
            for i in 1..1000 {
                let r = i as f64 / 1000.0;
                let upper = one_minus_sq(r).powi(n as i32 - 1);
                let p = phi(n, r);
                assert!(p < upper && p > e * upper, "n = {n}, r = {r}");
            }
        }
    }

    #[test]
    fn phi_is_decreasing() {
        for n in 2..7 {
            let mut prev = phi(n, 0.0);
            for i in 1..=1000 {
                let p = phi(n, i as f64 / 1000.0);
                assert!(p < prev);
                prev = p;
            }
        }
    }

    #[test]
    fn normalization_values() {
        let cfg = NumericsConfig::default();
        for alpha in [1.5, 2.0, 3.0] {
            assert!(rel(normalization(2, alpha, &cfg).unwrap(), alpha - 1.0) < 1e-11);
        }
        assert!(rel(normalization(3, 2.0, &cfg).unwrap(), 4.347_878_173_387_501_6) < 1e-10);
        assert!(rel(normalization(3, 1.5, &cfg).unwrap(), 1.843_224_165_738_045_8) < 1e-10);
        let coarse = NumericsConfig { quad_levels: 6, quad_tol: 1e-10, ..cfg };
        let fine = NumericsConfig { quad_levels: 14, quad_tol: 1e-15, ..cfg };
        let a = normalization(3, 2.0, &coarse).unwrap();
        let b = normalization(3, 2.0, &fine).unwrap();
        assert!(rel(a, b) < 1e-10);
        assert!(normalization(3, 1.0, &cfg).is_err());
    }

    #[test]
    fn radial_density_is_a_probability() {
        let cfg = NumericsConfig::default();
        for (n, alpha) in [(2, 2.0), (3, 1.5), (5, 3.0)] {
            let p = WeightParams::new(n, alpha, &cfg).unwrap();
            let end = quadrature_end(&p, 0.0);
            let total = GaussLegendre::standard()
                .integrate_composite(0.0, end, (end * 2.0) as usize, |r| p.radial_density(r));
            assert!((total - 1.0).abs() < 1e-10, "n = {n}: {total}");
            assert!(p.tail_bound(10.0) > 1.0 - GaussLegendre::standard().integrate_composite(0.0, 10.0, 40, |r| p.radial_density(r)));
        }
    }

    #[test]
    fn sampler_reproduces_moments() {
        let cfg = NumericsConfig::default();
        let p = WeightParams::new(3, 2.0, &cfg).unwrap();
        let s = WeightSampler::new(&p, &cfg);
        let xs = s.samples(20_000, 3);
        let again = s.samples(20_000, 3);
        assert_eq!(xs[123].x, again[123].x);
        let mean_w = xs.iter().map(|x| x.weight).sum::<f64>() / xs.len() as f64;
        assert!((mean_w - 1.0).abs() < 1e-3);
        // τ-mass of the unit hyperbolic ball
        let vol: f64 = xs.iter().filter(|x| x.rho < 1.0).map(|x| x.tau_mass).sum();
        let exact = crate::geometry::ball_volume_hyperbolic(3, 1.0).unwrap();
        assert!(rel(vol, exact) < 0.05, "{vol} vs {exact}");
    }
}
