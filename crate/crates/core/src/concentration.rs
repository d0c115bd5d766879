//! Test functions, domains, the concentration quotient `Rₙ(f, Ω)`,
//! superlevel-set profiles, and randomized checks of `Rₙ(f, Ω) ≤ θ(τ(Ω))`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::ThetaProfile;
use crate::config::NumericsConfig;
use crate::error::{domain, Error, Result};
use crate::geometry::{
    ball_union_measure_perimeter, ball_volume_hyperbolic, dot, euclidean_radius, hyperbolic_distance,
    hyperbolic_radius, hyperbolic_radius_from_volume, laplacian_h_fd, norm_sq, tau_measure_mc,
    HyperbolicBall, MobiusMap,
};
use crate::mc::{random_direction, ratio_estimate, substream, Estimate};
use crate::quadrature::GaussLegendre;
use crate::weights::{
    bergman_norm_sq, log_phi_rho, norm_from_samples, sandwich_constant, NormEstimate, NormMethod, WeightParams,
    WeightSample, WeightSampler,
};

/// Symmetry class of a test function, used to pick a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Symmetry {
    Radial,
    /// Depends only on `|x|` and the angle between `x` and the axis.
    Axial(Vec<f64>),
    General,
}

impl Symmetry {
    fn combine(self, other: Symmetry) -> Symmetry {
        match (self, other) {
            (Symmetry::Radial, s) | (s, Symmetry::Radial) => s,
            (Symmetry::Axial(a), Symmetry::Axial(b)) if dot(&a, &b).abs() > 1.0 - 1e-14 => Symmetry::Axial(a),
            _ => Symmetry::General,
        }
    }
}

/// An admissible function on the ball, built from the constant, the
/// extremal family and exponentials of the Poisson kernel by products and
/// nonnegative powers. All variants are positive.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    One,
    /// `g(x) = (Φₙ(|m(x)|)/Φₙ(|x|))^{α/2}`.
    Extremizer { map: MobiusMap, params: WeightParams },
    /// `exp(λ P_h(x, ζ))`.
    ExpHarmonic { lambda: f64, zeta: Vec<f64> },
    Power { base: Box<TestFunction>, p: f64 },
    Product(Vec<TestFunction>),
    /// `f(m(x)) (Φₙ(|m(x)|)/Φₙ(|x|))^{α/2}`, the norm-preserving action.
    MobiusAction { base: Box<TestFunction>, map: MobiusMap, params: WeightParams },
}

impl TestFunction {
    pub fn extremizer(map: MobiusMap, params: &WeightParams) -> Result<Self> {
        if map.dim() != params.n {
            return Err(Error::InvalidParameter("map dimension differs from n".into()));
        }
        Ok(Self::Extremizer { map, params: *params })
    }

    pub fn exp_harmonic(lambda: f64, zeta: Vec<f64>) -> Result<Self> {
        if (norm_sq(&zeta) - 1.0).abs() > 1e-12 {
            return Err(domain("exp_harmonic", "zeta is not a unit vector"));
        }
        Ok(Self::ExpHarmonic { lambda, zeta })
    }

    pub fn power(base: TestFunction, p: f64) -> Result<Self> {
        if !(p >= 0.0) {
            return Err(Error::InvalidParameter(format!("power {p} must be nonnegative")));
        }
        Ok(Self::Power { base: Box::new(base), p })
    }

    /// The action `f ↦ f∘m · (Φₙ∘|m| / Φₙ)^{α/2}`; the constant maps to the
    /// extremizer.
    pub fn mobius_action(base: TestFunction, map: MobiusMap, params: &WeightParams) -> Result<Self> {
        if map.is_identity() {
            return Ok(base);
        }
        if base == TestFunction::One {
            return Self::extremizer(map, params);
        }
        Ok(Self::MobiusAction {
            base: Box::new(base),
            map,
            params: *params,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::One => None,
            Self::Extremizer { map, .. } | Self::MobiusAction { map, .. } => Some(map.dim()),
            Self::ExpHarmonic { zeta, .. } => Some(zeta.len()),
            Self::Power { base, .. } => base.dim(),
            Self::Product(fs) => fs.iter().find_map(|f| f.dim()),
        }
    }

    /// `log |f(x)|`.
    pub fn log_abs(&self, x: &[f64]) -> Result<f64> {
        let r2 = norm_sq(x);
        if r2 >= 1.0 {
            return Err(domain("eval_test_function", format!("|x| = {} is not below 1", r2.sqrt())));
        }
        Ok(match self {
            Self::One => 0.0,
            Self::Extremizer { map, params } => extremizer_log(params, x, map.center()),
            Self::ExpHarmonic { lambda, zeta } => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    lambda * crate::geometry::poisson_kernel(x, zeta)?
                }
            }
            Self::Power { base, p } => {
                if *p == 0.0 {
                    0.0
                } else {
                    p * base.log_abs(x)?
                }
            }
            Self::Product(fs) => fs.iter().map(|f| f.log_abs(x)).sum::<Result<f64>>()?,
            Self::MobiusAction { base, map, params } => {
                base.log_abs(&map.apply(x)?)? + extremizer_log(params, x, map.center())
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_abs(x)?.exp())
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            Self::One => Symmetry::Radial,
            Self::Extremizer { map, .. } => axis_of(map.center()),
            Self::ExpHarmonic { lambda, zeta } => {
                if *lambda == 0.0 {
                    Symmetry::Radial
                } else {
                    Symmetry::Axial(zeta.clone())
                }
            }
            Self::Power { base, p } => {
                if *p == 0.0 {
                    Symmetry::Radial
                } else {
                    base.symmetry()
                }
            }
            Self::Product(fs) => fs.iter().fold(Symmetry::Radial, |acc, f| acc.combine(f.symmetry())),
            Self::MobiusAction { .. } => Symmetry::General,
        }
    }

    /// `log |f|` at hyperbolic radius `rho` and angle `psi` from `axis`;
    /// valid for [`Symmetry::Radial`] and [`Symmetry::Axial`] functions.
    pub fn log_abs_polar(&self, n: usize, rho: f64, psi: f64, axis: Option<&[f64]>) -> f64 {
        // 1 − cos of the angle between x and a unit vector u with u·axis = ±1
        let gap = |u: &[f64]| -> f64 {
            let sign = axis.map_or(1.0, |e| dot(e, u).signum());
            if sign > 0.0 {
                2.0 * (0.5 * psi).sin().powi(2)
            } else {
                2.0 * (0.5 * psi).cos().powi(2)
            }
        };
        match self {
            Self::One => 0.0,
            Self::Extremizer { map, params } => {
                let a = map.center();
                let la = norm_sq(a).sqrt();
                if la == 0.0 {
                    return 0.0;
                }
                let unit: Vec<f64> = a.iter().map(|c| c / la).collect();
                let rho_a = hyperbolic_radius(la);
                let q = 2.0 * (0.5 * (rho - rho_a)).sinh().powi(2) + rho.sinh() * rho_a.sinh() * gap(&unit);
                let rho_m = (q + (q * (q + 2.0)).sqrt()).ln_1p();
                0.5 * params.alpha * (log_phi_rho(n, rho_m) - log_phi_rho(n, rho))
            }
            Self::ExpHarmonic { lambda, zeta } => {
                if *lambda == 0.0 {
                    return 0.0;
                }
                let r = euclidean_radius(rho);
                let e = (-rho).exp();
                let one_minus_r = 2.0 * e / (1.0 + e);
                let defect = one_minus_r * (1.0 + r);
                let dist2 = one_minus_r * one_minus_r + 2.0 * r * gap(zeta);
                lambda * (defect / dist2).powi(n as i32 - 1)
            }
            Self::Power { base, p } => {
                if *p == 0.0 {
                    0.0
                } else {
                    p * base.log_abs_polar(n, rho, psi, axis)
                }
            }
            Self::Product(fs) => fs.iter().map(|f| f.log_abs_polar(n, rho, psi, axis)).sum(),
            Self::MobiusAction { .. } => f64::NAN,
        }
    }

    /// Upper bound for `log sup |f|`; `+∞` when `f` is unbounded.
    pub fn ln_sup_bound(&self, params: &WeightParams) -> f64 {
        match self {
            Self::One => 0.0,
            Self::Extremizer { map, params: p } => extremizer_sup(p, map.center()),
            Self::ExpHarmonic { lambda, .. } => {
                if *lambda <= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Power { base, p } => {
                if *p == 0.0 {
                    0.0
                } else {
                    p * base.ln_sup_bound(params)
                }
            }
            Self::Product(fs) => fs.iter().map(|f| f.ln_sup_bound(params)).sum(),
            Self::MobiusAction { base, map, params: p } => base.ln_sup_bound(params) + extremizer_sup(p, map.center()),
        }
    }

    /// Whether `|f|²Φₙ^α` is radial.
    pub fn is_radial(&self) -> bool {
        self.symmetry() == Symmetry::Radial
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => write!(f, "one"),
            Self::Extremizer { map, .. } => write!(f, "extremizer(a={:?})", map.center()),
            Self::ExpHarmonic { lambda, zeta } => write!(f, "exp({lambda}·P(·,{zeta:?}))"),
            Self::Power { base, p } => write!(f, "({base})^{p}"),
            Self::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(|g| g.to_string()).collect();
                write!(f, "{}", parts.join("·"))
            }
            Self::MobiusAction { base, map, .. } => write!(f, "action({base}, a={:?})", map.center()),
        }
    }
}

fn axis_of(a: &[f64]) -> Symmetry {
    let la = norm_sq(a).sqrt();
    if la == 0.0 {
        Symmetry::Radial
    } else {
        Symmetry::Axial(a.iter().map(|c| c / la).collect())
    }
}

fn extremizer_log(params: &WeightParams, x: &[f64], a: &[f64]) -> f64 {
    let n = params.n;
    let rho = hyperbolic_radius(norm_sq(x).sqrt());
    let rho_m = hyperbolic_distance(x, a);
    0.5 * params.alpha * (log_phi_rho(n, rho_m) - log_phi_rho(n, rho))
}

/// `|g| ≤ (e^{(n−1)ρ_a}/Eₙ)^{α/2}` from the sandwich bounds.
fn extremizer_sup(params: &WeightParams, a: &[f64]) -> f64 {
    let rho_a = hyperbolic_radius(norm_sq(a).sqrt());
    let e = sandwich_constant(params.n).unwrap_or(f64::MIN_POSITIVE);
    0.5 * params.alpha * ((params.n as f64 - 1.0) * rho_a - e.ln())
}

pub fn eval_test_function(f: &TestFunction, x: &[f64]) -> Result<f64> {
    f.eval(x)
}

type Indicator = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A measurable subset of the ball together with its invariant measure.
#[derive(Clone)]
pub enum DomainSpec {
    /// Centered ball of measure `s`.
    CenteredBall { s: f64 },
    /// `m⁻¹` of the centered ball of measure `s`.
    MobiusBall { map: MobiusMap, s: f64 },
    /// A set given by its indicator, contained in the centered ball of
    /// hyperbolic radius `bound_rho`, with an estimated measure.
    Predicate {
        label: String,
        indicator: Indicator,
        bound_rho: f64,
        measure: Estimate,
    },
}

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CenteredBall { s } => write!(f, "CenteredBall(s={s})"),
            Self::MobiusBall { map, s } => write!(f, "MobiusBall(a={:?}, s={s})", map.center()),
            Self::Predicate { label, measure, .. } => {
                write!(f, "Predicate({label}, s={}±{})", measure.value, measure.stderr)
            }
        }
    }
}

impl DomainSpec {
    /// A predicate domain whose measure is estimated by `τ`-uniform sampling
    /// of the bounding ball.
    pub fn predicate(
        n: usize,
        label: impl Into<String>,
        indicator: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        bound_rho: f64,
        samples: usize,
        seed: u64,
    ) -> Self {
        let mut rng = substream(seed, 0x5eed);
        let measure = tau_measure_mc(n, &indicator, bound_rho, samples, &mut rng);
        Self::Predicate {
            label: label.into(),
            indicator: Arc::new(indicator),
            bound_rho,
            measure,
        }
    }

    /// `{x₁ > c} ∩ B(0, bound_rho)`; the cap alone has infinite measure.
    pub fn half_space_cap(n: usize, c: f64, bound_rho: f64, samples: usize, seed: u64) -> Self {
        let r_bound = euclidean_radius(bound_rho);
        Self::predicate(
            n,
            format!("cap x1>{c:.3} within rho<{bound_rho:.3}"),
            move |x| x[0] > c && norm_sq(x).sqrt() < r_bound,
            bound_rho,
            samples,
            seed,
        )
    }

    /// Union of geodesic balls; the measure comes from per-ball sampling with
    /// inverse-multiplicity weights.
    pub fn ball_union(balls: Vec<HyperbolicBall>, samples: usize, seed: u64) -> Self {
        let mut rng = substream(seed, 0xba11);
        let est = ball_union_measure_perimeter(&balls, 1e-3, samples, &mut rng);
        let bound_rho = balls
            .iter()
            .map(|b| hyperbolic_radius(norm_sq(&b.center).sqrt()) + b.radius)
            .fold(0.0, f64::max);
        let label = format!("union of {} balls", balls.len());
        Self::Predicate {
            label,
            indicator: Arc::new(move |x| balls.iter().any(|b| b.contains(x))),
            bound_rho,
            measure: est.measure,
        }
    }

    pub fn measure(&self) -> Estimate {
        match self {
            Self::CenteredBall { s } | Self::MobiusBall { s, .. } => Estimate::exact(*s),
            Self::Predicate { measure, .. } => *measure,
        }
    }

    pub fn contains(&self, n: usize, x: &[f64]) -> bool {
        match self {
            Self::CenteredBall { s } => hyperbolic_radius(norm_sq(x).sqrt()) < hyperbolic_radius_from_volume(n, *s),
            Self::MobiusBall { map, s } => hyperbolic_distance(x, map.center()) < hyperbolic_radius_from_volume(n, *s),
            Self::Predicate { indicator, .. } => indicator(x),
        }
    }

    /// A membership test with the ball radius precomputed.
    fn membership(&self, n: usize) -> Box<dyn Fn(&[f64]) -> bool + Send + Sync + '_> {
        match self {
            Self::CenteredBall { s } => {
                let r = euclidean_radius(hyperbolic_radius_from_volume(n, *s));
                Box::new(move |x| norm_sq(x) < r * r)
            }
            Self::MobiusBall { map, s } => {
                let rho = hyperbolic_radius_from_volume(n, *s);
                Box::new(move |x| hyperbolic_distance(x, map.center()) < rho)
            }
            Self::Predicate { indicator, .. } => Box::new(move |x| indicator(x)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuotientEstimate {
    pub value: Estimate,
    pub quadrature: bool,
    pub truncation_warning: Option<f64>,
    /// Set when the standard error exceeds `cfg.mc_tolerance`.
    pub variance_warning: Option<f64>,
}

/// `Rₙ(f, Ω) = ∫_Ω |f|² dν / ‖f‖²`.
pub fn concentration_quotient(
    f: &TestFunction,
    omega: &DomainSpec,
    params: &WeightParams,
    cfg: &NumericsConfig,
) -> Result<QuotientEstimate> {
    if let (DomainSpec::CenteredBall { s }, true) = (omega, f.is_radial()) {
        let norm = bergman_norm_sq(f, params, cfg)?.value.value;
        let rho_s = hyperbolic_radius_from_volume(params.n, *s);
        let part = radial_partial_norm(f, params, rho_s);
        return Ok(QuotientEstimate {
            value: Estimate::exact((part / norm).min(1.0)),
            quadrature: true,
            truncation_warning: None,
            variance_warning: None,
        });
    }
    let sampler = WeightSampler::new(params, cfg);
    let samples = sampler.samples(cfg.samples, cfg.seed);
    quotient_from_samples(f, omega, &sampler, &samples, cfg)
}

/// `∫_{ρ<rho_s} |f|² dν` for radial `f`.
fn radial_partial_norm(f: &TestFunction, params: &WeightParams, rho_s: f64) -> f64 {
    let panels = (rho_s / 0.5).ceil().max(1.0) as usize;
    GaussLegendre::standard().integrate_composite(0.0, rho_s, panels, |rho| {
        params.radial_density(rho) * (2.0 * f.log_abs_polar(params.n, rho, 0.0, None)).exp()
    })
}

/// Monte Carlo quotient on a given sample set; the same samples give exact
/// monotonicity in `Ω` and scale invariance in `f`.
pub fn quotient_from_samples(
    f: &TestFunction,
    omega: &DomainSpec,
    sampler: &WeightSampler,
    samples: &[WeightSample],
    cfg: &NumericsConfig,
) -> Result<QuotientEstimate> {
    let n = sampler.params().n;
    let inside = omega.membership(n);
    let pairs: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|s| {
            let w = s.weight * (2.0 * f.log_abs(&s.x)?).exp();
            Ok((if inside(&s.x) { w } else { 0.0 }, w))
        })
        .collect::<Result<_>>()?;
    let (num, den): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let value = ratio_estimate(&num, &den);
    let mean_den = den.iter().sum::<f64>() / den.len() as f64;
    let tail = sampler.truncation_tail() * (2.0 * f.ln_sup_bound(sampler.params())).exp();
    Ok(QuotientEstimate {
        value,
        quadrature: false,
        truncation_warning: (tail > 1e-6 * mean_den).then_some(tail),
        variance_warning: (value.stderr > cfg.mc_tolerance).then_some(value.stderr),
    })
}

/// Transports `ν`-samples `y` to `x = m⁻¹(y)`, reweighting by the ratio of
/// the `ν`-density at `x` to the pushed-forward density `p(m x) J_m(x)`.
/// This is the natural importance sampler for `|g_m|² dν`.
pub fn pulled_back_samples(samples: &[WeightSample], m: &MobiusMap, params: &WeightParams) -> Result<Vec<WeightSample>> {
    let n = params.n as f64;
    samples
        .par_iter()
        .map(|y| {
            let x = m.apply_inverse(&y.x)?;
            let rho = hyperbolic_radius(norm_sq(&x).sqrt());
            let ln_defect = |rho: f64| -2.0 * crate::weights::ln_cosh(0.5 * rho);
            let ln_ratio = params.alpha * (log_phi_rho(params.n, rho) - log_phi_rho(params.n, y.rho))
                - n * (ln_defect(rho) - ln_defect(y.rho))
                - m.jacobian(&x)?.ln();
            Ok(WeightSample {
                x,
                rho,
                weight: y.weight * ln_ratio.exp(),
                tau_mass: y.tau_mass,
            })
        })
        .collect()
}

/// `∫|g|² dν` from an equal mixture of `ν` and `ν` pulled back through `m`,
/// combined with balance weights. Since `τ` is Möbius invariant the density
/// ratio of the two components is `(Φₙ(ρ(x)) / Φₙ(ρ(m x)))^α`, and each
/// mixture weight is at most 2. Uses its own substream of `cfg.seed`.
fn transported_mixture_norm_sq(g: &TestFunction, m: &MobiusMap, params: &WeightParams, cfg: &NumericsConfig) -> Result<Estimate> {
    let sampler = WeightSampler::new(params, cfg);
    let half = cfg.samples.div_ceil(2);
    let seed = cfg.seed ^ 0x6d69_7874;
    let direct = sampler.samples(half, seed);
    let moved = sampler.samples(half, seed.wrapping_add(1));
    let point = |x: Vec<f64>, weight: f64| -> Result<f64> {
        let rho_x = hyperbolic_radius(norm_sq(&x).sqrt());
        let rho_mx = hyperbolic_radius(norm_sq(&m.apply(&x)?).sqrt());
        let ln_q = params.alpha * (log_phi_rho(params.n, rho_x) - log_phi_rho(params.n, rho_mx));
        Ok(weight * 2.0 * (2.0 * g.log_abs(&x)?).exp() / (1.0 + (-ln_q).exp()))
    };
    let mut vals: Vec<f64> = direct.into_par_iter().map(|s| point(s.x, s.weight)).collect::<Result<_>>()?;
    let pulled: Vec<f64> = moved
        .into_par_iter()
        .map(|y| point(m.apply_inverse(&y.x)?, y.weight))
        .collect::<Result<_>>()?;
    vals.extend(pulled);
    Ok(crate::mc::mean_and_stderr(&vals))
}

/// Distribution function `μ`, decreasing rearrangement `u*` and `Iₙ` of
/// `u = |f|² c Φₙ^α / (2ⁿωₙ)` (the density of `|f|² dν` against `τ`).
#[derive(Debug, Clone)]
pub enum SuperlevelProfile {
    /// Exact evaluation for radial, strictly decreasing `u`.
    Radial(RadialProfile),
    /// Empirical tables from weighted samples.
    Empirical(EmpiricalProfile),
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    f: TestFunction,
    params: WeightParams,
    norm_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalProfile {
    /// Cumulative `τ`-measure of the superlevel sets, by decreasing `u`.
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    /// Cumulative `∫ u dτ`.
    pub i_n: Vec<f64>,
    /// Per-batch `(s, I)` tables for standard errors.
    #[serde(skip)]
    batches: Vec<(Vec<f64>, Vec<f64>)>,
    pub norm_sq: Estimate,
}

const PROFILE_BATCHES: usize = 16;

impl RadialProfile {
    fn ln_u(&self, rho: f64) -> f64 {
        self.params.ln_nu_scale()
            + 2.0 * self.f.log_abs_polar(self.params.n, rho, 0.0, None)
            + self.params.alpha * log_phi_rho(self.params.n, rho)
    }

    pub fn u_star(&self, s: f64) -> f64 {
        self.ln_u(hyperbolic_radius_from_volume(self.params.n, s)).exp()
    }

    pub fn mu(&self, t: f64) -> f64 {
        let lt = t.ln();
        if lt >= self.ln_u(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.ln_u(hi) > lt {
            lo = hi;
            hi *= 2.0;
            if hi > 1e4 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ln_u(mid) > lt {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
        }
        ball_volume_hyperbolic(self.params.n, 0.5 * (lo + hi)).unwrap_or(f64::INFINITY)
    }

    pub fn i_n(&self, s: f64) -> f64 {
        radial_partial_norm(&self.f, &self.params, hyperbolic_radius_from_volume(self.params.n, s))
    }
}

impl EmpiricalProfile {
    fn interpolate(s_tab: &[f64], i_tab: &[f64], s: f64) -> f64 {
        if s <= 0.0 || s_tab.is_empty() {
            return 0.0;
        }
        let k = s_tab.partition_point(|&x| x < s);
        if k == 0 {
            return i_tab[0] * s / s_tab[0];
        }
        if k == s_tab.len() {
            return *i_tab.last().unwrap();
        }
        let t = (s - s_tab[k - 1]) / (s_tab[k] - s_tab[k - 1]);
        i_tab[k - 1] + t * (i_tab[k] - i_tab[k - 1])
    }

    /// `Iₙ(s)` with a batch-means standard error.
    pub fn i_n(&self, s: f64) -> Estimate {
        let value = Self::interpolate(&self.s, &self.i_n, s);
        let per: Vec<f64> = self.batches.iter().map(|(bs, bi)| Self::interpolate(bs, bi, s)).collect();
        let e = crate::mc::mean_and_stderr(&per);
        Estimate { value, stderr: e.stderr }
    }

    pub fn u_star(&self, s: f64) -> f64 {
        let k = self.s.partition_point(|&x| x < s);
        self.u.get(k).copied().unwrap_or(0.0)
    }

    /// Right-continuous empirical `μ(t) = τ({u > t})`.
    pub fn mu(&self, t: f64) -> f64 {
        let k = self.u.partition_point(|&x| x > t);
        if k == 0 {
            0.0
        } else {
            self.s[k - 1]
        }
    }

    fn build(points: Vec<(f64, f64)>, batch_of: impl Fn(usize) -> usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>) {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[b].0.total_cmp(&points[a].0).then(a.cmp(&b)));
        let mut s = Vec::with_capacity(points.len());
        let mut u = Vec::with_capacity(points.len());
        let mut i_n = Vec::with_capacity(points.len());
        let mut batches = vec![(Vec::new(), Vec::new()); PROFILE_BATCHES];
        let (mut acc_s, mut acc_i) = (0.0, 0.0);
        let mut acc_b = vec![(0.0, 0.0); PROFILE_BATCHES];
        for &k in &order {
            let (uk, mk) = points[k];
            acc_s += mk;
            acc_i += mk * uk;
            s.push(acc_s);
            u.push(uk);
            i_n.push(acc_i);
            let b = batch_of(k);
            let scale = PROFILE_BATCHES as f64;
            acc_b[b].0 += mk * scale;
            acc_b[b].1 += mk * uk * scale;
            batches[b].0.push(acc_b[b].0);
            batches[b].1.push(acc_b[b].1);
        }
        (s, u, i_n, batches)
    }
}

impl SuperlevelProfile {
    pub fn mu(&self, t: f64) -> f64 {
        match self {
            Self::Radial(p) => p.mu(t),
            Self::Empirical(p) => p.mu(t),
        }
    }

    pub fn u_star(&self, s: f64) -> f64 {
        match self {
            Self::Radial(p) => p.u_star(s),
            Self::Empirical(p) => p.u_star(s),
        }
    }

    pub fn i_n(&self, s: f64) -> Estimate {
        match self {
            Self::Radial(p) => Estimate::exact(p.i_n(s)),
            Self::Empirical(p) => p.i_n(s),
        }
    }

    pub fn norm_sq(&self) -> Estimate {
        match self {
            Self::Radial(p) => Estimate::exact(p.norm_sq),
            Self::Empirical(p) => p.norm_sq,
        }
    }
}

/// Which construction [`superlevel_profile`] should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfilePath {
    Radial,
    MonteCarlo,
}

pub fn superlevel_profile(
    f: &TestFunction,
    params: &WeightParams,
    cfg: &NumericsConfig,
    path: ProfilePath,
) -> Result<SuperlevelProfile> {
    match path {
        ProfilePath::Radial => {
            if !f.is_radial() {
                return Err(Error::NonMonotoneRadial);
            }
            let profile = RadialProfile {
                f: f.clone(),
                params: *params,
                norm_sq: bergman_norm_sq(f, params, cfg)?.value.value,
            };
            let mut prev = profile.ln_u(0.0);
            for k in 1..=4000 {
                let cur = profile.ln_u(0.01 * k as f64);
                if !(cur < prev) {
                    return Err(Error::NonMonotoneRadial);
                }
                prev = cur;
            }
            Ok(SuperlevelProfile::Radial(profile))
        }
        ProfilePath::MonteCarlo => {
            let sampler = WeightSampler::new(params, cfg);
            let samples = sampler.samples(cfg.samples, cfg.seed);
            let scale = params.ln_nu_scale();
            let points: Vec<(f64, f64)> = samples
                .par_iter()
                .map(|s| {
                    let lu = scale + 2.0 * f.log_abs(&s.x)? + params.alpha * log_phi_rho(params.n, s.rho);
                    Ok((lu.exp(), s.tau_mass))
                })
                .collect::<Result<_>>()?;
            let norm = norm_from_samples(f, &sampler, &samples)?.value;
            let (s, u, i_n, batches) = EmpiricalProfile::build(points, |k| k % PROFILE_BATCHES);
            Ok(SuperlevelProfile::Empirical(EmpiricalProfile {
                s,
                u,
                i_n,
                batches,
                norm_sq: norm,
            }))
        }
    }
}

/// One randomized check of the main inequality.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub index: usize,
    pub function: String,
    pub domain: String,
    pub s: f64,
    /// `θ` at the measure inflated by three standard errors.
    pub theta: f64,
    pub quotient: Estimate,
    /// `θ − Rₙ`; negative values beyond the allowance are violations.
    pub deficit: f64,
    pub violation: bool,
    pub equality_trial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub n: usize,
    pub alpha: f64,
    pub trials: Vec<TrialRecord>,
    pub violations: usize,
    /// Largest `(Rₙ − θ)/stderr` among the equality trials.
    pub equality_max_z: f64,
    pub equality_failures: usize,
    pub passed: bool,
}

fn random_test_function<R: Rng>(params: &WeightParams, rng: &mut R) -> Result<TestFunction> {
    let n = params.n;
    let factors = rng.gen_range(1..=3);
    let mut fs = Vec::with_capacity(factors);
    for _ in 0..factors {
        let base = if rng.gen_bool(0.5) {
            TestFunction::exp_harmonic(-2.0 * rng.gen::<f64>(), random_direction(n, rng))?
        } else {
            TestFunction::extremizer(MobiusMap::random(n, 0.7, rng), params)?
        };
        let f = if rng.gen_bool(0.3) {
            TestFunction::power(base, rng.gen_range(0.5..2.0))?
        } else {
            base
        };
        fs.push(f);
    }
    Ok(if fs.len() == 1 { fs.pop().unwrap() } else { TestFunction::Product(fs) })
}

fn random_domain<R: Rng>(n: usize, rng: &mut R, samples: usize, seed: u64) -> Result<DomainSpec> {
    let s = 10f64.powf(rng.gen_range(-1.0..1.7));
    Ok(match rng.gen_range(0..4) {
        0 => DomainSpec::CenteredBall { s },
        1 => DomainSpec::MobiusBall {
            map: MobiusMap::random(n, 0.7, rng),
            s,
        },
        2 => {
            let bound = rng.gen_range(1.0..4.0);
            let c = rng.gen_range(-0.5..0.8) * euclidean_radius(bound);
            DomainSpec::half_space_cap(n, c, bound, samples, seed)
        }
        _ => {
            let mut balls = Vec::new();
            for _ in 0..2 {
                let c: Vec<f64> = random_direction(n, rng).into_iter().map(|d| d * rng.gen_range(0.0..0.7)).collect();
                balls.push(HyperbolicBall::new(c, rng.gen_range(0.3..1.5))?);
            }
            DomainSpec::ball_union(balls, samples / 4, seed)
        }
    })
}

/// Draws `trials` random `(f, Ω)` pairs and checks
/// `Rₙ(f, Ω) ≤ θ(s) + 3·stderr`; `equality_trials` additional trials use the
/// extremal pairs `(g_m, m⁻¹(B_s))` and check `|Rₙ − θ(s)| < 3·stderr`.
pub fn fuzz_main_inequality(
    trials: usize,
    equality_trials: usize,
    profile: &ThetaProfile,
    cfg: &NumericsConfig,
    seed: u64,
) -> Result<FuzzReport> {
    let params = profile.params;
    let n = params.n;
    let sampler = WeightSampler::new(&params, cfg);
    let total = trials + equality_trials;
    let records: Vec<TrialRecord> = (0..total)
        .into_par_iter()
        .map(|index| -> Result<TrialRecord> {
            let mut rng = substream(seed, index as u64);
            let trial_seed = seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1));
            let equality_trial = index >= trials;
            let (f, omega) = if equality_trial {
                let m = MobiusMap::random(n, 0.7, &mut rng);
                let s = 10f64.powf(rng.gen_range(-1.0..1.7));
                (TestFunction::extremizer(m.clone(), &params)?, DomainSpec::MobiusBall { map: m, s })
            } else {
                let f = random_test_function(&params, &mut rng)?;
                (f, random_domain(n, &mut rng, cfg.samples / 4, trial_seed)?)
            };
            let mut samples = sampler.samples(cfg.samples, trial_seed);
            if let DomainSpec::MobiusBall { map, .. } = &omega {
                if equality_trial {
                    samples = pulled_back_samples(&samples, map, &params)?;
                }
            }
            let q = quotient_from_samples(&f, &omega, &sampler, &samples, cfg)?;
            let m = omega.measure();
            let s = m.value + 3.0 * m.stderr;
            let theta = profile.theta(s);
            let deficit = theta - q.value.value;
            let violation = if equality_trial {
                deficit.abs() >= 3.0 * q.value.stderr
            } else {
                deficit < -3.0 * q.value.stderr
            };
            Ok(TrialRecord {
                index,
                function: f.to_string(),
                domain: format!("{omega:?}"),
                s: m.value,
                theta,
                quotient: q.value,
                deficit,
                violation,
                equality_trial,
            })
        })
        .collect::<Result<_>>()?;
    let violations = records.iter().filter(|r| r.violation && !r.equality_trial).count();
    let equality_failures = records.iter().filter(|r| r.violation && r.equality_trial).count();
    let equality_max_z = records
        .iter()
        .filter(|r| r.equality_trial)
        .map(|r| -r.deficit / r.quotient.stderr)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FuzzReport {
        n,
        alpha: params.alpha,
        passed: violations == 0 && equality_failures == 0,
        trials: records,
        violations,
        equality_max_z,
        equality_failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MobiusActionReport {
    pub norm_f: NormEstimate,
    pub norm_g: NormEstimate,
    pub norms_agree: bool,
    /// Smallest `Δ_h log|g|` over the sampled points.
    pub min_laplacian: f64,
    pub fd_tolerance: f64,
    pub subharmonic: bool,
    pub passed: bool,
}

/// Checks that `g = f∘m · (Φₙ∘|m|/Φₙ)^{α/2}` has the norm of `f` and that
/// `log|g|` is `M`-subharmonic at sampled interior points.
pub fn certify_mobius_action(
    f: &TestFunction,
    m: &MobiusMap,
    params: &WeightParams,
    cfg: &NumericsConfig,
) -> Result<MobiusActionReport> {
    let g = TestFunction::mobius_action(f.clone(), m.clone(), params)?;
    let norm_f = bergman_norm_sq(f, params, cfg)?;
    let norm_g = match (g == *f, g.symmetry()) {
        (true, _) => norm_f,
        (false, Symmetry::General) => NormEstimate {
            value: transported_mixture_norm_sq(&g, m, params, cfg)?,
            method: NormMethod::MonteCarlo,
            truncation_warning: None,
        },
        _ => bergman_norm_sq(&g, params, cfg)?,
    };
    let se = norm_f.value.stderr.hypot(norm_g.value.stderr);
    let diff = (norm_f.value.value - norm_g.value.value).abs();
    let norms_agree = diff <= 3.0 * se || diff <= 1e-6 * norm_f.value.value;

    let mut rng = substream(cfg.seed, 0xac7);
    let fd_tolerance = 1e-5;
    let mut min_laplacian = f64::INFINITY;
    let n = params.n;
    for _ in 0..20 {
        let r = 0.8 * rng.gen::<f64>().powf(1.0 / n as f64);
        let x: Vec<f64> = random_direction(n, &mut rng).into_iter().map(|d| d * r).collect();
        let lg = |p: &[f64]| g.log_abs(p).unwrap_or(f64::NAN);
        let lap = laplacian_h_fd(&lg, &x, cfg.fd_step)?;
        min_laplacian = min_laplacian.min(lap);
    }
    let subharmonic = min_laplacian >= -fd_tolerance;
    Ok(MobiusActionReport {
        norm_f,
        norm_g,
        norms_agree,
        min_laplacian,
        fd_tolerance,
        subharmonic,
        passed: norms_agree && subharmonic,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub direction: Vec<f64>,
    /// `(r, |f(rζ)|²(1−r²)^α)` along the ray.
    pub samples: Vec<(f64, f64)>,
    pub threshold: f64,
    pub monotone_tail: bool,
    pub passed: bool,
}

fn positive_harmonic_direction(f: &TestFunction) -> Option<Vec<f64>> {
    match f {
        TestFunction::ExpHarmonic { lambda, zeta } if *lambda > 0.0 => Some(zeta.clone()),
        TestFunction::Power { base, p } if *p > 0.0 => positive_harmonic_direction(base),
        TestFunction::Product(fs) => fs.iter().find_map(positive_harmonic_direction),
        TestFunction::MobiusAction { base, .. } => positive_harmonic_direction(base),
        _ => None,
    }
}

/// Samples `|f(rζ)|²(1−r²)^α` as `r → 1`. Rays toward the pole of a growing
/// Poisson exponential are replaced by the antipodal ray.
pub fn boundary_decay_check(f: &TestFunction, params: &WeightParams) -> Result<DecayReport> {
    let n = params.n;
    let direction = match positive_harmonic_direction(f) {
        Some(z) => z.iter().map(|c| -c).collect(),
        None => {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }
    };
    let mut samples = Vec::new();
    for k in 4..=16 {
        let gap = 10f64.powf(-k as f64 / 4.0);
        let r = 1.0 - gap;
        let x: Vec<f64> = direction.iter().map(|d| d * r).collect();
        let v = (2.0 * f.log_abs(&x)? + params.alpha * (gap * (2.0 - gap)).ln()).exp();
        samples.push((r, v));
    }
    let threshold = 1e-3 * 2f64.powf(params.alpha);
    let tail = &samples[samples.len() - 4..];
    let monotone_tail = tail.windows(2).all(|w| w[1].1 < w[0].1);
    let last = samples.last().unwrap().1;
    Ok(DecayReport {
        direction,
        passed: monotone_tail && last < threshold,
        samples,
        threshold,
        monotone_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::theta_n2;
    use std::f64::consts::PI;

    fn params(n: usize, alpha: f64) -> WeightParams {
        WeightParams::new(n, alpha, &NumericsConfig::default()).unwrap()
    }

    #[test]
    fn trivial_evaluations() {
        let p = params(3, 2.0);
        let x = [0.2, -0.4, 0.1];
        assert_eq!(TestFunction::One.eval(&x).unwrap(), 1.0);
        let id = TestFunction::extremizer(MobiusMap::identity(3), &p).unwrap();
        assert!((id.eval(&x).unwrap() - 1.0).abs() < 1e-14);
        let e0 = TestFunction::exp_harmonic(0.0, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(e0.eval(&x).unwrap(), 1.0);
        assert!(TestFunction::One.eval(&[1.0, 0.0, 0.0]).is_err());
        assert!(TestFunction::exp_harmonic(1.0, vec![0.5, 0.0, 0.0]).is_err());
        assert!(TestFunction::power(TestFunction::One, -1.0).is_err());
    }

    #[test]
    fn polar_matches_cartesian() {
        let p = params(3, 2.0);
        let mut rng = substream(1, 0);
        let axis = vec![0.0, 0.0, 1.0];
        let m = MobiusMap::new(vec![0.0, 0.0, -0.5], MobiusMap::random(3, 0.1, &mut rng).rotation().clone()).unwrap();
        let f = TestFunction::Product(vec![
            TestFunction::extremizer(m, &p).unwrap(),
            TestFunction::power(TestFunction::exp_harmonic(-1.3, axis.clone()).unwrap(), 1.5).unwrap(),
        ]);
        let Symmetry::Axial(axis) = f.symmetry() else { panic!("not axial") };
        assert!((axis[2].abs() - 1.0).abs() < 1e-15);
        for (rho, psi) in [(0.3f64, 0.2f64), (1.5, 2.0), (3.0, 0.01), (5.0, 3.0)] {
            let r = euclidean_radius(rho);
            let x = [r * psi.sin(), 0.0, r * psi.cos() * axis[2]];
            let a = f.log_abs(&x).unwrap();
            let b = f.log_abs_polar(3, rho, psi, Some(&axis));
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn norms_by_quadrature() {
        let cfg = NumericsConfig::default();
        for (n, alpha) in [(2, 2.0), (3, 1.5), (4, 3.0)] {
            let p = params(n, alpha);
            let one = bergman_norm_sq(&TestFunction::One, &p, &cfg).unwrap();
            assert!((one.value.value - 1.0).abs() < 1e-10);
            let mut rng = substream(2, n as u64);
            let g = TestFunction::extremizer(MobiusMap::random(n, 0.7, &mut rng), &p).unwrap();
            let ng = bergman_norm_sq(&g, &p, &cfg).unwrap();
            assert!((ng.value.value - 1.0).abs() < 1e-6, "n = {n}: {:?}", ng);
        }
    }

    #[test]
    fn extremizer_norm_by_sampling() {
        let cfg = NumericsConfig { samples: 200_000, ..Default::default() };
        let p = params(3, 2.0);
        let mut rng = substream(4, 0);
        let g = TestFunction::MobiusAction {
            base: Box::new(TestFunction::One),
            map: MobiusMap::random(3, 0.5, &mut rng),
            params: p,
        };
        let e = bergman_norm_sq(&g, &p, &cfg).unwrap();
        assert_eq!(e.method, crate::weights::NormMethod::MonteCarlo);
        assert!((e.value.value - 1.0).abs() < 3.0 * e.value.stderr.max(1e-3), "{e:?}");
    }

    #[test]
    fn quotient_of_one_on_centered_ball() {
        let cfg = NumericsConfig::default();
        let p = params(2, 2.0);
        let q = concentration_quotient(&TestFunction::One, &DomainSpec::CenteredBall { s: 4.0 * PI }, &p, &cfg).unwrap();
        assert!(q.quadrature);
        assert!((q.value.value - 0.5).abs() < 1e-8);
        let big = concentration_quotient(&TestFunction::One, &DomainSpec::CenteredBall { s: 1e12 }, &p, &cfg).unwrap();
        assert!((big.value.value - theta_n2(2.0, 1e12)).abs() < 1e-8);
    }

    #[test]
    fn monotone_and_scale_invariant_on_shared_samples() {
        let cfg = NumericsConfig { samples: 20_000, ..Default::default() };
        let p = params(3, 2.0);
        let sampler = WeightSampler::new(&p, &cfg);
        let samples = sampler.samples(cfg.samples, 5);
        let f = TestFunction::exp_harmonic(-1.0, vec![1.0, 0.0, 0.0]).unwrap();
        let small = DomainSpec::CenteredBall { s: 2.0 };
        let large = DomainSpec::CenteredBall { s: 8.0 };
        let a = quotient_from_samples(&f, &small, &sampler, &samples, &cfg).unwrap();
        let b = quotient_from_samples(&f, &large, &sampler, &samples, &cfg).unwrap();
        assert!(a.value.value <= b.value.value);
        let scaled = TestFunction::Product(vec![f.clone(), TestFunction::exp_harmonic(0.0, vec![1.0, 0.0, 0.0]).unwrap()]);
        let c = quotient_from_samples(&scaled, &small, &sampler, &samples, &cfg).unwrap();
        assert_eq!(a.value.value, c.value.value);
    }

    #[test]
    fn radial_profile_of_one() {
        let cfg = NumericsConfig::default();
        let p = params(3, 2.0);
        let theta = ThetaProfile::new(&p, &cfg).unwrap();
        let prof = superlevel_profile(&TestFunction::One, &p, &cfg, ProfilePath::Radial).unwrap();
        for s in [0.1, 1.0, 10.0, 100.0] {
            assert!((prof.i_n(s).value - theta.theta(s)).abs() < 1e-8);
            let u = prof.u_star(s);
            assert!((prof.mu(u) - s).abs() < 1e-8 * s);
            let h = 1e-4 * s;
            let d = (prof.i_n(s + h).value - prof.i_n(s - h).value) / (2.0 * h);
            assert!((d - u).abs() < 1e-5 * u.max(1e-3), "s = {s}");
        }
        let f = TestFunction::extremizer(MobiusMap::random(3, 0.5, &mut substream(1, 1)), &p).unwrap();
        assert!(matches!(
            superlevel_profile(&f, &p, &cfg, ProfilePath::Radial),
            Err(Error::NonMonotoneRadial)
        ));
    }

    #[test]
    fn decay_examples() {
        let p = params(3, 2.0);
        assert!(boundary_decay_check(&TestFunction::One, &p).unwrap().passed);
        let g = TestFunction::extremizer(
            MobiusMap::involution(vec![0.5, 0.0, 0.0]).unwrap(),
            &p,
        )
        .unwrap();
        assert!(boundary_decay_check(&g, &p).unwrap().passed);
        let e = TestFunction::exp_harmonic(1.0, vec![1.0, 0.0, 0.0]).unwrap();
        let rep = boundary_decay_check(&e, &p).unwrap();
        assert_eq!(rep.direction, vec![-1.0, 0.0, 0.0]);
        assert!(rep.passed);
    }

    #[test]
    fn mobius_action_identity_is_exact() {
        let cfg = NumericsConfig::default();
        let p = params(2, 2.0);
        let f = TestFunction::exp_harmonic(-0.5, vec![1.0, 0.0]).unwrap();
        let rep = certify_mobius_action(&f, &MobiusMap::identity(2), &p, &cfg).unwrap();
        assert_eq!(rep.norm_f.value.value, rep.norm_g.value.value);
        assert!(rep.passed);
    }
}
