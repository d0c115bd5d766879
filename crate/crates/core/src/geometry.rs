//! Poincaré ball primitives: the invariant measure, the hyperbolic Laplacian,
//! the Poisson kernel, Möbius self-maps, and volumes/perimeters of balls.
//!
//! Throughout, `dτ = 2ⁿ(1−|x|²)⁻ⁿ dV` and the hyperbolic distance from the
//! origin is `ρ = 2 atanh |x|`, so that `τ` is the Riemannian volume of the
//! metric of constant curvature −1.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::mc::{random_direction, Estimate};
use crate::specfun::{gamma, hyp2f1, SeriesTolerance};

/// Above this value of `r²` ball volumes are computed from the hyperbolic
/// radius instead of the hypergeometric series.
pub const SERIES_MAX_ARG: f64 = 0.9;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum()
}

fn check_inside(op: &'static str, x: &[f64]) -> Result<f64> {
    let r2 = norm_sq(x);
    if r2 < 1.0 {
        Ok(r2)
    } else {
        Err(domain(op, format!("|x| = {} is not below 1", r2.sqrt())))
    }
}

/// `1 - r²` without cancellation near `r = 1`.
pub fn one_minus_sq(r: f64) -> f64 {
    (1.0 - r) * (1.0 + r)
}

/// Hyperbolic distance from the origin, `2 atanh r`.
pub fn hyperbolic_radius(r: f64) -> f64 {
    2.0 * r.atanh()
}

/// Inverse of [`hyperbolic_radius`].
pub fn euclidean_radius(rho: f64) -> f64 {
    (0.5 * rho).tanh()
}

/// Hyperbolic distance between two points of the ball.
pub fn hyperbolic_distance(x: &[f64], y: &[f64]) -> f64 {
    let dx = one_minus_sq(norm_sq(x).sqrt());
    let dy = one_minus_sq(norm_sq(y).sqrt());
    let q = 2.0 * dist_sq(x, y) / (dx * dy);
    // acosh(1 + q) written to stay accurate for small q
    (q + (q * (q + 2.0)).sqrt()).ln_1p()
}

/// Surface area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Euclidean volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(1.0 + n as f64 / 2.0)
}

/// Density of the invariant measure with respect to Lebesgue measure.
pub fn tau_density(x: &[f64]) -> Result<f64> {
    let r2 = check_inside("tau_density", x)?;
    let n = x.len() as i32;
    Ok((2.0 / (1.0 - r2)).powi(n))
}

/// Poisson kernel `(1−|x|²)^{n−1} / |x−ζ|^{2n−2}` of the hyperbolic Laplacian.
pub fn poisson_kernel(x: &[f64], zeta: &[f64]) -> Result<f64> {
    let r2 = check_inside("poisson_kernel", x)?;
    if x.len() != zeta.len() {
        return Err(domain("poisson_kernel", "dimension mismatch"));
    }
    if (norm_sq(zeta) - 1.0).abs() > 1e-10 {
        return Err(domain("poisson_kernel", "zeta is not a unit vector"));
    }
    let m = x.len() as i32 - 1;
    Ok(((1.0 - r2) / dist_sq(x, zeta)).powi(m))
}

/// A Möbius self-map `x ↦ Q·σ_a(x)` of the unit ball, where `σ_a` is the
/// involution exchanging `0` and `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusMap {
    center: Vec<f64>,
    rotation: DMatrix<f64>,
}

impl MobiusMap {
    pub fn new(center: Vec<f64>, rotation: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty center".into()));
        }
        if norm_sq(&center).sqrt() >= 1.0 - 1e-12 {
            return Err(domain("MobiusMap", "center too close to the boundary"));
        }
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "rotation is {}x{}, expected {n}x{n}",
                rotation.nrows(),
                rotation.ncols()
            )));
        }
        let defect = (rotation.transpose() * &rotation - DMatrix::identity(n, n)).amax();
        if defect > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        Ok(Self { center, rotation })
    }

    /// The identity map. Since `σ_0(x) = −x`, it is stored as `a = 0`,
    /// `Q = −I`.
    pub fn identity(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            rotation: -DMatrix::identity(n, n),
        }
    }

    /// The bare involution `σ_a`.
    pub fn involution(center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        Self::new(center, DMatrix::identity(n, n))
    }

    /// Random map with `|a| ≤ max_norm` (uniform in the Euclidean ball of
    /// that radius) and Haar-distributed rotation.
    pub fn random<R: Rng + ?Sized>(n: usize, max_norm: f64, rng: &mut R) -> Self {
        let dir = random_direction(n, rng);
        let len = max_norm * rng.gen::<f64>().powf(1.0 / n as f64);
        let center = dir.into_iter().map(|d| d * len).collect();
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self {
            center,
            rotation: q,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn is_identity(&self) -> bool {
        self.center.iter().all(|c| *c == 0.0)
            && self.rotation == -DMatrix::identity(self.dim(), self.dim())
    }

    fn sigma(&self, x: &[f64]) -> Vec<f64> {
        let a = &self.center;
        let a2 = norm_sq(a);
        let xa = dist_sq(x, a);
        let denom = bracket_sq(x, a);
        a.iter()
            .zip(x)
            .map(|(ai, xi)| (ai * xa + (1.0 - a2) * (ai - xi)) / denom)
            .collect()
    }

    fn rotate(&self, v: &[f64], transpose: bool) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let q = if transpose {
                            self.rotation[(j, i)]
                        } else {
                            self.rotation[(i, j)]
                        };
                        q * v[j]
                    })
                    .sum()
            })
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_inside("mobius_apply", x)?;
        Ok(self.rotate(&self.sigma(x), false))
    }

    /// `m⁻¹(y) = σ_a(Qᵀ y)`.
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_inside("mobius_apply", y)?;
        Ok(self.sigma(&self.rotate(y, true)))
    }

    /// `1 − |m(x)|²`, computed as `(1−|a|²)(1−|x|²)/[x,a]²`.
    pub fn image_defect(&self, x: &[f64]) -> Result<f64> {
        let r2 = check_inside("mobius_apply", x)?;
        Ok(one_minus_sq(norm_sq(&self.center).sqrt()) * (1.0 - r2) / bracket_sq(x, &self.center))
    }

    /// Hyperbolic distance from the origin to `m(x)`, i.e. `d(x, a)`.
    pub fn image_hyperbolic_radius(&self, x: &[f64]) -> Result<f64> {
        check_inside("mobius_apply", x)?;
        Ok(hyperbolic_distance(x, &self.center))
    }

    /// Jacobian determinant `((1−|m(x)|²)/(1−|x|²))ⁿ`.
    pub fn jacobian(&self, x: &[f64]) -> Result<f64> {
        check_inside("mobius_jacobian", x)?;
        let a_def = one_minus_sq(norm_sq(&self.center).sqrt());
        Ok((a_def / bracket_sq(x, &self.center)).powi(self.dim() as i32))
    }
}

/// `[x,a]² = 1 − 2⟨x,a⟩ + |x|²|a|²`, written as a sum of nonnegative terms.
fn bracket_sq(x: &[f64], a: &[f64]) -> f64 {
    dist_sq(x, a) + (1.0 - norm_sq(x)) * (1.0 - norm_sq(a))
}

pub fn mobius_apply(m: &MobiusMap, x: &[f64]) -> Result<Vec<f64>> {
    m.apply(x)
}

pub fn mobius_jacobian(m: &MobiusMap, x: &[f64]) -> Result<f64> {
    m.jacobian(x)
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial profile `r ↦ u(r)` with optional analytic derivatives.
#[derive(Clone)]
pub struct RadialFunction {
    value: Scalar,
    d1: Option<Scalar>,
    d2: Option<Scalar>,
}

impl std::fmt::Debug for RadialFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialFunction")
            .field("d1", &self.d1.is_some())
            .field("d2", &self.d2.is_some())
            .finish()
    }
}

const RADIAL_FD_STEP: f64 = 1e-4;

impl RadialFunction {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            d1: None,
            d2: None,
        }
    }

    pub fn with_derivatives(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            d1: Some(Arc::new(d1)),
            d2: Some(Arc::new(d2)),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    fn step(r: f64) -> f64 {
        RADIAL_FD_STEP.min(0.5 * (1.0 - r)).min(if r > 0.0 { 0.5 * r } else { 1.0 })
    }

    pub fn d1(&self, r: f64) -> f64 {
        match &self.d1 {
            Some(d) => d(r),
            None if r == 0.0 => 0.0,
            None => {
                let h = Self::step(r);
                (self.value(r + h) - self.value(r - h)) / (2.0 * h)
            }
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match &self.d2 {
            Some(d) => d(r),
            None => {
                let h = Self::step(r);
                // even extension at the origin
                let below = if r == 0.0 { self.value(h) } else { self.value(r - h) };
                (self.value(r + h) - 2.0 * self.value(r) + below) / (h * h)
            }
        }
    }
}

/// Hyperbolic Laplacian of a radial function in dimension `n`. At the origin
/// the removable singularity is resolved as `n·u″(0)`.
pub fn laplacian_h_radial(n: usize, u: &RadialFunction, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(domain("laplacian_h_radial", format!("r = {r} outside [0, 1)")));
    }
    if r == 0.0 {
        return Ok(n as f64 * u.d2(0.0));
    }
    let nf = n as f64;
    let d = one_minus_sq(r);
    let (u1, u2) = (u.d1(r), u.d2(r));
    Ok(d * d * (u2 + (nf - 1.0) * u1 / r) + 2.0 * (nf - 2.0) * d * r * u1)
}

/// Finite-difference hyperbolic Laplacian at `x`, one Richardson step on
/// the step sizes `h` and `h/2`.
pub fn laplacian_h_fd(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<f64> {
    let n = x.len();
    let r2 = norm_sq(x);
    for i in 0..n {
        for s in [-h, h] {
            let mut p = x.to_vec();
            p[i] += s;
            let q = norm_sq(&p);
            if q >= 1.0 || r2 >= 1.0 {
                return Err(Error::StencilOutsideBall { norm: q.sqrt().max(r2.sqrt()) });
            }
        }
    }
    let f0 = f(x);
    let parts = |h: f64| {
        let mut lap = 0.0;
        let mut radial = 0.0;
        let mut p = x.to_vec();
        for i in 0..n {
            p[i] = x[i] + h;
            let fp = f(&p);
            p[i] = x[i] - h;
            let fm = f(&p);
            p[i] = x[i];
            lap += (fp - 2.0 * f0 + fm) / (h * h);
            radial += x[i] * (fp - fm) / (2.0 * h);
        }
        (lap, radial)
    };
    let (l1, g1) = parts(h);
    let (l2, g2) = parts(0.5 * h);
    let lap = (4.0 * l2 - l1) / 3.0;
    let radial = (4.0 * g2 - g1) / 3.0;
    let d = 1.0 - r2;
    Ok(d * d * lap + 2.0 * (n as f64 - 2.0) * d * radial)
}

/// `F[n/2, n, (n+2)/2; x]`, the hypergeometric factor of the ball volume,
/// for `x ∈ [0, 1)`.
pub fn volume_hyp(n: usize, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(domain("volume_hyp", format!("x = {x} outside [0, 1)")));
    }
    let nf = n as f64;
    let tol = SeriesTolerance::default();
    if x <= 0.5 {
        hyp2f1(nf / 2.0, nf, 1.0 + nf / 2.0, x, tol)
    } else if x <= SERIES_MAX_ARG {
        Ok((1.0 - x).powf(1.0 - nf) * hyp2f1(1.0, 1.0 - nf / 2.0, 1.0 + nf / 2.0, x, tol)?)
    } else {
        let r = x.sqrt();
        let v = ball_volume_hyperbolic(n, hyperbolic_radius(r))?;
        Ok(v * gamma(1.0 + nf / 2.0) / (2f64.powf(nf) * PI.powf(nf / 2.0) * r.powf(nf)))
    }
}

/// `∫₀^ρ sinh^m`, by the reduction formula. Accurate for `ρ ≳ 1`.
pub(crate) fn sinh_power_integral(m: usize, rho: f64) -> f64 {
    let (s, c) = (rho.sinh(), rho.cosh());
    let mut prev2 = rho;
    let mut prev1 = c - 1.0;
    if m == 0 {
        return prev2;
    }
    let mut sp = 1.0; // sinh^{k-1}
    for k in 2..=m {
        let kf = k as f64;
        sp *= s;
        let next = sp * c / kf - (kf - 1.0) / kf * prev2;
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

/// `h_m(ρ) = sinh^{-m}(ρ) ∫₀^ρ sinh^m`, computed by the normalized reduction
/// formula so that it stays finite for large `ρ`. Accurate for `ρ ≳ 1`.
pub(crate) fn sinh_power_ratio(m: usize, rho: f64) -> f64 {
    let s = rho.sinh();
    let coth = 1.0 / rho.tanh();
    let inv_s2 = 1.0 / (s * s);
    let mut prev2 = rho; // h_0
    let mut prev1 = (0.5 * rho).tanh(); // h_1
    if m == 0 {
        return prev2;
    }
    for k in 2..=m {
        let kf = k as f64;
        let next = coth / kf - (kf - 1.0) / kf * inv_s2 * prev2;
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

/// Hyperbolic volume of the centered ball of Euclidean radius `r`.
pub fn ball_volume(n: usize, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(domain("ball_volume", format!("r = {r} outside [0, 1)")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let x = r * r;
    if x > SERIES_MAX_ARG {
        return ball_volume_hyperbolic(n, hyperbolic_radius(r));
    }
    Ok(2f64.powf(nf) * PI.powf(nf / 2.0) * volume_hyp(n, x)? * r.powf(nf)
        / gamma(1.0 + nf / 2.0))
}

/// Hyperbolic volume of the centered ball of hyperbolic radius `ρ`.
pub fn ball_volume_hyperbolic(n: usize, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(domain("ball_volume", format!("rho = {rho} is negative")));
    }
    let r = euclidean_radius(rho);
    if r * r <= SERIES_MAX_ARG {
        return ball_volume(n, r);
    }
    Ok(sphere_area(n) * sinh_power_integral(n - 1, rho))
}

/// Hyperbolic perimeter of the centered ball of Euclidean radius `r`:
/// `n 2^{n−1} π^{n/2} r^{n−1} (1−r²)^{1−n} / Γ(1+n/2)`.
pub fn ball_perimeter(n: usize, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(domain("ball_perimeter", format!("r = {r} outside [0, 1)")));
    }
    let nf = n as f64;
    Ok(nf * 2f64.powf(nf - 1.0) * PI.powf(nf / 2.0) * r.powf(nf - 1.0)
        * one_minus_sq(r).powf(1.0 - nf)
        / gamma(1.0 + nf / 2.0))
}

/// Perimeter as a function of the hyperbolic radius, `|S^{n−1}| sinh^{n−1} ρ`.
pub fn ball_perimeter_hyperbolic(n: usize, rho: f64) -> f64 {
    sphere_area(n) * rho.sinh().powi(n as i32 - 1)
}

/// Hyperbolic radius of the centered ball of measure `s`.
///
/// Safeguarded Newton iteration on `V(ρ) = s` with `V′(ρ) = P(ρ)`, inside a
/// bracket obtained by doubling.
pub fn hyperbolic_radius_from_volume(n: usize, s: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let vol = |rho: f64| ball_volume_hyperbolic(n, rho).unwrap_or(f64::INFINITY);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while vol(hi) < s {
        lo = hi;
        hi *= 2.0;
    }
    // start from the small-ball asymptotics when it lands in the bracket
    let guess = (n as f64 * s / sphere_area(n)).powf(1.0 / n as f64);
    let mut rho = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let f = vol(rho) - s;
        if f == 0.0 {
            return rho;
        }
        if f > 0.0 {
            hi = rho;
        } else {
            lo = rho;
        }
        let mut next = rho - f / ball_perimeter_hyperbolic(n, rho);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - rho).abs() <= 4.0 * f64::EPSILON * rho;
        rho = next;
        if done || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    rho
}

/// Euclidean radius of the centered ball of measure `s` (the inverse of
/// [`ball_volume`]).
pub fn radius_from_volume(n: usize, s: f64) -> f64 {
    euclidean_radius(hyperbolic_radius_from_volume(n, s))
}

/// `v′(s)` for `v = radius_from_volume`, expressed through `v`.
pub fn radius_derivative(n: usize, v: f64) -> f64 {
    let nf = n as f64;
    gamma(1.0 + nf / 2.0) * one_minus_sq(v).powf(nf)
        / (nf * 2f64.powf(nf) * PI.powf(nf / 2.0) * v.powf(nf - 1.0))
}

/// `v″(s)`, expressed through `v`.
pub fn radius_second_derivative(n: usize, v: f64) -> f64 {
    let nf = n as f64;
    let d1 = radius_derivative(n, v);
    d1 * d1 * ((1.0 - nf) / v - 2.0 * nf * v / one_minus_sq(v))
}

/// Isoperimetric profile `Υ(s) = s / P²` of centered balls.
pub fn isoperimetric_profile(n: usize, s: f64) -> f64 {
    let p = ball_perimeter_hyperbolic(n, hyperbolic_radius_from_volume(n, s));
    s / (p * p)
}

/// The same profile through its closed expression in `v = S(s)`.
pub fn isoperimetric_profile_closed(n: usize, s: f64) -> Result<f64> {
    let nf = n as f64;
    let rho = hyperbolic_radius_from_volume(n, s);
    let v = euclidean_radius(rho);
    let defect = 1.0 / (0.5 * rho).cosh().powi(2);
    Ok(defect.powf(2.0 * nf - 2.0) * gamma(nf / 2.0) * volume_hyp(n, v * v)?
        / (nf * 2f64.powf(nf - 1.0) * PI.powf(nf / 2.0) * v.powf(nf - 2.0)))
}

/// A centered ball described by both its Euclidean radius and its measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDomain {
    pub euclidean_radius: f64,
    pub hyperbolic_measure: f64,
}

impl BallDomain {
    pub fn from_radius(n: usize, r: f64) -> Result<Self> {
        Ok(Self {
            euclidean_radius: r,
            hyperbolic_measure: ball_volume(n, r)?,
        })
    }

    pub fn from_measure(n: usize, s: f64) -> Self {
        Self {
            euclidean_radius: radius_from_volume(n, s),
            hyperbolic_measure: s.max(0.0),
        }
    }
}

/// Draws a hyperbolic radius from the `τ`-uniform law on the shell
/// `lo ≤ ρ < hi`, by inverting the volume function.
fn sample_shell_radius<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let v_lo = ball_volume_hyperbolic(n, lo).unwrap_or(0.0);
    let v_hi = ball_volume_hyperbolic(n, hi).unwrap_or(f64::INFINITY);
    let u: f64 = rng.gen();
    hyperbolic_radius_from_volume(n, v_lo + u * (v_hi - v_lo)).clamp(lo, hi)
}

/// A geodesic ball with hyperbolic center `center` and hyperbolic radius
/// `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl HyperbolicBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_inside("HyperbolicBall", &center)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        norm_sq(x) < 1.0 && hyperbolic_distance(x, &self.center) < self.radius
    }

    /// Signed hyperbolic distance to the boundary sphere (negative inside).
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        hyperbolic_distance(x, &self.center) - self.radius
    }

    pub fn measure(&self) -> f64 {
        ball_volume_hyperbolic(self.dim(), self.radius).unwrap_or(f64::INFINITY)
    }

    pub fn perimeter(&self) -> f64 {
        ball_perimeter_hyperbolic(self.dim(), self.radius)
    }

    fn place(&self, rho: f64, dir: &[f64]) -> Vec<f64> {
        let r = euclidean_radius(rho);
        let x0: Vec<f64> = dir.iter().map(|d| d * r).collect();
        MobiusMap {
            center: self.center.clone(),
            rotation: DMatrix::identity(self.dim(), self.dim()),
        }
        .sigma(&x0)
    }

    /// A `τ`-uniform point of the shell `radius + inner ≤ d(·, center) <
    /// radius + outer`.
    pub fn sample_shell<R: Rng + ?Sized>(&self, inner: f64, outer: f64, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let rho = sample_shell_radius(n, (self.radius + inner).max(0.0), self.radius + outer, rng);
        let dir = random_direction(n, rng);
        self.place(rho, &dir)
    }

    /// A `τ`-uniform point of the ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_shell(-self.radius, 0.0, rng)
    }
}

/// Measure and collar-perimeter estimate for a union of geodesic balls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurePerimeter {
    pub measure: Estimate,
    pub perimeter: Estimate,
}

/// Estimates `τ(Ω)` and the perimeter of `Ω = ⋃ Bᵢ` by the collar method:
/// `P ≈ τ({0 < d(·,Ω) < ε}) / ε`. The collar is covered by the outer shells
/// of the balls, sampled uniformly and weighted by inverse multiplicity.
pub fn ball_union_measure_perimeter<R: Rng + ?Sized>(
    balls: &[HyperbolicBall],
    eps: f64,
    samples: usize,
    rng: &mut R,
) -> MeasurePerimeter {
    let contained = |x: &[f64]| balls.iter().filter(|b| b.contains(x)).count();
    let mut measure = 0.0;
    let mut measure_var = 0.0;
    let mut collar = 0.0;
    let mut collar_var = 0.0;
    for ball in balls {
        let vol = ball.measure();
        let shell = ball_volume_hyperbolic(ball.dim(), ball.radius + eps).unwrap_or(f64::INFINITY) - vol;
        let mut acc = Vec::with_capacity(samples);
        let mut acc_shell = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x = ball.sample(rng);
            acc.push(1.0 / contained(&x).max(1) as f64);
            let y = ball.sample_shell(0.0, eps, rng);
            let inside_other = contained(&y) > 0;
            let cover = balls
                .iter()
                .filter(|b| {
                    let d = b.signed_distance(&y);
                    (0.0..eps).contains(&d)
                })
                .count()
                .max(1);
            acc_shell.push(if inside_other { 0.0 } else { 1.0 / cover as f64 });
        }
        let m = crate::mc::mean_and_stderr(&acc);
        let c = crate::mc::mean_and_stderr(&acc_shell);
        measure += vol * m.value;
        measure_var += (vol * m.stderr).powi(2);
        collar += shell * c.value;
        collar_var += (shell * c.stderr).powi(2);
    }
    MeasurePerimeter {
        measure: Estimate {
            value: measure,
            stderr: measure_var.sqrt(),
        },
        perimeter: Estimate {
            value: collar / eps,
            stderr: collar_var.sqrt() / eps,
        },
    }
}

/// Monte Carlo estimate of `τ({x : inside(x)})` for a set contained in the
/// centered ball of hyperbolic radius `rho_max`.
pub fn tau_measure_mc<R: Rng + ?Sized>(
    n: usize,
    inside: impl Fn(&[f64]) -> bool,
    rho_max: f64,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let total = ball_volume_hyperbolic(n, rho_max).unwrap_or(f64::INFINITY);
    let origin = HyperbolicBall {
        center: vec![0.0; n],
        radius: rho_max,
    };
    let hits: Vec<f64> = (0..samples)
        .map(|_| if inside(&origin.sample(rng)) { 1.0 } else { 0.0 })
        .collect();
    let e = crate::mc::mean_and_stderr(&hits);
    Estimate {
        value: total * e.value,
        stderr: total * e.stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::substream;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn tau_density_examples() {
        assert_eq!(tau_density(&[0.0, 0.0]).unwrap(), 4.0);
        assert_eq!(tau_density(&[0.0, 0.0, 0.0]).unwrap(), 8.0);
        assert!((tau_density(&[0.5, 0.0]).unwrap() - 4.0 / 0.5625).abs() < 1e-12);
        assert!(tau_density(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn poisson_kernel_examples() {
        let zeta = [1.0, 0.0];
        assert_eq!(poisson_kernel(&[0.0, 0.0], &zeta).unwrap(), 1.0);
        assert!((poisson_kernel(&[0.5, 0.0], &zeta).unwrap() - 3.0).abs() < 1e-12);
        let z3 = [0.0, 1.0, 0.0];
        let p = poisson_kernel(&[0.0, 0.3, 0.0], &z3).unwrap();
        assert!(rel(p, (1.3f64 / 0.7).powi(2)) < 1e-13);
        assert!(poisson_kernel(&[0.0, 0.0], &[0.5, 0.0]).is_err());
    }

    #[test]
    fn involution_properties() {
        let a = vec![0.3, -0.2, 0.4];
        let m = MobiusMap::involution(a.clone()).unwrap();
        let at0 = m.apply(&[0.0; 3]).unwrap();
        assert!(dist_sq(&at0, &a) < 1e-30);
        assert!(norm_sq(&m.apply(&a).unwrap()) < 1e-30);
        let x = [0.1, 0.5, -0.6];
        let back = m.apply(&m.apply(&x).unwrap()).unwrap();
        assert!(dist_sq(&back, &x) < 1e-28);
        let id = MobiusMap::identity(3);
        assert!(id.is_identity());
        assert_eq!(id.apply(&x).unwrap(), x.to_vec());
        let flip = MobiusMap::involution(vec![0.0; 3]).unwrap();
        assert_eq!(flip.apply(&x).unwrap(), x.iter().map(|v| -v).collect::<Vec<_>>());
        assert_eq!(id.jacobian(&x).unwrap(), 1.0);
    }

    #[test]
    fn random_map_inverse_and_defect() {
        let mut rng = substream(11, 0);
        for n in 2..6 {
            let m = MobiusMap::random(n, 0.7, &mut rng);
            let x: Vec<f64> = random_direction(n, &mut rng).iter().map(|d| d * 0.8).collect();
            let y = m.apply(&x).unwrap();
            let back = m.apply_inverse(&y).unwrap();
            assert!(dist_sq(&back, &x) < 1e-26);
            assert!(rel(m.image_defect(&x).unwrap(), 1.0 - norm_sq(&y)) < 1e-12);
            let rho = m.image_hyperbolic_radius(&x).unwrap();
            assert!(rel(rho, hyperbolic_radius(norm_sq(&y).sqrt())) < 1e-10);
            assert!(!m.is_identity());
        }
    }

    #[test]
    fn mobius_map_validation() {
        assert!(MobiusMap::new(vec![1.0, 0.0], DMatrix::identity(2, 2)).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(MobiusMap::new(vec![0.0, 0.0], bad).is_err());
        assert!(MobiusMap::new(vec![0.0, 0.0], DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn jacobian_at_origin() {
        let mut rng = substream(3, 0);
        let m = MobiusMap::random(3, 0.6, &mut rng);
        let a2 = norm_sq(m.center());
        assert!(rel(m.jacobian(&[0.0; 3]).unwrap(), (1.0 - a2).powi(3)) < 1e-14);
    }

    #[test]
    fn radial_laplacian_examples() {
        let c = RadialFunction::new(|_| 3.0);
        assert_eq!(laplacian_h_radial(3, &c, 0.4).unwrap(), 0.0);
        let lg = RadialFunction::with_derivatives(
            |r| (1.0 - r * r).ln(),
            |r| -2.0 * r / (1.0 - r * r),
            |r| -2.0 * (1.0 + r * r) / (1.0 - r * r).powi(2),
        );
        for r in [0.0, 0.1, 0.5, 0.9] {
            assert!((laplacian_h_radial(2, &lg, r).unwrap() + 4.0).abs() < 1e-12);
        }
        let sq = RadialFunction::new(|r| r * r);
        let exact = |r: f64| {
            let d = 1.0 - r * r;
            d * d * 6.0 + 2.0 * d * r * 2.0 * r
        };
        assert!((laplacian_h_radial(3, &sq, 0.5).unwrap() - exact(0.5)).abs() < 1e-6);
        assert!((laplacian_h_radial(3, &sq, 0.0).unwrap() - 6.0).abs() < 1e-6);
        assert!(laplacian_h_radial(3, &sq, 1.0).is_err());
    }

    #[test]
    fn fd_laplacian_examples() {
        let one = |_: &[f64]| 1.0;
        assert_eq!(laplacian_h_fd(&one, &[0.1, 0.2], 1e-3).unwrap(), 0.0);
        let sq = |x: &[f64]| norm_sq(x);
        let x = [0.5, 0.0, 0.0];
        let radial = laplacian_h_radial(3, &RadialFunction::new(|r| r * r), 0.5).unwrap();
        assert!((laplacian_h_fd(&sq, &x, 1e-3).unwrap() - radial).abs() < 1e-6);
        assert!(matches!(
            laplacian_h_fd(&sq, &[0.9995, 0.0], 1e-3),
            Err(Error::StencilOutsideBall { .. })
        ));
    }

    #[test]
    fn poisson_kernel_is_m_harmonic() {
        let mut rng = substream(5, 0);
        for n in 2..6 {
            let zeta = random_direction(n, &mut rng);
            let x: Vec<f64> = random_direction(n, &mut rng).iter().map(|d| d * 0.5).collect();
            let f = |p: &[f64]| poisson_kernel(p, &zeta).unwrap();
            let lap = laplacian_h_fd(&f, &x, 1e-3).unwrap();
            assert!(lap.abs() < 1e-5, "n = {n}: {lap}");
        }
    }

    #[test]
    fn laplacian_of_mobius_coordinates() {
        let mut rng = substream(6, 0);
        for n in 2..6 {
            let m = MobiusMap::random(n, 0.5, &mut rng);
            let x: Vec<f64> = random_direction(n, &mut rng).iter().map(|d| d * 0.4).collect();
            let y = m.apply(&x).unwrap();
            let defect = 1.0 - norm_sq(&y);
            for i in 0..n {
                let f = |p: &[f64]| m.apply(p).unwrap()[i];
                let lap = laplacian_h_fd(&f, &x, 1e-3).unwrap();
                let want = 2.0 * (n as f64 - 2.0) * defect * y[i];
                assert!((lap - want).abs() < 1e-5, "n = {n}, i = {i}: {lap} vs {want}");
            }
        }
    }

    #[test]
    fn volume_and_perimeter_examples() {
        assert!(rel(ball_volume(2, 0.5).unwrap(), 4.0 * PI / 3.0) < 1e-14);
        assert!(rel(ball_perimeter(2, 0.5).unwrap(), 8.0 * PI / 3.0) < 1e-14);
        for n in 2..7 {
            assert_eq!(ball_volume(n, 0.0).unwrap(), 0.0);
            assert_eq!(ball_perimeter(n, 0.0).unwrap(), 0.0);
        }
        assert!(ball_volume(3, 1.0).is_err());
        // n = 2 closed form across all three evaluation branches
        for r in [0.3, 0.8, 0.99, 0.999_999] {
            assert!(rel(ball_volume(2, r).unwrap(), 4.0 * PI * r * r / (1.0 - r * r)) < 1e-9);
        }
    }

    #[test]
    fn volume_branches_agree() {
        for n in 2..7 {
            for x in [0.5, SERIES_MAX_ARG] {
                let r = f64::sqrt(x);
                let series = ball_volume(n, r).unwrap();
                let hyper = sphere_area(n) * sinh_power_integral(n - 1, hyperbolic_radius(r));
                assert!(rel(series, hyper) < 1e-12, "n = {n}, x = {x}");
            }
            let x = 0.5;
            let raw = hyp2f1(n as f64 / 2.0, n as f64, 1.0 + n as f64 / 2.0, x, Default::default()).unwrap();
            let euler = (1.0 - x).powf(1.0 - n as f64)
                * hyp2f1(1.0, 1.0 - n as f64 / 2.0, 1.0 + n as f64 / 2.0, x, Default::default()).unwrap();
            assert!(rel(raw, euler) < 1e-13);
        }
    }

    #[test]
    fn perimeter_is_derivative_of_volume() {
        for n in 2..7 {
            for rho in [0.3, 1.5, 4.0] {
                let h = 1e-5;
                let fd = (ball_volume_hyperbolic(n, rho + h).unwrap()
                    - ball_volume_hyperbolic(n, rho - h).unwrap())
                    / (2.0 * h);
                assert!(rel(fd, ball_perimeter_hyperbolic(n, rho)) < 1e-7);
                let r = euclidean_radius(rho);
                assert!(rel(ball_perimeter(n, r).unwrap(), ball_perimeter_hyperbolic(n, rho)) < 1e-12);
            }
        }
    }

    #[test]
    fn sinh_ratio_matches_integral() {
        for m in 0..6 {
            for rho in [1.0, 3.0, 10.0] {
                let direct = sinh_power_integral(m, rho) / rho.sinh().powi(m as i32);
                assert!(rel(sinh_power_ratio(m, rho), direct) < 1e-12);
            }
        }
    }

    #[test]
    fn radius_from_volume_round_trip() {
        assert_eq!(radius_from_volume(3, 0.0), 0.0);
        assert!((radius_from_volume(2, 4.0 * PI / 3.0) - 0.5).abs() < 1e-14);
        for n in 2..7 {
            for i in 0..100 {
                let s = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
                let r = radius_from_volume(n, s);
                assert!(rel(ball_volume(n, r).unwrap(), s) < 1e-10, "n = {n}, s = {s}");
            }
        }
    }

    #[test]
    fn radius_derivative_matches_fd() {
        for n in 2..6 {
            for s in [0.1, 1.0, 10.0, 50.0] {
                let h = 1e-4 * s;
                let fd = (radius_from_volume(n, s + h) - radius_from_volume(n, s - h)) / (2.0 * h);
                let v = radius_from_volume(n, s);
                assert!(rel(radius_derivative(n, v), fd) < 1e-6);
            }
        }
    }

    #[test]
    fn profile_n2_closed_form() {
        for i in 0..100 {
            let s = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
            assert!(rel(isoperimetric_profile(2, s), 1.0 / (4.0 * PI + s)) < 1e-10);
        }
    }

    #[test]
    fn profile_two_formulas_agree() {
        for n in 2..7 {
            for s in [1e-3, 0.1, 10.0, 1e3] {
                let a = isoperimetric_profile(n, s);
                let b = isoperimetric_profile_closed(n, s).unwrap();
                assert!(rel(a, b) < 1e-9, "n = {n}, s = {s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ball_domain_consistency() {
        let b = BallDomain::from_radius(4, 0.7).unwrap();
        let c = BallDomain::from_measure(4, b.hyperbolic_measure);
        assert!((c.euclidean_radius - 0.7).abs() < 1e-13);
    }

    #[test]
    fn shell_sampling_respects_radii() {
        let mut rng = substream(9, 0);
        let ball = HyperbolicBall::new(vec![0.3, 0.1, 0.0], 1.2).unwrap();
        for _ in 0..200 {
            let x = ball.sample_shell(0.0, 0.01, &mut rng);
            let d = ball.signed_distance(&x);
            assert!((-1e-9..0.01 + 1e-9).contains(&d));
            let y = ball.sample(&mut rng);
            assert!(ball.signed_distance(&y) < 1e-9);
        }
    }

    #[test]
    fn collar_perimeter_of_single_ball() {
        let mut rng = substream(10, 0);
        let ball = HyperbolicBall::new(vec![0.0, 0.2, 0.0], 1.0).unwrap();
        let est = ball_union_measure_perimeter(std::slice::from_ref(&ball), 1e-3, 2000, &mut rng);
        assert!(rel(est.measure.value, ball.measure()) < 1e-12);
        assert!(rel(est.perimeter.value, ball.perimeter()) < 5e-3);
    }
}
