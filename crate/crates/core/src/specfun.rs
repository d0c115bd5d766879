//! Special functions: Pochhammer symbols, Gamma, the Gauss series and the
//! three-over-two series, and modified Bessel functions of half-integer order.
//!
//! Only real arguments are supported. Hypergeometric series are summed
//! directly on `[0, 1)`; no analytic continuation is attempted. Callers that
//! need `₂F₁` close to 1 apply the Euler transformation themselves.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest argument accepted by [`bessel_i_half`] and [`bessel_i`].
pub const BESSEL_I_MAX_ARG: f64 = 700.0;

/// Stopping rule for the hypergeometric series.
///
/// A series stops once the geometric tail bound falls below
/// `rel_eps * |partial sum|` on three consecutive terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    pub rel_eps: f64,
    pub max_terms: usize,
}

impl SeriesTolerance {
    pub fn new(rel_eps: f64, max_terms: usize) -> Result<Self> {
        if !(rel_eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "series rel_eps must be positive, got {rel_eps}"
            )));
        }
        if max_terms < 16 {
            return Err(Error::InvalidParameter(format!(
                "series max_terms must be at least 16, got {max_terms}"
            )));
        }
        Ok(Self { rel_eps, max_terms })
    }
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self {
            rel_eps: 1e-16,
            max_terms: 200_000,
        }
    }
}

/// Parameters of the series `F[a, b, c; u, v; t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypParams32 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub u: f64,
    pub v: f64,
}

impl HypParams32 {
    pub fn new(a: f64, b: f64, c: f64, u: f64, v: f64) -> Result<Self> {
        for (name, x) in [("u", u), ("v", v)] {
            if is_nonpositive_integer(x) {
                return Err(domain(
                    "hyp3f2",
                    format!("denominator parameter {name} = {x} is a nonpositive integer"),
                ));
            }
        }
        Ok(Self { a, b, c, u, v })
    }

    /// The parameters appearing in the radial weight of dimension `n`:
    /// `a = b = 1`, `c = 2 - n/2`, `u = 2`, `v = 1 + n/2`.
    pub fn weight_exponent(n: usize) -> Self {
        let h = n as f64 / 2.0;
        Self {
            a: 1.0,
            b: 1.0,
            c: 2.0 - h,
            u: 2.0,
            v: 1.0 + h,
        }
    }

    /// Exponent `d` in the algebraic decay `term_k ~ k^d` at `t = 1`.
    pub fn decay_exponent(&self) -> f64 {
        self.a + self.b + self.c - self.u - self.v - 1.0
    }

    fn terminates(&self) -> bool {
        is_nonpositive_integer(self.a) || is_nonpositive_integer(self.b) || is_nonpositive_integer(self.c)
    }

    fn term_ratio(&self, k: f64) -> f64 {
        (self.a + k) * (self.b + k) * (self.c + k) / ((k + 1.0) * (self.u + k) * (self.v + k))
    }
}

pub(crate) fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

/// Rising factorial `a (a+1) ... (a+k-1)`.
pub fn pochhammer(a: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (a + j as f64))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    LANCZOS_COEF[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS_COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0))
}

/// Gamma function (Lanczos approximation, reflection below 1/2).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        if x.fract() == 0.0 {
            return f64::NAN;
        }
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
    }
}

/// Natural log of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
    }
}

/// Sums `Σ term_k t^k` where `term_{k+1}/term_k = ratio(k)` and `term_0 = 1`.
///
/// `k_trust` is the index beyond which the ratio sequence is monotone, so the
/// geometric tail bound can be used.
fn sum_hypergeometric(
    ratio: impl Fn(f64) -> f64,
    t: f64,
    k_trust: usize,
    tol: SeriesTolerance,
    context: &'static str,
) -> Result<f64> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut quiet = 0;
    for k in 0..tol.max_terms {
        let r = ratio(k as f64) * t;
        term *= r;
        if term == 0.0 {
            return Ok(sum);
        }
        sum += term;
        if k < k_trust {
            continue;
        }
        let rho = r.abs().max(t.abs());
        let tail = if rho < 1.0 {
            term.abs() * rho / (1.0 - rho)
        } else {
            f64::INFINITY
        };
        if tail <= tol.rel_eps * sum.abs() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence {
        context,
        max_terms: tol.max_terms,
    })
}

fn trust_index(params: &[f64]) -> usize {
    params.iter().fold(0.0_f64, |m, p| m.max(p.abs())).ceil() as usize + 2
}

/// Gauss series `F[a, b, c; t] = Σ (a)_k (b)_k / (k! (c)_k) t^k` for `|t| < 1`.
pub fn hyp2f1(a: f64, b: f64, c: f64, t: f64, tol: SeriesTolerance) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(domain("hyp2f1", format!("c = {c} is a nonpositive integer")));
    }
    if !(t.abs() < 1.0) {
        return Err(domain("hyp2f1", format!("|t| = {} is not below 1", t.abs())));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    sum_hypergeometric(
        |k| (a + k) * (b + k) / ((k + 1.0) * (c + k)),
        t,
        trust_index(&[a, b, c]),
        tol,
        "hyp2f1",
    )
}

/// Three-over-two series `F[a, b, c; u, v; t]` for `t ∈ [0, 1]`.
///
/// At `t = 1` the series is summed only when it terminates or when its terms
/// decay at least like `k^-2`; the limit is then obtained by Richardson
/// extrapolation of partial sums over the known algebraic tail exponents.
pub fn hyp3f2(p: HypParams32, t: f64, tol: SeriesTolerance) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain("hyp3f2", format!("t = {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    if t < 1.0 {
        return sum_hypergeometric(
            |k| p.term_ratio(k),
            t,
            trust_index(&[p.a, p.b, p.c, p.u, p.v]),
            tol,
            "hyp3f2",
        );
    }
    if p.terminates() {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..tol.max_terms {
            term *= p.term_ratio(k as f64);
            if term == 0.0 {
                return Ok(sum);
            }
            sum += term;
        }
        return Err(Error::NonConvergence {
            context: "hyp3f2 (terminating)",
            max_terms: tol.max_terms,
        });
    }
    let d = p.decay_exponent();
    if d > -2.0 {
        return Err(domain(
            "hyp3f2",
            format!("t = 1 requires term decay k^d with d <= -2, got d = {d}"),
        ));
    }
    hyp3f2_at_one(p, d, tol)
}

fn hyp3f2_at_one(p: HypParams32, d: f64, tol: SeriesTolerance) -> Result<f64> {
    const BASE_TERMS: usize = 512;
    const LEVELS: usize = 6;
    let needed = BASE_TERMS << (LEVELS - 1);
    if needed > tol.max_terms {
        return Err(Error::NonConvergence {
            context: "hyp3f2 at t = 1",
            max_terms: tol.max_terms,
        });
    }
    // partial sums S_K for K = BASE_TERMS * 2^i
    let mut partial = Vec::with_capacity(LEVELS);
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut next = BASE_TERMS;
    for k in 0..needed {
        sum += term;
        if k + 1 == next {
            partial.push(sum);
            next *= 2;
        }
        term *= p.term_ratio(k as f64);
    }
    // S_K - F ~ Σ_j A_j K^{d+1-j}; eliminate the leading exponents in turn.
    let mut table = partial;
    for j in 0..LEVELS - 1 {
        let q = -(d + 1.0) + j as f64;
        let f = 2f64.powf(q);
        table = table
            .windows(2)
            .map(|w| (f * w[1] - w[0]) / (f - 1.0))
            .collect();
    }
    Ok(table[0])
}

fn k0_k1(t: f64) -> (f64, f64) {
    if t <= 2.0 {
        let y = t * t / 4.0;
        let ln_half = (t / 2.0).ln();
        let i0 = bessel_i_series(0.0, t);
        let i1 = bessel_i_series(1.0, t);
        // K0 = -(ln(t/2) + γ) I0 + Σ_{k≥1} H_k y^k / (k!)^2
        let mut k0 = -(ln_half + EULER_GAMMA) * i0;
        let mut term = 1.0;
        let mut harmonic = 0.0;
        // K1 = 1/t + ln(t/2) I1 - (t/4) Σ_k (ψ(k+1) + ψ(k+2)) y^k / (k! (k+1)!)
        let mut k1_sum = 0.0;
        let mut term1 = 1.0;
        for k in 0..60 {
            let kf = k as f64;
            if k > 0 {
                term *= y / (kf * kf);
                harmonic += 1.0 / kf;
                k0 += harmonic * term;
                term1 *= y / (kf * (kf + 1.0));
            }
            let psi_sum = 2.0 * (harmonic - EULER_GAMMA) + 1.0 / (kf + 1.0);
            k1_sum += psi_sum * term1;
            if term1 < 1e-18 && k > 2 {
                break;
            }
        }
        let k1 = 1.0 / t + ln_half * i1 - t / 4.0 * k1_sum;
        (k0, k1)
    } else {
        // Steed's continued fraction with Temme's normalisation, order 0.
        let xi = 1.0 / t;
        let mut b = 2.0 * (1.0 + t);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..10_000 {
            a -= 2.0 * (i - 1) as f64;
            c = -a * c / i as f64;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < 1e-17 {
                break;
            }
        }
        h *= a1;
        let k0 = (PI / (2.0 * t)).sqrt() * (-t).exp() / s;
        let k1 = k0 * (t + 0.5 - h) * xi;
        (k0, k1)
    }
}

/// `K_{m/2}(t)` for any integer `m` (negative orders by `K_{-ν} = K_ν`).
pub fn bessel_k_halves(m: i64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("bessel_k", format!("t = {t} must be positive")));
    }
    let m = m.unsigned_abs();
    let (mut lo, mut hi, start) = if m % 2 == 1 {
        let k_half = (PI / (2.0 * t)).sqrt() * (-t).exp();
        (k_half, k_half * (1.0 + 1.0 / t), 1)
    } else {
        let (k0, k1) = k0_k1(t);
        (k0, k1, 0)
    };
    // (lo, hi) = (K_{start/2}, K_{start/2 + 1})
    let mut order2 = start;
    while order2 + 2 <= m {
        let nu = (order2 + 2) as f64 / 2.0;
        let next = lo + 2.0 * nu / t * hi;
        lo = hi;
        hi = next;
        order2 += 2;
    }
    Ok(if order2 == m { lo } else { hi })
}

/// Modified Bessel function of the second kind `K_{n/2}(t)`.
///
/// Odd `n` uses the closed forms of `K_{1/2}`, `K_{3/2}` and upward
/// recurrence; even `n` uses the logarithmic ascending series for `t <= 2` and
/// Steed's continued fraction above.
pub fn bessel_k_half(n: usize, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("bessel_k_half", "order index n must be at least 1"));
    }
    bessel_k_halves(n as i64, t)
}

fn bessel_i_series(nu: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let y = t * t / 4.0;
    let mut term = (t / 2.0).powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    let k_peak = (t / 2.0).ceil() as usize + 2;
    for k in 0..100_000usize {
        let kf = k as f64;
        term *= y / ((kf + 1.0) * (kf + 1.0 + nu));
        sum += term;
        if k > k_peak && term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind `I_ν(t)` by its ascending
/// series, for real `ν` (negative integer orders by symmetry).
pub fn bessel_i(nu: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(domain("bessel_i", format!("t = {t} must be non-negative")));
    }
    if t > BESSEL_I_MAX_ARG {
        return Err(Error::Overflow {
            op: "bessel_i",
            arg: t,
            threshold: BESSEL_I_MAX_ARG,
        });
    }
    let nu = if nu < 0.0 && nu.fract() == 0.0 { -nu } else { nu };
    Ok(bessel_i_series(nu, t))
}

/// `I_{n/2}(t)` by its ascending power series.
pub fn bessel_i_half(n: usize, t: f64) -> Result<f64> {
    bessel_i(n as f64 / 2.0, t)
}
