//! Hypergeometric series, Gamma and half-integer Bessel functions.

use bergman_fk::specfun::{bessel_i_half, bessel_k_half, gamma, hyp2f1, hyp3f2, HypParams32, SeriesTolerance};

fn main() -> bergman_fk::Result<()> {
    let tol = SeriesTolerance::default();
    for t in [0.25, 0.5, 0.9, 0.99] {
        let f = hyp2f1(1.0, 1.0, 2.0, t, tol)?;
        println!("2F1(1,1;2;{t:<4}) = {f:.16}   -ln(1-t)/t = {:.16}", -(-t).ln_1p() / t);
    }

    // the series behind the radial weight, up to and including t = 1
    for n in 2..=6 {
        let p = HypParams32::weight_exponent(n);
        println!("n = {n}: F(0.5) = {:.15}, F(1) = {:.15}", hyp3f2(p, 0.5, tol)?, hyp3f2(p, 1.0, tol)?);
    }

    println!("Gamma(5.5) = {:.15}", gamma(5.5));
    for n in [1, 2, 3, 5] {
        println!("K_{n}/2(1.5) = {:.15e}   I_{n}/2(1.5) = {:.15e}", bessel_k_half(n, 1.5)?, bessel_i_half(n, 1.5)?);
    }
    Ok(())
}
