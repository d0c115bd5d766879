//! Residual reports for the identities the bound rests on.

use bergman_fk::bounds::{certify_claim, certify_euler, certify_gamma_identity, certify_hyp_derivative, certify_merk};

fn main() {
    let s: Vec<f64> = (0..30).map(|i| 0.1 * 500f64.powf(i as f64 / 29.0)).collect();
    let r: Vec<f64> = (1..=18).map(|i| 0.05 * i as f64).collect();
    let mut reports = vec![certify_euler(&[2, 3, 4, 5, 6], &r), certify_gamma_identity(0..=20, 3..=12)];
    reports.push(certify_hyp_derivative(&[2, 3, 4, 5, 6], &r[..17]));
    for n in 2..=5 {
        reports.push(certify_claim(n, &s));
        reports.push(certify_merk(n, &r));
    }
    for rep in reports {
        println!(
            "{:<24} max residual {:.2e} (tolerance {:.0e}) {}",
            rep.check,
            rep.max_residual,
            rep.tolerance,
            if rep.passed { "ok" } else { "FAILED" }
        );
    }
}
