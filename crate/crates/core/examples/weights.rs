//! The radial weight, its closed forms, and the weight ODE residual.

use bergman_fk::weights::{certify_weight_ode, normalization, phi, phi_closed_form};
use bergman_fk::NumericsConfig;

fn main() -> bergman_fk::Result<()> {
    println!("{:>5} {:>22} {:>22} {:>22}", "r", "Phi_2", "Phi_3", "Phi_4");
    for r in [0.0, 0.25, 0.5, 0.75, 0.9, 0.99] {
        println!("{r:5.2} {:22.15e} {:22.15e} {:22.15e}", phi(2, r), phi(3, r), phi(4, r));
    }
    let r = 0.97;
    println!(
        "n = 3 at r = {r}: series/continuation {:.15e}, closed form {:.15e}",
        phi(3, r),
        phi_closed_form(3, r).unwrap()
    );

    let grid: Vec<f64> = (0..=85).map(|i| 0.05 + 0.01 * i as f64).collect();
    for n in 2..=6 {
        let report = certify_weight_ode(n, &grid);
        println!("weight ODE n = {n}: max residual {:.2e}", report.max_residual);
    }

    let cfg = NumericsConfig::default();
    for alpha in [1.5, 2.0, 3.0] {
        println!("c(alpha = {alpha}) for n = 3: {:.12}", normalization(3, alpha, &cfg)?);
    }
    Ok(())
}
