//! The bound theta(s) and its differential equation.

use bergman_fk::bounds::{certify_theta_ode, theta_n2, ThetaProfile};
use bergman_fk::weights::WeightParams;
use bergman_fk::NumericsConfig;

fn main() -> bergman_fk::Result<()> {
    let cfg = NumericsConfig::default();
    let grid: Vec<f64> = (0..40).map(|i| 0.1 * 500f64.powf(i as f64 / 39.0)).collect();
    for n in [2, 3, 4] {
        let params = WeightParams::new(n, 2.0, &cfg)?;
        let profile = ThetaProfile::new(&params, &cfg)?;
        let row: Vec<String> = [0.1, 1.0, 10.0, 100.0].iter().map(|&s| format!("{:.10}", profile.theta(s))).collect();
        let ode = certify_theta_ode(&profile, &grid);
        println!("n = {n}: theta at 0.1, 1, 10, 100 = {}; ODE residual {:.1e}", row.join(", "), ode.max_residual);
        if n == 2 {
            println!("       closed form at s = 10: {:.10}", theta_n2(2.0, 10.0));
        }
        // x = theta(s) inverted back to s
        let s = profile.theta_inverse(0.5)?;
        println!("       theta(s) = 1/2 at s = {s:.10}");
    }
    Ok(())
}
