//! Hyperbolic balls: volume, perimeter and the isoperimetric profile.

use bergman_fk::geometry::{
    ball_perimeter_hyperbolic, ball_volume_hyperbolic, hyperbolic_radius_from_volume, isoperimetric_profile,
};
use std::f64::consts::PI;

fn main() -> bergman_fk::Result<()> {
    for n in [2, 3, 5] {
        println!("n = {n}");
        for rho in [0.1, 1.0, 4.0, 10.0] {
            let v = ball_volume_hyperbolic(n, rho)?;
            println!(
                "  rho = {rho:5.1}: volume {v:.6e}, perimeter {:.6e}, radius back {:.12}",
                ball_perimeter_hyperbolic(n, rho),
                hyperbolic_radius_from_volume(n, v)
            );
        }
    }
    for s in [1e-3, 1.0, 1e3] {
        println!("Upsilon_2({s:e}) = {:.15e}, 1/(4pi+s) = {:.15e}", isoperimetric_profile(2, s), 1.0 / (4.0 * PI + s));
    }
    Ok(())
}
