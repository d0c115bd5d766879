//! Distribution function, decreasing rearrangement and I(s) for a radial
//! function, and the empirical version for a non-radial one.

use bergman_fk::bounds::ThetaProfile;
use bergman_fk::concentration::{superlevel_profile, ProfilePath, TestFunction};
use bergman_fk::weights::WeightParams;
use bergman_fk::NumericsConfig;

fn main() -> bergman_fk::Result<()> {
    let cfg = NumericsConfig::default();
    let params = WeightParams::new(3, 2.0, &cfg)?;
    let theta = ThetaProfile::new(&params, &cfg)?;

    let one = superlevel_profile(&TestFunction::One, &params, &cfg, ProfilePath::Radial)?;
    println!("{:>8} {:>16} {:>16} {:>16}", "s", "u*(s)", "I(s)", "theta(s)");
    for s in [0.1, 1.0, 10.0, 100.0] {
        println!("{s:8.1} {:16.10e} {:16.10e} {:16.10e}", one.u_star(s), one.i_n(s).value, theta.theta(s));
    }

    let f = TestFunction::exp_harmonic(-1.0, vec![1.0, 0.0, 0.0])?;
    let empirical = superlevel_profile(&f, &params, &cfg, ProfilePath::MonteCarlo)?;
    println!("exp(-P) sampled: norm {:.5}", empirical.norm_sq().value);
    for s in [0.1, 1.0, 10.0, 100.0] {
        let i = empirical.i_n(s);
        println!("  I({s}) = {:.5} +- {:.5} <= {:.5}", i.value, i.stderr, theta.theta(s) * empirical.norm_sq().value);
    }
    Ok(())
}
