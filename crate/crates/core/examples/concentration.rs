//! Concentration quotients for a few functions and domains, next to theta.

use bergman_fk::bounds::ThetaProfile;
use bergman_fk::concentration::{concentration_quotient, DomainSpec, TestFunction};
use bergman_fk::geometry::MobiusMap;
use bergman_fk::weights::WeightParams;
use bergman_fk::NumericsConfig;

fn main() -> bergman_fk::Result<()> {
    let cfg = NumericsConfig::default();
    let params = WeightParams::new(3, 2.0, &cfg)?;
    let theta = ThetaProfile::new(&params, &cfg)?;
    let shift = MobiusMap::involution(vec![0.4, 0.0, 0.0])?;

    let functions = [
        TestFunction::One,
        TestFunction::exp_harmonic(-1.0, vec![0.0, 0.0, 1.0])?,
        TestFunction::extremizer(shift.clone(), &params)?,
    ];
    let domains = [
        DomainSpec::CenteredBall { s: 5.0 },
        DomainSpec::MobiusBall { map: shift, s: 5.0 },
        DomainSpec::half_space_cap(3, 0.2, 2.5, 50_000, cfg.seed),
    ];
    for f in &functions {
        for omega in &domains {
            let q = concentration_quotient(f, omega, &params, &cfg)?;
            let s = omega.measure();
            println!(
                "{f:<40} {omega:?}: R = {:.5} +- {:.5}, theta(s) = {:.5}",
                q.value.value,
                q.value.stderr,
                theta.theta(s.value)
            );
        }
    }
    Ok(())
}
