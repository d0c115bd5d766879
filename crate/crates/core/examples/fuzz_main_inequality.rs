//! Randomized check of R(f, Omega) <= theta(|Omega|), plus equality trials.
//!
//! `cargo run --release --example fuzz_main_inequality -- 50 10`

use bergman_fk::bounds::ThetaProfile;
use bergman_fk::concentration::fuzz_main_inequality;
use bergman_fk::weights::WeightParams;
use bergman_fk::NumericsConfig;

fn main() -> bergman_fk::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("counts are integers"));
    let trials = args.next().unwrap_or(40);
    let equality = args.next().unwrap_or(8);
    let cfg = NumericsConfig { samples: 40_000, ..NumericsConfig::default() };
    for n in [2, 3] {
        let params = WeightParams::new(n, 2.0, &cfg)?;
        let profile = ThetaProfile::new(&params, &cfg)?;
        let report = fuzz_main_inequality(trials, equality, &profile, &cfg, cfg.seed)?;
        let worst = report
            .trials
            .iter()
            .filter(|t| !t.equality_trial)
            .map(|t| t.deficit)
            .fold(f64::INFINITY, f64::min);
        println!(
            "n = {n}: {} trials, {} violations, smallest deficit {worst:.4}; equality trials max (R - theta)/stderr {:+.2}",
            trials, report.violations, report.equality_max_z
        );
    }
    Ok(())
}
