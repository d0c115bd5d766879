//! The weighted Mobius action preserves the norm; the Jacobian formula
//! against a finite-difference determinant.

use bergman_fk::concentration::{certify_mobius_action, TestFunction};
use bergman_fk::geometry::MobiusMap;
use bergman_fk::mc::substream;
use bergman_fk::weights::WeightParams;
use bergman_fk::NumericsConfig;
use nalgebra::DMatrix;

fn main() -> bergman_fk::Result<()> {
    let cfg = NumericsConfig::default();
    let params = WeightParams::new(3, 2.0, &cfg)?;
    let mut rng = substream(cfg.seed, 1);
    let f = TestFunction::exp_harmonic(-1.2, vec![0.6, 0.8, 0.0])?;
    for k in 0..4 {
        let m = MobiusMap::random(3, 0.6, &mut rng);
        let rep = certify_mobius_action(&f, &m, &params, &cfg)?;
        println!(
            "map {k}: |f|^2 = {:.5}, |g|^2 = {:.5} +- {:.5}, min Laplacian of log|g| {:.3}, {}",
            rep.norm_f.value.value,
            rep.norm_g.value.value,
            rep.norm_g.value.stderr,
            rep.min_laplacian,
            if rep.passed { "ok" } else { "FAILED" }
        );
    }

    let m = MobiusMap::random(3, 0.8, &mut rng);
    let x = [0.2, -0.3, 0.1];
    let h = 1e-6;
    let mut jac = DMatrix::zeros(3, 3);
    for j in 0..3 {
        let (mut xp, mut xm) = (x, x);
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (m.apply(&xp)?, m.apply(&xm)?);
        for i in 0..3 {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    println!("Jacobian {:.12} vs det of FD derivative {:.12}", m.jacobian(&x)?, jac.determinant().abs());
    Ok(())
}
