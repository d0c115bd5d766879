//! Half-space wavelet counterexample: the window ODE, the limit expression,
//! and points where the hyperbolic Laplacian of log u is negative.

use bergman_fk::wavelet::{
    find_negativity_witness, limit_positive_range, ode_residual, limit_expression, WindowKind,
    WindowSpec, WitnessGrid,
};
use bergman_fk::Error;

fn main() -> bergman_fk::Result<()> {
    let spec = WindowSpec::new(3, 2.5)?;
    for r in [0.1, 1.0, 8.0] {
        let k = ode_residual(&spec, WindowKind::K, r)?;
        let i = ode_residual(&spec, WindowKind::I, r)?;
        println!("window ODE at r = {r}: K {:.1e}, I {:.1e} (relative)", k.relative(), i.relative());
    }

    for n in 2..=5 {
        let top = limit_positive_range(n)?;
        println!(
            "n = {n}: limit expression positive below y1 = {top:.4}; at y1 = {:.4} it is {:.4}",
            top / 2.0,
            limit_expression(n, top / 2.0)?
        );
    }

    let grid = WitnessGrid::default();
    for n in 1..=5 {
        match find_negativity_witness(n, &grid) {
            Ok(w) => println!(
                "n = {n}: (y1, t) = ({:.5}, {:.5}), Laplacian of log u = {:.4} +- {:.1e}, closed form {:.4}",
                w.y1, w.t, w.laplacian, w.fd_error, w.laplacian_closed
            ),
            Err(Error::NoWitnessFound { .. }) => println!("n = {n}: no negative point above the noise floor"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
