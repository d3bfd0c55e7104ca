//! Define a plant, integrate its sampled-data flow and compare with the
//! forward Euler maps.

use std::sync::Arc;

use kbilinear::domain::BoxDomain;
use kbilinear::system::{estimate_constants, euler_maps, flow, ControlAffineSystem, SamplingConfig};
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> kbilinear::error::Result<()> {
    // x1' = x2, x2' = -x1 + x1^3 / 3 + (1 + x1^2 / 2) u
    let sys = ControlAffineSystem::new(
        "duffing",
        BoxDomain::cube(2, -1.0, 1.0)?,
        BoxDomain::cube(1, -1.0, 1.0)?,
        Arc::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1], -x[0] + x[0].powi(3) / 3.0])),
        Arc::new(|x: &DVector<f64>| DMatrix::from_column_slice(2, 1, &[0.0, 1.0 + 0.5 * x[0] * x[0]])),
    )?;

    let x = DVector::from_vec(vec![0.5, -0.2]);
    let u = DVector::from_element(1, 0.7);
    for dt in [0.1, 0.05, 0.025] {
        let sampling = SamplingConfig::new(dt, 100)?;
        let maps = euler_maps(&sys, &sampling, &x)?;
        let next = flow(&sys, &sampling, &x, &u)?;
        let euler = &maps.f + &maps.g * &u;
        println!("dt = {dt:<6} |flow - euler| = {:.3e}", (next - euler).norm());
    }

    // Lipschitz constants and bounds from grid maximization (finite
    // differences, since no Jacobians were supplied)
    let c = estimate_constants(&sys, 201);
    println!(
        "L_f = {:.4}, L_G = {:.4}, G_bar = {:.4}, x_bar = {:.4}, u_bar = {}, u_tilde = {}",
        c.l_f, c.l_g, c.g_bar, c.x_bar, c.u_bar, c.u_tilde
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
