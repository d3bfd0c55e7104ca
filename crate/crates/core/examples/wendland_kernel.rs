//! The Wendland kernel, its canonical features and the kernel matrix.

use kbilinear::domain::BoxDomain;
use kbilinear::kernel::{estimate_d_phi, eval_theta, Kernel, KernelMatrix, KernelSpec};
use nalgebra::DVector;

pub fn run_example() -> kbilinear::error::Result<()> {
    let spec = KernelSpec::new(1, 1, 1.0)?;
    for r in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5] {
        println!("theta({r:.2}) = {:.6}", eval_theta(&spec, r)?);
    }

    let kernel = Kernel::new(spec)?;
    let centers: Vec<DVector<f64>> = [0.0, -1.0, -0.5, 0.5, 1.0]
        .iter()
        .map(|v| DVector::from_element(1, *v))
        .collect();
    let x = DVector::from_element(1, 0.3);
    println!("Phi(0.3) = {}", kernel.features(&centers, &x)?.transpose());
    println!("Psi(0.3) = {}", kernel.lifted_state(&centers, &x)?.transpose());

    let km = KernelMatrix::new(&kernel, &centers)?;
    println!(
        "K_X: lambda_min = {:.4}, cond = {:.4}, ||K_X^-1|| = {:.4}",
        km.min_eigenvalue(),
        km.condition(),
        km.inverse_norm()
    );

    let dom = BoxDomain::cube(1, -1.0, 1.0)?;
    let bound = estimate_d_phi(&kernel, &centers, &dom, 2001)?;
    println!("D_phi = {:.6} on {} grid points", bound.d_phi, bound.points_per_axis);
    let (_, phi_norm) = kernel.rkhs_feature_norms(&centers);
    println!("||Phi|| = {phi_norm:.6}");

    // smoother kernels share the interface
    for s in [2, 3] {
        let k = Kernel::new(KernelSpec::new(2, s, 1.0)?)?;
        println!("s = {s}: theta(0.5) = {:.6}, theta''(0) = {:.4}", k.theta(0.5), k.theta_second(0.0));
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
