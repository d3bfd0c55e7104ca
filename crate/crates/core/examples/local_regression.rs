//! Per-center least squares for `[f(x_j) G(x_j)]` and its distance to the
//! true Euler maps, which shrinks like dt^2.

use kbilinear::bounds::compute_c3;
use kbilinear::dataset::{CollectionOptions, Dataset};
use kbilinear::kernel::KernelSpec;
use kbilinear::regress::{fit_dataset, perturbation_gap};
use kbilinear::system::{estimate_constants, zone_temp, SamplingConfig};

pub fn run_example() -> kbilinear::error::Result<()> {
    let sys = zone_temp();
    let consts = estimate_constants(&sys, 2001);
    for dt in [0.1, 0.05, 0.025, 0.0125] {
        let sampling = SamplingConfig::new(dt, 100)?;
        let ds = Dataset::generate(
            &sys,
            KernelSpec::new(1, 1, 1.0)?,
            sampling,
            CollectionOptions { d: 9, ..Default::default() },
        )?;
        let est = fit_dataset(&ds)?;
        let c3 = compute_c3(&consts, &ds.excitation())?;
        let mut worst: f64 = 0.0;
        for (e, x) in est.iter().zip(&ds.centers.points) {
            worst = worst.max(perturbation_gap(e, x, &sys, &sampling, c3)?.gap);
        }
        println!(
            "dt = {dt:<7} max gap = {worst:.3e}  dt^2 C3 = {:.3e}  f_hat(0) = {}",
            dt * dt * c3,
            est[0].f_hat[0]
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
