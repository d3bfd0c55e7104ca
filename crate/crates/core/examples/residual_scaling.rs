//! Residual rates on the zone temperature plant: the regression gap and
//! the residual at the centers shrink like dt^2, the grid residual
//! shrinks with the fill distance.

use kbilinear::bounds::{validate_empirically, ValidationPlan};
use kbilinear::dataset::CollectionOptions;
use kbilinear::kernel::KernelSpec;
use kbilinear::pipeline::collect_and_fit;
use kbilinear::system::{zone_temp, SamplingConfig};

pub fn run_example() -> kbilinear::error::Result<()> {
    let sys = zone_temp();
    let fitted = collect_and_fit(
        &sys,
        KernelSpec::new(1, 1, 1.0)?,
        SamplingConfig::new(0.01, 100)?,
        CollectionOptions { d: 9, ..Default::default() },
    )?;
    let report = validate_empirically(&fitted, &sys, &ValidationPlan::default())?;

    let dt = report.dt_scaling.as_ref().expect("dt study requested");
    println!("dt        max gap     dt^2 C3     max r at centers");
    for s in &dt.samples {
        println!(
            "{:<9} {:<11.3e} {:<11.3e} {:.3e}",
            s.dt, s.max_regression_gap, s.gap_bound, s.max_center_residual
        );
    }
    println!("slopes: gap {:.3}, residual {:.3}", dt.gap_slope, dt.residual_slope);

    let fill = report.fill_scaling.as_ref().expect("fill study requested");
    println!("\nd    h_X       max r (dt = {})", fill.dt);
    for s in &fill.samples {
        println!("{:<4} {:<9.4} {:.4e}", s.d, s.h_x, s.max_residual);
    }
    println!("strictly decreasing: {}", fill.strictly_decreasing);

    println!("\ngrid max {:.4e}, mean {:.4e}, at origin {:.1e}", report.grid.max_residual, report.grid.mean_residual, report.grid.origin_residual);
    match report.calibrated_c1 {
        Some(c1) => println!("calibrated C1 = {c1:.4} (C2 = {})", report.calibration_c2),
        None => println!("no C1 closes the bound with C2 = {}", report.calibration_c2),
    }
    for f in &report.flags {
        println!("flag: {f}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
