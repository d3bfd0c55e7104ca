//! Grid centers, excited inputs and integrated triplets, written to disk
//! and read back.

use kbilinear::dataset::{CollectionOptions, Dataset};
use kbilinear::kernel::KernelSpec;
use kbilinear::system::{zone_temp, SamplingConfig};

pub fn run_example() -> kbilinear::error::Result<()> {
    let ds = Dataset::generate(
        &zone_temp(),
        KernelSpec::new(1, 1, 1.0)?,
        SamplingConfig::new(0.01, 100)?,
        CollectionOptions { d: 9, d_j: 2, seed: 7, sigma_threshold: 0.1 },
    )?;
    println!("{} centers, h_X = {:.4}", ds.centers.len(), ds.centers.fill_distance);
    for t in &ds.triplets {
        let us: Vec<String> = t.inputs.iter().map(|u| format!("{:+.3}", u[0])).collect();
        println!(
            "x = {:+.3}  u = [{}]  sigma_min = {:.3}",
            t.center[0],
            us.join(", "),
            t.sigma_min
        );
    }

    let dir = std::env::temp_dir().join("kbilinear-collect-example");
    ds.save(&dir)?;
    let back = Dataset::load(&dir)?;
    assert_eq!(back, ds);
    println!("saved to {} and reloaded bit-for-bit", dir.display());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
