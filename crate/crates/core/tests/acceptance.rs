// Acceptance criteria 1-8; one PASS/FAIL line each, nonzero exit on any
// failure.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kbilinear::bounds::{
    compute_c3, compute_constants, eval_bound, log_log_slope, proportional, residual_norms, BoundInputs,
    ValidationGrid,
};
use kbilinear::dataset::{build_centers, CollectionOptions};
use kbilinear::domain::BoxDomain;
use kbilinear::error::Result;
use kbilinear::experiment::{cmd_benchmark_prediction, CenterCounts, ExperimentConfig, Method};
use kbilinear::kernel::{estimate_d_phi, Kernel, KernelMatrix, KernelSpec};
use kbilinear::pipeline::{collect_and_fit, Fitted};
use kbilinear::regress::{perturbation_gap, LocalEstimate};
use kbilinear::system::{estimate_constants, pendulum, zone_temp, SamplingConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn zone_fit(d: usize, dt: f64) -> Result<Fitted> {
    collect_and_fit(
        &zone_temp(),
        KernelSpec::new(1, 1, 1.0)?,
        SamplingConfig::new(dt, 100)?,
        CollectionOptions { d, ..Default::default() },
    )
}

fn interpolation_exactness() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [5, 9, 17] {
        let f = zone_fit(d, 0.01)?;
        let images: Vec<_> = f.estimates.iter().map(LocalEstimate::f_hat).collect();
        worst = worst.max(f.surrogate.interpolation_residual(&images));
    }
    Ok(Outcome {
        pass: worst < 1e-9,
        detail: format!("max interpolation residual {worst:.2e} (< 1e-9)"),
    })
}

fn equilibrium_invariance() -> Result<Outcome> {
    let sys = zone_temp();
    let mut a_worst: f64 = 0.0;
    let mut r_worst: f64 = 0.0;
    let mut models = 0;
    for dt in [0.1, 0.05, 0.025, 0.0125, 0.01, 0.005] {
        for d in (5..=19).step_by(2) {
            let f = zone_fit(d, dt)?;
            a_worst = a_worst.max(f.surrogate.equilibrium_residual());
            let z = DVector::zeros(1);
            r_worst = r_worst.max(f.surrogate.residual(&sys, &f.dataset.sampling, &z, &z)?.norm());
            models += 1;
        }
    }
    Ok(Outcome {
        pass: a_worst < 1e-9 && r_worst < 1e-8,
        detail: format!("{models} models: |A Phi(0) - Phi(0)| <= {a_worst:.2e}, |r(0,0)| <= {r_worst:.2e}"),
    })
}

fn regression_rate() -> Result<Outcome> {
    let sys = zone_temp();
    let consts = estimate_constants(&sys, 2001);
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let mut gaps = Vec::new();
    for dt in dts {
        let f = zone_fit(9, dt)?;
        let c3 = compute_c3(&consts, &f.dataset.excitation())?;
        let mut worst: f64 = 0.0;
        for (e, x) in f.estimates.iter().zip(&f.dataset.centers.points) {
            worst = worst.max(perturbation_gap(e, x, &sys, &f.dataset.sampling, c3)?.gap);
        }
        gaps.push(worst);
    }
    let slope = log_log_slope(&dts, &gaps);
    Ok(Outcome {
        pass: (1.8..=2.2).contains(&slope),
        detail: format!("slope {slope:.3} in [1.8, 2.2]; gaps {:.2e} .. {:.2e}", gaps[0], gaps[3]),
    })
}

fn fill_distance_effect() -> Result<Outcome> {
    let sys = zone_temp();
    let sampling = SamplingConfig::new(0.005, 100)?;
    let points = ValidationGrid::default().points(&sys);
    let mut maxima = Vec::new();
    for d in [5, 9, 17] {
        let f = zone_fit(d, 0.005)?;
        let r = residual_norms(&f.surrogate, &sys, &sampling, &points)?;
        maxima.push(r.iter().map(|s| s.residual).fold(0.0, f64::max));
    }
    let decreasing = maxima[1] < maxima[0] && maxima[2] < maxima[1];
    let ratio = maxima[2] / maxima[0];
    Ok(Outcome {
        pass: decreasing && ratio <= 0.5,
        detail: format!(
            "grid max |r| d=5 {:.3e}, d=9 {:.3e}, d=17 {:.3e}; d17/d5 = {ratio:.3} (<= 0.5)",
            maxima[0], maxima[1], maxima[2]
        ),
    })
}

fn prediction_benchmark() -> Result<Outcome> {
    let cfg = ExperimentConfig {
        data: kbilinear::experiment::DataConfig {
            d: CenterCounts::Many(vec![5, 19]),
            ..Default::default()
        },
        ..Default::default()
    };
    let dir = tempfile::tempdir()?;
    let s = cmd_benchmark_prediction(&cfg, dir.path())?;
    let k5 = s.time_averaged(Method::Kedmd, 5).unwrap();
    let k19 = s.time_averaged(Method::Kedmd, 19).unwrap();
    let b5 = s.time_averaged(Method::KernelBaseline, 5).unwrap();
    let mono_finite = s
        .rows
        .iter()
        .filter(|r| r.method == Method::MonomialBaseline)
        .all(|r| r.mean_err.is_finite() && r.max_err.is_finite());
    let shrinks = k19 < k5;
    let beats_baseline = k5 <= 1.05 * b5;
    Ok(Outcome {
        pass: shrinks && beats_baseline && mono_finite,
        detail: format!(
            "kEDMD d=19 {k19:.4e} < d=5 {k5:.4e}: {shrinks}; kEDMD d=5 <= 1.05 x kernel baseline {b5:.4e}: {beats_baseline}; monomial finite: {mono_finite}"
        ),
    })
}

fn bound_structure() -> Result<Outcome> {
    let sys = zone_temp();
    let f = zone_fit(5, 0.01)?;
    let inputs = BoundInputs::gather(&f, &sys, 2001, 2001)?;
    let c = compute_constants(&inputs, Some(1.0), Some(1.0))?;
    let p = proportional(&c);
    let margin = ValidationGrid::default()
        .points(&sys)
        .iter()
        .map(|(x, u)| p.eval(x, u) - eval_bound(&c, x, u))
        .fold(f64::INFINITY, f64::min);
    let z = DVector::zeros(1);
    let at_origin = eval_bound(&c, &z, &z);
    Ok(Outcome {
        pass: c.c_xx == 0.0 && margin >= 0.0 && at_origin == 0.0,
        detail: format!("c_xx = {}, min proportional margin {margin:.3e} on 101x101, bound(0,0) = {at_origin}", c.c_xx),
    })
}

fn numerical_hygiene() -> Result<Outcome> {
    let mut min_eig = f64::INFINITY;
    let mut sets = 0;
    let line = BoxDomain::cube(1, -1.0, 1.0)?;
    let k1 = Kernel::new(KernelSpec::new(1, 1, 1.0)?)?;
    for d in 2..=33 {
        let c = build_centers(&line, d)?;
        min_eig = min_eig.min(KernelMatrix::new(&k1, &c.points)?.min_eigenvalue());
        sets += 1;
    }
    let square = pendulum().state_box().clone();
    for s in 1..=3 {
        let k2 = Kernel::new(KernelSpec::new(2, s, 1.5)?)?;
        for d in [4, 9, 25, 49] {
            let c = build_centers(&square, d)?;
            min_eig = min_eig.min(KernelMatrix::new(&k2, &c.points)?.min_eigenvalue());
            sets += 1;
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut fd_err: f64 = 0.0;
    let h = 1e-5;
    for n in 1..=3 {
        for s in 1..=3 {
            let k = Kernel::new(KernelSpec::new(n, s, 1.0)?)?;
            for _ in 0..100 {
                let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let hess = k.feature_hessian(&c, &x);
                for i in 0..n {
                    let mut e = DVector::zeros(n);
                    e[i] = h;
                    let g = (k.feature_gradient(&c, &(&x + &e)) - k.feature_gradient(&c, &(&x - &e))) / (2.0 * h);
                    for j in 0..n {
                        fd_err = fd_err.max((g[j] - hess[(j, i)]).abs());
                    }
                }
            }
        }
    }

    let d_phi = estimate_d_phi(&k1, &[DVector::zeros(1)], &line, 2001)?.d_phi;
    Ok(Outcome {
        pass: min_eig > 0.0 && fd_err <= 1e-4 && (d_phi - 20.0).abs() <= 1e-3,
        detail: format!("min eigenvalue {min_eig:.3e} over {sets} sets; Hessian FD error {fd_err:.2e}; D_phi = {d_phi:.6}"),
    })
}

fn determinism() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir()?;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let pa = cmd_benchmark_prediction(&cfg, &a)?.csv_path;
    let pb = cmd_benchmark_prediction(&cfg, &b)?.csv_path;
    let (ba, bb) = (fs::read(pa)?, fs::read(pb)?);
    Ok(Outcome {
        pass: ba == bb,
        detail: format!("two runs, {} bytes each, identical: {}", ba.len(), ba == bb),
    })
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "interpolation exactness", Duration::from_secs(1), interpolation_exactness),
        (2, "equilibrium invariance", Duration::MAX, equilibrium_invariance),
        (3, "regression perturbation rate", Duration::from_secs(10), regression_rate),
        (4, "fill-distance effect", Duration::from_secs(30), fill_distance_effect),
        (5, "open-loop prediction benchmark", Duration::from_secs(60), prediction_benchmark),
        (6, "bound structure", Duration::MAX, bound_structure),
        (7, "numerical hygiene", Duration::MAX, numerical_hygiene),
        (8, "determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(", limit {}s", limit.as_secs())
        };
        println!(
            "criterion {id} {}: {name}: {detail} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all 8 criteria passed");
        ExitCode::SUCCESS
    }
}
