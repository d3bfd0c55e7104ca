//! Deterministic residual bound
//!
//! ```text
//! ||r(x, u)|| <= c_x |x| + c_u |u| + c_xx |x|^2 + c_xu |x||u| + c_uu |u|^2
//! ```
//!
//! with the coefficient formulas of [`compute_constants`], its proportional
//! over-approximation, and empirical checks against the true flow.
//!
//! `C1` and `C2` are domain constants without a constructive formula; they
//! are supplied by the user or calibrated from data.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::CollectionOptions;
use crate::error::{Error, Result};
use crate::kernel::{estimate_d_phi, DEFAULT_HESSIAN_GRID};
use crate::pipeline::{collect_and_fit, Fitted};
use crate::regress::perturbation_gap;
use crate::surrogate::BilinearSurrogate;
use crate::system::{
    estimate_constants, ControlAffineSystem, SamplingConfig, SystemConstants,
    DEFAULT_CONSTANTS_GRID,
};

/// `C3 = 1/2 (L_f x_bar + G_bar u_bar)(L_f + L_G u_bar) max_j sqrt(d_j)/sigma_min_j`.
pub fn compute_c3(constants: &SystemConstants, excitation: &[(usize, f64)]) -> Result<f64> {
    if excitation.is_empty() {
        return Err(Error::InvalidArgument("no centers given".into()));
    }
    let mut worst: f64 = 0.0;
    for (j, (d_j, sigma)) in excitation.iter().enumerate() {
        if !(*sigma > 0.0) {
            return Err(Error::RankDeficient {
                center: j,
                sigma_min: *sigma,
            });
        }
        worst = worst.max((*d_j as f64).sqrt() / sigma);
    }
    let c = constants;
    Ok(0.5 * (c.l_f * c.x_bar + c.g_bar * c.u_bar) * (c.l_f + c.l_g * c.u_bar) * worst)
}

/// Everything the coefficients depend on besides `C1`, `C2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub l_f: f64,
    pub l_g: f64,
    pub g_bar: f64,
    pub x_bar: f64,
    pub u_bar: f64,
    pub u_tilde: f64,
    pub u_one_max: f64,
    pub d_phi: f64,
    /// `||Phi||` in the native space.
    pub phi_norm: f64,
    /// `||K_X^{-1}||_2`.
    pub kinv_norm: f64,
    pub h_x: f64,
    /// Declared validity radius for `h_x`; recorded, not checked.
    pub h0: Option<f64>,
    pub s: u32,
    pub dt: f64,
    pub d: usize,
    pub m: usize,
    /// `(d_j, sigma_min)` per center.
    pub excitation: Vec<(usize, f64)>,
}

impl BoundInputs {
    /// Assemble from a fitted model; constants are grid estimates.
    pub fn gather(
        fitted: &Fitted,
        system: &ControlAffineSystem,
        hessian_grid: usize,
        constants_grid: usize,
    ) -> Result<Self> {
        let consts = estimate_constants(system, constants_grid);
        let model = &fitted.surrogate;
        let d_phi = estimate_d_phi(model.kernel(), model.centers(), system.state_box(), hessian_grid)?.d_phi;
        let (_, phi_norm) = model.kernel().rkhs_feature_norms(model.centers());
        Ok(Self {
            l_f: consts.l_f,
            l_g: consts.l_g,
            g_bar: consts.g_bar,
            x_bar: consts.x_bar,
            u_bar: consts.u_bar,
            u_tilde: consts.u_tilde,
            u_one_max: consts.u_one_max,
            d_phi,
            phi_norm,
            kinv_norm: model.kx_inverse_norm(),
            h_x: fitted.dataset.centers.fill_distance,
            h0: None,
            s: fitted.dataset.kernel.s,
            dt: fitted.dataset.sampling.dt,
            d: model.centers().len(),
            m: system.input_dim(),
            excitation: fitted.dataset.excitation(),
        })
    }

    pub fn system_constants(&self) -> SystemConstants {
        SystemConstants {
            l_f: self.l_f,
            l_g: self.l_g,
            g_bar: self.g_bar,
            x_bar: self.x_bar,
            u_bar: self.u_bar,
            u_tilde: self.u_tilde,
            u_one_max: self.u_one_max,
            grid_points_per_axis: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_x: f64,
    pub c_u: f64,
    pub c_xx: f64,
    pub c_xu: f64,
    pub c_uu: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub inputs: BoundInputs,
}

/// The five residual coefficients. `C1` and `C2` must be given; pass the
/// result of a calibration or a conservative guess.
pub fn compute_constants(inputs: &BoundInputs, c1: Option<f64>, c2: Option<f64>) -> Result<BoundConstants> {
    let c1 = c1.ok_or(Error::MissingConstant("C1"))?;
    let c2 = c2.ok_or(Error::MissingConstant("C2"))?;
    for (name, v) in [("C1", c1), ("C2", c2)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be a nonnegative number, got {v}")));
        }
    }
    let c3 = compute_c3(&inputs.system_constants(), &inputs.excitation)?;
    let p = inputs;
    let sqrt_d = (p.d as f64).sqrt();
    let sqrt_m = (p.m as f64).sqrt();
    let sqrt_md = ((p.m * p.d) as f64).sqrt();
    let dt2 = p.dt * p.dt;
    let proj = c1 * p.h_x.powf(p.s as f64 - 0.5) * p.phi_norm;
    let half_d = 0.5 * p.d_phi;
    Ok(BoundConstants {
        c_x: p.u_tilde * (proj + sqrt_d * dt2 * c2 * c3 * p.kinv_norm),
        c_u: dt2 * (sqrt_md * c2 * c3 * p.kinv_norm + sqrt_d * half_d * p.g_bar * p.g_bar),
        c_xu: sqrt_m * proj + 2.0 * sqrt_d * dt2 * p.d_phi * p.l_f * p.g_bar,
        c_xx: sqrt_d * dt2 * half_d * p.l_f * p.l_f * (1.0 + p.u_tilde + p.u_one_max),
        c_uu: sqrt_d * dt2 * half_d * p.g_bar * p.g_bar,
        c1,
        c2,
        c3,
        inputs: inputs.clone(),
    })
}

pub fn eval_bound(c: &BoundConstants, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
    eval_norms(c, x.norm(), u.norm())
}

fn eval_norms(c: &BoundConstants, nx: f64, nu: f64) -> f64 {
    c.c_x * nx + c.c_u * nu + c.c_xx * nx * nx + c.c_xu * nx * nu + c.c_uu * nu * nu
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionalBound {
    pub c_tilde_x: f64,
    pub c_tilde_u: f64,
    /// Quadratic coefficients and box radii the slopes were built from.
    pub terms: [f64; 5],
    pub x_bar: f64,
    pub u_bar: f64,
}

impl ProportionalBound {
    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.eval_norms(x.norm(), u.norm())
    }

    /// Same term order as the quadratic bound with one factor of each
    /// product raised to its box radius, so dominance survives rounding.
    pub fn eval_norms(&self, nx: f64, nu: f64) -> f64 {
        let [c_x, c_u, c_xx, c_xu, c_uu] = self.terms;
        c_x * nx + c_u * nu + c_xx * nx * self.x_bar + c_xu * nx * self.u_bar + c_uu * nu * self.u_bar
    }
}

/// Linear over-approximation valid for `|x| <= x_bar`, `|u| <= u_bar`.
pub fn proportional(c: &BoundConstants) -> ProportionalBound {
    let (x_bar, u_bar) = (c.inputs.x_bar, c.inputs.u_bar);
    ProportionalBound {
        c_tilde_x: c.c_x + c.c_xx * x_bar + c.c_xu * u_bar,
        c_tilde_u: c.c_u + c.c_uu * u_bar,
        terms: [c.c_x, c.c_u, c.c_xx, c.c_xu, c.c_uu],
        x_bar,
        u_bar,
    }
}

/// Tensor grid over the state and input boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationGrid {
    pub state_points: usize,
    pub input_points: usize,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self {
            state_points: 101,
            input_points: 101,
        }
    }
}

impl ValidationGrid {
    pub fn points(&self, system: &ControlAffineSystem) -> Vec<(DVector<f64>, DVector<f64>)> {
        let xs = system.state_box().grid(self.state_points);
        let us = system.input_box().grid(self.input_points);
        xs.iter()
            .flat_map(|x| us.iter().map(move |u| (x.clone(), u.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub residual: f64,
}

/// `||r(x, u)||` over a list of points, in input order.
pub fn residual_norms(
    model: &BilinearSurrogate,
    system: &ControlAffineSystem,
    sampling: &SamplingConfig,
    points: &[(DVector<f64>, DVector<f64>)],
) -> Result<Vec<GridSample>> {
    points
        .par_iter()
        .map(|(x, u)| {
            Ok(GridSample {
                x: x.clone(),
                u: u.clone(),
                residual: model.residual(system, sampling, x, u)?.norm(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationPlan {
    pub grid: ValidationGrid,
    /// Sampling periods for the rate study at the centers.
    pub dt_values: Vec<f64>,
    /// Center counts for the fill-distance study.
    pub d_values: Vec<usize>,
    /// Sampling period of the fill-distance study.
    pub scaling_dt: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub h0: Option<f64>,
    pub hessian_grid: usize,
    pub constants_grid: usize,
}

impl Default for ValidationPlan {
    fn default() -> Self {
        Self {
            grid: ValidationGrid::default(),
            dt_values: vec![0.1, 0.05, 0.025, 0.0125],
            d_values: vec![5, 9, 17],
            scaling_dt: 0.005,
            c1: Some(1.0),
            c2: Some(1.0),
            h0: None,
            hessian_grid: DEFAULT_HESSIAN_GRID,
            constants_grid: DEFAULT_CONSTANTS_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub points: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub origin_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtSample {
    pub dt: f64,
    /// Max of `||r(x_j, u)||` over centers and the input grid.
    pub max_center_residual: f64,
    /// Max over centers of `||H_hat_j - H_j||`.
    pub max_regression_gap: f64,
    /// `dt^2 C3`.
    pub gap_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtScaling {
    pub d: usize,
    pub samples: Vec<DtSample>,
    pub residual_slope: f64,
    pub gap_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillSample {
    pub d: usize,
    pub h_x: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillScaling {
    pub dt: f64,
    pub samples: Vec<FillSample>,
    pub strictly_decreasing: bool,
    /// Slope of `ln max_residual` against `ln h_x`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub constants: BoundConstants,
    pub proportional: ProportionalBound,
    /// `min (bound - ||r||)` over the grid.
    pub min_margin: f64,
    pub violations: usize,
    /// `min (proportional - bound)` over the grid.
    pub proportional_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub system: String,
    pub d: usize,
    pub dt: f64,
    pub h_x: f64,
    pub grid: GridSummary,
    pub dt_scaling: Option<DtScaling>,
    pub fill_scaling: Option<FillScaling>,
    pub bounds: Option<BoundCheck>,
    /// Smallest `C1` making the bound hold on the grid with `C2` fixed;
    /// `None` when no `C1` suffices.
    pub calibrated_c1: Option<f64>,
    pub calibration_c2: f64,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<GridSample>,
    #[serde(skip)]
    pub sample_bounds: Vec<f64>,
}

pub const REPORT_FILE: &str = "validation.json";
pub const GRID_FILE: &str = "validation_grid.csv";

impl ValidationReport {
    /// Write the JSON report and the per-point CSV
    /// `x_1..x_n, u_1..u_m, residual_norm, bound`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        let mut w = csv::Writer::from_path(dir.join(GRID_FILE))?;
        if let Some(first) = self.samples.first() {
            let mut header: Vec<String> = (1..=first.x.len()).map(|i| format!("x_{i}")).collect();
            header.extend((1..=first.u.len()).map(|i| format!("u_{i}")));
            header.push("residual_norm".into());
            header.push("bound".into());
            w.write_record(&header)?;
        }
        for (k, s) in self.samples.iter().enumerate() {
            let mut row: Vec<String> = s.x.iter().chain(s.u.iter()).map(|v| format!("{v:.16e}")).collect();
            row.push(format!("{:.16e}", s.residual));
            row.push(match self.sample_bounds.get(k) {
                Some(b) => format!("{b:.16e}"),
                None => String::new(),
            });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Smallest `C1 >= 0` with `base_i + C1 * slope_i >= r_i` for all `i`.
fn calibrate(residuals: &[f64], base: &[f64], slope: &[f64]) -> Option<f64> {
    let mut c1: f64 = 0.0;
    for ((r, b), s) in residuals.iter().zip(base).zip(slope) {
        if r > b {
            if *s <= 0.0 {
                return None;
            }
            c1 = c1.max((r - b) / s);
        }
    }
    Some(c1)
}

/// Check the fitted model against the true flow: grid residuals, the rate
/// in `dt` at the centers, the effect of the fill distance, the bound
/// margin and a calibrated `C1`. Violations are flagged, not raised.
pub fn validate_empirically(
    fitted: &Fitted,
    system: &ControlAffineSystem,
    plan: &ValidationPlan,
) -> Result<ValidationReport> {
    let ds = &fitted.dataset;
    let model = &fitted.surrogate;
    let mut flags = Vec::new();

    let points = plan.grid.points(system);
    let samples = residual_norms(model, system, &ds.sampling, &points)?;
    let residuals: Vec<f64> = samples.iter().map(|s| s.residual).collect();
    let zero_x = DVector::zeros(system.state_dim());
    let zero_u = DVector::zeros(system.input_dim());
    let origin_residual = model.residual(system, &ds.sampling, &zero_x, &zero_u)?.norm();
    if origin_residual >= 1e-8 {
        flags.push(format!("residual at the origin is {origin_residual:.3e}"));
    }
    let grid = GridSummary {
        points: samples.len(),
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        mean_residual: residuals.iter().sum::<f64>() / residuals.len().max(1) as f64,
        origin_residual,
    };

    let opts = CollectionOptions {
        d: ds.centers.len(),
        d_j: ds.triplets.first().map_or(2, |t| t.d_j()),
        seed: ds.seed,
        sigma_threshold: ds.sigma_threshold,
    };

    let dt_scaling = if plan.dt_values.len() >= 2 {
        let samples = plan
            .dt_values
            .iter()
            .map(|dt| dt_sample(system, fitted, opts, *dt, plan))
            .collect::<Result<Vec<_>>>()?;
        let dts: Vec<f64> = samples.iter().map(|s| s.dt).collect();
        let res: Vec<f64> = samples.iter().map(|s| s.max_center_residual).collect();
        let gaps: Vec<f64> = samples.iter().map(|s| s.max_regression_gap).collect();
        let scaling = DtScaling {
            d: opts.d,
            residual_slope: log_log_slope(&dts, &res),
            gap_slope: log_log_slope(&dts, &gaps),
            samples,
        };
        for s in &scaling.samples {
            if s.max_regression_gap > s.gap_bound {
                flags.push(format!(
                    "regression gap {:.3e} exceeds dt^2 C3 = {:.3e} at dt = {}",
                    s.max_regression_gap, s.gap_bound, s.dt
                ));
            }
        }
        Some(scaling)
    } else {
        None
    };

    let fill_scaling = if plan.d_values.len() >= 2 {
        let sampling = SamplingConfig::new(plan.scaling_dt, ds.sampling.substeps)?;
        let samples = plan
            .d_values
            .iter()
            .map(|d| {
                let f = collect_and_fit(system, ds.kernel, sampling, CollectionOptions { d: *d, ..opts })?;
                let r = residual_norms(&f.surrogate, system, &sampling, &points)?;
                Ok(FillSample {
                    d: f.surrogate.centers().len(),
                    h_x: f.dataset.centers.fill_distance,
                    max_residual: r.iter().map(|s| s.residual).fold(0.0, f64::max),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let strictly_decreasing = samples.windows(2).all(|w| w[1].max_residual < w[0].max_residual);
        if !strictly_decreasing {
            flags.push("grid residual does not decrease with the number of centers".into());
        }
        let hs: Vec<f64> = samples.iter().map(|s| s.h_x).collect();
        let rs: Vec<f64> = samples.iter().map(|s| s.max_residual).collect();
        Some(FillScaling {
            dt: plan.scaling_dt,
            slope: log_log_slope(&hs, &rs),
            strictly_decreasing,
            samples,
        })
    } else {
        None
    };

    let mut inputs = BoundInputs::gather(fitted, system, plan.hessian_grid, plan.constants_grid)?;
    inputs.h0 = plan.h0;
    if let Some(h0) = plan.h0 {
        if inputs.h_x > h0 {
            flags.push(format!("fill distance {} exceeds the declared h0 = {h0}", inputs.h_x));
        }
    }
    let calibration_c2 = plan.c2.unwrap_or(1.0);
    let at_zero = compute_constants(&inputs, Some(0.0), Some(calibration_c2))?;
    let at_one = compute_constants(&inputs, Some(1.0), Some(calibration_c2))?;
    let norms: Vec<(f64, f64)> = samples.iter().map(|s| (s.x.norm(), s.u.norm())).collect();
    let base: Vec<f64> = norms.iter().map(|(a, b)| eval_norms(&at_zero, *a, *b)).collect();
    let slope: Vec<f64> = norms
        .iter()
        .zip(&base)
        .map(|((a, b), z)| eval_norms(&at_one, *a, *b) - z)
        .collect();
    let calibrated_c1 = calibrate(&residuals, &base, &slope);
    if calibrated_c1.is_none() {
        flags.push(format!("no C1 makes the bound hold with C2 = {calibration_c2}"));
    }

    let (bounds, sample_bounds) = match (plan.c1, plan.c2) {
        (Some(c1), Some(c2)) => {
            let constants = compute_constants(&inputs, Some(c1), Some(c2))?;
            let prop = proportional(&constants);
            let bound_vals: Vec<f64> = norms.iter().map(|(a, b)| eval_norms(&constants, *a, *b)).collect();
            let margins: Vec<f64> = bound_vals.iter().zip(&residuals).map(|(b, r)| b - r).collect();
            let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
            let violations = margins.iter().filter(|m| **m < 0.0).count();
            if violations > 0 {
                flags.push(format!("bound violated at {violations} grid points with C1 = {c1}, C2 = {c2}"));
            }
            let proportional_margin = norms
                .iter()
                .zip(&bound_vals)
                .map(|((a, b), q)| prop.eval_norms(*a, *b) - q)
                .fold(f64::INFINITY, f64::min);
            (
                Some(BoundCheck {
                    constants,
                    proportional: prop,
                    min_margin,
                    violations,
                    proportional_margin,
                }),
                bound_vals,
            )
        }
        _ => (None, Vec::new()),
    };

    Ok(ValidationReport {
        system: ds.system.clone(),
        d: model.centers().len(),
        dt: ds.sampling.dt,
        h_x: ds.centers.fill_distance,
        grid,
        dt_scaling,
        fill_scaling,
        bounds,
        calibrated_c1,
        calibration_c2,
        flags,
        samples,
        sample_bounds,
    })
}

fn dt_sample(
    system: &ControlAffineSystem,
    fitted: &Fitted,
    opts: CollectionOptions,
    dt: f64,
    plan: &ValidationPlan,
) -> Result<DtSample> {
    let ds = &fitted.dataset;
    let sampling = SamplingConfig::new(dt, ds.sampling.substeps)?;
    let f = collect_and_fit(system, ds.kernel, sampling, opts)?;
    let us = system.input_box().grid(plan.grid.input_points);
    let points: Vec<_> = f
        .surrogate
        .centers()
        .iter()
        .flat_map(|x| us.iter().map(move |u| (x.clone(), u.clone())))
        .collect();
    let r = residual_norms(&f.surrogate, system, &sampling, &points)?;
    let consts = estimate_constants(system, plan.constants_grid);
    let c3 = compute_c3(&consts, &f.dataset.excitation())?;
    let mut max_gap: f64 = 0.0;
    let mut gap_bound = 0.0;
    for (est, x) in f.estimates.iter().zip(f.surrogate.centers()) {
        let g = perturbation_gap(est, x, system, &sampling, c3)?;
        max_gap = max_gap.max(g.gap);
        gap_bound = g.bound;
    }
    Ok(DtSample {
        dt,
        max_center_residual: r.iter().map(|s| s.residual).fold(0.0, f64::max),
        max_regression_gap: max_gap,
        gap_bound,
    })
}
