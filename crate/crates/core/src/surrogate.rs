//! Bilinear surrogates `Psi+ = A Psi + B0 u + sum_i u_i B_i Psi`.
//!
//! [`BilinearSurrogate`] is the kernel EDMD model built from the
//! per-center estimates: with image kernel matrices `K_F[i][j] =
//! k(x_j, F(x_i))`,
//!
//! ```text
//! A   = K_f^T K_X^{-1}
//! B_i = (K_gi - K_f)^T K_X^{-1}
//! B0  = [B_1 Phi(0) ... B_m Phi(0)]
//! ```
//!
//! [`BaselineSurrogate`] fits the same bilinear structure by one pooled
//! least-squares problem over a fixed dictionary.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::TripletSet;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelMatrix, KernelSpec};
use crate::regress::LocalEstimate;
use crate::system::{euler_maps, flow, ControlAffineSystem, SamplingConfig};

pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

/// Shared prediction interface of the bilinear models.
pub trait BilinearModel {
    /// Lifted dimension.
    fn dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Lift of a state; zero at the origin.
    fn lift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn a(&self) -> &DMatrix<f64>;
    fn b0(&self) -> &DMatrix<f64>;
    fn b(&self) -> &[DMatrix<f64>];

    /// `A psi + B0 u + sum_i u_i B_i psi`.
    fn predict_step(&self, psi: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut next = self.a() * psi + self.b0() * u;
        for (ui, bi) in u.iter().zip(self.b()) {
            next += bi * psi * *ui;
        }
        next
    }

    /// Iterate [`BilinearModel::predict_step`] from `lift(x0)`.
    fn rollout(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Rollout {
        let mut lifted = Vec::with_capacity(inputs.len() + 1);
        lifted.push(self.lift(x0));
        for u in inputs {
            let next = self.predict_step(lifted.last().expect("nonempty"), u);
            if !next.iter().all(|v| v.is_finite()) {
                return Rollout { lifted, truncated: true };
            }
            lifted.push(next);
        }
        Rollout { lifted, truncated: false }
    }
}

/// Lifted trajectory `Psi_0, ..., Psi_T`; `truncated` is set when an
/// iterate became non-finite and the trajectory stops before it.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub lifted: Vec<DVector<f64>>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    /// Spectral condition number of `K_X`.
    pub condition: f64,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BilinearSurrogate {
    kernel: Kernel,
    centers: Vec<DVector<f64>>,
    a: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    b0: DMatrix<f64>,
    phi0: DVector<f64>,
    kx_inverse_norm: f64,
    report: BuildReport,
    estimates: Vec<LocalEstimate>,
}

/// Image points `F(x_j)` for the drift and each input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePoints {
    pub f: Vec<DVector<f64>>,
    /// `g[i][j] = g~_i(x_j)`
    pub g_tilde: Vec<Vec<DVector<f64>>>,
}

impl ImagePoints {
    pub fn from_estimates(estimates: &[LocalEstimate]) -> Self {
        let m = estimates.first().map_or(0, |e| e.g_hat().ncols());
        Self {
            f: estimates.iter().map(LocalEstimate::f_hat).collect(),
            g_tilde: (0..m)
                .map(|i| estimates.iter().map(|e| e.g_tilde_hat(i)).collect())
                .collect(),
        }
    }

    /// True Euler-map images; for oracle comparisons.
    pub fn from_system(
        system: &ControlAffineSystem,
        sampling: &SamplingConfig,
        centers: &[DVector<f64>],
    ) -> Result<Self> {
        let maps = centers
            .iter()
            .map(|x| euler_maps(system, sampling, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            f: maps.iter().map(|mp| mp.f.clone()).collect(),
            g_tilde: (0..system.input_dim())
                .map(|i| maps.iter().map(|mp| mp.g_tilde[i].clone()).collect())
                .collect(),
        })
    }
}

/// `K_F^T`, i.e. the matrix whose column `j` is `Phi(F(x_j))`.
fn image_features(kernel: &Kernel, centers: &[DVector<f64>], images: &[DVector<f64>]) -> DMatrix<f64> {
    let cols: Vec<_> = images.iter().map(|y| kernel.features_unchecked(centers, y)).collect();
    DMatrix::from_columns(&cols)
}

/// kEDMD surrogate from per-center estimates (center 0 must be the
/// origin with a zero drift estimate).
pub fn build_kedmd(
    centers: &[DVector<f64>],
    estimates: &[LocalEstimate],
    spec: &KernelSpec,
) -> Result<BilinearSurrogate> {
    if estimates.len() != centers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimates for {} centers",
            estimates.len(),
            centers.len()
        )));
    }
    if let Some((j, _)) = estimates.iter().enumerate().find(|(j, e)| e.center_index != *j) {
        return Err(Error::InvalidArgument(format!("estimate {j} is out of center order")));
    }
    if estimates[0].f_hat.iter().any(|v| *v != 0.0) {
        return Err(Error::Validation("origin estimate must have f_hat = 0".into()));
    }
    let mut model = build_from_images(centers, &ImagePoints::from_estimates(estimates), spec)?;
    model.estimates = estimates.to_vec();
    Ok(model)
}

/// kEDMD surrogate from arbitrary image points.
pub fn build_from_images(
    centers: &[DVector<f64>],
    images: &ImagePoints,
    spec: &KernelSpec,
) -> Result<BilinearSurrogate> {
    let kernel = Kernel::new(*spec)?;
    let kx = KernelMatrix::new(&kernel, centers)?;
    let d = centers.len();
    if images.f.len() != d || images.g_tilde.iter().any(|g| g.len() != d) {
        return Err(Error::InvalidArgument("image points do not cover all centers".into()));
    }
    for p in images.f.iter().chain(images.g_tilde.iter().flatten()) {
        if p.len() != spec.n {
            return Err(Error::DimensionMismatch { expected: spec.n, got: p.len() });
        }
    }
    // A = K_f^T K_X^{-1}  <=>  A^T = K_X^{-1} K_f
    let kf_t = image_features(&kernel, centers, &images.f);
    let a = kx.solve_matrix(&kf_t.transpose()).transpose();
    let b: Vec<DMatrix<f64>> = images
        .g_tilde
        .iter()
        .map(|gi| {
            let diff_t = image_features(&kernel, centers, gi) - &kf_t;
            kx.solve_matrix(&diff_t.transpose()).transpose()
        })
        .collect();
    let phi0 = kernel.features_unchecked(centers, &DVector::zeros(spec.n));
    let b0_cols: Vec<_> = b.iter().map(|bi| bi * &phi0).collect();
    let b0 = if b0_cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&b0_cols)
    };
    let mut warnings = Vec::new();
    if kx.condition() > DEFAULT_CONDITION_LIMIT {
        warnings.push(format!(
            "kernel matrix condition {:.3e} exceeds {:.0e}",
            kx.condition(),
            DEFAULT_CONDITION_LIMIT
        ));
    }
    Ok(BilinearSurrogate {
        kernel,
        centers: centers.to_vec(),
        a,
        b,
        b0,
        phi0,
        kx_inverse_norm: kx.inverse_norm(),
        report: BuildReport {
            condition: kx.condition(),
            min_eigenvalue: kx.min_eigenvalue(),
            warnings,
        },
        estimates: Vec::new(),
    })
}

impl BilinearSurrogate {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn phi0(&self) -> &DVector<f64> {
        &self.phi0
    }

    pub fn report(&self) -> &BuildReport {
        &self.report
    }

    pub fn estimates(&self) -> &[LocalEstimate] {
        &self.estimates
    }

    /// `||K_X^{-1}||_2`.
    pub fn kx_inverse_norm(&self) -> f64 {
        self.kx_inverse_norm
    }

    pub fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        self.kernel.features_unchecked(&self.centers, x)
    }

    /// `max_j ||A Phi(x_j) - Phi(F(x_j))||_inf` over the given images.
    pub fn interpolation_residual(&self, f_images: &[DVector<f64>]) -> f64 {
        self.centers
            .iter()
            .zip(f_images)
            .map(|(x, fx)| (&self.a * self.features(x) - self.features(fx)).amax())
            .fold(0.0, f64::max)
    }

    /// `||A Phi(0) - Phi(0)||_inf`.
    pub fn equilibrium_residual(&self) -> f64 {
        (&self.a * &self.phi0 - &self.phi0).amax()
    }

    /// `r(x, u) = Psi(flow(x, u)) - predict_step(Psi(x), u)`.
    pub fn residual(
        &self,
        system: &ControlAffineSystem,
        sampling: &SamplingConfig,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let next = flow(system, sampling, x, u)?;
        Ok(self.lift(&next) - self.predict_step(&self.lift(x), u))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            kernel: *self.kernel.spec(),
            centers: self.centers.iter().map(|c| c.iter().copied().collect()).collect(),
            a: rows(&self.a),
            b: self.b.iter().map(rows).collect(),
            b0: rows(&self.b0),
            phi0: self.phi0.iter().copied().collect(),
            kx_inverse_norm: self.kx_inverse_norm,
            build_report: self.report.clone(),
            estimates: self.estimates.clone(),
        };
        fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| {
            Error::Parse {
                path: path.to_path_buf(),
                line: e.line() as u64,
                field: "model".into(),
                message: e.to_string(),
            }
        })?;
        let kernel = Kernel::new(file.kernel)?;
        let d = file.centers.len();
        let centers: Vec<DVector<f64>> = file
            .centers
            .iter()
            .map(|c| DVector::from_column_slice(c))
            .collect();
        let a = from_rows(&file.a, d, d)?;
        let b = file
            .b
            .iter()
            .map(|bi| from_rows(bi, d, d))
            .collect::<Result<Vec<_>>>()?;
        let b0 = from_rows(&file.b0, d, b.len())?;
        if file.phi0.len() != d {
            return Err(Error::Validation("phi0 length does not match centers".into()));
        }
        Ok(Self {
            kernel,
            centers,
            a,
            b,
            b0,
            phi0: DVector::from_vec(file.phi0),
            kx_inverse_norm: file.kx_inverse_norm,
            report: file.build_report,
            estimates: file.estimates,
        })
    }
}

impl BilinearModel for BilinearSurrogate {
    fn dim(&self) -> usize {
        self.centers.len()
    }

    fn input_dim(&self) -> usize {
        self.b.len()
    }

    /// `Psi(x) = Phi(x) - Phi(0)`.
    fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.features(x) - &self.phi0
    }

    fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn b0(&self) -> &DMatrix<f64> {
        &self.b0
    }

    fn b(&self) -> &[DMatrix<f64>] {
        &self.b
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kernel: KernelSpec,
    centers: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B0")]
    b0: Vec<Vec<f64>>,
    phi0: Vec<f64>,
    kx_inverse_norm: f64,
    build_report: BuildReport,
    #[serde(default)]
    estimates: Vec<LocalEstimate>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(data: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if data.len() != nrows || data.iter().any(|r| r.len() != ncols) {
        return Err(Error::Validation(format!(
            "matrix shape does not match ({nrows}, {ncols})"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| data[i][j]))
}

/// Lifting used by a [`BaselineSurrogate`].
#[derive(Debug, Clone)]
pub enum Dictionary {
    /// Shifted canonical kernel features `Phi(x) - Phi(0)`.
    KernelFeatures {
        kernel: Kernel,
        centers: Vec<DVector<f64>>,
    },
    /// All monomials of total degree `1..=degree`, by degree then
    /// lexicographically; `[x, x^2, x^3]` for one state and degree 3.
    Monomials { n: usize, degree: u32 },
}

impl Dictionary {
    pub fn kernel_features(spec: &KernelSpec, centers: &[DVector<f64>]) -> Result<Self> {
        Ok(Self::KernelFeatures {
            kernel: Kernel::new(*spec)?,
            centers: centers.to_vec(),
        })
    }

    pub fn monomials(n: usize, degree: u32) -> Self {
        Self::Monomials { n, degree }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::KernelFeatures { .. } => "kernel",
            Self::Monomials { .. } => "monomial",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::KernelFeatures { centers, .. } => centers.len(),
            Self::Monomials { n, degree } => monomial_exponents(*n, *degree).len(),
        }
    }

    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::KernelFeatures { kernel, centers } => {
                kernel.features_unchecked(centers, x)
                    - kernel.features_unchecked(centers, &DVector::zeros(x.len()))
            }
            Self::Monomials { n, degree } => {
                let exps = monomial_exponents(*n, *degree);
                DVector::from_iterator(
                    exps.len(),
                    exps.iter().map(|e| {
                        e.iter()
                            .zip(x.iter())
                            .map(|(p, v)| v.powi(*p as i32))
                            .product::<f64>()
                    }),
                )
            }
        }
    }
}

fn monomial_exponents(n: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for p in (0..=remaining).rev() {
            prefix.push(p);
            rec(n, remaining - p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 1..=degree {
        rec(n, total, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Bilinear EDMD fitted by pooled least squares over a fixed dictionary.
#[derive(Debug, Clone)]
pub struct BaselineSurrogate {
    dictionary: Dictionary,
    a: DMatrix<f64>,
    b0: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    /// Numerical rank of the regressor matrix.
    pub rank: usize,
    /// Number of unknowns per output row.
    pub unknowns: usize,
    pub warnings: Vec<String>,
}

impl BaselineSurrogate {
    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }
}

/// Fit `(A, B0, B_1..B_m)` minimizing the sum over all triplets of
/// `||Psi(x+) - A Psi(x) - B0 u - sum_i u_i B_i Psi(x)||^2`.
/// Rank-deficient problems get the minimum-norm solution and a warning.
pub fn build_baseline(triplets: &[TripletSet], dictionary: Dictionary) -> Result<BaselineSurrogate> {
    let samples: Vec<(&DVector<f64>, &DVector<f64>, &DVector<f64>)> = triplets
        .iter()
        .flat_map(|t| {
            t.inputs
                .iter()
                .zip(&t.successors)
                .map(move |(u, xp)| (&t.center, u, xp))
        })
        .collect();
    let Some(first) = samples.first() else {
        return Err(Error::InvalidArgument("no triplets to fit".into()));
    };
    let m = first.1.len();
    let dim = dictionary.dim();
    let p = dim + m + m * dim;
    let count = samples.len();
    let mut z = DMatrix::zeros(count, p);
    let mut y = DMatrix::zeros(count, dim);
    for (row, (x, u, xp)) in samples.iter().enumerate() {
        let psi = dictionary.lift(x);
        z.view_mut((row, 0), (1, dim)).copy_from(&psi.transpose());
        z.view_mut((row, dim), (1, m)).copy_from(&u.transpose());
        for i in 0..m {
            let block = &psi * u[i];
            z.view_mut((row, dim + m + i * dim), (1, dim))
                .copy_from(&block.transpose());
        }
        y.view_mut((row, 0), (1, dim))
            .copy_from(&dictionary.lift(xp).transpose());
    }
    let svd = z.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * f64::EPSILON * count.max(p) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let w_t = svd
        .solve(&y, eps)
        .map_err(|e| Error::Validation(format!("baseline least squares failed: {e}")))?;
    let w = w_t.transpose();
    let mut warnings = Vec::new();
    if rank < p {
        warnings.push(format!(
            "{} regression is rank deficient ({rank} of {p}); using the minimum-norm solution",
            dictionary.name()
        ));
    }
    Ok(BaselineSurrogate {
        a: w.columns(0, dim).into_owned(),
        b0: w.columns(dim, m).into_owned(),
        b: (0..m)
            .map(|i| w.columns(dim + m + i * dim, dim).into_owned())
            .collect(),
        dictionary,
        rank,
        unknowns: p,
        warnings,
    })
}

impl BilinearModel for BaselineSurrogate {
    fn dim(&self) -> usize {
        self.dictionary.dim()
    }

    fn input_dim(&self) -> usize {
        self.b.len()
    }

    fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.dictionary.lift(x)
    }

    fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn b0(&self) -> &DMatrix<f64> {
        &self.b0
    }

    fn b(&self) -> &[DMatrix<f64>] {
        &self.b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CollectionOptions, Dataset};
    use crate::regress::fit_dataset;
    use crate::system::{pendulum, zone_temp};
    use approx::assert_abs_diff_eq;

    fn s(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn zone_model(d: usize, dt: f64) -> (Dataset, BilinearSurrogate) {
        let ds = Dataset::generate(
            &zone_temp(),
            KernelSpec::new(1, 1, 1.0).unwrap(),
            SamplingConfig::new(dt, 100).unwrap(),
            CollectionOptions { d, d_j: 2, seed: 5, sigma_threshold: 0.1 },
        )
        .unwrap();
        let est = fit_dataset(&ds).unwrap();
        let model = build_kedmd(&ds.centers.points, &est, &ds.kernel).unwrap();
        (ds, model)
    }

    #[test]
    fn interpolation_identity_and_equilibrium() {
        for d in [5, 9, 17] {
            let (_, model) = zone_model(d, 0.01);
            let f_images: Vec<_> = model.estimates().iter().map(LocalEstimate::f_hat).collect();
            assert!(model.interpolation_residual(&f_images) < 1e-9);
            assert!(model.equilibrium_residual() < 1e-9);
        }
    }

    #[test]
    fn b0_columns_are_b_times_phi0() {
        let (_, model) = zone_model(7, 0.01);
        let col = model.b()[0].clone() * model.phi0();
        assert_eq!(model.b0().column(0), col.column(0));
    }

    #[test]
    fn single_center_gives_unit_a() {
        let spec = KernelSpec::new(1, 1, 1.0).unwrap();
        let est = LocalEstimate {
            center_index: 0,
            f_hat: vec![0.0],
            g_hat: vec![vec![-0.01]],
            residual_norm: 0.0,
        };
        let model = build_kedmd(&[s(0.0)], &[est], &spec).unwrap();
        assert_eq!(model.a()[(0, 0)], 1.0);
    }

    #[test]
    fn origin_estimate_must_have_zero_drift() {
        let spec = KernelSpec::new(1, 1, 1.0).unwrap();
        let est = LocalEstimate {
            center_index: 0,
            f_hat: vec![0.1],
            g_hat: vec![vec![-0.01]],
            residual_norm: 0.0,
        };
        assert!(build_kedmd(&[s(0.0)], &[est], &spec).is_err());
    }

    #[test]
    fn prediction_examples() {
        let (_, model) = zone_model(5, 0.01);
        let zero = DVector::zeros(5);
        assert_eq!(model.predict_step(&zero, &s(0.0)), zero);
        let psi = model.lift(&s(0.3));
        assert_eq!(model.predict_step(&psi, &s(0.0)), model.a() * &psi);
        let roll = model.rollout(&s(0.0), &vec![s(0.0); 20]);
        assert!(!roll.truncated);
        assert!(roll.lifted.iter().all(|p| p.iter().all(|v| *v == 0.0)));
        let one = model.rollout(&s(0.2), &[s(1.5)]);
        assert_eq!(one.lifted[1], model.predict_step(&model.lift(&s(0.2)), &s(1.5)));
    }

    #[test]
    fn exact_euler_images_reproduce_the_lift() {
        let sys = pendulum();
        let sampling = SamplingConfig::new(0.05, 20).unwrap();
        let spec = KernelSpec::new(2, 1, 1.5).unwrap();
        let centers = crate::dataset::build_centers(sys.state_box(), 9).unwrap().points;
        let images = ImagePoints::from_system(&sys, &sampling, &centers).unwrap();
        let model = build_from_images(&centers, &images, &spec).unwrap();
        let maps: Vec<_> = centers
            .iter()
            .map(|x| euler_maps(&sys, &sampling, x).unwrap())
            .collect();
        for (x, mp) in centers.iter().zip(&maps) {
            let next = model.predict_step(&model.lift(x), &DVector::zeros(1));
            assert!((next - model.lift(&mp.f)).amax() < 1e-9);
        }
    }

    #[test]
    fn residual_vanishes_at_origin() {
        let sys = zone_temp();
        let (ds, model) = zone_model(9, 0.01);
        let r = model.residual(&sys, &ds.sampling, &s(0.0), &s(0.0)).unwrap();
        assert!(r.norm() < 1e-8);
    }

    #[test]
    fn residual_is_continuous() {
        let sys = zone_temp();
        let (ds, model) = zone_model(9, 0.01);
        let step = 1e-3;
        let mut prev = model.residual(&sys, &ds.sampling, &s(-0.4), &s(1.0)).unwrap();
        for k in 1..=200 {
            let x = -0.4 + step * k as f64;
            let r = model.residual(&sys, &ds.sampling, &s(x), &s(1.0)).unwrap();
            assert!((&r - &prev).norm() < 50.0 * step);
            prev = r;
        }
    }

    #[test]
    fn bilinearity_superposition() {
        let (_, model) = zone_model(7, 0.01);
        let psi1 = model.lift(&s(0.3));
        let psi2 = model.lift(&s(-0.8));
        let (u1, u2) = (s(0.7), s(-1.4));
        // linear in psi for fixed u (with B0 u removed)
        let lin = |p: &DVector<f64>, u: &DVector<f64>| model.predict_step(p, u) - model.b0() * u;
        let lhs = lin(&(&psi1 * 2.0 + &psi2 * -3.0), &u1);
        let rhs = lin(&psi1, &u1) * 2.0 + lin(&psi2, &u1) * -3.0;
        assert!((lhs - rhs).amax() < 1e-12);
        // affine in u for fixed psi
        let mid = model.predict_step(&psi1, &((&u1 + &u2) * 0.5));
        let avg = (model.predict_step(&psi1, &u1) + model.predict_step(&psi1, &u2)) * 0.5;
        assert!((mid - avg).amax() < 1e-12);
    }

    #[test]
    fn model_round_trip_is_bitwise() {
        let (_, model) = zone_model(5, 0.01);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = BilinearSurrogate::load(&path).unwrap();
        assert_eq!(model.a(), back.a());
        assert_eq!(model.b(), back.b());
        assert_eq!(model.b0(), back.b0());
        assert_eq!(model.phi0(), back.phi0());
        let psi = model.lift(&s(0.37));
        assert_eq!(model.predict_step(&psi, &s(-1.1)), back.predict_step(&psi, &s(-1.1)));
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["kernel", "centers", "A", "B", "B0", "phi0", "build_report"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn monomial_dictionary() {
        let dict = Dictionary::monomials(1, 3);
        assert_eq!(dict.lift(&s(0.0)), DVector::zeros(3));
        assert_eq!(dict.lift(&s(2.0)), DVector::from_vec(vec![2.0, 4.0, 8.0]));
        assert_eq!(Dictionary::monomials(2, 3).dim(), 9);
    }

    #[test]
    fn baseline_recovers_exact_bilinear_model() {
        // x+ = x + 0.1 u in 1D with identity lift: Psi = [x]; data from this
        // linear model is consistent with A = 1, B0 = 0.1, B1 = 0.
        let dict = Dictionary::monomials(1, 1);
        let triplets: Vec<_> = [-0.8, -0.3, 0.2, 0.6]
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let inputs = vec![s(-1.0), s(0.5), s(1.2)];
                let succ = inputs.iter().map(|u| s(x + 0.1 * u[0] - 0.05 * u[0] * x)).collect();
                TripletSet::new(j, s(*x), inputs, succ).unwrap()
            })
            .collect();
        let base = build_baseline(&triplets, dict).unwrap();
        assert_abs_diff_eq!(base.a()[(0, 0)], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(base.b0()[(0, 0)], 0.1, epsilon = 1e-8);
        assert_abs_diff_eq!(base.b()[0][(0, 0)], -0.05, epsilon = 1e-8);
        assert!(base.warnings.is_empty());
    }

    #[test]
    fn kernel_baseline_is_rank_deficient_with_two_inputs_per_center() {
        let (ds, _) = zone_model(5, 0.01);
        let dict = Dictionary::kernel_features(&ds.kernel, &ds.centers.points).unwrap();
        let base = build_baseline(&ds.triplets, dict).unwrap();
        assert!(base.rank < base.unknowns);
        assert_eq!(base.warnings.len(), 1);
    }
}
