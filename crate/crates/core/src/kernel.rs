//! Wendland radial basis functions and the objects derived from them.
//!
//! A [`Kernel`] evaluates `k(x, y) = theta(||x - y|| / scale)` where `theta`
//! is the compactly supported Wendland profile of smoothness `s`. The
//! profile is stored as an expanded polynomial on `[0, 1)`, which makes the
//! first and second radial derivatives exact.
//!
//! The canonical features of a center set are `phi_j(x) = k(x_j, x)`; stacked
//! they form `Phi(x)`, and `Psi(x) = Phi(x) - Phi(0)` is the shifted lift the
//! surrogate evolves.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::{per_axis_count, BoxDomain};
use crate::error::{Error, Result};

/// Centers closer than this (Euclidean) are treated as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Default grid resolution for the Hessian-norm bound.
pub const DEFAULT_HESSIAN_GRID: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// State dimension.
    pub n: usize,
    /// Wendland smoothness degree; the kernel is `C^{2s}`.
    pub s: u32,
    /// Support radius.
    pub scale: f64,
}

impl KernelSpec {
    pub fn new(n: usize, s: u32, scale: f64) -> Result<Self> {
        let spec = Self { n, s, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidKernel("state dimension n must be >= 1".into()));
        }
        if self.s == 0 {
            return Err(Error::InvalidKernel(
                "smoothness s must be >= 1 (twice differentiable features)".into(),
            ));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "support scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, r: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    fn scale(&self, a: f64) -> Poly {
        Poly(self.0.iter().map(|c| a * c).collect())
    }

    fn add(&self, other: &Poly) -> Poly {
        let len = self.0.len().max(other.0.len());
        Poly(
            (0..len)
                .map(|k| self.0.get(k).unwrap_or(&0.0) + other.0.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }

    /// `(1 - r) p(r)`
    fn times_one_minus_r(&self) -> Poly {
        let mut out = self.0.clone();
        out.push(0.0);
        for k in 1..out.len() {
            out[k] -= self.0[k - 1];
        }
        Poly(out)
    }

    /// `p(r) / r`; the constant coefficient must vanish.
    fn div_r(&self) -> Poly {
        Poly(self.0.iter().skip(1).copied().collect())
    }
}

/// `(1 - r)^power * poly(r)`, evaluated in factored form so nothing
/// cancels near the support boundary.
#[derive(Debug, Clone, PartialEq)]
struct Factored {
    power: i32,
    poly: Poly,
}

impl Factored {
    fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let r = r.max(0.0);
        (1.0 - r).powi(self.power) * self.poly.eval(r)
    }
}

/// Wendland profile `theta_{n,s}` on `[0, 1)` and its radial derivatives,
/// normalized so that `theta(0) = 1`.
///
/// For `n <= 3` and `s = 1` the profile is `(1 - r)^4 (4r + 1)`. In general
/// it is `(1 - r)^{l+s} q_s(r)` with `l = floor(n/2) + s + 1`, and
/// dimensions below 3 use the `n = 3` profile.
#[derive(Debug, Clone, PartialEq)]
struct Profile {
    theta: Factored,
    dtheta: Factored,
    d2theta: Factored,
    /// `theta'(r) / r`, regular at 0 because `theta'(0) = 0` for `s >= 1`.
    dtheta_over_r: Factored,
}

fn wendland_profile(n: usize, s: u32) -> Result<Profile> {
    let l = (n.max(3) / 2) as f64 + s as f64 + 1.0;
    let q = match s {
        1 => vec![1.0, l + 1.0],
        2 => vec![3.0, 3.0 * l + 6.0, l * l + 4.0 * l + 3.0],
        3 => vec![
            15.0,
            15.0 * l + 45.0,
            6.0 * l * l + 36.0 * l + 45.0,
            l.powi(3) + 9.0 * l * l + 23.0 * l + 15.0,
        ],
        other => return Err(Error::UnimplementedSmoothness(other)),
    };
    let q0 = q[0];
    let q = Poly(q.into_iter().map(|c| c / q0).collect());
    let dq = q.derivative();
    let d2q = dq.derivative();
    let p = l as i32 + s as i32;
    let pf = p as f64;
    // theta' = (1-r)^{p-1} [ -p q + (1-r) q' ]
    let w = q.scale(-pf).add(&dq.times_one_minus_r());
    // theta'' = (1-r)^{p-2} [ p(p-1) q - 2p (1-r) q' + (1-r)^2 q'' ]
    let v = q
        .scale(pf * (pf - 1.0))
        .add(&dq.times_one_minus_r().scale(-2.0 * pf))
        .add(&d2q.times_one_minus_r().times_one_minus_r());
    debug_assert!(w.0[0].abs() < 1e-12);
    Ok(Profile {
        theta: Factored { power: p, poly: q },
        dtheta_over_r: Factored { power: p - 1, poly: w.div_r() },
        dtheta: Factored { power: p - 1, poly: w },
        d2theta: Factored { power: p - 2, poly: v },
    })
}

/// Raw radial profile `theta_{n,s}(r)` (no support scaling).
pub fn eval_theta(spec: &KernelSpec, r: f64) -> Result<f64> {
    Ok(wendland_profile(spec.n, spec.s)?.theta.eval(r))
}

/// A validated Wendland kernel with precomputed radial derivatives.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    profile: Profile,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let profile = wendland_profile(spec.n, spec.s)?;
        Ok(Self { spec, profile })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    /// `theta(r)`, zero for `r >= 1`.
    pub fn theta(&self, r: f64) -> f64 {
        self.profile.theta.eval(r)
    }

    pub fn theta_prime(&self, r: f64) -> f64 {
        self.profile.dtheta.eval(r)
    }

    pub fn theta_second(&self, r: f64) -> f64 {
        self.profile.d2theta.eval(r)
    }

    fn theta_prime_over_r(&self, r: f64) -> f64 {
        self.profile.dtheta_over_r.eval(r)
    }

    /// Diagonal value `k(x, x) = theta(0)`.
    pub fn diagonal(&self) -> f64 {
        self.theta(0.0)
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.spec.n {
            return Err(Error::DimensionMismatch {
                expected: self.spec.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `k(x, y)`.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        // Sum in a fixed order so k(x, y) and k(y, x) agree bitwise.
        let dist2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        self.theta(dist2.sqrt() / self.spec.scale)
    }

    /// Canonical feature vector `Phi(x) = [k(x_1, x), ..., k(x_d, x)]`.
    pub fn features(&self, centers: &[DVector<f64>], x: &DVector<f64>) -> Result<DVector<f64>> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("center set is empty".into()));
        }
        self.check_dim(x)?;
        for c in centers {
            self.check_dim(c)?;
        }
        Ok(self.features_unchecked(centers, x))
    }

    pub(crate) fn features_unchecked(&self, centers: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(centers.len(), centers.iter().map(|c| self.eval_unchecked(c, x)))
    }

    /// Shifted lift `Psi(x) = Phi(x) - Phi(0)`.
    pub fn lifted_state(&self, centers: &[DVector<f64>], x: &DVector<f64>) -> Result<DVector<f64>> {
        let phi = self.features(centers, x)?;
        let phi0 = self.features_unchecked(centers, &DVector::zeros(self.spec.n));
        Ok(phi - phi0)
    }

    /// Gradient of `x -> phi_center(x)`.
    pub fn feature_gradient(&self, center: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let z = x - center;
        let sigma = self.spec.scale;
        let r = z.norm() / sigma;
        // grad = theta'(r) / r * z / sigma^2
        z * (self.theta_prime_over_r(r) / (sigma * sigma))
    }

    /// Hessian of `x -> phi_center(x)`.
    ///
    /// With `z = x - center`, `r = |z| / sigma` and unit direction `e`:
    /// `H = [theta''(r) e e^T + theta'(r)/r (I - e e^T)] / sigma^2`.
    pub fn feature_hessian(&self, center: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.spec.n;
        let z = x - center;
        let sigma2 = self.spec.scale * self.spec.scale;
        let r = z.norm() / self.spec.scale;
        if r >= 1.0 {
            return DMatrix::zeros(n, n);
        }
        let radial = self.theta_second(r);
        let tangential = self.theta_prime_over_r(r);
        let mut h = DMatrix::identity(n, n) * tangential;
        let znorm = z.norm();
        if znorm > 0.0 {
            let e = z / znorm;
            h += (&e * e.transpose()) * (radial - tangential);
        }
        h / sigma2
    }

    /// Spectral norm of [`Kernel::feature_hessian`]; its eigenvalues are
    /// `theta''(r)` (radial) and `theta'(r)/r` (tangential, if `n > 1`).
    pub fn feature_hessian_norm(&self, center: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let dist2: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let r = dist2.sqrt() / self.spec.scale;
        if r >= 1.0 {
            return 0.0;
        }
        let sigma2 = self.spec.scale * self.spec.scale;
        let mut norm = self.theta_second(r).abs();
        if self.spec.n > 1 {
            norm = norm.max(self.theta_prime_over_r(r).abs());
        }
        norm / sigma2
    }

    /// Native-space norms of the canonical features, `sqrt(k(x_j, x_j))`,
    /// and the Euclidean norm of their stack.
    pub fn rkhs_feature_norms(&self, centers: &[DVector<f64>]) -> (Vec<f64>, f64) {
        let per: Vec<f64> = centers
            .iter()
            .map(|c| self.eval_unchecked(c, c).sqrt())
            .collect();
        let stacked = per.iter().map(|v| v * v).sum::<f64>().sqrt();
        (per, stacked)
    }
}

/// Grid-maximized bound on the feature Hessian norms over a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianBound {
    pub d_phi: f64,
    pub points_per_axis: usize,
}

/// Estimate `D_phi = max_j max_{x in domain} ||Hess phi_{x_j}(x)||`.
///
/// In one dimension `grid_resolution` points are used; in higher
/// dimensions the tensor grid is coarsened to about `grid_resolution^2`
/// points in total. Centers are added to the probe set, since the norm
/// typically peaks at `x = x_j`.
pub fn estimate_d_phi(
    kernel: &Kernel,
    centers: &[DVector<f64>],
    domain: &BoxDomain,
    grid_resolution: usize,
) -> Result<HessianBound> {
    if domain.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: domain.dim(),
        });
    }
    let k = if domain.dim() == 1 {
        grid_resolution.max(2)
    } else {
        per_axis_count(grid_resolution.saturating_mul(grid_resolution), domain.dim())
    };
    let mut probes = domain.grid(k);
    probes.extend(centers.iter().filter(|c| domain.contains(c)).cloned());
    let d_phi = centers
        .iter()
        .flat_map(|c| probes.iter().map(move |x| kernel.feature_hessian_norm(c, x)))
        .fold(0.0, f64::max);
    Ok(HessianBound {
        d_phi,
        points_per_axis: k,
    })
}

/// Symmetric positive definite kernel matrix with cached factorization.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl KernelMatrix {
    /// `K[i][j] = k(x_j, x_i)`.
    pub fn new(kernel: &Kernel, centers: &[DVector<f64>]) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("center set is empty".into()));
        }
        for c in centers {
            kernel.check_dim(c)?;
        }
        check_distinct(centers)?;
        let d = centers.len();
        let mut entries = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v = kernel.eval_unchecked(&centers[j], &centers[i]);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        let cholesky = Cholesky::new(entries.clone()).ok_or(Error::NumericallyIndefinite)?;
        let eig = SymmetricEigen::new(entries.clone());
        let min_eigenvalue = eig.eigenvalues.min();
        let max_eigenvalue = eig.eigenvalues.max();
        if min_eigenvalue <= 0.0 {
            return Err(Error::NumericallyIndefinite);
        }
        Ok(Self {
            entries,
            cholesky,
            min_eigenvalue,
            max_eigenvalue,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    /// Spectral condition number.
    pub fn condition(&self) -> f64 {
        self.max_eigenvalue / self.min_eigenvalue
    }

    /// `||K^{-1}||_2 = 1 / lambda_min(K)`.
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self.min_eigenvalue
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve(rhs)
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky.solve(rhs)
    }
}

/// Error if any two points are within [`DUPLICATE_TOLERANCE`].
pub fn check_distinct(points: &[DVector<f64>]) -> Result<()> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let distance = (&points[i] - &points[j]).norm();
            if distance < DUPLICATE_TOLERANCE {
                return Err(Error::DuplicateCenters {
                    first: i,
                    second: j,
                    distance,
                });
            }
        }
    }
    Ok(())
}
