//! Per-center least squares for the Euler maps.
//!
//! For center `x_j` the data satisfy `x+_jl ~ f(x_j) + G(x_j) u_jl`, so
//! `H_j = [f(x_j) G(x_j)]` is estimated from `[x+] ~ H_j Ubar_j`. At the
//! origin the drift is known to vanish and only `G` is fitted.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TripletSet};
use crate::error::{Error, Result};
use crate::system::{euler_maps, spectral_norm, ControlAffineSystem, SamplingConfig};

/// Singular values below this make the regression ill-posed.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub center_index: usize,
    /// Estimate of `f(x_j) = x_j + dt f_c(x_j)`.
    pub f_hat: Vec<f64>,
    /// Estimate of `G(x_j) = dt G_c(x_j)`, row-major `n x m`.
    pub g_hat: Vec<Vec<f64>>,
    pub residual_norm: f64,
}

impl LocalEstimate {
    pub fn f_hat(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.f_hat)
    }

    pub fn g_hat(&self) -> DMatrix<f64> {
        let n = self.g_hat.len();
        let m = self.g_hat.first().map_or(0, Vec::len);
        DMatrix::from_fn(n, m, |i, k| self.g_hat[i][k])
    }

    /// `[f_hat G_hat]`, shape `n x (m + 1)`.
    pub fn h_hat(&self) -> DMatrix<f64> {
        let g = self.g_hat();
        let (n, m) = g.shape();
        let mut h = DMatrix::zeros(n, m + 1);
        h.set_column(0, &self.f_hat());
        h.view_mut((0, 1), (n, m)).copy_from(&g);
        h
    }

    /// Image of the center under the estimated `g~_i = f + G e_i`.
    pub fn g_tilde_hat(&self, i: usize) -> DVector<f64> {
        self.f_hat() + self.g_hat().column(i)
    }
}

/// Solves `min_X ||A X - B||_F` for `A` of full column rank via QR.
fn least_squares(a: DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = a.qr();
    let r = qr.r();
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

/// Fit `H_j` for one center. With `is_origin` the drift column is fixed to
/// zero and `G` solves the reduced problem `min ||[x+] - G U||`.
pub fn fit_local(triplets: &TripletSet, is_origin: bool) -> Result<LocalEstimate> {
    let ubar = triplets.input_matrix();
    let xplus = triplets.successor_matrix();
    let sigma_min = if ubar.ncols() >= ubar.nrows() {
        ubar.clone().svd(false, false).singular_values.min()
    } else {
        0.0
    };
    if !(sigma_min > RANK_TOLERANCE) {
        return Err(Error::RankDeficient {
            center: triplets.center_index,
            sigma_min,
        });
    }
    let n = xplus.nrows();
    let m = ubar.nrows() - 1;
    let rank_err = || Error::RankDeficient {
        center: triplets.center_index,
        sigma_min,
    };
    let h = if is_origin {
        let u = ubar.rows(1, m).into_owned();
        let g_t = least_squares(u.transpose(), &xplus.transpose()).ok_or_else(rank_err)?;
        let mut h = DMatrix::zeros(n, m + 1);
        h.view_mut((0, 1), (n, m)).copy_from(&g_t.transpose());
        h
    } else {
        least_squares(ubar.transpose(), &xplus.transpose())
            .ok_or_else(rank_err)?
            .transpose()
    };
    let residual_norm = (&xplus - &h * &ubar).norm();
    Ok(LocalEstimate {
        center_index: triplets.center_index,
        f_hat: h.column(0).iter().copied().collect(),
        g_hat: (0..n)
            .map(|i| (1..=m).map(|k| h[(i, k)]).collect())
            .collect(),
        residual_norm,
    })
}

/// Estimates for every center of a dataset; center 0 is the origin.
pub fn fit_dataset(dataset: &Dataset) -> Result<Vec<LocalEstimate>> {
    dataset
        .triplets
        .par_iter()
        .map(|t| fit_local(t, t.center_index == 0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationGap {
    /// `||H_hat_j - [f(x_j) G(x_j)]||_2`
    pub gap: f64,
    /// `dt^2 C_3`
    pub bound: f64,
}

/// Compare an estimate with the true Euler maps at its center.
pub fn perturbation_gap(
    estimate: &LocalEstimate,
    center: &DVector<f64>,
    system: &ControlAffineSystem,
    sampling: &SamplingConfig,
    c3: f64,
) -> Result<PerturbationGap> {
    let truth = euler_maps(system, sampling, center)?.stacked();
    let gap = spectral_norm(&(estimate.h_hat() - truth));
    Ok(PerturbationGap {
        gap,
        bound: sampling.dt * sampling.dt * c3,
    })
}
