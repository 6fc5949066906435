//! Leading eigendata of the discretized transfer operator and Kac integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::InducedTable;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData<T> {
    pub z: T,
    pub lambda: T,
    /// Eigenfunction on the grid, `min = 1`.
    pub h: Vec<T>,
    /// Left eigenvector, non-negative, summing to 1.
    pub nu: Vec<T>,
    pub residual: T,
    pub power_iter_rate: T,
    pub iterations: usize,
    /// Second-difference bound on the linear interpolation error of `H`, relative to `min H`.
    pub interp_error: T,
}

impl<T: Real> SpectralData<T> {
    pub fn log_lambda(&self) -> T {
        self.lambda.ln()
    }

    /// `mu = H nu`, normalized.
    pub fn mu(&self) -> Vec<T> {
        let s: T = self.h.iter().zip(&self.nu).map(|(&h, &n)| h * n).sum();
        self.h
            .iter()
            .zip(&self.nu)
            .map(|(&h, &n)| h * n / s)
            .collect()
    }
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Power iteration for `(lambda, H)` and the adjoint iteration for `nu`.
/// `warm` seeds the right iteration (any positive grid function).
pub fn spectral_solve<T: Real>(
    table: &InducedTable<T>,
    z: T,
    max_iter: usize,
    warm: Option<&[T]>,
) -> Result<SpectralData<T>> {
    let g = table.grid_size();
    let w = table.weights(z);
    let mut psi: Vec<T> = warm.map_or_else(|| vec![T::one(); g], |h| h.to_vec());
    let s0 = sup(&psi);
    psi.iter_mut().for_each(|v| *v = *v / s0);
    let target = T::tol(1e-14);
    let accept = T::lit(RESIDUAL_TOL);
    let mut lambda = T::zero();
    let mut residual = T::infinity();
    let mut prev_res = T::infinity();
    let mut rate = T::zero();
    let mut best = (T::infinity(), T::zero(), psi.clone());
    let mut stalled = 0;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let l = table.apply(&w, &psi);
        lambda = sup(&l);
        residual = l
            .iter()
            .zip(&psi)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - lambda * b).abs()));
        if residual.is_finite() && prev_res.is_finite() && prev_res > T::zero() {
            rate = residual / prev_res;
        }
        if residual < best.0 {
            best = (residual, lambda, psi.clone());
            stalled = 0;
        } else {
            stalled += 1;
        }
        if residual <= target || (stalled >= 5 && best.0 <= accept) {
            break;
        }
        prev_res = residual;
        psi = l.into_iter().map(|v| v / lambda).collect();
    }
    if best.0 < residual {
        residual = best.0;
        lambda = best.1;
        psi = best.2;
    }
    if !(residual <= accept) {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual.to_f64_lossy(),
        });
    }
    let hmin = psi.iter().fold(T::infinity(), |m, &x| m.min(x));
    let h: Vec<T> = psi.iter().map(|&v| v / hmin).collect();
    let nu = adjoint_solve(table, &w, max_iter);
    let interp_error = (1..g.saturating_sub(1))
        .map(|j| (h[j + 1] - T::lit(2.0) * h[j] + h[j - 1]).abs() / T::lit(8.0))
        .fold(T::zero(), T::max);
    Ok(SpectralData {
        z,
        lambda,
        h,
        nu,
        residual,
        power_iter_rate: rate,
        iterations,
        interp_error,
    })
}

fn adjoint_solve<T: Real>(table: &InducedTable<T>, w: &[T], max_iter: usize) -> Vec<T> {
    let g = table.grid_size();
    let mut nu = vec![T::one() / T::from_usize_lossy(g); g];
    let tol = T::tol(1e-14);
    let mut best = T::infinity();
    let mut stalled = 0;
    for _ in 0..max_iter {
        let next = table.apply_adjoint(w, &nu);
        let s: T = next.iter().copied().sum();
        let next: Vec<T> = next.into_iter().map(|v| (v / s).max(T::zero())).collect();
        let tv: T = next.iter().zip(&nu).map(|(&a, &b)| (a - b).abs()).sum();
        nu = next;
        if tv < best {
            best = tv;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if tv <= tol || stalled >= 5 {
            break;
        }
    }
    nu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacIntegrals<T> {
    /// `int tau dmu_Z`.
    pub tau_mean: T,
    /// `m_Z(M_0) = 1 / tau_mean`.
    pub m_mass: T,
    /// `mu_Z(K_i)` per branch.
    pub branch_mass: Vec<T>,
}

/// `mu_Z(K_i) = nu(L_i H) / (lambda nu(H))` and `tau_mean = sum_i n_i mu_Z(K_i)`.
pub fn kac_integrals<T: Real>(table: &InducedTable<T>, sp: &SpectralData<T>) -> KacIntegrals<T> {
    let w = table.weights(sp.z);
    let nu_h: T = sp.nu.iter().zip(&sp.h).map(|(&a, &b)| a * b).sum();
    let denom = sp.lambda * nu_h;
    let branch_mass: Vec<T> = (0..table.branch_count())
        .into_par_iter()
        .map(|i| {
            let li = table.apply_branch(&w, &sp.h, i);
            li.iter().zip(&sp.nu).map(|(&a, &b)| a * b).sum::<T>() / denom
        })
        .collect();
    let tau_mean: T = branch_mass
        .iter()
        .zip(&table.times)
        .map(|(&m, &n)| m * T::from_usize_lossy(n))
        .sum();
    KacIntegrals {
        tau_mean,
        m_mass: T::one() / tau_mean,
        branch_mass,
    }
}

/// `h_{m_Z} + int A0 dm_Z = Z + m_Z(M_0) log lambda_Z`.
pub fn free_energy<T: Real>(z: T, sp: &SpectralData<T>, kac: &KacIntegrals<T>) -> T {
    z + kac.m_mass * sp.log_lambda()
}

/// `max/min` of `L_Z^k 1` over the grid for `k = 1..=n`.
pub fn distortion_ratios<T: Real>(table: &InducedTable<T>, z: T, n: usize) -> Vec<T> {
    let w = table.weights(z);
    let mut psi = vec![T::one(); table.grid_size()];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        psi = table.apply(&w, &psi);
        let mx = psi.iter().fold(T::zero(), |m, &x| m.max(x));
        let mn = psi.iter().fold(T::infinity(), |m, &x| m.min(x));
        out.push(mx / mn);
        psi.iter_mut().for_each(|v| *v = *v / mx);
    }
    out
}
