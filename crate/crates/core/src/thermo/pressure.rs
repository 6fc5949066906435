//! Hölder data of the induced potential, the critical parameter, the root of
//! `lambda_Z = 1`, case classification and cross-band comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::potential::Potential;
use super::spectral::{
    free_energy, kac_integrals, spectral_solve, KacIntegrals, SpectralData, DEFAULT_MAX_ITER,
    RESIDUAL_TOL,
};
use super::table::{InducedTable, DEFAULT_GRID, DEFAULT_SERIES_TOL};
use crate::error::{Error, Result};
use crate::lorenz_map::LorenzMap;
use crate::millefeuille::{symbolic_metric, MilleFeuilles};
use crate::report::{num, Table};
use crate::scalar::Real;

pub const MIN_HOLDER_PAIRS: usize = 50;
pub const CASE_MARGIN: f64 = 1e-3;
pub const ROOT_TOL: f64 = 1e-12;
/// Approach distances above `Z_c` used to separate cases 2 and 3.
pub const APPROACH_FAR: f64 = 1e-2;
pub const APPROACH_NEAR: f64 = 1e-4;
/// `tau(Z_c + near) / tau(Z_c + far)` above this counts as divergence.
pub const DIVERGENCE_RATIO: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate<T> {
    pub gamma: T,
    pub c_a: T,
    pub pairs_used: usize,
    /// `(m, max |A(x) - A(x')|)` over pairs with `d(phi x, phi x') = 2^-m`.
    pub bins: Vec<(u32, T)>,
    /// Pair attaining the sup quotient: `(branch, j, j')`.
    pub argmax: Option<(usize, usize, usize)>,
}

/// Same-branch grid pairs: every branch's end pair plus `random_pairs` random
/// ones. `gamma` is the slope of the per-`m` maxima of `|Delta A|` against
/// `log d`; `C_A` is the sup quotient at that `gamma`.
pub fn holder_constants_estimate<T: Real>(
    map: &LorenzMap<T>,
    table: &InducedTable<T>,
    delta_hat: T,
    random_pairs: usize,
    seed: u64,
) -> Result<HolderEstimate<T>> {
    let g = table.grid_size();
    let nb = table.branch_count();
    let mut pairs: Vec<(usize, usize, usize)> = (0..nb).map(|i| (i, 0, g - 1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_pairs {
        let i = rng.gen_range(0..nb);
        let j = rng.gen_range(0..g);
        let k = rng.gen_range(0..g);
        if j != k {
            pairs.push((i, j.min(k), j.max(k)));
        }
    }
    let mut samples = Vec::with_capacity(pairs.len());
    for &(i, j, k) in &pairs {
        let d = symbolic_metric(map, table.grid[j], table.grid[k], delta_hat);
        if d > T::zero() {
            samples.push(((i, j, k), d, (table.a_at(i, j) - table.a_at(i, k)).abs()));
        }
    }
    if samples.len() < MIN_HOLDER_PAIRS {
        return Err(Error::InsufficientSamples {
            found: samples.len(),
            needed: MIN_HOLDER_PAIRS,
        });
    }
    let mut bins: std::collections::BTreeMap<u32, T> = std::collections::BTreeMap::new();
    for &(_, d, da) in &samples {
        let m = (-d.log2()).round().to_u32().unwrap_or(0);
        let e = bins.entry(m).or_insert(T::zero());
        *e = e.max(da);
    }
    let bins: Vec<(u32, T)> = bins.into_iter().collect();
    let pts: Vec<(T, T)> = bins
        .iter()
        .filter(|b| b.1 > T::zero())
        .map(|&(m, v)| (-T::from_u32(m).expect("small") * T::LN_2(), v.ln()))
        .collect();
    let gamma = if pts.len() >= 2 {
        lsq(&pts).1
    } else {
        T::one()
    }
    .max(T::lit(0.01))
    .min(T::one());
    let mut c_a = T::zero();
    let mut argmax = None;
    for &(idx, d, da) in &samples {
        let q = da / d.powf(gamma);
        if q > c_a {
            c_a = q;
            argmax = Some(idx);
        }
    }
    Ok(HolderEstimate {
        gamma,
        c_a,
        pairs_used: samples.len(),
        bins,
        argmax,
    })
}

/// Least squares `y = a + b x`; returns `(a, b)`.
fn lsq<T: Real>(pts: &[(T, T)]) -> (T, T) {
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > T::zero() {
        sxy / sxx
    } else {
        T::zero()
    };
    (my - b * mx, b)
}

fn log_sum_exp<T: Real>(v: impl Iterator<Item = T>) -> Option<T> {
    let v: Vec<T> = v.collect();
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if v.is_empty() || !m.is_finite() {
        return None;
    }
    Some(m + v.iter().map(|&x| (x - m).exp()).sum::<T>().ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZcEstimate<T> {
    pub z_c: T,
    /// `(n, a_n)` with `a_n = log sum_{n_i = n} e^{A(M_{n,i})}`.
    pub a_n: Vec<(usize, T)>,
    pub window: (usize, usize),
    pub ratio_fit: T,
    pub lsq_fit: T,
    pub intercept: T,
    pub fit_tolerance: T,
    /// `max_n e^{a_n - n Z_c}` over the window.
    pub c_hat: T,
}

impl<T: Real> ZcEstimate<T> {
    pub fn a_over_n(&self) -> Vec<(usize, T)> {
        self.a_n
            .iter()
            .map(|&(n, a)| (n, a / T::from_usize_lossy(n)))
            .collect()
    }
}

/// Growth rate of `a_n` on the tail window `[ceil(N/2), N]`: the larger of the
/// secant slope across the window and the least-squares slope.
pub fn zc_estimate<T: Real>(table: &InducedTable<T>) -> Result<ZcEstimate<T>> {
    let n_max = table.n_max;
    let mut a_n = Vec::new();
    for n in 1..=n_max {
        let vals = table
            .times
            .iter()
            .zip(&table.a_periodic)
            .filter(|(&t, _)| t == n)
            .map(|(_, &a)| a);
        if let Some(a) = log_sum_exp(vals) {
            a_n.push((n, a));
        }
    }
    let lo = n_max.div_ceil(2);
    let win: Vec<(usize, T)> = a_n.iter().copied().filter(|&(n, _)| n >= lo).collect();
    if win.len() < 2 {
        return Err(Error::NoBranches(n_max));
    }
    let (first, last) = (win[0], win[win.len() - 1]);
    let ratio_fit = (last.1 - first.1) / T::from_usize_lossy(last.0 - first.0);
    let pts: Vec<(T, T)> = win
        .iter()
        .map(|&(n, a)| (T::from_usize_lossy(n), a))
        .collect();
    let (intercept, lsq_fit) = lsq(&pts);
    let z_c = ratio_fit.max(lsq_fit);
    let max_res = pts
        .iter()
        .map(|&(n, a)| (a - intercept - lsq_fit * n).abs())
        .fold(T::zero(), T::max);
    let n_lo = T::from_usize_lossy(win[0].0);
    let fit_tolerance = (intercept.abs() + max_res) / n_lo + (ratio_fit - lsq_fit).abs();
    let c_hat = win
        .iter()
        .map(|&(n, a)| (a - T::from_usize_lossy(n) * z_c).exp())
        .fold(T::zero(), T::max);
    Ok(ZcEstimate {
        z_c,
        a_n,
        window: (win[0].0, win[win.len() - 1].0),
        ratio_fit,
        lsq_fit,
        intercept,
        fit_tolerance,
        c_hat,
    })
}

/// Bound on `sum_{n > N} sum_{n_i = n} e^{A - n Z}` from the fitted growth,
/// widened by `e^{C_A}`; infinite for `Z <= Z_c`.
pub fn tail_bound<T: Real>(zc: &ZcEstimate<T>, c_a: T, n_max: usize, z: T) -> T {
    if z <= zc.z_c {
        return T::infinity();
    }
    let r = (zc.z_c - z).exp();
    c_a.exp() * zc.c_hat * r.powi(n_max as i32 + 1) / (T::one() - r)
}

/// `(1/n) log sum_j e^{A_{n,j}}`.
pub fn bernoulli_lower_bound<T: Real>(n: usize, table: &InducedTable<T>) -> Result<T> {
    let vals = table
        .times
        .iter()
        .zip(&table.a_periodic)
        .filter(|(&t, _)| t == n)
        .map(|(_, &a)| a);
    log_sum_exp(vals)
        .map(|a| a / T::from_usize_lossy(n))
        .ok_or(Error::NoBranches(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureCase {
    /// Root above `Z_c`.
    Root = 1,
    /// Boundary, finite Kac integral.
    BoundaryFinite = 2,
    /// Boundary, divergent Kac integral.
    BoundaryDivergent = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport<T> {
    pub z_c_estimate: T,
    pub pressure_root: Option<T>,
    pub kac_integral_at_root: Option<T>,
    pub case: PressureCase,
    pub free_energy: T,
    /// Root of `lambda_Z = 1` for the truncated operator, whatever the case.
    pub truncated_root: T,
    pub lambda_at_root: T,
    pub tau_at_root: T,
    /// Upper root with the tail bound added, minus `truncated_root`.
    pub truncation_tolerance: T,
    pub tail_bound_at_root: T,
    pub tau_far: Option<T>,
    pub tau_near: Option<T>,
    pub confidence: String,
    pub c_a: T,
    pub gamma: T,
    pub n_max: usize,
    pub grid_size: usize,
    pub branch_count: usize,
    pub root_tol: T,
    pub residual_tol: T,
    pub case_margin: T,
    pub bracket: (T, T),
}

impl<T: Real> CaseReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Safeguarded Newton on `log lambda_Z = 0`, using `d log lambda / dZ = -tau_mean`;
/// falls back to bisection whenever a step leaves the bracket.
pub fn pressure_root<T: Real>(
    table: &InducedTable<T>,
    bracket: (T, T),
    max_iter: usize,
) -> Result<(T, SpectralData<T>, KacIntegrals<T>)> {
    let (mut lo, mut hi) = bracket;
    let s_lo = spectral_solve(table, lo, max_iter, None)?;
    let s_hi = spectral_solve(table, hi, max_iter, Some(&s_lo.h))?;
    if !(s_lo.log_lambda() > T::zero() && s_hi.log_lambda() < T::zero()) {
        return Err(Error::WidenBracket {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    let mut z = (lo + hi) * T::lit(0.5);
    let mut warm = s_lo.h.clone();
    let tol = T::tol(ROOT_TOL);
    for _ in 0..200 {
        let sp = spectral_solve(table, z, max_iter, Some(&warm))?;
        let f = sp.log_lambda();
        let kac = kac_integrals(table, &sp);
        if f.abs() <= tol || hi - lo <= tol {
            return Ok((z, sp, kac));
        }
        if f > T::zero() {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z + f / kac.tau_mean;
        z = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::lit(0.5)
        };
        warm = sp.h;
    }
    let sp = spectral_solve(table, z, max_iter, Some(&warm))?;
    let kac = kac_integrals(table, &sp);
    Ok((z, sp, kac))
}

/// Smallest `Z` above `max(root, Z_c)` with `lambda_Z + tail(Z) <= 1`, by bisection.
fn upper_root<T: Real>(
    table: &InducedTable<T>,
    zc: &ZcEstimate<T>,
    c_a: T,
    root: T,
    warm: &[T],
    max_iter: usize,
) -> Result<T> {
    let g = |z: T, warm: &[T]| -> Result<(T, Vec<T>)> {
        let sp = spectral_solve(table, z, max_iter, Some(warm))?;
        Ok((
            sp.lambda + tail_bound(zc, c_a, table.n_max, z) - T::one(),
            sp.h,
        ))
    };
    let mut lo = root.max(zc.z_c);
    let mut step = T::lit(1e-3);
    let mut hi = lo + step;
    let mut w = warm.to_vec();
    for _ in 0..60 {
        let (v, h) = g(hi, &w)?;
        w = h;
        if v <= T::zero() {
            break;
        }
        lo = hi;
        step = step * T::lit(2.0);
        hi = hi + step;
    }
    for _ in 0..60 {
        if hi - lo <= T::tol(1e-9) * hi.abs().max(T::one()) {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        let (v, h) = g(mid, &w)?;
        w = h;
        if v > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

pub fn tau_at<T: Real>(table: &InducedTable<T>, z: T, max_iter: usize) -> Result<T> {
    let sp = spectral_solve(table, z, max_iter, None)?;
    Ok(kac_integrals(table, &sp).tau_mean)
}

pub fn solve_pressure_root<T: Real>(
    table: &InducedTable<T>,
    zc: &ZcEstimate<T>,
    bracket: (T, T),
    max_iter: usize,
) -> Result<CaseReport<T>> {
    let (root, sp, kac) = pressure_root(table, bracket, max_iter)?;
    let c_a = table.c_a;
    let margin = T::lit(CASE_MARGIN);
    let z_up = upper_root(table, zc, c_a, root, &sp.h, max_iter)?;
    let fe_root = free_energy(root, &sp, &kac);
    let mut report = CaseReport {
        z_c_estimate: zc.z_c,
        pressure_root: Some(root),
        kac_integral_at_root: Some(kac.tau_mean),
        case: PressureCase::Root,
        free_energy: fe_root,
        truncated_root: root,
        lambda_at_root: sp.lambda,
        tau_at_root: kac.tau_mean,
        truncation_tolerance: z_up - root,
        tail_bound_at_root: tail_bound(zc, c_a, table.n_max, root),
        tau_far: None,
        tau_near: None,
        confidence: String::new(),
        c_a,
        gamma: table.gamma,
        n_max: table.n_max,
        grid_size: table.grid_size(),
        branch_count: table.branch_count(),
        root_tol: T::lit(ROOT_TOL),
        residual_tol: T::lit(RESIDUAL_TOL),
        case_margin: margin,
        bracket,
    };
    if root > zc.z_c + margin {
        report.confidence = format!(
            "root exceeds Z_c estimate by {:e}",
            (root - zc.z_c).to_f64_lossy()
        );
        return Ok(report);
    }
    let far = tau_at(table, zc.z_c + T::lit(APPROACH_FAR), max_iter)?;
    let near = tau_at(table, zc.z_c + T::lit(APPROACH_NEAR), max_iter)?;
    report.tau_far = Some(far);
    report.tau_near = Some(near);
    let ratio = near / far;
    if ratio > T::lit(DIVERGENCE_RATIO) {
        report.case = PressureCase::BoundaryDivergent;
        report.pressure_root = None;
        report.kac_integral_at_root = None;
        report.free_energy = zc.z_c;
        report.confidence = format!(
            "low: Kac integral grows by {:.4} on approach; finite truncation",
            ratio.to_f64_lossy()
        );
    } else {
        report.case = PressureCase::BoundaryFinite;
        report.pressure_root = Some(zc.z_c);
        report.kac_integral_at_root = Some(near);
        report.free_energy = zc.z_c;
        report.confidence = format!(
            "low: Kac integral ratio {:.4} on approach; finite truncation",
            ratio.to_f64_lossy()
        );
    }
    Ok(report)
}

/// Columns `Z, log_lambda, tau_mean, free_energy, residual, tail_bound`.
pub fn pressure_curve<T: Real>(
    table: &InducedTable<T>,
    zc: &ZcEstimate<T>,
    zs: &[T],
    max_iter: usize,
) -> Result<Table> {
    let mut t = Table::new(&[
        "Z",
        "log_lambda",
        "tau_mean",
        "free_energy",
        "residual",
        "tail_bound",
    ])
    .meta("N_max", table.n_max)
    .meta("grid_size", table.grid_size())
    .meta("residual_tol", num(T::lit(RESIDUAL_TOL)))
    .meta("Z_c_estimate", num(zc.z_c));
    let mut warm: Option<Vec<T>> = None;
    for &z in zs {
        if z <= zc.z_c {
            log::warn!("Z = {z} is not above the Z_c estimate {}", zc.z_c);
        }
        let sp = spectral_solve(table, z, max_iter, warm.as_deref())?;
        let kac = kac_integrals(table, &sp);
        t.push(vec![
            num(z),
            num(sp.log_lambda()),
            num(kac.tau_mean),
            num(free_energy(z, &sp, &kac)),
            num(sp.residual),
            num(tail_bound(zc, table.c_a, table.n_max, z)),
        ]);
        warm = Some(sp.h);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureOptions {
    pub grid_size: usize,
    pub series_tol: f64,
    pub z_bracket: (f64, f64),
    pub holder_pairs: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions {
            grid_size: DEFAULT_GRID,
            series_tol: DEFAULT_SERIES_TOL,
            z_bracket: (0.0, 3.0),
            holder_pairs: 4000,
            seed: 1,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureRun<T> {
    pub holder: HolderEstimate<T>,
    pub zc: ZcEstimate<T>,
    pub report: CaseReport<T>,
}

/// Table, Hölder data, `Z_c` and the classified root for one mille-feuilles.
pub fn run_pressure<T: Real>(
    map: &LorenzMap<T>,
    mf: &MilleFeuilles<T>,
    pot: &Potential<T>,
    opts: &PressureOptions,
) -> Result<(InducedTable<T>, PressureRun<T>)> {
    let mut table = InducedTable::build(map, mf, pot, opts.grid_size, T::lit(opts.series_tol))?;
    let holder =
        holder_constants_estimate(map, &table, mf.band.delta_hat, opts.holder_pairs, opts.seed)?;
    table.c_a = holder.c_a;
    table.gamma = holder.gamma;
    let zc = zc_estimate(&table)?;
    let report = solve_pressure_root(
        &table,
        &zc,
        (T::lit(opts.z_bracket.0), T::lit(opts.z_bracket.1)),
        opts.max_iter,
    )?;
    Ok((table, PressureRun { holder, zc, report }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub root_a: T,
    pub root_b: T,
    pub gap: T,
    pub tolerance_a: T,
    pub tolerance_b: T,
    pub within_tolerance: bool,
    pub report_a: CaseReport<T>,
    pub report_b: CaseReport<T>,
}

/// Runs the pressure pipeline on two mille-feuilles and compares truncated roots.
pub fn cross_millefeuille_pressure<T: Real>(
    map: &LorenzMap<T>,
    mf_a: &MilleFeuilles<T>,
    mf_b: &MilleFeuilles<T>,
    pot: &Potential<T>,
    opts: &PressureOptions,
) -> Result<Comparison<T>> {
    let (_, a) = run_pressure(map, mf_a, pot, opts)?;
    let (_, b) = run_pressure(map, mf_b, pot, opts)?;
    let (ra, rb) = (a.report.truncated_root, b.report.truncated_root);
    let (ta, tb) = (a.report.truncation_tolerance, b.report.truncation_tolerance);
    let gap = (ra - rb).abs();
    Ok(Comparison {
        root_a: ra,
        root_b: rb,
        gap,
        tolerance_a: ta,
        tolerance_b: tb,
        within_tolerance: gap <= ta + tb,
        report_a: a.report,
        report_b: b.report,
    })
}
