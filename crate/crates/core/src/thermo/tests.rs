use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::lorenz_map::{LorenzMap, Point};
use crate::millefeuille::{build_millefeuille, Band, MilleFeuilles};
use crate::symbolic::delta_dense_periodic_orbit;

const GRID: usize = 256;
const TOL: f64 = 1e-12;

fn map() -> LorenzMap<f64> {
    LorenzMap::default()
}

fn test_pot() -> Potential<f64> {
    Potential::holder_family(0.0, 0.2, 0.5, 0.3)
}

fn mf() -> &'static MilleFeuilles<f64> {
    static MF: OnceLock<MilleFeuilles<f64>> = OnceLock::new();
    MF.get_or_init(|| {
        let m = map();
        let d = delta_dense_periodic_orbit(&m, 0.2, 16).unwrap();
        let band = Band::from_dense(&m, &d, 0.2).unwrap();
        build_millefeuille(&m, band, 12, 60).unwrap()
    })
}

fn zero_table() -> &'static InducedTable<f64> {
    static T: OnceLock<InducedTable<f64>> = OnceLock::new();
    T.get_or_init(|| InducedTable::build(&map(), mf(), &Potential::zero(), GRID, TOL).unwrap())
}

fn pot_table() -> &'static InducedTable<f64> {
    static T: OnceLock<InducedTable<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let m = map();
        let mut t = InducedTable::build(&m, mf(), &test_pot(), GRID, TOL).unwrap();
        let h = holder_constants_estimate(&m, &t, 0.2, 4000, 1).unwrap();
        t.c_a = h.c_a;
        t.gamma = h.gamma;
        t
    })
}

fn random_points(n: usize, seed: u64) -> Vec<(usize, Point<f64>)> {
    let m = map();
    let mf = mf();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let i = rng.gen_range(0..mf.branches.len());
            let x = mf.branches[i].inverse(&m, rng.gen_range(mf.band.p_l..mf.band.p_r));
            (i, Point::new(x, rng.gen_range(-1.0..1.0)))
        })
        .collect()
}

fn closed_form_lambda(t: &InducedTable<f64>, z: f64) -> f64 {
    t.times.iter().map(|&n| (-(n as f64) * z).exp()).sum()
}

#[test]
fn omega_vanishes_on_reference_leaf_and_for_constants() {
    let m = map();
    let mf = mf();
    for (_, p) in random_points(20, 3) {
        assert_eq!(omega(&m, mf, &test_pot(), mf.project(p.x), 1e-10), 0.0);
        assert_eq!(omega(&m, mf, &Potential::constant(0.7), p, 1e-10), 0.0);
    }
}

#[test]
fn omega_depth_doubling() {
    let m = map();
    let mf = mf();
    let tol = 1e-8;
    for (_, p) in random_points(30, 4) {
        let w = omega(&m, mf, &test_pot(), p, tol);
        // tolerance reached well before 60 terms at contraction <= 1/2
        let deep = omega_depth(&m, mf, &test_pot(), p, 120);
        assert!((w - deep).abs() < tol, "{w} {deep}");
    }
}

#[test]
fn omega_fast_path_matches_series() {
    // for b*y potentials omega is b (y - y_ref) D(x)
    let m = map();
    let mf = mf();
    let pot = Potential::holder_family(0.0, 0.0, 1.0, 0.3);
    for (_, p) in random_points(30, 5) {
        let series = omega(&m, mf, &pot, p, 1e-14);
        let fast = 0.3 * (p.y - mf.project(p.x).y) * fiber_series(&m, p.x, 1e-14);
        assert!((series - fast).abs() < 1e-12, "{series} {fast}");
    }
}

#[test]
fn induced_potential_trivial_cases() {
    let m = map();
    let mf = mf();
    for (i, p) in random_points(20, 6) {
        let b = &mf.branches[i];
        assert_eq!(
            induced_potential(&m, mf, b, &Potential::zero(), p.x, TOL),
            0.0
        );
        let a = induced_potential(&m, mf, b, &Potential::constant(0.37), p.x, TOL);
        assert!((a - 0.37 * b.return_time as f64).abs() < 1e-12);
    }
}

#[test]
fn coboundary_residual() {
    let m = map();
    let mf = mf();
    let pot = test_pot();
    let tol = 1e-8;
    let mut worst = 0.0f64;
    for (i, p) in random_points(100, 7) {
        let b = &mf.branches[i];
        let (s, img) = birkhoff_sum(&m, b, &pot, p);
        let a = induced_potential(&m, mf, b, &pot, p.x, tol);
        let r = s - a + omega(&m, mf, &pot, img, tol) - omega(&m, mf, &pot, p, tol);
        worst = worst.max(r.abs());
    }
    assert!(worst < 10.0 * tol, "{worst}");
}

#[test]
fn fast_table_matches_direct_series() {
    let m = map();
    let mf = mf();
    let t = pot_table();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let i = rng.gen_range(0..t.branch_count());
        let j = rng.gen_range(0..t.grid_size());
        let b = &mf.branches[i];
        let xi = b.inverse(&m, t.grid[j]);
        let direct = induced_potential(&m, mf, b, &test_pot(), xi, 1e-14);
        assert!(
            (t.a_at(i, j) - direct).abs() < 1e-10,
            "branch {i} node {j}: {} {direct}",
            t.a_at(i, j)
        );
    }
}

#[test]
fn zero_potential_closed_forms() {
    let t = zero_table();
    for z in [0.7, 1.0, 1.5] {
        let sp = spectral_solve(t, z, 200, None).unwrap();
        let lam = closed_form_lambda(t, z);
        assert!((sp.lambda - lam).abs() < 1e-10 * lam);
        assert!(sp.h.iter().all(|&h| (h - 1.0).abs() < 1e-10));
        let kac = kac_integrals(t, &sp);
        let num: f64 = t
            .times
            .iter()
            .map(|&n| n as f64 * (-(n as f64) * z).exp())
            .sum();
        assert!((kac.tau_mean - num / lam).abs() < 1e-9 * kac.tau_mean);
        assert!((kac.m_mass * kac.tau_mean - 1.0).abs() < 1e-15);
        let l1 = t.apply(&t.weights(z), &vec![1.0; t.grid_size()]);
        assert!(l1.iter().all(|&v| (v - lam).abs() < 1e-12 * lam));
    }
}

#[test]
fn zero_potential_root_matches_scalar_solver() {
    let t = zero_table();
    let (root, sp, _) = pressure_root(t, (0.0, 3.0), 200).unwrap();
    // plain bisection on the branch sums
    let (mut lo, mut hi) = (0.0f64, 3.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if closed_form_lambda(t, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((root - lo).abs() < 1e-8, "{root} {lo}");
    assert!((sp.lambda - 1.0).abs() < 1e-8);
}

#[test]
fn spectral_outputs_are_normalized() {
    let t = pot_table();
    let sp = spectral_solve(t, 0.9, DEFAULT_MAX_ITER, None).unwrap();
    assert!(sp.residual <= RESIDUAL_TOL);
    assert!((sp.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sp.nu.iter().all(|&v| v >= 0.0));
    assert!((sp.h.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0).abs() < 1e-15);
    let mean = sp.h.iter().sum::<f64>() / sp.h.len() as f64;
    let e = t.c_a.exp();
    assert!(sp.h.iter().all(|&h| h <= mean * e && h >= mean / e));
    assert!((sp.mu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn lambda_monotone_and_log_convex() {
    let t = pot_table();
    let zs: Vec<f64> = (0..20).map(|k| 0.8 + 0.06 * k as f64).collect();
    let ll: Vec<f64> = zs
        .iter()
        .map(|&z| {
            spectral_solve(t, z, DEFAULT_MAX_ITER, None)
                .unwrap()
                .log_lambda()
        })
        .collect();
    for w in ll.windows(2) {
        assert!(w[1] < w[0]);
    }
    for w in ll.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-6);
    }
    let w0 = t.weights(0.9);
    let w1 = t.weights(0.95);
    let one = vec![1.0; t.grid_size()];
    let (a, b) = (t.apply(&w0, &one), t.apply(&w1, &one));
    assert!(a.iter().zip(&b).all(|(x, y)| y < x));
}

#[test]
fn derivative_identity() {
    let t = pot_table();
    let h = 1e-4;
    for z in [0.85, 1.1, 1.6] {
        let sp = spectral_solve(t, z, DEFAULT_MAX_ITER, None).unwrap();
        let kac = kac_integrals(t, &sp);
        let lp = spectral_solve(t, z + h, DEFAULT_MAX_ITER, None)
            .unwrap()
            .log_lambda();
        let lm = spectral_solve(t, z - h, DEFAULT_MAX_ITER, None)
            .unwrap()
            .log_lambda();
        let fd = (lp - lm) / (2.0 * h);
        assert!((fd + kac.tau_mean).abs() < 1e-4, "{fd} {}", kac.tau_mean);
    }
}

#[test]
fn constant_shift_law() {
    let m = map();
    let c = 0.37;
    let shifted = InducedTable::build(&m, mf(), &test_pot().shifted(c), GRID, TOL).unwrap();
    let t = pot_table();
    for z in [0.9, 1.2, 1.7] {
        let a = spectral_solve(&shifted, z + c, DEFAULT_MAX_ITER, None).unwrap();
        let b = spectral_solve(t, z, DEFAULT_MAX_ITER, None).unwrap();
        assert!(
            (a.lambda - b.lambda).abs() < 1e-8,
            "{} {}",
            a.lambda,
            b.lambda
        );
        let fa = free_energy(z + c, &a, &kac_integrals(&shifted, &a));
        let fb = free_energy(z, &b, &kac_integrals(t, &b));
        assert!((fa - fb - c).abs() < 1e-8);
    }
    let (za, zb) = (zc_estimate(&shifted).unwrap(), zc_estimate(t).unwrap());
    assert!((za.z_c - zb.z_c - c).abs() <= zb.fit_tolerance);
    assert!((za.z_c - zb.z_c - c).abs() < 1e-9);
}

#[test]
fn free_energy_at_root_and_duality() {
    let t = pot_table();
    let (root, sp, kac) = pressure_root(t, (0.0, 3.0), DEFAULT_MAX_ITER).unwrap();
    assert!((free_energy(root, &sp, &kac) - root).abs() < 1e-11);
    for z in [0.9, 1.3] {
        let sp = spectral_solve(t, z, DEFAULT_MAX_ITER, None).unwrap();
        let kac = kac_integrals(t, &sp);
        let beta = -sp.log_lambda();
        assert!((free_energy(z, &sp, &kac) + beta * kac.m_mass - z).abs() < 1e-12);
    }
}

#[test]
fn distortion_bound() {
    let t = pot_table();
    let e = t.c_a.exp();
    for z in [0.9, 1.4] {
        assert!(distortion_ratios(t, z, 5)
            .iter()
            .all(|&r| r >= 1.0 && r <= e));
    }
}

#[test]
fn grid_refinement() {
    let m = map();
    let fine = InducedTable::build(&m, mf(), &test_pot(), 2 * GRID, TOL).unwrap();
    let coarse = pot_table();
    let z = 1.0;
    let a = spectral_solve(coarse, z, DEFAULT_MAX_ITER, None).unwrap();
    let b = spectral_solve(&fine, z, DEFAULT_MAX_ITER, None).unwrap();
    assert!(
        (a.lambda - b.lambda).abs() < 10.0 * a.interp_error * a.lambda,
        "{} {} {}",
        a.lambda,
        b.lambda,
        a.interp_error
    );
}

#[test]
fn holder_estimate_examples() {
    let m = map();
    let h0 = holder_constants_estimate(&m, zero_table(), 0.2, 2000, 1).unwrap();
    assert_eq!(h0.c_a, 0.0);
    let t = pot_table();
    let h = holder_constants_estimate(&m, t, 0.2, 2000, 1).unwrap();
    let (i, j, k) = h.argmax.unwrap();
    let d = crate::millefeuille::symbolic_metric(&m, t.grid[j], t.grid[k], 0.2);
    assert_eq!((t.a_at(i, j) - t.a_at(i, k)).abs() / d.powf(h.gamma), h.c_a);
    let h2 = holder_constants_estimate(&m, t, 0.2, 4000, 2).unwrap();
    assert!(
        (h2.c_a - h.c_a).abs() <= 0.2 * h.c_a,
        "{} {}",
        h.c_a,
        h2.c_a
    );
    let small = InducedTable::synthetic(0.0, 1.0, 8, &[(1, 0.0, (0.0, 0.5))]);
    assert!(holder_constants_estimate(&m, &small, 0.2, 10, 1).is_err());
}

#[test]
fn zc_zero_potential_counts() {
    let t = zero_table();
    let zc = zc_estimate(t).unwrap();
    for &(n, a) in &zc.a_n {
        let count = t.times.iter().filter(|&&k| k == n).count();
        assert!((a - (count as f64).ln()).abs() < 1e-12);
        assert!(
            (bernoulli_lower_bound(n, t).unwrap() - (count as f64).ln() / n as f64).abs() < 1e-12
        );
    }
    assert!(bernoulli_lower_bound(200, t).is_err());
}

#[test]
fn bernoulli_bounds_below_free_energy() {
    let t = pot_table();
    let zc = zc_estimate(t).unwrap();
    let rep = solve_pressure_root(t, &zc, (0.0, 3.0), DEFAULT_MAX_ITER).unwrap();
    let fe = rep.free_energy;
    let mut tail_max = f64::NEG_INFINITY;
    for &(n, _) in &zc.a_n {
        let b = bernoulli_lower_bound(n, t).unwrap();
        assert!(b <= fe + t.c_a / n as f64);
        if n >= zc.window.0 {
            tail_max = tail_max.max(b);
        }
    }
    assert!(
        (tail_max - zc.z_c).abs() <= zc.fit_tolerance,
        "{tail_max} {} {}",
        zc.z_c,
        zc.fit_tolerance
    );
    assert!((rep.lambda_at_root - 1.0).abs() < 1e-8);
}

#[test]
fn single_branch_kac() {
    let t = InducedTable::synthetic(-0.5, 0.5, 16, &[(7, 0.3, (-0.2, 0.1))]);
    let sp = spectral_solve(&t, 1.0, 100, None).unwrap();
    assert!((sp.lambda - (0.3f64 - 7.0).exp()).abs() < 1e-15);
    let kac = kac_integrals(&t, &sp);
    assert!((kac.tau_mean - 7.0).abs() < 1e-12);
    assert!((kac.m_mass - 1.0 / 7.0).abs() < 1e-12);
}

/// One branch per return time `n <= n_max`, weight `scale * n^-p e^{n zc}`.
fn power_law_table(p: f64, scale: f64, n_max: usize) -> InducedTable<f64> {
    let zc = 0.5;
    let norm: f64 = (1..=n_max).map(|n| (n as f64).powf(-p)).sum();
    let w = 1.0 / n_max as f64;
    let branches: Vec<(usize, f64, (f64, f64))> = (1..=n_max)
        .map(|n| {
            let a = (scale / norm).ln() - p * (n as f64).ln() + n as f64 * zc;
            let k0 = (n - 1) as f64 * w;
            (n, a, (k0, k0 + 0.5 * w))
        })
        .collect();
    InducedTable::synthetic(0.0, 1.0, 4, &branches)
}

#[test]
fn synthetic_cases() {
    let n_max = 20_000;
    for (p, scale, want) in [
        (3.0, 1.0, PressureCase::BoundaryFinite),
        (1.5, 1.0, PressureCase::BoundaryDivergent),
        (3.0, 2.0, PressureCase::Root),
    ] {
        let t = power_law_table(p, scale, n_max);
        let zc = zc_estimate(&t).unwrap();
        assert!((zc.z_c - 0.5).abs() < 1e-3);
        let rep = solve_pressure_root(&t, &zc, (0.49, 3.0), 100).unwrap();
        assert_eq!(
            rep.case,
            want,
            "p = {p}, scale = {scale}: {}",
            rep.to_json()
        );
        match rep.case {
            PressureCase::Root => assert!(rep.pressure_root.unwrap() > rep.z_c_estimate),
            PressureCase::BoundaryFinite => {
                assert!((rep.pressure_root.unwrap() - rep.z_c_estimate).abs() <= CASE_MARGIN)
            }
            PressureCase::BoundaryDivergent => assert!(rep.pressure_root.is_none()),
        }
    }
}

#[test]
fn case_label_invariant_under_shift() {
    let t = pot_table();
    let mut s = InducedTable::build(&map(), mf(), &test_pot().shifted(0.37), GRID, TOL).unwrap();
    s.c_a = t.c_a;
    let ra =
        solve_pressure_root(t, &zc_estimate(t).unwrap(), (0.0, 3.0), DEFAULT_MAX_ITER).unwrap();
    let rb =
        solve_pressure_root(&s, &zc_estimate(&s).unwrap(), (0.0, 3.0), DEFAULT_MAX_ITER).unwrap();
    assert_eq!(ra.case, rb.case);
    assert!((rb.truncated_root - ra.truncated_root - 0.37).abs() < 1e-8);
}

#[test]
fn widen_bracket_error() {
    assert!(pressure_root(zero_table(), (2.0, 3.0), 100).is_err());
}

#[test]
fn pressure_curve_columns() {
    let t = pot_table();
    let zc = zc_estimate(t).unwrap();
    let c = pressure_curve(t, &zc, &[0.9, 1.0], DEFAULT_MAX_ITER).unwrap();
    assert_eq!(
        c.columns,
        [
            "Z",
            "log_lambda",
            "tau_mean",
            "free_energy",
            "residual",
            "tail_bound"
        ]
    );
    assert_eq!(c.rows.len(), 2);
}

#[test]
fn identical_band_twice_is_bitwise_identical() {
    let m = map();
    let opts = PressureOptions {
        grid_size: 128,
        ..Default::default()
    };
    let c = cross_millefeuille_pressure(&m, mf(), mf(), &Potential::zero(), &opts).unwrap();
    assert_eq!(c.gap, 0.0);
    assert_eq!(c.report_a.to_json(), c.report_b.to_json());
}

#[test]
fn single_precision_zero_potential() {
    let m = crate::LorenzMap32::default();
    let d = delta_dense_periodic_orbit(&m, 0.2f32, 16).unwrap();
    let band = Band::from_dense(&m, &d, 0.2).unwrap();
    let mf: crate::MilleFeuilles32 = build_millefeuille(&m, band, 10, 30).unwrap();
    let t: crate::InducedTable32 = InducedTable::build(&m, &mf, &Potential::zero(), 64, 1e-6).unwrap();
    let (root, sp, _) = pressure_root(&t, (0.0, 3.0), 200).unwrap();
    let closed: f32 = t.times.iter().map(|&n| (-(n as f32) * root).exp()).sum();
    assert!((closed - 1.0).abs() < 1e-5, "{closed}");
    assert!((sp.lambda - 1.0).abs() < 1e-5);
    // the same branches as in double precision
    let mf64 = {
        let m = map();
        let d = delta_dense_periodic_orbit(&m, 0.2, 16).unwrap();
        build_millefeuille(&m, Band::from_dense(&m, &d, 0.2).unwrap(), 10, 30).unwrap()
    };
    assert_eq!(mf.branches.len(), mf64.branches.len());
}
