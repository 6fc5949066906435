//! Unstable cone fields, hyperbolic jumps, the unstable direction and
//! Lyapunov exponents.
//!
//! Directions are slopes `v/u` of tangent vectors `(u, v)` with `u > 0`. The
//! differential is lower triangular with a positive `(1,1)` entry, so a cone
//! of finite slopes stays finite and the slope map is affine:
//! `s -> (g_x + g_y s) / f'`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorenz_map::{BranchWord, LorenzMap, Matrix2, Point};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveCone<T> {
    pub slope_lo: T,
    pub slope_hi: T,
}

impl<T: Real> ProjectiveCone<T> {
    /// `C^u = {|u| >= alpha |v|}`, i.e. slopes in `[-1/alpha, 1/alpha]`.
    pub fn unstable(alpha: T) -> Self {
        let s = T::one() / alpha;
        ProjectiveCone {
            slope_lo: -s,
            slope_hi: s,
        }
    }

    pub fn width(&self) -> T {
        self.slope_hi - self.slope_lo
    }

    pub fn mid(&self) -> T {
        (self.slope_lo + self.slope_hi) * T::lit(0.5)
    }

    /// Closed containment.
    pub fn contains(&self, other: &ProjectiveCone<T>) -> bool {
        other.slope_lo >= self.slope_lo && other.slope_hi <= self.slope_hi
    }

    pub fn strictly_contains(&self, other: &ProjectiveCone<T>) -> bool {
        other.slope_lo > self.slope_lo && other.slope_hi < self.slope_hi
    }

    pub fn max_abs_slope(&self) -> T {
        self.slope_lo.abs().max(self.slope_hi.abs())
    }

    pub fn image(&self, df: &Matrix2<T>) -> Self {
        let a = map_slope(df, self.slope_lo);
        let b = map_slope(df, self.slope_hi);
        ProjectiveCone {
            slope_lo: a.min(b),
            slope_hi: a.max(b),
        }
    }
}

#[inline]
pub fn map_slope<T: Real>(df: &Matrix2<T>, s: T) -> T {
    (df[1][0] + df[1][1] * s) / df[0][0]
}

/// Constants attached to the aperture: `K_hat` is the fixed point of
/// `R -> (1/2 + alpha M) R + M/2`, `N(alpha)` the first `n` with
/// `alpha sqrt2^n / (alpha K_hat + 1) > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants<T> {
    pub alpha: T,
    pub k_hat: T,
    pub n_alpha: usize,
}

impl<T: Real> ConeConstants<T> {
    pub fn new(alpha: T, m: T) -> Self {
        let half = T::lit(0.5);
        let k_hat = (m * half) / (half - alpha * m);
        ConeConstants {
            alpha,
            k_hat,
            n_alpha: n_alpha(alpha, k_hat),
        }
    }

    pub fn of_map(map: &LorenzMap<T>) -> Self {
        Self::new(map.params().alpha, map.params().m)
    }
}

/// First `n` with `alpha sqrt2^n / (alpha k_hat + 1) > 1`.
pub fn n_alpha<T: Real>(alpha: T, k_hat: T) -> usize {
    let denom = alpha * k_hat + T::one();
    let mut n = 0usize;
    while alpha * T::SQRT_2().powi(n as i32) / denom <= T::one() {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpRecord {
    /// Forward times counted from the deepest point of the orbit (time 0).
    pub jump_times: Vec<usize>,
    pub gaps: Vec<usize>,
    /// Last jump time reached.
    pub terminal: usize,
}

impl JumpRecord {
    pub fn max_gap(&self) -> usize {
        self.gaps.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnstableDirection<T> {
    pub slope: T,
    pub error: T,
    pub depth: usize,
}

/// Rounding floor added to certified half-widths.
pub fn rounding_floor<T: Real>(slope: T) -> T {
    T::epsilon() * T::lit(64.0) * slope.abs().max(T::one())
}

/// `DF^n(C^u)` transported along `backward` (`backward[k] = F^{-(k+1)}(p)`) to `p`.
pub fn propagate_cone<T: Real>(
    map: &LorenzMap<T>,
    backward: &[Point<T>],
    n: usize,
) -> Result<ProjectiveCone<T>> {
    Ok(*cone_history(map, backward, n)?
        .last()
        .expect("history holds the initial cone"))
}

/// Cones after `0, 1, ..., n` steps starting from `F^{-n}(p)`.
pub fn cone_history<T: Real>(
    map: &LorenzMap<T>,
    backward: &[Point<T>],
    n: usize,
) -> Result<Vec<ProjectiveCone<T>>> {
    if backward.len() < n {
        return Err(Error::OrbitTooShort {
            len: backward.len(),
        });
    }
    let mut cone = ProjectiveCone::unstable(map.alpha());
    let mut out = Vec::with_capacity(n + 1);
    out.push(cone);
    for k in (0..n).rev() {
        cone = cone.image(&map.df(backward[k])?);
        out.push(cone);
    }
    Ok(out)
}

/// Successive hyperbolic jumps along a backward orbit, starting at its
/// deepest point. A jump ends at the first time the cone transported from
/// the previous jump lands strictly inside `C^u`.
pub fn hyperbolic_jump_sequence<T: Real>(
    map: &LorenzMap<T>,
    backward: &[Point<T>],
) -> Result<JumpRecord> {
    let len = backward.len();
    let cu = ProjectiveCone::unstable(map.alpha());
    // time t sits at backward[len - 1 - t]; time len is p itself
    let mut dfs = Vec::with_capacity(len);
    for t in 0..len {
        dfs.push(map.df(backward[len - 1 - t])?);
    }
    let mut times = vec![0usize];
    let mut gaps = Vec::new();
    let mut start = 0usize;
    'jumps: while start < len {
        let mut cone = cu;
        for t in start..len {
            cone = cone.image(&dfs[t]);
            if cu.strictly_contains(&cone) {
                gaps.push(t + 1 - start);
                times.push(t + 1);
                start = t + 1;
                continue 'jumps;
            }
        }
        break;
    }
    if gaps.is_empty() {
        return Err(Error::OrbitTooShort { len });
    }
    let terminal = *times.last().expect("non-empty");
    Ok(JumpRecord {
        jump_times: times,
        gaps,
        terminal,
    })
}

pub fn direction_from_backward<T: Real>(
    map: &LorenzMap<T>,
    backward: &[Point<T>],
    depth: usize,
) -> Result<UnstableDirection<T>> {
    let cone = propagate_cone(map, backward, depth)?;
    let slope = cone.mid();
    Ok(UnstableDirection {
        slope,
        error: cone.width() * T::lit(0.5) + rounding_floor(slope),
        depth,
    })
}

/// Midpoint of the cone propagated to `p` through `depth` preimages along `word`.
pub fn unstable_direction<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    word: &BranchWord,
    depth: usize,
) -> Result<UnstableDirection<T>> {
    let w = BranchWord(word.symbols()[..depth.min(word.len())].to_vec());
    let back = map.backward_orbit(p, &w)?;
    direction_from_backward(map, &back, depth)
}

/// Growth constants `C_hat` (width decay against `(2 sqrt2)^-n`) and `kappa`
/// (enclosing cone) measured once on a sweep and then frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCalibration<T> {
    pub c_hat: T,
    pub kappa: T,
    pub orbits: usize,
    pub depth: usize,
}

impl<T: Real> ConeCalibration<T> {
    pub fn width_bound(&self, width0: T, n: usize) -> T {
        width0 * self.c_hat * (T::lit(2.0) * T::SQRT_2()).powi(-(n as i32))
    }
}

pub fn calibrate<T: Real, R: Rng + ?Sized>(
    map: &LorenzMap<T>,
    rng: &mut R,
    orbits: usize,
    depth: usize,
) -> ConeCalibration<T> {
    let rate = T::lit(2.0) * T::SQRT_2();
    let mut c_hat = T::zero();
    let mut kappa = T::zero();
    for _ in 0..orbits {
        let s = map.sample_backward_orbit(rng, depth, 5);
        let hist = cone_history(map, &s.points, depth).expect("sampled orbit avoids x = 0");
        let w0 = hist[0].width();
        for (n, c) in hist.iter().enumerate().skip(1) {
            kappa = kappa.max(c.max_abs_slope());
            let w = c.width();
            if w > T::epsilon() * T::lit(1e3) {
                c_hat = c_hat.max(w * rate.powi(n as i32) / w0);
            }
        }
    }
    ConeCalibration {
        c_hat,
        kappa,
        orbits,
        depth,
    }
}

pub fn expansion_constant<T: Real>(alpha: T) -> T {
    (T::one() + T::one() / (alpha * alpha)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport<T> {
    /// `||DF^n w|| / ||w||`
    pub ratio: T,
    /// `sqrt2^n / sqrt(1 + 1/alpha^2)`
    pub bound: T,
    pub in_cone: bool,
    pub holds: bool,
}

/// Compares the growth of `w` under `DF^n(p)` with the cone lower bound.
pub fn expansion_check<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    w: [T; 2],
    n: usize,
) -> Result<GrowthReport<T>> {
    let orbit = map.forward_orbit(p, n)?;
    let mut v = w;
    for q in orbit.iter().take(n) {
        let d = map.df(*q)?;
        v = [d[0][0] * v[0], d[1][0] * v[0] + d[1][1] * v[1]];
    }
    let norm = |a: [T; 2]| a[0].hypot(a[1]);
    let alpha = map.alpha();
    let ratio = norm(v) / norm(w);
    let bound = T::SQRT_2().powi(n as i32) / expansion_constant(alpha);
    let in_cone = w[0].abs() >= alpha * w[1].abs();
    let slack = T::one() - T::tol(1e-12);
    Ok(GrowthReport {
        ratio,
        bound,
        in_cone,
        holds: !in_cone || ratio >= bound * slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lyapunov<T> {
    pub lambda_s: T,
    pub lambda_u: T,
}

pub enum LyapunovInput<'a, T> {
    /// Consecutive forward iterates; every point is averaged.
    Orbit(&'a [Point<T>]),
    /// Point cloud with non-negative weights (normalized internally).
    Weighted(&'a [(Point<T>, T)]),
}

/// Averages of `log |dg/dy|` and `log f'` over the input.
pub fn lyapunov_exponents<T: Real>(
    map: &LorenzMap<T>,
    input: LyapunovInput<'_, T>,
) -> Result<Lyapunov<T>> {
    let tol = map.zero_tol();
    let mut ls = T::zero();
    let mut lu = T::zero();
    let mut total = T::zero();
    let mut visit = |step: usize, p: Point<T>, w: T| -> Result<()> {
        if p.x.abs() < tol {
            return Err(Error::NearCritical {
                step,
                x: p.x.to_f64_lossy(),
            });
        }
        ls = ls + w * map.dg_dy(p.x).abs().ln();
        lu = lu + w * map.f_prime(p.x)?.ln();
        total = total + w;
        Ok(())
    };
    match input {
        LyapunovInput::Orbit(pts) => {
            for (i, p) in pts.iter().enumerate() {
                visit(i, *p, T::one())?;
            }
        }
        LyapunovInput::Weighted(pts) => {
            for (i, (p, w)) in pts.iter().enumerate() {
                visit(i, *p, *w)?;
            }
        }
    }
    Ok(Lyapunov {
        lambda_s: ls / total,
        lambda_u: lu / total,
    })
}
