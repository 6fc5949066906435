//! Itineraries, periodic points from words, and delta-dense periodic orbits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaves::DEFAULT_POSTCRITICAL_DEPTH;
use crate::lorenz_map::{BranchWord, LorenzMap, Side};
use crate::scalar::Real;

pub const PERIODIC_TOL: f64 = 1e-10;
/// Minimum distance between a band's periodic orbit and the post-critical table.
pub const PC_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit<T> {
    pub word: BranchWord,
    pub points: Vec<T>,
    pub period: usize,
    /// Largest gap of `points` together with the ends `-1, 1`.
    pub gap_bound: T,
}

pub fn itinerary<T: Real>(map: &LorenzMap<T>, x: T, n: usize) -> Result<BranchWord> {
    let tol = map.zero_tol();
    let mut out = Vec::with_capacity(n);
    let mut u = x;
    for step in 0..n {
        if u.abs() < tol {
            return Err(Error::CodeAmbiguous { step });
        }
        let s = Side::of(u).expect("nonzero");
        out.push(s);
        u = map.f_on(s, u);
    }
    Ok(BranchWord(out))
}

pub fn gap_bound<T: Real>(points: &[T]) -> T {
    let mut s: Vec<T> = points.to_vec();
    s.push(-T::one());
    s.push(T::one());
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    s.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
}

fn closed_domain<T: Real>(s: Side) -> (T, T) {
    match s {
        Side::L => (-T::one(), T::zero()),
        Side::R => (T::zero(), T::one()),
    }
}

fn reject(word: &BranchWord, reason: impl Into<String>) -> Error {
    Error::PeriodicRejected {
        word: word.to_string(),
        reason: reason.into(),
    }
}

/// Fixed point of `f^p` with itinerary `word`, by iterating the composed
/// inverse branches (clamped to their common domain) until it settles.
pub fn periodic_point<T: Real>(map: &LorenzMap<T>, word: &BranchWord) -> Result<T> {
    let p = word.len();
    if p == 0 {
        return Err(reject(word, "empty word"));
    }
    // J: inputs on which h_{w0} o ... o h_{w(p-1)} is defined
    let mut j = map.branch_range(word[0]);
    for k in 1..p {
        let s = word[k];
        let (dlo, dhi) = closed_domain::<T>(s);
        let (lo, hi) = (j.0.max(dlo), j.1.min(dhi));
        if lo > hi {
            return Err(reject(word, format!("empty cylinder at symbol {k}")));
        }
        let (rlo, rhi) = map.branch_range(s);
        j = (map.f_on(s, lo).max(rlo), map.f_on(s, hi).min(rhi));
        if j.0 > j.1 {
            return Err(reject(word, format!("empty cylinder at symbol {k}")));
        }
    }
    let compose = |x: T| -> T {
        let mut u = x.max(j.0).min(j.1);
        for k in (0..p).rev() {
            u = map.inverse_closed(word[k], u);
        }
        u
    };
    let mut x = (j.0 + j.1) * T::lit(0.5);
    let mut converged = false;
    let mut last = T::infinity();
    for _ in 0..200 {
        let nx = compose(x);
        last = (nx - x).abs();
        x = nx;
        if last <= T::epsilon() * T::lit(4.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(reject(
            word,
            format!(
                "no convergence in 200 iterations, last step {:e}",
                last.to_f64_lossy()
            ),
        ));
    }
    let slack = T::tol(PERIODIC_TOL);
    if x < j.0 - slack || x > j.1 + slack {
        return Err(reject(
            word,
            "fixed point of the clamped map leaves the cylinder",
        ));
    }
    let it = itinerary(map, x, p).map_err(|e| reject(word, e.to_string()))?;
    if &it != word {
        return Err(reject(word, format!("itinerary {it} differs")));
    }
    // backward error: the residual is measured against the derivative of f^p
    let mut u = x;
    let mut dp = T::one();
    for k in 0..p {
        dp = dp * map.fp_on(word[k], u);
        u = map.f_on(word[k], u);
    }
    if (u - x).abs() > slack * dp.max(T::one()) {
        return Err(reject(
            word,
            format!("f^p(x) - x = {:e}", (u - x).to_f64_lossy()),
        ));
    }
    Ok(x)
}

pub fn periodic_orbit<T: Real>(map: &LorenzMap<T>, word: &BranchWord) -> Result<PeriodicOrbit<T>> {
    let x0 = periodic_point(map, word)?;
    let mut points = Vec::with_capacity(word.len());
    let mut u = x0;
    for k in 0..word.len() {
        points.push(u);
        u = map.f_on(word[k], u);
    }
    Ok(PeriodicOrbit {
        word: word.clone(),
        gap_bound: gap_bound(&points),
        period: word.len(),
        points,
    })
}

/// Word number `idx` of length `p` in lexicographic order (`L < R`).
pub fn word_at(p: usize, idx: u64) -> BranchWord {
    (0..p)
        .map(|k| {
            if (idx >> (p - 1 - k)) & 1 == 1 {
                Side::R
            } else {
                Side::L
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOrbit<T> {
    pub orbit: PeriodicOrbit<T>,
    pub p_l: T,
    pub p_r: T,
    /// Distance from `{P_l, P_r}` to the post-critical table.
    pub pc_distance: T,
}

/// Consecutive same-side pair farthest from the post-critical table (ties: leftmost).
fn best_pair<T: Real>(points: &[T], pc: &crate::lorenz_map::PostCritical<T>) -> Option<(T, T, T)> {
    let mut s = points.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut best: Option<(T, T, T)> = None;
    for w in s.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a * b > T::zero()) || a == b {
            continue;
        }
        let d = pc
            .min_distance(a, DEFAULT_POSTCRITICAL_DEPTH)
            .min(pc.min_distance(b, DEFAULT_POSTCRITICAL_DEPTH));
        if best.map_or(true, |(_, _, bd)| d > bd) {
            best = Some((a, b, d));
        }
    }
    best
}

/// First accepted periodic orbit (periods increasing, words lexicographic)
/// with `gap_bound < delta_hat`, a same-side consecutive pair, and every
/// orbit point farther than `PC_MARGIN` from the post-critical table.
pub fn delta_dense_periodic_orbit<T: Real>(
    map: &LorenzMap<T>,
    delta_hat: T,
    max_period: usize,
) -> Result<DenseOrbit<T>> {
    let pc = map.postcritical(DEFAULT_POSTCRITICAL_DEPTH);
    let margin = T::tol(PC_MARGIN);
    let accept = |word: &BranchWord| -> Option<DenseOrbit<T>> {
        let orbit = periodic_orbit(map, word).ok()?;
        if !(orbit.gap_bound < delta_hat) {
            return None;
        }
        if orbit
            .points
            .iter()
            .any(|&x| pc.min_distance(x, DEFAULT_POSTCRITICAL_DEPTH) <= margin)
        {
            return None;
        }
        let (p_l, p_r, d) = best_pair(&orbit.points, &pc)?;
        Some(DenseOrbit {
            orbit,
            p_l,
            p_r,
            pc_distance: d,
        })
    };
    for p in 1..=max_period.min(40) {
        let found = (0..1u64 << p)
            .into_par_iter()
            .find_map_first(|idx| accept(&word_at(p, idx)));
        if let Some(d) = found {
            return Ok(d);
        }
    }
    Err(Error::IncreaseMaxPeriod { max_period })
}
