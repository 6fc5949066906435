//! Past-stabilization, backward slow recurrence, local unstable leaves and beaks.
//!
//! A backward word fixes one inverse branch per depth. Pulling a horizontal
//! window back along it, the window is cut whenever it leaves the range of
//! the next branch. Seen at depth 0 every cut sits on a post-critical value
//! `f^k(+-1)`, so the window edges are read off the post-critical table and
//! beak matching against the same table is exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::ProjectiveCone;
use crate::error::{Error, Result};
use crate::lorenz_map::{BranchWord, LorenzMap, Point, PostCritical, Side};
use crate::scalar::Real;

pub const DEFAULT_SAMPLES: usize = 512;
pub const DEFAULT_BSR_DELTA: f64 = 0.05;
pub const DEFAULT_POSTCRITICAL_DEPTH: usize = 1000;
pub const BEAK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndKind {
    Beak,
    Truncated,
    BandBorder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafGraph<T> {
    pub domain: (T, T),
    pub samples: Vec<Point<T>>,
    /// Largest observed `|dy/dx|` between consecutive samples.
    pub lipschitz_bound: T,
    pub left_end_kind: EndKind,
    pub right_end_kind: EndKind,
    pub depth: usize,
    pub vertical_error: T,
    /// Backward word used by the graph transform (length `depth`).
    pub chain: BranchWord,
}

impl<T: Real> LeafGraph<T> {
    /// Piecewise-linear evaluation, clamped to the domain.
    pub fn eval(&self, x: T) -> T {
        let s = &self.samples;
        if x <= s[0].x {
            return s[0].y;
        }
        if x >= s[s.len() - 1].x {
            return s[s.len() - 1].y;
        }
        let i = s.partition_point(|p| p.x <= x).max(1);
        let (a, b) = (s[i - 1], s[i]);
        let t = (x - a.x) / (b.x - a.x);
        a.y + t * (b.y - a.y)
    }

    pub fn contains_x(&self, x: T) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    pub fn sup_distance(&self, other: &LeafGraph<T>) -> T {
        let lo = self.domain.0.max(other.domain.0);
        let hi = self.domain.1.min(other.domain.1);
        self.samples
            .iter()
            .chain(other.samples.iter())
            .filter(|p| p.x >= lo && p.x <= hi)
            .map(|p| (self.eval(p.x) - other.eval(p.x)).abs())
            .fold(T::zero(), T::max)
    }
}

pub fn max_slope<T: Real>(samples: &[Point<T>]) -> T {
    samples
        .windows(2)
        .filter(|w| w[1].x > w[0].x)
        .map(|w| ((w[1].y - w[0].y) / (w[1].x - w[0].x)).abs())
        .fold(T::zero(), T::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationReport<T> {
    pub stabilized: bool,
    pub delta: T,
    pub first_cut_depths: Vec<usize>,
    pub eta: T,
    pub n_used: usize,
    /// Depth-0 window whose pullbacks never meet the critical line.
    pub window: (T, T),
}

struct Window<T> {
    window: (T, T),
    cuts: Vec<(usize, T)>,
}

fn preimage_x<T: Real>(
    map: &LorenzMap<T>,
    x: T,
    word: &BranchWord,
    depth: usize,
) -> Result<Vec<T>> {
    let tol = map.zero_tol();
    let mut out = Vec::with_capacity(depth + 1);
    out.push(x);
    let mut u = x;
    for k in 0..depth {
        let s = word[k];
        u = map.inverse_branch(s, u).map_err(|_| Error::Inadmissible {
            depth: k + 1,
            reason: format!("x = {} not in the range of branch {s}", u.to_f64_lossy()),
        })?;
        if u.abs() < tol {
            return Err(Error::Inadmissible {
                depth: k + 1,
                reason: "preimage on the critical line".into(),
            });
        }
        out.push(u);
    }
    Ok(out)
}

fn track_window<T: Real>(
    map: &LorenzMap<T>,
    x: T,
    word: &BranchWord,
    depth: usize,
    pc: &PostCritical<T>,
) -> Window<T> {
    let one = T::one();
    let mut u = (-one, one);
    let mut v = (-one, one);
    let mut cuts = Vec::new();
    let at = |tab: &Vec<T>, k: usize| tab.get(k).copied().unwrap_or(T::nan());
    for k in 1..=depth {
        let s = word[k - 1];
        let (rlo, rhi) = map.branch_range(s);
        let (cut_lo, cut_hi, edge_lo, edge_hi) = match s {
            Side::L => (v.0 < rlo, v.1 >= rhi, -one, T::zero()),
            Side::R => (v.0 <= rlo, v.1 > rhi, T::zero(), one),
        };
        if cut_lo {
            let val = match s {
                Side::L => at(&pc.minus, k),
                Side::R => at(&pc.minus, k - 1),
            };
            if val > u.0 {
                u.0 = val;
                cuts.push((k, x - val));
            }
        }
        if cut_hi {
            let val = match s {
                Side::L => at(&pc.plus, k - 1),
                Side::R => at(&pc.plus, k),
            };
            if val < u.1 {
                u.1 = val;
                cuts.push((k, val - x));
            }
        }
        v = (
            if cut_lo {
                edge_lo
            } else {
                map.inverse_closed(s, v.0)
            },
            if cut_hi {
                edge_hi
            } else {
                map.inverse_closed(s, v.1)
            },
        );
    }
    Window { window: u, cuts }
}

/// Tracks the largest window around `p.x` whose preimages along `word`
/// avoid the critical line down to `depth`.
pub fn past_stabilization_test<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    word: &BranchWord,
    depth: usize,
    delta: T,
) -> Result<StabilizationReport<T>> {
    if word.len() < depth {
        return Err(Error::Inadmissible {
            depth: word.len() + 1,
            reason: "word shorter than depth".into(),
        });
    }
    preimage_x(map, p.x, word, depth)?;
    let pc = map.postcritical(depth + 1);
    let w = track_window(map, p.x, word, depth, &pc);
    let eta = T::lit(2.0) * (p.x - w.window.0).min(w.window.1 - p.x);
    let half_delta = delta * T::lit(0.5);
    let n_used = w
        .cuts
        .iter()
        .filter(|(_, d)| *d <= half_delta)
        .map(|(k, _)| k + 1)
        .max()
        .unwrap_or(0);
    let mut first_cut_depths: Vec<usize> = w.cuts.iter().map(|(k, _)| *k).collect();
    first_cut_depths.dedup();
    Ok(StabilizationReport {
        stabilized: eta > T::tol(1e-12),
        delta,
        first_cut_depths,
        eta,
        n_used,
        window: w.window,
    })
}

/// Average of `|log ||x_{-k}||_delta|` over `k < depth`, with `||z||_delta = min(1, |z|/delta)`.
pub fn bsr_diagnostic<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    word: &BranchWord,
    delta: T,
    depth: usize,
) -> Result<T> {
    if depth == 0 {
        return Ok(T::zero());
    }
    let xs = preimage_x(map, p.x, word, depth - 1)?;
    let sum: T = xs
        .iter()
        .map(|&x| (x.abs() / delta).min(T::one()).ln().abs())
        .sum();
    Ok(sum / T::from_usize_lossy(depth))
}

/// Image under `F^depth` of the horizontal segment through the depth-`depth`
/// preimage, as a graph over `domain` (which must lie in the stabilized window).
pub fn leaf_over<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    word: &BranchWord,
    depth: usize,
    domain: (T, T),
    samples: usize,
) -> Result<LeafGraph<T>> {
    let chain = BranchWord(word.symbols()[..depth].to_vec());
    let y_deep = if depth == 0 {
        p.y
    } else {
        map.backward_orbit(p, &chain)?[depth - 1].y
    };
    let eval = |x: T, buf: &mut Vec<T>| -> T {
        buf.clear();
        let mut u = x;
        for k in 0..depth {
            u = map.inverse_closed(chain[k], u);
            buf.push(u);
        }
        let mut y = y_deep;
        for k in (0..depth).rev() {
            y = map.g_on(chain[k], buf[k], y);
        }
        y
    };
    let k = samples.max(2);
    let mut buf = Vec::with_capacity(depth);
    let mut pts: Vec<Point<T>> = (0..k)
        .map(|i| {
            let x = if i + 1 == k {
                domain.1
            } else {
                domain.0
                    + (domain.1 - domain.0) * T::from_usize_lossy(i) / T::from_usize_lossy(k - 1)
            };
            Point::new(x, eval(x, &mut buf))
        })
        .collect();
    // the base point itself is always a node
    if p.x > domain.0 && p.x < domain.1 {
        let i = pts.partition_point(|q| q.x < p.x);
        if pts[i].x != p.x {
            pts.insert(i, Point::new(p.x, eval(p.x, &mut buf)));
        }
    }
    // one refinement pass where the slope approaches 1/alpha
    let steep = T::lit(0.9) / map.alpha();
    let mut refined = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        refined.push(w[0]);
        let dx = w[1].x - w[0].x;
        if dx > T::zero() && ((w[1].y - w[0].y) / dx).abs() > steep {
            let xm = (w[0].x + w[1].x) * T::lit(0.5);
            refined.push(Point::new(xm, eval(xm, &mut buf)));
        }
    }
    refined.push(*pts.last().expect("at least two samples"));
    pts = refined;
    let lipschitz_bound = max_slope(&pts);
    let gain = map.params().contraction_bound.abs().min(T::lit(0.5));
    let mut leaf = LeafGraph {
        domain,
        samples: pts,
        lipschitz_bound,
        left_end_kind: EndKind::Truncated,
        right_end_kind: EndKind::Truncated,
        depth,
        vertical_error: T::lit(2.0) * gain.powi(depth as i32),
        chain,
    };
    let (l, r) = beak_detect(map, &leaf, DEFAULT_POSTCRITICAL_DEPTH);
    leaf.left_end_kind = l;
    leaf.right_end_kind = r;
    Ok(leaf)
}

/// Leaf over `(x - eta/2, x + eta/2)` from the stabilization window.
pub fn local_unstable_leaf<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    word: &BranchWord,
    depth: usize,
) -> Result<LeafGraph<T>> {
    let st = past_stabilization_test(map, p, word, depth, T::lit(DEFAULT_BSR_DELTA))?;
    if !st.stabilized {
        return Err(Error::NoLeaf { depth });
    }
    let r = st.eta * T::lit(0.5);
    leaf_over(map, p, word, depth, (p.x - r, p.x + r), DEFAULT_SAMPLES)
}

/// True iff the leaf built at `depth` is a graph over `(x - 1/n, x + 1/n)`.
pub fn lambda_n_member<T: Real>(
    map: &LorenzMap<T>,
    p: Point<T>,
    word: &BranchWord,
    n: usize,
    depth: usize,
) -> Result<bool> {
    if n == 0 {
        return Ok(false);
    }
    let st = past_stabilization_test(map, p, word, depth, T::lit(DEFAULT_BSR_DELTA))?;
    Ok(st.stabilized && st.eta * T::lit(0.5) >= T::one() / T::from_usize_lossy(n))
}

/// Fraction of sampled attractor points owning a graph over a radius-`1/n_max` interval.
pub fn lambda_density<T: Real, R: Rng + ?Sized>(
    map: &LorenzMap<T>,
    rng: &mut R,
    samples: usize,
    n_max: usize,
    depth: usize,
) -> T {
    let mut hits = 0usize;
    for _ in 0..samples {
        let s = map.sample_backward_orbit(rng, depth, 5);
        if lambda_n_member(map, s.p, &s.word, n_max, depth).unwrap_or(false) {
            hits += 1;
        }
    }
    T::from_usize_lossy(hits) / T::from_usize_lossy(samples.max(1))
}

fn matches_table<T: Real>(pc: &PostCritical<T>, x: T, depth: usize) -> bool {
    pc.min_distance(x, depth) <= T::tol(BEAK_TOL)
}

/// Labels each endpoint `Beak` if it sits on a post-critical value `f^k(+-1)`,
/// `k <= postcritical_depth`; otherwise keeps `BandBorder` or reports `Truncated`.
pub fn beak_detect<T: Real>(
    map: &LorenzMap<T>,
    leaf: &LeafGraph<T>,
    postcritical_depth: usize,
) -> (EndKind, EndKind) {
    let pc = map.postcritical(postcritical_depth);
    let label = |x: T, prev: EndKind| {
        if matches_table(&pc, x, postcritical_depth) {
            EndKind::Beak
        } else if prev == EndKind::BandBorder {
            EndKind::BandBorder
        } else {
            EndKind::Truncated
        }
    };
    (
        label(leaf.domain.0, leaf.left_end_kind),
        label(leaf.domain.1, leaf.right_end_kind),
    )
}

/// Post-critical values strictly inside the leaf whose pullback along the
/// leaf's own word reaches the critical line, i.e. genuine interior beaks.
pub fn interior_beaks<T: Real>(
    map: &LorenzMap<T>,
    leaf: &LeafGraph<T>,
    postcritical_depth: usize,
) -> Vec<T> {
    let pc = map.postcritical(postcritical_depth);
    let tol = T::tol(BEAK_TOL);
    let mut out = Vec::new();
    for (_, _, v) in pc.entries(postcritical_depth) {
        if v <= leaf.domain.0 + tol || v >= leaf.domain.1 - tol {
            continue;
        }
        let mut u = v;
        for k in 0..leaf.chain.len() {
            u = map.inverse_closed(leaf.chain[k], u);
            if u.abs() <= tol {
                out.push(v);
                break;
            }
        }
    }
    out
}

/// Leaf slopes between consecutive samples, each checked against the cone.
pub fn slopes_in_cone<T: Real>(leaf: &LeafGraph<T>, cone: &ProjectiveCone<T>) -> bool {
    leaf.lipschitz_bound <= cone.max_abs_slope()
}
