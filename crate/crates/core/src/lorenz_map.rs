//! The skew product `F(x, y) = (f(x), g(x, y))` on the square `[-1, 1]^2`.
//!
//! The base map `f` has two increasing branches, `L` on `[-1, 0)` and `R` on
//! `(0, 1]`, with a power-law singularity at the critical line `x = 0`.
//! The fiber map `g` contracts verticals.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl Side {
    /// `None` on the critical line.
    pub fn of<T: Real>(x: T) -> Option<Side> {
        if x < T::zero() {
            Some(Side::L)
        } else if x > T::zero() {
            Some(Side::R)
        } else {
            None
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Side::L => 'L',
            Side::R => 'R',
        }
    }

    pub fn from_symbol(c: char) -> Option<Side> {
        match c {
            'L' | 'l' | '0' => Some(Side::L),
            'R' | 'r' | '1' => Some(Side::R),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Finite sequence of branch symbols. Used both as a forward itinerary and as
/// a choice of inverse branches (symbol `k` selects the branch of `F^{-(k+1)}`).
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchWord(pub Vec<Side>);

impl BranchWord {
    pub fn new(symbols: Vec<Side>) -> Self {
        BranchWord(symbols)
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(Side::from_symbol)
            .collect::<Option<Vec<_>>>()
            .map(BranchWord)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Side] {
        &self.0
    }

    /// Word repeated cyclically up to `len` symbols.
    pub fn cycle_to(&self, len: usize) -> BranchWord {
        BranchWord(self.0.iter().copied().cycle().take(len).collect())
    }

    pub fn reversed(&self) -> BranchWord {
        BranchWord(self.0.iter().rev().copied().collect())
    }
}

impl fmt::Display for BranchWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BranchWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BranchWord({self})")
    }
}

impl FromIterator<Side> for BranchWord {
    fn from_iter<I: IntoIterator<Item = Side>>(iter: I) -> Self {
        BranchWord(iter.into_iter().collect())
    }
}

impl std::ops::Index<usize> for BranchWord {
    type Output = Side;
    fn index(&self, i: usize) -> &Side {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }
}

/// Row-major 2x2 matrix.
pub type Matrix2<T> = [[T; 2]; 2];

/// Which closed forms the branches use.
///
/// `Default` ties the coefficients to the parameters: `c_r = 1 + v_r`,
/// `c_l = 1 - v_l`, fiber gain = `contraction_bound`. `Coefficients` overrides
/// them, which can produce instances that fail validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchFormula<T> {
    Default,
    Coefficients { c_l: T, c_r: T, gain: T },
}

/// `f(x) = -1 + c_r x^rho` on `(0, 1]`, `f(x) = 1 - c_l |x|^rho` on `[-1, 0)`,
/// `g(x, y) = y_pm + gain |x| y` with `y_plus` on the left, `y_minus` on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapParams<T> {
    pub rho: T,
    pub v_l: T,
    pub v_r: T,
    pub contraction_bound: T,
    pub m: T,
    pub y_plus: T,
    pub y_minus: T,
    pub alpha: T,
    pub formula: BranchFormula<T>,
}

impl<T: Real> Default for MapParams<T> {
    fn default() -> Self {
        Self::default_instance()
    }
}

impl<T: Real> MapParams<T> {
    pub fn default_instance() -> Self {
        MapParams {
            rho: T::lit(0.75),
            v_l: T::lit(-0.95),
            v_r: T::lit(0.95),
            contraction_bound: T::lit(0.5),
            m: T::lit(0.5),
            y_plus: T::lit(0.4),
            y_minus: T::lit(-0.4),
            alpha: T::lit(0.9),
            formula: BranchFormula::Default,
        }
    }

    /// Reads `[section]` keys on top of the default instance. `formula` is
    /// `default` or `coefficients` (then `c_l`, `c_r`, `gain` are required).
    pub fn from_kv(doc: &KvDoc, section: &str) -> Result<Self> {
        let d = Self::default_instance();
        let get = |k: &str, dv: T| -> Result<T> {
            let v: f64 = doc.parse_or(section, k, dv.to_f64_lossy())?;
            Ok(T::lit(v))
        };
        let formula = match doc.get(section, "formula").unwrap_or("default") {
            "default" => BranchFormula::Default,
            "coefficients" => {
                let need = |k: &str| -> Result<T> {
                    doc.get(section, k)
                        .ok_or_else(|| {
                            Error::Config(format!("[{section}] formula = coefficients needs {k}"))
                        })?
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::Config(format!("[{section}] {k}: not a number")))
                };
                BranchFormula::Coefficients {
                    c_l: need("c_l")?,
                    c_r: need("c_r")?,
                    gain: need("gain")?,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "[{section}] unknown formula {other:?}"
                )))
            }
        };
        Ok(MapParams {
            rho: get("rho", d.rho)?,
            v_l: get("v_l", d.v_l)?,
            v_r: get("v_r", d.v_r)?,
            contraction_bound: get("contraction_bound", d.contraction_bound)?,
            m: get("M", d.m)?,
            y_plus: get("y_plus", d.y_plus)?,
            y_minus: get("y_minus", d.y_minus)?,
            alpha: get("alpha", d.alpha)?,
            formula,
        })
    }

    fn coefficients(&self) -> (T, T, T) {
        match self.formula {
            BranchFormula::Default => (
                T::one() - self.v_l,
                T::one() + self.v_r,
                self.contraction_bound,
            ),
            BranchFormula::Coefficients { c_l, c_r, gain } => (c_l, c_r, gain),
        }
    }
}

/// One hypothesis check of [`validate_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// `name = pass|fail  # detail` lines.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::from("[validation]\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{} = {}  # {}\n",
                c.name,
                if c.passed { "pass" } else { "fail" },
                c.detail
            ));
        }
        s.push_str(&format!("all_passed = {}\n", self.all_passed()));
        s
    }
}

/// Forward orbits of the two critical values, `plus[k] = f^k(1)` and
/// `minus[k] = f^k(-1)`. An orbit that lands on 0 is truncated there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostCritical<T> {
    pub plus: Vec<T>,
    pub minus: Vec<T>,
}

impl<T: Real> PostCritical<T> {
    pub fn len(&self) -> usize {
        self.plus.len().max(self.minus.len())
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// `(k, side, x_k)` triples up to index `depth`; side `L` marks the orbit of `f(0^-) = 1`.
    pub fn entries(&self, depth: usize) -> impl Iterator<Item = (usize, Side, T)> + '_ {
        let p = self
            .plus
            .iter()
            .take(depth + 1)
            .enumerate()
            .map(|(k, &x)| (k, Side::L, x));
        let m = self
            .minus
            .iter()
            .take(depth + 1)
            .enumerate()
            .map(|(k, &x)| (k, Side::R, x));
        p.chain(m)
    }

    pub fn min_distance(&self, x: T, depth: usize) -> T {
        self.entries(depth)
            .map(|(_, _, v)| (v - x).abs())
            .fold(T::infinity(), T::min)
    }
}

/// A backward orbit sample: `points[k] = F^{-(k+1)}(p)`, `word[k]` its side.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOrbit<T> {
    pub p: Point<T>,
    pub word: BranchWord,
    pub points: Vec<Point<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzMap<T> {
    params: MapParams<T>,
    c_l: T,
    c_r: T,
    gain: T,
}

impl<T: Real> Default for LorenzMap<T> {
    fn default() -> Self {
        LorenzMap::new(MapParams::default_instance())
    }
}

impl<T: Real> LorenzMap<T> {
    pub fn new(params: MapParams<T>) -> Self {
        let (c_l, c_r, gain) = params.coefficients();
        LorenzMap {
            params,
            c_l,
            c_r,
            gain,
        }
    }

    pub fn params(&self) -> &MapParams<T> {
        &self.params
    }

    pub fn alpha(&self) -> T {
        self.params.alpha
    }

    /// Points closer than this to the critical line are rejected by orbit routines.
    pub fn zero_tol(&self) -> T {
        T::tol(1e-12)
    }

    /// Branch formula on the closed domain (`x = 0` gives the side limit).
    #[inline]
    pub fn f_on(&self, side: Side, x: T) -> T {
        let rho = self.params.rho;
        match side {
            Side::R => -T::one() + self.c_r * x.max(T::zero()).powf(rho),
            Side::L => T::one() - self.c_l * (-x).max(T::zero()).powf(rho),
        }
    }

    #[inline]
    pub fn fp_on(&self, side: Side, x: T) -> T {
        let rho = self.params.rho;
        let c = match side {
            Side::R => self.c_r,
            Side::L => self.c_l,
        };
        rho * c * x.abs().powf(rho - T::one())
    }

    pub fn f_eval(&self, x: T) -> Result<T> {
        Side::of(x).map(|s| self.f_on(s, x)).ok_or(Error::Bivalued)
    }

    pub fn f_side_limit(&self, side: Side) -> T {
        self.f_on(side, T::zero())
    }

    pub fn f_prime(&self, x: T) -> Result<T> {
        Side::of(x).map(|s| self.fp_on(s, x)).ok_or(Error::Bivalued)
    }

    /// Closure of the image of a branch; the end at the side limit is open.
    pub fn branch_range(&self, side: Side) -> (T, T) {
        match side {
            Side::L => (self.f_on(Side::L, -T::one()), self.f_side_limit(Side::L)),
            Side::R => (self.f_side_limit(Side::R), self.f_on(Side::R, T::one())),
        }
    }

    /// Half-open membership: the side-limit end is excluded.
    pub fn in_branch_range(&self, side: Side, u: T) -> bool {
        let (lo, hi) = self.branch_range(side);
        match side {
            Side::L => u >= lo && u < hi,
            Side::R => u > lo && u <= hi,
        }
    }

    /// Inverse of the branch formula on the closed range; the side-limit end
    /// maps to the critical line. Closed-form power inverse followed by one
    /// Newton polish.
    #[inline]
    pub fn inverse_closed(&self, side: Side, u: T) -> T {
        let inv_rho = T::one() / self.params.rho;
        let x = match side {
            Side::R => ((u + T::one()) / self.c_r).max(T::zero()).powf(inv_rho),
            Side::L => -((T::one() - u) / self.c_l).max(T::zero()).powf(inv_rho),
        };
        if x == T::zero() {
            return x;
        }
        let x1 = x - (self.f_on(side, x) - u) / self.fp_on(side, x);
        // keep the polish only when it stays on the branch and does not hurt
        let (lo, hi) = match side {
            Side::L => (-T::one(), T::zero()),
            Side::R => (T::zero(), T::one()),
        };
        if x1 > lo && x1 < hi && (self.f_on(side, x1) - u).abs() <= (self.f_on(side, x) - u).abs() {
            x1
        } else {
            x
        }
    }

    pub fn inverse_branch(&self, side: Side, u: T) -> Result<T> {
        if !self.in_branch_range(side, u) {
            return Err(Error::NotInBranchRange {
                side,
                value: u.to_f64_lossy(),
            });
        }
        Ok(self.inverse_closed(side, u))
    }

    #[inline]
    pub fn g_on(&self, side: Side, x: T, y: T) -> T {
        let base = match side {
            Side::L => self.params.y_plus,
            Side::R => self.params.y_minus,
        };
        base + self.gain * x.abs() * y
    }

    #[inline]
    pub fn dg_dx(&self, x: T, y: T) -> T {
        self.gain * x.signum() * y
    }

    #[inline]
    pub fn dg_dy(&self, x: T) -> T {
        self.gain * x.abs()
    }

    pub fn g(&self, x: T, y: T) -> Result<T> {
        Side::of(x)
            .map(|s| self.g_on(s, x, y))
            .ok_or(Error::Bivalued)
    }

    #[inline]
    pub fn apply_on(&self, side: Side, p: Point<T>) -> Point<T> {
        Point::new(self.f_on(side, p.x), self.g_on(side, p.x, p.y))
    }

    pub fn apply(&self, p: Point<T>) -> Result<Point<T>> {
        Side::of(p.x)
            .map(|s| self.apply_on(s, p))
            .ok_or(Error::Bivalued)
    }

    /// Lower-triangular differential `[[f', 0], [g_x, g_y]]`.
    pub fn df(&self, p: Point<T>) -> Result<Matrix2<T>> {
        let a = self.f_prime(p.x)?;
        Ok([[a, T::zero()], [self.dg_dx(p.x, p.y), self.dg_dy(p.x)]])
    }

    /// `p, F(p), ..., F^n(p)`; fails when an iterate that must be mapped is
    /// within [`zero_tol`](Self::zero_tol) of the critical line.
    pub fn forward_orbit(&self, p: Point<T>, n: usize) -> Result<Vec<Point<T>>> {
        let tol = self.zero_tol();
        let mut out = Vec::with_capacity(n + 1);
        let mut q = p;
        out.push(q);
        for step in 0..n {
            if q.x.abs() < tol {
                return Err(Error::NearCritical {
                    step,
                    x: q.x.to_f64_lossy(),
                });
            }
            q = self.apply(q)?;
            out.push(q);
        }
        Ok(out)
    }

    /// Preimages `F^{-1}(p), ..., F^{-n}(p)` along `word` (`word[k]` is the side of `F^{-(k+1)}(p)`).
    ///
    /// The x-preimages come from inverse branches. The deepest y is found by
    /// bisection on the monotone map `y -> pi_2 F^n(x_{-n}, y)`, and shallower
    /// y-values by pushing forward, so errors contract instead of growing.
    pub fn backward_orbit(&self, p: Point<T>, word: &BranchWord) -> Result<Vec<Point<T>>> {
        let n = word.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let tol0 = self.zero_tol();
        let mut xs = Vec::with_capacity(n);
        let mut u = p.x;
        for (k, &s) in word.symbols().iter().enumerate() {
            u = self.inverse_branch(s, u).map_err(|_| Error::Inadmissible {
                depth: k + 1,
                reason: format!("x = {} not in the range of branch {s}", u.to_f64_lossy()),
            })?;
            if u.abs() < tol0 {
                return Err(Error::Inadmissible {
                    depth: k + 1,
                    reason: "x-preimage on the critical line".into(),
                });
            }
            xs.push(u);
        }
        let push = |depth: usize, y0: T| -> T {
            let mut y = y0;
            for k in (0..depth).rev() {
                y = self.g_on(word[k], xs[k], y);
            }
            y
        };
        let lo_img = push(n, -T::one());
        let hi_img = push(n, T::one());
        let increasing = hi_img >= lo_img;
        let (mut lo, mut hi) = if increasing {
            (-T::one(), T::one())
        } else {
            (T::one(), -T::one())
        };
        let ytol = T::tol(1e-9);
        let (img_min, img_max) = (lo_img.min(hi_img), lo_img.max(hi_img));
        if p.y < img_min - ytol || p.y > img_max + ytol {
            let depth = (1..=n)
                .find(|&d| {
                    let a = push(d, -T::one());
                    let b = push(d, T::one());
                    p.y < a.min(b) - ytol || p.y > a.max(b) + ytol
                })
                .unwrap_or(n);
            return Err(Error::Inadmissible {
                depth,
                reason: format!("y = {} outside the image of the fiber", p.y.to_f64_lossy()),
            });
        }
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid == lo || mid == hi {
                break;
            }
            if push(n, mid) < p.y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y_deep = (lo + hi) * T::lit(0.5);
        if (push(n, y_deep) - p.y).abs() > ytol {
            return Err(Error::Inadmissible {
                depth: n,
                reason: "y-preimage residual too large".into(),
            });
        }
        let mut out = vec![Point::new(T::zero(), T::zero()); n];
        let mut y = y_deep;
        out[n - 1] = Point::new(xs[n - 1], y);
        for k in (0..n - 1).rev() {
            y = self.g_on(word[k + 1], xs[k + 1], y);
            out[k] = Point::new(xs[k], y);
        }
        Ok(out)
    }

    /// Runs a random point forward `warmup + depth` steps and returns the last
    /// point with its exact backward orbit of length `depth`.
    pub fn sample_backward_orbit<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        depth: usize,
        warmup: usize,
    ) -> BackwardOrbit<T> {
        let tol = self.zero_tol() * T::lit(1e3);
        'outer: loop {
            let mut q = Point::new(
                T::lit(rng.gen_range(-1.0..1.0)),
                T::lit(rng.gen_range(-1.0..1.0)),
            );
            let mut fwd = Vec::with_capacity(depth + 1);
            for i in 0..warmup + depth {
                if q.x.abs() < tol {
                    continue 'outer;
                }
                if i >= warmup {
                    fwd.push(q);
                }
                q = self.apply(q).expect("nonzero x");
            }
            let points: Vec<_> = fwd.into_iter().rev().collect();
            let word = points
                .iter()
                .map(|pt| Side::of(pt.x).expect("nonzero x"))
                .collect();
            return BackwardOrbit { p: q, word, points };
        }
    }

    pub fn postcritical(&self, depth: usize) -> PostCritical<T> {
        let orbit = |start: T| {
            let mut v = Vec::with_capacity(depth + 1);
            let mut x = start;
            for _ in 0..=depth {
                v.push(x);
                match self.f_eval(x) {
                    Ok(nx) => x = nx,
                    Err(_) => break,
                }
            }
            v
        };
        PostCritical {
            plus: orbit(self.f_side_limit(Side::L)),
            minus: orbit(self.f_side_limit(Side::R)),
        }
    }
}

/// Checks every standing hypothesis on a sample. Never fails; failures are in the report.
pub fn validate_params<T: Real>(params: &MapParams<T>) -> ValidationReport {
    let map = LorenzMap::new(params.clone());
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        })
    };
    let one = T::one();
    let half = T::lit(0.5);
    let tol = T::tol(1e-12);
    let p = params;

    let ranges_ok = p.rho > T::zero()
        && p.rho < one
        && p.v_l > -one
        && p.v_l < T::zero()
        && p.v_r > T::zero()
        && p.v_r < one
        && p.y_plus > T::zero()
        && p.y_plus < one
        && p.y_minus > -one
        && p.y_minus < T::zero()
        && p.m > T::zero()
        && p.alpha > T::zero();
    push(
        "parameter_ranges",
        ranges_ok,
        format!(
            "rho={} v_l={} v_r={} y+={} y-={}",
            p.rho, p.v_l, p.v_r, p.y_plus, p.y_minus
        ),
    );

    // branch ranges and monotonicity
    let n = 10_000usize;
    let grid = |side: Side| -> Vec<T> {
        (1..=n)
            .map(|i| {
                let t = T::from_usize_lossy(i) / T::from_usize_lossy(n);
                match side {
                    Side::R => t,
                    Side::L => -t,
                }
            })
            .collect()
    };
    let endpoints_ok = (map.f_on(Side::L, -one) - p.v_l).abs() <= T::tol(1e-12)
        && (map.f_on(Side::R, one) - p.v_r).abs() <= T::tol(1e-12)
        && map.f_side_limit(Side::L) == one
        && map.f_side_limit(Side::R) == -one;
    let mut mono = true;
    for side in [Side::L, Side::R] {
        let mut xs = grid(side);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let vals: Vec<T> = xs.iter().map(|&x| map.f_on(side, x)).collect();
        mono &= vals.windows(2).all(|w| w[1] > w[0]);
    }
    push(
        "branch_ranges",
        endpoints_ok && mono,
        format!(
            "f(-1)={} f(1)={} monotone={mono}",
            map.f_on(Side::L, -one),
            map.f_on(Side::R, one)
        ),
    );

    let sqrt2 = T::SQRT_2();
    let mut min_fp = T::infinity();
    for side in [Side::L, Side::R] {
        for x in grid(side) {
            min_fp = min_fp.min(map.fp_on(side, x));
        }
    }
    push(
        "expansion",
        min_fp >= sqrt2,
        format!("min f' = {min_fp} (need >= sqrt 2)"),
    );

    // non-flat singularity: f'(x)|x|^(1-rho) stays in a bounded window near 0
    let kmax = if T::epsilon() > T::lit(1e-10) { 6 } else { 12 };
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for side in [Side::L, Side::R] {
        for k in 1..=kmax {
            let x = T::lit(10f64.powi(-k));
            let x = if side == Side::L { -x } else { x };
            let v = map.fp_on(side, x) * x.abs().powf(one - p.rho);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let nonflat = lo > T::zero() && hi.is_finite() && hi / lo <= T::lit(4.0);
    push(
        "non_flat_singularity",
        nonflat,
        format!("f'(x)|x|^(1-rho) in [{lo}, {hi}] for |x| in [1e-{kmax}, 0.1]"),
    );

    let mut max_gy = T::zero();
    let mut max_gx = T::zero();
    let mut strictly_inside = true;
    let m2 = 101usize;
    for i in 0..m2 {
        for j in 0..m2 {
            let x = -one + T::lit(2.0) * T::from_usize_lossy(i) / T::from_usize_lossy(m2 - 1);
            let y = -one + T::lit(2.0) * T::from_usize_lossy(j) / T::from_usize_lossy(m2 - 1);
            if x == T::zero() {
                continue;
            }
            max_gy = max_gy.max(map.dg_dy(x).abs());
            max_gx = max_gx.max(map.dg_dx(x, y).abs());
            let q = map.apply(Point::new(x, y)).expect("x nonzero");
            strictly_inside &= q.x.abs() < one && q.y.abs() < one;
        }
    }
    let bound = p.contraction_bound.min(half);
    push(
        "fiber_contraction",
        max_gy <= bound + tol && p.contraction_bound <= half,
        format!(
            "max |dg/dy| = {max_gy}, declared bound {} (need <= 1/2)",
            p.contraction_bound
        ),
    );
    push(
        "fiber_shear",
        max_gx <= p.m + tol,
        format!("max |dg/dx| = {max_gx}, M = {}", p.m),
    );
    push(
        "alpha_m",
        p.alpha * p.m < half,
        format!("alpha*M = {} (need < 1/2)", p.alpha * p.m),
    );
    let ys = [-one, -half, T::zero(), half, one];
    let crit_ok = ys.iter().all(|&y| {
        (map.g_on(Side::L, T::zero(), y) - p.y_plus).abs() <= tol
            && (map.g_on(Side::R, T::zero(), y) - p.y_minus).abs() <= tol
    });
    push(
        "critical_values",
        crit_ok,
        format!("g(0-,y) = {}, g(0+,y) = {}", p.y_plus, p.y_minus),
    );
    push(
        "strict_invariance",
        strictly_inside,
        "F maps a 101x101 grid strictly inside the square".into(),
    );

    let depth = 10_000;
    let pc = map.postcritical(depth);
    let floor = T::tol(1e-8);
    let min_abs = pc
        .plus
        .iter()
        .chain(pc.minus.iter())
        .map(|x| x.abs())
        .fold(T::infinity(), T::min);
    let full = pc.plus.len() == depth + 1 && pc.minus.len() == depth + 1;
    push(
        "non_periodicity",
        full && min_abs > floor,
        format!("critical orbits to depth {depth}: min |x| = {min_abs:e}"),
    );

    ValidationReport { checks }
}
