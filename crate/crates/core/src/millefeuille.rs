//! The band between two consecutive points of a dense periodic orbit, its
//! first-return branches, the induced map and the symbolic metric.
//!
//! Because `P_l, P_r` are consecutive orbit points, every full pullback of the
//! band along a word is either inside the band or has interior disjoint from
//! it. Branches are therefore found by pulling the band back symbol by symbol
//! and stopping the first time the pullback lands inside the band.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaves::{
    interior_beaks, leaf_over, max_slope, EndKind, LeafGraph, DEFAULT_POSTCRITICAL_DEPTH,
    DEFAULT_SAMPLES,
};
use crate::lorenz_map::{BranchWord, LorenzMap, Point, Side};
use crate::report::{num, Table};
use crate::scalar::Real;
use crate::symbolic::{DenseOrbit, PeriodicOrbit};

pub const DEFAULT_N_MAX: usize = 18;
pub const ENDPOINT_TOL: f64 = 1e-9;
pub const MARKOV_SAMPLES: usize = 65;
pub const DEFAULT_TEST_LEAVES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band<T> {
    pub p_l: T,
    pub p_r: T,
    pub periodic_orbit: PeriodicOrbit<T>,
    pub delta_hat: T,
}

impl<T: Real> Band<T> {
    pub fn new(
        map: &LorenzMap<T>,
        orbit: PeriodicOrbit<T>,
        p_l: T,
        p_r: T,
        delta_hat: T,
    ) -> Result<Self> {
        if !(p_l < p_r) {
            return Err(Error::InvalidBand(format!(
                "P_l = {p_l} is not below P_r = {p_r}"
            )));
        }
        if !(p_l * p_r > T::zero()) {
            return Err(Error::InvalidBand("0 lies in [P_l, P_r]".into()));
        }
        let inside = orbit.points.iter().any(|&x| x > p_l && x < p_r);
        let has = |v: T| orbit.points.iter().any(|&x| x == v);
        if inside || !has(p_l) || !has(p_r) {
            return Err(Error::InvalidBand(
                "P_l, P_r are not consecutive orbit points".into(),
            ));
        }
        if !(map.f_on(Side::R, delta_hat) < -delta_hat)
            || !(map.f_on(Side::L, -delta_hat) > delta_hat)
        {
            return Err(Error::InvalidBand(format!(
                "f(delta_hat) < -delta_hat or f(-delta_hat) > delta_hat fails at {delta_hat}"
            )));
        }
        Ok(Band {
            p_l,
            p_r,
            periodic_orbit: orbit,
            delta_hat,
        })
    }

    pub fn from_dense(map: &LorenzMap<T>, d: &DenseOrbit<T>, delta_hat: T) -> Result<Self> {
        Band::new(map, d.orbit.clone(), d.p_l, d.p_r, delta_hat)
    }

    pub fn width(&self) -> T {
        self.p_r - self.p_l
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.p_l && x <= self.p_r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnBranch<T> {
    pub domain: (T, T),
    pub return_time: usize,
    pub word: BranchWord,
    /// `y`-extent of `F^n(V_i)` above the band midpoint.
    pub stripe_y_range: (T, T),
}

impl<T: Real> ReturnBranch<T> {
    /// Inverse of `f^n` on this branch, `[P_l, P_r] -> K_i`.
    pub fn inverse(&self, map: &LorenzMap<T>, y: T) -> T {
        let mut u = y;
        for k in (0..self.return_time).rev() {
            u = map.inverse_closed(self.word[k], u);
        }
        u
    }

    /// `f^n` along the branch word.
    pub fn forward(&self, map: &LorenzMap<T>, x: T) -> T {
        let mut u = x;
        for k in 0..self.return_time {
            u = map.f_on(self.word[k], u);
        }
        u
    }

    /// `F^n` along the branch word.
    pub fn forward_point(&self, map: &LorenzMap<T>, p: Point<T>) -> Point<T> {
        let mut q = p;
        for k in 0..self.return_time {
            q = map.apply_on(self.word[k], q);
        }
        q
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    pub fn width(&self) -> T {
        self.domain.1 - self.domain.0
    }

    /// Fixed point of the branch inverse, i.e. the `n_i`-periodic point in `K_i`.
    pub fn periodic_point(&self, map: &LorenzMap<T>) -> T {
        let mut x = (self.domain.0 + self.domain.1) * T::lit(0.5);
        for _ in 0..200 {
            let nx = self.inverse(map, x);
            let done = (nx - x).abs() <= T::epsilon() * T::lit(4.0);
            x = nx;
            if done {
                break;
            }
        }
        x
    }
}

enum Pull<T> {
    /// The pullback lies in the band: a first return.
    Hit((T, T)),
    /// Outside the band: keep pulling back.
    Outside((T, T)),
}

/// Pullback of `iv` through branch `s`, if the whole of `iv` is in the branch range.
fn pull<T: Real>(
    map: &LorenzMap<T>,
    band: &Band<T>,
    iv: (T, T),
    s: Side,
    depth: usize,
) -> Option<Pull<T>> {
    let (lo, hi) = map.branch_range(s);
    if iv.0 < lo || iv.1 > hi {
        return None;
    }
    let j = (map.inverse_closed(s, iv.0), map.inverse_closed(s, iv.1));
    let off_critical = match s {
        Side::L => j.1 < -map.zero_tol(),
        Side::R => j.0 > map.zero_tol(),
    };
    if !off_critical {
        return None;
    }
    let tol = T::tol(ENDPOINT_TOL);
    if j.0 >= band.p_l - tol && j.1 <= band.p_r + tol {
        Some(Pull::Hit(j))
    } else if j.1 > band.p_l + tol && j.0 < band.p_r - tol {
        log::warn!("pullback of length {depth} straddles a band border; skipped");
        None
    } else {
        Some(Pull::Outside(j))
    }
}

/// `suffix` holds the word back to front.
fn dfs<T: Real>(
    map: &LorenzMap<T>,
    band: &Band<T>,
    iv: (T, T),
    suffix: &mut Vec<Side>,
    n_max: usize,
    out: &mut Vec<(BranchWord, (T, T))>,
) {
    let depth = suffix.len() + 1;
    for s in [Side::L, Side::R] {
        match pull(map, band, iv, s, depth) {
            Some(Pull::Hit(j)) => {
                let mut w = Vec::with_capacity(depth);
                w.push(s);
                w.extend(suffix.iter().rev());
                out.push((BranchWord(w), j));
            }
            Some(Pull::Outside(j)) if depth < n_max => {
                suffix.push(s);
                dfs(map, band, j, suffix, n_max, out);
                suffix.pop();
            }
            _ => {}
        }
    }
}

/// First-return branches with return time `<= n_max`, sorted by return time
/// and then by domain.
pub fn enumerate_return_branches<T: Real>(
    map: &LorenzMap<T>,
    band: &Band<T>,
    n_max: usize,
) -> Vec<ReturnBranch<T>> {
    let full = (band.p_l, band.p_r);
    let found: Vec<Vec<(BranchWord, (T, T))>> = [Side::L, Side::R]
        .par_iter()
        .map(|&s| {
            let mut out = Vec::new();
            match pull(map, band, full, s, 1) {
                Some(Pull::Hit(j)) => out.push((BranchWord(vec![s]), j)),
                Some(Pull::Outside(j)) if n_max > 1 => {
                    dfs(map, band, j, &mut vec![s], n_max, &mut out)
                }
                _ => {}
            }
            out
        })
        .collect();
    let mut branches: Vec<ReturnBranch<T>> = found
        .into_iter()
        .flatten()
        .map(|(word, domain)| {
            let mut b = ReturnBranch {
                domain,
                return_time: word.len(),
                word,
                stripe_y_range: (T::zero(), T::zero()),
            };
            let xm = b.inverse(map, (band.p_l + band.p_r) * T::lit(0.5));
            let lo = b.forward_point(map, Point::new(xm, -T::one())).y;
            let hi = b.forward_point(map, Point::new(xm, T::one())).y;
            b.stripe_y_range = (lo.min(hi), lo.max(hi));
            b
        })
        .collect();
    branches.sort_by(|a, b| {
        a.return_time
            .cmp(&b.return_time)
            .then(a.domain.0.partial_cmp(&b.domain.0).expect("finite"))
    });
    branches
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilleFeuilles<T> {
    pub band: Band<T>,
    pub reference_leaf: LeafGraph<T>,
    pub branches: Vec<ReturnBranch<T>>,
    pub n_max: usize,
    /// Periodic point of `F` through which the reference leaf is built.
    pub seed: Point<T>,
    pub seed_branch: usize,
}

/// `y` of the `F`-periodic point above a periodic `x` with the given itinerary.
fn periodic_y<T: Real>(map: &LorenzMap<T>, x: T, word: &BranchWord) -> T {
    let mut y = T::zero();
    for _ in 0..400 {
        let mut q = Point::new(x, y);
        for k in 0..word.len() {
            q = map.apply_on(word[k], q);
        }
        let done = (q.y - y).abs() <= T::epsilon();
        y = q.y;
        if done {
            break;
        }
    }
    y
}

pub fn build_millefeuille<T: Real>(
    map: &LorenzMap<T>,
    band: Band<T>,
    n_max: usize,
    leaf_depth: usize,
) -> Result<MilleFeuilles<T>> {
    let branches = enumerate_return_branches(map, &band, n_max);
    if branches.is_empty() {
        return Err(Error::NoBranches(n_max));
    }
    // branches are sorted by return time, so index 0 is the shortest
    let seed_branch = 0;
    let sb = &branches[seed_branch];
    let x = sb.periodic_point(map);
    if !(x > band.p_l && x < band.p_r) {
        return Err(Error::ShrinkDeltaHat(format!(
            "seed periodic point {x} is not inside the band"
        )));
    }
    let seed = Point::new(x, periodic_y(map, x, &sb.word));
    let back = sb.word.reversed().cycle_to(leaf_depth.max(sb.return_time));
    let mut leaf = leaf_over(
        map,
        seed,
        &back,
        back.len(),
        (band.p_l, band.p_r),
        DEFAULT_SAMPLES,
    )
    .map_err(|e| Error::ShrinkDeltaHat(format!("no spanning leaf through the seed: {e}")))?;
    if !interior_beaks(map, &leaf, DEFAULT_POSTCRITICAL_DEPTH).is_empty() {
        return Err(Error::ShrinkDeltaHat(
            "reference leaf has an interior beak".into(),
        ));
    }
    let border = |k: EndKind| {
        if k == EndKind::Beak {
            EndKind::Beak
        } else {
            EndKind::BandBorder
        }
    };
    leaf.left_end_kind = border(leaf.left_end_kind);
    leaf.right_end_kind = border(leaf.right_end_kind);
    if leaf.left_end_kind == EndKind::Beak || leaf.right_end_kind == EndKind::Beak {
        return Err(Error::ShrinkDeltaHat(
            "band border lies on a post-critical value".into(),
        ));
    }
    Ok(MilleFeuilles {
        band,
        reference_leaf: leaf,
        branches,
        n_max,
        seed,
        seed_branch,
    })
}

impl<T: Real> MilleFeuilles<T> {
    /// Lowest-indexed branch whose closed domain contains `x`.
    pub fn branch_of(&self, x: T) -> Option<usize> {
        self.branches.iter().position(|b| b.contains(x))
    }

    pub fn coverage(&self) -> T {
        self.branches.iter().map(|b| b.width()).sum::<T>() / self.band.width()
    }

    /// Point of the reference leaf above `x`.
    pub fn project(&self, x: T) -> Point<T> {
        Point::new(x, self.reference_leaf.eval(x))
    }

    /// Leaf `i` of the test family: the reference leaf (`None`) or its image
    /// through branch `j`, evaluated at `x`.
    pub fn test_leaf_eval(&self, map: &LorenzMap<T>, via: Option<usize>, x: T) -> T {
        match via {
            None => self.reference_leaf.eval(x),
            Some(j) => {
                let b = &self.branches[j];
                let xi = b.inverse(map, x);
                b.forward_point(map, self.project(xi)).y
            }
        }
    }

    pub fn branch_table(&self, markov_ok: &[bool]) -> Table {
        let mut t = Table::new(&["index", "word", "n_i", "K_left", "K_right", "markov_ok"])
            .meta("P_l", num(self.band.p_l))
            .meta("P_r", num(self.band.p_r))
            .meta("delta_hat", num(self.band.delta_hat))
            .meta("N_max", self.n_max)
            .meta("endpoint_tol", num(T::lit(ENDPOINT_TOL)));
        for (i, b) in self.branches.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                b.word.to_string(),
                b.return_time.to_string(),
                num(b.domain.0),
                num(b.domain.1),
                markov_ok
                    .get(i)
                    .map_or("", |&ok| if ok { "true" } else { "false" })
                    .to_string(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> String {
        let mut counts = std::collections::BTreeMap::new();
        for b in &self.branches {
            *counts.entry(b.return_time).or_insert(0usize) += 1;
        }
        let mut s = String::new();
        s.push_str("[band]\n");
        s.push_str(&format!(
            "P_l = {}\nP_r = {}\ndelta_hat = {}\n",
            num(self.band.p_l),
            num(self.band.p_r),
            num(self.band.delta_hat)
        ));
        s.push_str(&format!(
            "orbit_word = {}\norbit_gap = {}\n",
            self.band.periodic_orbit.word,
            num(self.band.periodic_orbit.gap_bound)
        ));
        s.push_str("[millefeuille]\n");
        s.push_str(&format!(
            "N_max = {}\nbranch_count = {}\ncoverage = {}\n",
            self.n_max,
            self.branches.len(),
            num(self.coverage())
        ));
        s.push_str(&format!(
            "seed_x = {}\nseed_y = {}\nseed_period = {}\n",
            num(self.seed.x),
            num(self.seed.y),
            self.branches[self.seed_branch].return_time
        ));
        s.push_str("[branch_counts]\n");
        for (n, c) in counts {
            s.push_str(&format!("n{n} = {c}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport<T> {
    pub leaves_checked: usize,
    pub endpoint_error: T,
    pub monotone: bool,
    pub word_respected: bool,
    pub max_slope: T,
    pub lipschitz_ok: bool,
}

impl<T: Real> MarkovReport<T> {
    pub fn passed(&self) -> bool {
        self.endpoint_error <= T::tol(ENDPOINT_TOL)
            && self.monotone
            && self.word_respected
            && self.lipschitz_ok
    }
}

/// Pushes `test_leaves` leaves restricted over `K_i` forward `n_i` steps and
/// checks that each image is a `1/alpha`-Lipschitz graph over `[P_l, P_r]`
/// whose intermediate images never touch the critical line.
pub fn markov_check<T: Real>(
    map: &LorenzMap<T>,
    mf: &MilleFeuilles<T>,
    branch: &ReturnBranch<T>,
    test_leaves: usize,
) -> MarkovReport<T> {
    let mut vias: Vec<Option<usize>> = vec![None];
    vias.extend((0..mf.branches.len()).map(Some));
    vias.truncate(test_leaves.max(1));
    let k = MARKOV_SAMPLES;
    let tol0 = map.zero_tol();
    let mut rep = MarkovReport {
        leaves_checked: vias.len(),
        endpoint_error: T::zero(),
        monotone: true,
        word_respected: true,
        max_slope: T::zero(),
        lipschitz_ok: true,
    };
    let (a, b) = branch.domain;
    for via in vias {
        let mut img = Vec::with_capacity(k);
        for i in 0..k {
            let x = if i + 1 == k {
                b
            } else {
                a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(k - 1)
            };
            let mut q = Point::new(x, mf.test_leaf_eval(map, via, x));
            for step in 0..branch.return_time {
                let s = branch.word[step];
                let ok = match s {
                    Side::L => q.x < -tol0 || (q.x < T::zero() && (i == 0 || i + 1 == k)),
                    Side::R => q.x > tol0 || (q.x > T::zero() && (i == 0 || i + 1 == k)),
                };
                if !ok {
                    rep.word_respected = false;
                }
                q = map.apply_on(s, q);
            }
            img.push(q);
        }
        rep.endpoint_error = rep
            .endpoint_error
            .max((img[0].x - mf.band.p_l).abs())
            .max((img[k - 1].x - mf.band.p_r).abs());
        if img.windows(2).any(|w| !(w[1].x > w[0].x)) {
            rep.monotone = false;
        }
        rep.max_slope = rep.max_slope.max(max_slope(&img));
    }
    rep.lipschitz_ok = rep.max_slope <= T::one() / map.alpha() + T::tol(1e-9);
    rep
}

/// `(f^{n_i}(x), n_i)` for the branch containing `x`.
pub fn induced_phi<T: Real>(map: &LorenzMap<T>, mf: &MilleFeuilles<T>, x: T) -> Result<(T, usize)> {
    let i = mf.branch_of(x).ok_or(Error::OutsideInducedDomain {
        x: x.to_f64_lossy(),
    })?;
    let b = &mf.branches[i];
    Ok((b.forward(map, x), b.return_time))
}

/// `2^{-m}` where `m` is the largest `n` with `|f^k x - f^k x'| <= delta_hat`
/// for all `k <= n`; `1` when already `|x - x'| > delta_hat`.
pub fn symbolic_metric<T: Real>(map: &LorenzMap<T>, x: T, x2: T, delta_hat: T) -> T {
    if x == x2 {
        return T::zero();
    }
    let (mut u, mut v) = (x, x2);
    if (u - v).abs() > delta_hat {
        return T::one();
    }
    let mut m = 0i32;
    for _ in 0..4000 {
        let (su, sv) = match (Side::of(u), Side::of(v)) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        u = map.f_on(su, u);
        v = map.f_on(sv, v);
        if (u - v).abs() > delta_hat || u == v {
            break;
        }
        m += 1;
    }
    T::lit(2.0).powi(-m)
}

/// Empirical `C^gamma` norm on a sample: sup norm plus the largest Hölder
/// quotient over sampled pairs. A lower bound for the true norm.
pub fn holder_norm<T: Real>(samples: &[(T, T)], gamma: T, metric: impl Fn(T, T) -> T) -> T {
    let sup = samples.iter().map(|s| s.1.abs()).fold(T::zero(), T::max);
    let mut q = T::zero();
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let d = metric(a.0, b.0);
            if d > T::zero() {
                q = q.max((a.1 - b.1).abs() / d.powf(gamma));
            }
        }
    }
    sup + q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::delta_dense_periodic_orbit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn map() -> LorenzMap<f64> {
        LorenzMap::default()
    }

    fn mf() -> &'static MilleFeuilles<f64> {
        static MF: OnceLock<MilleFeuilles<f64>> = OnceLock::new();
        MF.get_or_init(|| {
            let m = map();
            let d = delta_dense_periodic_orbit(&m, 0.2, 16).unwrap();
            let band = Band::from_dense(&m, &d, 0.2).unwrap();
            build_millefeuille(&m, band, 14, 60).unwrap()
        })
    }

    #[test]
    fn band_validation() {
        let m = map();
        let d = delta_dense_periodic_orbit(&m, 0.2, 16).unwrap();
        assert!(Band::from_dense(&m, &d, 0.2).is_ok());
        assert!(Band::new(&m, d.orbit.clone(), d.p_r, d.p_l, 0.2).is_err());
        // delta_hat too large for the expansion condition
        assert!(Band::from_dense(&m, &d, 0.9).is_err());
    }

    #[test]
    fn branches_are_disjoint_full_and_first_return() {
        let m = map();
        let mf = mf();
        assert!(!mf.branches.is_empty());
        let mut doms: Vec<_> = mf.branches.iter().map(|b| b.domain).collect();
        doms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in doms.windows(2) {
            assert!(w[0].1 <= w[1].0 + 1e-12);
        }
        let total: f64 = mf.branches.iter().map(|b| b.width()).sum();
        assert!(total <= mf.band.width() + 1e-12);
        for b in &mf.branches {
            assert!((b.forward(&m, b.domain.0) - mf.band.p_l).abs() <= 1e-9);
            assert!((b.forward(&m, b.domain.1) - mf.band.p_r).abs() <= 1e-9);
            // no intermediate image meets the open band
            let mut iv = b.domain;
            for k in 0..b.return_time - 1 {
                iv = (m.f_on(b.word[k], iv.0), m.f_on(b.word[k], iv.1));
                assert!(
                    iv.1 <= mf.band.p_l + 1e-9 || iv.0 >= mf.band.p_r - 1e-9,
                    "{} at {k}",
                    b.word
                );
            }
        }
        // the seed's return time shows up among branch times
        let sp = mf.branches[mf.seed_branch].return_time;
        assert!(mf.branches.iter().any(|b| b.return_time == sp));
    }

    #[test]
    fn reference_leaf_spans_band() {
        let mf = mf();
        let l = &mf.reference_leaf;
        assert!(l.domain.0 <= mf.band.p_l && l.domain.1 >= mf.band.p_r);
        assert_eq!(l.left_end_kind, EndKind::BandBorder);
        assert_eq!(l.right_end_kind, EndKind::BandBorder);
        assert!((l.eval(mf.seed.x) - mf.seed.y).abs() < 1e-9);
        assert!(l.lipschitz_bound <= 1.0 / 0.9);
    }

    #[test]
    fn markov_and_negative_control() {
        let m = map();
        let mf = mf();
        for b in &mf.branches {
            let r = markov_check(&m, mf, b, 3);
            assert!(r.passed(), "{} {:?}", b.word, r);
        }
        // seed branch pushes the reference leaf back onto itself
        let sb = &mf.branches[mf.seed_branch];
        for i in 0..=8 {
            let y = mf.band.p_l + mf.band.width() * i as f64 / 8.0;
            let pushed = mf.test_leaf_eval(&m, Some(mf.seed_branch), y);
            assert!((pushed - mf.reference_leaf.eval(y)).abs() < 1e-6);
        }
        // hull of two adjacent domains with the left word: an intermediate cut
        let mut doms: Vec<_> = mf.branches.iter().collect();
        doms.sort_by(|a, b| a.domain.0.partial_cmp(&b.domain.0).unwrap());
        let (a, c) = (doms[0], doms[1]);
        let bad = ReturnBranch {
            domain: (a.domain.0, c.domain.1),
            ..a.clone()
        };
        assert!(!markov_check(&m, mf, &bad, 3).passed());
        let _ = sb;
    }

    #[test]
    fn induced_map_round_trip() {
        let m = map();
        let mf = mf();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let i = rng.gen_range(0..mf.branches.len());
            let b = &mf.branches[i];
            let y = rng.gen_range(mf.band.p_l..=mf.band.p_r);
            let xi = b.inverse(&m, y);
            // skip shared borders, which belong to the lower index
            if mf.branch_of(xi) != Some(i) {
                continue;
            }
            let (img, n) = induced_phi(&m, mf, xi).unwrap();
            assert!((img - y).abs() <= 1e-9);
            assert_eq!(n, b.return_time);
        }
        let (x, n) = induced_phi(&m, mf, mf.seed.x).unwrap();
        assert!((x - mf.seed.x).abs() < 1e-10);
        assert_eq!(n, mf.branches[mf.seed_branch].return_time);
        assert!(induced_phi(&m, mf, 0.99).is_err());
    }

    #[test]
    fn metric_properties() {
        let m = map();
        let mf = mf();
        let dh = mf.band.delta_hat;
        assert_eq!(symbolic_metric(&m, 0.3, 0.3, dh), 0.0);
        assert_eq!(symbolic_metric(&m, -0.5, 0.3, dh), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = 2f64.powf(dh.log2() + 0.5);
        for _ in 0..200 {
            let b = &mf.branches[rng.gen_range(0..mf.branches.len())];
            let (y1, y2) = (
                rng.gen_range(mf.band.p_l..=mf.band.p_r),
                rng.gen_range(mf.band.p_l..=mf.band.p_r),
            );
            let (x1, x2) = (b.inverse(&m, y1), b.inverse(&m, y2));
            if x1 == x2 {
                continue;
            }
            let dx = symbolic_metric(&m, x1, x2, dh);
            let dy = symbolic_metric(&m, y1, y2, dh);
            assert!(dx > 0.0);
            assert!(dx <= dy / 2.0, "{dx} {dy}");
            assert!((x1 - x2).abs() <= c * dx.sqrt());
        }
    }

    #[test]
    fn holder_norm_examples() {
        let m = map();
        let band = &mf().band;
        let dh = band.delta_hat;
        let xs: Vec<f64> = (0..40)
            .map(|i| band.p_l + band.width() * i as f64 / 39.0)
            .collect();
        let metric = |a: f64, b: f64| symbolic_metric(&m, a, b, dh);
        let constant: Vec<_> = xs.iter().map(|&x| (x, 2.5)).collect();
        assert_eq!(holder_norm(&constant, 0.5, metric), 2.5);
        let x0 = xs[7];
        let g = 0.5;
        let f: Vec<_> = xs.iter().map(|&x| (x, metric(x, x0).powf(g))).collect();
        let sup = f.iter().map(|s| s.1).fold(0.0, f64::max);
        // d is not a metric: a sampled triple has d(x,x0) = 1/2, d(x',x0) = 1/4,
        // d(x,x') = 1/64, so the quotient reaches (2^-0.5 - 2^-1) * 2^3
        let q = holder_norm(&f, g, metric) - sup;
        assert!((q - 4.0 * (2f64.sqrt() - 1.0)).abs() < 1e-12, "{q}");
        let lin: Vec<_> = xs.iter().map(|&x| (x, x)).collect();
        assert!(holder_norm(&lin, 0.3, metric) <= holder_norm(&lin, 0.6, metric));
    }

    #[test]
    fn branch_table_export() {
        let mf = mf();
        let t = mf.branch_table(&vec![true; mf.branches.len()]);
        assert_eq!(t.rows.len(), mf.branches.len());
        assert_eq!(
            t.columns,
            ["index", "word", "n_i", "K_left", "K_right", "markov_ok"]
        );
        assert!(mf.summary().contains("branch_count"));
    }
}
