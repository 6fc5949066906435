//! Potentials `A0(x, y) = c + a |x|^h + b y`, the coboundary series and the
//! induced potential, evaluated directly from their series definitions.

use serde::{Deserialize, Serialize};

use crate::lorenz_map::{LorenzMap, Point, Side};
use crate::millefeuille::{MilleFeuilles, ReturnBranch};
use crate::scalar::Real;

/// Cap on series length; far beyond what any tolerance needs at contraction 1/2.
const MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential<T> {
    pub c: T,
    pub a: T,
    pub h: T,
    pub b: T,
}

impl<T: Real> Potential<T> {
    pub fn zero() -> Self {
        Potential {
            c: T::zero(),
            a: T::zero(),
            h: T::one(),
            b: T::zero(),
        }
    }

    pub fn constant(c: T) -> Self {
        Potential { c, ..Self::zero() }
    }

    /// `c + a |x|^h + b y`, `h` in `(0, 1]`.
    pub fn holder_family(c: T, a: T, h: T, b: T) -> Self {
        Potential { c, a, h, b }
    }

    pub fn shifted(&self, dc: T) -> Self {
        Potential {
            c: self.c + dc,
            ..*self
        }
    }

    #[inline]
    pub fn eval(&self, p: Point<T>) -> T {
        self.c + self.a * p.x.abs().powf(self.h) + self.b * p.y
    }

    pub fn holder_exponent(&self) -> T {
        if self.a == T::zero() {
            T::one()
        } else {
            self.h
        }
    }

    /// Constant for Euclidean distance on the square, where `|y - y'| <= 2`.
    pub fn holder_constant(&self) -> T {
        let h = self.holder_exponent();
        self.a.abs() + self.b.abs() * T::lit(2.0).powf(T::one() - h)
    }

    pub fn sup_norm(&self) -> T {
        self.c.abs() + self.a.abs() + self.b.abs()
    }

    pub fn is_constant(&self) -> bool {
        self.a == T::zero() && self.b == T::zero()
    }
}

#[inline]
fn side_of<T: Real>(x: T) -> Side {
    Side::of(x).unwrap_or(Side::R)
}

/// `omega(p) = sum_k A0(F^k p) - A0(F^k pi(p))`, `pi` the projection onto the
/// reference leaf along the vertical. Stops once the geometric bound on the
/// remaining terms is below `tol`.
pub fn omega<T: Real>(
    map: &LorenzMap<T>,
    mf: &MilleFeuilles<T>,
    pot: &Potential<T>,
    p: Point<T>,
    tol: T,
) -> T {
    omega_terms(map, mf, pot, p, tol, MAX_TERMS)
}

/// Same series cut at exactly `depth` terms.
pub fn omega_depth<T: Real>(
    map: &LorenzMap<T>,
    mf: &MilleFeuilles<T>,
    pot: &Potential<T>,
    p: Point<T>,
    depth: usize,
) -> T {
    omega_terms(map, mf, pot, p, T::zero(), depth)
}

fn omega_terms<T: Real>(
    map: &LorenzMap<T>,
    mf: &MilleFeuilles<T>,
    pot: &Potential<T>,
    p: Point<T>,
    tol: T,
    max_terms: usize,
) -> T {
    if pot.is_constant() {
        return T::zero();
    }
    let mut u = p;
    let mut v = mf.project(p.x);
    let gain = map.params().contraction_bound.abs();
    let theta = pot.holder_exponent();
    let hol = pot.holder_constant();
    let ratio = T::one() / (T::one() - gain.powf(theta));
    let mut sum = T::zero();
    for _ in 0..max_terms {
        let dy = (u.y - v.y).abs();
        if dy == T::zero() || (tol > T::zero() && hol * dy.powf(theta) * ratio <= tol) {
            break;
        }
        sum = sum + (pot.eval(u) - pot.eval(v));
        let s = side_of(u.x);
        u = map.apply_on(s, u);
        v = map.apply_on(s, v);
    }
    sum
}

/// `S_n A0` along the branch word from `p`.
pub fn birkhoff_sum<T: Real>(
    map: &LorenzMap<T>,
    branch: &ReturnBranch<T>,
    pot: &Potential<T>,
    p: Point<T>,
) -> (T, Point<T>) {
    let mut q = p;
    let mut s = T::zero();
    for k in 0..branch.return_time {
        s = s + pot.eval(q);
        q = map.apply_on(branch.word[k], q);
    }
    (s, q)
}

/// `A(x) = S_n A0(q) + omega(Phi(q))` with `q` the reference-leaf point above `x`,
/// so that `S_n A0(p) = A(x) - omega(Phi(p)) + omega(p)` for every `p` above `x`.
pub fn induced_potential<T: Real>(
    map: &LorenzMap<T>,
    mf: &MilleFeuilles<T>,
    branch: &ReturnBranch<T>,
    pot: &Potential<T>,
    x: T,
    tol: T,
) -> T {
    let (s, img) = birkhoff_sum(map, branch, pot, mf.project(x));
    s + omega(map, mf, pot, img, tol)
}

/// `D(x) = sum_k prod_{i<k} gain |f^i x|`; for potentials linear in `y`,
/// `omega(x, y) = b (y - y_ref(x)) D(x)`.
pub fn fiber_series<T: Real>(map: &LorenzMap<T>, x: T, tol: T) -> T {
    let gain = map.params().contraction_bound.abs();
    let mut u = x;
    let mut prod = T::one();
    let mut sum = T::zero();
    for _ in 0..MAX_TERMS {
        sum = sum + prod;
        prod = prod * gain * u.abs();
        if prod <= tol * (T::one() - gain) {
            sum = sum + prod;
            break;
        }
        u = map.f_on(side_of(u), u);
    }
    sum
}
