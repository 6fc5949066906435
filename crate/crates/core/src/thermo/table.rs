//! Branch inverses and induced-potential values on a uniform grid of the band.
//!
//! For `A0 = c + a|x|^h + b y` the fiber maps are affine in `y`, so the
//! Birkhoff sum along a word and the `y` it ends at are affine in the starting
//! `y`. Both are carried down the same suffix search that enumerates the
//! branches, one inverse step per search node and grid node.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::potential::{fiber_series, induced_potential, Potential};
use crate::error::{Error, Result};
use crate::lorenz_map::{LorenzMap, Side};
use crate::millefeuille::{MilleFeuilles, ENDPOINT_TOL};
use crate::scalar::Real;

pub const DEFAULT_GRID: usize = 2048;
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
/// Fixed number of scatter chunks for the adjoint apply (independent of threads).
const SCATTER_CHUNKS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedTable<T> {
    pub p_l: T,
    pub p_r: T,
    pub grid: Vec<T>,
    pub times: Vec<usize>,
    pub domains: Vec<(T, T)>,
    /// `A(xi_i(x_j))`, branch-major.
    pub a: Vec<T>,
    /// Left grid cell of `xi_i(x_j)`, branch-major.
    pub cell: Vec<u32>,
    /// Position of `xi_i(x_j)` inside its cell, in `[0, 1]`.
    pub frac: Vec<T>,
    /// `A` at the `n_i`-periodic point of each branch.
    pub a_periodic: Vec<T>,
    pub n_max: usize,
    pub truncation_tol: T,
    /// Hölder data of `A`, filled by `holder_constants_estimate`.
    pub c_a: T,
    pub gamma: T,
}

struct Node<T> {
    u: Vec<T>,
    sx: Vec<T>,
    p: Vec<T>,
    q: Vec<T>,
    r: Vec<T>,
    w: Vec<T>,
}

struct Ctx<'a, T> {
    map: &'a LorenzMap<T>,
    mf: &'a MilleFeuilles<T>,
    pot: &'a Potential<T>,
    d: &'a [T],
    yref_grid: &'a [T],
    n_max: usize,
}

impl<T: Real> Ctx<'_, T> {
    fn step(&self, node: &Node<T>, s: Side) -> Node<T> {
        let m = self.map;
        let gain = m.params().contraction_bound;
        let sy = match s {
            Side::L => m.params().y_plus,
            Side::R => m.params().y_minus,
        };
        let g = node.u.len();
        let mut out = Node {
            u: Vec::with_capacity(g),
            sx: Vec::with_capacity(g),
            p: Vec::with_capacity(g),
            q: Vec::with_capacity(g),
            r: Vec::with_capacity(g),
            w: Vec::with_capacity(g),
        };
        let use_x = self.pot.a != T::zero();
        for j in 0..g {
            let x0 = m.inverse_closed(s, node.u[j]);
            let mult = gain * x0.abs();
            out.u.push(x0);
            out.sx.push(
                node.sx[j]
                    + if use_x {
                        x0.abs().powf(self.pot.h)
                    } else {
                        T::zero()
                    },
            );
            out.p.push(node.p[j] + node.q[j] * sy);
            out.q.push(T::one() + node.q[j] * mult);
            out.r.push(node.r[j] + node.w[j] * sy);
            out.w.push(node.w[j] * mult);
        }
        out
    }

    /// `A` on the grid for a finished word of length `n`.
    fn finish(&self, node: &Node<T>, n: usize) -> Vec<T> {
        let pot = self.pot;
        let leaf = &self.mf.reference_leaf;
        (0..node.u.len())
            .map(|j| {
                let y0 = leaf.eval(node.u[j]);
                let s = pot.c * T::from_usize_lossy(n)
                    + pot.a * node.sx[j]
                    + pot.b * (node.p[j] + node.q[j] * y0);
                let yn = node.r[j] + node.w[j] * y0;
                s + pot.b * (yn - self.yref_grid[j]) * self.d[j]
            })
            .collect()
    }

    /// Child of `node` through `s` at word length `depth`, flagged when it is
    /// a first return; `None` when the pullback is not full, straddles a
    /// border, or would exceed `n_max` without returning.
    fn try_step(&self, node: &Node<T>, s: Side, depth: usize) -> Option<(bool, Node<T>)> {
        let band = &self.mf.band;
        let tol = T::tol(ENDPOINT_TOL);
        let last = node.u.len() - 1;
        let (lo, hi) = self.map.branch_range(s);
        if node.u[0] < lo || node.u[last] > hi {
            return None;
        }
        let (j0, j1) = (
            self.map.inverse_closed(s, node.u[0]),
            self.map.inverse_closed(s, node.u[last]),
        );
        let off = match s {
            Side::L => j1 < -self.map.zero_tol(),
            Side::R => j0 > self.map.zero_tol(),
        };
        let hit = j0 >= band.p_l - tol && j1 <= band.p_r + tol;
        let straddle = !hit && j1 > band.p_l + tol && j0 < band.p_r - tol;
        if !off || straddle || (!hit && depth >= self.n_max) {
            return None;
        }
        Some((hit, self.step(node, s)))
    }

    fn visit(
        &self,
        node: &Node<T>,
        s: Side,
        suffix: &mut Vec<Side>,
        out: &mut Vec<(String, Vec<T>, Vec<T>)>,
    ) {
        let depth = suffix.len() + 1;
        let Some((hit, child)) = self.try_step(node, s, depth) else {
            return;
        };
        suffix.push(s);
        if hit {
            let word: String = suffix.iter().rev().map(|s| s.symbol()).collect();
            let a = self.finish(&child, depth);
            out.push((word, child.u, a));
        } else {
            for s2 in [Side::L, Side::R] {
                self.visit(&child, s2, suffix, out);
            }
        }
        suffix.pop();
    }
}

impl<T: Real> InducedTable<T> {
    pub fn build(
        map: &LorenzMap<T>,
        mf: &MilleFeuilles<T>,
        pot: &Potential<T>,
        grid_size: usize,
        tol: T,
    ) -> Result<Self> {
        let g = grid_size.max(2);
        let band = &mf.band;
        let grid = uniform_grid(band.p_l, band.p_r, g);
        let d: Vec<T> = grid
            .par_iter()
            .map(|&x| fiber_series(map, x, tol))
            .collect();
        let yref_grid: Vec<T> = grid.iter().map(|&x| mf.reference_leaf.eval(x)).collect();
        let ctx = Ctx {
            map,
            mf,
            pot,
            d: &d,
            yref_grid: &yref_grid,
            n_max: mf.n_max,
        };
        let root = Node {
            u: grid.clone(),
            sx: vec![T::zero(); g],
            p: vec![T::zero(); g],
            q: vec![T::zero(); g],
            r: vec![T::zero(); g],
            w: vec![T::one(); g],
        };
        let parts: Vec<Vec<_>> = [Side::L, Side::R]
            .par_iter()
            .map(|&s| {
                let mut out = Vec::new();
                ctx.visit(&root, s, &mut Vec::new(), &mut out);
                out
            })
            .collect();
        let mut by_word: HashMap<String, (Vec<T>, Vec<T>)> = HashMap::new();
        for (w, u, a) in parts.into_iter().flatten() {
            by_word.insert(w, (u, a));
        }
        let nb = mf.branches.len();
        let mut table = InducedTable {
            p_l: band.p_l,
            p_r: band.p_r,
            grid,
            times: mf.branches.iter().map(|b| b.return_time).collect(),
            domains: mf.branches.iter().map(|b| b.domain).collect(),
            a: Vec::with_capacity(nb * g),
            cell: Vec::with_capacity(nb * g),
            frac: Vec::with_capacity(nb * g),
            a_periodic: Vec::with_capacity(nb),
            n_max: mf.n_max,
            truncation_tol: tol,
            c_a: T::zero(),
            gamma: T::one(),
        };
        for b in &mf.branches {
            let (u, a) = by_word.remove(&b.word.to_string()).ok_or_else(|| {
                Error::Config(format!("branch {} missing from the grid search", b.word))
            })?;
            table.push_positions(&u);
            table.a.extend(a);
        }
        table.a_periodic = mf
            .branches
            .par_iter()
            .map(|b| induced_potential(map, mf, b, pot, b.periodic_point(map), tol))
            .collect();
        Ok(table)
    }

    /// Table with prescribed return times and branch-constant `A`; each branch
    /// inverse is the affine map of the band onto its domain.
    pub fn synthetic(p_l: T, p_r: T, grid_size: usize, branches: &[(usize, T, (T, T))]) -> Self {
        let g = grid_size.max(2);
        let grid = uniform_grid(p_l, p_r, g);
        let mut table = InducedTable {
            p_l,
            p_r,
            grid: grid.clone(),
            times: branches.iter().map(|b| b.0).collect(),
            domains: branches.iter().map(|b| b.2).collect(),
            a: Vec::with_capacity(branches.len() * g),
            cell: Vec::new(),
            frac: Vec::new(),
            a_periodic: branches.iter().map(|b| b.1).collect(),
            n_max: branches.iter().map(|b| b.0).max().unwrap_or(0),
            truncation_tol: T::zero(),
            c_a: T::zero(),
            gamma: T::one(),
        };
        for &(_, a, (k0, k1)) in branches {
            let u: Vec<T> = grid
                .iter()
                .map(|&x| k0 + (k1 - k0) * (x - p_l) / (p_r - p_l))
                .collect();
            table.push_positions(&u);
            table.a.extend(std::iter::repeat(a).take(g));
        }
        table
    }

    fn push_positions(&mut self, u: &[T]) {
        let g = self.grid.len();
        let hstep = (self.p_r - self.p_l) / T::from_usize_lossy(g - 1);
        for &x in u {
            let pos = ((x - self.p_l) / hstep)
                .max(T::zero())
                .min(T::from_usize_lossy(g - 1));
            let c = pos.floor().to_usize().unwrap_or(0).min(g - 2);
            self.cell.push(c as u32);
            self.frac
                .push((pos - T::from_usize_lossy(c)).max(T::zero()).min(T::one()));
        }
    }

    pub fn branch_count(&self) -> usize {
        self.times.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn a_at(&self, i: usize, j: usize) -> T {
        self.a[i * self.grid.len() + j]
    }

    /// `e^{A_ij - n_i Z}` for every entry.
    pub fn weights(&self, z: T) -> Vec<T> {
        let g = self.grid.len();
        let mut w = Vec::with_capacity(self.a.len());
        for (i, &n) in self.times.iter().enumerate() {
            let nz = T::from_usize_lossy(n) * z;
            w.extend(self.a[i * g..(i + 1) * g].iter().map(|&a| (a - nz).exp()));
        }
        w
    }

    /// `(L psi)(x_j) = sum_i w_ij psi(xi_ij)`, `psi` linearly interpolated.
    pub fn apply(&self, w: &[T], psi: &[T]) -> Vec<T> {
        let g = self.grid.len();
        let nb = self.times.len();
        (0..g)
            .into_par_iter()
            .map(|j| {
                let mut s = T::zero();
                for i in 0..nb {
                    let k = i * g + j;
                    let c = self.cell[k] as usize;
                    let t = self.frac[k];
                    s = s + w[k] * (psi[c] + t * (psi[c + 1] - psi[c]));
                }
                s
            })
            .collect()
    }

    /// Branch `i` part of `L psi`.
    pub fn apply_branch(&self, w: &[T], psi: &[T], i: usize) -> Vec<T> {
        let g = self.grid.len();
        (0..g)
            .map(|j| {
                let k = i * g + j;
                let c = self.cell[k] as usize;
                let t = self.frac[k];
                w[k] * (psi[c] + t * (psi[c + 1] - psi[c]))
            })
            .collect()
    }

    /// Transpose of `apply`: `(L^T nu)_c`.
    pub fn apply_adjoint(&self, w: &[T], nu: &[T]) -> Vec<T> {
        let g = self.grid.len();
        let nb = self.times.len();
        let chunk = nb.div_ceil(SCATTER_CHUNKS).max(1);
        let partial: Vec<Vec<T>> = (0..nb)
            .step_by(chunk)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let mut acc = vec![T::zero(); g];
                for i in start..(start + chunk).min(nb) {
                    for j in 0..g {
                        let k = i * g + j;
                        let c = self.cell[k] as usize;
                        let t = self.frac[k];
                        let m = w[k] * nu[j];
                        acc[c] = acc[c] + m * (T::one() - t);
                        acc[c + 1] = acc[c + 1] + m * t;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![T::zero(); g];
        for p in partial {
            for (o, v) in out.iter_mut().zip(p) {
                *o = *o + v;
            }
        }
        out
    }
}

pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)
            }
        })
        .collect()
}
