//! Bounded-variable revised simplex with a dense basis inverse.
//!
//! Composite phase 1 (infeasibility costs on out-of-bound basics), Dantzig
//! pricing with a Bland fallback after a run of degenerate steps, bound
//! flips, periodic refactorization of the inverse, and a residual check on
//! the original rows before an optimum is reported. Sized for models up to
//! a few thousand rows; larger models go through the sparse backend.

use super::{LpOutcome, LpStatus};
use crate::milp::{MilpModel, Sense};
use std::time::Instant;

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 120;
const DEADLINE_EVERY: usize = 256;

pub(super) fn solve(
    model: &MilpModel,
    lb: &[f64],
    ub: &[f64],
    deadline: Option<Instant>,
) -> LpOutcome {
    let n_struct = model.n_vars();
    let m = model.n_rows();

    // A row with no coefficients constrains nothing but may still be
    // inconsistent (e.g. 0 = 1 after fixing); rows keep their slack anyway
    // so the tableau stays aligned with the model.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct + m];
    let mut c = vec![0.0; n_struct + m];
    let mut vlb = vec![0.0; n_struct + m];
    let mut vub = vec![0.0; n_struct + m];
    for j in 0..n_struct {
        vlb[j] = lb[j];
        vub[j] = ub[j];
        if vlb[j] > vub[j] {
            return LpOutcome::failed(LpStatus::Infeasible);
        }
    }
    for &(j, w) in &model.objective {
        c[j] = w;
    }
    let mut b = vec![0.0; m];
    for (i, row) in model.rows.iter().enumerate() {
        b[i] = row.rhs;
        for &(j, w) in &row.coeffs {
            cols[j].push((i, w));
        }
        let s = n_struct + i;
        cols[s].push((i, 1.0));
        let (slo, shi) = match row.sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        vlb[s] = slo;
        vub[s] = shi;
    }

    let mut s = Simplex {
        m,
        n: n_struct + m,
        n_struct,
        cols,
        c,
        b,
        lb: vlb,
        ub: vub,
        basis: (n_struct..n_struct + m).collect(),
        state: Vec::new(),
        binv: identity(m),
        x: vec![0.0; n_struct + m],
        pivots_since_refactor: 0,
    };
    s.state = vec![VState::Lower; s.n];
    for (i, &j) in s.basis.iter().enumerate() {
        s.state[j] = VState::Basic(i);
    }
    for j in 0..s.n {
        if matches!(s.state[j], VState::Basic(_)) {
            continue;
        }
        // Nonbasic vars rest on a finite bound, preferring the lower one.
        if s.lb[j].is_finite() {
            s.x[j] = s.lb[j];
            s.state[j] = VState::Lower;
        } else if s.ub[j].is_finite() {
            s.x[j] = s.ub[j];
            s.state[j] = VState::Upper;
        } else {
            s.x[j] = 0.0;
            s.state[j] = VState::Free;
        }
    }
    s.compute_basics();
    s.run(model, deadline)
}

fn identity(m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m * m];
    for i in 0..m {
        e[i * m + i] = 1.0;
    }
    e
}

#[derive(Clone, Copy, PartialEq)]
enum VState {
    Basic(usize),
    Lower,
    Upper,
    /// Both bounds infinite; rests at 0 until it enters the basis.
    Free,
}

struct Simplex {
    m: usize,
    n: usize,
    n_struct: usize,
    /// Sparse columns of [A | I], row-index/value pairs.
    cols: Vec<Vec<(usize, f64)>>,
    c: Vec<f64>,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VState>,
    /// Dense row-major basis inverse.
    binv: Vec<f64>,
    x: Vec<f64>,
    pivots_since_refactor: usize,
}

enum Step {
    Moved { degenerate: bool },
    Unbounded,
    Singular,
}

impl Simplex {
    /// x_B = B^{-1} (b - N x_N).
    fn compute_basics(&mut self) {
        let m = self.m;
        let mut t = self.b.clone();
        for j in 0..self.n {
            if matches!(self.state[j], VState::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj != 0.0 {
                for &(r, v) in &self.cols[j] {
                    t[r] -= v * xj;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for k in 0..m {
                acc += row[k] * t[k];
            }
            self.x[self.basis[i]] = acc;
        }
    }

    /// Phase-1 gradient of the infeasibility sum for the i-th basic var.
    fn infeas_cost(&self, i: usize) -> f64 {
        let j = self.basis[i];
        let xj = self.x[j];
        if xj < self.lb[j] - BOUND_TOL {
            -1.0
        } else if xj > self.ub[j] + BOUND_TOL {
            1.0
        } else {
            0.0
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.m {
            let j = self.basis[i];
            let xj = self.x[j];
            if xj < self.lb[j] {
                total += self.lb[j] - xj;
            } else if xj > self.ub[j] {
                total += xj - self.ub[j];
            }
        }
        total
    }

    /// y = B^{-T} cb with cb either phase-1 infeasibility costs or c_B.
    fn duals(&self, phase1: bool) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = if phase1 { self.infeas_cost(i) } else { self.c[self.basis[i]] };
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for k in 0..m {
                y[k] += cb * row[k];
            }
        }
        y
    }

    /// Entering column by Dantzig rule (or Bland: first eligible index).
    /// Returns (column, direction) where direction +1 increases the var.
    fn price(&self, phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let y = self.duals(phase1);
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = PRICE_TOL;
        for j in 0..self.n {
            match self.state[j] {
                VState::Basic(_) => continue,
                _ => {}
            }
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let cj = if phase1 { 0.0 } else { self.c[j] };
            let mut r = cj;
            for &(row, v) in &self.cols[j] {
                r -= y[row] * v;
            }
            let dir = match self.state[j] {
                VState::Lower if r < -PRICE_TOL => 1.0,
                VState::Upper if r > PRICE_TOL => -1.0,
                VState::Free if r < -PRICE_TOL => 1.0,
                VState::Free if r > PRICE_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = r.abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// w = B^{-1} A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, v) in &self.cols[j] {
            if v == 0.0 {
                continue;
            }
            for i in 0..m {
                w[i] += self.binv[i * m + r] * v;
            }
        }
        w
    }

    /// Move variable j in direction `dir` to the first breakpoint: its own
    /// opposite bound (a flip) or the nearest blocking basic variable.
    /// Phase 1 lets infeasible basics block at the bound they violate, so
    /// each step reduces the infeasibility sum by as much as possible.
    fn step(&mut self, phase1: bool, j: usize, dir: f64) -> Step {
        let w = self.ftran(j);
        let mut delta = match self.state[j] {
            VState::Lower if self.ub[j].is_finite() => self.ub[j] - self.lb[j],
            VState::Upper if self.lb[j].is_finite() => self.ub[j] - self.lb[j],
            _ => f64::INFINITY,
        };
        let mut leave: Option<(usize, bool)> = None; // (basis row, stops at upper bound)
        let mut leave_abs = 0.0;
        for i in 0..self.m {
            let wi = w[i];
            let sw = dir * wi;
            if sw.abs() <= PIVOT_TOL {
                continue;
            }
            // Basic value changes by -sw per unit step of x_j.
            let bj = self.basis[i];
            let xb = self.x[bj];
            let (li, ui) = (self.lb[bj], self.ub[bj]);
            let (cand, to_upper) = if phase1 && xb < li - BOUND_TOL {
                // Below its lower bound: blocks only once it climbs back to it.
                if sw < 0.0 {
                    ((xb - li) / sw, false)
                } else {
                    continue;
                }
            } else if phase1 && xb > ui + BOUND_TOL {
                if sw > 0.0 {
                    ((xb - ui) / sw, true)
                } else {
                    continue;
                }
            } else if sw > 0.0 {
                if li.is_finite() {
                    ((xb - li) / sw, false)
                } else {
                    continue;
                }
            } else if ui.is_finite() {
                ((xb - ui) / sw, true)
            } else {
                continue;
            };
            let cand = cand.max(0.0);
            let tol = 1e-9 * (1.0 + delta.abs().min(1e12));
            if cand < delta - tol {
                delta = cand;
                leave = Some((i, to_upper));
                leave_abs = wi.abs();
            } else if cand <= delta + tol {
                // Tie: prefer a basis change over a flip, then the largest
                // pivot magnitude, then the earliest row — all deterministic.
                if leave.is_none() || wi.abs() > leave_abs {
                    delta = delta.min(cand);
                    leave = Some((i, to_upper));
                    leave_abs = wi.abs();
                }
            }
        }
        if !delta.is_finite() {
            return if phase1 { Step::Singular } else { Step::Unbounded };
        }

        let degenerate = delta <= 1e-11;
        let stepv = dir * delta;
        if stepv != 0.0 {
            for i in 0..self.m {
                if w[i] != 0.0 {
                    self.x[self.basis[i]] -= stepv * w[i];
                }
            }
            self.x[j] += stepv;
        }
        match leave {
            None => {
                // Bound flip; snap exactly.
                match self.state[j] {
                    VState::Lower => {
                        self.x[j] = self.ub[j];
                        self.state[j] = VState::Upper;
                    }
                    VState::Upper => {
                        self.x[j] = self.lb[j];
                        self.state[j] = VState::Lower;
                    }
                    _ => return Step::Singular, // free vars cannot flip
                }
            }
            Some((r, to_upper)) => {
                if w[r].abs() <= PIVOT_TOL {
                    return Step::Singular;
                }
                let out = self.basis[r];
                self.x[out] = if to_upper { self.ub[out] } else { self.lb[out] };
                self.state[out] = if to_upper { VState::Upper } else { VState::Lower };
                self.basis[r] = j;
                self.state[j] = VState::Basic(r);
                self.pivot_update(r, &w);
                self.pivots_since_refactor += 1;
                if self.pivots_since_refactor >= REFACTOR_EVERY {
                    if !self.refactor() {
                        return Step::Singular;
                    }
                }
            }
        }
        Step::Moved { degenerate }
    }

    /// Rank-one update binv <- E binv for the pivot in basis row r.
    fn pivot_update(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = w[i];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
    }

    /// Rebuild the inverse from scratch (Gauss-Jordan with partial
    /// pivoting) and recompute the basic values. False if B is singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (col, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + col] = v;
            }
        }
        let mut inv = identity(m);
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_abs = a[col * m + col].abs();
            for r in col + 1..m {
                let cand = a[r * m + col].abs();
                if cand > piv_abs {
                    piv_abs = cand;
                    piv_row = r;
                }
            }
            if piv_abs < 1e-11 {
                return false;
            }
            if piv_row != col {
                for k in 0..m {
                    a.swap(col * m + k, piv_row * m + k);
                    inv.swap(col * m + k, piv_row * m + k);
                }
            }
            let piv = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= piv;
                inv[col * m + k] /= piv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        self.compute_basics();
        true
    }

    /// Row activities of the original model, checked against the rhs.
    fn residual_ok(&self, model: &MilpModel) -> bool {
        for (i, row) in model.rows.iter().enumerate() {
            let mut act = self.x[self.n_struct + i];
            for &(j, w) in &row.coeffs {
                act += w * self.x[j];
            }
            if (act - row.rhs).abs() > 1e-6 * (1.0 + row.rhs.abs()) {
                return false;
            }
        }
        true
    }

    fn run(&mut self, model: &MilpModel, deadline: Option<Instant>) -> LpOutcome {
        let feas_goal = BOUND_TOL * (1.0 + self.m as f64).sqrt();
        let iter_cap = 2000 + 200 * self.m;
        let bland_after = 50.max(2 * self.m);
        let mut retried = false;

        for phase1 in [true, false] {
            let mut iters = 0usize;
            let mut degen_run = 0usize;
            loop {
                if phase1 && self.infeasibility() <= feas_goal {
                    break;
                }
                if iters % DEADLINE_EVERY == 0 {
                    if let Some(d) = deadline {
                        if Instant::now() >= d {
                            return LpOutcome::failed(LpStatus::TimedOut);
                        }
                    }
                }
                let bland = degen_run > bland_after;
                let Some((j, dir)) = self.price(phase1, bland) else {
                    if phase1 {
                        // No direction reduces the (convex) infeasibility
                        // sum: the LP has no feasible point.
                        if self.infeasibility() > feas_goal {
                            return LpOutcome::failed(LpStatus::Infeasible);
                        }
                        break;
                    }
                    break; // phase 2 optimal
                };
                match self.step(phase1, j, dir) {
                    Step::Moved { degenerate } => {
                        if degenerate {
                            degen_run += 1;
                        } else {
                            degen_run = 0;
                        }
                    }
                    Step::Unbounded => {
                        return LpOutcome::failed(LpStatus::Unbounded);
                    }
                    Step::Singular => {
                        if retried {
                            return LpOutcome::failed(LpStatus::Numerical);
                        }
                        retried = true;
                        if !self.refactor() {
                            return LpOutcome::failed(LpStatus::Numerical);
                        }
                    }
                }
                iters += 1;
                if iters > iter_cap {
                    return LpOutcome::failed(LpStatus::Numerical);
                }
            }
        }

        // Never report an uncertified optimum: re-derive the basics from a
        // fresh factorization once if the residuals are off, then give up
        // with an explicit numerical status.
        if !self.residual_ok(model) {
            if !self.refactor() || !self.residual_ok(model) {
                return LpOutcome::failed(LpStatus::Numerical);
            }
        }
        if self.infeasibility() > feas_goal {
            return LpOutcome::failed(LpStatus::Numerical);
        }
        let x = self.x[..self.n_struct].to_vec();
        let obj = model.objective_value(&x);
        LpOutcome { status: LpStatus::Optimal, x, obj }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpModel, VarKind, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(
        bounds: &[(f64, f64)],
        c: &[f64],
        rows: &[(Vec<(usize, f64)>, Sense, f64)],
    ) -> MilpModel {
        let mut m = MilpModel::new(Variant::Full, true);
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            m.add_var(format!("x{j}"), VarKind::Continuous, lo, hi);
            if c[j] != 0.0 {
                m.obj_add(j, c[j]);
            }
        }
        for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            m.add_row(format!("r{i}"), coeffs.iter().copied(), *sense, *rhs);
        }
        m
    }

    fn run(m: &MilpModel) -> LpOutcome {
        let (lb, ub): (Vec<f64>, Vec<f64>) =
            m.variables.iter().map(|v| (v.lb, v.ub)).unzip();
        solve(m, &lb, &ub, None)
    }

    #[test]
    fn two_variable_textbook_case() {
        // min -x - 2y  s.t.  x + y <= 4, x <= 3, y <= 2  ->  (2, 2), obj -6
        let m = model(
            &[(0.0, 3.0), (0.0, 2.0)],
            &[-1.0, -2.0],
            &[(vec![(0, 1.0), (1, 1.0)], Sense::Le, 4.0)],
        );
        let out = run(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.obj + 6.0).abs() < 1e-9);
        assert!((out.x[0] - 2.0).abs() < 1e-9);
        assert!((out.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y  s.t.  x + 2y = 6, x + y >= 4
        // vertices: y=2,x=2 (obj 4); check.
        let m = model(
            &[(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
            &[1.0, 1.0],
            &[
                (vec![(0, 1.0), (1, 2.0)], Sense::Eq, 6.0),
                (vec![(0, 1.0), (1, 1.0)], Sense::Ge, 4.0),
            ],
        );
        let out = run(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.obj - 4.0).abs() < 1e-9, "obj {}", out.obj);
    }

    #[test]
    fn infeasible_bounds_pair() {
        let m = model(
            &[(0.0, f64::INFINITY)],
            &[1.0],
            &[
                (vec![(0, 1.0)], Sense::Ge, 1.0),
                (vec![(0, 1.0)], Sense::Le, 0.0),
            ],
        );
        assert_eq!(run(&m).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let m = model(
            &[(0.0, f64::INFINITY), (0.0, 5.0)],
            &[-1.0, 1.0],
            &[(vec![(1, 1.0)], Sense::Le, 5.0)],
        );
        assert_eq!(run(&m).status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_lower_bounds_and_upper_starts() {
        // min x + y with x in [-5, -1], y in [-2, 3], x + y >= -4
        let m = model(
            &[(-5.0, -1.0), (-2.0, 3.0)],
            &[1.0, 1.0],
            &[(vec![(0, 1.0), (1, 1.0)], Sense::Ge, -4.0)],
        );
        let out = run(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.obj + 4.0).abs() < 1e-9);
    }

    #[test]
    fn free_variable_enters_the_basis() {
        // min y  s.t.  y >= x - 2, y >= -x  with x free: optimum y = -1 at x = 1.
        let m = model(
            &[(f64::NEG_INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)],
            &[0.0, 1.0],
            &[
                (vec![(0, 1.0), (1, -1.0)], Sense::Le, 2.0),
                (vec![(0, -1.0), (1, -1.0)], Sense::Le, 0.0),
            ],
        );
        let out = run(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.obj + 1.0).abs() < 1e-9, "obj {}", out.obj);
    }

    #[test]
    fn degenerate_cycling_prone_instance_terminates() {
        // Beale's classic cycling example; the degeneracy guard must kick
        // in and still reach the optimum value of -1/20.
        let m = model(
            &[
                (0.0, f64::INFINITY),
                (0.0, f64::INFINITY),
                (0.0, f64::INFINITY),
                (0.0, f64::INFINITY),
            ],
            &[-0.75, 150.0, -0.02, 6.0],
            &[
                (
                    vec![(0, 0.25), (1, -60.0), (2, -1.0 / 25.0), (3, 9.0)],
                    Sense::Le,
                    0.0,
                ),
                (
                    vec![(0, 0.5), (1, -90.0), (2, -1.0 / 50.0), (3, 3.0)],
                    Sense::Le,
                    0.0,
                ),
                (vec![(2, 1.0)], Sense::Le, 1.0),
            ],
        );
        let out = run(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.obj + 0.05).abs() < 1e-9, "obj {}", out.obj);
    }

    /// Brute-force oracle: enumerate candidate vertices by activating every
    /// n-subset of {rows as equalities} ∪ {finite bounds}, solve the square
    /// system, keep feasible points, and take the best objective.
    fn vertex_oracle(
        bounds: &[(f64, f64)],
        c: &[f64],
        rows: &[(Vec<(usize, f64)>, Sense, f64)],
    ) -> Option<f64> {
        let n = bounds.len();
        #[derive(Clone)]
        struct Plane {
            a: Vec<f64>,
            rhs: f64,
        }
        let mut planes = Vec::new();
        for (coeffs, _, rhs) in rows {
            let mut a = vec![0.0; n];
            for &(j, w) in coeffs {
                a[j] = w;
            }
            planes.push(Plane { a, rhs: *rhs });
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if lo.is_finite() {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                planes.push(Plane { a, rhs: lo });
            }
            if hi.is_finite() {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                planes.push(Plane { a, rhs: hi });
            }
        }
        let mut best: Option<f64> = None;
        let mut pick = vec![0usize; n];
        // Iterate all n-combinations of plane indices.
        fn combos(
            planes: &[(Vec<f64>, f64)],
            n: usize,
            start: usize,
            pick: &mut Vec<usize>,
            depth: usize,
            visit: &mut impl FnMut(&[usize]),
        ) {
            if depth == n {
                visit(pick);
                return;
            }
            for i in start..planes.len() {
                pick[depth] = i;
                combos(planes, n, i + 1, pick, depth + 1, visit);
            }
        }
        let flat: Vec<(Vec<f64>, f64)> =
            planes.iter().map(|pl| (pl.a.clone(), pl.rhs)).collect();
        let feasible = |x: &[f64]| -> bool {
            for (coeffs, sense, rhs) in rows {
                let act: f64 = coeffs.iter().map(|&(j, w)| w * x[j]).sum();
                let ok = match sense {
                    Sense::Le => act <= rhs + 1e-7,
                    Sense::Ge => act >= rhs - 1e-7,
                    Sense::Eq => (act - rhs).abs() <= 1e-7,
                };
                if !ok {
                    return false;
                }
            }
            for (j, &(lo, hi)) in bounds.iter().enumerate() {
                if x[j] < lo - 1e-7 || x[j] > hi + 1e-7 {
                    return false;
                }
            }
            true
        };
        combos(&flat, n, 0, &mut pick, 0, &mut |sel: &[usize]| {
            // Solve the n x n system given by the selected planes.
            let mut a = vec![0.0; n * n];
            let mut rhs = vec![0.0; n];
            for (r, &pi) in sel.iter().enumerate() {
                for j in 0..n {
                    a[r * n + j] = flat[pi].0[j];
                }
                rhs[r] = flat[pi].1;
            }
            // Gaussian elimination with partial pivoting.
            for col in 0..n {
                let mut piv = col;
                for r in col + 1..n {
                    if a[r * n + col].abs() > a[piv * n + col].abs() {
                        piv = r;
                    }
                }
                if a[piv * n + col].abs() < 1e-10 {
                    return;
                }
                if piv != col {
                    for k in 0..n {
                        a.swap(col * n + k, piv * n + k);
                    }
                    rhs.swap(col, piv);
                }
                let d = a[col * n + col];
                for k in 0..n {
                    a[col * n + k] /= d;
                }
                rhs[col] /= d;
                for r in 0..n {
                    if r == col {
                        continue;
                    }
                    let f = a[r * n + col];
                    if f == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        a[r * n + k] -= f * a[col * n + k];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
            if feasible(&rhs) {
                let obj: f64 = c.iter().zip(&rhs).map(|(ci, xi)| ci * xi).sum();
                best = Some(match best {
                    Some(b) if b <= obj => b,
                    _ => obj,
                });
            }
        });
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(72020);
        let mut solved = 0;
        let mut infeasible = 0;
        for case in 0..100 {
            let n = rng.gen_range(2..=5);
            let m = rng.gen_range(1..=5);
            let bounds: Vec<(f64, f64)> =
                (0..n).map(|_| (0.0, rng.gen_range(1..=9) as f64)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-4..=4) as f64).collect();
            let mut rows = Vec::new();
            for _ in 0..m {
                let mut coeffs = Vec::new();
                for j in 0..n {
                    let w = rng.gen_range(-3..=3);
                    if w != 0 {
                        coeffs.push((j, w as f64));
                    }
                }
                if coeffs.is_empty() {
                    coeffs.push((rng.gen_range(0..n), 1.0));
                }
                let sense = match rng.gen_range(0..4) {
                    0 => Sense::Ge,
                    1 => Sense::Eq,
                    _ => Sense::Le,
                };
                let rhs = rng.gen_range(-2..=8) as f64;
                rows.push((coeffs, sense, rhs));
            }
            let expect = vertex_oracle(&bounds, &c, &rows);
            let mdl = model(&bounds, &c, &rows);
            let out = run(&mdl);
            match expect {
                Some(obj) => {
                    assert_eq!(
                        out.status,
                        LpStatus::Optimal,
                        "case {case}: oracle found {obj}, solver says {:?}",
                        out.status
                    );
                    assert!(
                        (out.obj - obj).abs() <= 1e-8 * (1.0 + obj.abs()),
                        "case {case}: solver {} vs oracle {}",
                        out.obj,
                        obj
                    );
                    solved += 1;
                }
                None => {
                    assert_eq!(
                        out.status,
                        LpStatus::Infeasible,
                        "case {case}: oracle infeasible, solver says {:?} obj {}",
                        out.status,
                        out.obj
                    );
                    infeasible += 1;
                }
            }
        }
        // The generator must exercise both outcomes.
        assert!(solved >= 20, "only {solved} solvable cases");
        assert!(infeasible >= 5, "only {infeasible} infeasible cases");
    }

    #[test]
    fn fixed_variables_stay_put() {
        let mut m = MilpModel::new(Variant::Full, true);
        m.add_var("a", VarKind::Continuous, 2.0, 2.0);
        m.add_var("b", VarKind::Continuous, 0.0, 10.0);
        m.obj_add(1, 1.0);
        m.add_row("r0", [(0, 1.0), (1, 1.0)], Sense::Ge, 5.0);
        let out = run(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 2.0).abs() < 1e-12);
        assert!((out.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_row_consistency_checked_via_slack() {
        // A row with no coefficients and rhs 1 under Ge is 0 >= 1: infeasible.
        let mut m = MilpModel::new(Variant::Full, true);
        m.add_var("a", VarKind::Continuous, 0.0, 1.0);
        m.obj_add(0, 1.0);
        m.add_row("gap", std::iter::empty::<(usize, f64)>(), Sense::Ge, 1.0);
        assert_eq!(run(&m).status, LpStatus::Infeasible);
    }
}
