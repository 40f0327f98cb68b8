//! Sparse LP backend for models too large for the dense embedded simplex.
//!
//! Wraps the Clarabel interior-point solver. Only continuous relaxations
//! pass through here; branching bounds arrive as plain [lb, ub] intervals.
//! Anything Clarabel cannot certify at full accuracy is reported as
//! `Numerical`, never as a clean answer.

use super::{LpOutcome, LpStatus};
use crate::milp::{MilpModel, Sense};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use std::time::Instant;

pub(super) fn solve(
    model: &MilpModel,
    lb: &[f64],
    ub: &[f64],
    deadline: Option<Instant>,
) -> LpOutcome {
    let n = model.n_vars();
    for j in 0..n {
        if lb[j] > ub[j] {
            return LpOutcome::failed(LpStatus::Infeasible);
        }
    }
    let time_limit = match deadline {
        Some(d) => {
            let left = d.saturating_duration_since(Instant::now()).as_secs_f64();
            if left <= 0.0 {
                return LpOutcome::failed(LpStatus::TimedOut);
            }
            left
        }
        None => f64::INFINITY,
    };

    // Conic form: A x + s = b, one cone block per row family. Equalities
    // first (zero cone), then every inequality normalised to `<=`
    // (nonnegative cone), then finite variable bounds as extra rows.
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for row in model.rows.iter().filter(|r| r.sense == Sense::Eq) {
        if row.coeffs.is_empty() {
            // 0 = rhs: trivially true or the whole LP is off.
            if row.rhs != 0.0 {
                return LpOutcome::failed(LpStatus::Infeasible);
            }
            continue;
        }
        let i = rhs.len();
        trips.extend(row.coeffs.iter().map(|&(j, w)| (i, j, w)));
        rhs.push(row.rhs);
    }
    let n_eq = rhs.len();
    for row in model.rows.iter().filter(|r| r.sense != Sense::Eq) {
        let sign = if row.sense == Sense::Le { 1.0 } else { -1.0 };
        if row.coeffs.is_empty() {
            if sign * row.rhs < 0.0 {
                return LpOutcome::failed(LpStatus::Infeasible);
            }
            continue;
        }
        let i = rhs.len();
        trips.extend(row.coeffs.iter().map(|&(j, w)| (i, j, sign * w)));
        rhs.push(sign * row.rhs);
    }
    for j in 0..n {
        if ub[j].is_finite() {
            trips.push((rhs.len(), j, 1.0));
            rhs.push(ub[j]);
        }
        if lb[j].is_finite() {
            trips.push((rhs.len(), j, -1.0));
            rhs.push(-lb[j]);
        }
    }
    let m = rhs.len();
    let n_ineq = m - n_eq;

    let mut q = vec![0.0; n];
    for &(j, w) in &model.objective {
        q[j] = w;
    }
    if m == 0 {
        // Completely unconstrained: the origin is optimal unless the
        // objective has a direction to chase.
        return if q.iter().all(|&c| c == 0.0) {
            let x = vec![0.0; n];
            let obj = model.objective_value(&x);
            LpOutcome { status: LpStatus::Optimal, x, obj }
        } else {
            LpOutcome::failed(LpStatus::Unbounded)
        };
    }

    trips.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut colptr = vec![0usize; n + 1];
    for &(_, j, _) in &trips {
        colptr[j + 1] += 1;
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    let rowval: Vec<usize> = trips.iter().map(|t| t.0).collect();
    let nzval: Vec<f64> = trips.iter().map(|t| t.2).collect();
    let a = CscMatrix::new(m, n, colptr, rowval, nzval);
    let p = CscMatrix::zeros((n, n));

    let mut cones = Vec::new();
    if n_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_eq));
    }
    if n_ineq > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_ineq));
    }

    let Ok(settings) = DefaultSettingsBuilder::default()
        .verbose(false)
        .time_limit(time_limit)
        .build()
    else {
        return LpOutcome::failed(LpStatus::Numerical);
    };
    let Ok(mut solver) = DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings) else {
        return LpOutcome::failed(LpStatus::Numerical);
    };
    solver.solve();

    match solver.solution.status {
        SolverStatus::Solved => {
            let mut x = solver.solution.x.clone();
            // Interior-point answers sit within tolerance of the box; snap
            // the tiny outside excursions back so downstream audits see
            // clean values.
            for j in 0..n {
                x[j] = x[j].clamp(lb[j], ub[j]);
            }
            let obj = model.objective_value(&x);
            LpOutcome { status: LpStatus::Optimal, x, obj }
        }
        SolverStatus::PrimalInfeasible => LpOutcome::failed(LpStatus::Infeasible),
        SolverStatus::DualInfeasible => LpOutcome::failed(LpStatus::Unbounded),
        SolverStatus::MaxTime => LpOutcome::failed(LpStatus::TimedOut),
        _ => LpOutcome::failed(LpStatus::Numerical),
    }
}
