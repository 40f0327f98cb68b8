//! MILP solving: an embedded bounded-variable revised simplex wrapped in
//! best-first branch-and-bound, a sparse LP fallback for large models,
//! deterministic MPS export, and a subprocess adapter for external solvers.
//!
//! Every `Optimal` (or `GapLimit`) answer is re-validated by an
//! independent constraint check over the original model before it is
//! returned; a solution that fails the check is reported as `Numerical`,
//! never as a wrong optimum.

use crate::milp::{MilpModel, Sense, VarKind};
use std::fmt;
use std::time::{Duration, Instant};

mod bb;
mod external;
mod mps;
mod simplex;
mod sparse;

pub use external::{ExternalError, ExternalSolver};
pub use mps::{export_mps, write_mps};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped with the relative bound gap below the configured tolerance
    /// but not proven zero.
    GapLimit,
    /// Stopped at the time limit; the report carries the best incumbent.
    TimeLimit,
    /// The solver could not certify its answer numerically.
    Numerical,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::GapLimit => "gap_limit",
            Status::TimeLimit => "time_limit",
            Status::Numerical => "numerical",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: Status,
    /// NaN when no feasible assignment was found.
    pub objective: f64,
    /// Per-variable assignment in model column order; empty when none.
    pub values: Vec<f64>,
    /// Wall-clock seconds.
    pub runtime: f64,
    /// Branch-and-bound nodes solved (0 for a plain LP call).
    pub nodes: usize,
    /// Relative gap between incumbent and proven bound.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpBackend {
    /// Pick by model size: dense embedded simplex for small models, the
    /// sparse interior-point solver above [`AUTO_DENSE_ROW_LIMIT`] rows.
    Auto,
    /// The dense bounded-variable simplex built into this crate.
    Embedded,
    /// Sparse interior-point solver; scales to the full hourly models.
    Sparse,
}

/// Largest row count the dense embedded simplex is asked to handle when
/// the backend is `Auto`.
pub const AUTO_DENSE_ROW_LIMIT: usize = 900;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap_tol: f64,
    /// Absolute (rhs-scaled) feasibility tolerance.
    pub feas_tol: f64,
    /// Integrality tolerance on binaries.
    pub int_tol: f64,
    pub time_limit: Option<Duration>,
    pub backend: LpBackend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-4,
            feas_tol: 1e-6,
            int_tol: 1e-5,
            time_limit: None,
            backend: LpBackend::Auto,
        }
    }
}

/// Solve the full model (binaries, semi-continuous domains and all).
pub fn solve_model(model: &MilpModel, options: &SolverOptions) -> SolveReport {
    bb::run(model, options)
}

/// Solve the continuous relaxation with the embedded simplex.
pub fn solve_lp(model: &MilpModel) -> SolveReport {
    let t0 = Instant::now();
    let (lb, ub) = relaxed_bounds(model);
    let out = simplex::solve(model, &lb, &ub, None);
    let status = match out.status {
        LpStatus::Optimal => {
            if check_solution(model, &out.x, 1e-6, f64::INFINITY).is_empty() {
                Status::Optimal
            } else {
                Status::Numerical
            }
        }
        LpStatus::Infeasible => Status::Infeasible,
        LpStatus::Unbounded => Status::Unbounded,
        LpStatus::Numerical => Status::Numerical,
        LpStatus::TimedOut => Status::TimeLimit,
    };
    let found = status == Status::Optimal;
    SolveReport {
        status,
        objective: if found { out.obj } else { f64::NAN },
        values: if found { out.x } else { Vec::new() },
        runtime: t0.elapsed().as_secs_f64(),
        nodes: 0,
        gap: if found { 0.0 } else { f64::NAN },
    }
}

/// Spec'd convenience entry: gap and time limit, defaults elsewhere.
pub fn solve_milp(
    model: &MilpModel,
    gap_tol: f64,
    time_limit: Option<Duration>,
) -> SolveReport {
    let options = SolverOptions { gap_tol, time_limit, ..SolverOptions::default() };
    solve_model(model, &options)
}

/// Continuous bounds with every discrete domain relaxed.
fn relaxed_bounds(model: &MilpModel) -> (Vec<f64>, Vec<f64>) {
    let mut lb = Vec::with_capacity(model.n_vars());
    let mut ub = Vec::with_capacity(model.n_vars());
    for v in &model.variables {
        match v.kind {
            VarKind::Continuous | VarKind::Binary => {
                lb.push(v.lb);
                ub.push(v.ub);
            }
            VarKind::SemiContinuous { .. } => {
                lb.push(0.0);
                ub.push(v.ub);
            }
        }
    }
    (lb, ub)
}

/// Independent feasibility audit of an assignment against the original
/// model: row activities, variable bounds, binary integrality and
/// semi-continuous domains. Returns human-readable violations; empty
/// means the assignment passes.
pub fn check_solution(
    model: &MilpModel,
    x: &[f64],
    feas_tol: f64,
    int_tol: f64,
) -> Vec<String> {
    let mut bad = Vec::new();
    if x.len() != model.n_vars() {
        bad.push(format!(
            "assignment has {} values for {} variables",
            x.len(),
            model.n_vars()
        ));
        return bad;
    }
    for row in &model.rows {
        let activity: f64 = row.coeffs.iter().map(|&(c, w)| w * x[c]).sum();
        let tol = feas_tol * (1.0 + row.rhs.abs());
        let ok = match row.sense {
            Sense::Le => activity <= row.rhs + tol,
            Sense::Ge => activity >= row.rhs - tol,
            Sense::Eq => (activity - row.rhs).abs() <= tol,
        };
        if !ok {
            bad.push(format!(
                "row {}: activity {} violates {} {}",
                row.name,
                activity,
                match row.sense {
                    Sense::Le => "<=",
                    Sense::Ge => ">=",
                    Sense::Eq => "=",
                },
                row.rhs
            ));
        }
    }
    for (j, v) in model.variables.iter().enumerate() {
        let xv = x[j];
        if !xv.is_finite() {
            bad.push(format!("variable {}: non-finite value {xv}", v.name));
            continue;
        }
        // For a semi-continuous variable the declared lb is the "on"
        // level; 0 is always in the domain, so the interval check only
        // applies from below 0.
        let lb_eff = match v.kind {
            VarKind::SemiContinuous { .. } => 0.0,
            _ => v.lb,
        };
        if xv < lb_eff - feas_tol * (1.0 + lb_eff.abs())
            || xv > v.ub + feas_tol * (1.0 + v.ub.abs())
        {
            bad.push(format!(
                "variable {}: {} outside [{}, {}]",
                v.name, xv, lb_eff, v.ub
            ));
        }
        match v.kind {
            VarKind::Binary => {
                if (xv - xv.round()).abs() > int_tol {
                    bad.push(format!("binary {}: fractional value {}", v.name, xv));
                }
            }
            VarKind::SemiContinuous { lo } => {
                let off = xv.abs() <= feas_tol * (1.0 + lo);
                let on = xv >= lo - int_tol.min(1.0) * (1.0 + lo);
                if !off && !on {
                    bad.push(format!(
                        "semi-continuous {}: {} is neither 0 nor >= {}",
                        v.name, xv, lo
                    ));
                }
            }
            VarKind::Continuous => {}
        }
    }
    bad
}

/// Outcome of one LP relaxation solve, shared by both backends.
#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub obj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Numerical,
    TimedOut,
}

impl LpOutcome {
    fn failed(status: LpStatus) -> Self {
        LpOutcome { status, x: Vec::new(), obj: f64::NAN }
    }
}

/// One relaxation solve through the configured backend.
pub(crate) fn solve_relaxation(
    model: &MilpModel,
    lb: &[f64],
    ub: &[f64],
    backend: LpBackend,
    deadline: Option<Instant>,
) -> LpOutcome {
    let use_embedded = match backend {
        LpBackend::Embedded => true,
        LpBackend::Sparse => false,
        LpBackend::Auto => model.n_rows() <= AUTO_DENSE_ROW_LIMIT,
    };
    if use_embedded {
        simplex::solve(model, lb, ub, deadline)
    } else {
        sparse::solve(model, lb, ub, deadline)
    }
}
