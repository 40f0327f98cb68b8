//! Best-first branch-and-bound over the LP relaxation.
//!
//! Nodes are ordered by their inherited lower bound, so the bound of the
//! node at the top of the heap is the global proven bound and never
//! decreases. Branching picks the most fractional binary (ties broken by
//! the lowest column index); semi-continuous variables caught between 0
//! and their minimum level branch into x = 0 versus x >= lo. Integral
//! nodes are re-solved with every discrete variable pinned, and a
//! candidate becomes the incumbent only after the independent constraint
//! audit passes.

use super::{
    check_solution, relaxed_bounds, solve_relaxation, LpStatus, SolveReport, SolverOptions,
    Status,
};
use crate::milp::{MilpModel, Sense, VarKind};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

struct Node {
    bound: f64,
    seq: u64,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound.total_cmp(&other.bound) == Ordering::Equal && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we pop the smallest bound.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn scale(v: f64) -> f64 {
    v.abs().max(1.0)
}

/// Relative gaps at or below this are within LP numerical accuracy
/// (interior-point answers are good to ~1e-8 relative) and count as
/// proven-zero rather than `GapLimit`.
const GAP_EPS: f64 = 1e-7;

/// Marks the columns whose increase can only loosen constraints: never a
/// positive coefficient in a `<=` row, never a negative one in a `>=`
/// row, absent from equalities. Pinning such a binary to 1 can never cut
/// a feasible point away, which is what lets the rounding heuristic turn
/// every big-M gate on blindly.
fn loosening_columns(model: &MilpModel) -> Vec<bool> {
    let mut loosens = vec![true; model.n_vars()];
    for row in &model.rows {
        for &(j, w) in &row.coeffs {
            let ok = match row.sense {
                Sense::Le => w <= 0.0,
                Sense::Ge => w >= 0.0,
                Sense::Eq => false,
            };
            if !ok {
                loosens[j] = false;
            }
        }
    }
    loosens
}

/// Bounds with every discrete variable pinned, ready for one LP solve
/// over the continuous remainder.
///
/// Without `relaxers`, binaries pin at their rounded values from `x`
/// (used to polish an already-integral point). With `relaxers` (the
/// rounding heuristic), purely-loosening binaries pin on and the rest pin
/// off unless the relaxation drives them close to 1 — the relaxation's
/// fractional values for gate binaries are degenerate, so their rounded
/// values carry no information and routinely contradict part-load floors.
/// Either way, a consistency pass forces the binary of a gate row
/// `w·v - M·b <= 0` back on when the gated variable keeps a strictly
/// positive lower bound.
fn pinned_bounds(
    model: &MilpModel,
    x: &[f64],
    lb: &[f64],
    ub: &[f64],
    binaries: &[usize],
    semis: &[(usize, f64)],
    relaxers: Option<&[bool]>,
) -> (Vec<f64>, Vec<f64>) {
    let mut plb = lb.to_vec();
    let mut pub_ = ub.to_vec();
    for &j in binaries {
        if lb[j] == ub[j] {
            continue; // already pinned by branching
        }
        let r = match relaxers {
            None => x[j].round().clamp(0.0, 1.0),
            Some(mask) => {
                if mask[j] || x[j] >= 0.9 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        plb[j] = r;
        pub_[j] = r;
    }
    for &(j, lo) in semis {
        if x[j] < lo * 0.5 {
            plb[j] = 0.0;
            pub_[j] = 0.0;
        } else {
            plb[j] = plb[j].max(lo);
        }
    }
    for row in &model.rows {
        if row.sense != Sense::Le || row.rhs != 0.0 || row.coeffs.len() != 2 {
            continue;
        }
        let (a0, a1) = (row.coeffs[0], row.coeffs[1]);
        for ((v, wv), (b, wb)) in [(a0, a1), (a1, a0)] {
            if wv > 0.0
                && wb < 0.0
                && model.variables[b].kind == VarKind::Binary
                && plb[v] > 0.0
            {
                if ub[b] > 0.0 {
                    plb[b] = 1.0;
                    pub_[b] = 1.0;
                } else if matches!(model.variables[v].kind, VarKind::SemiContinuous { .. }) {
                    // The gate is branch-fixed off; the only consistent
                    // pin turns the gated variable off as well.
                    plb[v] = 0.0;
                    pub_[v] = 0.0;
                }
            }
        }
    }
    (plb, pub_)
}

pub(super) fn run(model: &MilpModel, options: &SolverOptions) -> SolveReport {
    let t0 = Instant::now();
    let deadline = options.time_limit.map(|d| t0 + d);
    let (lb0, ub0) = relaxed_bounds(model);

    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let semis: Vec<(usize, f64)> = model
        .variables
        .iter()
        .enumerate()
        .filter_map(|(j, v)| match v.kind {
            VarKind::SemiContinuous { lo } => Some((j, lo)),
            _ => None,
        })
        .collect();

    let loosens = loosening_columns(model);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, lb: lb0, ub: ub0 });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    // Largest bound among popped nodes = proven global lower bound.
    let mut proven_bound = f64::NEG_INFINITY;
    let mut halted: Option<Status> = None;
    let mut gap_at_stop = 0.0;

    'search: loop {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                halted = Some(Status::TimeLimit);
                break;
            }
        }
        let Some(node) = heap.pop() else { break };
        if node.bound.is_finite() {
            proven_bound = proven_bound.max(node.bound);
        }

        if let Some((inc, _)) = &incumbent {
            let gap = (inc - node.bound) / scale(*inc);
            if gap <= options.gap_tol {
                if gap > GAP_EPS {
                    halted = Some(Status::GapLimit);
                    gap_at_stop = gap.max(0.0);
                }
                break;
            }
        }

        nodes += 1;
        let out = solve_relaxation(model, &node.lb, &node.ub, options.backend, deadline);
        let (relax_obj, x) = match out.status {
            LpStatus::Optimal => (out.obj, out.x),
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 && incumbent.is_none() {
                    halted = Some(Status::Unbounded);
                } else {
                    // A child cannot be less constrained than its parent.
                    halted = Some(Status::Numerical);
                }
                break;
            }
            LpStatus::TimedOut => {
                halted = Some(Status::TimeLimit);
                break;
            }
            LpStatus::Numerical => {
                halted = Some(Status::Numerical);
                break;
            }
        };
        let node_bound = node.bound.max(relax_obj);
        if nodes == 1 {
            proven_bound = proven_bound.max(relax_obj.min(f64::INFINITY));
        }
        if let Some((inc, _)) = &incumbent {
            if relax_obj >= inc - 1e-12 * scale(*inc) {
                continue;
            }
        }

        // Primal rounding heuristic: best-first alone reaches integral
        // nodes too rarely to feed the incumbent, so periodically pin
        // every discrete variable off the current relaxation and let the
        // remaining LP finish the assignment. Root first (pruning needs
        // any incumbent at all), then every 64 nodes as branching drags
        // the pins through different configurations.
        if !(binaries.is_empty() && semis.is_empty()) && (nodes == 1 || nodes % 64 == 0) {
            let (plb, pub_) =
                pinned_bounds(model, &x, &node.lb, &node.ub, &binaries, &semis, Some(&loosens));
            let rounded = solve_relaxation(model, &plb, &pub_, options.backend, deadline);
            if rounded.status == LpStatus::Optimal
                && incumbent.as_ref().map_or(true, |(inc, _)| rounded.obj < *inc)
                && check_solution(model, &rounded.x, options.feas_tol, options.int_tol)
                    .is_empty()
            {
                incumbent = Some((rounded.obj, rounded.x));
            }
        }

        // Most fractional binary, ties at the lowest column index.
        let mut branch_bin: Option<usize> = None;
        let mut worst = options.int_tol;
        for &j in &binaries {
            let f = (x[j] - x[j].round()).abs();
            if f > worst {
                worst = f;
                branch_bin = Some(j);
            }
        }
        if let Some(j) = branch_bin {
            for fix in [0.0, 1.0] {
                let mut lb = node.lb.clone();
                let mut ub = node.ub.clone();
                lb[j] = fix;
                ub[j] = fix;
                if let Some((inc, _)) = &incumbent {
                    if node_bound >= inc - 1e-12 * scale(*inc) {
                        continue;
                    }
                }
                seq += 1;
                heap.push(Node { bound: node_bound, seq, lb, ub });
            }
            continue;
        }

        // First semi-continuous variable strictly inside the forbidden gap.
        let mut branch_sc: Option<(usize, f64)> = None;
        for &(j, lo) in &semis {
            let tol = options.feas_tol * (1.0 + lo);
            if x[j] > tol && x[j] < lo - tol {
                branch_sc = Some((j, lo));
                break;
            }
        }
        if let Some((j, lo)) = branch_sc {
            for on in [false, true] {
                let mut lb = node.lb.clone();
                let mut ub = node.ub.clone();
                if on {
                    lb[j] = lo.max(lb[j]);
                } else {
                    lb[j] = 0.0;
                    ub[j] = 0.0;
                }
                seq += 1;
                heap.push(Node { bound: node_bound, seq, lb, ub });
            }
            continue;
        }

        // Discretely feasible. Re-solve with every discrete var pinned so
        // tolerance-level fractionality cannot leak into the incumbent;
        // skip the extra solve when branching already fixed everything.
        let needs_polish = binaries.iter().any(|&j| node.lb[j] != node.ub[j])
            || semis.iter().any(|&(j, lo)| node.ub[j] != 0.0 && node.lb[j] < lo);
        let candidate = if needs_polish {
            let (plb, pub_) =
                pinned_bounds(model, &x, &node.lb, &node.ub, &binaries, &semis, None);
            let polished = solve_relaxation(model, &plb, &pub_, options.backend, deadline);
            match polished.status {
                LpStatus::Optimal => Some((polished.obj, polished.x)),
                LpStatus::TimedOut => {
                    halted = Some(Status::TimeLimit);
                    break 'search;
                }
                // Polish failing while the node LP stood is a numerical
                // wobble; fall back to the node point and let the audit
                // decide.
                _ => Some((relax_obj, x)),
            }
        } else {
            Some((relax_obj, x))
        };
        if let Some((cobj, cx)) = candidate {
            if check_solution(model, &cx, options.feas_tol, options.int_tol).is_empty() {
                let better = incumbent
                    .as_ref()
                    .map_or(true, |(inc, _)| cobj < *inc);
                if better {
                    incumbent = Some((cobj, cx));
                }
            }
        }
    }

    let runtime = t0.elapsed().as_secs_f64();
    match halted {
        Some(Status::Unbounded) => SolveReport {
            status: Status::Unbounded,
            objective: f64::NAN,
            values: Vec::new(),
            runtime,
            nodes,
            gap: f64::NAN,
        },
        Some(Status::GapLimit) => {
            let (obj, values) = incumbent.expect("gap stop implies incumbent");
            SolveReport {
                status: Status::GapLimit,
                objective: obj,
                values,
                runtime,
                nodes,
                gap: gap_at_stop,
            }
        }
        Some(status @ (Status::TimeLimit | Status::Numerical)) => match incumbent {
            Some((obj, values)) => {
                let open_bound = heap
                    .peek()
                    .map(|n| n.bound)
                    .unwrap_or(obj)
                    .max(proven_bound);
                let gap = ((obj - open_bound) / scale(obj)).max(0.0);
                SolveReport { status, objective: obj, values, runtime, nodes, gap }
            }
            None => SolveReport {
                status,
                objective: f64::NAN,
                values: Vec::new(),
                runtime,
                nodes,
                gap: f64::NAN,
            },
        },
        Some(Status::Optimal) | Some(Status::Infeasible) => unreachable!(),
        None => match incumbent {
            // Heap exhausted: the tree is closed, the incumbent is optimal.
            Some((obj, values)) => SolveReport {
                status: Status::Optimal,
                objective: obj,
                values,
                runtime,
                nodes,
                gap: 0.0,
            },
            None => SolveReport {
                status: Status::Infeasible,
                objective: f64::NAN,
                values: Vec::new(),
                runtime,
                nodes,
                gap: f64::NAN,
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::{solve_lp, solve_milp, solve_model, SolverOptions, Status};
    use crate::milp::{MilpModel, Sense, VarKind, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::time::Duration;

    #[test]
    fn lp_integral_instance_takes_one_node() {
        // The relaxation optimum already sits at b = 1 exactly.
        let mut m = MilpModel::new(Variant::Full, false);
        m.add_var("b", VarKind::Binary, 0.0, 1.0);
        m.add_var("x", VarKind::Continuous, 0.0, 10.0);
        m.obj_add(0, 2.0);
        m.obj_add(1, -1.0);
        m.add_row("gate", [(1, 1.0), (0, -10.0)], Sense::Le, 0.0);
        let milp = solve_milp(&m, 1e-4, None);
        assert_eq!(milp.status, Status::Optimal);
        assert_eq!(milp.nodes, 1);
        let lp = solve_lp(&m);
        assert!((milp.objective - lp.objective).abs() < 1e-9);
        assert!((milp.objective + 8.0).abs() < 1e-9);
    }

    #[test]
    fn fractional_relaxation_forces_branching() {
        // min -5 b1 - 4 b2  s.t. 3 b1 + 2 b2 <= 4; relaxation is fractional,
        // integer optimum picks b1 alone.
        let mut m = MilpModel::new(Variant::Full, false);
        m.add_var("b1", VarKind::Binary, 0.0, 1.0);
        m.add_var("b2", VarKind::Binary, 0.0, 1.0);
        m.obj_add(0, -5.0);
        m.obj_add(1, -4.0);
        m.add_row("cap", [(0, 3.0), (1, 2.0)], Sense::Le, 4.0);
        let r = solve_milp(&m, 1e-6, None);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective + 5.0).abs() < 1e-9);
        assert!(r.nodes > 1, "relaxation was fractional, expected branching");
        assert!((r.values[0] - 1.0).abs() < 1e-9);
        assert!(r.values[1].abs() < 1e-9);

        // A loose gap tolerance stops the same search early.
        let loose = solve_milp(&m, 0.5, None);
        assert_eq!(loose.status, Status::GapLimit);
        assert!((loose.objective + 5.0).abs() < 1e-9);
        assert!(loose.gap > 0.0 && loose.gap <= 0.5);
    }

    #[test]
    fn integer_infeasible_with_feasible_relaxation() {
        // 2 b1 + 2 b2 = 1 admits b = 1/4 but no 0/1 point.
        let mut m = MilpModel::new(Variant::Full, false);
        m.add_var("b1", VarKind::Binary, 0.0, 1.0);
        m.add_var("b2", VarKind::Binary, 0.0, 1.0);
        m.obj_add(0, 1.0);
        m.add_row("odd", [(0, 2.0), (1, 2.0)], Sense::Eq, 1.0);
        let r = solve_milp(&m, 1e-4, None);
        assert_eq!(r.status, Status::Infeasible);
        assert!(r.objective.is_nan());
        assert!(r.values.is_empty());
    }

    #[test]
    fn semi_continuous_domain_is_enforced() {
        // min x with x in {0} u [2, 10] and x >= 1: the LP wants 1, the
        // domain forces 2.
        let mut m = MilpModel::new(Variant::Full, false);
        m.add_var("x", VarKind::SemiContinuous { lo: 2.0 }, 2.0, 10.0);
        m.obj_add(0, 1.0);
        m.add_row("need", [(0, 1.0)], Sense::Ge, 1.0);
        let r = solve_milp(&m, 1e-6, None);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-9);
        assert!(r.nodes >= 2, "expected x = 0 vs x >= 2 branching");

        // And the off state is reachable when the constraint allows it.
        let mut m2 = MilpModel::new(Variant::Full, false);
        m2.add_var("x", VarKind::SemiContinuous { lo: 2.0 }, 2.0, 10.0);
        m2.obj_add(0, 1.0);
        let r2 = solve_milp(&m2, 1e-6, None);
        assert_eq!(r2.status, Status::Optimal);
        assert!(r2.objective.abs() < 1e-12);
    }

    #[test]
    fn zero_time_limit_reports_time_limit() {
        let mut m = MilpModel::new(Variant::Full, false);
        m.add_var("b", VarKind::Binary, 0.0, 1.0);
        m.obj_add(0, 1.0);
        let r = solve_milp(&m, 1e-4, Some(Duration::ZERO));
        assert_eq!(r.status, Status::TimeLimit);
        assert!(r.objective.is_nan());
        assert_eq!(r.nodes, 0);
    }

    /// Exhaustive oracle: try every binary pattern, solve the continuous
    /// remainder with the embedded simplex, keep the best.
    fn enumerate_optimum(m: &MilpModel, binaries: &[usize]) -> Option<f64> {
        let mut best: Option<f64> = None;
        for mask in 0..(1u32 << binaries.len()) {
            let mut lb: Vec<f64> = m.variables.iter().map(|v| v.lb).collect();
            let mut ub: Vec<f64> = m.variables.iter().map(|v| v.ub).collect();
            for (bit, &j) in binaries.iter().enumerate() {
                let v = ((mask >> bit) & 1) as f64;
                lb[j] = v;
                ub[j] = v;
            }
            let out = super::super::simplex::solve(m, &lb, &ub, None);
            if out.status == super::super::LpStatus::Optimal {
                best = Some(match best {
                    Some(b) if b <= out.obj => b,
                    _ => out.obj,
                });
            }
        }
        best
    }

    #[test]
    fn random_toy_milps_match_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(90210);
        let mut optimal = 0;
        let mut infeasible = 0;
        for case in 0..25 {
            let n_b = rng.gen_range(3..=8);
            let n_c = rng.gen_range(0..=2);
            let mut m = MilpModel::new(Variant::Full, false);
            let mut bins = Vec::new();
            for j in 0..n_b {
                bins.push(m.add_var(format!("b{j}"), VarKind::Binary, 0.0, 1.0));
            }
            for j in 0..n_c {
                m.add_var(format!("c{j}"), VarKind::Continuous, 0.0, rng.gen_range(1..=6) as f64);
            }
            let n = n_b + n_c;
            for j in 0..n {
                let w = rng.gen_range(-5..=5);
                if w != 0 {
                    m.obj_add(j, w as f64);
                }
            }
            let n_rows = rng.gen_range(2..=5);
            for i in 0..n_rows {
                let mut coeffs = Vec::new();
                for j in 0..n {
                    let w = rng.gen_range(-3..=3);
                    if w != 0 {
                        coeffs.push((j, w as f64));
                    }
                }
                if coeffs.is_empty() {
                    coeffs.push((i % n, 1.0));
                }
                let sense = match rng.gen_range(0..5) {
                    0 => Sense::Ge,
                    1 => Sense::Eq,
                    _ => Sense::Le,
                };
                let rhs = rng.gen_range(-2..=6) as f64;
                m.add_row(format!("r{i}"), coeffs, sense, rhs);
            }
            let expect = enumerate_optimum(&m, &bins);
            let got = solve_milp(&m, 1e-9, None);
            match expect {
                Some(obj) => {
                    assert_eq!(
                        got.status,
                        Status::Optimal,
                        "case {case}: oracle {obj}, solver {:?}",
                        got.status
                    );
                    assert!(
                        (got.objective - obj).abs() <= 1e-6 * (1.0 + obj.abs()),
                        "case {case}: solver {} vs oracle {}",
                        got.objective,
                        obj
                    );
                    let audit = super::super::check_solution(&m, &got.values, 1e-6, 1e-5);
                    assert!(audit.is_empty(), "case {case}: {:?}", audit);
                    optimal += 1;
                }
                None => {
                    assert_eq!(got.status, Status::Infeasible, "case {case}");
                    infeasible += 1;
                }
            }
        }
        assert!(optimal >= 10, "only {optimal} optimal cases");
        assert!(infeasible >= 2, "only {infeasible} infeasible cases");
    }

    #[test]
    fn backend_choice_does_not_change_the_answer() {
        let mut m = MilpModel::new(Variant::Full, false);
        m.add_var("b", VarKind::Binary, 0.0, 1.0);
        m.add_var("x", VarKind::Continuous, 0.0, 4.0);
        m.add_var("y", VarKind::Continuous, 0.0, 4.0);
        m.obj_add(0, 3.0);
        m.obj_add(1, 1.0);
        m.obj_add(2, 2.0);
        m.add_row("mix", [(1, 1.0), (2, 1.0), (0, 2.0)], Sense::Ge, 5.0);
        m.add_row("tie", [(1, 1.0), (2, -1.0)], Sense::Le, 1.0);
        let mut reports = Vec::new();
        for backend in [super::super::LpBackend::Embedded, super::super::LpBackend::Sparse] {
            let options = SolverOptions { backend, ..SolverOptions::default() };
            let r = solve_model(&m, &options);
            assert_eq!(r.status, Status::Optimal);
            reports.push(r);
        }
        assert!((reports[0].objective - reports[1].objective).abs() < 1e-7);
    }
}
