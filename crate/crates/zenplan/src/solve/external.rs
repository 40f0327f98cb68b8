//! Adapter for running an external MILP solver as a subprocess.
//!
//! The command is an argv template in which `{mps}` expands to the path of
//! the exported model and `{sol}` to the path the solver must write its
//! answer to. The solution file format is one variable per line,
//! whitespace-separated: `name value`. Lines starting with `#` are
//! comments; variables absent from the file default to 0; auxiliary
//! `zsc_*` binaries introduced by the MPS reformulation are accepted and
//! dropped. The returned assignment is audited against the model —
//! a file that fails the audit yields [`Status::Numerical`], never a
//! false optimum. The external solver's own bound is unknown here, so
//! `gap` is NaN.

use super::{check_solution, mps, SolveReport, Status};
use crate::milp::MilpModel;
use std::fmt;
use std::io;
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    /// argv template, e.g. `["highs", "--solution-file", "{sol}", "{mps}"]`.
    pub command: Vec<String>,
}

#[derive(Debug)]
pub enum ExternalError {
    Io(io::Error),
    EmptyCommand,
    Exit { status: String },
    MissingSolution(PathBuf),
    Parse { line: usize, text: String },
    UnknownVariable(String),
}

impl fmt::Display for ExternalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalError::Io(e) => write!(f, "i/o error: {e}"),
            ExternalError::EmptyCommand => write!(f, "external solver command is empty"),
            ExternalError::Exit { status } => {
                write!(f, "external solver failed: {status}")
            }
            ExternalError::MissingSolution(p) => {
                write!(f, "external solver wrote no solution file at {}", p.display())
            }
            ExternalError::Parse { line, text } => {
                write!(f, "solution file line {line} is not `name value`: {text:?}")
            }
            ExternalError::UnknownVariable(name) => {
                write!(f, "solution file names unknown variable {name:?}")
            }
        }
    }
}

impl std::error::Error for ExternalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ExternalError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for ExternalError {
    fn from(e: io::Error) -> Self {
        ExternalError::Io(e)
    }
}

static SCRATCH_SEQ: AtomicU64 = AtomicU64::new(0);

impl ExternalSolver {
    pub fn new(command: Vec<String>) -> Self {
        ExternalSolver { command }
    }

    pub fn solve(
        &self,
        model: &MilpModel,
        feas_tol: f64,
        int_tol: f64,
    ) -> Result<SolveReport, ExternalError> {
        if self.command.is_empty() {
            return Err(ExternalError::EmptyCommand);
        }
        let t0 = Instant::now();
        let dir = std::env::temp_dir().join(format!(
            "zenplan-ext-{}-{}",
            std::process::id(),
            SCRATCH_SEQ.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir)?;
        let result = self.run_in(&dir, model, feas_tol, int_tol, t0);
        let _ = std::fs::remove_dir_all(&dir);
        result
    }

    fn run_in(
        &self,
        dir: &std::path::Path,
        model: &MilpModel,
        feas_tol: f64,
        int_tol: f64,
        t0: Instant,
    ) -> Result<SolveReport, ExternalError> {
        let mps_path = dir.join("model.mps");
        let sol_path = dir.join("solution.txt");
        mps::export_mps(model, &mps_path)?;

        let argv: Vec<String> = self
            .command
            .iter()
            .map(|arg| {
                arg.replace("{mps}", &mps_path.to_string_lossy())
                    .replace("{sol}", &sol_path.to_string_lossy())
            })
            .collect();
        let status = Command::new(&argv[0]).args(&argv[1..]).status()?;
        if !status.success() {
            return Err(ExternalError::Exit { status: status.to_string() });
        }
        if !sol_path.exists() {
            return Err(ExternalError::MissingSolution(sol_path));
        }
        let text = std::fs::read_to_string(&sol_path)?;

        let mut x = vec![0.0; model.n_vars()];
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let (Some(name), Some(value)) = (tokens.next(), tokens.next()) else {
                return Err(ExternalError::Parse { line: idx + 1, text: line.to_string() });
            };
            let value: f64 = value
                .parse()
                .map_err(|_| ExternalError::Parse { line: idx + 1, text: line.to_string() })?;
            match model.col(name) {
                Some(j) => x[j] = value,
                // Reformulation artifacts are expected, anything else is not.
                None if name.starts_with("zsc_") => {}
                None => return Err(ExternalError::UnknownVariable(name.to_string())),
            }
        }

        let audit = check_solution(model, &x, feas_tol, int_tol);
        let objective = model.objective_value(&x);
        Ok(SolveReport {
            status: if audit.is_empty() { Status::Optimal } else { Status::Numerical },
            objective,
            values: x,
            runtime: t0.elapsed().as_secs_f64(),
            nodes: 0,
            gap: f64::NAN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarKind, Variant};

    fn toy() -> MilpModel {
        // min -x - y  s.t. x + y <= 3, x <= 1  (optimum x=1, y=2, obj -3)
        let mut m = MilpModel::new(Variant::Full, true);
        m.add_var("x", VarKind::Continuous, 0.0, 1.0);
        m.add_var("y", VarKind::Continuous, 0.0, f64::INFINITY);
        m.obj_add(0, -1.0);
        m.obj_add(1, -1.0);
        m.add_row("cap", [(0, 1.0), (1, 1.0)], Sense::Le, 3.0);
        m
    }

    fn script(body: &str) -> ExternalSolver {
        ExternalSolver::new(vec!["sh".into(), "-c".into(), body.into()])
    }

    #[test]
    fn parses_solution_and_audits_it() {
        let solver = script("test -s {mps} && printf 'x 1\\ny 2\\n' > {sol}");
        let r = solver.solve(&toy(), 1e-6, 1e-5).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective + 3.0).abs() < 1e-12);
        assert_eq!(r.values, vec![1.0, 2.0]);
        assert!(r.gap.is_nan());
    }

    #[test]
    fn missing_variables_default_to_zero_and_comments_skip() {
        let solver = script("printf '# by hand\\nx 0.5\\n\\n' > {sol}");
        let r = solver.solve(&toy(), 1e-6, 1e-5).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective + 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_answers_are_not_reported_optimal() {
        let solver = script("printf 'x 5\\ny 5\\n' > {sol}");
        let r = solver.solve(&toy(), 1e-6, 1e-5).unwrap();
        assert_eq!(r.status, Status::Numerical);
    }

    #[test]
    fn failure_modes_surface_as_errors() {
        let exit = script("exit 3").solve(&toy(), 1e-6, 1e-5);
        assert!(matches!(exit, Err(ExternalError::Exit { .. })));

        let silent = script("true").solve(&toy(), 1e-6, 1e-5);
        assert!(matches!(silent, Err(ExternalError::MissingSolution(_))));

        let junk = script("printf 'x\\n' > {sol}").solve(&toy(), 1e-6, 1e-5);
        assert!(matches!(junk, Err(ExternalError::Parse { line: 1, .. })));

        let alien = script("printf 'ghost 1\\n' > {sol}").solve(&toy(), 1e-6, 1e-5);
        assert!(matches!(alien, Err(ExternalError::UnknownVariable(_))));
    }
}
