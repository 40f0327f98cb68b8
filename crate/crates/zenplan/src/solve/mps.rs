//! Deterministic free-format MPS writer.
//!
//! Rows and columns appear in model order and numbers print via `Display`,
//! so the same model always produces byte-identical output. Binary
//! variables are declared through INTORG/INTEND marker pairs plus BV
//! bounds. Semi-continuous variables have no portable MPS encoding, so
//! each one is reformulated at export time: the variable becomes plain
//! continuous on [0, ub] and gains an auxiliary binary `zsc_<name>` with
//!
//!   scup_<name>:  x - ub * z <= 0
//!   sclo_<name>:  x - lo * z >= 0
//!
//! which makes z = 0 force x = 0 and z = 1 force lo <= x <= ub.

use crate::milp::{MilpModel, Sense, VarKind};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub fn export_mps(model: &MilpModel, path: impl AsRef<Path>) -> io::Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_mps(model, &mut w)?;
    w.flush()
}

pub fn write_mps(model: &MilpModel, w: &mut impl Write) -> io::Result<()> {
    let n = model.n_vars();
    let semis: Vec<(usize, f64)> = model
        .variables
        .iter()
        .enumerate()
        .filter_map(|(j, v)| match v.kind {
            VarKind::SemiContinuous { lo } => Some((j, lo)),
            _ => None,
        })
        .collect();

    writeln!(w, "NAME          ZENPLAN")?;

    writeln!(w, "ROWS")?;
    writeln!(w, " N  COST")?;
    for row in &model.rows {
        let tag = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(w, " {}  {}", tag, row.name)?;
    }
    for &(j, _) in &semis {
        let name = &model.variables[j].name;
        writeln!(w, " L  scup_{name}")?;
        writeln!(w, " G  sclo_{name}")?;
    }

    // Per-column row entries, ascending row order within each column.
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            col_rows[j].push((i, v));
        }
    }
    let mut obj = vec![0.0; n];
    for &(j, v) in &model.objective {
        obj[j] = v;
    }

    writeln!(w, "COLUMNS")?;
    let mut in_int = false;
    let mut markers = 0usize;
    for (j, var) in model.variables.iter().enumerate() {
        let integer = var.kind == VarKind::Binary;
        if integer != in_int {
            let kind = if integer { "'INTORG'" } else { "'INTEND'" };
            writeln!(w, "    M{markers}  'MARKER'  {kind}")?;
            markers += 1;
            in_int = integer;
        }
        let mut wrote = false;
        if obj[j] != 0.0 {
            writeln!(w, "    {}  COST  {}", var.name, obj[j])?;
            wrote = true;
        }
        for &(i, v) in &col_rows[j] {
            writeln!(w, "    {}  {}  {}", var.name, model.rows[i].name, v)?;
            wrote = true;
        }
        if let VarKind::SemiContinuous { .. } = var.kind {
            writeln!(w, "    {}  scup_{}  1", var.name, var.name)?;
            writeln!(w, "    {}  sclo_{}  1", var.name, var.name)?;
            wrote = true;
        }
        if !wrote {
            // A column no row or objective touches still needs an entry.
            writeln!(w, "    {}  COST  0", var.name)?;
        }
    }
    if !in_int {
        writeln!(w, "    M{markers}  'MARKER'  'INTORG'")?;
        markers += 1;
        in_int = true;
    }
    for &(j, lo) in &semis {
        let var = &model.variables[j];
        debug_assert!(var.ub.is_finite(), "semi-continuous {} needs a finite ub", var.name);
        writeln!(w, "    zsc_{}  scup_{}  {}", var.name, var.name, -var.ub)?;
        writeln!(w, "    zsc_{}  sclo_{}  {}", var.name, var.name, -lo)?;
    }
    if in_int {
        writeln!(w, "    M{markers}  'MARKER'  'INTEND'")?;
    }

    writeln!(w, "RHS")?;
    if model.obj_constant != 0.0 {
        // Convention: objective constant enters as a negative rhs on COST.
        writeln!(w, "    RHS  COST  {}", -model.obj_constant)?;
    }
    for row in &model.rows {
        if row.rhs != 0.0 {
            writeln!(w, "    RHS  {}  {}", row.name, row.rhs)?;
        }
    }

    writeln!(w, "RANGES")?;

    writeln!(w, "BOUNDS")?;
    for var in &model.variables {
        match var.kind {
            VarKind::Binary => {
                writeln!(w, " BV BND  {}", var.name)?;
            }
            VarKind::SemiContinuous { .. } => {
                // Reformulated domain is [0, ub]; the sclo row carries lo.
                if var.ub.is_finite() {
                    writeln!(w, " UP BND  {}  {}", var.name, var.ub)?;
                }
            }
            VarKind::Continuous => {
                if var.lb == var.ub {
                    writeln!(w, " FX BND  {}  {}", var.name, var.lb)?;
                    continue;
                }
                if var.lb == f64::NEG_INFINITY {
                    writeln!(w, " MI BND  {}", var.name)?;
                } else if var.lb != 0.0 {
                    writeln!(w, " LO BND  {}  {}", var.name, var.lb)?;
                }
                if var.ub.is_finite() {
                    writeln!(w, " UP BND  {}  {}", var.name, var.ub)?;
                }
            }
        }
    }
    for &(j, _) in &semis {
        writeln!(w, " BV BND  zsc_{}", model.variables[j].name)?;
    }

    writeln!(w, "ENDATA")?;
    Ok(())
}
