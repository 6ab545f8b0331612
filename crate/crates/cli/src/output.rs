//! CSV emission and read-back.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64`. Agents are 1-based in column names.
//!
//! `trajectory.csv`: `t`, then per agent `a{i}_b*` (translation), `a{i}_R{r}{c}`
//! (rotation, row-major), `a{i}_nu*`, `a{i}_Omega*` (body velocity), then
//! `lambda_{i}_{j}_{k}` and `phi_{i}_{j}_{k}` per constraint.

use std::path::Path;

use geofeas_core::auv::ControlSignal;
use geofeas_core::{ConstraintGraph, GroupElement, GroupKind, ProductElement, SystemState, Trajectory};
use nalgebra::{DMatrix, DVector};

use crate::{io_err, CliError};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn edge_tags(graph: &ConstraintGraph<f64>) -> Vec<String> {
    graph
        .edges()
        .iter()
        .map(|e| {
            let (i, j, k) = e.label();
            format!("{i}_{j}_{k}")
        })
        .collect()
}

pub fn trajectory_header(kind: GroupKind, agents: usize, graph: &ConstraintGraph<f64>) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let rs = kind.rotation_size();
    for a in 1..=agents {
        h.extend((1..=kind.translation_dim()).map(|c| format!("a{a}_b{c}")));
        for r in 1..=rs {
            h.extend((1..=rs).map(|c| format!("a{a}_R{r}{c}")));
        }
        h.extend((1..=kind.translation_coords().len()).map(|c| format!("a{a}_nu{c}")));
        h.extend((1..=kind.rotation_coords().len()).map(|c| format!("a{a}_Omega{c}")));
    }
    let tags = edge_tags(graph);
    h.extend(tags.iter().map(|t| format!("lambda_{t}")));
    h.extend(tags.iter().map(|t| format!("phi_{t}")));
    h
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_f64(*x))).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn push_state(row: &mut Vec<f64>, state: &SystemState<f64>) {
    let kind = state.g.kind();
    let n = kind.dim();
    let rs = kind.rotation_size();
    for (i, g) in state.g.agents().iter().enumerate() {
        row.extend(g.translation().iter());
        let m = g.matrix();
        for r in 0..rs {
            row.extend((0..rs).map(|c| m[(r, c)]));
        }
        row.extend(state.xi.rows(i * n, n).iter());
    }
}

pub fn write_trajectory(
    path: &Path,
    traj: &Trajectory<f64>,
    graph: &ConstraintGraph<f64>,
) -> Result<(), CliError> {
    let Some(first) = traj.records.first() else {
        return write_rows(path, &["t".to_string()], std::iter::empty());
    };
    let kind = first.state.g.kind();
    let header = trajectory_header(kind, first.state.g.len(), graph);
    let m = graph.constraint_count();
    let rows = traj.records.iter().map(|r| {
        let mut row = vec![r.state.time];
        push_state(&mut row, &r.state);
        if r.lambda.len() == m {
            row.extend(r.lambda.iter());
        } else {
            row.extend(std::iter::repeat(0.0).take(m));
        }
        row.extend(r.diagnostics.phi.iter());
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_diagnostics(
    path: &Path,
    traj: &Trajectory<f64>,
    graph: &ConstraintGraph<f64>,
) -> Result<(), CliError> {
    let mut header: Vec<String> = ["t", "energy", "max_abs_phi", "max_abs_phi_rate", "orthogonality_error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(edge_tags(graph).iter().map(|t| format!("phi_rate_{t}")));
    if let Some(first) = traj.records.first() {
        let n = first.state.g.kind().dim();
        for a in 1..=first.state.g.len() {
            header.extend((1..=n).map(|c| format!("a{a}_momentum{c}")));
        }
    }
    let amax = |v: &DVector<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rows = traj.records.iter().map(|r| {
        let d = &r.diagnostics;
        let mut row = vec![r.state.time, d.energy, amax(&d.phi), amax(&d.phi_rate), d.orthogonality_error];
        row.extend(d.phi_rate.iter());
        row.extend(d.spatial_momentum.iter());
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_controls(path: &Path, controls: &ControlSignal<f64>) -> Result<(), CliError> {
    let kind = controls.kind;
    let mut header = vec!["t".to_string()];
    for a in 1..=controls.agents() {
        header.extend((1..=kind.translation_coords().len()).map(|c| format!("a{a}_u{c}")));
        header.extend((1..=kind.rotation_coords().len()).map(|c| format!("a{a}_ubar{c}")));
    }
    let rows = controls.times.iter().zip(&controls.forces).map(|(t, f)| {
        let mut row = vec![*t];
        row.extend(f.iter());
        row
    });
    write_rows(path, &header, rows)
}

/// Parsed `trajectory.csv`.
#[derive(Debug, Clone)]
pub struct TrajectoryTable {
    pub states: Vec<SystemState<f64>>,
    pub lambda: Vec<DVector<f64>>,
    pub phi: Vec<DVector<f64>>,
}

/// Reads a trajectory written by [`write_trajectory`] for the given scenario shape.
pub fn read_trajectory(
    path: &Path,
    kind: GroupKind,
    agents: usize,
    graph: &ConstraintGraph<f64>,
) -> Result<TrajectoryTable, CliError> {
    let bad = |message: String| CliError::Csv {
        path: path.display().to_string(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let expected = trajectory_header(kind, agents, graph);
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    if header != expected {
        let first_diff = expected
            .iter()
            .zip(&header)
            .position(|(a, b)| a != b)
            .unwrap_or(expected.len().min(header.len()));
        return Err(bad(format!(
            "header does not match the scenario (column {} expected {:?}, found {:?})",
            first_diff + 1,
            expected.get(first_diff),
            header.get(first_diff)
        )));
    }
    let (n, t, rs) = (kind.dim(), kind.translation_dim(), kind.rotation_size());
    let size = kind.matrix_size();
    let m = graph.constraint_count();
    let mut table = TrajectoryTable {
        states: Vec::new(),
        lambda: Vec::new(),
        phi: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        let mut it = vals.into_iter();
        let time = it.next().unwrap_or_default();
        let mut agents_g = Vec::with_capacity(agents);
        let mut xi = DVector::zeros(n * agents);
        for a in 0..agents {
            let mut mat = DMatrix::identity(size, size);
            for c in 0..t {
                mat[(c, size - 1)] = it.next().unwrap_or_default();
            }
            for rr in 0..rs {
                for cc in 0..rs {
                    mat[(rr, cc)] = it.next().unwrap_or_default();
                }
            }
            for c in 0..n {
                xi[a * n + c] = it.next().unwrap_or_default();
            }
            let g = GroupElement::from_matrix(kind, mat)
                .map_err(|e| bad(format!("row {}, agent {}: {e}", line + 2, a + 1)))?;
            agents_g.push(g);
        }
        let lambda: Vec<f64> = it.by_ref().take(m).collect();
        let phi: Vec<f64> = it.collect();
        let g = ProductElement::new(agents_g).map_err(|e| bad(e.to_string()))?;
        table.states.push(SystemState { time, g, xi });
        table.lambda.push(DVector::from_vec(lambda));
        table.phi.push(DVector::from_vec(phi));
    }
    Ok(table)
}
