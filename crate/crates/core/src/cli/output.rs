//! CSV artifacts.

use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::solver::{SolveOutput, Snapshot};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
}

impl Cell {
    /// Seventeen significant digits, enough to round-trip every `f64`.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
        }
    }
}

/// A header row plus uniform data rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    if let Some(bad) = table.rows.iter().find(|r| r.len() != table.header.len()) {
        return Err(Error::shape("csv row", table.header.len(), bad.len()));
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| into_io(path, e))?;
    writer.write_record(&table.header).map_err(|e| into_io(path, e))?;
    for row in &table.rows {
        writer
            .write_record(row.iter().map(Cell::render))
            .map_err(|e| into_io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn into_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn floats(values: &[f64]) -> impl Iterator<Item = Cell> + '_ {
    values.iter().map(|&v| Cell::Float(v))
}

pub fn history_table(records: &[DiagnosticsRecord], q_eq: usize, q_ineq: usize) -> Table {
    let mut header: Vec<String> = [
        "tau",
        "J",
        "V",
        "t_f",
        "norm_e_x0",
        "norm_e_f_int",
        "norm_g_E",
        "norm_g_I_violated",
        "norm_pu_tc",
        "abs_ptf_tc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(numbered("pi_E", q_eq));
    header.extend(numbered("pi_I", q_ineq));
    header.extend(numbered("g_I", q_ineq));
    header.push("active_set".into());
    header.push("rhs_norm".into());
    let rows = records
        .iter()
        .map(|r| {
            let mut row: Vec<Cell> = floats(&[
                r.tau,
                r.j,
                r.v,
                r.tf,
                r.norm_e_x0,
                r.norm_e_f_int,
                r.norm_g_e,
                r.norm_g_i_violated,
                r.norm_pu_tc,
                r.abs_ptf_tc,
            ])
            .collect();
            row.extend(floats(&r.pi_e));
            row.extend(floats(&r.pi_i));
            row.extend(floats(&r.g_i));
            row.push(Cell::Int(r.active_set));
            row.push(Cell::Float(r.rhs_norm));
            row
        })
        .collect();
    Table { header, rows }
}

pub fn snapshot_table(snapshot: &Snapshot, n: usize, m: usize) -> Table {
    let mut header = vec!["t".to_string()];
    header.extend(numbered("x", n));
    header.extend(numbered("u", m));
    header.extend(numbered("xdot", n));
    header.push("e_f_norm".into());
    let state = &snapshot.state;
    let rows = (0..state.nodes())
        .map(|i| {
            let mut row = vec![Cell::Float(snapshot.t[i])];
            row.extend(floats(state.x[i].as_slice()));
            row.extend(floats(state.u[i].as_slice()));
            row.extend(floats(snapshot.xdot[i].as_slice()));
            row.push(Cell::Float(snapshot.e_f_norm[i]));
            row
        })
        .collect();
    Table { header, rows }
}

pub fn summary_table(output: &SolveOutput, q_eq: usize, q_ineq: usize) -> Table {
    let mut header: Vec<String> = ["tau", "J", "t_f"].iter().map(|s| s.to_string()).collect();
    header.extend(numbered("pi_E", q_eq));
    header.extend(numbered("pi_I", q_ineq));
    header.extend(
        [
            "norm_pu_tc",
            "abs_ptf_tc",
            "norm_e_x0",
            "norm_e_f_int",
            "norm_g_E",
            "norm_g_I_violated",
            "rhs_norm",
            "active_set",
            "accepted_steps",
            "rejected_steps",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let rows = output
        .history
        .last()
        .map(|r| {
            let mut row: Vec<Cell> = floats(&[r.tau, r.j, r.tf]).collect();
            row.extend(floats(&r.pi_e));
            row.extend(floats(&r.pi_i));
            row.extend(floats(&[
                r.norm_pu_tc,
                r.abs_ptf_tc,
                r.norm_e_x0,
                r.norm_e_f_int,
                r.norm_g_e,
                r.norm_g_i_violated,
                r.rhs_norm,
            ]));
            row.push(Cell::Int(r.active_set));
            row.push(Cell::Int(output.accepted_steps as u64));
            row.push(Cell::Int(output.rejected_steps as u64));
            row
        })
        .into_iter()
        .collect();
    Table { header, rows }
}

/// `snapshot_<tau>.csv` with the shortest decimal form of `tau`.
pub fn snapshot_file_name(tau: f64) -> String {
    format!("snapshot_{tau}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_back(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
        let mut r = csv::Reader::from_path(path).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect();
        (header, rows)
    }

    #[test]
    fn empty_and_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let mut table = Table {
            header: vec!["a".into(), "b".into()],
            rows: vec![],
        };
        emit_csv(&table, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");

        table.rows.push(vec![Cell::Float(1.5), Cell::Int(3)]);
        emit_csv(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        assert_eq!(text, "a,b\n1.5000000000000000e0,3\n");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let values = [0.1, 1.0 / 3.0, -2.0e-300, f64::MAX, f64::MIN_POSITIVE, 5e-324, 123456.789, -0.0];
        let table = Table {
            header: (0..values.len()).map(|i| format!("c{i}")).collect(),
            rows: vec![values.iter().map(|&v| Cell::Float(v)).collect()],
        };
        emit_csv(&table, &path).unwrap();
        let (_, rows) = read_back(&path);
        for (s, v) in rows[0].iter().zip(values) {
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn ragged_rows_and_bad_paths() {
        let dir = tempfile::tempdir().unwrap();
        let table = Table {
            header: vec!["a".into()],
            rows: vec![vec![Cell::Int(1), Cell::Int(2)]],
        };
        assert!(emit_csv(&table, &dir.path().join("x.csv")).is_err());
        let ok = Table {
            header: vec!["a".into()],
            rows: vec![],
        };
        let err = emit_csv(&ok, &dir.path().join("missing/dir/x.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn snapshot_names() {
        assert_eq!(snapshot_file_name(0.0), "snapshot_0.csv");
        assert_eq!(snapshot_file_name(300.0), "snapshot_300.csv");
        assert_eq!(snapshot_file_name(12.5), "snapshot_12.5.csv");
    }
}
