//! CSV reading and writing against declared column layouts.
//!
//! Floats are written with 17 significant digits so that reading a file
//! back reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::diffusion::{SimGrid, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::hawkes::{EventTimes, IntensityPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Float,
    Int,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<(String, ColumnType)>,
}

impl Schema {
    pub fn new(columns: &[(&str, ColumnType)]) -> Self {
        Schema {
            columns: columns.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
        }
    }

    /// All columns are floats.
    pub fn floats(names: &[&str]) -> Self {
        Schema {
            columns: names.iter().map(|n| (n.to_string(), ColumnType::Float)).collect(),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.0.as_str()).collect()
    }

    pub fn events() -> Self {
        Self::floats(&["t"])
    }

    pub fn intensity() -> Self {
        Self::floats(&["t", "lambda"])
    }

    pub fn trajectory() -> Self {
        Self::floats(&["t", "x", "lambda"])
    }

    pub fn points() -> Self {
        Self::floats(&["x", "y"])
    }

    pub fn estimates() -> Self {
        Self::floats(&["x", "y", "estimate"])
    }

    pub fn sweep() -> Self {
        Self::new(&[
            ("h1", ColumnType::Float),
            ("h2", ColumnType::Float),
            ("variance", ColumnType::Float),
            ("mean", ColumnType::Float),
            ("n_reps", ColumnType::Int),
        ])
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_cell(v: f64, ty: ColumnType, column: &str) -> Result<String> {
    match ty {
        ColumnType::Float => Ok(format_float(v)),
        ColumnType::Int => {
            if v.fract() != 0.0 || !v.is_finite() {
                return Err(Error::Schema {
                    column: column.to_string(),
                    reason: format!("{v} is not an integer"),
                });
            }
            Ok(format!("{}", v as i64))
        }
    }
}

/// Writes a header row followed by `rows`.
pub fn write_csv_to<W: Write>(out: W, schema: &Schema, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.names())?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != schema.columns.len() {
            return Err(invalid(format!(
                "row {i} has {} values, schema has {} columns",
                row.len(),
                schema.columns.len()
            )));
        }
        let cells = row
            .iter()
            .zip(&schema.columns)
            .map(|(v, (name, ty))| format_cell(*v, *ty, name))
            .collect::<Result<Vec<_>>>()?;
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, schema: &Schema, rows: &[Vec<f64>]) -> Result<()> {
    write_csv_to(File::create(path)?, schema, rows)
}

/// Reads rows after checking the header matches `schema` exactly.
pub fn read_csv_from<R: Read>(input: R, schema: &Schema) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    let expected = schema.names();
    for (i, name) in expected.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == *name => {}
            Some(h) => {
                return Err(Error::Schema {
                    column: name.to_string(),
                    reason: format!("expected header `{name}` at position {}, found `{h}`", i + 1),
                })
            }
            None => {
                return Err(Error::Schema {
                    column: name.to_string(),
                    reason: "missing from header".into(),
                })
            }
        }
    }
    if header.len() > expected.len() {
        return Err(Error::Schema {
            column: header[expected.len()].to_string(),
            reason: "unexpected extra column".into(),
        });
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != expected.len() {
            return Err(invalid(format!(
                "data row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                expected.len()
            )));
        }
        let mut row = Vec::with_capacity(expected.len());
        for (cell, (name, ty)) in record.iter().zip(&schema.columns) {
            let parsed = match ty {
                ColumnType::Float => cell.parse::<f64>().ok(),
                ColumnType::Int => cell.parse::<i64>().ok().map(|v| v as f64),
            };
            row.push(parsed.ok_or_else(|| Error::Schema {
                column: name.clone(),
                reason: format!("cannot parse `{cell}` on data row {}", line + 1),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Vec<f64>>> {
    read_csv_from(File::open(path)?, schema)
}

pub fn write_events(path: impl AsRef<Path>, events: &EventTimes) -> Result<()> {
    let rows: Vec<Vec<f64>> = events.times().iter().map(|&t| vec![t]).collect();
    write_csv(path, &Schema::events(), &rows)
}

/// Events from a `t` column; the horizon is supplied by the caller.
pub fn read_events(path: impl AsRef<Path>, horizon: f64) -> Result<EventTimes> {
    let rows = read_csv(path, &Schema::events())?;
    EventTimes::new(rows.into_iter().map(|r| r[0]).collect(), horizon)
}

pub fn write_intensity(path: impl AsRef<Path>, path_values: &IntensityPath) -> Result<()> {
    let rows: Vec<Vec<f64>> = path_values
        .grid
        .iter()
        .zip(&path_values.values)
        .map(|(&t, &l)| vec![t, l])
        .collect();
    write_csv(path, &Schema::intensity(), &rows)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..=traj.grid.n_steps())
        .map(|k| vec![traj.grid.time(k), traj.x_values[k], traj.lambda_values[k]])
        .collect();
    write_csv(path, &Schema::trajectory(), &rows)
}

/// Reads a `t,x,lambda` file on a uniform grid starting at 0. Event times are
/// not part of the file; pass them if known.
pub fn read_trajectory(path: impl AsRef<Path>, events: Option<EventTimes>) -> Result<Trajectory> {
    let rows = read_csv(path, &Schema::trajectory())?;
    trajectory_from_rows(&rows, events)
}

pub(crate) fn trajectory_from_rows(rows: &[Vec<f64>], events: Option<EventTimes>) -> Result<Trajectory> {
    if rows.len() < 2 {
        return Err(invalid("trajectory file needs at least two rows"));
    }
    if rows[0][0] != 0.0 {
        return Err(invalid(format!("trajectory must start at t = 0 (got {})", rows[0][0])));
    }
    let n = rows.len() - 1;
    let step = rows[1][0];
    let grid = SimGrid::from_steps(step, n)?;
    let tol = 1e-9 * grid.horizon().max(1.0);
    for (k, row) in rows.iter().enumerate() {
        if (row[0] - grid.time(k)).abs() > tol {
            return Err(Error::Schema {
                column: "t".into(),
                reason: format!("row {} is off the uniform grid of step {step}", k + 1),
            });
        }
    }
    let events = match events {
        Some(e) => e,
        None => EventTimes::empty(grid.horizon())?,
    };
    let xs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let ls: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let (x0, l0) = (xs[0], ls[0]);
    Trajectory::new(grid, xs, ls, events, x0, l0)
}
