//! CSV, plot-script and warnings-sidecar writers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::{RunConfig, EV_PER_HARTREE};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// 17 significant digits, so every `f64` survives a round trip.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
        }
    }

    pub fn header(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{} [{}]", self.name, self.unit)
        }
    }
}

/// What the plot script draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    /// Rows sharing a value of this column form one curve.
    pub group: Option<String>,
    pub scatter: bool,
    pub log_y: bool,
}

/// Results of one grid point: its rows and the warnings raised computing it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointResult {
    pub label: String,
    pub rows: Vec<Vec<Cell>>,
    pub warnings: Vec<String>,
    /// A non-pole failure; the run exits with the runtime error code.
    pub failed: bool,
}

impl PointResult {
    /// Adds a warning unless this point already carries it.
    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub points: Vec<PointResult>,
    /// Warnings that concern the whole run rather than a grid point.
    pub global_warnings: Vec<String>,
    pub plot: PlotSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub csv: PathBuf,
    pub script: PathBuf,
    pub warnings: PathBuf,
    pub warning_count: usize,
}

pub fn header_block(cfg: &RunConfig) -> String {
    let mut s = String::new();
    writeln!(s, "# zrp {} task {}", env!("CARGO_PKG_VERSION"), cfg.task.name()).unwrap();
    writeln!(s, "# atomic units throughout; 1 hartree = {EV_PER_HARTREE} eV").unwrap();
    writeln!(s, "# resolved configuration:").unwrap();
    for line in cfg.resolved_toml().lines() {
        if line.is_empty() {
            s.push_str("#\n");
        } else {
            writeln!(s, "#   {line}").unwrap();
        }
    }
    s
}

pub fn render_csv(cfg: &RunConfig, table: &Table) -> String {
    let mut s = header_block(cfg);
    let names: Vec<String> = table.columns.iter().map(Column::header).collect();
    s.push_str(&names.join(","));
    s.push('\n');
    for p in &table.points {
        for row in &p.rows {
            debug_assert_eq!(row.len(), table.columns.len());
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
    }
    s
}

pub fn render_warnings(csv_name: &str, table: &Table) -> String {
    let mut s = format!("# warnings for {csv_name}\n");
    for w in &table.global_warnings {
        writeln!(s, "run: {w}").unwrap();
    }
    for (i, p) in table.points.iter().enumerate() {
        for w in &p.warnings {
            writeln!(s, "point {i} ({}): {w}", p.label).unwrap();
        }
    }
    s
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

pub fn render_script(csv_name: &str, table: &Table) -> String {
    let header = |name: &str| {
        table
            .columns
            .iter()
            .find(|c| c.name == name)
            .map(Column::header)
            .unwrap_or_else(|| name.to_string())
    };
    let y: Vec<String> = table.plot.y.iter().map(|c| py_str(&header(c))).collect();
    let group = table.plot.group.as_ref().map_or("None".to_string(), |g| py_str(&header(g)));
    format!(
        r##"#!/usr/bin/env python3
"""Plot {csv_name}. Needs matplotlib."""
import csv
import pathlib

import matplotlib.pyplot as plt

CSV = pathlib.Path(__file__).with_name({csv})
X = {x}
Y = [{y}]
GROUP = {group}
SCATTER = {scatter}
LOG_Y = {log_y}


def load():
    with open(CSV, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    header, body = rows[0], rows[1:]
    return {{name: [r[i] for r in body] for i, name in enumerate(header)}}


def number(s):
    try:
        return float(s)
    except ValueError:
        return float("nan")


def main():
    data = load()
    fig, ax = plt.subplots()
    groups = sorted(set(data[GROUP]), key=number) if GROUP else [None]
    for g in groups:
        keep = [i for i in range(len(data[X])) if g is None or data[GROUP][i] == g]
        xs = [number(data[X][i]) for i in keep]
        for col in Y:
            ys = [number(data[col][i]) for i in keep]
            label = col if g is None else f"{{col}}, {{GROUP}} = {{number(g):.6g}}"
            if SCATTER:
                ax.scatter(xs, ys, label=label)
            else:
                ax.plot(xs, ys, label=label)
    ax.set_xlabel(X)
    if LOG_Y:
        ax.set_yscale("log")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(CSV.with_suffix(".png"), dpi=150)


if __name__ == "__main__":
    main()
"##,
        csv = py_str(csv_name),
        x = py_str(&header(&table.plot.x)),
        y = y.join(", "),
        scatter = if table.plot.scatter { "True" } else { "False" },
        log_y = if table.plot.log_y { "True" } else { "False" },
    )
}

/// Writes `<prefix>.csv`, `<prefix>.py` and `<prefix>.warnings.txt`.
pub fn write_all(cfg: &RunConfig, table: &Table, dir: &Path) -> io::Result<Written> {
    fs::create_dir_all(dir)?;
    let prefix = &cfg.output.prefix;
    let csv_name = format!("{prefix}.csv");
    let csv = dir.join(&csv_name);
    let script = dir.join(format!("{prefix}.py"));
    let warnings = dir.join(format!("{prefix}.warnings.txt"));
    fs::write(&csv, render_csv(cfg, table))?;
    fs::write(&script, render_script(&csv_name, table))?;
    fs::write(&warnings, render_warnings(&csv_name, table))?;
    let warning_count = table.global_warnings.len() + table.points.iter().map(|p| p.warnings.len()).sum::<usize>();
    Ok(Written {
        csv,
        script,
        warnings,
        warning_count,
    })
}
