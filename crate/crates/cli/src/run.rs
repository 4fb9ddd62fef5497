//! Task dispatch. Every task maps its grid points to [`PointResult`]s on a
//! worker pool; `collect` keeps grid order whatever the completion order.

use std::f64::consts::PI;
use std::fmt;
use std::io;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use zrp::channels::{Channel, ChannelSet, Momenta};
use zrp::field::AmplitudeField;
use zrp::multicenter::{CenterSpec, MultiCenterField};
use zrp::one_center::{build_one_center_f, InteractionW};
use zrp::specfun::AngularIndex;
use zrp::twocenter::{find_poles, fixed_nuclei_ics, general_two_center_amplitude, potential_curves, ComplexRect};
use zrp::vibro::{TransitionSpec, VibroCalc};
use zrp::ZrpError;

use crate::config::{GridQuantity, RunConfig, Task};
use crate::output::{fmt_float, write_all, Cell, Column, PlotSpec, PointResult, Table, Written};

#[derive(Debug)]
pub enum RunError {
    Io(io::Error),
    /// The validated config could not be turned into library objects.
    Setup(ZrpError),
    Threads(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Setup(e) => write!(f, "{e}"),
            RunError::Threads(e) => write!(f, "cannot start worker pool: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ZrpError> for RunError {
    fn from(e: ZrpError) -> Self {
        RunError::Setup(e)
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub written: Written,
    pub table: Table,
    /// Grid points that failed for a reason other than a pole.
    pub failed_points: usize,
}

/// Computes the task's table and writes the output files under `dir`.
pub fn run(cfg: &RunConfig, dir: &Path, threads: Option<usize>) -> Result<Outcome, RunError> {
    let table = compute(cfg, threads)?;
    let written = write_all(cfg, &table, dir).map_err(RunError::Io)?;
    let failed_points = table.points.iter().filter(|p| p.failed).count();
    Ok(Outcome {
        written,
        table,
        failed_points,
    })
}

pub fn compute(cfg: &RunConfig, threads: Option<usize>) -> Result<Table, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Threads(e.to_string()))?;
    pool.install(|| match cfg.task {
        Task::OneCenter => one_center(cfg),
        Task::TwoCenterIcs => two_center_ics(cfg),
        Task::TwoCenterDcs => two_center_dcs(cfg),
        Task::Poles => poles(cfg),
        Task::Curves => curves(cfg),
        Task::Multicenter => multicenter(cfg),
    })
}

/// Records a per-point failure. Poles only warn; anything else also marks
/// the point failed.
fn record(p: &mut PointResult, e: &ZrpError) {
    match e {
        ZrpError::Pole { .. } | ZrpError::Singular { .. } => p.warn(format!("pole on the grid point: {e}")),
        _ => {
            p.warn(format!("error: {e}"));
            p.failed = true;
        }
    }
}

struct GridPoint {
    /// Value in the grid's own unit.
    x: f64,
    k0: f64,
}

fn grid_points(cfg: &RunConfig) -> Vec<GridPoint> {
    let g = cfg.grid.as_ref().expect("validated grid");
    g.points().into_iter().map(|x| GridPoint { x, k0: cfg.k0_at(x) }).collect()
}

fn grid_columns(cfg: &RunConfig) -> Vec<Column> {
    vec![
        Column::new("energy", cfg.units.label()),
        Column::new("k0", "bohr^-1"),
    ]
}

fn grid_cells(cfg: &RunConfig, p: &GridPoint) -> Vec<Cell> {
    let energy = match cfg.grid.as_ref().unwrap().quantity {
        GridQuantity::Energy => p.x,
        GridQuantity::Momentum => cfg.units.from_hartree(0.5 * p.k0 * p.k0),
    };
    vec![Cell::Num(energy), Cell::Num(p.k0)]
}

fn point_label(cfg: &RunConfig, p: &GridPoint) -> String {
    match cfg.grid.as_ref().unwrap().quantity {
        GridQuantity::Energy => format!("E = {} {}", fmt_float(p.x), cfg.units.label()),
        GridQuantity::Momentum => format!("k0 = {} bohr^-1", fmt_float(p.x)),
    }
}

fn new_point(cfg: &RunConfig, p: &GridPoint) -> PointResult {
    PointResult {
        label: point_label(cfg, p),
        ..Default::default()
    }
}

fn nan_row(prefix: Vec<Cell>, width: usize) -> Vec<Cell> {
    let mut row = prefix;
    row.resize(width, Cell::Num(f64::NAN));
    row
}

fn direction(theta_deg: f64, phi_deg: f64) -> Vector3<f64> {
    let (t, p) = (theta_deg.to_radians(), phi_deg.to_radians());
    Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
}

fn channel_set(cfg: &RunConfig) -> Result<ChannelSet, ZrpError> {
    let channels = cfg
        .channel
        .iter()
        .map(|c| Channel::new(c.label.clone(), cfg.units.to_hartree(c.energy), AngularIndex::new(c.l, c.m)?, c.eta))
        .collect::<Result<Vec<_>, _>>()?;
    ChannelSet::new(channels)
}

fn interaction(cfg: &RunConfig, w: &[Vec<f64>]) -> Result<InteractionW, ZrpError> {
    let flat: Vec<f64> = w.iter().flatten().copied().collect();
    InteractionW::real(&flat, cfg.channel.iter().map(|c| c.l).collect())
}

/// Outgoing flux factor `k_n/k₀`, zero for a closed channel.
fn flux(mom: &Momenta, n: usize) -> f64 {
    if mom.is_open(n) {
        mom.k()[n].re / mom.k0().re
    } else {
        0.0
    }
}

fn one_center(cfg: &RunConfig) -> Result<Table, RunError> {
    let cs = channel_set(cfg)?;
    let w = interaction(cfg, &cfg.interaction.as_ref().unwrap().w)?;
    let mut columns = grid_columns(cfg);
    let l0 = cfg.channel[0].l;
    for c in &cfg.channel {
        let unit = format!("bohr^{}", c.l + l0 + 1);
        columns.push(Column::new(format!("re_F_{}", c.label), unit.clone()));
        columns.push(Column::new(format!("im_F_{}", c.label), unit));
        columns.push(Column::new(format!("sigma_{}", c.label), "bohr^2"));
    }
    let width = columns.len();
    let points: Vec<PointResult> = grid_points(cfg)
        .par_iter()
        .map(|g| {
            let mut p = new_point(cfg, g);
            let res = Momenta::compute(&cs, g.k0).and_then(|mom| Ok((build_one_center_f(&w, &mom)?, mom)));
            match res {
                Ok((f, mom)) => {
                    let mut row = grid_cells(cfg, g);
                    for n in 0..cs.len() {
                        let z = f.f[(n, 0)];
                        row.push(Cell::Num(z.re));
                        row.push(Cell::Num(z.im));
                        // orientation average of |4π Y F Y*|² over incidence
                        row.push(Cell::Num(4.0 * PI * flux(&mom, n) * z.norm_sqr()));
                    }
                    p.rows.push(row);
                }
                Err(e) => {
                    record(&mut p, &e);
                    p.rows.push(nan_row(grid_cells(cfg, g), width));
                }
            }
            p
        })
        .collect();
    let y = cfg.channel.iter().map(|c| format!("sigma_{}", c.label)).collect();
    Ok(Table {
        columns,
        points,
        global_warnings: Vec::new(),
        plot: PlotSpec {
            x: "energy".into(),
            y,
            group: None,
            scatter: false,
            log_y: false,
        },
    })
}

fn vib_warnings(cfg: &RunConfig) -> Vec<String> {
    cfg.vib_model().and_then(|vm| vm.validity_warning()).into_iter().collect()
}

fn two_center_ics(cfg: &RunConfig) -> Result<Table, RunError> {
    let mc = cfg.model.as_ref().unwrap();
    let model = mc.model();
    let e1 = cfg.units.to_hartree(mc.excitation);
    let cs = model.channel_set(e1)?;
    let mut columns = grid_columns(cfg);
    let vib = cfg.vib.as_ref();
    match vib {
        Some(v) => {
            for lv in &v.v {
                columns.push(Column::new(format!("ics_v{lv}"), "bohr^2"));
            }
            if v.closure {
                columns.push(Column::new("ics_closure", "bohr^2"));
            }
        }
        None => {
            columns.push(Column::new("ics_elastic", "bohr^2"));
            columns.push(Column::new("ics_excitation", "bohr^2"));
        }
    }
    let width = columns.len();
    let vm = cfg.vib_model();
    let mode = cfg.mode.momentum_mode();
    let points: Vec<PointResult> = grid_points(cfg)
        .par_iter()
        .map(|g| {
            let mut p = new_point(cfg, g);
            let mut row = grid_cells(cfg, g);
            match (vib, vm.as_ref()) {
                (Some(v), Some(vm)) => {
                    let calc = Momenta::compute(&cs, g.k0).and_then(|mom| VibroCalc::new(&model, vm, &mom, mode));
                    match calc {
                        Ok(calc) => {
                            for &lv in &v.v {
                                let value = TransitionSpec::new(&model, v.n, lv, v.v0)
                                    .and_then(|t| calc.transition(&t))
                                    .and_then(|d| {
                                        for w in d.warnings() {
                                            p.warn(format!("v = {lv}: {w}"));
                                        }
                                        d.ics()
                                    });
                                row.push(Cell::Num(cross_section(&mut p, value)));
                            }
                            if v.closure {
                                row.push(Cell::Num(cross_section(&mut p, calc.ics_closure(v.n, v.v0))));
                            }
                        }
                        Err(e) => {
                            record(&mut p, &e);
                            row = nan_row(row, width);
                        }
                    }
                }
                _ => match fixed_nuclei_ics(&model, e1, g.k0) {
                    Ok(s) => row.extend(s.iter().map(|&x| Cell::Num(x))),
                    Err(e) => {
                        record(&mut p, &e);
                        row = nan_row(row, width);
                    }
                },
            }
            p.rows.push(row);
            p
        })
        .collect();
    let y = columns[2..].iter().map(|c| c.name.clone()).collect();
    Ok(Table {
        columns,
        points,
        global_warnings: vib_warnings(cfg),
        plot: PlotSpec {
            x: "energy".into(),
            y,
            group: None,
            scatter: false,
            log_y: false,
        },
    })
}

/// A closed final channel contributes zero; other failures give NaN.
fn cross_section(p: &mut PointResult, value: Result<f64, ZrpError>) -> f64 {
    match value {
        Ok(x) => x,
        Err(ZrpError::ClosedChannel { .. }) => 0.0,
        Err(e) => {
            record(p, &e);
            f64::NAN
        }
    }
}

fn two_center_dcs(cfg: &RunConfig) -> Result<Table, RunError> {
    let mc = cfg.model.as_ref().unwrap();
    let model = mc.model();
    let e1 = cfg.units.to_hartree(mc.excitation);
    let cs = model.channel_set(e1)?;
    let w = model.interaction()?;
    let angles = cfg.angles.as_ref().unwrap();
    let mut columns = grid_columns(cfg);
    columns.push(Column::new("theta", "deg"));
    let vib = cfg.vib.as_ref();
    match vib {
        Some(v) => {
            for lv in &v.v {
                columns.push(Column::new(format!("dcs_v{lv}"), "bohr^2/sr"));
            }
        }
        None => {
            columns.push(Column::new("dcs_elastic", "bohr^2/sr"));
            columns.push(Column::new("dcs_excitation", "bohr^2/sr"));
        }
    }
    let width = columns.len();
    let vm = cfg.vib_model();
    let mode = cfg.mode.momentum_mode();
    let axis = mc.axis.map_or(Vector3::z(), |a| Vector3::from(a).normalize());
    let n0 = Vector3::z();
    let points: Vec<PointResult> = grid_points(cfg)
        .par_iter()
        .map(|g| {
            let mut p = new_point(cfg, g);
            let prefix = |theta: f64| {
                let mut c = grid_cells(cfg, g);
                c.push(Cell::Num(theta));
                c
            };
            match (vib, vm.as_ref()) {
                (Some(v), Some(vm)) => {
                    let calc = Momenta::compute(&cs, g.k0).and_then(|mom| VibroCalc::new(&model, vm, &mom, mode));
                    let calc = match calc {
                        Ok(c) => c,
                        Err(e) => {
                            record(&mut p, &e);
                            p.rows = angles.theta.iter().map(|&t| nan_row(prefix(t), width)).collect();
                            return p;
                        }
                    };
                    // None marks a closed final channel
                    let mut data = Vec::new();
                    for &lv in &v.v {
                        match TransitionSpec::new(&model, v.n, lv, v.v0).and_then(|t| calc.transition(&t)) {
                            Ok(d) => {
                                for w in d.warnings() {
                                    p.warn(format!("v = {lv}: {w}"));
                                }
                                data.push(Ok(Some(d)));
                            }
                            Err(ZrpError::ClosedChannel { .. }) => data.push(Ok(None)),
                            Err(e) => data.push(Err(e)),
                        }
                    }
                    for &theta in &angles.theta {
                        let mut row = prefix(theta);
                        let c = theta.to_radians().cos();
                        for d in &data {
                            let value = match d {
                                Ok(Some(d)) => d.dcs(c),
                                Ok(None) => Ok(0.0),
                                Err(e) => Err(e.clone()),
                            };
                            row.push(Cell::Num(cross_section(&mut p, value)));
                        }
                        p.rows.push(row);
                    }
                    let clamped = calc.clamped_count();
                    if clamped > 0 {
                        p.warn(format!("{clamped} slightly negative DCS values (roundoff) clamped to 0"));
                    }
                }
                _ => {
                    let amp = Momenta::compute(&cs, g.k0)
                        .and_then(|mom| Ok((general_two_center_amplitude(&w, &cs, &mom, &(model.r * axis))?, mom)));
                    match amp {
                        Ok((amp, mom)) => {
                            for &theta in &angles.theta {
                                let mut row = prefix(theta);
                                match amp.eval(&direction(theta, angles.phi), &n0) {
                                    Ok(f) => {
                                        row.push(Cell::Num(f[(0, 0)].norm_sqr()));
                                        row.push(Cell::Num(flux(&mom, 1) * f[(1, 0)].norm_sqr()));
                                    }
                                    Err(e) => {
                                        record(&mut p, &e);
                                        row = nan_row(row, width);
                                    }
                                }
                                p.rows.push(row);
                            }
                        }
                        Err(e) => {
                            record(&mut p, &e);
                            p.rows = angles.theta.iter().map(|&t| nan_row(prefix(t), width)).collect();
                        }
                    }
                }
            }
            p
        })
        .collect();
    let y = columns[3..].iter().map(|c| c.name.clone()).collect();
    Ok(Table {
        columns,
        points,
        global_warnings: vib_warnings(cfg),
        plot: PlotSpec {
            x: "theta".into(),
            y,
            group: Some("energy".into()),
            scatter: false,
            log_y: true,
        },
    })
}

fn energy_cells(cfg: &RunConfig, k: Complex64) -> [Cell; 4] {
    let e = 0.5 * k * k;
    [
        Cell::Num(k.re),
        Cell::Num(k.im),
        Cell::Num(cfg.units.from_hartree(e.re)),
        Cell::Num(cfg.units.from_hartree(e.im)),
    ]
}

fn energy_columns(cfg: &RunConfig) -> [Column; 4] {
    [
        Column::new("re_k0", "bohr^-1"),
        Column::new("im_k0", "bohr^-1"),
        Column::new("re_E", cfg.units.label()),
        Column::new("im_E", cfg.units.label()),
    ]
}

fn poles(cfg: &RunConfig) -> Result<Table, RunError> {
    let mc = cfg.model.as_ref().unwrap();
    let model = mc.model();
    let e1 = cfg.units.to_hartree(mc.excitation);
    let search = cfg.poles.as_ref().unwrap();
    let rect = ComplexRect::new(search.re[0], search.re[1], search.im[0], search.im[1])?;
    let mut columns = vec![Column::new("parity", ""), Column::new("index", "")];
    columns.extend(energy_columns(cfg));
    let width = columns.len();
    let points: Vec<PointResult> = search
        .parity
        .parities()
        .par_iter()
        .map(|&parity| {
            let mut p = PointResult {
                label: parity.to_string(),
                ..Default::default()
            };
            match find_poles(&model, e1, parity, &rect) {
                Ok(mut found) => {
                    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
                    if found.is_empty() {
                        p.warn("no poles inside the search rectangle");
                    }
                    for (i, k) in found.into_iter().enumerate() {
                        let mut row = vec![Cell::Text(parity.to_string()), Cell::Int(i as i64)];
                        row.extend(energy_cells(cfg, k));
                        p.rows.push(row);
                    }
                }
                Err(e) => {
                    record(&mut p, &e);
                    p.rows.push(nan_row(vec![Cell::Text(parity.to_string()), Cell::Int(-1)], width));
                }
            }
            p
        })
        .collect();
    Ok(Table {
        columns,
        points,
        global_warnings: Vec::new(),
        plot: PlotSpec {
            x: "re_k0".into(),
            y: vec!["im_k0".into()],
            group: None,
            scatter: true,
            log_y: false,
        },
    })
}

fn curves(cfg: &RunConfig) -> Result<Table, RunError> {
    let mc = cfg.model.as_ref().unwrap();
    let model = mc.model();
    let e1 = cfg.units.to_hartree(mc.excitation);
    let scan = cfg.curves.as_ref().unwrap();
    let parity = scan.parity.parities()[0];
    let grid = scan.r_grid();
    let seed = Complex64::new(scan.seed[0], scan.seed[1]);
    let mut columns = vec![Column::new("r", "bohr")];
    columns.extend(energy_columns(cfg));
    let width = columns.len();
    // the track is sequential in R, so this task is a single grid point
    let mut p = PointResult {
        label: format!("{parity} curve"),
        ..Default::default()
    };
    let tracked = match potential_curves(&model, e1, &grid, parity, seed) {
        Ok(c) => c,
        Err(e) => {
            record(&mut p, &e);
            match e {
                ZrpError::TrackLost { last_good_r } => {
                    let good: Vec<f64> = grid.iter().copied().filter(|&r| r <= last_good_r).collect();
                    potential_curves(&model, e1, &good, parity, seed).unwrap_or_default()
                }
                _ => Vec::new(),
            }
        }
    };
    for (i, &r) in grid.iter().enumerate() {
        let mut row = vec![Cell::Num(r)];
        match tracked.get(i) {
            Some(c) => row.extend(energy_cells(cfg, c.k0)),
            None => row = nan_row(row, width),
        }
        p.rows.push(row);
    }
    Ok(Table {
        columns,
        points: vec![p],
        global_warnings: Vec::new(),
        plot: PlotSpec {
            x: "r".into(),
            y: vec!["re_E".into()],
            group: None,
            scatter: false,
            log_y: false,
        },
    })
}

fn multicenter(cfg: &RunConfig) -> Result<Table, RunError> {
    let cs = channel_set(cfg)?;
    let centers = cfg
        .center
        .iter()
        .map(|c| CenterSpec::new(Vector3::from(c.position), c.radius, cs.clone(), interaction(cfg, &c.w)?))
        .collect::<Result<Vec<_>, _>>()?;
    let angles = cfg.angles.as_ref().unwrap();
    let mut columns = grid_columns(cfg);
    columns.push(Column::new("theta", "deg"));
    for c in &cfg.channel {
        columns.push(Column::new(format!("dcs_{}", c.label), "bohr^2/sr"));
    }
    let width = columns.len();
    let n0 = Vector3::z();
    let points: Vec<PointResult> = grid_points(cfg)
        .par_iter()
        .map(|g| {
            let mut p = new_point(cfg, g);
            let prefix = |theta: f64| {
                let mut c = grid_cells(cfg, g);
                c.push(Cell::Num(theta));
                c
            };
            let field = Momenta::compute(&cs, g.k0).and_then(|mom| Ok((MultiCenterField::new(&centers, &mom)?, mom)));
            match field {
                Ok((field, mom)) => {
                    for &theta in &angles.theta {
                        let mut row = prefix(theta);
                        match field.eval(&direction(theta, angles.phi), &n0) {
                            Ok(f) => row.extend((0..cs.len()).map(|n| Cell::Num(flux(&mom, n) * f[(n, 0)].norm_sqr()))),
                            Err(e) => {
                                record(&mut p, &e);
                                row = nan_row(row, width);
                            }
                        }
                        p.rows.push(row);
                    }
                }
                Err(e) => {
                    record(&mut p, &e);
                    p.rows = angles.theta.iter().map(|&t| nan_row(prefix(t), width)).collect();
                }
            }
            p
        })
        .collect();
    let y = columns[3..].iter().map(|c| c.name.clone()).collect();
    Ok(Table {
        columns,
        points,
        global_warnings: Vec::new(),
        plot: PlotSpec {
            x: "theta".into(),
            y,
            group: Some("energy".into()),
            scatter: false,
            log_y: true,
        },
    })
}
