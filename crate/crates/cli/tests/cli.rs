use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zrp_cli::config::EV_PER_HARTREE;
use zrp_cli::{parse_config, Mode};

const ZRP: &str = env!("CARGO_BIN_EXE_zrp");

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn zrp(args: &[&str]) -> Output {
    Command::new(ZRP).args(args).output().unwrap()
}

fn run_in(dir: &Path, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    zrp(&args)
}

/// Header row and parsed body of a CSV written by the CLI.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, body)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

const ONE_CENTER: &str = r#"
task = "one_center"
units = "eV"

[grid]
min = 1.0
max = 10.0
steps = 3

[[channel]]
label = "X"
energy = 0.0

[interaction]
w = [[0.4]]
"#;

#[test]
fn one_center_three_energies_give_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", ONE_CENTER);
    let out = run_in(dir.path(), &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("one_center.csv"));
    assert_eq!(header, ["energy [eV]", "k0 [bohr^-1]", "re_F_X [bohr^1]", "im_F_X [bohr^1]", "sigma_X [bohr^2]"]);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let k = num(&r[1]);
        // F = -1/(α + ik), σ = 4π|F|²
        let d = 0.4 * 0.4 + k * k;
        assert!((num(&r[2]) + 0.4 / d).abs() < 1e-14);
        assert!((num(&r[3]) - k / d).abs() < 1e-14);
        assert!((num(&r[4]) - 4.0 * std::f64::consts::PI / d).abs() < 1e-12);
    }
    assert!(dir.path().join("one_center.py").exists());
    assert!(dir.path().join("one_center.warnings.txt").exists());
}

#[test]
fn csv_header_carries_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", ONE_CENTER);
    run_in(dir.path(), &cfg, &["--mode", "resolved"]);
    let text = fs::read_to_string(dir.path().join("one_center.csv")).unwrap();
    let header: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix("#   "))
        .map(|l| format!("{l}\n"))
        .collect();
    // the embedded block parses back into the same run
    let again = parse_config(&header, None).unwrap();
    let original = parse_config(ONE_CENTER, Some(Mode::Resolved)).unwrap();
    assert_eq!(again, original);
    assert!(header.contains("mode = \"resolved\""));
    assert!(header.contains("eta = 1"));
}

#[test]
fn parity_error_names_field_and_allowed_values() {
    let text = ONE_CENTER.replace("energy = 0.0", "energy = 0.0\neta = 2");
    let err = parse_config(&text, None).unwrap_err();
    assert_eq!(err.line, Some(13));
    assert!(err.message.contains("channel[0].eta = 2"), "{err}");
    assert!(err.message.contains("+1, -1"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = run_in(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 13"));
    assert!(!dir.path().join("one_center.csv").exists());
}

#[test]
fn unknown_key_is_an_error_with_its_line() {
    let text = ONE_CENTER.replace("steps = 3", "steps = 3\nstep = 4");
    let err = parse_config(&text, None).unwrap_err();
    assert_eq!(err.line, Some(9));
    assert!(err.message.contains("unknown field `step`"), "{err}");
    let err = parse_config(&format!("{ONE_CENTER}\n[extra]\nx = 1\n"), None).unwrap_err();
    assert!(err.message.contains("unknown field `extra`"), "{err}");
}

#[test]
fn units_tag_is_required() {
    let err = parse_config(&ONE_CENTER.replace("units = \"eV\"", ""), None).unwrap_err();
    assert!(err.message.contains("units"));
    let err = parse_config(&ONE_CENTER.replace("\"eV\"", "\"Rydberg\""), None).unwrap_err();
    assert!(err.message.contains("\"eV\", \"hartree\""), "{err}");
}

#[test]
fn orbital_projection_must_not_exceed_l() {
    let text = ONE_CENTER.replace("energy = 0.0", "energy = 0.0\nl = 1\nm = 2");
    let err = parse_config(&text, None).unwrap_err();
    assert!(err.message.contains("channel[0].l = 1 must be >= |channel[0].m| = 2"), "{err}");
}

const CENTERS: &str = r#"
task = "multicenter"
units = "hartree"

[grid]
values = [0.5]

[angles]
theta = [0.0, 90.0]

[[channel]]
energy = 0.0

[interaction]
w = [[0.3]]

[[center]]
position = [0.0, 0.0, 0.0]
radius = 0.5

[[center]]
position = [0.0, 0.0, 3.0]
radius = 0.5

[[center]]
position = [0.0, 0.6, 2.5]
radius = 0.5
"#;

#[test]
fn overlapping_centers_are_named() {
    let err = parse_config(CENTERS, None).unwrap_err();
    assert!(err.message.contains("center[1] and center[2] overlap"), "{err}");
    assert_eq!(err.line, Some(26));
    assert!(parse_config(&CENTERS.replace("0.6, 2.5", "0.0, -3.0"), None).is_ok());
}

#[test]
fn unused_and_missing_sections_are_errors() {
    let err = parse_config(&format!("{ONE_CENTER}\n[angles]\ntheta = [0.0]\n"), None).unwrap_err();
    assert!(err.message.contains("[angles] is not used by task one_center"), "{err}");
    let err = parse_config(&ONE_CENTER.replace("[interaction]\nw = [[0.4]]", ""), None).unwrap_err();
    assert!(err.message.contains("requires a [interaction] section"), "{err}");
}

/// Bisection on `α - κ + e^{-2κR}/2R = 0` for the gerade `c = 0` bound state.
fn bisect_gerade(alpha: f64, r: f64) -> f64 {
    let f = |k: f64| alpha - k + (-2.0 * k * r).exp() / (2.0 * r);
    let (mut a, mut b) = (1e-9, 50.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m
        } else {
            a = m
        }
    }
    0.5 * (a + b)
}

#[test]
fn decoupled_gerade_pole_is_a_single_row_matching_bisection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        r#"
task = "poles"
units = "hartree"

[model]
alpha0 = 0.6
alpha1 = 5.0
c = 0.0
l = 1
eta1 = -1
r = 1.5
excitation = 0.3

[poles]
parity = "gerade"
re = [-0.3, 0.3]
im = [0.01, 1.5]
"#,
    );
    let out = run_in(dir.path(), &cfg, &[]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("poles.csv"));
    assert_eq!(header[2], "re_k0 [bohr^-1]");
    assert_eq!(rows.len(), 1);
    let kappa = bisect_gerade(0.6, 1.5);
    assert!(num(&rows[0][2]).abs() < 1e-10);
    assert!((num(&rows[0][3]) - kappa).abs() < 1e-10);
    assert!((num(&rows[0][4]) + 0.5 * kappa * kappa).abs() < 1e-10);
}

#[test]
fn branch_cut_crossing_search_exits_with_runtime_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        r#"
task = "poles"
units = "hartree"

[model]
alpha0 = 0.6
alpha1 = 5.0
c = 0.1
l = 0
r = 1.5
excitation = 0.3

[poles]
parity = "both"
re = [-2.0, 2.0]
im = [-0.5, 0.5]
"#,
    );
    let out = run_in(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let w = fs::read_to_string(dir.path().join("poles.warnings.txt")).unwrap();
    assert!(w.contains("branch cut"));
    // one warning line per parity
    assert_eq!(w.lines().filter(|l| l.starts_with("point")).count(), 2);
}

#[test]
fn ics_task_emits_one_series_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.toml",
        r#"
task = "two_center_ics"
units = "eV"
mode = "resolved"

[model]
alpha0 = -1.0
alpha1 = -1.0
c = 0.3
l = 0
r = 0.7
excitation = 11.8

[vib]
omega = 0.54422772491976
mu = 918.076
v = [0, 1, 2, 3, 4, 5, 6, 7]

[grid]
values = [12.0, 14.0, 20.0]
"#,
    );
    let out = run_in(dir.path(), &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("two_center_ics.csv"));
    let series: Vec<&String> = header.iter().filter(|h| h.starts_with("ics_v")).collect();
    assert_eq!(series.len(), 8);
    assert_eq!(rows.len(), 3);
    // at 14 eV levels v >= 5 (threshold 11.8 + 0.544 v) are closed
    let at14 = &rows[1];
    for v in 0..8 {
        let s = num(&at14[2 + v]);
        if 11.8 + 0.54422772491976 * v as f64 > 14.0 {
            assert_eq!(s, 0.0, "v = {v}");
        } else {
            assert!(s > 0.0, "v = {v}");
        }
    }
}

#[test]
fn energy_units_round_trip() {
    let hartree = r#"
task = "two_center_dcs"
units = "hartree"

[model]
alpha0 = -1.0
alpha1 = -0.5
c = 0.4
l = 1
m = 1
eta1 = -1
r = 0.8
excitation = 0.35
axis = [1.0, 0.5, 2.0]

[grid]
values = [0.45, 0.9]

[angles]
polar = 5
phi = 30.0
"#;
    let ev = hartree
        .replace("\"hartree\"", "\"eV\"")
        .replace("excitation = 0.35", &format!("excitation = {:?}", 0.35 * EV_PER_HARTREE))
        .replace("[0.45, 0.9]", &format!("[{:?}, {:?}]", 0.45 * EV_PER_HARTREE, 0.9 * EV_PER_HARTREE));
    let dir = tempfile::tempdir().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_in(a.path(), &write(dir.path(), "h.toml", hartree), &[]).status.success());
    assert!(run_in(b.path(), &write(dir.path(), "e.toml", &ev), &[]).status.success());
    let (_, ra) = read_csv(&a.path().join("two_center_dcs.csv"));
    let (_, rb) = read_csv(&b.path().join("two_center_dcs.csv"));
    assert_eq!(ra.len(), 10);
    for (x, y) in ra.iter().zip(&rb) {
        assert!((num(&x[0]) * EV_PER_HARTREE - num(&y[0])).abs() <= 1e-12 * num(&y[0]));
        // k0, theta and the cross sections
        for c in 1..x.len() {
            let (p, q) = (num(&x[c]), num(&y[c]));
            assert!((p - q).abs() <= 1e-12 * p.abs().max(1e-300), "col {c}: {p} vs {q}");
        }
    }
}

/// Two open channels plus a closed one whose bound state sits exactly on
/// the second grid point: `k₂ = i√(2E₂ - k₀²) = iα₂`.
const POLE_HIT: &str = r#"
task = "one_center"
units = "hartree"

[grid]
values = [0.2, 0.32, 0.4]

[[channel]]
label = "a"
energy = 0.0

[[channel]]
label = "b"
energy = 0.5

[interaction]
w = [[0.3, 0.0], [0.0, 0.6]]
"#;

#[test]
fn pole_on_grid_point_gives_nan_row_and_one_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", POLE_HIT);
    let out = run_in(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = read_csv(&dir.path().join("one_center.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1][2..].iter().all(|c| c == "NaN"));
    assert!(rows[0][2..].iter().chain(&rows[2][2..]).all(|c| num(c).is_finite()));
    let w = fs::read_to_string(dir.path().join("one_center.warnings.txt")).unwrap();
    let lines: Vec<&str> = w.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 1, "{w}");
    assert!(lines[0].starts_with("point 1 (E = 3.2000000000000001e-1 hartree): pole"), "{w}");
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
task = "two_center_dcs"
units = "eV"

[model]
alpha0 = -1.0
alpha1 = -1.0
c = 0.3
l = 2
m = 1
eta1 = 1
r = 0.7
excitation = 11.8

[grid]
min = 2.0
max = 40.0
steps = 24

[angles]
polar = 13
"#;
    let cfg = write(dir.path(), "d.toml", text);
    let mut outputs = Vec::new();
    for threads in ["1", "3", "8"] {
        let out = tempfile::tempdir().unwrap();
        assert!(run_in(out.path(), &cfg, &["--threads", threads]).status.success());
        let files: Vec<Vec<u8>> = ["csv", "py", "warnings.txt"]
            .iter()
            .map(|ext| fs::read(out.path().join(format!("two_center_dcs.{ext}"))).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn validate_reports_ok_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "g.toml", ONE_CENTER);
    let out = zrp(&["validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok (task one_center)"));
    let bad = write(dir.path(), "b.toml", "task = \"one_center\"\nunits = \"eV\"\n[grid\n");
    let out = zrp(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(zrp(&["validate", "/nonexistent/x.toml"]).status.code(), Some(1));
    assert_eq!(zrp(&["run", good.to_str().unwrap(), "--threads", "0"]).status.code(), Some(1));
    assert_eq!(zrp(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn curves_task_tracks_the_bound_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        r#"
task = "curves"
units = "hartree"

[model]
alpha0 = 0.2
alpha1 = 4.0
c = 0.0
l = 0
r = 1.0
excitation = 0.3

[curves]
parity = "gerade"
r_min = 0.8
r_max = 4.0
steps = 9
seed = [0.0, 0.75]
"#,
    );
    assert!(run_in(dir.path(), &cfg, &[]).status.success());
    let (_, rows) = read_csv(&dir.path().join("curves.csv"));
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let kappa = bisect_gerade(0.2, num(&r[0]));
        assert!((num(&r[2]) - kappa).abs() < 1e-10);
    }
}

#[test]
fn plot_script_runs() {
    let Ok(probe) = Command::new("python3").args(["-c", "import matplotlib"]).output() else {
        return;
    };
    if !probe.status.success() {
        eprintln!("matplotlib unavailable; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", ONE_CENTER);
    run_in(dir.path(), &cfg, &[]);
    let out = Command::new("python3")
        .arg(dir.path().join("one_center.py"))
        .env("MPLBACKEND", "Agg")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("one_center.png").exists());
}
