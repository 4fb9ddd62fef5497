//! TOML run configuration: raw parse with spans, then validation into a
//! [`RunConfig`] whose serialization is the resolved config written into
//! every CSV header.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;
use zrp::one_center::InteractionW;
use zrp::twocenter::TwoCenterModel;
use zrp::vibro::{MomentumMode, VibModel};
use zrp::Parity;

/// CODATA 2018 hartree energy in eV.
pub const EV_PER_HARTREE: f64 = 27.211386245988;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    OneCenter,
    TwoCenterDcs,
    TwoCenterIcs,
    Poles,
    Curves,
    Multicenter,
}

impl Task {
    const ALL: [(&'static str, Task); 6] = [
        ("one_center", Task::OneCenter),
        ("two_center_dcs", Task::TwoCenterDcs),
        ("two_center_ics", Task::TwoCenterIcs),
        ("poles", Task::Poles),
        ("curves", Task::Curves),
        ("multicenter", Task::Multicenter),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, t)| *t == self).map(|(n, _)| *n).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Units {
    #[serde(rename = "eV")]
    Ev,
    #[serde(rename = "hartree")]
    Hartree,
}

impl Units {
    pub fn label(self) -> &'static str {
        match self {
            Units::Ev => "eV",
            Units::Hartree => "hartree",
        }
    }

    pub fn to_hartree(self, x: f64) -> f64 {
        match self {
            Units::Ev => x / EV_PER_HARTREE,
            Units::Hartree => x,
        }
    }

    pub fn from_hartree(self, x: f64) -> f64 {
        match self {
            Units::Ev => x * EV_PER_HARTREE,
            Units::Hartree => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Literal,
    Resolved,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "literal" => Some(Mode::Literal),
            "resolved" => Some(Mode::Resolved),
            _ => None,
        }
    }

    pub fn momentum_mode(self) -> MomentumMode {
        match self {
            Mode::Literal => MomentumMode::Literal,
            Mode::Resolved => MomentumMode::Resolved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridQuantity {
    /// Entrance kinetic energy `k₀²/2` in the config units.
    Energy,
    /// Entrance momentum `k₀` in bohr⁻¹.
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub quantity: GridQuantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Grid {
    /// Grid points in the grid's own unit.
    pub fn points(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        let (a, b, n) = (self.min.unwrap(), self.max.unwrap(), self.steps.unwrap());
        if n == 1 {
            return vec![a];
        }
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub alpha0: f64,
    pub alpha1: f64,
    pub c: f64,
    pub l: u32,
    pub m: i32,
    pub eta0: i8,
    pub eta1: i8,
    /// Half the internuclear distance, bohr.
    pub r: f64,
    /// Electronic excitation energy in the config units.
    pub excitation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
}

impl ModelConfig {
    pub fn model(&self) -> TwoCenterModel {
        TwoCenterModel {
            alpha0: self.alpha0,
            alpha1: self.alpha1,
            c: self.c,
            l: self.l,
            m: self.m,
            eta0: self.eta0,
            eta1: self.eta1,
            r: self.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VibConfig {
    pub r_e: f64,
    /// Vibrational quantum in the config units.
    pub omega: f64,
    pub mu: f64,
    pub n_basis: usize,
    pub n: usize,
    pub v0: usize,
    pub v: Vec<usize>,
    pub closure: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_r_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Angles {
    /// Polar scattering angles in degrees, measured from the incidence `+z`.
    pub theta: Vec<f64>,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityChoice {
    Gerade,
    Ungerade,
    Both,
}

impl ParityChoice {
    pub fn parities(self) -> Vec<Parity> {
        match self {
            ParityChoice::Gerade => vec![Parity::Gerade],
            ParityChoice::Ungerade => vec![Parity::Ungerade],
            ParityChoice::Both => vec![Parity::Gerade, Parity::Ungerade],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleSearch {
    pub parity: ParityChoice,
    pub re: [f64; 2],
    pub im: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveScan {
    pub parity: ParityChoice,
    pub r_min: f64,
    pub r_max: f64,
    pub steps: usize,
    pub seed: [f64; 2],
}

impl CurveScan {
    pub fn r_grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| self.r_min + (self.r_max - self.r_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelConfig {
    pub label: String,
    pub energy: f64,
    pub l: u32,
    pub m: i32,
    pub eta: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionConfig {
    pub w: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterConfig {
    pub position: [f64; 3],
    pub radius: f64,
    pub w: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub prefix: String,
}

/// A validated run. Field order matters: `toml` needs plain values before
/// tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: Task,
    pub units: Units,
    pub mode: Mode,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vib: Option<VibConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Angles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poles: Option<PoleSearch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curves: Option<CurveScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub channel: Vec<ChannelConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<CenterConfig>,
}

impl RunConfig {
    /// Entrance momentum at a grid point.
    pub fn k0_at(&self, x: f64) -> f64 {
        match self.grid.as_ref().map(|g| g.quantity) {
            Some(GridQuantity::Momentum) => x,
            _ => (2.0 * self.units.to_hartree(x)).sqrt(),
        }
    }

    pub fn vib_model(&self) -> Option<VibModel> {
        let v = self.vib.as_ref()?;
        let mut vm = VibModel::new(v.r_e, self.units.to_hartree(v.omega), v.mu, v.n_basis).ok()?;
        if let (Some(r), Some(w)) = (v.final_r_e, v.final_omega) {
            vm = vm.with_final_curve(r, self.units.to_hartree(w)).ok()?;
        }
        Some(vm)
    }

    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Spanned<String>,
    units: Option<Spanned<String>>,
    mode: Option<Spanned<String>>,
    grid: Option<Spanned<RawGrid>>,
    model: Option<Spanned<RawModel>>,
    vib: Option<Spanned<RawVib>>,
    angles: Option<Spanned<RawAngles>>,
    poles: Option<Spanned<RawPoles>>,
    curves: Option<Spanned<RawCurves>>,
    channel: Option<Vec<Spanned<RawChannel>>>,
    interaction: Option<Spanned<RawInteraction>>,
    center: Option<Vec<Spanned<RawCenter>>>,
    output: Option<Spanned<RawOutput>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    quantity: Option<Spanned<String>>,
    min: Option<Spanned<f64>>,
    max: Option<Spanned<f64>>,
    steps: Option<Spanned<i64>>,
    values: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    alpha0: f64,
    alpha1: f64,
    c: f64,
    l: Spanned<i64>,
    m: Option<Spanned<i64>>,
    eta0: Option<Spanned<i64>>,
    eta1: Option<Spanned<i64>>,
    r: Spanned<f64>,
    excitation: Spanned<f64>,
    axis: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVib {
    r_e: Option<Spanned<f64>>,
    omega: Spanned<f64>,
    mu: Spanned<f64>,
    n_basis: Option<Spanned<i64>>,
    n: Option<Spanned<i64>>,
    v0: Option<Spanned<i64>>,
    v: Option<Spanned<Vec<i64>>>,
    closure: Option<bool>,
    final_r_e: Option<Spanned<f64>>,
    final_omega: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAngles {
    theta: Option<Spanned<Vec<f64>>>,
    polar: Option<Spanned<i64>>,
    phi: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoles {
    parity: Spanned<String>,
    re: Spanned<Vec<f64>>,
    im: Spanned<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurves {
    parity: Spanned<String>,
    r_min: Spanned<f64>,
    r_max: Spanned<f64>,
    steps: Spanned<i64>,
    seed: Spanned<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    label: Option<String>,
    energy: Spanned<f64>,
    l: Option<Spanned<i64>>,
    m: Option<Spanned<i64>>,
    eta: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInteraction {
    w: Spanned<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCenter {
    position: Spanned<Vec<f64>>,
    radius: Option<Spanned<f64>>,
    w: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    prefix: Spanned<String>,
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn err<T>(&self, span: &Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(self.line(span)),
            message: message.into(),
        })
    }

    fn positive(&self, name: &str, x: &Spanned<f64>) -> Result<f64, ConfigError> {
        let v = *x.get_ref();
        if !(v > 0.0 && v.is_finite()) {
            return self.err(&x.span(), format!("{name} = {v} must be positive"));
        }
        Ok(v)
    }

    fn non_negative(&self, name: &str, x: &Spanned<f64>) -> Result<f64, ConfigError> {
        let v = *x.get_ref();
        if !(v >= 0.0 && v.is_finite()) {
            return self.err(&x.span(), format!("{name} = {v} must be >= 0"));
        }
        Ok(v)
    }

    fn count(&self, name: &str, x: &Spanned<i64>, min: i64) -> Result<usize, ConfigError> {
        let v = *x.get_ref();
        if v < min {
            return self.err(&x.span(), format!("{name} = {v} must be >= {min}"));
        }
        Ok(v as usize)
    }

    fn parity(&self, name: &str, x: Option<&Spanned<i64>>) -> Result<i8, ConfigError> {
        match x {
            None => Ok(1),
            Some(s) => match *s.get_ref() {
                1 => Ok(1),
                -1 => Ok(-1),
                v => self.err(&s.span(), format!("{name} = {v} is not allowed; allowed values: +1, -1")),
            },
        }
    }

    fn angular(&self, prefix: &str, l: Option<&Spanned<i64>>, m: Option<&Spanned<i64>>) -> Result<(u32, i32), ConfigError> {
        let lv = match l {
            Some(s) => self.count(&format!("{prefix}.l"), s, 0)? as u32,
            None => 0,
        };
        let mv = m.map_or(0, |s| *s.get_ref());
        if mv.unsigned_abs() > lv as u64 {
            let span = m.unwrap().span();
            return self.err(&span, format!("{prefix}.l = {lv} must be >= |{prefix}.m| = {}", mv.abs()));
        }
        Ok((lv, mv as i32))
    }

    fn vec3(&self, name: &str, x: &Spanned<Vec<f64>>) -> Result<[f64; 3], ConfigError> {
        let v = x.get_ref();
        if v.len() != 3 || v.iter().any(|c| !c.is_finite()) {
            return self.err(&x.span(), format!("{name} must be three finite numbers"));
        }
        Ok([v[0], v[1], v[2]])
    }

    fn interval(&self, name: &str, x: &Spanned<Vec<f64>>) -> Result<[f64; 2], ConfigError> {
        let v = x.get_ref();
        if v.len() != 2 || !(v[0] < v[1]) || v.iter().any(|c| !c.is_finite()) {
            return self.err(&x.span(), format!("{name} must be [min, max] with min < max"));
        }
        Ok([v[0], v[1]])
    }

    fn matrix(&self, name: &str, x: &Spanned<Vec<Vec<f64>>>, dim: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
        let w = x.get_ref();
        if w.len() != dim || w.iter().any(|row| row.len() != dim) {
            return self.err(&x.span(), format!("{name} must be a {dim}x{dim} matrix (one row per channel)"));
        }
        let scale = w.iter().flatten().fold(1.0f64, |a, b| a.max(b.abs()));
        for i in 0..dim {
            for j in 0..i {
                if (w[i][j] - w[j][i]).abs() > 1e-13 * scale {
                    return self.err(&x.span(), format!("{name} must be symmetric: {name}[{i}][{j}] != {name}[{j}][{i}]"));
                }
            }
        }
        if w.iter().flatten().any(|c| !c.is_finite()) {
            return self.err(&x.span(), format!("{name} entries must be finite"));
        }
        Ok(w.clone())
    }

    fn choice<T: Copy>(&self, name: &str, x: &Spanned<String>, options: &[(&str, T)]) -> Result<T, ConfigError> {
        match options.iter().find(|(n, _)| *n == x.get_ref()) {
            Some((_, t)) => Ok(*t),
            None => {
                let allowed: Vec<String> = options.iter().map(|(n, _)| format!("\"{n}\"")).collect();
                self.err(
                    &x.span(),
                    format!("{name} = \"{}\" is not allowed; allowed values: {}", x.get_ref(), allowed.join(", ")),
                )
            }
        }
    }
}

const PARITIES: [(&str, ParityChoice); 3] = [
    ("gerade", ParityChoice::Gerade),
    ("ungerade", ParityChoice::Ungerade),
    ("both", ParityChoice::Both),
];

/// Parses and validates a config. `mode_override` (the `--mode` flag) wins
/// over the file's `mode` key.
pub fn parse_config(text: &str, mode_override: Option<Mode>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    let cx = Ctx { text };
    let task = cx.choice("task", &raw.task, &Task::ALL)?;
    let task_span = raw.task.span();
    let Some(units) = &raw.units else {
        return cx.err(&(0..0), "missing required key `units`; allowed values: \"eV\", \"hartree\"");
    };
    let units = cx.choice("units", units, &[("eV", Units::Ev), ("hartree", Units::Hartree)])?;
    let mode = match (&raw.mode, mode_override) {
        (_, Some(m)) => m,
        (Some(s), None) => cx.choice("mode", s, &[("literal", Mode::Literal), ("resolved", Mode::Resolved)])?,
        (None, None) => Mode::Literal,
    };

    let uses = |section: &str| -> bool {
        match section {
            "grid" => task != Task::Poles && task != Task::Curves,
            "model" => matches!(task, Task::TwoCenterDcs | Task::TwoCenterIcs | Task::Poles | Task::Curves),
            "vib" => matches!(task, Task::TwoCenterDcs | Task::TwoCenterIcs),
            "angles" => matches!(task, Task::TwoCenterDcs | Task::Multicenter),
            "poles" => task == Task::Poles,
            "curves" => task == Task::Curves,
            "channel" | "interaction" => matches!(task, Task::OneCenter | Task::Multicenter),
            "center" => task == Task::Multicenter,
            _ => true,
        }
    };
    let optional = ["vib", "output"];
    let optional_for_multicenter = ["interaction"];
    macro_rules! section {
        ($field:expr, $name:literal) => {{
            let present = $field.is_some();
            if present && !uses($name) {
                return cx.err(&task_span, format!("section [{}] is not used by task {}", $name, task.name()));
            }
            let may_skip = optional.contains(&$name) || (task == Task::Multicenter && optional_for_multicenter.contains(&$name));
            if !present && uses($name) && !may_skip {
                return cx.err(&task_span, format!("task {} requires a [{}] section", task.name(), $name));
            }
        }};
    }
    section!(raw.grid, "grid");
    section!(raw.model, "model");
    section!(raw.vib, "vib");
    section!(raw.angles, "angles");
    section!(raw.poles, "poles");
    section!(raw.curves, "curves");
    section!(raw.channel, "channel");
    section!(raw.interaction, "interaction");
    section!(raw.center, "center");

    let grid = raw.grid.as_ref().map(|g| validate_grid(&cx, g)).transpose()?;
    let model = raw
        .model
        .as_ref()
        .map(|m| validate_model(&cx, m, task, raw.vib.is_some()))
        .transpose()?;
    let vib = match &raw.vib {
        Some(v) => Some(validate_vib(&cx, v, model.as_ref().unwrap(), units)?),
        None => None,
    };
    let angles = raw.angles.as_ref().map(|a| validate_angles(&cx, a)).transpose()?;
    let poles = match &raw.poles {
        Some(p) => {
            let p = p.get_ref();
            Some(PoleSearch {
                parity: cx.choice("poles.parity", &p.parity, &PARITIES)?,
                re: cx.interval("poles.re", &p.re)?,
                im: cx.interval("poles.im", &p.im)?,
            })
        }
        None => None,
    };
    let curves = match &raw.curves {
        Some(c) => Some(validate_curves(&cx, c.get_ref())?),
        None => None,
    };
    let channel = match &raw.channel {
        Some(list) => validate_channels(&cx, list)?,
        None => Vec::new(),
    };
    let interaction = match &raw.interaction {
        Some(i) => Some(InteractionConfig {
            w: cx.matrix("interaction.w", &i.get_ref().w, channel.len())?,
        }),
        None => None,
    };
    if let Some(w) = &interaction {
        check_interaction(&cx, &raw.interaction.as_ref().unwrap().span(), &w.w, &channel)?;
    }
    let center = match &raw.center {
        Some(list) => validate_centers(&cx, list, &channel, interaction.as_ref())?,
        None => Vec::new(),
    };
    let prefix = match &raw.output {
        Some(o) => {
            let p = o.get_ref().prefix.get_ref();
            if p.is_empty() || p.contains(['/', '\\']) || p.starts_with('.') {
                return cx.err(&o.get_ref().prefix.span(), "output.prefix must be a plain file name");
            }
            p.clone()
        }
        None => task.name().to_string(),
    };

    Ok(RunConfig {
        task,
        units,
        mode,
        output: OutputConfig { prefix },
        grid,
        model,
        vib,
        angles,
        poles,
        curves,
        interaction,
        channel,
        center,
    })
}

fn validate_grid(cx: &Ctx, g: &Spanned<RawGrid>) -> Result<Grid, ConfigError> {
    let span = g.span();
    let g = g.get_ref();
    let quantity = match &g.quantity {
        Some(q) => cx.choice(
            "grid.quantity",
            q,
            &[("energy", GridQuantity::Energy), ("momentum", GridQuantity::Momentum)],
        )?,
        None => GridQuantity::Energy,
    };
    let out = match (&g.values, &g.min, &g.max, &g.steps) {
        (Some(values), None, None, None) => {
            let v = values.get_ref();
            if v.is_empty() {
                return cx.err(&values.span(), "grid.values must not be empty");
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return cx.err(&values.span(), "grid.values must be positive");
            }
            if !v.windows(2).all(|w| w[1] > w[0]) {
                return cx.err(&values.span(), "grid.values must be strictly increasing");
            }
            Grid {
                quantity,
                min: None,
                max: None,
                steps: None,
                values: Some(v.clone()),
            }
        }
        (None, Some(min), max, steps) => {
            let a = cx.positive("grid.min", min)?;
            let n = match steps {
                Some(s) => cx.count("grid.steps", s, 1)?,
                None => 1,
            };
            let b = match max {
                Some(m) => cx.positive("grid.max", m)?,
                None => a,
            };
            if n > 1 && !(b > a) {
                return cx.err(&max.as_ref().map_or(span.clone(), |m| m.span()), "grid.max must exceed grid.min");
            }
            if n == 1 && b != a {
                return cx.err(&steps.as_ref().map_or(span.clone(), |s| s.span()), "grid.steps = 1 needs grid.max = grid.min");
            }
            Grid {
                quantity,
                min: Some(a),
                max: Some(b),
                steps: Some(n),
                values: None,
            }
        }
        (Some(values), ..) => return cx.err(&values.span(), "grid takes either values or min/max/steps, not both"),
        (None, None, ..) => return cx.err(&span, "grid needs values or min/max/steps"),
    };
    Ok(out)
}

fn validate_model(cx: &Ctx, m: &Spanned<RawModel>, task: Task, has_vib: bool) -> Result<ModelConfig, ConfigError> {
    let m = m.get_ref();
    let (l, mm) = cx.angular("model", Some(&m.l), m.m.as_ref())?;
    let axis = match &m.axis {
        Some(a) => {
            if task != Task::TwoCenterDcs || has_vib {
                return cx.err(&a.span(), "model.axis only applies to fixed-nuclei two_center_dcs (no [vib])");
            }
            let v = cx.vec3("model.axis", a)?;
            if v.iter().map(|c| c * c).sum::<f64>() == 0.0 {
                return cx.err(&a.span(), "model.axis must be nonzero");
            }
            Some(v)
        }
        None => None,
    };
    for (name, x) in [("model.alpha0", m.alpha0), ("model.alpha1", m.alpha1), ("model.c", m.c)] {
        if !x.is_finite() {
            return cx.err(&(0..0), format!("{name} must be finite"));
        }
    }
    Ok(ModelConfig {
        alpha0: m.alpha0,
        alpha1: m.alpha1,
        c: m.c,
        l,
        m: mm,
        eta0: cx.parity("model.eta0", m.eta0.as_ref())?,
        eta1: cx.parity("model.eta1", m.eta1.as_ref())?,
        r: cx.positive("model.r", &m.r)?,
        excitation: cx.non_negative("model.excitation", &m.excitation)?,
        axis,
    })
}

fn validate_vib(cx: &Ctx, v: &Spanned<RawVib>, model: &ModelConfig, units: Units) -> Result<VibConfig, ConfigError> {
    let span = v.span();
    let v = v.get_ref();
    let r_e = match &v.r_e {
        Some(r) => cx.positive("vib.r_e", r)?,
        None => model.r,
    };
    let omega = cx.positive("vib.omega", &v.omega)?;
    let mu = cx.positive("vib.mu", &v.mu)?;
    let n = match &v.n {
        Some(s) => match *s.get_ref() {
            0 => 0,
            1 => 1,
            x => return cx.err(&s.span(), format!("vib.n = {x} is not allowed; allowed values: 0, 1")),
        },
        None => 1,
    };
    let v0 = match &v.v0 {
        Some(s) => cx.count("vib.v0", s, 0)?,
        None => 0,
    };
    let levels = match &v.v {
        Some(list) => {
            if list.get_ref().is_empty() {
                return cx.err(&list.span(), "vib.v must list at least one level");
            }
            let mut out = Vec::new();
            for &x in list.get_ref() {
                if x < 0 {
                    return cx.err(&list.span(), format!("vib.v contains {x}; levels are >= 0"));
                }
                if out.contains(&(x as usize)) {
                    return cx.err(&list.span(), format!("vib.v lists level {x} twice"));
                }
                out.push(x as usize);
            }
            out
        }
        None => vec![v0],
    };
    let top = levels.iter().copied().chain([v0]).max().unwrap();
    let n_basis = match &v.n_basis {
        Some(s) => {
            let nb = cx.count("vib.n_basis", s, 1)?;
            if nb <= top {
                return cx.err(&s.span(), format!("vib.n_basis = {nb} must exceed the highest level {top}"));
            }
            nb
        }
        None => top + 1,
    };
    let (final_r_e, final_omega) = match (&v.final_r_e, &v.final_omega) {
        (Some(r), Some(w)) => (Some(cx.positive("vib.final_r_e", r)?), Some(cx.positive("vib.final_omega", w)?)),
        (None, None) => (None, None),
        (Some(s), None) | (None, Some(s)) => {
            return cx.err(&s.span(), "vib.final_r_e and vib.final_omega must be given together")
        }
    };
    let out = VibConfig {
        r_e,
        omega,
        mu,
        n_basis,
        n,
        v0,
        v: levels,
        closure: v.closure.unwrap_or(false),
        final_r_e,
        final_omega,
    };
    let vm = VibModel::new(r_e, units.to_hartree(omega), mu, n_basis).and_then(|vm| match (final_r_e, final_omega) {
        (Some(r), Some(w)) => vm.with_final_curve(r, units.to_hartree(w)),
        _ => Ok(vm),
    });
    if let Err(e) = vm {
        return cx.err(&span, format!("[vib]: {e}"));
    }
    Ok(out)
}

fn validate_angles(cx: &Ctx, a: &Spanned<RawAngles>) -> Result<Angles, ConfigError> {
    let span = a.span();
    let a = a.get_ref();
    let theta = match (&a.theta, &a.polar) {
        (Some(t), None) => {
            let v = t.get_ref();
            if v.is_empty() || v.iter().any(|x| !(0.0..=180.0).contains(x)) {
                return cx.err(&t.span(), "angles.theta must be a nonempty list of degrees in [0, 180]");
            }
            v.clone()
        }
        (None, Some(p)) => {
            let n = cx.count("angles.polar", p, 2)?;
            (0..n).map(|i| 180.0 * i as f64 / (n - 1) as f64).collect()
        }
        (Some(t), Some(_)) => return cx.err(&t.span(), "angles takes either theta or polar, not both"),
        (None, None) => return cx.err(&span, "angles needs theta (degrees) or polar (count)"),
    };
    let phi = match &a.phi {
        Some(p) if p.get_ref().is_finite() => *p.get_ref(),
        Some(p) => return cx.err(&p.span(), "angles.phi must be finite"),
        None => 0.0,
    };
    Ok(Angles { theta, phi })
}

fn validate_curves(cx: &Ctx, c: &RawCurves) -> Result<CurveScan, ConfigError> {
    let parity = cx.choice("curves.parity", &c.parity, &PARITIES[..2])?;
    let r_min = cx.positive("curves.r_min", &c.r_min)?;
    let r_max = cx.positive("curves.r_max", &c.r_max)?;
    if !(r_max > r_min) {
        return cx.err(&c.r_max.span(), "curves.r_max must exceed curves.r_min");
    }
    let steps = cx.count("curves.steps", &c.steps, 2)?;
    let s = c.seed.get_ref();
    if s.len() != 2 || s.iter().any(|x| !x.is_finite()) {
        return cx.err(&c.seed.span(), "curves.seed must be [re k0, im k0]");
    }
    Ok(CurveScan {
        parity,
        r_min,
        r_max,
        steps,
        seed: [s[0], s[1]],
    })
}

fn validate_channels(cx: &Ctx, list: &[Spanned<RawChannel>]) -> Result<Vec<ChannelConfig>, ConfigError> {
    if list.is_empty() {
        return cx.err(&(0..0), "at least one [[channel]] is required");
    }
    let mut out: Vec<ChannelConfig> = Vec::new();
    for (i, ch) in list.iter().enumerate() {
        let span = ch.span();
        let ch = ch.get_ref();
        let prefix = format!("channel[{i}]");
        let energy = cx.non_negative(&format!("{prefix}.energy"), &ch.energy)?;
        if i == 0 && energy != 0.0 {
            return cx.err(&ch.energy.span(), "channel[0] is the entrance channel and needs energy = 0");
        }
        let (l, m) = cx.angular(&prefix, ch.l.as_ref(), ch.m.as_ref())?;
        let label = ch.label.clone().unwrap_or_else(|| format!("ch{i}"));
        if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return cx.err(&span, format!("{prefix}.label must be nonempty ASCII letters, digits or '_'"));
        }
        if out.iter().any(|c| c.label == label) {
            return cx.err(&span, format!("{prefix}.label \"{label}\" is used twice"));
        }
        out.push(ChannelConfig {
            label,
            energy,
            l,
            m,
            eta: cx.parity(&format!("{prefix}.eta"), ch.eta.as_ref())?,
        });
    }
    Ok(out)
}

fn check_interaction(cx: &Ctx, span: &Range<usize>, w: &[Vec<f64>], channels: &[ChannelConfig]) -> Result<(), ConfigError> {
    let entries: Vec<f64> = w.iter().flatten().copied().collect();
    let l: Vec<u32> = channels.iter().map(|c| c.l).collect();
    InteractionW::real(&entries, l).map(|_| ()).or_else(|e| cx.err(span, format!("[interaction]: {e}")))
}

fn validate_centers(
    cx: &Ctx,
    list: &[Spanned<RawCenter>],
    channels: &[ChannelConfig],
    default_w: Option<&InteractionConfig>,
) -> Result<Vec<CenterConfig>, ConfigError> {
    if list.is_empty() {
        return cx.err(&(0..0), "at least one [[center]] is required");
    }
    let mut out: Vec<CenterConfig> = Vec::new();
    for (i, c) in list.iter().enumerate() {
        let span = c.span();
        let c = c.get_ref();
        let prefix = format!("center[{i}]");
        let position = cx.vec3(&format!("{prefix}.position"), &c.position)?;
        let radius = match &c.radius {
            Some(r) => cx.non_negative(&format!("{prefix}.radius"), r)?,
            None => 0.0,
        };
        let w = match (&c.w, default_w) {
            (Some(w), _) => {
                let w = cx.matrix(&format!("{prefix}.w"), w, channels.len())?;
                check_interaction(cx, &span, &w, channels)?;
                w
            }
            (None, Some(d)) => d.w.clone(),
            (None, None) => return cx.err(&span, format!("{prefix} needs w (or a default [interaction] section)")),
        };
        for (j, other) in out.iter().enumerate() {
            let d = (0..3).map(|k| (position[k] - other.position[k]).powi(2)).sum::<f64>().sqrt();
            // touching spheres are allowed, coincident points are not
            if d < radius + other.radius || d == 0.0 {
                return cx.err(
                    &c.position.span(),
                    format!(
                        "center[{j}] and center[{i}] overlap: separation {d} < radius sum {}",
                        radius + other.radius
                    ),
                );
            }
        }
        out.push(CenterConfig { position, radius, w });
    }
    Ok(out)
}
