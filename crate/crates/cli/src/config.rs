//! Experiment configuration: a TOML document with one table per concern.
//!
//! ```toml
//! [experiment]
//! kind = "g_statistics"   # g_statistics | lemma1_check | lemma2_check | convergence_sweep | husimi_map
//!
//! [state.T]
//! kind = "coherent"       # vacuum | fock (n) | coherent (alpha) | thermal (nbar) | explicit (matrix)
//! alpha = [1.0, 0.0]
//!
//! [state.S]
//! kind = "vacuum"
//!
//! [detector]              # g_statistics, lemma1_check
//! z = [2.0, 0.0]
//! phi = 1.5707963267948966
//! path = "direct"         # g_statistics only
//! cutoffs = [29, 29, 35, 35]
//!
//! [limits]                # g_statistics, lemma1_check, convergence_sweep
//! max_branches = 32
//! deficit_budget = 0.0001
//! max_amplitudes = 12000000
//!
//! [grid]                  # g_statistics, lemma1_check, convergence_sweep
//! window = [-4.0, 4.0, -4.0, 4.0]
//! shape = [8, 8]
//!
//! [schedule]              # convergence_sweep
//! radii = [1.0, 2.0, 3.0]
//! phi = 1.5707963267948966
//! path = "direct"
//! threshold = 0.05
//!
//! [lemma2]                # lemma2_check
//! x = [-1.0, 1.0]
//! y = [-1.0, 1.0]
//!
//! [husimi]                # husimi_map
//! q = [-4.0, 4.0]
//! p = [-4.0, 4.0]
//! points = [81, 81]
//!
//! [output]
//! csv = "g_statistics.csv"
//! summary = "g_statistics.json"
//! ```
//!
//! Complex numbers are `[re, im]` pairs or plain reals. Explicit density
//! matrices are arrays of rows whose entries are numbers or `[re, im]`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::{self, Write as _};

use octoport_core::eightport::{Path, StateSpec, DEFAULT_MAX_AMPLITUDES, DEFAULT_MAX_BRANCHES};
use octoport_core::fock::DEFAULT_DEFICIT_BUDGET;
use octoport_core::linalg::{CMatrix, C64};
use octoport_core::DensityOperator;
use toml::{Table, Value};

use crate::error::CliError;

/// Four-mode vector limit under `--large-memory`.
pub const LARGE_MAX_AMPLITUDES: usize = 40_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    GStatistics,
    Lemma1Check,
    Lemma2Check,
    ConvergenceSweep,
    HusimiMap,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::GStatistics,
        ExperimentKind::Lemma1Check,
        ExperimentKind::Lemma2Check,
        ExperimentKind::ConvergenceSweep,
        ExperimentKind::HusimiMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GStatistics => "g_statistics",
            ExperimentKind::Lemma1Check => "lemma1_check",
            ExperimentKind::Lemma2Check => "lemma2_check",
            ExperimentKind::ConvergenceSweep => "convergence_sweep",
            ExperimentKind::HusimiMap => "husimi_map",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::GStatistics | ExperimentKind::Lemma1Check => {
                &["experiment", "state", "detector", "limits", "grid", "output"]
            }
            ExperimentKind::Lemma2Check => &["experiment", "state", "lemma2", "output"],
            ExperimentKind::ConvergenceSweep => &["experiment", "state", "limits", "grid", "schedule", "output"],
            ExperimentKind::HusimiMap => &["experiment", "state", "husimi", "output"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSection {
    pub z: C64,
    pub phi: f64,
    pub path: Path,
    pub cutoffs: Option<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub max_branches: usize,
    pub deficit_budget: f64,
    pub max_amplitudes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// `[qmin, qmax, pmin, pmax]`.
    pub window: [f64; 4],
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub radii: Vec<f64>,
    pub phi: f64,
    pub path: Path,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Spec {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HusimiSpec {
    pub q: [f64; 2],
    pub p: [f64; 2],
    pub points: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub csv: String,
    pub summary: String,
}

/// A validated experiment with every default filled in. Sections that the
/// kind does not use are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub t: StateSpec,
    pub s: StateSpec,
    pub detector: Option<DetectorSection>,
    pub limits: Option<Limits>,
    pub grid: Option<GridSpec>,
    pub schedule: Option<ScheduleSpec>,
    pub lemma2: Option<Lemma2Spec>,
    pub husimi: Option<HusimiSpec>,
    pub output: OutputSpec,
}

/// Defaults that depend on how the runner was invoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Defaults {
    pub large_memory: bool,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_config_with(text, &Defaults::default())
}

pub fn parse_config_with(text: &str, defaults: &Defaults) -> Result<ExperimentConfig, CliError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Validation(vec![format!("syntax: {}", e.message())]))?;
    let mut p = Parser { errors: Vec::new() };
    let cfg = p.config(&table, defaults);
    match cfg {
        Some(cfg) if p.errors.is_empty() => Ok(cfg),
        _ => Err(CliError::Validation(p.errors)),
    }
}

struct Parser {
    errors: Vec<String>,
}

impl Parser {
    fn err(&mut self, field: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{field}: {msg}"));
    }

    fn section<'a>(&mut self, root: &'a Table, name: &str) -> Option<&'a Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                self.err(name, format!("expected a table, got {}", other.type_str()));
                None
            }
        }
    }

    fn unknown_keys(&mut self, prefix: &str, table: &Table, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(&format!("{prefix}.{key}"), "unknown key");
            }
        }
    }

    fn float(&mut self, field: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(field, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn finite(&mut self, field: &str, v: &Value) -> Option<f64> {
        let x = self.float(field, v)?;
        if x.is_finite() {
            Some(x)
        } else {
            self.err(field, format!("must be finite, got {x}"));
            None
        }
    }

    fn integer(&mut self, field: &str, v: &Value) -> Option<i64> {
        match v {
            Value::Integer(i) => Some(*i),
            other => {
                self.err(field, format!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn count(&mut self, field: &str, v: &Value, min: i64) -> Option<usize> {
        let i = self.integer(field, v)?;
        if i < min {
            self.err(field, format!("must be >= {min}, got {i}"));
            None
        } else {
            Some(i as usize)
        }
    }

    fn string<'a>(&mut self, field: &str, v: &'a Value) -> Option<&'a str> {
        match v {
            Value::String(s) => Some(s),
            other => {
                self.err(field, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn array<'a>(&mut self, field: &str, v: &'a Value, len: Option<usize>) -> Option<&'a [Value]> {
        match v {
            Value::Array(a) => match len {
                Some(n) if a.len() != n => {
                    self.err(field, format!("expected {n} entries, got {}", a.len()));
                    None
                }
                _ => Some(a),
            },
            other => {
                self.err(field, format!("expected an array, got {}", other.type_str()));
                None
            }
        }
    }

    fn complex(&mut self, field: &str, v: &Value) -> Option<C64> {
        match v {
            Value::Array(a) if a.len() == 2 => {
                let re = self.finite(&format!("{field}[0]"), &a[0]);
                let im = self.finite(&format!("{field}[1]"), &a[1]);
                Some(C64::new(re?, im?))
            }
            Value::Float(_) | Value::Integer(_) => Some(C64::new(self.finite(field, v)?, 0.0)),
            other => {
                self.err(field, format!("expected a number or [re, im] pair, got {}", describe(other)));
                None
            }
        }
    }

    fn floats<const N: usize>(&mut self, field: &str, v: &Value) -> Option<[f64; N]> {
        let a = self.array(field, v, Some(N))?;
        let mut out = [0.0; N];
        let mut ok = true;
        for (k, x) in a.iter().enumerate() {
            match self.finite(&format!("{field}[{k}]"), x) {
                Some(x) => out[k] = x,
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn counts<const N: usize>(&mut self, field: &str, v: &Value, min: i64) -> Option<[usize; N]> {
        let a = self.array(field, v, Some(N))?;
        let mut out = [0; N];
        let mut ok = true;
        for (k, x) in a.iter().enumerate() {
            match self.count(&format!("{field}[{k}]"), x, min) {
                Some(x) => out[k] = x,
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn interval(&mut self, field: &str, v: &Value) -> Option<[f64; 2]> {
        let iv = self.floats::<2>(field, v)?;
        if iv[0] >= iv[1] {
            self.err(field, format!("lower end {} must be below upper end {}", iv[0], iv[1]));
            return None;
        }
        Some(iv)
    }

    fn phase(&mut self, field: &str, v: &Value) -> Option<f64> {
        let phi = self.finite(field, v)?;
        if !(0.0..2.0 * PI).contains(&phi) {
            self.err(field, format!("must lie in [0, 2 pi), got {phi}"));
            return None;
        }
        Some(phi)
    }

    fn path(&mut self, field: &str, v: &Value) -> Option<Path> {
        match self.string(field, v)? {
            "direct" => Some(Path::Direct),
            "factorized" => Some(Path::Factorized),
            other => {
                self.err(field, format!("expected \"direct\" or \"factorized\", got {other:?}"));
                None
            }
        }
    }

    fn config(&mut self, root: &Table, defaults: &Defaults) -> Option<ExperimentConfig> {
        let kind = self.kind(root);
        let allowed: &[&str] = kind.map_or(&[], |k| k.sections());
        if let Some(k) = kind {
            for key in root.keys() {
                if !allowed.contains(&key.as_str()) {
                    let known = ["experiment", "state", "detector", "limits", "grid", "schedule", "lemma2", "husimi", "output"];
                    if known.contains(&key.as_str()) {
                        self.err(key, format!("section not used by kind {k}"));
                    } else {
                        self.err(key, "unknown section");
                    }
                }
            }
        }
        let (t, s) = self.states(root, kind);
        let kind = kind?;
        let uses = |name: &str| kind.sections().contains(&name);
        let detector = if uses("detector") { self.detector(root, kind) } else { None };
        let limits = if uses("limits") { self.limits(root, defaults) } else { None };
        let grid = if uses("grid") { self.grid(root) } else { None };
        let schedule = if uses("schedule") { self.schedule(root, defaults) } else { None };
        let lemma2 = if uses("lemma2") { self.lemma2(root) } else { None };
        let husimi = if uses("husimi") { self.husimi(root) } else { None };
        let output = self.output(root, kind);
        let complete = (!uses("detector") || detector.is_some())
            && (!uses("limits") || limits.is_some())
            && (!uses("grid") || grid.is_some())
            && (!uses("schedule") || schedule.is_some())
            && (!uses("lemma2") || lemma2.is_some())
            && (!uses("husimi") || husimi.is_some());
        if !complete {
            return None;
        }
        Some(ExperimentConfig { kind, t: t?, s: s?, detector, limits, grid, schedule, lemma2, husimi, output: output? })
    }

    fn kind(&mut self, root: &Table) -> Option<ExperimentKind> {
        let Some(sec) = self.section(root, "experiment") else {
            self.err("experiment", "missing required section");
            return None;
        };
        self.unknown_keys("experiment", sec, &["kind"]);
        let Some(v) = sec.get("kind") else {
            self.err("experiment.kind", "missing required field");
            return None;
        };
        let name = self.string("experiment.kind", v)?;
        let kind = ExperimentKind::from_name(name);
        if kind.is_none() {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            self.err("experiment.kind", format!("unknown kind {name:?}, expected one of {}", names.join(", ")));
        }
        kind
    }

    fn states(&mut self, root: &Table, kind: Option<ExperimentKind>) -> (Option<StateSpec>, Option<StateSpec>) {
        let sec = self.section(root, "state");
        if let Some(sec) = sec {
            self.unknown_keys("state", sec, &["T", "S"]);
        }
        let get = |p: &mut Parser, name: &str, default: Option<StateSpec>| -> Option<StateSpec> {
            let field = format!("state.{name}");
            match sec.and_then(|s| s.get(name)) {
                Some(Value::Table(t)) => p.state(&field, t),
                Some(other) => {
                    p.err(&field, format!("expected a table, got {}", other.type_str()));
                    None
                }
                None => default.or_else(|| {
                    p.err(&field, "missing required state");
                    None
                }),
            }
        };
        let t = get(self, "T", None);
        let s_default = (kind == Some(ExperimentKind::HusimiMap)).then_some(StateSpec::Vacuum);
        let s = get(self, "S", s_default);
        (t, s)
    }

    fn state(&mut self, field: &str, t: &Table) -> Option<StateSpec> {
        let Some(kind) = t.get("kind") else {
            self.err(&format!("{field}.kind"), "missing required field");
            return None;
        };
        let kind = self.string(&format!("{field}.kind"), kind)?;
        let (param, allowed): (Option<&str>, &[&str]) = match kind {
            "vacuum" => (None, &["kind"]),
            "fock" => (Some("n"), &["kind", "n"]),
            "coherent" => (Some("alpha"), &["kind", "alpha"]),
            "thermal" => (Some("nbar"), &["kind", "nbar"]),
            "explicit" => (Some("matrix"), &["kind", "matrix"]),
            other => {
                self.err(
                    &format!("{field}.kind"),
                    format!("unknown state kind {other:?}, expected vacuum, fock, coherent, thermal or explicit"),
                );
                return None;
            }
        };
        self.unknown_keys(field, t, allowed);
        let value = match param {
            None => None,
            Some(p) => match t.get(p) {
                Some(v) => Some(v),
                None => {
                    self.err(&format!("{field}.{p}"), format!("required for {kind} states"));
                    return None;
                }
            },
        };
        let pf = format!("{field}.{}", param.unwrap_or(""));
        let spec = match (kind, value) {
            ("vacuum", _) => StateSpec::Vacuum,
            ("fock", Some(v)) => StateSpec::Fock(self.count(&pf, v, 0)?),
            ("coherent", Some(v)) => StateSpec::Coherent(self.complex(&pf, v)?),
            ("thermal", Some(v)) => {
                let nbar = self.finite(&pf, v)?;
                if nbar < 0.0 {
                    self.err(&pf, format!("must be >= 0, got {nbar}"));
                    return None;
                }
                StateSpec::Thermal(nbar)
            }
            ("explicit", Some(v)) => StateSpec::Explicit(self.matrix(&pf, v)?),
            _ => unreachable!("parameter presence checked above"),
        };
        // materialise once so invalid states are reported at parse time
        if let Err(e) = spec.to_density() {
            self.err(field, e);
            return None;
        }
        Some(spec)
    }

    fn matrix(&mut self, field: &str, v: &Value) -> Option<CMatrix> {
        let rows = self.array(field, v, None)?;
        let n = rows.len();
        if n < 2 {
            self.err(field, format!("need at least a 2x2 matrix, got {n} rows"));
            return None;
        }
        let mut entries = Vec::with_capacity(n * n);
        let mut ok = true;
        for (r, row) in rows.iter().enumerate() {
            let Some(row) = self.array(&format!("{field}[{r}]"), row, Some(n)) else {
                ok = false;
                continue;
            };
            for (k, x) in row.iter().enumerate() {
                match self.complex(&format!("{field}[{r}][{k}]"), x) {
                    Some(z) => entries.push(z),
                    None => ok = false,
                }
            }
        }
        if !ok {
            return None;
        }
        let m = CMatrix::from_row_slice(n, n, &entries);
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            self.err(field, format!("trace must be 1, got {}", tr.re));
            return None;
        }
        if let Err(e) = DensityOperator::new(m.clone()) {
            self.err(field, e);
            return None;
        }
        Some(m)
    }

    fn detector(&mut self, root: &Table, kind: ExperimentKind) -> Option<DetectorSection> {
        let Some(sec) = self.section(root, "detector") else {
            self.err("detector", "missing required section");
            return None;
        };
        let keys: &[&str] =
            if kind == ExperimentKind::GStatistics { &["z", "phi", "path", "cutoffs"] } else { &["z", "phi", "cutoffs"] };
        self.unknown_keys("detector", sec, keys);
        let z = match sec.get("z") {
            Some(v) => self.complex("detector.z", v).and_then(|z| {
                if z.norm() > 0.0 {
                    Some(z)
                } else {
                    self.err("detector.z", "must be nonzero");
                    None
                }
            }),
            None => {
                self.err("detector.z", "missing required field");
                None
            }
        };
        let phi = sec.get("phi").map_or(Some(FRAC_PI_2), |v| self.phase("detector.phi", v));
        let path = sec.get("path").map_or(Some(Path::Direct), |v| self.path("detector.path", v));
        let cutoffs = match sec.get("cutoffs") {
            None => Some(None),
            Some(v) => self.counts::<4>("detector.cutoffs", v, 2).map(Some),
        };
        Some(DetectorSection { z: z?, phi: phi?, path: path?, cutoffs: cutoffs? })
    }

    fn limits(&mut self, root: &Table, defaults: &Defaults) -> Option<Limits> {
        let empty = Table::new();
        let sec = self.section(root, "limits").unwrap_or(&empty);
        self.unknown_keys("limits", sec, &["max_branches", "deficit_budget", "max_amplitudes"]);
        let max_branches = sec.get("max_branches").map_or(Some(DEFAULT_MAX_BRANCHES), |v| self.count("limits.max_branches", v, 1));
        let deficit_budget = match sec.get("deficit_budget") {
            None => Some(DEFAULT_DEFICIT_BUDGET),
            Some(v) => self.finite("limits.deficit_budget", v).and_then(|b| {
                if b > 0.0 && b < 1.0 {
                    Some(b)
                } else {
                    self.err("limits.deficit_budget", format!("must lie in (0, 1), got {b}"));
                    None
                }
            }),
        };
        let default_amps = if defaults.large_memory { LARGE_MAX_AMPLITUDES } else { DEFAULT_MAX_AMPLITUDES };
        let max_amplitudes = sec.get("max_amplitudes").map_or(Some(default_amps), |v| self.count("limits.max_amplitudes", v, 1));
        Some(Limits { max_branches: max_branches?, deficit_budget: deficit_budget?, max_amplitudes: max_amplitudes? })
    }

    fn grid(&mut self, root: &Table) -> Option<GridSpec> {
        let empty = Table::new();
        let sec = self.section(root, "grid").unwrap_or(&empty);
        self.unknown_keys("grid", sec, &["window", "shape"]);
        let window = match sec.get("window") {
            None => Some([-4.0, 4.0, -4.0, 4.0]),
            Some(v) => self.floats::<4>("grid.window", v).and_then(|w| {
                if w[0] < w[1] && w[2] < w[3] {
                    Some(w)
                } else {
                    self.err("grid.window", "expected [qmin, qmax, pmin, pmax] with qmin < qmax and pmin < pmax");
                    None
                }
            }),
        };
        let shape = sec.get("shape").map_or(Some([8, 8]), |v| self.counts::<2>("grid.shape", v, 1));
        Some(GridSpec { window: window?, shape: shape? })
    }

    fn schedule(&mut self, root: &Table, defaults: &Defaults) -> Option<ScheduleSpec> {
        let empty = Table::new();
        let sec = self.section(root, "schedule").unwrap_or(&empty);
        self.unknown_keys("schedule", sec, &["radii", "phi", "path", "threshold"]);
        let radii = match sec.get("radii") {
            None => Some(if defaults.large_memory { vec![1.0, 2.0, 3.0, 4.0] } else { vec![1.0, 2.0, 3.0] }),
            Some(v) => self.radii(v),
        };
        let phi = sec.get("phi").map_or(Some(FRAC_PI_2), |v| self.phase("schedule.phi", v));
        let path = sec.get("path").map_or(Some(Path::Direct), |v| self.path("schedule.path", v));
        let threshold = match sec.get("threshold") {
            None => Some(0.05),
            Some(v) => self.finite("schedule.threshold", v).and_then(|t| {
                if t > 0.0 && t <= 1.0 {
                    Some(t)
                } else {
                    self.err("schedule.threshold", format!("must lie in (0, 1], got {t}"));
                    None
                }
            }),
        };
        Some(ScheduleSpec { radii: radii?, phi: phi?, path: path?, threshold: threshold? })
    }

    fn radii(&mut self, v: &Value) -> Option<Vec<f64>> {
        let a = self.array("schedule.radii", v, None)?;
        if a.is_empty() {
            self.err("schedule.radii", "must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(a.len());
        for (k, x) in a.iter().enumerate() {
            let f = format!("schedule.radii[{k}]");
            let r = self.finite(&f, x)?;
            if r <= 0.0 {
                self.err(&f, format!("must be positive, got {r}"));
                return None;
            }
            out.push(r);
        }
        if out.windows(2).any(|w| w[0] >= w[1]) {
            self.err("schedule.radii", "must be strictly increasing");
            return None;
        }
        Some(out)
    }

    fn lemma2(&mut self, root: &Table) -> Option<Lemma2Spec> {
        let empty = Table::new();
        let sec = self.section(root, "lemma2").unwrap_or(&empty);
        self.unknown_keys("lemma2", sec, &["x", "y"]);
        let x = sec.get("x").map_or(Some([-1.0, 1.0]), |v| self.interval("lemma2.x", v));
        let y = sec.get("y").map_or(Some([-1.0, 1.0]), |v| self.interval("lemma2.y", v));
        Some(Lemma2Spec { x: x?, y: y? })
    }

    fn husimi(&mut self, root: &Table) -> Option<HusimiSpec> {
        let empty = Table::new();
        let sec = self.section(root, "husimi").unwrap_or(&empty);
        self.unknown_keys("husimi", sec, &["q", "p", "points"]);
        let q = sec.get("q").map_or(Some([-4.0, 4.0]), |v| self.interval("husimi.q", v));
        let p = sec.get("p").map_or(Some([-4.0, 4.0]), |v| self.interval("husimi.p", v));
        let points = sec.get("points").map_or(Some([81, 81]), |v| self.counts::<2>("husimi.points", v, 2));
        Some(HusimiSpec { q: q?, p: p?, points: points? })
    }

    fn output(&mut self, root: &Table, kind: ExperimentKind) -> Option<OutputSpec> {
        let empty = Table::new();
        let sec = self.section(root, "output").unwrap_or(&empty);
        self.unknown_keys("output", sec, &["csv", "summary"]);
        let file = |p: &mut Parser, key: &str, ext: &str| -> Option<String> {
            let field = format!("output.{key}");
            match sec.get(key) {
                None => Some(format!("{}.{ext}", kind.name())),
                Some(v) => {
                    let s = p.string(&field, v)?;
                    if s.is_empty() || s.contains('/') || s.contains('\\') || s == "timing.json" {
                        p.err(&field, format!("must be a plain file name other than timing.json, got {s:?}"));
                        None
                    } else {
                        Some(s.to_string())
                    }
                }
            }
        };
        let csv = file(self, "csv", "csv");
        let summary = file(self, "summary", "json");
        if csv.is_some() && csv == summary {
            self.err("output", "csv and summary must be different files");
            return None;
        }
        Some(OutputSpec { csv: csv?, summary: summary? })
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Array(a) => format!("an array of {} entries", a.len()),
        other => other.type_str().to_string(),
    }
}

fn num(x: f64) -> String {
    // Debug output of f64 round-trips and is valid TOML, including inf/nan
    let s = format!("{x:?}");
    if s == "NaN" {
        "nan".into()
    } else {
        s
    }
}

fn complex(z: C64) -> String {
    format!("[{}, {}]", num(z.re), num(z.im))
}

fn floats(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", "))
}

fn ints(xs: &[usize]) -> String {
    format!("[{}]", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
}

fn path_name(p: Path) -> &'static str {
    match p {
        Path::Direct => "direct",
        Path::Factorized => "factorized",
    }
}

fn write_state(out: &mut String, name: &str, s: &StateSpec) {
    let _ = writeln!(out, "\n[state.{name}]");
    match s {
        StateSpec::Vacuum => {
            let _ = writeln!(out, "kind = \"vacuum\"");
        }
        StateSpec::Fock(n) => {
            let _ = writeln!(out, "kind = \"fock\"\nn = {n}");
        }
        StateSpec::Coherent(a) => {
            let _ = writeln!(out, "kind = \"coherent\"\nalpha = {}", complex(*a));
        }
        StateSpec::Thermal(nbar) => {
            let _ = writeln!(out, "kind = \"thermal\"\nnbar = {}", num(*nbar));
        }
        StateSpec::Explicit(m) => {
            let _ = writeln!(out, "kind = \"explicit\"\nmatrix = [");
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|k| complex(m[(r, k)])).collect();
                let _ = writeln!(out, "  [{}],", row.join(", "));
            }
            let _ = writeln!(out, "]");
        }
    }
}

/// Canonical TOML text of a configuration, every field explicit.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[experiment]\nkind = \"{}\"", cfg.kind.name());
    write_state(&mut out, "T", &cfg.t);
    write_state(&mut out, "S", &cfg.s);
    if let Some(d) = &cfg.detector {
        let _ = writeln!(out, "\n[detector]\nz = {}\nphi = {}", complex(d.z), num(d.phi));
        if cfg.kind == ExperimentKind::GStatistics {
            let _ = writeln!(out, "path = \"{}\"", path_name(d.path));
        }
        if let Some(c) = d.cutoffs {
            let _ = writeln!(out, "cutoffs = {}", ints(&c));
        }
    }
    if let Some(l) = &cfg.limits {
        let _ = writeln!(
            out,
            "\n[limits]\nmax_branches = {}\ndeficit_budget = {}\nmax_amplitudes = {}",
            l.max_branches,
            num(l.deficit_budget),
            l.max_amplitudes
        );
    }
    if let Some(g) = &cfg.grid {
        let _ = writeln!(out, "\n[grid]\nwindow = {}\nshape = {}", floats(&g.window), ints(&g.shape));
    }
    if let Some(s) = &cfg.schedule {
        let _ = writeln!(
            out,
            "\n[schedule]\nradii = {}\nphi = {}\npath = \"{}\"\nthreshold = {}",
            floats(&s.radii),
            num(s.phi),
            path_name(s.path),
            num(s.threshold)
        );
    }
    if let Some(l) = &cfg.lemma2 {
        let _ = writeln!(out, "\n[lemma2]\nx = {}\ny = {}", floats(&l.x), floats(&l.y));
    }
    if let Some(h) = &cfg.husimi {
        let _ = writeln!(out, "\n[husimi]\nq = {}\np = {}\npoints = {}", floats(&h.q), floats(&h.p), ints(&h.points));
    }
    let _ = writeln!(out, "\n[output]\ncsv = {:?}\nsummary = {:?}", cfg.output.csv, cfg.output.summary);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
kind = "g_statistics"

[state.T]
kind = "vacuum"

[state.S]
kind = "vacuum"

[detector]
z = 2.0
phi = 1.5707963267948966
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::GStatistics);
        let d = cfg.detector.as_ref().unwrap();
        assert_eq!(d.z, C64::new(2.0, 0.0));
        assert_eq!(d.path, Path::Direct);
        assert_eq!(cfg.grid.as_ref().unwrap().shape, [8, 8]);
        assert_eq!(cfg.limits.as_ref().unwrap().max_branches, 32);
        assert_eq!(cfg.output.csv, "g_statistics.csv");
        assert!(cfg.schedule.is_none());
    }

    #[test]
    fn serialization_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn large_memory_extends_defaults() {
        let text = "[experiment]\nkind = \"convergence_sweep\"\n[state.T]\nkind = \"vacuum\"\n[state.S]\nkind = \"vacuum\"\n";
        let cfg = parse_config_with(text, &Defaults { large_memory: true }).unwrap();
        assert_eq!(cfg.schedule.unwrap().radii, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cfg.limits.unwrap().max_amplitudes, LARGE_MAX_AMPLITUDES);
    }

    #[test]
    fn syntax_errors_are_validation_errors() {
        assert!(matches!(parse_config("[experiment\nkind="), Err(CliError::Validation(_))));
    }
}
