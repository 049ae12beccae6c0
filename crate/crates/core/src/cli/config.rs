//! Line-oriented experiment configuration.
//!
//! ```text
//! subcommand = penrose
//! [equilibrium]
//! family = maxwellian   # or double_bump
//! d = 3
//! sigma = 1
//! ```
//!
//! Every key has a home section; it may also be written before the first
//! section header. Parsing collects every violation before failing.

use crate::equilibria::Family;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Penrose,
    Kernel,
    Green,
    FreeTransport,
    Chars,
    Linres,
    Bootstrap,
    Rates,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Penrose,
        Subcommand::Kernel,
        Subcommand::Green,
        Subcommand::FreeTransport,
        Subcommand::Chars,
        Subcommand::Linres,
        Subcommand::Bootstrap,
        Subcommand::Rates,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Penrose => "penrose",
            Subcommand::Kernel => "kernel",
            Subcommand::Green => "green",
            Subcommand::FreeTransport => "free-transport",
            Subcommand::Chars => "chars",
            Subcommand::Linres => "linres",
            Subcommand::Bootstrap => "bootstrap",
            Subcommand::Rates => "rates",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

/// Grids shared by the subcommands. `None` means the subcommand default.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridSpec {
    /// Base points per axis and half-width in `x` (characteristics).
    pub x_points: Option<usize>,
    pub x_half_width: Option<f64>,
    /// Base points per axis and half-width in `v` (characteristics).
    pub v_points: Option<usize>,
    pub v_half_width: Option<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    /// Output times; the subcommand's default schedule when absent.
    pub times: Option<Vec<f64>>,
    /// `|ξ|` range and density in points per octave.
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub xi_per_octave: Option<usize>,
    pub tau_half_width: Option<f64>,
    pub tau_step: Option<f64>,
    /// Radial spacing of the isotropic response engine.
    pub dr: Option<f64>,
    /// Cartesian points per axis for the Green assembly.
    pub green_points: Option<usize>,
    /// Time step of the nonlinear forcing in the bootstrap.
    pub forcing_dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub picard: f64,
    pub newton: f64,
    /// Relative outer-loop change at which the bootstrap stops.
    pub convergence: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            picard: 1e-12,
            newton: 1e-12,
            convergence: 1e-6,
            max_iter: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub family: Family,
    pub dim: usize,
    pub grid: GridSpec,
    pub tol: Tolerances,
    pub eps0: f64,
    pub m0: f64,
    /// Derivative order `N` of the ledgers.
    pub order: usize,
    pub output: PathBuf,
    /// Amplitude of the synthetic field driving `chars`.
    pub field_eps: f64,
    /// Emit Littlewood–Paley blocks from `green`.
    pub blocks: bool,
    pub q_min: i32,
    pub q_max: i32,
    /// Frequency threshold `A` splitting low and high blocks.
    pub a_threshold: f64,
}

/// One violation; `line` is `None` for keys that are missing altogether.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// `(section, key)` pairs of the grammar.
const KEYS: &[(&str, &str)] = &[
    ("", "subcommand"),
    ("", "output"),
    ("equilibrium", "family"),
    ("equilibrium", "d"),
    ("equilibrium", "sigma"),
    ("equilibrium", "u"),
    ("grid", "x_points"),
    ("grid", "x_half_width"),
    ("grid", "v_points"),
    ("grid", "v_half_width"),
    ("grid", "xi_min"),
    ("grid", "xi_max"),
    ("grid", "xi_per_octave"),
    ("grid", "tau_half_width"),
    ("grid", "tau_step"),
    ("grid", "dr"),
    ("grid", "green_points"),
    ("time", "dt"),
    ("time", "horizon"),
    ("time", "times"),
    ("time", "forcing_dt"),
    ("tolerance", "picard"),
    ("tolerance", "newton"),
    ("tolerance", "convergence"),
    ("tolerance", "max_iter"),
    ("bootstrap", "eps0"),
    ("bootstrap", "m0"),
    ("bootstrap", "order"),
    ("chars", "eps"),
    ("green", "blocks"),
    ("green", "q_min"),
    ("green", "q_max"),
    ("green", "a_threshold"),
];

fn home_section(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(_, k)| *k == key).map(|(s, _)| *s)
}

fn is_section(name: &str) -> bool {
    KEYS.iter().any(|(s, _)| !s.is_empty() && *s == name)
}

struct Entry {
    value: String,
    line: usize,
}

/// Typed lookups that record every failure instead of stopping.
struct Reader {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, line: Option<usize>, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let (value, line) = {
            let e = self.entries.get(key)?;
            (e.value.clone(), e.line)
        };
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issue(Some(line), key, format!("expected {what}, found `{value}`"));
                None
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        if !self.entries.contains_key(key) {
            self.issue(None, key, "missing required key");
            return None;
        }
        self.parse(key, what)
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v: f64 = self.parse(key, "a number")?;
        if !v.is_finite() {
            let line = self.line(key);
            self.issue(line, key, "must be finite");
            return None;
        }
        Some(v)
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v = self.float(key)?;
        if v > 0.0 {
            Some(v)
        } else {
            let line = self.line(key);
            self.issue(line, key, format!("must be positive, found {v}"));
            None
        }
    }

    fn count(&mut self, key: &str, min: usize) -> Option<usize> {
        let v: usize = self.parse(key, "a non-negative integer")?;
        if v >= min {
            Some(v)
        } else {
            let line = self.line(key);
            self.issue(line, key, format!("must be at least {min}, found {v}"));
            None
        }
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let (value, line) = {
            let e = self.entries.get(key)?;
            (e.value.clone(), e.line)
        };
        let parsed: Result<Vec<f64>, _> = value.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() && v.iter().all(|t| t.is_finite() && *t >= 0.0) => Some(v),
            _ => {
                self.issue(
                    Some(line),
                    key,
                    format!("expected a comma-separated list of non-negative numbers, found `{value}`"),
                );
                None
            }
        }
    }
}

/// Parses and validates `text`; on failure lists every violation.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut reader = Reader {
        entries: BTreeMap::new(),
        issues: Vec::new(),
    };
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            match inner.strip_suffix(']').map(str::trim) {
                Some(name) if is_section(name) => section = name.to_string(),
                Some(name) => {
                    reader.issue(Some(line), name, "unknown section");
                    section = name.to_string();
                }
                None => reader.issue(Some(line), content, "malformed section header"),
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            reader.issue(Some(line), content, "expected `key = value`");
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match home_section(key) {
            None => {
                reader.issue(Some(line), key, "unknown key");
                continue;
            }
            Some(home) if !section.is_empty() && section != home => {
                let place = if home.is_empty() { "the top level".to_string() } else { format!("[{home}]") };
                reader.issue(Some(line), key, format!("belongs in {place}, found in [{section}]"));
                continue;
            }
            Some(_) => {}
        }
        if value.is_empty() {
            reader.issue(Some(line), key, "empty value");
            continue;
        }
        if let Some(first) = reader.entries.get(key) {
            let first = first.line;
            reader.issue(Some(line), key, format!("duplicate key, first set on line {first} and again on line {line}"));
            continue;
        }
        reader.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    build(reader)
}

fn build(mut r: Reader) -> Result<ExperimentConfig, ConfigErrors> {
    let subcommand = match r.entries.get("subcommand").map(|e| (e.value.clone(), e.line)) {
        None => {
            r.issue(None, "subcommand", "missing required key");
            None
        }
        Some((v, line)) => match v.parse::<Subcommand>() {
            Ok(s) => Some(s),
            Err(msg) => {
                let names: Vec<&str> = Subcommand::ALL.iter().map(|s| s.name()).collect();
                r.issue(Some(line), "subcommand", format!("{msg}; expected one of {}", names.join(", ")));
                None
            }
        },
    };
    let family_name: Option<String> = r.required("family", "a family name");
    let dim = match r.required::<usize>("d", "a positive integer") {
        Some(0) => {
            let line = r.line("d");
            r.issue(line, "d", "dimension must be at least 1");
            None
        }
        other => other,
    };
    let sigma = if r.entries.contains_key("sigma") {
        r.positive("sigma")
    } else {
        r.issue(None, "sigma", "missing required key");
        None
    };
    let family = match family_name.as_deref() {
        Some("maxwellian") => {
            if r.entries.contains_key("u") {
                let line = r.line("u");
                r.issue(line, "u", "separation applies only to family = double_bump");
            }
            sigma.map(|sigma| Family::Maxwellian { sigma })
        }
        Some("double_bump") => {
            let u = if r.entries.contains_key("u") {
                r.float("u")
            } else {
                r.issue(None, "u", "missing required key for family = double_bump");
                None
            };
            match (u, sigma) {
                (Some(separation), Some(sigma)) => Some(Family::DoubleBump { separation, sigma }),
                _ => None,
            }
        }
        Some(other) => {
            let line = r.line("family");
            r.issue(line, "family", format!("unknown family `{other}`; expected maxwellian or double_bump"));
            None
        }
        None => None,
    };

    let grid = GridSpec {
        x_points: r.count("x_points", 1),
        x_half_width: r.float("x_half_width").filter(|v| *v >= 0.0),
        v_points: r.count("v_points", 1),
        v_half_width: r.float("v_half_width").filter(|v| *v >= 0.0),
        dt: r.positive("dt"),
        horizon: r.positive("horizon"),
        times: r.list("times"),
        xi_min: r.positive("xi_min"),
        xi_max: r.positive("xi_max"),
        xi_per_octave: r.count("xi_per_octave", 1),
        tau_half_width: r.positive("tau_half_width"),
        tau_step: r.positive("tau_step"),
        dr: r.positive("dr"),
        green_points: r.count("green_points", 4),
        forcing_dt: r.positive("forcing_dt"),
    };
    for key in ["x_half_width", "v_half_width"] {
        if let Some(v) = r.entries.get(key).and_then(|e| e.value.parse::<f64>().ok()) {
            if v < 0.0 {
                let line = r.line(key);
                r.issue(line, key, "must be non-negative");
            }
        }
    }
    if let (Some(lo), Some(hi)) = (grid.xi_min, grid.xi_max) {
        if hi <= lo {
            let line = r.line("xi_max");
            r.issue(line, "xi_max", format!("must exceed xi_min = {lo}"));
        }
    }
    if let (Some(dt), Some(h)) = (grid.dt, grid.horizon) {
        if dt > h {
            let line = r.line("dt");
            r.issue(line, "dt", format!("exceeds the horizon {h}"));
        }
    }

    let defaults = Tolerances::default();
    let tol = Tolerances {
        picard: r.positive("picard").unwrap_or(defaults.picard),
        newton: r.positive("newton").unwrap_or(defaults.newton),
        convergence: r.positive("convergence").unwrap_or(defaults.convergence),
        max_iter: r.count("max_iter", 1).unwrap_or(defaults.max_iter),
    };
    let eps0 = r.positive("eps0").unwrap_or(1e-3);
    let m0 = r.positive("m0").unwrap_or(100.0);
    let order = r.count("order", 1).unwrap_or(2);
    let field_eps = r.positive("eps").unwrap_or(1e-2);
    let blocks = r.parse::<bool>("blocks", "true or false").unwrap_or(false);
    let q_min = r.parse::<i32>("q_min", "an integer").unwrap_or(-3);
    let q_max = r.parse::<i32>("q_max", "an integer").unwrap_or(2);
    if q_max < q_min {
        let line = r.line("q_max");
        r.issue(line, "q_max", format!("must be at least q_min = {q_min}"));
    }
    let a_threshold = match r.float("a_threshold") {
        Some(a) if a < 1.0 => {
            let line = r.line("a_threshold");
            r.issue(line, "a_threshold", "must be at least 1");
            1.0
        }
        Some(a) => a,
        None => 1.0,
    };
    let output = r
        .entries
        .get("output")
        .map(|e| PathBuf::from(&e.value))
        .unwrap_or_else(|| PathBuf::from("out"));

    match (subcommand, family, dim) {
        (Some(subcommand), Some(family), Some(dim)) if r.issues.is_empty() => Ok(ExperimentConfig {
            subcommand,
            family,
            dim,
            grid,
            tol,
            eps0,
            m0,
            order,
            output,
            field_eps,
            blocks,
            q_min,
            q_max,
            a_threshold,
        }),
        _ => {
            r.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
            Err(ConfigErrors(r.issues))
        }
    }
}

impl ExperimentConfig {
    /// Canonical text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = format!("subcommand = {}\noutput = {}\n", self.subcommand.name(), self.output.display());
        s.push_str(&format!(
            "\n[equilibrium]\nfamily = {}\nd = {}\nsigma = {}\n",
            self.family.name(),
            self.dim,
            self.family.sigma()
        ));
        if let Family::DoubleBump { separation, .. } = self.family {
            s.push_str(&format!("u = {separation}\n"));
        }
        let g = &self.grid;
        let mut grid = String::new();
        let put = |out: &mut String, key: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push_str(&format!("{key} = {v}\n"));
            }
        };
        put(&mut grid, "x_points", g.x_points.map(|v| v.to_string()));
        put(&mut grid, "x_half_width", g.x_half_width.map(|v| v.to_string()));
        put(&mut grid, "v_points", g.v_points.map(|v| v.to_string()));
        put(&mut grid, "v_half_width", g.v_half_width.map(|v| v.to_string()));
        put(&mut grid, "xi_min", g.xi_min.map(|v| v.to_string()));
        put(&mut grid, "xi_max", g.xi_max.map(|v| v.to_string()));
        put(&mut grid, "xi_per_octave", g.xi_per_octave.map(|v| v.to_string()));
        put(&mut grid, "tau_half_width", g.tau_half_width.map(|v| v.to_string()));
        put(&mut grid, "tau_step", g.tau_step.map(|v| v.to_string()));
        put(&mut grid, "dr", g.dr.map(|v| v.to_string()));
        put(&mut grid, "green_points", g.green_points.map(|v| v.to_string()));
        if !grid.is_empty() {
            s.push_str("\n[grid]\n");
            s.push_str(&grid);
        }
        let mut time = String::new();
        put(&mut time, "dt", g.dt.map(|v| v.to_string()));
        put(&mut time, "horizon", g.horizon.map(|v| v.to_string()));
        put(
            &mut time,
            "times",
            g.times
                .as_ref()
                .map(|v| v.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")),
        );
        put(&mut time, "forcing_dt", g.forcing_dt.map(|v| v.to_string()));
        if !time.is_empty() {
            s.push_str("\n[time]\n");
            s.push_str(&time);
        }
        s.push_str(&format!(
            "\n[tolerance]\npicard = {}\nnewton = {}\nconvergence = {}\nmax_iter = {}\n",
            self.tol.picard, self.tol.newton, self.tol.convergence, self.tol.max_iter
        ));
        s.push_str(&format!(
            "\n[bootstrap]\neps0 = {}\nm0 = {}\norder = {}\n",
            self.eps0, self.m0, self.order
        ));
        s.push_str(&format!("\n[chars]\neps = {}\n", self.field_eps));
        s.push_str(&format!(
            "\n[green]\nblocks = {}\nq_min = {}\nq_max = {}\na_threshold = {}\n",
            self.blocks, self.q_min, self.q_max, self.a_threshold
        ));
        s
    }
}
