//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! n_cells = 64
//! [time]
//! dt = 1e-4
//! horizon = 1
//! [coefficients]
//! preset = burgers
//! ```
//!
//! Lists are comma separated (`exit_levels = 5, 10, 20`). Unknown sections or
//! keys, duplicates and malformed lines are all reported together, each with
//! its line number.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::coefficients::{make_preset, CoefficientParams, CoefficientSet, Preset};
use crate::error::{Result, SpdeError};
use crate::grid_noise::SpatialGrid;
use crate::solver::{Field, SimConfig};

/// Initial profile `amp · e_mode`, or zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialShape {
    pub amp: f64,
    pub mode: usize,
}

impl InitialShape {
    pub fn field(&self, grid: SpatialGrid) -> Field {
        if self.amp == 0.0 {
            Field::zeros(grid, 0.0)
        } else {
            Field::mode(grid, self.mode, self.amp)
        }
    }
}

/// Settings read by the experiment subcommands; all optional with defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_paths: usize,
    pub n_samples: usize,
    /// defaults to `T/10`
    pub burn_in: Option<f64>,
    pub n_bins: usize,
    /// second initial condition for `couple`
    pub second: InitialShape,
    pub target: InitialShape,
    pub radius: f64,
    pub t: f64,
    pub t1: f64,
    pub n_pilot: usize,
    /// explicit steering threshold; estimated from a pilot run when absent
    pub k_threshold: Option<f64>,
    pub with_reaction: bool,
    pub times: Vec<f64>,
    pub psi: String,
    pub psi_eps: f64,
    pub direction_mode: usize,
    pub fd_eps: f64,
    pub dump_profiles: bool,
    pub kernel_modes: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_paths: 100,
            n_samples: 1000,
            burn_in: None,
            n_bins: 10,
            second: InitialShape { amp: 0.0, mode: 1 },
            target: InitialShape { amp: 0.5, mode: 1 },
            radius: 1.0,
            t: 1.0,
            t1: 0.99,
            n_pilot: 100,
            k_threshold: None,
            with_reaction: false,
            times: vec![0.1],
            psi: "mode_1".into(),
            psi_eps: 1.0,
            direction_mode: 1,
            fd_eps: 1e-4,
            dump_profiles: false,
            kernel_modes: None,
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_cells: usize,
    pub initial: InitialShape,
    pub observable_point: f64,
    pub dt: f64,
    pub horizon: f64,
    pub save_every: usize,
    pub preset: Preset,
    pub params: CoefficientParams,
    pub mollify: Option<usize>,
    pub truncation: Option<f64>,
    pub exit_levels: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub sigma_scale: f64,
    pub experiment: ExperimentSpec,
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("grid", &["n_cells", "init_amp", "init_mode", "observable_point"]),
    ("time", &["dt", "horizon", "save_every"]),
    (
        "coefficients",
        &["preset", "alpha", "beta", "cubic", "g_lin", "g_quad", "sigma", "sigma_amp", "K", "L", "k1", "k2", "mollify"],
    ),
    ("truncation", &["R", "exit_levels"]),
    ("noise", &["seed", "stream", "sigma_scale"]),
    (
        "experiment",
        &[
            "n_paths",
            "n_samples",
            "burn_in",
            "n_bins",
            "init2_amp",
            "init2_mode",
            "target_amp",
            "target_mode",
            "radius",
            "t",
            "t1",
            "n_pilot",
            "K",
            "with_reaction",
            "times",
            "psi",
            "psi_eps",
            "direction_mode",
            "fd_eps",
            "dump_profiles",
            "kernel_modes",
        ],
    ),
];

struct Entry {
    value: String,
    line: usize,
}

/// Raw entries plus every error met so far.
struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<String>,
}

impl Reader {
    fn parse(text: &str) -> Self {
        let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
        let mut errors = Vec::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) => {
                        let name = name.trim();
                        if SECTIONS.iter().any(|(s, _)| *s == name) {
                            section = Some(name.to_string());
                        } else {
                            errors.push(format!("line {line_no}: unknown section [{name}]"));
                            section = None;
                        }
                    }
                    None => errors.push(format!("line {line_no}: malformed section header `{line}`")),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {line_no}: expected `key = value`, found `{line}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.as_deref() else {
                errors.push(format!("line {line_no}: key `{key}` outside any known section"));
                continue;
            };
            let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                errors.push(format!("line {line_no}: unknown key `{key}` in [{sec}]"));
                continue;
            }
            let slot = (sec.to_string(), key.to_string());
            if let Some(prev) = entries.get(&slot) {
                errors.push(format!("line {line_no}: duplicate key {sec}.{key} (first set on line {})", prev.line));
                continue;
            }
            entries.insert(
                slot,
                Entry {
                    value: value.to_string(),
                    line: line_no,
                },
            );
        }
        Self { entries, errors }
    }

    fn raw(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn typed<T: FromStr>(&mut self, sec: &str, key: &str, kind: &str) -> Option<T> {
        let e = self.raw(sec, key)?;
        match e.value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("line {}: {sec}.{key} = `{}` is not a valid {kind}", e.line, e.value);
                self.errors.push(msg);
                None
            }
        }
    }

    fn real(&mut self, sec: &str, key: &str) -> Option<f64> {
        self.typed(sec, key, "real")
    }

    fn int(&mut self, sec: &str, key: &str) -> Option<usize> {
        self.typed(sec, key, "non-negative integer")
    }

    fn u64(&mut self, sec: &str, key: &str) -> Option<u64> {
        self.typed(sec, key, "non-negative integer")
    }

    fn boolean(&mut self, sec: &str, key: &str) -> Option<bool> {
        self.typed(sec, key, "boolean (true/false)")
    }

    fn string(&self, sec: &str, key: &str) -> Option<String> {
        self.raw(sec, key).map(|e| e.value.clone())
    }

    fn reals(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let e = self.raw(sec, key)?;
        let parsed: std::result::Result<Vec<f64>, _> = e
            .value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match parsed {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("line {}: {sec}.{key} = `{}` is not a comma-separated list of reals", e.line, e.value);
                self.errors.push(msg);
                None
            }
        }
    }

    fn required<T>(&mut self, v: Option<T>, sec: &str, key: &str) -> Option<T> {
        if v.is_none() && self.raw(sec, key).is_none() {
            self.errors.push(format!("missing required key {sec}.{key}"));
        }
        v
    }
}

impl RunConfig {
    /// Parses and validates; every problem found is returned at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Reader::parse(text);
        let d = ExperimentSpec::default();

        let n_cells = r.int("grid", "n_cells");
        let n_cells = r.required(n_cells, "grid", "n_cells");
        let init_amp = r.real("grid", "init_amp").unwrap_or(0.0);
        let init_mode = r.int("grid", "init_mode").unwrap_or(1);
        let observable_point = r.real("grid", "observable_point").unwrap_or(0.5);

        let dt = r.real("time", "dt");
        let dt = r.required(dt, "time", "dt");
        let horizon = r.real("time", "horizon");
        let horizon = r.required(horizon, "time", "horizon");
        let save_every = r.int("time", "save_every").unwrap_or(1);

        let preset = r.string("coefficients", "preset");
        let preset = r.required(preset, "coefficients", "preset");
        let preset = preset.and_then(|p| match p.parse::<Preset>() {
            Ok(v) => Some(v),
            Err(e) => {
                r.errors.push(e.to_string());
                None
            }
        });
        let base = match preset {
            Some(Preset::Burgers) => CoefficientParams::burgers(1.0),
            _ => CoefficientParams::default(),
        };
        let params = CoefficientParams {
            alpha: r.real("coefficients", "alpha").unwrap_or(base.alpha),
            beta: r.real("coefficients", "beta").unwrap_or(base.beta),
            cubic: r.real("coefficients", "cubic").unwrap_or(base.cubic),
            g_lin: r.real("coefficients", "g_lin").unwrap_or(base.g_lin),
            g_quad: r.real("coefficients", "g_quad").unwrap_or(base.g_quad),
            sigma: r.real("coefficients", "sigma").unwrap_or(base.sigma),
            sigma_amp: r.real("coefficients", "sigma_amp").unwrap_or(base.sigma_amp),
            growth: r.real("coefficients", "K"),
            lipschitz: r.real("coefficients", "L"),
            sigma_lower: r.real("coefficients", "k1"),
            sigma_upper: r.real("coefficients", "k2"),
        };
        let mollify = r.int("coefficients", "mollify");

        let truncation = r.real("truncation", "R");
        let exit_levels = r.reals("truncation", "exit_levels").unwrap_or_default();

        let seed = r.u64("noise", "seed").unwrap_or(0);
        let stream = r.u64("noise", "stream").unwrap_or(0);
        let sigma_scale = r.real("noise", "sigma_scale").unwrap_or(1.0);

        let experiment = ExperimentSpec {
            n_paths: r.int("experiment", "n_paths").unwrap_or(d.n_paths),
            n_samples: r.int("experiment", "n_samples").unwrap_or(d.n_samples),
            burn_in: r.real("experiment", "burn_in"),
            n_bins: r.int("experiment", "n_bins").unwrap_or(d.n_bins),
            second: InitialShape {
                amp: r.real("experiment", "init2_amp").unwrap_or(d.second.amp),
                mode: r.int("experiment", "init2_mode").unwrap_or(d.second.mode),
            },
            target: InitialShape {
                amp: r.real("experiment", "target_amp").unwrap_or(d.target.amp),
                mode: r.int("experiment", "target_mode").unwrap_or(d.target.mode),
            },
            radius: r.real("experiment", "radius").unwrap_or(d.radius),
            t: r.real("experiment", "t").unwrap_or(d.t),
            t1: r.real("experiment", "t1").unwrap_or(d.t1),
            n_pilot: r.int("experiment", "n_pilot").unwrap_or(d.n_pilot),
            k_threshold: r.real("experiment", "K"),
            with_reaction: r.boolean("experiment", "with_reaction").unwrap_or(d.with_reaction),
            times: r.reals("experiment", "times").unwrap_or(d.times.clone()),
            psi: r.string("experiment", "psi").unwrap_or(d.psi.clone()),
            psi_eps: r.real("experiment", "psi_eps").unwrap_or(d.psi_eps),
            direction_mode: r.int("experiment", "direction_mode").unwrap_or(d.direction_mode),
            fd_eps: r.real("experiment", "fd_eps").unwrap_or(d.fd_eps),
            dump_profiles: r.boolean("experiment", "dump_profiles").unwrap_or(d.dump_profiles),
            kernel_modes: r.int("experiment", "kernel_modes"),
        };

        let mut errors = std::mem::take(&mut r.errors);
        let (Some(n_cells), Some(dt), Some(horizon), Some(preset)) = (n_cells, dt, horizon, preset) else {
            return Err(SpdeError::Validation(errors));
        };
        let cfg = RunConfig {
            n_cells,
            initial: InitialShape {
                amp: init_amp,
                mode: init_mode,
            },
            observable_point,
            dt,
            horizon,
            save_every,
            preset,
            params,
            mollify,
            truncation,
            exit_levels,
            seed,
            stream,
            sigma_scale,
            experiment,
        };
        errors.extend(cfg.semantic_errors());
        if !errors.is_empty() {
            return Err(SpdeError::Validation(errors));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn semantic_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.n_cells < 4 {
            errors.push(format!("grid.n_cells must be at least 4 (got {})", self.n_cells));
        }
        for (name, mode) in [
            ("grid.init_mode", self.initial.mode),
            ("experiment.init2_mode", self.experiment.second.mode),
            ("experiment.target_mode", self.experiment.target.mode),
            ("experiment.direction_mode", self.experiment.direction_mode),
        ] {
            if mode == 0 || mode >= self.n_cells.max(1) {
                errors.push(format!("{name} must lie in 1..n_cells (got {mode})"));
            }
        }
        if !(0.0..=1.0).contains(&self.observable_point) {
            errors.push("grid.observable_point must lie in [0, 1]".into());
        }
        if !self.exit_levels.iter().all(|r| *r > 0.0) {
            errors.push("truncation.exit_levels must be positive".into());
        }
        if !(self.sigma_scale.is_finite()) {
            errors.push("noise.sigma_scale must be finite".into());
        }
        if self.experiment.times.iter().any(|t| !(*t > 0.0)) {
            errors.push("experiment.times must be positive".into());
        }
        if self.n_cells >= 4 {
            match self.sim_config() {
                Ok(sim) => {
                    if let Err(e) = sim.validate() {
                        match e {
                            SpdeError::Validation(list) => errors.extend(list),
                            other => errors.push(other.to_string()),
                        }
                    }
                }
                Err(SpdeError::Validation(list)) => errors.extend(list),
                Err(e) => errors.push(e.to_string()),
            }
        }
        errors
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.n_cells)
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let set = make_preset(self.preset, &self.params)?;
        Ok(if self.sigma_scale == 1.0 {
            set
        } else {
            set.with_sigma_scaled(self.sigma_scale)
        })
    }

    /// Solver configuration (initial condition, truncation, noise and thinning
    /// all applied).
    pub fn sim_config(&self) -> Result<SimConfig> {
        let grid = self.grid()?;
        let mut sim = SimConfig::new(grid, self.dt, self.horizon, self.coefficients()?)
            .with_initial(self.initial.field(grid))
            .with_seed(self.seed, self.stream)
            .with_save_every(self.save_every)
            .with_exit_levels(self.exit_levels.clone());
        sim.truncation = self.truncation.map(|level| crate::coefficients::TruncationGate { level });
        sim.mollification = self.mollify;
        sim.observable_point = self.observable_point;
        Ok(sim)
    }

    /// Canonical text with every resolved value; parses back to `self`.
    pub fn to_text(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let p = &self.params;
        let e = &self.experiment;
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "n_cells = {}", self.n_cells);
        let _ = writeln!(s, "init_amp = {:?}", self.initial.amp);
        let _ = writeln!(s, "init_mode = {}", self.initial.mode);
        let _ = writeln!(s, "observable_point = {:?}", self.observable_point);
        let _ = writeln!(s, "\n[time]");
        let _ = writeln!(s, "dt = {:?}", self.dt);
        let _ = writeln!(s, "horizon = {:?}", self.horizon);
        let _ = writeln!(s, "save_every = {}", self.save_every);
        let _ = writeln!(s, "\n[coefficients]");
        let _ = writeln!(s, "preset = {}", self.preset);
        for (k, v) in [
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("cubic", p.cubic),
            ("g_lin", p.g_lin),
            ("g_quad", p.g_quad),
            ("sigma", p.sigma),
            ("sigma_amp", p.sigma_amp),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        for (k, v) in [("K", p.growth), ("L", p.lipschitz), ("k1", p.sigma_lower), ("k2", p.sigma_upper)] {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {v:?}");
            }
        }
        if let Some(n) = self.mollify {
            let _ = writeln!(s, "mollify = {n}");
        }
        let _ = writeln!(s, "\n[truncation]");
        if let Some(r) = self.truncation {
            let _ = writeln!(s, "R = {r:?}");
        }
        if !self.exit_levels.is_empty() {
            let _ = writeln!(s, "exit_levels = {}", list(&self.exit_levels));
        }
        let _ = writeln!(s, "\n[noise]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "stream = {}", self.stream);
        let _ = writeln!(s, "sigma_scale = {:?}", self.sigma_scale);
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "n_paths = {}", e.n_paths);
        let _ = writeln!(s, "n_samples = {}", e.n_samples);
        if let Some(b) = e.burn_in {
            let _ = writeln!(s, "burn_in = {b:?}");
        }
        let _ = writeln!(s, "n_bins = {}", e.n_bins);
        let _ = writeln!(s, "init2_amp = {:?}", e.second.amp);
        let _ = writeln!(s, "init2_mode = {}", e.second.mode);
        let _ = writeln!(s, "target_amp = {:?}", e.target.amp);
        let _ = writeln!(s, "target_mode = {}", e.target.mode);
        let _ = writeln!(s, "radius = {:?}", e.radius);
        let _ = writeln!(s, "t = {:?}", e.t);
        let _ = writeln!(s, "t1 = {:?}", e.t1);
        let _ = writeln!(s, "n_pilot = {}", e.n_pilot);
        if let Some(k) = e.k_threshold {
            let _ = writeln!(s, "K = {k:?}");
        }
        let _ = writeln!(s, "with_reaction = {}", e.with_reaction);
        let _ = writeln!(s, "times = {}", list(&e.times));
        let _ = writeln!(s, "psi = {}", e.psi);
        let _ = writeln!(s, "psi_eps = {:?}", e.psi_eps);
        let _ = writeln!(s, "direction_mode = {}", e.direction_mode);
        let _ = writeln!(s, "fd_eps = {:?}", e.fd_eps);
        let _ = writeln!(s, "dump_profiles = {}", e.dump_profiles);
        if let Some(n) = e.kernel_modes {
            let _ = writeln!(s, "kernel_modes = {n}");
        }
        s
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_path(path)
}
