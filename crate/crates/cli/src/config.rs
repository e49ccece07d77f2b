//! Experiment configuration files.
//!
//! A config is JSON (`.json`) or TOML (`.toml`, `.ini`, `.cfg`). Unknown keys
//! are rejected. [`ExperimentConfig::resolve`] validates a config and fills in
//! every default so the resolved form, stored in the manifest, reproduces the
//! run on its own.

use std::fs;
use std::path::{Path, PathBuf};

use qhd::classical::TimeMap;
use qhd::patterns::Pattern;
use qhd::spectral::DegenerateBasis;
use qhd::{Boundary, Lattice, LatticeSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Enumerate,
    Fragments,
    Statics,
    Melt1d,
    Defect2d,
    Spectrum,
    ClassicalScaling,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Enumerate => "enumerate",
            ExperimentKind::Fragments => "fragments",
            ExperimentKind::Statics => "statics",
            ExperimentKind::Melt1d => "melt1d",
            ExperimentKind::Defect2d => "defect2d",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::ClassicalScaling => "classical-scaling",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryConfig {
    #[default]
    Open,
    Periodic,
}

impl From<BoundaryConfig> for Boundary {
    fn from(b: BoundaryConfig) -> Self {
        match b {
            BoundaryConfig::Open => Boundary::Open,
            BoundaryConfig::Periodic => Boundary::Periodic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Linear extent; scans over several sizes use `sizes` instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<usize>,
}

/// Named pattern (`"block-crystal(3)"`) or explicit site list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternConfig {
    Named(String),
    Sites { sites: Vec<usize> },
}

impl PatternConfig {
    pub fn to_pattern(&self) -> Result<Pattern, CliError> {
        match self {
            PatternConfig::Named(name) => name
                .parse()
                .map_err(|e: qhd::Error| CliError::config(format!("pattern: {e}"))),
            PatternConfig::Sites { sites } => Ok(Pattern::Sites(sites.clone())),
        }
    }
}

/// Times `0, step, 2 step, ..., t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = (self.t_max / self.step).round() as usize;
        (0..=n).map(|k| k as f64 * self.step).collect()
    }

    fn validate(&self, what: &str) -> Result<(), CliError> {
        if !(self.step > 0.0 && self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(CliError::config(format!(
                "{what}: need step > 0 and a finite t_max >= 0"
            )));
        }
        let n = self.t_max / self.step;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(CliError::config(format!(
                "{what}: t_max = {} is not a multiple of step = {}",
                self.t_max, self.step
            )));
        }
        if n > 1e7 {
            return Err(CliError::config(format!(
                "{what}: more than 1e7 grid points"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub krylov_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMapKind {
    #[default]
    PerParticle,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    /// Trajectories; 0 skips the classical leg of melt1d and defect2d.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_map: Option<TimeMapKind>,
    /// `Jt` per step for the linear time map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
    /// Record grid of the classical leg when it should run longer than the
    /// quantum one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    /// `[lo, hi]` in `Jt` over which the classical `G` is averaged.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau_window: Option<[f64; 2]>,
    /// classical-scaling: run length in diffusive sweeps (`sweeps * M * L^2` steps).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<f64>,
    /// classical-scaling: fixed run length, overriding `sweeps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
}

impl ClassicalConfig {
    pub fn time_map(&self) -> TimeMap {
        match self.time_map.unwrap_or_default() {
            TimeMapKind::PerParticle => TimeMap::PerParticle,
            TimeMapKind::Linear => TimeMap::Linear(self.time_scale.unwrap_or(1.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DegenerateConfig {
    Solver,
    #[default]
    Canonical,
}

impl From<DegenerateConfig> for DegenerateBasis {
    fn from(d: DegenerateConfig) -> Self {
        match d {
            DegenerateConfig::Solver => DegenerateBasis::Solver,
            DegenerateConfig::Canonical => DegenerateBasis::Canonical,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate_basis: Option<DegenerateConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub lattice: LatticeConfig,
    /// Particle number of the sector (or of a crystal pattern).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    /// `[lo, hi]` window of the melt1d log-log fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            lattice: LatticeConfig::default(),
            m: None,
            pattern: None,
            times: None,
            fit_window: None,
            evolution: EvolutionConfig::default(),
            classical: ClassicalConfig::default(),
            spectral: SpectralConfig::default(),
            seed: None,
            dense_cap: None,
            memory_cap: None,
            output_dir: None,
        }
    }

    /// Parses a config file; the format follows the extension.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "json" => Self::from_json(&text),
            "toml" | "ini" | "cfg" => Self::from_toml(&text),
            _ => Err(CliError::config(format!(
                "unrecognised config extension {:?}; use .json, .toml, .ini or .cfg",
                ext
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("invalid JSON config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    /// Validates the config and fills in every default.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        use ExperimentKind::*;
        let mut c = self.clone();
        let kind = c.experiment;
        c.seed = Some(c.seed.unwrap_or(0));
        c.dense_cap = Some(c.dense_cap.unwrap_or(qhd::spectral::DEFAULT_DENSE_CAP));
        c.memory_cap = Some(c.memory_cap.unwrap_or(qhd::statespace::DEFAULT_MEMORY_CAP));

        let lat = &mut c.lattice;
        let default_dim = if kind == Melt1d { 1 } else { 2 };
        lat.dim = Some(lat.dim.unwrap_or(default_dim));
        lat.boundary = Some(lat.boundary.unwrap_or_default());
        lat.exclusion_radius = Some(lat.exclusion_radius.unwrap_or(1));
        match kind {
            Statics | ClassicalScaling => {
                if lat.l.is_some() {
                    return Err(CliError::config(format!(
                        "{} scans several sizes: use lattice.sizes instead of lattice.l",
                        kind.as_str()
                    )));
                }
                let default = if kind == Statics {
                    vec![3, 4, 5]
                } else {
                    vec![4, 6, 8, 10, 12]
                };
                let sizes = lat.sizes.clone().unwrap_or(default);
                if sizes.is_empty() {
                    return Err(CliError::config("lattice.sizes is empty"));
                }
                lat.sizes = Some(sizes);
            }
            _ => {
                if lat.sizes.is_some() {
                    return Err(CliError::config(format!(
                        "{} runs on one lattice: use lattice.l instead of lattice.sizes",
                        kind.as_str()
                    )));
                }
                let default = match kind {
                    Melt1d => Some(41),
                    Defect2d => Some(6),
                    _ => None,
                };
                lat.l = Some(
                    lat.l
                        .or(default)
                        .ok_or_else(|| CliError::config("lattice.l is required"))?,
                );
            }
        }
        if kind == Melt1d && lat.dim != Some(1) {
            return Err(CliError::config("melt1d runs on a chain (lattice.dim = 1)"));
        }
        if kind == Melt1d
            && (lat.boundary != Some(BoundaryConfig::Open) || lat.exclusion_radius != Some(1))
        {
            return Err(CliError::config(
                "melt1d measures spreading towards the chain ends: open boundary, exclusion radius 1",
            ));
        }
        if kind == ClassicalScaling
            && (lat.dim != Some(2)
                || lat.boundary != Some(BoundaryConfig::Open)
                || lat.exclusion_radius != Some(1))
        {
            return Err(CliError::config(
                "classical-scaling runs on open square lattices with exclusion radius 1",
            ));
        }
        for l in c.lattice_sizes() {
            Lattice::new(c.lattice_spec(l))
                .map_err(|e| CliError::config(format!("lattice: {e}")))?;
        }

        let needs_m = matches!(kind, Fragments | Spectrum | Melt1d);
        let default_m = match kind {
            Melt1d => Some(5),
            _ => None,
        };
        c.m = c.m.or(default_m);
        if needs_m && c.m.is_none() {
            return Err(CliError::config(format!(
                "{} needs the sector size m",
                kind.as_str()
            )));
        }
        if !matches!(kind, Fragments | Spectrum | Melt1d | Defect2d | Enumerate) && c.m.is_some() {
            return Err(CliError::config(format!(
                "{} does not take m",
                kind.as_str()
            )));
        }

        match kind {
            Melt1d | Defect2d | ClassicalScaling => {
                let default = match kind {
                    Melt1d => PatternConfig::Named("crystal-1d".into()),
                    Defect2d => PatternConfig::Named("block-crystal(3)".into()),
                    _ => PatternConfig::Named("bottom-half-packed".into()),
                };
                let pat = c.pattern.clone().unwrap_or(default);
                let pattern = pat.to_pattern()?;
                for l in c.lattice_sizes() {
                    let lattice = Lattice::new(c.lattice_spec(l)).expect("validated above");
                    let sites = pattern
                        .realize(&lattice, c.m)
                        .map_err(|e| CliError::config(format!("pattern: {e}")))?;
                    if kind == Defect2d {
                        c.m = Some(sites.len());
                    }
                }
                c.pattern = Some(pat);
            }
            _ => {
                if c.pattern.is_some() {
                    return Err(CliError::config(format!(
                        "{} does not take a pattern",
                        kind.as_str()
                    )));
                }
            }
        }

        match kind {
            Melt1d | Defect2d => {
                let default = if kind == Melt1d {
                    TimeGrid {
                        t_max: 10.0,
                        step: 0.2,
                    }
                } else {
                    TimeGrid {
                        t_max: 200.0,
                        step: 5.0,
                    }
                };
                let grid = c.times.unwrap_or(default);
                grid.validate("times")?;
                c.times = Some(grid);
                if kind == Melt1d {
                    let w = c.fit_window.unwrap_or([2.0, 10.0]);
                    if !(w[0] > 0.0 && w[1] > w[0]) {
                        return Err(CliError::config("fit_window needs 0 < lo < hi"));
                    }
                    c.fit_window = Some(w);
                } else if c.fit_window.is_some() {
                    return Err(CliError::config("fit_window applies to melt1d only"));
                }
                let ev = &mut c.evolution;
                let d = qhd::dynamics::EvolveOptions::default();
                ev.coupling = Some(ev.coupling.unwrap_or(1.0));
                ev.tol = Some(ev.tol.unwrap_or(d.tol));
                ev.krylov_dim = Some(ev.krylov_dim.unwrap_or(d.krylov_dim));
                ev.dt_initial = Some(ev.dt_initial.unwrap_or(d.dt_initial));
                ev.dt_min = Some(ev.dt_min.unwrap_or(d.dt_min));
                ev.dt_max = Some(ev.dt_max.unwrap_or(d.dt_max));
                let o = c.evolve_options();
                if !(o.tol > 0.0
                    && o.krylov_dim >= 2
                    && o.dt_min > 0.0
                    && o.dt_min <= o.dt_initial
                    && o.dt_initial <= o.dt_max)
                {
                    return Err(CliError::config(
                        "evolution: need tol > 0, krylov_dim >= 2 and 0 < dt_min <= dt_initial <= dt_max",
                    ));
                }
                if !c.evolution.coupling.unwrap().is_finite() {
                    return Err(CliError::config("evolution.coupling must be finite"));
                }
            }
            _ => {
                if c.times.is_some()
                    || c.fit_window.is_some()
                    || c.evolution != EvolutionConfig::default()
                {
                    return Err(CliError::config(format!(
                        "{} takes no time grid or evolution settings",
                        kind.as_str()
                    )));
                }
            }
        }

        match kind {
            Melt1d | Defect2d | ClassicalScaling => {
                let cl = &mut c.classical;
                let default_n = match kind {
                    ClassicalScaling => 10_000,
                    _ => 100_000,
                };
                cl.n_traj = Some(cl.n_traj.unwrap_or(default_n));
                cl.time_map = Some(cl.time_map.unwrap_or_default());
                match cl.time_map {
                    Some(TimeMapKind::Linear) => {
                        let s = cl.time_scale.unwrap_or(1.0);
                        if !(s > 0.0 && s.is_finite()) {
                            return Err(CliError::config("classical.time_scale must be positive"));
                        }
                        cl.time_scale = Some(s);
                    }
                    _ => {
                        if cl.time_scale.is_some() {
                            return Err(CliError::config(
                                "classical.time_scale applies to the linear time map only",
                            ));
                        }
                    }
                }
                if kind == ClassicalScaling {
                    if cl.n_traj == Some(0) {
                        return Err(CliError::config("classical.n_traj must be positive"));
                    }
                    if cl.times.is_some() || cl.plateau_window.is_some() {
                        return Err(CliError::config(
                            "classical-scaling records only the final step; use sweeps or steps",
                        ));
                    }
                    if cl.steps.is_none() {
                        let s = cl.sweeps.unwrap_or(50.0);
                        if !(s > 0.0 && s.is_finite()) {
                            return Err(CliError::config("classical.sweeps must be positive"));
                        }
                        cl.sweeps = Some(s);
                    } else if cl.sweeps.is_some() {
                        return Err(CliError::config(
                            "give classical.steps or classical.sweeps, not both",
                        ));
                    }
                } else {
                    if cl.sweeps.is_some() || cl.steps.is_some() {
                        return Err(CliError::config(
                            "classical.sweeps/steps apply to classical-scaling only",
                        ));
                    }
                    let quantum = c.times.expect("set above");
                    // defect2d follows the walk well past the quantum run so the
                    // plateau is measured at genuinely long times.
                    let default = if kind == Defect2d {
                        TimeGrid {
                            t_max: 10.0 * quantum.t_max,
                            step: quantum.step,
                        }
                    } else {
                        quantum
                    };
                    let grid = cl.times.unwrap_or(default);
                    grid.validate("classical.times")?;
                    cl.times = Some(grid);
                    if kind == Defect2d {
                        let w = cl.plateau_window.unwrap_or([grid.t_max / 2.0, grid.t_max]);
                        if !(w[0] >= 0.0 && w[1] >= w[0] && w[1] <= grid.t_max) {
                            return Err(CliError::config(
                                "classical.plateau_window must lie inside the classical time grid",
                            ));
                        }
                        cl.plateau_window = Some(w);
                    } else if cl.plateau_window.is_some() {
                        return Err(CliError::config(
                            "classical.plateau_window applies to defect2d only",
                        ));
                    }
                }
            }
            _ => {
                if c.classical != ClassicalConfig::default() {
                    return Err(CliError::config(format!(
                        "{} takes no classical settings",
                        kind.as_str()
                    )));
                }
            }
        }

        if kind == Spectrum {
            let sp = &mut c.spectral;
            sp.degenerate_basis = Some(sp.degenerate_basis.unwrap_or_default());
        } else if c.spectral != SpectralConfig::default() {
            return Err(CliError::config(format!(
                "{} takes no spectral settings",
                kind.as_str()
            )));
        }
        Ok(c)
    }

    /// Sizes the experiment runs on.
    pub fn lattice_sizes(&self) -> Vec<usize> {
        match (&self.lattice.sizes, self.lattice.l) {
            (Some(s), _) => s.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => Vec::new(),
        }
    }

    pub fn lattice_spec(&self, l: usize) -> LatticeSpec {
        let spec = if self.lattice.dim.unwrap_or(2) == 1 {
            LatticeSpec::chain(l)
        } else {
            LatticeSpec::square(l)
        };
        spec.with_boundary(self.lattice.boundary.unwrap_or_default().into())
            .with_exclusion_radius(self.lattice.exclusion_radius.unwrap_or(1))
    }

    pub fn evolve_options(&self) -> qhd::dynamics::EvolveOptions {
        let d = qhd::dynamics::EvolveOptions::default();
        let e = &self.evolution;
        qhd::dynamics::EvolveOptions {
            tol: e.tol.unwrap_or(d.tol),
            krylov_dim: e.krylov_dim.unwrap_or(d.krylov_dim),
            dt_initial: e.dt_initial.unwrap_or(d.dt_initial),
            dt_min: e.dt_min.unwrap_or(d.dt_min),
            dt_max: e.dt_max.unwrap_or(d.dt_max),
        }
    }
}
