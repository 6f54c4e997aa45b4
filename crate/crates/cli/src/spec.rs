//! Experiment description: TOML config file plus command-line overrides.
//!
//! Frequency-like inputs (`omega0_tau0_pi`, `gamma_tau0_pi`) are given in
//! units of pi, matching how the parameter sets are usually quoted.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Result};
use giant_atom::presets::{self, Preset, PresetKind};
use giant_atom::{AtomSpec, Complex64, CouplingMode, MultiAtomConfig, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

pub const DEFAULT_HORIZON_GAMMA_T: f64 = 50.0;
pub const DEFAULT_NTRAJ: usize = 500;
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_points: Option<usize>,
    pub omega0_tau0_pi: Option<f64>,
    pub gamma_tau0_pi: Option<f64>,
    pub reflectivity: Option<f64>,
    pub gamma_ext_ratio: Option<f64>,
    pub dephasing_ratio: Option<f64>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub atoms: Vec<AtomSection>,
    pub coupling_mode: Option<CouplingModeName>,
    #[serde(default)]
    pub duplicate_detuning: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon_gamma_t: Option<f64>,
    pub steps_per_tau0: Option<usize>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub stride: Option<usize>,
}

/// Grid of a field map. Positions in units of `x0`, times as `Gamma t`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub x_max: Option<f64>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub n_points: usize,
    /// In units of `Gamma`.
    #[serde(default)]
    pub detuning: f64,
    #[serde(default)]
    pub initial_re: f64,
    #[serde(default)]
    pub initial_im: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingModeName {
    AsPrinted,
    FullCrossCoupling,
}

impl From<CouplingModeName> for CouplingMode {
    fn from(m: CouplingModeName) -> Self {
        match m {
            CouplingModeName::AsPrinted => CouplingMode::AsPrinted,
            CouplingModeName::FullCrossCoupling => CouplingMode::FullCrossCoupling,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
            .map_err(Into::into)
    }

    pub fn from_config(config: &SystemConfig) -> Self {
        ConfigFile {
            n_points: Some(config.n_points()),
            omega0_tau0_pi: Some(config.omega0_tau0() / PI),
            gamma_tau0_pi: Some(config.gamma_tau0() / PI),
            reflectivity: Some(config.reflectivity()),
            gamma_ext_ratio: Some(config.gamma_ext_ratio()),
            dephasing_ratio: Some(config.dephasing_ratio()),
            ..Default::default()
        }
    }

    /// Single-atom configuration. Missing loss and dephasing fields default
    /// to the ideal case.
    pub fn system(&self) -> Result<SystemConfig> {
        let (Some(n), Some(w), Some(g)) = (self.n_points, self.omega0_tau0_pi, self.gamma_tau0_pi) else {
            bail!(ConfigError("config needs n_points, omega0_tau0_pi and gamma_tau0_pi".into()));
        };
        let config = SystemConfig::new(n, w * PI, g * PI)
            .and_then(|c| c.with_reflectivity(self.reflectivity.unwrap_or(1.0)))
            .and_then(|c| c.with_gamma_ext_ratio(self.gamma_ext_ratio.unwrap_or(0.0)))
            .and_then(|c| c.with_dephasing_ratio(self.dephasing_ratio.unwrap_or(0.0)))?;
        Ok(config)
    }

    pub fn multi_atom(&self) -> Result<MultiAtomConfig> {
        if self.atoms.is_empty() {
            bail!(ConfigError("multi-atom run needs at least one [[atoms]] table".into()));
        }
        let (Some(w), Some(g)) = (self.omega0_tau0_pi, self.gamma_tau0_pi) else {
            bail!(ConfigError("config needs omega0_tau0_pi and gamma_tau0_pi".into()));
        };
        let atoms = self
            .atoms
            .iter()
            .map(|a| AtomSpec {
                n_points: a.n_points,
                detuning: a.detuning,
                initial: Complex64::new(a.initial_re, a.initial_im),
            })
            .collect();
        let mode = self.coupling_mode.unwrap_or(CouplingModeName::AsPrinted).into();
        let config = MultiAtomConfig::new(atoms, w * PI, g * PI, self.reflectivity.unwrap_or(1.0), mode)?
            .with_duplicate_detuning(self.duplicate_detuning);
        Ok(config)
    }
}

/// What to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Dynamics,
    Ensemble,
    FieldMap,
    Snapshot,
    Poles,
    MultiAtom,
}

impl From<PresetKind> for Kind {
    fn from(k: PresetKind) -> Self {
        match k {
            PresetKind::Dynamics => Kind::Dynamics,
            PresetKind::FieldMap => Kind::FieldMap,
            PresetKind::Snapshot => Kind::Snapshot,
            PresetKind::Ensemble => Kind::Ensemble,
        }
    }
}

/// Overrides taken from the command line; they win over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps_per_tau0: Option<usize>,
    pub horizon_gamma_t: Option<f64>,
    pub n_traj: Option<usize>,
    pub stride: Option<usize>,
}

/// Fully resolved experiment. Its JSON form is what the manifest hashes.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub preset: Option<String>,
    pub config: ConfigFile,
    pub seed: u64,
    pub steps_per_tau0: usize,
    pub horizon_gamma_t: f64,
    pub n_traj: usize,
    pub stride: usize,
    /// The preset's configuration, free of the round trip through units of pi.
    #[serde(skip)]
    preset_config: Option<SystemConfig>,
}

impl ExperimentSpec {
    pub fn resolve(kind: Option<Kind>, preset: Option<&Preset>, file: Option<ConfigFile>, ov: &Overrides) -> Result<Self> {
        let mut config = match (preset, file) {
            (_, Some(file)) => file,
            (Some(p), None) => ConfigFile::from_config(&p.config),
            (None, None) => bail!(ConfigError("need --preset or --config".into())),
        };
        if let Some(p) = preset {
            // a preset fixes the physics; the file may still carry run and grid settings
            let fixed = ConfigFile::from_config(&p.config);
            config = ConfigFile { run: config.run, field: config.field, ..fixed };
        }
        let kind = kind
            .or(preset.map(|p| p.kind.into()))
            .ok_or_else(|| ConfigError("experiment kind missing".into()))?;
        let run = &config.run;
        let spec = ExperimentSpec {
            kind,
            preset: preset.map(|p| p.name.clone()),
            seed: ov.seed.or(run.seed).unwrap_or(DEFAULT_SEED),
            steps_per_tau0: ov.steps_per_tau0.or(run.steps_per_tau0).unwrap_or(giant_atom::dde::DEFAULT_STEPS_PER_TAU0),
            horizon_gamma_t: ov
                .horizon_gamma_t
                .or(run.horizon_gamma_t)
                .or(preset.map(|p| p.horizon_gamma_t))
                .unwrap_or(DEFAULT_HORIZON_GAMMA_T),
            n_traj: ov.n_traj.or(run.n_traj).unwrap_or(DEFAULT_NTRAJ),
            stride: ov.stride.or(run.stride).unwrap_or(1),
            preset_config: preset.map(|p| p.config.clone()),
            config,
        };
        if !(spec.horizon_gamma_t >= 0.0) || !spec.horizon_gamma_t.is_finite() {
            bail!(ConfigError(format!("horizon must be finite and non-negative, got {}", spec.horizon_gamma_t)));
        }
        if spec.stride == 0 {
            bail!(ConfigError("stride must be positive".into()));
        }
        Ok(spec)
    }
}

impl ExperimentSpec {
    pub fn system(&self) -> Result<SystemConfig> {
        match &self.preset_config {
            Some(c) => Ok(c.clone()),
            None => self.config.system(),
        }
    }
}

pub fn lookup_preset(name: &str) -> Result<Preset> {
    presets::get(name).ok_or_else(|| {
        ConfigError(format!("unknown preset {name:?}; `giant-atom presets` lists the available names")).into()
    })
}
