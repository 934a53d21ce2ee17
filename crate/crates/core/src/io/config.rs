//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::Mesh;
use crate::error::{Error, Result};
use crate::experiments::InitialCondition;
use crate::physics::{ModelParams, ModelSpec, RawKinetics, Variant};
use crate::stepper::{SolverConfig, State};

/// The configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

/// Interface kinetics given directly in scaled form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledKinetics {
    pub kappa: [[f64; 2]; 2],
    pub xi_ext: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    pub lambda2: f64,
    pub alpha: [f64; 2],
    pub dpsi_pzc: [f64; 2],
    pub applied_potential: f64,
    pub rho_hl: f64,
    pub z: [i32; 2],
    pub d: [f64; 2],
    pub ubar: [f64; 2],
    pub ubar2_met: f64,
    /// Raw rate constants; all equal to 1 when neither table is given.
    pub kinetics: Option<RawKinetics>,
    pub scaled: Option<ScaledKinetics>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        ModelSection {
            variant: p.variant,
            lambda2: p.lambda2,
            alpha: p.alpha,
            dpsi_pzc: p.dpsi_pzc,
            applied_potential: p.applied_potential,
            rho_hl: p.rho_hl,
            z: p.z,
            d: p.d,
            ubar: p.ubar,
            ubar2_met: p.ubar2_met,
            kinetics: None,
            scaled: None,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            lambda2: self.lambda2,
            alpha: self.alpha,
            dpsi_pzc: self.dpsi_pzc,
            applied_potential: self.applied_potential,
            rho_hl: self.rho_hl,
            z: self.z,
            d: self.d,
            ubar: self.ubar,
            ubar2_met: self.ubar2_met,
            variant: self.variant,
        }
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        match (&self.kinetics, &self.scaled) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either [model.kinetics] or [model.scaled], not both".into(),
            )),
            (_, Some(s)) => ModelSpec::from_scaled(&self.params(), s.kappa, s.xi_ext),
            (k, None) => ModelSpec::new(&self.params(), &k.unwrap_or(RawKinetics::uniform(1.0))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub n_cells: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { n_cells: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    /// Extra profile exports besides the initial and final states.
    pub snapshot_times: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_end: 1.0,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit potentials; overrides the uniform grid below.
    pub values: Option<Vec<f64>>,
    pub v_min: f64,
    pub v_max: f64,
    pub points: usize,
    pub t_max: f64,
    /// Time step for sweep runs; the solver's when absent.
    pub dt: Option<f64>,
    /// Affine map `axis_scale * V + axis_offset` used for plot labels only.
    pub axis_scale: f64,
    pub axis_offset: f64,
    pub axis_label: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            values: None,
            v_min: -0.5,
            v_max: 0.5,
            points: 11,
            t_max: 50.0,
            dt: None,
            axis_scale: 1.0,
            axis_offset: 0.0,
            axis_label: "applied potential V".into(),
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        if self.points == 1 {
            return vec![self.v_min];
        }
        let step = (self.v_max - self.v_min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.v_min + step * k as f64).collect()
    }

    pub fn solver(&self, base: &SolverConfig) -> SolverConfig {
        SolverConfig {
            dt: self.dt.unwrap_or(base.dt),
            ..base.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid();
        if grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep potentials must be finite".into()));
        }
        if self.values.is_none() && !(self.v_min <= self.v_max) {
            return Err(Error::Config("sweep needs v_min <= v_max".into()));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::param("sweep.t_max", "must be finite and > 0"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::param("sweep.dt", "must be finite and > 0"));
            }
        }
        if !(self.axis_scale.is_finite() && self.axis_scale != 0.0 && self.axis_offset.is_finite()) {
            return Err(Error::param("sweep.axis_scale", "axis map must be finite and invertible"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub snapshot_times: Vec<f64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            snapshot_times: vec![18.0, 1510.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub mesh: MeshSection,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub compare: CompareSection,
    pub output: OutputSection,
}

/// Everything a validated configuration resolves to.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: ModelSpec,
    pub mesh: Mesh,
    pub initial: State,
}

impl RunConfig {
    /// Parses without validating. Syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn shipped() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("shipped configuration parses")
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the model, mesh and initial state, checking every parameter.
    pub fn validate(&self) -> Result<Resolved> {
        let spec = self.model.spec()?;
        let mesh = Mesh::new(self.mesh.n_cells)?;
        self.solver.validate()?;
        let initial = self.initial.build(&spec, &mesh)?;
        if !(self.run.t_end.is_finite() && self.run.t_end > 0.0) {
            return Err(Error::param("run.t_end", format!("must be finite and > 0, got {}", self.run.t_end)));
        }
        for (name, times) in [
            ("run.snapshot_times", &self.run.snapshot_times),
            ("compare.snapshot_times", &self.compare.snapshot_times),
        ] {
            if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(Error::param(name, format!("times must be finite and >= 0, got {t}")));
            }
        }
        self.sweep.validate()?;
        Ok(Resolved { spec, mesh, initial })
    }
}

/// Reads and parses a configuration file; validation is left to the caller.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
