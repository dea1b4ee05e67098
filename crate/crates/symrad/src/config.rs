//! TOML run configuration: parsing, validation with field paths, and the
//! normalized echo that output files embed for reproducibility.

use serde::{Deserialize, Serialize};

use crate::dynamics::SolverConfig;
use crate::initial::{InitialStateSpec, StateComponent};
use crate::model::{CavityInput, PairMatrix, SystemParams};
use crate::{C64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Free decay of a prepared state on a time grid.
    Pulse,
    /// Resonantly driven evolution towards the steady state.
    Driven,
    /// Incoherently pumped steady state plus emission spectrum and line fit.
    PumpedSpectrum,
    /// One simulation per value of a named parameter.
    Sweep,
    /// Basis/assembly scaling measurements.
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairComplexEntry {
    pub l: usize,
    pub lp: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRateEntry {
    pub l: usize,
    pub lp: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectiveEntry {
    pub l: usize,
    pub lp: usize,
    pub gamma: f64,
    #[serde(default)]
    pub omega: f64,
}

/// Cavity section: `kind = "direct"` lists the collective rates, `kind =
/// "explicit"` gives mode parameters for adiabatic elimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collective: Vec<CollectiveEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lamb_sign: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g: Vec<PairComplexEntry>,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            kind: "direct".into(),
            collective: Vec::new(),
            kappa: None,
            omega_c: None,
            lamb_sign: None,
            g: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub levels: usize,
    pub atoms: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default)]
    pub omega_d: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drive: Vec<PairComplexEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<PairRateEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub xi: Vec<PairRateEntry>,
    #[serde(default)]
    pub cavity: CavityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// One `[re, im]` pair per level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub components: Vec<ComponentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub t_start: f64,
    pub t_stop: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| {
                self.t_start
                    + (self.t_stop - self.t_start) * i as f64 / (n - 1) as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn omegas(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| {
                self.omega_min
                    + (self.omega_max - self.omega_min) * i as f64 / (n - 1) as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One of: `atoms`, `gamma_01`, `drive_10`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

fn default_unit() -> String {
    "Gamma10".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Documentation of the unit system; all rates are interpreted in these
    /// units (the examples use the collective decay rate of the 1→0 line).
    #[serde(default = "default_unit")]
    pub unit: String,
    pub params: ParamsConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_grid: Option<FrequencyGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub output: OutputConfig,
}

pub const SWEEP_PARAMETERS: &[&str] = &["atoms", "gamma_01", "drive_10"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Validation(format!("config parse error: {e}")))?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Fill derivable defaults so the echoed config equals the effective one.
    fn normalize(&mut self) {
        if self.params.omega.is_none() {
            self.params.omega = Some(vec![0.0; self.params.levels]);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.params.levels;
        let field = |path: &str, msg: String| Error::Validation(format!("{path}: {msg}"));
        if s < 2 {
            return Err(field("params.levels", "need at least 2".into()));
        }
        if self.params.atoms < 1 {
            return Err(field("params.atoms", "need at least 1".into()));
        }
        if let Some(w) = &self.params.omega {
            if w.len() != s {
                return Err(field(
                    "params.omega",
                    format!("has {} entries, expected {s}", w.len()),
                ));
            }
        }
        let check_pair = |path: &str, l: usize, lp: usize| -> Result<()> {
            if l >= s || lp >= s || l == lp {
                return Err(field(path, format!("invalid level pair ({l},{lp})")));
            }
            Ok(())
        };
        for (i, e) in self.params.drive.iter().enumerate() {
            check_pair(&format!("params.drive[{i}]"), e.l, e.lp)?;
        }
        for (i, e) in self.params.gamma.iter().enumerate() {
            check_pair(&format!("params.gamma[{i}]"), e.l, e.lp)?;
            if e.rate < 0.0 {
                return Err(field(&format!("params.gamma[{i}].rate"), "negative".into()));
            }
        }
        for (i, e) in self.params.xi.iter().enumerate() {
            check_pair(&format!("params.xi[{i}]"), e.l, e.lp)?;
            if e.rate < 0.0 {
                return Err(field(&format!("params.xi[{i}].rate"), "negative".into()));
            }
        }
        match self.params.cavity.kind.as_str() {
            "direct" => {
                for (i, e) in self.params.cavity.collective.iter().enumerate() {
                    check_pair(&format!("params.cavity.collective[{i}]"), e.l, e.lp)?;
                }
            }
            "explicit" => {
                if self.params.cavity.kappa.is_none() {
                    return Err(field("params.cavity.kappa", "required for explicit".into()));
                }
                for (i, e) in self.params.cavity.g.iter().enumerate() {
                    check_pair(&format!("params.cavity.g[{i}]"), e.l, e.lp)?;
                }
            }
            other => {
                return Err(field(
                    "params.cavity.kind",
                    format!("unknown kind {other:?}, expected \"direct\" or \"explicit\""),
                ));
            }
        }
        if self.initial.components.is_empty() {
            return Err(field("initial.components", "must not be empty".into()));
        }
        for (i, c) in self.initial.components.iter().enumerate() {
            let path = format!("initial.components[{i}]");
            match (&c.amplitudes, c.theta) {
                (Some(_), Some(_)) => {
                    return Err(field(&path, "give either amplitudes or theta/phi".into()));
                }
                (None, None) => {
                    return Err(field(&path, "needs amplitudes or theta/phi".into()));
                }
                _ => {}
            }
        }
        if let Some(g) = &self.grid {
            if g.t_stop <= g.t_start {
                return Err(field("grid.t_stop", "must exceed grid.t_start".into()));
            }
            if g.points < 2 {
                return Err(field("grid.points", "need at least 2".into()));
            }
        }
        if let Some(g) = &self.frequency_grid {
            if g.omega_max <= g.omega_min {
                return Err(field("frequency_grid.omega_max", "must exceed omega_min".into()));
            }
            if g.points < 2 {
                return Err(field("frequency_grid.points", "need at least 2".into()));
            }
        }
        if let Some(sw) = &self.sweep {
            if !SWEEP_PARAMETERS.contains(&sw.parameter.as_str()) {
                return Err(field(
                    "sweep.parameter",
                    format!("unknown {:?}, expected one of {:?}", sw.parameter, SWEEP_PARAMETERS),
                ));
            }
            if sw.values.is_empty() {
                return Err(field("sweep.values", "must not be empty".into()));
            }
        }
        match self.scenario {
            Scenario::Pulse | Scenario::Driven => {
                if self.grid.is_none() {
                    return Err(field("grid", "required for this scenario".into()));
                }
            }
            Scenario::PumpedSpectrum => {
                if self.frequency_grid.is_none() {
                    return Err(field("frequency_grid", "required for pumped-spectrum".into()));
                }
            }
            Scenario::Sweep => {
                if self.sweep.is_none() {
                    return Err(field("sweep", "required for the sweep scenario".into()));
                }
            }
            Scenario::Bench => {}
        }
        // final consistency pass through the physical layer
        self.system_params()?.validate()?;
        self.initial_spec()?;
        Ok(())
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let s = self.params.levels;
        let mut p = SystemParams::new(s, self.params.atoms);
        if let Some(w) = &self.params.omega {
            p.omega = w.clone();
        }
        p.omega_d = self.params.omega_d;
        for e in &self.params.drive {
            p.drive.set(e.l, e.lp, C64::new(e.re, e.im));
        }
        for e in &self.params.gamma {
            p.gamma.set(e.l, e.lp, e.rate);
        }
        for e in &self.params.xi {
            p.xi.set(e.l, e.lp, e.rate);
        }
        p.cavity = match self.params.cavity.kind.as_str() {
            "explicit" => {
                let mut g = PairMatrix::zeros(s);
                for e in &self.params.cavity.g {
                    g.set(e.l, e.lp, C64::new(e.re, e.im));
                }
                CavityInput::Explicit {
                    g,
                    kappa: self.params.cavity.kappa.unwrap_or(0.0),
                    omega_c: self.params.cavity.omega_c.unwrap_or(0.0),
                    lamb_sign: self.params.cavity.lamb_sign.unwrap_or(1.0),
                }
            }
            _ => {
                let mut gamma_collective = PairMatrix::zeros(s);
                let mut omega_collective = PairMatrix::zeros(s);
                for e in &self.params.cavity.collective {
                    gamma_collective.set(e.l, e.lp, e.gamma);
                    omega_collective.set(e.l, e.lp, e.omega);
                }
                CavityInput::Direct { gamma_collective, omega_collective }
            }
        };
        Ok(p)
    }

    pub fn initial_spec(&self) -> Result<InitialStateSpec> {
        let s = self.params.levels;
        let mut components = Vec::new();
        for c in &self.initial.components {
            let comp = if let Some(amps) = &c.amplitudes {
                StateComponent::Amplitudes {
                    amplitudes: amps.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
                }
            } else {
                StateComponent::Bloch {
                    theta: c.theta.unwrap_or(0.0),
                    phi: c.phi.unwrap_or(0.0),
                }
            };
            components.push((c.probability, comp));
        }
        let spec = InitialStateSpec { levels: s, components };
        spec.single_atom_expectations()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PULSE_EXAMPLE: &str = r#"
scenario = "pulse"

[params]
levels = 2
atoms = 8

[params.cavity]
kind = "direct"
collective = [{ l = 1, lp = 0, gamma = 1.0 }]

[initial]
components = [{ probability = 1.0, theta = 3.141592653589793 }]

[grid]
t_stop = 4.0
points = 100

[output]
path = "pulse.csv"
"#;

    #[test]
    fn example_parses_and_validates() {
        let cfg = RunConfig::from_toml(PULSE_EXAMPLE).unwrap();
        assert_eq!(cfg.scenario, Scenario::Pulse);
        let p = cfg.system_params().unwrap();
        assert_eq!(p.atoms, 8);
        if let CavityInput::Direct { gamma_collective, .. } = &p.cavity {
            assert_eq!(gamma_collective.get(1, 0), 1.0);
        } else {
            panic!("expected direct rates");
        }
        let spec = cfg.initial_spec().unwrap();
        assert_eq!(spec.levels, 2);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(PULSE_EXAMPLE).unwrap();
        let echoed = cfg.to_toml();
        let again = RunConfig::from_toml(&echoed).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn validation_reports_field_paths() {
        let bad = PULSE_EXAMPLE.replace("atoms = 8", "atoms = 0");
        let err = RunConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("params.atoms"), "got: {err}");

        let bad = PULSE_EXAMPLE.replace(
            "collective = [{ l = 1, lp = 0, gamma = 1.0 }]",
            "collective = [{ l = 3, lp = 0, gamma = 1.0 }]",
        );
        let err = RunConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("params.cavity.collective[0]"), "got: {err}");
    }

    #[test]
    fn scenario_prerequisites_enforced() {
        let no_grid = PULSE_EXAMPLE
            .replace("[grid]\nt_stop = 4.0\npoints = 100\n", "");
        let err = RunConfig::from_toml(&no_grid).unwrap_err();
        assert!(err.to_string().contains("grid"), "got: {err}");

        let sweep = PULSE_EXAMPLE.replace("scenario = \"pulse\"", "scenario = \"sweep\"");
        let err = RunConfig::from_toml(&sweep).unwrap_err();
        assert!(err.to_string().contains("sweep"), "got: {err}");
    }

    #[test]
    fn unknown_sweep_parameter_rejected() {
        let cfg_text = format!(
            "{}\n[sweep]\nparameter = \"coupling\"\nvalues = [1.0]\n",
            PULSE_EXAMPLE
        );
        let err = RunConfig::from_toml(&cfg_text).unwrap_err();
        assert!(err.to_string().contains("sweep.parameter"), "got: {err}");
    }

    #[test]
    fn time_grid_is_monotone_and_inclusive() {
        let g = TimeGrid { t_start: 1.0, t_stop: 3.0, points: 5 };
        let t = g.times();
        assert_eq!(t.first().copied(), Some(1.0));
        assert_eq!(t.last().copied(), Some(3.0));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
