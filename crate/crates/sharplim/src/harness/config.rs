use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Box and resolution: the node spacing is the largest with `ε/h ≥ eps_per_h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub dim: usize,
    pub lx: f64,
    pub ly: f64,
    pub eps_per_h: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { dim: 2, lx: 1.0, ly: 1.0, eps_per_h: 4.0 }
    }
}

/// Sweep configuration. JSON keys follow the field names, with `T` and `C0`
/// for the end time and the initial-data bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub scenario: String,
    pub eps_list: Vec<f64>,
    pub grid: GridSpec,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub eta: f64,
    /// Overrides the measured `‖u₀‖ + ‖∇u₀‖ + ‖Δu₀‖` when set.
    #[serde(rename = "C0")]
    pub c0: Option<f64>,
    pub r0: f64,
    pub sigma0: f64,
    /// Constant perturbation g₀; `None` picks the scenario default.
    pub g0: Option<f64>,
    /// Half-width, in units of ε, of the neighbourhood excluded by the
    /// generation-time classification.
    pub c_nbhd: f64,
    /// Uniform snapshots after the generation window.
    pub snapshots: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            scenario: "1d-generation".into(),
            eps_list: vec![0.04, 0.02, 0.01],
            grid: GridSpec::default(),
            t_end: 0.05,
            eta: 0.1,
            c0: None,
            r0: 0.3,
            sigma0: 0.05,
            g0: None,
            c_nbhd: 3.0,
            snapshots: 20,
        }
    }
}

pub const SCENARIOS: [&str; 6] = ["1d-generation", "1d-forced", "radial2d-curvature", "radial2d-forced", "fhn-radial", "pp-radial"];

impl SweepConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = SweepConfig { scenario: name.to_string(), ..Default::default() };
        let one_d = GridSpec { dim: 1, lx: 1.0, ly: 0.0, eps_per_h: 4.0 };
        let cfg = match name {
            "1d-generation" => SweepConfig { grid: one_d, t_end: 0.05, ..base },
            "1d-forced" => SweepConfig { grid: one_d, t_end: 0.05, g0: Some(0.5), ..base },
            "radial2d-curvature" => SweepConfig { t_end: 0.02, ..base },
            "radial2d-forced" => SweepConfig { t_end: 0.05, ..base },
            "fhn-radial" => SweepConfig { eps_list: vec![0.04, 0.02], t_end: 0.03, ..base },
            "pp-radial" => SweepConfig { eps_list: vec![0.04, 0.02], t_end: 0.03, ..base },
            other => return Err(Error::Config(format!("unknown scenario '{other}' (known: {})", SCENARIOS.join(", ")))),
        };
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(Error::Config(format!("unknown scenario '{}'", self.scenario)));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Config("eps_list must hold values in (0, 1)".into()));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps_list must be sorted strictly descending".into()));
        }
        if self.grid.eps_per_h < 4.0 {
            return Err(Error::Config(format!("eps_per_h = {} is below the resolution floor 4", self.grid.eps_per_h)));
        }
        if !(self.t_end > 0.0) || !(self.eta > 0.0) || !(self.r0 > 0.0) || !(self.sigma0 > 0.0) {
            return Err(Error::Config("T, eta, r0, sigma0 must be positive".into()));
        }
        for &eps in &self.eps_list {
            self.grid_for(eps)?;
        }
        Ok(())
    }

    pub fn grid_for(&self, eps: f64) -> Result<Grid> {
        let g = Grid::with_max_spacing(self.grid.dim, self.grid.lx, self.grid.ly, eps / self.grid.eps_per_h)?;
        if eps < 4.0 * g.h * (1.0 - 1e-12) {
            return Err(Error::GridTooCoarse { eps, h: g.h });
        }
        Ok(g)
    }

    pub fn is_radial(&self) -> bool {
        self.grid.dim == 2
    }
}
