//! Scenario files: one TOML document describing a simulation or an
//! optimization request.
//!
//! ```toml
//! model = "sit"          # sit | wb | seir
//! horizon = 450.0
//! I_H0 = 20.0
//! I_M0 = 20.0
//! rtol = 1e-8
//!
//! [params]               # overrides, keys as in the parameter table
//! K = 65234.0
//!
//! [schedule]
//! times = [100.0, 150.0]
//! weights = [1.5e7, 1.5e7]
//!
//! [optimize]
//! n = 10
//! budget = 3e7
//! mode = "times-and-weights"
//! seed = 1
//! starts = 5
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vector_release::optimizer::{Mode, OptimizerOptions};
use vector_release::published::{HORIZON, SEED_INFECTED};
use vector_release::{EpiParams, ModelKind, Problem, ReleaseSchedule, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Sit,
    Wb,
    /// Uncontrolled outbreak; simulated as the sterile-male model with no
    /// releases.
    Seir,
}

impl ModelTag {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelTag::Sit | ModelTag::Seir => ModelKind::Sit,
            ModelTag::Wb => ModelKind::Wb,
        }
    }
}

impl std::str::FromStr for ModelTag {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sit" => Ok(ModelTag::Sit),
            "wb" | "wolbachia" => Ok(ModelTag::Wb),
            "seir" => Ok(ModelTag::Seir),
            other => bail!("unknown model `{other}`, expected sit, wb or seir"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub times: Vec<f64>,
    /// Defaults to `budget / n` each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Defaults to the sum of the weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    pub n: usize,
    pub budget: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelTag,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(rename = "I_H0", default = "default_seed_infected")]
    pub i_h0: f64,
    #[serde(rename = "I_M0", default = "default_seed_infected")]
    pub i_m0: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default)]
    pub params: EpiParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_mode() -> Mode {
    Mode::TimesAndWeights
}
fn default_seed() -> u64 {
    1
}
fn default_starts() -> usize {
    5
}
fn default_horizon() -> f64 {
    HORIZON
}
fn default_seed_infected() -> f64 {
    SEED_INFECTED
}
fn default_rtol() -> f64 {
    SimOptions::default().rtol
}

/// A fully resolved optimization request.
#[derive(Debug, Clone)]
pub struct OptimizeRequest {
    pub n: usize,
    pub budget: f64,
    pub seed: u64,
    pub starts: usize,
    pub options: OptimizerOptions,
}

impl Scenario {
    pub fn new(model: ModelTag) -> Self {
        Self {
            model,
            horizon: HORIZON,
            i_h0: SEED_INFECTED,
            i_m0: SEED_INFECTED,
            rtol: default_rtol(),
            params: EpiParams::default(),
            schedule: None,
            optimize: None,
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.params.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn problem(&self) -> Result<Problem> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            bail!("rtol must lie in (0, 1), got {}", self.rtol);
        }
        let kind = self.model.kind();
        Ok(Problem {
            model: kind,
            init: kind.initial_state(&self.params, self.i_h0, self.i_m0),
            params: self.params,
            sim: SimOptions::with_tol(self.rtol),
        })
    }

    /// The literal schedule; `seir` scenarios and scenarios without a
    /// `[schedule]` block simulate without releases.
    pub fn release_schedule(&self) -> Result<ReleaseSchedule> {
        let Some(spec) = &self.schedule else {
            return Ok(ReleaseSchedule::empty(self.horizon));
        };
        if self.model == ModelTag::Seir && !spec.times.is_empty() {
            bail!("the seir model takes no releases");
        }
        let n = spec.times.len();
        let schedule = match (&spec.weights, spec.budget) {
            (Some(w), budget) => {
                let total = budget.unwrap_or_else(|| w.iter().sum());
                ReleaseSchedule::new(spec.times.clone(), w.clone(), total, self.horizon)?
            }
            (None, Some(budget)) if n > 0 => {
                ReleaseSchedule::uniform(spec.times.clone(), budget, self.horizon)?
            }
            (None, Some(budget)) => ReleaseSchedule {
                budget,
                ..ReleaseSchedule::empty(self.horizon)
            },
            (None, None) if n == 0 => ReleaseSchedule::empty(self.horizon),
            (None, None) => bail!("schedule needs `weights` or `budget`"),
        };
        Ok(schedule)
    }

    pub fn optimize_request(&self) -> Result<OptimizeRequest> {
        let Some(spec) = &self.optimize else {
            bail!("scenario has no [optimize] block");
        };
        if self.model == ModelTag::Seir {
            bail!("the seir model has nothing to optimize");
        }
        if spec.n == 0 {
            bail!("optimize.n must be at least 1");
        }
        if !(spec.budget > 0.0) {
            bail!("optimize.budget must be positive, got {}", spec.budget);
        }
        if spec.starts == 0 {
            bail!("optimize.starts must be at least 1");
        }
        let mut options = OptimizerOptions {
            mode: spec.mode,
            ..Default::default()
        };
        if let Some(m) = spec.max_iters {
            options.max_iters = m;
        }
        Ok(OptimizeRequest {
            n: spec.n,
            budget: spec.budget,
            seed: spec.seed,
            starts: spec.starts,
            options,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
model = "sit"
horizon = 300.0
I_H0 = 10.0
rtol = 1e-9

[params]
K = 70000.0
beta_HM = 0.2

[schedule]
times = [10.0, 20.0]
weights = [1.0, 2.0]

[optimize]
n = 3
budget = 1e7
mode = "times-only"

[output]
dir = "out"
"#;

    #[test]
    fn round_trip_is_identity() {
        let s = Scenario::from_toml(FULL).unwrap();
        assert_eq!(s.params.k, 70000.0);
        assert_eq!(s.i_m0, 20.0);
        let again = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            "model = \"sit\"\nhorizn = 3.0\n",
            "model = \"sit\"\n[params]\nbeta_XY = 1.0\n",
            "model = \"sit\"\n[schedule]\ntimes = []\nwieghts = []\n",
        ] {
            assert!(Scenario::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn schedule_defaults() {
        let mut s = Scenario::new(ModelTag::Wb);
        assert!(s.release_schedule().unwrap().is_empty());
        s.schedule = Some(ScheduleSpec {
            times: vec![1.0, 2.0],
            weights: None,
            budget: Some(10.0),
        });
        assert_eq!(s.release_schedule().unwrap().weights, vec![5.0, 5.0]);
    }
}
