pub mod analyze;
pub mod gradcheck;
pub mod optimize;
pub mod plots;
pub mod reproduce;
pub mod simulate;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use vector_release::{ReleaseSchedule, Trajectory};

/// Schedule as written into JSON summaries.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleSummary {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub budget: f64,
    pub horizon: f64,
    pub total: f64,
}

impl From<&ReleaseSchedule> for ScheduleSummary {
    fn from(s: &ReleaseSchedule) -> Self {
        Self {
            times: s.times.clone(),
            weights: s.weights.clone(),
            budget: s.budget,
            horizon: s.horizon,
            total: s.total(),
        }
    }
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    traj.write_csv(BufWriter::new(file))?;
    Ok(())
}
