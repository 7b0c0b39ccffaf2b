//! `vrelease simulate`

use anyhow::{bail, Result};
use serde::Serialize;
use vector_release::published;
use vector_release::ReleaseSchedule;

use super::{write_trajectory, ScheduleSummary};
use crate::output::{ensure_dir, reduction_percent, to_pretty, versioned, write_json};
use crate::scenario::{ModelTag, ScheduleSpec};
use crate::SimulateArgs;

#[derive(Debug, Serialize)]
struct Summary {
    model: ModelTag,
    rtol: f64,
    #[serde(rename = "J")]
    cost: f64,
    #[serde(rename = "J0")]
    baseline: f64,
    reduction_percent: f64,
    schedule: ScheduleSummary,
    warnings: Vec<String>,
}

pub fn run(args: &SimulateArgs) -> Result<u8> {
    let mut scenario = args.common.resolve()?;
    if let Some(id) = &args.case {
        let Some(budget) = args.budget else {
            bail!("--case needs --budget to pick a row");
        };
        let case = published::cases(id)
            .into_iter()
            .find(|c| c.budget == budget)
            .ok_or_else(|| anyhow::anyhow!("no published `{id}` row with budget {budget}"))?;
        scenario.model = match case.model {
            vector_release::ModelKind::Sit => ModelTag::Sit,
            vector_release::ModelKind::Wb => ModelTag::Wb,
        };
        let s = case.schedule();
        scenario.schedule = Some(ScheduleSpec {
            times: s.times,
            weights: Some(s.weights),
            budget: Some(s.budget),
        });
    } else if let Some(times) = &args.times {
        scenario.schedule = Some(ScheduleSpec {
            times: times.0.clone(),
            weights: args.weights.as_ref().map(|w| w.0.clone()),
            budget: args.budget,
        });
    } else if args.weights.is_some() {
        bail!("--weights needs --times");
    }

    let problem = scenario.problem()?;
    let schedule = scenario.release_schedule()?;
    let traj = problem.simulate(&schedule)?;
    let base = problem.simulate(&ReleaseSchedule::empty(scenario.horizon))?;
    for w in traj.warnings() {
        log::warn!("{w}");
    }

    let summary = Summary {
        model: scenario.model,
        rtol: scenario.rtol,
        cost: traj.cost(),
        baseline: base.cost(),
        reduction_percent: reduction_percent(base.cost(), traj.cost()),
        schedule: ScheduleSummary::from(&schedule),
        warnings: traj.warnings().to_vec(),
    };
    let json = versioned("simulate", &summary)?;
    if let Some(dir) = &scenario.output.dir {
        let dir = ensure_dir(dir)?;
        write_trajectory(&dir.join("trajectory.csv"), &traj)?;
        write_trajectory(&dir.join("baseline.csv"), &base)?;
        write_json(&dir.join("summary.json"), &json)?;
    }
    print!("{}", to_pretty(&json)?);
    Ok(0)
}
