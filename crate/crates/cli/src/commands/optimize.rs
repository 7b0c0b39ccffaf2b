//! `vrelease optimize`

use anyhow::Result;
use serde::Serialize;
use vector_release::optimizer::{multistart, OptimizationResult, OptimizerOptions};

use super::{write_trajectory, ScheduleSummary};
use crate::output::{ensure_dir, to_pretty, versioned, write_json, write_table, Cell};
use crate::scenario::{ModelTag, OptimizeSpec};
use crate::{execution, OptimizeArgs};

#[derive(Debug, Serialize)]
struct RunSummary {
    seed: Option<u64>,
    #[serde(rename = "J")]
    cost: f64,
    converged: bool,
    reason: String,
    iterations: usize,
}

impl From<&OptimizationResult> for RunSummary {
    fn from(r: &OptimizationResult) -> Self {
        Self {
            seed: r.seed,
            cost: r.cost,
            converged: r.converged,
            reason: r.reason.clone(),
            iterations: r.history.last().map_or(0, |h| h.iter),
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    model: ModelTag,
    n: usize,
    options: &'a OptimizerOptions,
    #[serde(rename = "J")]
    cost: f64,
    #[serde(rename = "J0")]
    baseline: f64,
    reduction_percent: f64,
    schedule: ScheduleSummary,
    converged: bool,
    reason: &'a str,
    lambda: f64,
    rho: f64,
    best_seed: Option<u64>,
    runs: Vec<RunSummary>,
}

pub fn run(args: &OptimizeArgs) -> Result<u8> {
    let mut scenario = args.common.resolve()?;
    let spec = scenario.optimize.get_or_insert(OptimizeSpec {
        n: 1,
        budget: 0.0,
        mode: vector_release::optimizer::Mode::TimesAndWeights,
        seed: 1,
        starts: 5,
        max_iters: None,
    });
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(c) = args.budget {
        spec.budget = c;
    }
    if let Some(m) = args.mode {
        spec.mode = m;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(s) = args.starts {
        spec.starts = s;
    }
    if args.max_iters.is_some() {
        spec.max_iters = args.max_iters;
    }
    let req = scenario.optimize_request()?;
    let problem = scenario.problem()?;
    let exec = execution(args.sequential);
    let options = OptimizerOptions {
        exec,
        ..req.options
    };
    let (best, runs) = multistart(
        &problem,
        req.n,
        req.budget,
        scenario.horizon,
        req.seed,
        req.starts,
        &options,
        exec,
    )?;
    if !best.converged {
        log::warn!("best start did not converge: {}", best.reason);
    }

    let summary = Summary {
        model: scenario.model,
        n: req.n,
        options: &options,
        cost: best.cost,
        baseline: best.baseline,
        reduction_percent: best.reduction_percent(),
        schedule: ScheduleSummary::from(&best.schedule),
        converged: best.converged,
        reason: &best.reason,
        lambda: best.lambda,
        rho: best.rho,
        best_seed: best.seed,
        runs: runs.iter().map(RunSummary::from).collect(),
    };
    let json = versioned("optimize", &summary)?;

    if let Some(dir) = &scenario.output.dir {
        let dir = ensure_dir(dir)?;
        write_json(&dir.join("summary.json"), &json)?;
        write_json(
            &dir.join("result.json"),
            &versioned("optimization-result", &best)?,
        )?;
        let history: Vec<Vec<Cell>> = best
            .history
            .iter()
            .map(|h| {
                vec![
                    h.iter.into(),
                    format!("{:?}", h.phase).to_lowercase().into(),
                    h.cost.into(),
                    h.violation.into(),
                    h.step.into(),
                    h.lambda.into(),
                    h.releases.into(),
                ]
            })
            .collect();
        write_table(
            &dir.join("history.csv"),
            &[
                "iter",
                "phase",
                "cost",
                "violation",
                "step",
                "lambda",
                "releases",
            ],
            &history,
        )?;
        let rows: Vec<Vec<Cell>> = best
            .schedule
            .times
            .iter()
            .zip(&best.schedule.weights)
            .map(|(&t, &c)| vec![t.into(), c.into()])
            .collect();
        write_table(&dir.join("schedule.csv"), &["time", "weight"], &rows)?;
        let traj = problem.simulate(&best.schedule)?;
        let base = problem.simulate(&vector_release::ReleaseSchedule::empty(scenario.horizon))?;
        write_trajectory(&dir.join("trajectory.csv"), &traj)?;
        write_trajectory(&dir.join("baseline.csv"), &base)?;
    }
    print!("{}", to_pretty(&json)?);
    Ok(0)
}
