//! `vrelease gradcheck`

use anyhow::{bail, Result};
use serde::Serialize;
use vector_release::gradients::{grad_j, grad_j_fd, relative_error, FdOptions};
use vector_release::optimizer::random_start;
use vector_release::sim::fmt_f64;
use vector_release::{Execution, ModelKind, ReleaseSchedule};

use super::ScheduleSummary;
use crate::output::{ensure_dir, versioned, write_json, write_table, Cell};
use crate::scenario::ModelTag;
use crate::GradcheckArgs;

#[derive(Debug, Serialize)]
struct Row {
    k: usize,
    param: &'static str,
    variational: f64,
    finite_difference: f64,
    relative_error: f64,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    model: ModelTag,
    threshold: f64,
    floor: f64,
    schedule: ScheduleSummary,
    #[serde(rename = "J")]
    cost: f64,
    fallback_intervals: usize,
    max_relative_error: f64,
    passed: bool,
    rows: &'a [Row],
}

fn default_budget(model: ModelKind) -> f64 {
    match model {
        ModelKind::Sit => 3e7,
        ModelKind::Wb => 2e4,
    }
}

pub fn run(args: &GradcheckArgs) -> Result<u8> {
    let scenario = args.common.resolve()?;
    if scenario.model == ModelTag::Seir {
        bail!("gradcheck needs a controlled model (sit or wb)");
    }
    let problem = scenario.problem()?;
    let budget = args.budget.unwrap_or_else(|| default_budget(problem.model));
    let schedule = match (&args.times, args.random) {
        (Some(times), _) => match &args.weights {
            Some(w) => {
                ReleaseSchedule::new(times.0.clone(), w.0.clone(), budget, scenario.horizon)?
            }
            None => ReleaseSchedule::uniform(times.0.clone(), budget, scenario.horizon)?,
        },
        (None, Some(n)) => random_start(n, budget, scenario.horizon, args.seed),
        (None, None) => match &scenario.schedule {
            Some(_) => scenario.release_schedule()?,
            None => bail!("give --times, --random N or a scenario with a [schedule] block"),
        },
    };
    if schedule.is_empty() {
        bail!("schedule has no releases");
    }

    let exact = grad_j(&problem, &schedule, Execution::Parallel)?;
    let fd = grad_j_fd(
        &problem,
        &schedule,
        &FdOptions::default(),
        Execution::Parallel,
    )?;
    let mut rows = Vec::with_capacity(2 * schedule.len());
    for k in 0..schedule.len() {
        for (param, a, b) in [
            ("t", exact.dj_dt[k], fd.dj_dt[k]),
            ("c", exact.dj_dc[k], fd.dj_dc[k]),
        ] {
            rows.push(Row {
                k,
                param,
                variational: a,
                finite_difference: b,
                relative_error: relative_error(a, b, args.floor),
            });
        }
    }
    let max_err = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let passed = max_err <= args.threshold;

    println!(
        "{:>4} {:>5} {:>24} {:>24} {:>12}",
        "k", "param", "variational", "finite_difference", "rel_error"
    );
    for r in &rows {
        println!(
            "{:>4} {:>5} {:>24} {:>24} {:>12.3e}",
            r.k,
            r.param,
            fmt_f64(r.variational),
            fmt_f64(r.finite_difference),
            r.relative_error
        );
    }
    println!(
        "max relative error {max_err:.3e} (threshold {:.1e}): {}",
        args.threshold,
        if passed { "ok" } else { "FAILED" }
    );

    if let Some(dir) = &scenario.output.dir {
        let dir = ensure_dir(dir)?;
        let report = Report {
            model: scenario.model,
            threshold: args.threshold,
            floor: args.floor,
            schedule: ScheduleSummary::from(&schedule),
            cost: exact.cost,
            fallback_intervals: exact.fallback_intervals,
            max_relative_error: max_err,
            passed,
            rows: &rows,
        };
        write_json(
            &dir.join("gradcheck.json"),
            &versioned("gradcheck", &report)?,
        )?;
        let table: Vec<Vec<Cell>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.k.into(),
                    r.param.into(),
                    r.variational.into(),
                    r.finite_difference.into(),
                    r.relative_error.into(),
                ]
            })
            .collect();
        write_table(
            &dir.join("gradcheck.csv"),
            &[
                "k",
                "param",
                "variational",
                "finite_difference",
                "relative_error",
            ],
            &table,
        )?;
    }
    Ok(if passed { 0 } else { 2 })
}
