//! Replays every published schedule and prints the burden next to the
//! reported value.

use vector_release::{published, EpiParams, Problem, ReleaseSchedule};

fn main() -> vector_release::Result<()> {
    for case in published::sit_cases()
        .into_iter()
        .chain(published::wb_cases())
    {
        let problem = Problem::new(case.model, EpiParams::default());
        let j = problem.cost(&case.schedule())?;
        let j0 = problem.cost(&ReleaseSchedule::empty(published::HORIZON))?;
        println!(
            "{:<24} C={:<6e} J={:>10.1}  reported {:>10.1}  ({:+.2}%)  reduction {:.1}%",
            case.table,
            case.budget,
            j,
            case.cost,
            (j - case.cost) / case.cost * 100.0,
            (j0 - j) / j0 * 100.0
        );
    }
    Ok(())
}
