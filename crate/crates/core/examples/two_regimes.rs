//! One Wolbachia pulse: below the invasion mass the best release is late
//! and barely helps; above it, releasing at once wins.

use vector_release::optimizer::{multistart, Mode, OptimizerOptions};
use vector_release::{EpiParams, Execution, ModelKind, Problem};

fn main() -> vector_release::Result<()> {
    let problem = Problem::new(ModelKind::Wb, EpiParams::default());
    let opts = OptimizerOptions {
        mode: Mode::TimesOnly,
        ..Default::default()
    };
    for budget in [1e4, 2e4] {
        let (best, _) = multistart(&problem, 1, budget, 450.0, 1, 5, &opts, Execution::Parallel)?;
        println!(
            "C = {budget:e}: t1 = {:.1} days, J = {:.1}, reduction {:.1}%",
            best.schedule.times[0],
            best.cost,
            best.reduction_percent()
        );
    }
    Ok(())
}
