//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the table is always printed; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vector_release::analysis::{equilibria_seir, equilibria_wb_all, r0_sit, r0_wb};
use vector_release::gradients::{grad_j, grad_j_fd, max_relative_error, FdOptions};
use vector_release::model::{big_g, theta};
use vector_release::optimizer::{multistart, optimize, project_times, Mode, OptimizerOptions};
use vector_release::published::{self, PublishedCase, HORIZON, J0_SIT, J0_WB};
use vector_release::sim::{simulate_box_pulse, SimOptions};
use vector_release::{EpiParams, Execution, ModelKind, Problem, ReleaseSchedule};

const STARTS: usize = 5;
const SEED: u64 = 1;

struct Report {
    lines: Vec<String>,
    ok: bool,
}

impl Report {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            ok: true,
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.ok &= ok;
        self.lines
            .push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    /// `|value - target| <= tol`.
    fn abs(&mut self, what: &str, value: f64, target: f64, tol: f64) {
        let ok = (value - target).abs() <= tol;
        self.check(ok, format!("{what}: {value:.6} vs {target} ± {tol}"));
    }

    /// `|value - target| <= rel * |target|`, or `floor` absolute if looser.
    fn rel(&mut self, what: &str, value: f64, target: f64, rel: f64, floor: f64) {
        let err = (value - target).abs();
        let ok = err <= (rel * target.abs()).max(floor);
        self.check(
            ok,
            format!(
                "{what}: {value:.1} vs {target} ({:+.2}%, tol {:.0}%)",
                (value - target) / target * 100.0,
                rel * 100.0
            ),
        );
    }

    fn runtime(&mut self, elapsed: Duration, limit: Duration) {
        let ok = elapsed <= limit;
        self.check(
            ok,
            format!(
                "runtime {:.2} s (limit {} s)",
                elapsed.as_secs_f64(),
                limit.as_secs()
            ),
        );
    }
}

fn reproduction_numbers() -> Report {
    let mut r = Report::new();
    let t0 = Instant::now();
    let p = EpiParams::default();
    let sit = r0_sit(&p).unwrap();
    let (wild, wolb) = r0_wb(&p).unwrap();
    r.abs("R0 sterile baseline", sit.r0, 1.67, 0.01);
    r.abs("R0 Wolbachia-free", wild.r0, 1.68, 0.01);
    r.abs("R0 full invasion", wolb.r0, 1.04, 0.01);
    r.abs("basic sterile baseline", sit.basic, 2.80, 0.02);
    r.abs("basic Wolbachia-free", wild.basic, 2.83, 0.02);
    r.abs("basic full invasion", wolb.basic, 1.08, 0.02);
    r.runtime(t0.elapsed(), Duration::from_secs(1));
    r
}

fn threshold() -> Report {
    let mut r = Report::new();
    let t0 = Instant::now();
    let p = EpiParams::default();
    let th = theta(&p).unwrap();
    r.abs("theta", th, 0.20202, 1e-4);
    r.rel("G(theta)", big_g(th, &p).unwrap(), 14850.0, 0.02, 0.0);
    r.runtime(t0.elapsed(), Duration::from_secs(1));
    r
}

fn baselines() -> Report {
    let mut r = Report::new();
    for (model, target) in [(ModelKind::Sit, J0_SIT), (ModelKind::Wb, J0_WB)] {
        let t0 = Instant::now();
        let j0 = Problem::new(model, EpiParams::default())
            .baseline(HORIZON)
            .unwrap();
        r.rel(&format!("J0 {model}"), j0, target, 0.01, 0.0);
        r.runtime(t0.elapsed(), Duration::from_secs(5));
    }
    r
}

fn replays() -> Report {
    let mut r = Report::new();
    let t0 = Instant::now();
    let params = EpiParams::default();
    for case in published::sit_cases()
        .into_iter()
        .chain(published::wb_cases())
    {
        let j = Problem::new(case.model, params)
            .cost(&case.schedule())
            .unwrap();
        let (rel, floor) = if case.near_eradication() {
            (0.15, 500.0)
        } else {
            (0.02, 0.0)
        };
        r.rel(
            &format!("{} {} C={:e}", case.table, case.id, case.budget),
            j,
            case.cost,
            rel,
            floor,
        );
    }
    r.runtime(t0.elapsed(), Duration::from_secs(120));
    r
}

fn random_schedule(rng: &mut ChaCha8Rng, model: ModelKind, n: usize) -> ReleaseSchedule {
    let budget = match model {
        ModelKind::Sit => 3e7,
        ModelKind::Wb => 1.5e4,
    };
    let mut times: Vec<f64> = (0..n)
        .map(|_| rng.random_range(1.0..HORIZON - 1.0))
        .collect();
    times.sort_by(f64::total_cmp);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total * budget).collect();
    ReleaseSchedule::new(times, weights, budget, HORIZON).unwrap()
}

fn gradient_oracle() -> Report {
    let mut r = Report::new();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for model in [ModelKind::Sit, ModelKind::Wb] {
        let problem = Problem::new(model, EpiParams::default());
        for n in [1, 3, 10] {
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let s = random_schedule(&mut rng, model, n);
                let var = grad_j(&problem, &s, Execution::Parallel).unwrap();
                let fd =
                    grad_j_fd(&problem, &s, &FdOptions::default(), Execution::Parallel).unwrap();
                worst = worst.max(max_relative_error(&var, &fd, 1e-6));
            }
            r.check(
                worst <= 1e-4,
                format!("{model} n={n}: worst relative error {worst:.2e} (tol 1e-4)"),
            );
        }
    }
    r.runtime(t0.elapsed(), Duration::from_secs(300));
    r
}

fn best_of(
    problem: &Problem,
    n: usize,
    budget: f64,
    mode: Mode,
) -> vector_release::optimizer::OptimizationResult {
    let opts = OptimizerOptions {
        mode,
        ..Default::default()
    };
    multistart(
        problem,
        n,
        budget,
        HORIZON,
        SEED,
        STARTS,
        &opts,
        Execution::Parallel,
    )
    .unwrap()
    .0
}

fn two_regimes() -> Report {
    let mut r = Report::new();
    let t0 = Instant::now();
    let problem = Problem::new(ModelKind::Wb, EpiParams::default());
    let high = best_of(&problem, 1, 2e4, Mode::TimesOnly);
    r.check(
        high.schedule.times == [0.0],
        format!("C=20000, n=1: t1 = {:?} (expected 0)", high.schedule.times),
    );
    let low = best_of(&problem, 1, 1e4, Mode::TimesOnly);
    let t1 = low.schedule.times[0];
    r.check(
        (t1 - 147.5).abs() <= 2.0,
        format!("C=10000, n=1: t1 = {t1:.3} (expected 147.5 ± 2)"),
    );
    let five = best_of(&problem, 5, 2e4, Mode::TimesOnly);
    r.check(
        five.schedule.times == [0.0],
        format!(
            "C=20000, n=5: releases merge to {:?} (expected [0])",
            five.schedule.times
        ),
    );
    r.rel("C=20000, n=5 vs n=1 cost", five.cost, high.cost, 0.02, 0.0);
    r.runtime(t0.elapsed(), Duration::from_secs(300));
    r
}

fn reduction_tolerance(case: &PublishedCase) -> f64 {
    if case.n() == 10 && case.budget > 3e7 {
        5.0
    } else {
        3.0
    }
}

fn optimizer_replication() -> Report {
    let mut r = Report::new();
    let t0 = Instant::now();
    let params = EpiParams::default();
    for case in published::sit_cases() {
        let problem = Problem::new(case.model, params);
        let res = best_of(&problem, case.n(), case.budget, case.mode);
        let label = format!("{} {} C={:e}", case.table, case.id, case.budget);
        let tol = if case.near_eradication() { 0.15 } else { 0.05 };
        r.rel(&format!("{label} J"), res.cost, case.cost, tol, 0.0);
        let target = case.reduction.expect("sterile cases report reductions");
        let red = res.reduction_percent();
        let rt = reduction_tolerance(&case);
        r.check(
            (red - target).abs() <= rt,
            format!("{label} reduction: {red:.2}% vs {target}% ± {rt} pts"),
        );
    }
    r.runtime(t0.elapsed(), Duration::from_secs(1800));
    r
}

fn property_suites() -> Report {
    let mut r = Report::new();
    let p = EpiParams::default();

    let mut worst: f64 = 0.0;
    for e in equilibria_seir(&p)
        .unwrap()
        .equilibria
        .iter()
        .filter(|e| e.exists)
    {
        worst = worst.max(e.residual);
    }
    for (_, set) in equilibria_wb_all(&p).unwrap() {
        for e in set.equilibria.iter().filter(|e| e.exists) {
            worst = worst.max(e.residual);
        }
    }
    r.check(
        worst < 1e-8,
        format!("equilibrium residuals: worst {worst:.2e} (tol 1e-8)"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut q = p;
        for x in [
            &mut q.b_w,
            &mut q.d_m,
            &mut q.d_w,
            &mut q.b_h,
            &mut q.sigma_h,
            &mut q.h,
            &mut q.k,
            &mut q.beta_hm,
            &mut q.beta_mh,
            &mut q.beta_hw,
            &mut q.beta_wh,
            &mut q.gamma_m,
            &mut q.gamma_w,
            &mut q.gamma_h,
        ] {
            *x *= rng.random_range(0.5..2.0);
        }
        let sit = r0_sit(&q).unwrap();
        let (m, w) = r0_wb(&q).unwrap();
        for rep in [sit, m, w] {
            worst = worst.max((rep.r0 - rep.spectral).abs() / rep.r0);
        }
    }
    r.check(
        worst <= 1e-8,
        format!("closed form vs spectral R0, 200 draws: worst {worst:.2e} (tol 1e-8)"),
    );

    let mut exact = true;
    for model in [ModelKind::Sit, ModelKind::Wb] {
        let problem = Problem::new(model, p);
        let c = if model == ModelKind::Sit { 2e7 } else { 1.2e4 };
        for t in [0.0, 97.3, 250.0] {
            let whole = ReleaseSchedule::new(vec![t], vec![c], c, HORIZON).unwrap();
            let split =
                ReleaseSchedule::new(vec![t, t], vec![c / 2.0, c / 2.0], c, HORIZON).unwrap();
            exact &= problem.simulate(&whole).unwrap().final_state()
                == problem.simulate(&split).unwrap().final_state();
        }
        let (a, _) = model.jump(&p, 0.1, c / 2.0).unwrap();
        let (two, _) = model.jump(&p, a, c / 2.0).unwrap();
        let (one, _) = model.jump(&p, 0.1, c).unwrap();
        exact &= (two - one).abs() <= 1e-12 * one;
    }
    r.check(exact, "jump additivity and composition".into());

    let opts = SimOptions::with_tol(1e-10);
    for (model, schedule) in [
        (ModelKind::Sit, published::sit_cases()[0].schedule()),
        (
            ModelKind::Wb,
            ReleaseSchedule::new(vec![60.0], vec![2e4], 2e4, HORIZON).unwrap(),
        ),
    ] {
        let problem = Problem::new(model, p).with_sim(opts);
        let exact = problem.simulate(&schedule).unwrap().final_state().to_vec();
        let scales = model.scales(&p);
        let gaps: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&eps| {
                let boxed =
                    simulate_box_pulse(model, &p, &schedule, &problem.init, eps, &opts).unwrap();
                boxed
                    .iter()
                    .zip(&exact)
                    .zip(&scales)
                    .map(|((a, b), s)| (a - b).abs() / s)
                    .fold(0.0, f64::max)
            })
            .collect();
        r.check(
            gaps[0] > gaps[1] && gaps[1] > gaps[2],
            format!(
                "{model} box pulse gaps for eps 1, 0.1, 0.01: {:.2e}, {:.2e}, {:.2e}",
                gaps[0], gaps[1], gaps[2]
            ),
        );
    }

    let mut idem = true;
    for _ in 0..1000 {
        let n = rng.random_range(0..20);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..600.0)).collect();
        let once = project_times(&t, HORIZON);
        idem &= project_times(&once, HORIZON) == once;
    }
    r.check(idem, "projection idempotence, 1000 random vectors".into());

    let problem = Problem::new(ModelKind::Sit, p);
    let res = optimize(
        &problem,
        3,
        2e7,
        HORIZON,
        SEED,
        &OptimizerOptions::default(),
    )
    .unwrap();
    let viol = res.history.last().map_or(f64::INFINITY, |h| h.violation);
    let min_c = res
        .schedule
        .weights
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    r.check(
        res.converged && viol <= 1e-6 && min_c >= 0.0,
        format!(
            "feasibility at convergence: |Σc-C|/C = {viol:.1e}, min c = {min_c:.1}, {}",
            res.reason
        ),
    );
    r
}

fn main() -> ExitCode {
    // `cargo test -- --list` and friends probe test binaries; answer politely
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Report); 8] = [
        ("reproduction numbers", reproduction_numbers),
        ("threshold machinery", threshold),
        ("uncontrolled baselines", baselines),
        ("published schedule replays", replays),
        ("gradient oracle suite", gradient_oracle),
        ("two-regime property", two_regimes),
        ("optimizer replication", optimizer_replication),
        ("property suites", property_suites),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let report = run();
        let secs = t0.elapsed().as_secs_f64();
        println!(
            "{} criterion {}: {name} ({secs:.1} s)",
            if report.ok { "PASS" } else { "FAIL" },
            i + 1
        );
        for line in &report.lines {
            println!("       {line}");
        }
        if !report.ok {
            failures += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
