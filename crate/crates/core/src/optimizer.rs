//! Alternating projected-gradient / augmented-Lagrangian optimization of
//! release schedules.
//!
//! Internally the iteration works in normalized coordinates `τ = t / T`,
//! `w = c / C` and `J̃ = J / J₀` (with `J₀` the uncontrolled cost) so that
//! step sizes and the penalty are dimensionless and transfer between
//! scenarios. Times are updated by projected gradient descent with an
//! Armijo backtracking line search; weights by the scheme
//!
//! ```text
//! w ← max(w - ε_c (∇_w J̃ + λ + ρ (Σw - 1)), 0)
//! λ ← max(λ + ρ (Σw - 1), 0)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gradients::{grad_j, GRADIENT_RTOL};
use crate::sim::{Problem, ReleaseSchedule};

/// Whether release sizes are optimized or held at `C/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TimesOnly,
    TimesAndWeights,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::TimesOnly => "times-only",
            Mode::TimesAndWeights => "times-and-weights",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "times-only" | "times" => Ok(Mode::TimesOnly),
            "times-and-weights" | "weights" | "both" => Ok(Mode::TimesAndWeights),
            other => Err(Error::Config(format!(
                "unknown mode `{other}`, expected times-only or times-and-weights"
            ))),
        }
    }
}

/// Backtracking line-search settings, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// First trial step; later iterations start from twice the last
    /// accepted step.
    pub initial: f64,
    pub max: f64,
    /// Below this the line search gives up (a stall, not an error).
    pub min: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial: 1.0,
            max: 1e6,
            min: 1e-12,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub mode: Mode,
    pub steps: StepPolicy,
    /// Total iteration cap (time and weight iterations together).
    pub max_iters: usize,
    /// Iterations per phase before switching between times and weights.
    pub phase_iters: usize,
    /// Iterations over which flatness is judged.
    pub patience: usize,
    /// Relative decrease of `J` over the patience window below which the
    /// run is flat.
    pub flat_tol: f64,
    /// Budget violation `|Σc - C| / C` required before stopping.
    pub feas_tol: f64,
    /// Floor of the normalized penalty `ρ̃`; the physical penalty is
    /// `ρ̃ J₀ / C²`. Each weight iteration uses `ρ̃ = 1 / (2 n ε)` for the
    /// previous step `ε`, clamped to `[rho, rho_max]`, so the multiplier
    /// converges at a rate independent of the step the cost allows.
    pub rho: f64,
    pub rho_max: f64,
    /// Sufficient-decrease constant of the weight line search. At 1/2 the
    /// accepted step stays below the inverse curvature of the Lagrangian,
    /// which the multiplier update needs to avoid a period-two cycle.
    pub weight_armijo: f64,
    /// Releases closer than this (days) are merged.
    pub merge_eps: f64,
    /// Parallelism of the per-release gradient integrations.
    pub exec: Execution,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            mode: Mode::TimesAndWeights,
            steps: StepPolicy::default(),
            max_iters: 4000,
            phase_iters: 10,
            patience: 25,
            flat_tol: 1e-8,
            feas_tol: 1e-6,
            rho: 1.0,
            rho_max: 1e4,
            weight_armijo: 0.5,
            merge_eps: 1e-3,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Times,
    Weights,
}

/// One accepted (or stalled) iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub phase: Phase,
    pub cost: f64,
    /// `|Σc - C| / C`.
    pub violation: f64,
    /// Accepted normalized step, 0 on a stall.
    pub step: f64,
    /// Multiplier in person-days per mosquito.
    pub lambda: f64,
    pub releases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub schedule: ReleaseSchedule,
    pub cost: f64,
    /// Uncontrolled cost used for normalization.
    pub baseline: f64,
    /// Final multiplier, person-days per mosquito.
    pub lambda: f64,
    /// Final physical penalty, person-days per mosquito².
    pub rho: f64,
    pub history: Vec<IterRecord>,
    pub converged: bool,
    pub reason: String,
    pub stalls: usize,
    pub seed: Option<u64>,
}

impl OptimizationResult {
    pub fn reduction_percent(&self) -> f64 {
        (self.baseline - self.cost) / self.baseline * 100.0
    }
}

/// Clamps each time into `[0, T]` and sorts.
pub fn project_times(times: &[f64], horizon: f64) -> Vec<f64> {
    let mut out: Vec<f64> = times.iter().map(|t| t.clamp(0.0, horizon)).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Clamps times into `[0, T]` and sorts releases by time, keeping each
/// weight attached to its time.
fn project_schedule(times: &[f64], weights: &[f64], template: &ReleaseSchedule) -> ReleaseSchedule {
    let mut pairs: Vec<(f64, f64)> = times
        .iter()
        .map(|t| t.clamp(0.0, template.horizon))
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    ReleaseSchedule {
        times: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
        budget: template.budget,
        horizon: template.horizon,
    }
}

/// Merges neighbouring releases closer than `eps_t` days until every gap
/// is at least `eps_t`; a merged release carries the summed weight at the
/// weight-averaged time.
pub fn merge_coincident(schedule: &ReleaseSchedule, eps_t: f64) -> ReleaseSchedule {
    let mut times: Vec<f64> = Vec::with_capacity(schedule.len());
    let mut weights: Vec<f64> = Vec::with_capacity(schedule.len());
    for (&t, &c) in schedule.times.iter().zip(&schedule.weights) {
        times.push(t);
        weights.push(c);
        while times.len() >= 2 && times[times.len() - 1] - times[times.len() - 2] < eps_t {
            let (t1, c1) = (times.pop().unwrap(), weights.pop().unwrap());
            let (t0, c0) = (times.pop().unwrap(), weights.pop().unwrap());
            let total = c0 + c1;
            let t = if total > 0.0 {
                (t0 * c0 + t1 * c1) / total
            } else {
                0.5 * (t0 + t1)
            };
            // the average can round outside [t0, t1]
            times.push(t.clamp(t0, t1));
            weights.push(total);
        }
    }
    ReleaseSchedule {
        times,
        weights,
        budget: schedule.budget,
        horizon: schedule.horizon,
    }
}

/// One augmented-Lagrangian step on the weights with a fixed step `eps_c`,
/// in physical units. Returns the new weights and multiplier.
pub fn weight_step(
    weights: &[f64],
    grad_c: &[f64],
    budget: f64,
    lambda: f64,
    rho: f64,
    eps_c: f64,
) -> (Vec<f64>, f64) {
    let excess = weights.iter().sum::<f64>() - budget;
    let shift = lambda + rho * excess;
    let next: Vec<f64> = weights
        .iter()
        .zip(grad_c)
        .map(|(w, g)| (w - eps_c * (g + shift)).max(0.0))
        .collect();
    let excess_new = next.iter().sum::<f64>() - budget;
    (next, (lambda + rho * excess_new).max(0.0))
}

/// Computes `∇_c J` and applies [`weight_step`].
pub fn update_weights(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    lambda: f64,
    rho: f64,
    eps_c: f64,
) -> Result<(ReleaseSchedule, f64)> {
    let g = grad_j(problem, schedule, Execution::Sequential)?;
    let (weights, lambda) = weight_step(
        &schedule.weights,
        &g.dj_dc,
        schedule.budget,
        lambda,
        rho,
        eps_c,
    );
    Ok((
        ReleaseSchedule {
            weights,
            ..schedule.clone()
        },
        lambda,
    ))
}

/// Outcome of one projected-gradient iteration on the times.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeStep {
    Accepted {
        schedule: ReleaseSchedule,
        cost: f64,
        step: f64,
    },
    /// Projected gradient vanishes.
    Stationary,
    /// No sufficient decrease above the step floor.
    Stalled,
}

/// Line search along the projected negative time gradient.
///
/// `grad_t` is `∂J/∂t` in physical units; `step` is the first normalized
/// trial step.
fn time_line_search(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    cost: f64,
    grad_t: &[f64],
    j_ref: f64,
    step: f64,
    policy: &StepPolicy,
) -> Result<TimeStep> {
    let horizon = schedule.horizon;
    let tau: Vec<f64> = schedule.times.iter().map(|t| t / horizon).collect();
    let g: Vec<f64> = grad_t.iter().map(|d| d * horizon / j_ref).collect();
    let j0 = cost / j_ref;
    let mut eps = step;
    while eps >= policy.min {
        let trial: Vec<f64> = tau
            .iter()
            .zip(&g)
            .map(|(t, d)| (t - eps * d).clamp(0.0, 1.0))
            .collect();
        let slope: f64 = trial
            .iter()
            .zip(&tau)
            .zip(&g)
            .map(|((a, b), d)| (a - b) * d)
            .sum();
        if slope == 0.0 {
            return Ok(TimeStep::Stationary);
        }
        let times: Vec<f64> = trial.iter().map(|t| t * horizon).collect();
        let cand = project_schedule(&times, &schedule.weights, schedule);
        let c = problem.cost(&cand)?;
        if c / j_ref <= j0 + policy.armijo * slope {
            return Ok(TimeStep::Accepted {
                schedule: cand,
                cost: c,
                step: eps,
            });
        }
        eps *= 0.5;
    }
    Ok(TimeStep::Stalled)
}

/// One backtracking projected-gradient step `t ← Π(t - ε ∇_t J)` in
/// normalized coordinates, starting from trial step `policy.initial`.
pub fn descend_times(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    policy: &StepPolicy,
) -> Result<TimeStep> {
    let problem = tighten(problem);
    let j_ref = problem.baseline(schedule.horizon)?;
    let g = grad_j(&problem, schedule, Execution::Sequential)?;
    time_line_search(
        &problem,
        schedule,
        g.cost,
        &g.dj_dt,
        j_ref,
        policy.initial,
        policy,
    )
}

fn tighten(problem: &Problem) -> Problem {
    let mut p = problem.clone();
    p.sim.rtol = p.sim.rtol.min(GRADIENT_RTOL);
    p.sim.atol_factor = p.sim.atol_factor.min(GRADIENT_RTOL);
    p
}

fn violation(schedule: &ReleaseSchedule) -> f64 {
    if schedule.budget > 0.0 {
        (schedule.total() - schedule.budget).abs() / schedule.budget
    } else {
        0.0
    }
}

/// Barzilai-Borwein step `sᵀs / sᵀy`, if the curvature along `s` is
/// positive. Releases are matched by rank, which is how projection orders
/// them.
fn bb_step(tau0: &[f64], g0: &[f64], tau1: &[f64], g1: &[f64]) -> Option<f64> {
    if tau0.len() != tau1.len() {
        return None;
    }
    let mut ss = 0.0;
    let mut sy = 0.0;
    for i in 0..tau0.len() {
        let s = tau1[i] - tau0[i];
        ss += s * s;
        sy += s * (g1[i] - g0[i]);
    }
    (sy > 0.0 && ss > 0.0).then(|| ss / sy)
}

struct Run<'a> {
    problem: &'a Problem,
    opts: &'a OptimizerOptions,
    j_ref: f64,
    schedule: ReleaseSchedule,
    cost: f64,
    /// Normalized multiplier and penalty.
    lambda: f64,
    rho: f64,
    time_step: f64,
    weight_step: f64,
    history: Vec<IterRecord>,
    stalls: usize,
}

impl Run<'_> {
    fn record(&mut self, phase: Phase, step: f64) {
        let budget = self.schedule.budget;
        self.history.push(IterRecord {
            iter: self.history.len(),
            phase,
            cost: self.cost,
            violation: violation(&self.schedule),
            step,
            lambda: self.lambda * self.j_ref / budget,
            releases: self.schedule.len(),
        });
    }

    /// Up to `iters` projected-gradient steps on the times. Returns `true`
    /// if the phase ended without moving (stationary or stalled).
    fn time_phase(&mut self, iters: usize) -> Result<bool> {
        let horizon = self.schedule.horizon;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for i in 0..iters {
            let g = grad_j(self.problem, &self.schedule, self.opts.exec)?;
            let tau: Vec<f64> = self.schedule.times.iter().map(|t| t / horizon).collect();
            let gn: Vec<f64> = g.dj_dt.iter().map(|d| d * horizon / self.j_ref).collect();
            let start = match prev
                .as_ref()
                .and_then(|(pt, pg)| bb_step(pt, pg, &tau, &gn))
            {
                Some(bb) => bb.clamp(self.opts.steps.min, self.opts.steps.max),
                None => (2.0 * self.time_step).min(self.opts.steps.max),
            };
            prev = Some((tau, gn));
            match time_line_search(
                self.problem,
                &self.schedule,
                self.cost,
                &g.dj_dt,
                self.j_ref,
                start,
                &self.opts.steps,
            )? {
                TimeStep::Accepted {
                    schedule,
                    cost,
                    step,
                } => {
                    self.schedule = schedule;
                    self.cost = cost;
                    self.time_step = step;
                    self.record(Phase::Times, step);
                }
                TimeStep::Stationary => return Ok(i == 0),
                TimeStep::Stalled => {
                    self.stalls += 1;
                    self.time_step = self.opts.steps.initial;
                    self.record(Phase::Times, 0.0);
                    return Ok(i == 0);
                }
            }
        }
        Ok(false)
    }

    /// Augmented Lagrangian in normalized units at fixed multiplier.
    fn lagrangian(&self, cost: f64, weights: &[f64]) -> f64 {
        let excess = weights.iter().sum::<f64>() / self.schedule.budget - 1.0;
        cost / self.j_ref + self.lambda * excess + 0.5 * self.rho * excess * excess
    }

    /// Up to `iters` primal-dual steps on the weights; same return
    /// convention as [`Run::time_phase`].
    fn weight_phase(&mut self, iters: usize) -> Result<bool> {
        let c = self.schedule.budget;
        let n = self.schedule.len() as f64;
        for i in 0..iters {
            let rho = (0.5 / (n * self.weight_step)).clamp(self.opts.rho, self.opts.rho_max);
            self.rho = rho;
            let g = grad_j(self.problem, &self.schedule, self.opts.exec)?;
            let w: Vec<f64> = self.schedule.weights.iter().map(|x| x / c).collect();
            let excess = w.iter().sum::<f64>() - 1.0;
            let dir: Vec<f64> = g
                .dj_dc
                .iter()
                .map(|d| d * c / self.j_ref + self.lambda + rho * excess)
                .collect();
            let l0 = self.lagrangian(self.cost, &self.schedule.weights);
            // n ε ρ ≤ 1 keeps the primal-dual iteration on Σw stable (it is
            // deadbeat at equality)
            let cap = 1.0 / (rho * n);
            let mut eps = (2.0 * self.weight_step).min(self.opts.steps.max).min(cap);
            let mut accepted = None;
            let mut stationary = false;
            while eps >= self.opts.steps.min {
                let trial: Vec<f64> = w
                    .iter()
                    .zip(&dir)
                    .map(|(x, d)| (x - eps * d).max(0.0))
                    .collect();
                let slope: f64 = trial
                    .iter()
                    .zip(&w)
                    .zip(&dir)
                    .map(|((a, b), d)| (a - b) * d)
                    .sum();
                if slope == 0.0 {
                    stationary = true;
                    break;
                }
                let cand = ReleaseSchedule {
                    weights: trial.iter().map(|x| x * c).collect(),
                    ..self.schedule.clone()
                };
                let cost = self.problem.cost(&cand)?;
                if self.lagrangian(cost, &cand.weights) <= l0 + self.opts.weight_armijo * slope {
                    accepted = Some((cand, cost, eps));
                    break;
                }
                eps *= 0.5;
            }
            let Some((cand, cost, eps)) = accepted else {
                if !stationary {
                    self.stalls += 1;
                    self.weight_step = self.opts.steps.initial;
                    self.record(Phase::Weights, 0.0);
                }
                return Ok(i == 0);
            };
            self.schedule = cand;
            self.cost = cost;
            self.weight_step = eps;
            let excess = self.schedule.total() / c - 1.0;
            self.lambda = (self.lambda + rho * excess).max(0.0);
            self.record(Phase::Weights, eps);
        }
        Ok(false)
    }

    fn merge(&mut self) -> Result<()> {
        let merged = merge_coincident(&self.schedule, self.opts.merge_eps);
        if merged.len() != self.schedule.len() {
            self.schedule = merged;
            self.cost = self.problem.cost(&self.schedule)?;
        }
        Ok(())
    }

    /// `J` has decreased by less than `flat_tol` (relative) over the last
    /// `patience` iterations.
    fn flat(&self) -> bool {
        let n = self.history.len();
        if n <= self.opts.patience {
            return false;
        }
        let old = self.history[n - 1 - self.opts.patience].cost;
        old - self.cost <= self.opts.flat_tol * self.cost.abs()
    }
}

/// Optimizes from the given starting schedule.
pub fn optimize_from(
    problem: &Problem,
    start: &ReleaseSchedule,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    start.validate()?;
    if start.is_empty() {
        return Err(Error::InvalidSchedule(
            "at least one release is required".into(),
        ));
    }
    if !(start.budget > 0.0) {
        return Err(Error::InvalidSchedule("budget must be positive".into()));
    }
    let problem = tighten(problem);
    let j_ref = problem.baseline(start.horizon)?;
    let schedule = project_schedule(&start.times, &start.weights, start);
    let mut run = Run {
        cost: problem.cost(&schedule)?,
        problem: &problem,
        opts,
        j_ref,
        schedule,
        lambda: 0.0,
        rho: opts.rho,
        time_step: opts.steps.initial / 2.0,
        weight_step: opts.steps.initial / 2.0,
        history: Vec::new(),
        stalls: 0,
    };
    run.record(Phase::Times, 0.0);

    let weights = opts.mode == Mode::TimesAndWeights;
    let mut converged = false;
    let mut reason = String::from("iteration cap reached");
    if weights {
        // settle the times at equal weights first: a release starved while
        // still badly placed has zero time gradient and never recovers
        while run.history.len() < opts.max_iters / 2 {
            if run.time_phase(opts.phase_iters)? || run.flat() {
                break;
            }
        }
        run.merge()?;
    }
    while run.history.len() < opts.max_iters {
        let still_t = run.time_phase(opts.phase_iters)?;
        run.merge()?;
        let still_w = if weights {
            let s = run.weight_phase(opts.phase_iters)?;
            run.merge()?;
            s
        } else {
            true
        };
        let feasible = !weights || violation(&run.schedule) <= opts.feas_tol;
        if still_t && still_w {
            converged = true;
            reason = "no descent step available".into();
            break;
        }
        if run.flat() && feasible {
            converged = true;
            reason = format!(
                "relative decrease below {:e} over {} iterations",
                opts.flat_tol, opts.patience
            );
            break;
        }
    }

    if weights && violation(&run.schedule) > 0.0 {
        // remove the residual budget mismatch left by the multiplier scheme
        let scale = run.schedule.budget / run.schedule.total();
        run.schedule.weights.iter_mut().for_each(|w| *w *= scale);
        run.cost = problem.cost(&run.schedule)?;
    }
    let c = run.schedule.budget;
    Ok(OptimizationResult {
        cost: run.cost,
        baseline: j_ref,
        lambda: run.lambda * j_ref / c,
        rho: run.rho * j_ref / (c * c),
        history: run.history,
        converged,
        reason,
        stalls: run.stalls,
        seed: None,
        schedule: run.schedule,
    })
}

/// Random start: `n` sorted uniform times on `[0, T]`, weights `C/n`.
pub fn random_start(n: usize, budget: f64, horizon: f64, seed: u64) -> ReleaseSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=horizon)).collect();
    times.sort_by(f64::total_cmp);
    ReleaseSchedule {
        times,
        weights: vec![budget / n as f64; n],
        budget,
        horizon,
    }
}

/// Single run from a seeded random start.
pub fn optimize(
    problem: &Problem,
    n: usize,
    budget: f64,
    horizon: f64,
    seed: u64,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    if n == 0 {
        return Err(Error::InvalidSchedule("n must be at least 1".into()));
    }
    let start = random_start(n, budget, horizon, seed);
    let mut res = optimize_from(problem, &start, opts)?;
    res.seed = Some(seed);
    Ok(res)
}

/// Best of `starts` independent runs seeded `seed, seed + 1, ...`, fanned
/// out according to `exec`.
pub fn multistart(
    problem: &Problem,
    n: usize,
    budget: f64,
    horizon: f64,
    seed: u64,
    starts: usize,
    opts: &OptimizerOptions,
    exec: Execution,
) -> Result<(OptimizationResult, Vec<OptimizationResult>)> {
    let seeds: Vec<u64> = (0..starts as u64).map(|i| seed.wrapping_add(i)).collect();
    let runs: Vec<OptimizationResult> = exec
        .map(&seeds, |&s| optimize(problem, n, budget, horizon, s, opts))
        .into_iter()
        .collect::<Result<_>>()?;
    let best = runs
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .cloned()
        .ok_or_else(|| Error::InvalidSchedule("at least one start is required".into()))?;
    Ok((best, runs))
}
