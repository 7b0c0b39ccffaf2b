//! Piecewise integration of the controlled systems with exact release jumps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, SitState, WbState, P_CEILING};
use crate::ode::{self, Segment, Tolerances};
use crate::params::EpiParams;

/// Which release method is being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Sterile males; the control channel is `M_S`.
    Sit,
    /// Wolbachia replacement; the control channel is `p`.
    Wb,
}

impl ModelKind {
    /// Number of epidemic components (the part driven by the control).
    pub fn epi_dim(self) -> usize {
        match self {
            ModelKind::Sit => 6,
            ModelKind::Wb => 7,
        }
    }

    /// State dimension without the cost channel.
    pub fn dim(self) -> usize {
        self.epi_dim() + 1
    }

    /// Index of the control channel (`M_S` or `p`).
    pub fn control_index(self) -> usize {
        self.epi_dim()
    }

    /// Index of the accumulated cost in a full trajectory state.
    pub fn cost_index(self) -> usize {
        self.dim()
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Sit => &SitState::NAMES,
            ModelKind::Wb => &WbState::NAMES,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Sit => "sit",
            ModelKind::Wb => "wb",
        }
    }

    /// Magnitude of each component including the cost, used for absolute
    /// tolerances and the negativity guard.
    pub fn scales(self, params: &EpiParams) -> Vec<f64> {
        let (h, k) = (params.h, params.k);
        match self {
            ModelKind::Sit => vec![h, h, h, k, k, k, k, h],
            ModelKind::Wb => vec![h, h, h, k, k, k, k, 1.0, h],
        }
    }

    /// Derivatives of the state plus the cost channel `J' = I_H`.
    pub fn rhs(self, params: &EpiParams, x: &[f64], dx: &mut [f64]) {
        match self {
            ModelKind::Sit => model::sit_rhs(params, x, dx),
            ModelKind::Wb => model::wb_rhs(params, x, dx),
        }
        dx[self.cost_index()] = x[2];
    }

    /// Outbreak seed with `i_h0` infectious humans and `i_m0` infectious
    /// wild mosquitoes, no control present.
    pub fn initial_state(self, params: &EpiParams, i_h0: f64, i_m0: f64) -> Vec<f64> {
        match self {
            ModelKind::Sit => SitState::outbreak(params, i_h0, i_m0).to_array().to_vec(),
            ModelKind::Wb => WbState::outbreak(params, i_h0, i_m0).to_array().to_vec(),
        }
    }

    /// Post-release value of the control channel. The flag reports whether
    /// the proportion had to be clamped below one.
    pub fn jump(self, params: &EpiParams, y: f64, c: f64) -> Result<(f64, bool)> {
        if !(c >= 0.0) {
            return Err(Error::NegativeRelease(c));
        }
        match self {
            ModelKind::Sit => Ok((y + c, false)),
            ModelKind::Wb => {
                let (p, pre_clamped) = if y >= P_CEILING {
                    (P_CEILING, true)
                } else {
                    (y.max(0.0), false)
                };
                if c == 0.0 {
                    return Ok((p, pre_clamped));
                }
                let v = model::big_g(p, params)? + c;
                let q = model::big_g_inverse(v, params)?;
                Ok((q, pre_clamped || q >= P_CEILING))
            }
        }
    }

    /// Undoes a release of size `c` on the control channel.
    pub fn unjump(self, params: &EpiParams, y: f64, c: f64) -> Result<f64> {
        match self {
            ModelKind::Sit => Ok(y - c),
            ModelKind::Wb => {
                let v = model::big_g(y.min(P_CEILING), params)? - c;
                model::big_g_inverse(v.max(0.0), params)
            }
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sit" => Ok(ModelKind::Sit),
            "wb" | "wolbachia" => Ok(ModelKind::Wb),
            other => Err(Error::Config(format!(
                "unknown model `{other}`, expected sit or wb"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Release instants, sizes, budget and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSchedule {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub budget: f64,
    pub horizon: f64,
}

impl ReleaseSchedule {
    pub fn new(times: Vec<f64>, weights: Vec<f64>, budget: f64, horizon: f64) -> Result<Self> {
        let s = Self {
            times,
            weights,
            budget,
            horizon,
        };
        s.validate()?;
        Ok(s)
    }

    /// `n` releases sharing the budget equally.
    pub fn uniform(times: Vec<f64>, budget: f64, horizon: f64) -> Result<Self> {
        let n = times.len().max(1) as f64;
        let weights = vec![budget / n; times.len()];
        Self::new(times, weights, budget, horizon)
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            times: Vec::new(),
            weights: Vec::new(),
            budget: 0.0,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Budget equality within `1e-6` relative.
    pub fn is_feasible(&self) -> bool {
        (self.total() - self.budget).abs() <= 1e-6 * self.budget.abs().max(f64::MIN_POSITIVE)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "budget must be >= 0, got {}",
                self.budget
            )));
        }
        if self.times.len() != self.weights.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} times but {} weights",
                self.times.len(),
                self.weights.len()
            )));
        }
        for (i, &t) in self.times.iter().enumerate() {
            if !(t.is_finite() && (0.0..=self.horizon).contains(&t)) {
                return Err(Error::InvalidSchedule(format!(
                    "time {i} = {t} outside [0, {}]",
                    self.horizon
                )));
            }
            if i > 0 && t < self.times[i - 1] {
                return Err(Error::InvalidSchedule(format!(
                    "times not sorted at index {i}"
                )));
            }
        }
        for &c in &self.weights {
            if !c.is_finite() {
                return Err(Error::InvalidSchedule(format!("non-finite weight {c}")));
            }
            if c < 0.0 {
                return Err(Error::NegativeRelease(c));
            }
        }
        Ok(())
    }
}

/// Integration accuracy: `rtol` and `atol = atol_factor * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol_factor: f64,
    /// Keep dense output for evaluation between breakpoints.
    pub dense: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol_factor: 1e-8,
            dense: true,
        }
    }
}

impl SimOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol_factor: tol,
            dense: true,
        }
    }

    pub fn cost_only(mut self) -> Self {
        self.dense = false;
        self
    }

    pub(crate) fn tolerances(&self, scales: &[f64]) -> Tolerances {
        Tolerances::new(
            self.rtol,
            scales.iter().map(|s| s * self.atol_factor).collect(),
        )
    }
}

/// State limits at an instant where the dynamics restart.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoint {
    pub t: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Schedule indices released at this instant, in composition order.
    pub releases: Vec<usize>,
}

/// Piecewise solution on `[0, T]` including the cost channel as the last
/// component of every state vector.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: ModelKind,
    pub horizon: f64,
    breakpoints: Vec<Breakpoint>,
    segments: Vec<Segment>,
    warnings: Vec<String>,
}

impl Trajectory {
    /// `0`, each distinct release time and `T`.
    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn dim(&self) -> usize {
        self.model.dim() + 1
    }

    /// Right-continuous state at `t`; at `T` the final state.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let last = self.breakpoints.last().expect("trajectory has breakpoints");
        if t >= self.horizon {
            out.copy_from_slice(&last.right);
            return out;
        }
        let idx = self.segments.partition_point(|s| s.t_start <= t);
        match idx.checked_sub(1) {
            Some(i) => self.segments[i].eval(t, &mut out),
            None => out.copy_from_slice(&self.breakpoints[0].right),
        }
        out
    }

    /// Left limit at `t`.
    pub fn left_limit(&self, t: f64) -> Vec<f64> {
        if let Some(bp) = self.breakpoints.iter().find(|b| b.t == t) {
            return bp.left.clone();
        }
        self.state_at(t)
    }

    pub fn final_state(&self) -> &[f64] {
        &self
            .breakpoints
            .last()
            .expect("trajectory has breakpoints")
            .right
    }

    /// Integrated infectious humans over the horizon.
    pub fn cost(&self) -> f64 {
        self.final_state()[self.model.cost_index()]
    }

    /// CSV with a header, one row per accepted integrator step and a left
    /// and right row at every release instant.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time"];
        header.extend_from_slice(self.model.names());
        header.push("cost");
        w.write_record(&header)?;
        let mut row = |t: f64, x: &[f64]| -> Result<()> {
            let mut rec = Vec::with_capacity(x.len() + 1);
            rec.push(fmt_f64(t));
            rec.extend(x.iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
            Ok(())
        };
        let mut buf = vec![0.0; self.dim()];
        let first = &self.breakpoints[0];
        if !first.releases.is_empty() {
            row(first.t, &first.left)?;
        }
        for (i, seg) in self.segments.iter().enumerate() {
            row(seg.t_start, &self.breakpoints[i].right)?;
            for t in seg.step_times().skip(1) {
                seg.eval(t, &mut buf);
                row(t, &buf)?;
            }
            row(seg.t_end, &self.breakpoints[i + 1].left)?;
        }
        let last = self.breakpoints.last().expect("trajectory has breakpoints");
        if !last.releases.is_empty() || self.segments.is_empty() {
            row(last.t, &last.right)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Distinct release instants with the indices released at each.
pub(crate) fn release_groups(schedule: &ReleaseSchedule) -> Vec<(f64, Vec<usize>)> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &t) in schedule.times.iter().enumerate() {
        match groups.last_mut() {
            Some((tg, idx)) if *tg == t => idx.push(i),
            _ => groups.push((t, vec![i])),
        }
    }
    groups
}

/// Applies the releases of one instant to a full state in place.
fn apply_group(
    model: ModelKind,
    params: &EpiParams,
    schedule: &ReleaseSchedule,
    releases: &[usize],
    x: &mut [f64],
    warnings: &mut Vec<String>,
    t: f64,
) -> Result<()> {
    if releases.is_empty() {
        return Ok(());
    }
    // both jump maps are additive in the release mass, so a group is one
    // jump of the summed mass
    let ci = model.control_index();
    let mass: f64 = releases.iter().map(|&k| schedule.weights[k]).sum();
    let (y, clamped) = model.jump(params, x[ci], mass)?;
    if clamped {
        let msg = format!("proportion clamped to {P_CEILING} after release at t = {t}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    x[ci] = y;
    Ok(())
}

fn guard(
    names: &'static [&'static str],
    scales: Vec<f64>,
) -> impl FnMut(f64, &[f64]) -> Result<()> {
    move |t, x| {
        for (i, (&v, &s)) in x.iter().zip(&scales).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { t });
            }
            if v < -1e-9 * s {
                let component = names.get(i).copied().unwrap_or("cost");
                return Err(Error::NegativeState {
                    component,
                    value: v,
                    t,
                });
            }
        }
        Ok(())
    }
}

fn check_init(model: ModelKind, params: &EpiParams, init: &[f64]) -> Result<()> {
    if init.len() != model.dim() {
        return Err(Error::InvalidState(format!(
            "{} initial state needs {} components, got {}",
            model,
            model.dim(),
            init.len()
        )));
    }
    for (i, &v) in init.iter().enumerate() {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidState(format!(
                "{} = {v} must be finite and >= 0",
                model.names()[i]
            )));
        }
    }
    if init[0] + init[1] + init[2] > params.h * (1.0 + 1e-12) {
        return Err(Error::InvalidState("S_H + E_H + I_H exceeds H".into()));
    }
    if model == ModelKind::Wb && init[7] > 1.0 {
        return Err(Error::InvalidState(format!("p = {} exceeds 1", init[7])));
    }
    Ok(())
}

/// Integrates the impulsive system over `[0, schedule.horizon]` starting
/// from `init` (state without the cost channel).
pub fn simulate(
    model: ModelKind,
    params: &EpiParams,
    schedule: &ReleaseSchedule,
    init: &[f64],
    opts: &SimOptions,
) -> Result<Trajectory> {
    params.validate()?;
    schedule.validate()?;
    check_init(model, params, init)?;
    simulate_with(model, params, schedule, init, opts, |x, dx| {
        model.rhs(params, x, dx)
    })
}

pub(crate) fn simulate_with<F>(
    model: ModelKind,
    params: &EpiParams,
    schedule: &ReleaseSchedule,
    init: &[f64],
    opts: &SimOptions,
    mut rhs: F,
) -> Result<Trajectory>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let scales = model.scales(params);
    let tol = opts.tolerances(&scales);
    let mut warnings = Vec::new();

    let mut x = init.to_vec();
    x.push(0.0);

    let mut groups = release_groups(schedule);
    if groups.first().is_none_or(|g| g.0 > 0.0) {
        groups.insert(0, (0.0, Vec::new()));
    }
    if groups.last().is_none_or(|g| g.0 < schedule.horizon) {
        groups.push((schedule.horizon, Vec::new()));
    }

    let mut breakpoints = Vec::with_capacity(groups.len());
    let mut segments = Vec::with_capacity(groups.len());
    for (gi, (t, releases)) in groups.iter().enumerate() {
        if gi > 0 {
            let t0 = groups[gi - 1].0;
            let seg = ode::integrate(
                |_, y, dy| rhs(y, dy),
                t0,
                *t,
                &x,
                &tol,
                opts.dense,
                guard(model.names(), scales.clone()),
            )?;
            x.copy_from_slice(&seg.y_end);
            segments.push(seg);
        }
        let left = x.clone();
        apply_group(model, params, schedule, releases, &mut x, &mut warnings, *t)?;
        breakpoints.push(Breakpoint {
            t: *t,
            left,
            right: x.clone(),
            releases: releases.clone(),
        });
    }

    Ok(Trajectory {
        model,
        horizon: schedule.horizon,
        breakpoints,
        segments,
        warnings,
    })
}

/// Final state (with cost) when each release is spread as a constant-rate
/// pulse of width `eps` starting at its release time instead of a jump.
pub fn simulate_box_pulse(
    model: ModelKind,
    params: &EpiParams,
    schedule: &ReleaseSchedule,
    init: &[f64],
    eps: f64,
    opts: &SimOptions,
) -> Result<Vec<f64>> {
    params.validate()?;
    schedule.validate()?;
    check_init(model, params, init)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("pulse width must be > 0, got {eps}")));
    }
    let horizon = schedule.horizon;
    let mut cuts: Vec<f64> = vec![0.0, horizon];
    for &t in &schedule.times {
        cuts.push(t);
        cuts.push((t + eps).min(horizon));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let scales = model.scales(params);
    let tol = opts.tolerances(&scales);
    let ci = model.control_index();
    let mut x = init.to_vec();
    x.push(0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let rate: f64 = schedule
            .times
            .iter()
            .zip(&schedule.weights)
            .filter(|(&t, _)| t <= mid && mid < t + eps)
            .map(|(_, &c)| c / eps)
            .sum();
        let seg = ode::integrate(
            |_, y, dy| {
                model.rhs(params, y, dy);
                dy[ci] += match model {
                    ModelKind::Sit => rate,
                    ModelKind::Wb => rate * model::g_release(y[ci].clamp(0.0, 1.0), params),
                };
            },
            a,
            b,
            &x,
            &tol,
            false,
            |_, _| Ok(()),
        )?;
        x.copy_from_slice(&seg.y_end);
    }
    Ok(x)
}

/// Closed-form sterile population `Σ_{t_j ≤ t} c_j e^{-d_S (t - t_j)}`.
pub fn sterile_population(schedule: &ReleaseSchedule, d_s: f64, t: f64) -> f64 {
    schedule
        .times
        .iter()
        .zip(&schedule.weights)
        .filter(|(&tj, _)| tj <= t)
        .map(|(&tj, &c)| c * (-d_s * (t - tj)).exp())
        .sum()
}

/// Terminal value of the cost channel.
pub fn cost_j(traj: &Trajectory) -> f64 {
    traj.cost()
}

/// Model, parameters, initial data and accuracy: everything needed to map a
/// schedule to its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub model: ModelKind,
    pub params: EpiParams,
    /// State without the cost channel.
    pub init: Vec<f64>,
    pub sim: SimOptions,
}

impl Problem {
    /// Outbreak seeded with 20 infectious humans and mosquitoes.
    pub fn new(model: ModelKind, params: EpiParams) -> Self {
        Self {
            model,
            init: model.initial_state(&params, 20.0, 20.0),
            params,
            sim: SimOptions::default(),
        }
    }

    pub fn with_sim(mut self, sim: SimOptions) -> Self {
        self.sim = sim;
        self
    }

    pub fn simulate(&self, schedule: &ReleaseSchedule) -> Result<Trajectory> {
        simulate(self.model, &self.params, schedule, &self.init, &self.sim)
    }

    /// Terminal cost; skips dense output.
    pub fn cost(&self, schedule: &ReleaseSchedule) -> Result<f64> {
        Ok(simulate(
            self.model,
            &self.params,
            schedule,
            &self.init,
            &self.sim.cost_only(),
        )?
        .cost())
    }

    /// Cost without any release.
    pub fn baseline(&self, horizon: f64) -> Result<f64> {
        self.cost(&ReleaseSchedule::empty(horizon))
    }
}

/// Cost of a schedule from the default outbreak seed (20 infectious humans
/// and mosquitoes).
pub fn schedule_cost(
    model: ModelKind,
    params: &EpiParams,
    schedule: &ReleaseSchedule,
    opts: &SimOptions,
) -> Result<f64> {
    let init = model.initial_state(params, 20.0, 20.0);
    Ok(simulate(model, params, schedule, &init, &opts.cost_only())?.cost())
}
