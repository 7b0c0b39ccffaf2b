//! Sensitivities of the integrated infection burden with respect to release
//! times and release sizes.
//!
//! For release `k` the perturbation of the epidemic block `X` solves the
//! linear variational system
//!
//! ```text
//! δX' = D_X F(X, y) δX + D_y F(X, y) δy,      t > t_k
//! ```
//!
//! where `y` is the control channel (`M_S` or `p`). For a time shift the
//! system starts from the difference of vector fields with and without the
//! release, `F(X, y⁻) - F(X, y⁺)`; for a size change it starts from zero.
//! The perturbation `δy` is known in closed form: exponential decay for the
//! sterile population and a product of `f`/`g` ratios for the proportion.
//! The gradient entries are `∫ δX_{I_H} dt` over `[t_k, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{self, f_invasion, f_invasion_prime, g_release};
use crate::ode::{self, Tolerances};
use crate::params::EpiParams;
use crate::sim::{release_groups, ModelKind, Problem, ReleaseSchedule, SimOptions, Trajectory};

/// Below this `|f(p⁺)|` the product formula is replaced by integrating
/// `δp' = f'(p) δp` directly.
pub const F_DEGENERATE: f64 = 1e-10;

/// Distance to the invasion threshold at which the explicit product formula
/// is refused.
pub const THRESHOLD_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMethod {
    Variational,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    /// `∂J/∂t_k`, person-days per day.
    pub dj_dt: Vec<f64>,
    /// `∂J/∂c_k`, person-days per released mosquito.
    pub dj_dc: Vec<f64>,
    pub method: GradMethod,
    /// Relative tolerance of the trajectories used.
    pub tol: f64,
    pub cost: f64,
    /// Number of inter-release intervals where the direct variational
    /// fallback replaced the product formula.
    pub fallback_intervals: usize,
}

impl GradientReport {
    pub fn norm(&self) -> f64 {
        self.dj_dt
            .iter()
            .chain(&self.dj_dc)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Time derivative of the sterile population with respect to `t_k`.
pub fn delta_ms_time(schedule: &ReleaseSchedule, d_s: f64, k: usize, t: f64) -> f64 {
    let tk = schedule.times[k];
    if t <= tk {
        0.0
    } else {
        d_s * schedule.weights[k] * (-d_s * (t - tk)).exp()
    }
}

/// Derivative of the sterile population with respect to `c_k`.
pub fn delta_ms_cost(schedule: &ReleaseSchedule, d_s: f64, k: usize, t: f64) -> f64 {
    let tk = schedule.times[k];
    if t <= tk {
        0.0
    } else {
        (-d_s * (t - tk)).exp()
    }
}

/// Which kind of perturbation is being propagated.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Variation {
    Time,
    Size,
}

/// Explicit product formula for the perturbation of `p` on a finished
/// trajectory.
fn delta_p(
    traj: &Trajectory,
    schedule: &ReleaseSchedule,
    params: &EpiParams,
    k: usize,
    t: f64,
    var: Variation,
) -> Result<f64> {
    if traj.model != ModelKind::Wb {
        return Err(Error::Domain(
            "proportion sensitivities need the Wolbachia model".into(),
        ));
    }
    let pi = ModelKind::Wb.control_index();
    let tk = schedule.times[k];
    if t <= tk {
        return Ok(0.0);
    }
    let theta = model::theta(params).ok();
    let bps = traj.breakpoints();
    let gk = bps
        .iter()
        .position(|b| b.releases.contains(&k))
        .ok_or_else(|| Error::InvalidSchedule(format!("release {k} not found in trajectory")))?;
    let check = |j: usize, p: f64| -> Result<()> {
        let near_theta = theta.is_some_and(|th| (p - th).abs() < THRESHOLD_GUARD);
        if near_theta || f_invasion(p, params) == 0.0 {
            return Err(Error::ThresholdDegenerate {
                index: j,
                tol: THRESHOLD_GUARD,
            });
        }
        Ok(())
    };

    let p_full = bps[gk].right[pi];
    let mut delta = match var {
        Variation::Time => {
            let p_wo = ModelKind::Wb.unjump(params, p_full, schedule.weights[k])?;
            f_invasion(p_wo, params) * g_release(p_full, params) / g_release(p_wo, params)
                - f_invasion(p_full, params)
        }
        Variation::Size => g_release(p_full, params),
    };
    check(gk, p_full)?;
    let mut p_right = p_full;
    let mut j = gk + 1;
    while j < bps.len() && bps[j].t < t {
        let (pl, pr) = (bps[j].left[pi], bps[j].right[pi]);
        delta *= f_invasion(pl, params) / f_invasion(p_right, params);
        delta *= g_release(pr, params) / g_release(pl, params);
        check(j, pr)?;
        p_right = pr;
        j += 1;
    }
    let p_t = traj.state_at(t)[pi];
    Ok(delta * f_invasion(p_t, params) / f_invasion(p_right, params))
}

/// Perturbation of `p(t)` per unit shift of `t_k`.
pub fn delta_p_time(
    traj: &Trajectory,
    schedule: &ReleaseSchedule,
    params: &EpiParams,
    k: usize,
    t: f64,
) -> Result<f64> {
    delta_p(traj, schedule, params, k, t, Variation::Time)
}

/// Perturbation of `p(t)` per additional mosquito in release `k`.
pub fn delta_p_cost(
    traj: &Trajectory,
    schedule: &ReleaseSchedule,
    params: &EpiParams,
    k: usize,
    t: f64,
) -> Result<f64> {
    delta_p(traj, schedule, params, k, t, Variation::Size)
}

/// How `δp` is represented on one interval of the augmented integration.
#[derive(Clone, Copy)]
enum PropMode {
    /// `δp(t) = coef · f(p(t))`.
    Product { coef_t: f64, coef_c: f64 },
    /// `δp` carried in the state.
    Direct,
}

/// Layout of the augmented state for one release.
struct Layout {
    ne: usize,
}

impl Layout {
    fn x(&self) -> std::ops::Range<usize> {
        0..self.ne + 1
    }
    fn dt(&self) -> std::ops::Range<usize> {
        self.ne + 1..2 * self.ne + 1
    }
    fn dc(&self) -> std::ops::Range<usize> {
        2 * self.ne + 1..3 * self.ne + 1
    }
    fn jt(&self) -> usize {
        3 * self.ne + 1
    }
    fn jc(&self) -> usize {
        3 * self.ne + 2
    }
    fn pt(&self) -> usize {
        3 * self.ne + 3
    }
    fn pc(&self) -> usize {
        3 * self.ne + 4
    }
    fn len(&self) -> usize {
        3 * self.ne + 5
    }
}

struct ReleaseGradient {
    dj_dt: f64,
    dj_dc: f64,
    fallback: usize,
}

fn jvp(model: ModelKind, params: &EpiParams, x: &[f64], dx: &[f64], dy: f64, out: &mut [f64]) {
    match model {
        ModelKind::Sit => model::sit_jvp(params, x, dx, dy, out),
        ModelKind::Wb => model::wb_jvp(params, x, dx, dy, out),
    }
}

fn state_rhs(model: ModelKind, params: &EpiParams, x: &[f64], dx: &mut [f64]) {
    match model {
        ModelKind::Sit => model::sit_rhs(params, x, dx),
        ModelKind::Wb => model::wb_rhs(params, x, dx),
    }
}

/// Augmented state right after release `k`: base state, initial
/// variations and, for the Wolbachia model, the initial proportion
/// perturbations `(δ_t p, δ_c p)`.
fn initial_variation(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    traj: &Trajectory,
    k: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    let model = problem.model;
    let params = &problem.params;
    let ck = schedule.weights[k];
    let lay = Layout {
        ne: model.epi_dim(),
    };
    let ne = lay.ne;
    let yi = model.control_index();
    let bp = traj
        .breakpoints()
        .iter()
        .find(|b| b.releases.contains(&k))
        .expect("every release has a breakpoint");

    let mut z = vec![0.0; lay.len()];
    z[lay.x()].copy_from_slice(&bp.right[..ne + 1]);
    let y_full = z[yi];
    let y_wo = model.unjump(params, y_full, ck)?;
    let mut with = vec![0.0; ne + 1];
    let mut without = vec![0.0; ne + 1];
    state_rhs(model, params, &z[lay.x()], &mut with);
    let mut x_wo = z[lay.x()].to_vec();
    x_wo[yi] = y_wo;
    state_rhs(model, params, &x_wo, &mut without);
    for i in 0..ne {
        z[lay.dt().start + i] = without[i] - with[i];
    }

    let (dp_t, dp_c) = match model {
        ModelKind::Sit => (0.0, 0.0),
        ModelKind::Wb => (
            f_invasion(y_wo, params) * g_release(y_full, params) / g_release(y_wo, params)
                - f_invasion(y_full, params),
            g_release(y_full, params),
        ),
    };
    Ok((z, dp_t, dp_c))
}

struct Propagated {
    z: Vec<f64>,
    fallback: usize,
}

/// Carries the augmented state of release `k` from `t_k` to the horizon.
/// `vy_scale` multiplies the closed-form sterile forcing (1 for the
/// gradient).
#[allow(clippy::too_many_arguments)]
fn propagate(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    groups: &[(f64, Vec<usize>)],
    k: usize,
    tol: &Tolerances,
    mut z: Vec<f64>,
    (mut dp_t, mut dp_c): (f64, f64),
    vy_scale: f64,
) -> Result<Propagated> {
    let model = problem.model;
    let params = &problem.params;
    let horizon = schedule.horizon;
    let tk = schedule.times[k];
    let ck = schedule.weights[k];
    let lay = Layout {
        ne: model.epi_dim(),
    };
    let yi = model.control_index();
    let choose = |p: f64, dp_t: f64, dp_c: f64| -> PropMode {
        let fp = f_invasion(p, params);
        if fp.abs() < F_DEGENERATE {
            PropMode::Direct
        } else {
            PropMode::Product {
                coef_t: dp_t / fp,
                coef_c: dp_c / fp,
            }
        }
    };

    let d_s = params.d_s;
    let mut fallback = 0;
    let mut buf_t = vec![0.0; lay.ne];
    let mut buf_c = vec![0.0; lay.ne];
    let later: Vec<(f64, &[usize])> = groups
        .iter()
        .filter(|(t, _)| *t > tk)
        .map(|(t, r)| (*t, r.as_slice()))
        .chain(std::iter::once((horizon, &[][..])))
        .collect();
    let mut t0 = tk;
    for (t1, releases) in later {
        let mode = match model {
            ModelKind::Sit => PropMode::Direct,
            ModelKind::Wb => choose(z[yi], dp_t, dp_c),
        };
        if model == ModelKind::Wb {
            if let PropMode::Direct = mode {
                fallback += 1;
                log::warn!("release {k}: f(p) vanishes after t = {t0}, integrating the proportion perturbation directly");
            }
            z[lay.pt()] = dp_t;
            z[lay.pc()] = dp_c;
        }
        if t1 > t0 {
            let seg = ode::integrate(
                |t, s, ds| {
                    ds.iter_mut().for_each(|v| *v = 0.0);
                    state_rhs(model, params, &s[lay.x()], &mut ds[lay.x()]);
                    let (vy_t, vy_c) = match model {
                        ModelKind::Sit => {
                            let e = (-d_s * (t - tk)).exp();
                            (d_s * ck * e, e)
                        }
                        ModelKind::Wb => match mode {
                            PropMode::Product { coef_t, coef_c } => {
                                let fp = f_invasion(s[yi], params);
                                (coef_t * fp, coef_c * fp)
                            }
                            PropMode::Direct => {
                                let fpp = f_invasion_prime(s[yi], params);
                                ds[lay.pt()] = fpp * s[lay.pt()];
                                ds[lay.pc()] = fpp * s[lay.pc()];
                                (s[lay.pt()], s[lay.pc()])
                            }
                        },
                    };
                    let x = &s[lay.x()];
                    jvp(model, params, x, &s[lay.dt()], vy_scale * vy_t, &mut buf_t);
                    jvp(model, params, x, &s[lay.dc()], vy_scale * vy_c, &mut buf_c);
                    ds[lay.dt()].copy_from_slice(&buf_t);
                    ds[lay.dc()].copy_from_slice(&buf_c);
                    ds[lay.jt()] = s[lay.dt().start + 2];
                    ds[lay.jc()] = s[lay.dc().start + 2];
                },
                t0,
                t1,
                &z,
                tol,
                false,
                |t, s| {
                    if s.iter().all(|v| v.is_finite()) {
                        Ok(())
                    } else {
                        Err(Error::NonFinite { t })
                    }
                },
            )?;
            z.copy_from_slice(&seg.y_end);
        }
        if model == ModelKind::Wb {
            match mode {
                PropMode::Product { coef_t, coef_c } => {
                    let fp = f_invasion(z[yi], params);
                    dp_t = coef_t * fp;
                    dp_c = coef_c * fp;
                }
                PropMode::Direct => {
                    dp_t = z[lay.pt()];
                    dp_c = z[lay.pc()];
                }
            }
        }
        // base jump at the later instant, as one summed release like the
        // simulator
        if !releases.is_empty() {
            let y_left = z[yi];
            let mass: f64 = releases.iter().map(|&j| schedule.weights[j]).sum();
            z[yi] = model.jump(params, y_left, mass)?.0;
            if model == ModelKind::Wb {
                let ratio = g_release(z[yi], params) / g_release(y_left, params);
                dp_t *= ratio;
                dp_c *= ratio;
            }
        }
        t0 = t1;
    }
    Ok(Propagated { z, fallback })
}

fn release_gradient(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    traj: &Trajectory,
    groups: &[(f64, Vec<usize>)],
    k: usize,
    tol: &Tolerances,
) -> Result<ReleaseGradient> {
    if schedule.times[k] >= schedule.horizon {
        return Ok(ReleaseGradient {
            dj_dt: 0.0,
            dj_dc: 0.0,
            fallback: 0,
        });
    }
    let lay = Layout {
        ne: problem.model.epi_dim(),
    };
    let (z, dp_t, dp_c) = initial_variation(problem, schedule, traj, k)?;
    let out = propagate(problem, schedule, groups, k, tol, z, (dp_t, dp_c), 1.0)?;
    Ok(ReleaseGradient {
        dj_dt: out.z[lay.jt()],
        dj_dc: out.z[lay.jc()],
        fallback: out.fallback,
    })
}

fn sensitivity_tolerances(problem: &Problem, schedule: &ReleaseSchedule) -> Tolerances {
    let model = problem.model;
    let ne = model.epi_dim();
    let scales = model.scales(&problem.params);
    let f = problem.sim.atol_factor;
    // typical release size, converts state scales into per-mosquito scales
    let w = (schedule.total() / schedule.len().max(1) as f64).max(1.0);
    let h = problem.params.h;
    let mut atol: Vec<f64> = scales[..ne + 1].iter().map(|s| s * f).collect();
    atol.extend(scales[..ne].iter().map(|s| s * f));
    atol.extend(scales[..ne].iter().map(|s| s * f / w));
    atol.push(h * f);
    atol.push(h * f / w);
    atol.push(f);
    atol.push(f / w);
    Tolerances::new(problem.sim.rtol, atol)
}

/// Sensitivity integrations run at least this tight; at the trajectory
/// default of `1e-8` cancellation in `∫ δI_H` costs about four digits.
pub const GRADIENT_RTOL: f64 = 1e-10;

/// Variational gradient of the cost for every release. The base trajectory
/// and the sensitivities are integrated at `min(problem tol, GRADIENT_RTOL)`.
pub fn grad_j(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    exec: Execution,
) -> Result<GradientReport> {
    let mut tight = problem.clone();
    tight.sim.rtol = tight.sim.rtol.min(GRADIENT_RTOL);
    tight.sim.atol_factor = tight.sim.atol_factor.min(GRADIENT_RTOL);
    tight.sim.dense = false;
    let traj = tight.simulate(schedule)?;
    grad_j_with(&tight, schedule, &traj, exec)
}

fn grad_j_with(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    traj: &Trajectory,
    exec: Execution,
) -> Result<GradientReport> {
    let groups = release_groups(schedule);
    let tol = sensitivity_tolerances(problem, schedule);
    let parts = exec.map_range(schedule.len(), |k| {
        release_gradient(problem, schedule, traj, &groups, k, &tol)
    });
    let mut report = GradientReport {
        dj_dt: Vec::with_capacity(schedule.len()),
        dj_dc: Vec::with_capacity(schedule.len()),
        method: GradMethod::Variational,
        tol: problem.sim.rtol,
        cost: traj.cost(),
        fallback_intervals: 0,
    };
    for part in parts {
        let part = part?;
        report.dj_dt.push(part.dj_dt);
        report.dj_dc.push(part.dj_dc);
        report.fallback_intervals += part.fallback;
    }
    Ok(report)
}

/// Step sizes and accuracy of the finite-difference oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Shift of a release time, days.
    pub h_time: f64,
    /// Relative shift of a release size, applied as `h_size * max(c_k, 1)`.
    pub h_size: f64,
    pub tol: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            h_time: 1e-4,
            h_size: 1e-4,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy)]
enum Stencil {
    Central,
    Forward,
    Backward,
}

/// Second-order difference: central in the interior, three-point one-sided
/// at the bounds.
fn difference<F>(h: f64, stencil: Stencil, eval: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    match stencil {
        Stencil::Central => Ok((eval(h)? - eval(-h)?) / (2.0 * h)),
        Stencil::Forward => Ok((-3.0 * eval(0.0)? + 4.0 * eval(h)? - eval(2.0 * h)?) / (2.0 * h)),
        Stencil::Backward => Ok((3.0 * eval(0.0)? - 4.0 * eval(-h)? + eval(-2.0 * h)?) / (2.0 * h)),
    }
}

/// Finite-difference oracle: perturbs each `t_k` and each `c_k` on its own
/// (the budget is not enforced) and re-simulates at tolerance `opts.tol`.
pub fn grad_j_fd(
    problem: &Problem,
    schedule: &ReleaseSchedule,
    opts: &FdOptions,
    exec: Execution,
) -> Result<GradientReport> {
    schedule.validate()?;
    let tight = Problem {
        sim: SimOptions::with_tol(opts.tol).cost_only(),
        ..problem.clone()
    };
    let n = schedule.len();
    let horizon = schedule.horizon;
    let ht = opts.h_time;
    let stencils: Vec<Stencil> = (0..n)
        .map(|k| {
            let t = schedule.times[k];
            let lo_ok = t - ht >= 0.0;
            let hi_ok = t + ht <= horizon;
            let prev_ok = k == 0 || schedule.times[k - 1] <= t - ht;
            let next_ok = k + 1 == n || t + ht <= schedule.times[k + 1];
            match (lo_ok, hi_ok) {
                (true, true) if prev_ok && next_ok => Ok(Stencil::Central),
                (false, true)
                    if next_ok && (k + 1 == n || t + 2.0 * ht <= schedule.times[k + 1]) =>
                {
                    Ok(Stencil::Forward)
                }
                (true, false) if prev_ok && (k == 0 || schedule.times[k - 1] <= t - 2.0 * ht) => {
                    Ok(Stencil::Backward)
                }
                _ => Err(Error::StepCollision { index: k, h: ht }),
            }
        })
        .collect::<Result<_>>()?;

    let time_entries = exec.map_range(n, |k| {
        difference(ht, stencils[k], |d| {
            let mut s = schedule.clone();
            s.times[k] += d;
            tight.cost(&s)
        })
    });
    let size_entries = exec.map_range(n, |k| {
        let c = schedule.weights[k];
        let h = opts.h_size * c.max(1.0);
        let stencil = if c - h >= 0.0 {
            Stencil::Central
        } else {
            Stencil::Forward
        };
        difference(h, stencil, |d| {
            let mut s = schedule.clone();
            s.weights[k] += d;
            tight.cost(&s)
        })
    });
    Ok(GradientReport {
        dj_dt: time_entries.into_iter().collect::<Result<_>>()?,
        dj_dc: size_entries.into_iter().collect::<Result<_>>()?,
        method: GradMethod::FiniteDifference,
        tol: opts.tol,
        cost: tight.cost(schedule)?,
        fallback_intervals: 0,
    })
}

/// Largest entrywise discrepancy `|a - b| / max(|b|, floor)` between two
/// reports.
pub fn max_relative_error(a: &GradientReport, b: &GradientReport, floor: f64) -> f64 {
    a.dj_dt
        .iter()
        .zip(&b.dj_dt)
        .chain(a.dj_dc.iter().zip(&b.dj_dc))
        .map(|(x, y)| relative_error(*x, *y, floor))
        .fold(0.0, f64::max)
}

/// `|x - y| / max(|y|, floor)`: relative error against the oracle `y`, with
/// `floor` guarding entries that are nearly zero.
pub fn relative_error(x: f64, y: f64, floor: f64) -> f64 {
    (x - y).abs() / y.abs().max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::EpiParams;

    fn problem(model: ModelKind) -> Problem {
        Problem::new(model, EpiParams::default())
    }

    #[test]
    fn sterile_sensitivities_closed_form() {
        let s = ReleaseSchedule::new(vec![10.0], vec![4.0], 4.0, 100.0).unwrap();
        let d_s = 0.12;
        assert_eq!(delta_ms_time(&s, d_s, 0, 5.0), 0.0);
        assert_eq!(delta_ms_cost(&s, d_s, 0, 10.0), 0.0);
        assert!((delta_ms_time(&s, d_s, 0, 10.0 + 1e-12) - d_s * 4.0).abs() < 1e-10);
        assert!((delta_ms_cost(&s, d_s, 0, 10.0 + 1.0 / d_s) - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn variational_system_is_linear_in_the_initial_jump() {
        for (model, c) in [(ModelKind::Sit, 5e6), (ModelKind::Wb, 8e3)] {
            let mut pb = problem(model);
            pb.sim = SimOptions::with_tol(GRADIENT_RTOL);
            let s =
                ReleaseSchedule::new(vec![40.0, 90.0, 200.0], vec![c; 3], 3.0 * c, 450.0).unwrap();
            let traj = pb.simulate(&s).unwrap();
            let groups = release_groups(&s);
            let tol = sensitivity_tolerances(&pb, &s);
            let lay = Layout {
                ne: model.epi_dim(),
            };
            let (z, dp_t, dp_c) = initial_variation(&pb, &s, &traj, 0).unwrap();
            let base = propagate(&pb, &s, &groups, 0, &tol, z.clone(), (dp_t, dp_c), 1.0)
                .unwrap()
                .z;
            let mut z2 = z;
            for v in &mut z2[lay.x().end..] {
                *v *= 2.0;
            }
            // the sterile forcing is closed form; the proportion one is
            // carried through δp, which is already doubled
            let forcing = if model == ModelKind::Sit { 2.0 } else { 1.0 };
            let doubled = propagate(
                &pb,
                &s,
                &groups,
                0,
                &tol,
                z2,
                (2.0 * dp_t, 2.0 * dp_c),
                forcing,
            )
            .unwrap()
            .z;
            for i in lay.x().end..lay.pt() {
                let (a, b) = (2.0 * base[i], doubled[i]);
                let bound = 1e-7 * a.abs() + 10.0 * 2.0 * tol.atol[i];
                assert!((a - b).abs() <= bound, "{model} component {i}: {a} vs {b}");
            }
            // the base state only feels the perturbation through step control
            for i in lay.x() {
                assert!((base[i] - doubled[i]).abs() <= 1e-8 * base[i].abs() + 10.0 * tol.atol[i]);
            }
        }
    }

    #[test]
    fn sterile_sensitivities_decay_like_the_sterile_channel() {
        let s = ReleaseSchedule::new(vec![10.0, 30.0], vec![4e6, 2e6], 6e6, 100.0).unwrap();
        let d_s = EpiParams::default().d_s;
        let h = 1e-5;
        for k in 0..2 {
            for t in [31.0, 50.0, 99.0] {
                for f in [delta_ms_time, delta_ms_cost] {
                    let d = (f(&s, d_s, k, t + h) - f(&s, d_s, k, t - h)) / (2.0 * h);
                    let residual = d + d_s * f(&s, d_s, k, t);
                    assert!(
                        residual.abs() <= 1e-10 * f(&s, d_s, k, t).abs().max(1.0),
                        "{residual}"
                    );
                }
            }
        }
    }

    #[test]
    fn release_at_horizon_has_zero_gradient() {
        for model in [ModelKind::Sit, ModelKind::Wb] {
            let pb = problem(model);
            let c = if model == ModelKind::Sit { 1e6 } else { 5e3 };
            let s = ReleaseSchedule::new(vec![450.0], vec![c], c, 450.0).unwrap();
            let g = grad_j(&pb, &s, Execution::Sequential).unwrap();
            assert_eq!(g.dj_dt, vec![0.0]);
            assert_eq!(g.dj_dc, vec![0.0]);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_exactly() {
        let pb = problem(ModelKind::Sit);
        let s = ReleaseSchedule::uniform(vec![50.0, 120.0, 200.0], 3e7, 450.0).unwrap();
        let a = grad_j(&pb, &s, Execution::Sequential).unwrap();
        let b = grad_j(&pb, &s, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variational_matches_fd_single_release() {
        for (model, c, t) in [(ModelKind::Sit, 1e7, 100.0), (ModelKind::Wb, 1e4, 140.0)] {
            let pb = problem(model);
            let s = ReleaseSchedule::new(vec![t], vec![c], c, 450.0).unwrap();
            let g = grad_j(&pb, &s, Execution::Sequential).unwrap();
            let fd = grad_j_fd(&pb, &s, &FdOptions::default(), Execution::Sequential).unwrap();
            let err = max_relative_error(&g, &fd, 1e-6);
            assert!(err < 1e-4, "{model}: {g:?} vs {fd:?}");
        }
    }

    #[test]
    fn fd_rejects_colliding_steps() {
        let pb = problem(ModelKind::Sit);
        let s = ReleaseSchedule::uniform(vec![100.0, 100.0], 2e6, 450.0).unwrap();
        let err = grad_j_fd(&pb, &s, &FdOptions::default(), Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::StepCollision { .. }));
    }

    #[test]
    fn product_formula_single_release() {
        let pb = problem(ModelKind::Wb);
        let p = pb.params;
        let s = ReleaseSchedule::new(vec![100.0], vec![8000.0], 8000.0, 450.0).unwrap();
        let traj = pb.simulate(&s).unwrap();
        let bp = &traj.breakpoints()[1];
        let (pl, pr) = (bp.left[7], bp.right[7]);
        for t in [150.0, 300.0, 449.0] {
            let pt = traj.state_at(t)[7];
            let expected = (f_invasion(pl, &p) * g_release(pr, &p)
                - f_invasion(pr, &p) * g_release(pl, &p))
                / g_release(pl, &p)
                * f_invasion(pt, &p)
                / f_invasion(pr, &p);
            let got = delta_p_time(&traj, &s, &p, 0, t).unwrap();
            assert!((got - expected).abs() <= 1e-12 * expected.abs());
            let size = delta_p_cost(&traj, &s, &p, 0, t).unwrap();
            let expected = g_release(pr, &p) * f_invasion(pt, &p) / f_invasion(pr, &p);
            assert!((size - expected).abs() <= 1e-12 * expected.abs());
        }
        assert_eq!(delta_p_time(&traj, &s, &p, 0, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn product_formula_refuses_threshold() {
        let pb = problem(ModelKind::Wb);
        let p = pb.params;
        let c = model::big_g(model::theta(&p).unwrap(), &p).unwrap();
        let s = ReleaseSchedule::new(vec![0.0], vec![c], c, 450.0).unwrap();
        let traj = pb.simulate(&s).unwrap();
        let err = delta_p_time(&traj, &s, &p, 0, 10.0).unwrap_err();
        assert!(matches!(err, Error::ThresholdDegenerate { .. }));
    }
}
