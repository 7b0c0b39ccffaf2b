//! Right-hand sides of the uncontrolled outbreak model and of the two
//! controlled systems, plus the invasion machinery of the proportion
//! equation `p' = f(p) + u g(p)`.
//!
//! Controls never appear inside the right-hand sides; releases are applied as
//! jumps by [`crate::sim`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::EpiParams;

/// Upper end of the bracket used when inverting `G`.
pub const P_CEILING: f64 = 1.0 - 1e-12;

/// Human + wild mosquito compartments without control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirState {
    pub s_h: f64,
    pub e_h: f64,
    pub i_h: f64,
    pub s_m: f64,
    pub e_m: f64,
    pub i_m: f64,
}

/// Outbreak with sterile males `m_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitState {
    pub s_h: f64,
    pub e_h: f64,
    pub i_h: f64,
    pub s_m: f64,
    pub e_m: f64,
    pub i_m: f64,
    pub m_s: f64,
}

/// Outbreak in the high-birth-rate limit with Wolbachia proportion `p`.
/// Susceptible pools are implicit: `S_M = K(1-p) - E_M - I_M`,
/// `S_W = K p - E_W - I_W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WbState {
    pub s_h: f64,
    pub e_h: f64,
    pub i_h: f64,
    pub e_m: f64,
    pub i_m: f64,
    pub e_w: f64,
    pub i_w: f64,
    pub p: f64,
}

impl SeirState {
    pub const NAMES: [&'static str; 6] = ["S_H", "E_H", "I_H", "S_M", "E_M", "I_M"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.s_h, self.e_h, self.i_h, self.s_m, self.e_m, self.i_m]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            s_h: x[0],
            e_h: x[1],
            i_h: x[2],
            s_m: x[3],
            e_m: x[4],
            i_m: x[5],
        }
    }

    pub fn disease_free(params: &EpiParams) -> Self {
        Self::from_slice(&[params.h, 0.0, 0.0, params.k_star(), 0.0, 0.0])
    }

    /// Recovered humans, reconstructed from the constant population.
    pub fn recovered(&self, params: &EpiParams) -> f64 {
        params.h - self.s_h - self.e_h - self.i_h
    }
}

impl SitState {
    pub const NAMES: [&'static str; 7] = ["S_H", "E_H", "I_H", "S_M", "E_M", "I_M", "M_S"];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.s_h, self.e_h, self.i_h, self.s_m, self.e_m, self.i_m, self.m_s,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            s_h: x[0],
            e_h: x[1],
            i_h: x[2],
            s_m: x[3],
            e_m: x[4],
            i_m: x[5],
            m_s: x[6],
        }
    }

    /// Outbreak seed with the wild population at `K*` and no sterile males.
    pub fn outbreak(params: &EpiParams, i_h0: f64, i_m0: f64) -> Self {
        Self::from_slice(&[
            params.h - i_h0,
            0.0,
            i_h0,
            params.k_star() - i_m0,
            0.0,
            i_m0,
            0.0,
        ])
    }

    pub fn wild(&self) -> SeirState {
        SeirState::from_slice(&self.to_array()[..6])
    }
}

impl WbState {
    pub const NAMES: [&'static str; 8] = ["S_H", "E_H", "I_H", "E_M", "I_M", "E_W", "I_W", "p"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.s_h, self.e_h, self.i_h, self.e_m, self.i_m, self.e_w, self.i_w, self.p,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            s_h: x[0],
            e_h: x[1],
            i_h: x[2],
            e_m: x[3],
            i_m: x[4],
            e_w: x[5],
            i_w: x[6],
            p: x[7],
        }
    }

    /// Outbreak seed with no Wolbachia present.
    pub fn outbreak(params: &EpiParams, i_h0: f64, i_m0: f64) -> Self {
        Self::from_slice(&[params.h - i_h0, 0.0, i_h0, 0.0, i_m0, 0.0, 0.0, 0.0])
    }

    pub fn wild_susceptible(&self, params: &EpiParams) -> f64 {
        params.k * (1.0 - self.p) - self.e_m - self.i_m
    }

    pub fn wolbachia_susceptible(&self, params: &EpiParams) -> f64 {
        params.k * self.p - self.e_w - self.i_w
    }
}

fn human_block(params: &EpiParams, x: &[f64], force: f64, dx: &mut [f64]) {
    // force: per-capita infection pressure on susceptible humans
    let (s_h, e_h, i_h) = (x[0], x[1], x[2]);
    dx[0] = params.b_h * params.h - force * s_h - params.b_h * s_h;
    dx[1] = force * s_h - (params.gamma_h + params.b_h) * e_h;
    dx[2] = params.gamma_h * e_h - (params.sigma_h + params.b_h) * i_h;
}

/// Logistic birth term of wild females, damped by sterile matings.
/// Zero when no wild females are left.
fn wild_births(params: &EpiParams, m: f64, m_s: f64) -> f64 {
    let denom = m + params.s_c * m_s;
    if m <= 0.0 || denom <= 0.0 {
        return 0.0;
    }
    params.b_m * m * m * (1.0 - m / params.k) / denom
}

/// Partial derivatives of [`wild_births`] with respect to `M` and `M_S`.
fn wild_births_grad(params: &EpiParams, m: f64, m_s: f64) -> (f64, f64) {
    let denom = m + params.s_c * m_s;
    if m <= 0.0 || denom <= 0.0 {
        return (0.0, 0.0);
    }
    let num = m * m * (1.0 - m / params.k);
    let dnum = 2.0 * m - 3.0 * m * m / params.k;
    let d2 = denom * denom;
    (
        params.b_m * (dnum * denom - num) / d2,
        -params.b_m * num * params.s_c / d2,
    )
}

/// Shared wild-mosquito block for the uncontrolled and SIT systems.
fn seir_like(params: &EpiParams, x: &[f64], m_s: f64, dx: &mut [f64]) {
    let (i_h, s_m, e_m, i_m) = (x[2], x[3], x[4], x[5]);
    human_block(params, x, params.beta_mh / params.h * i_m, dx);
    let m = s_m + e_m + i_m;
    let bite = params.beta_hm / params.h * s_m * i_h;
    dx[3] = wild_births(params, m, m_s) - bite - params.d_m * s_m;
    dx[4] = bite - (params.gamma_m + params.d_m) * e_m;
    dx[5] = params.gamma_m * e_m - params.d_m * i_m;
}

/// Uncontrolled outbreak derivatives on a 6-slice.
pub fn seir_rhs(params: &EpiParams, x: &[f64], dx: &mut [f64]) {
    seir_like(params, x, 0.0, dx);
}

/// SIT derivatives on a 7-slice; `u = 0`.
pub fn sit_rhs(params: &EpiParams, x: &[f64], dx: &mut [f64]) {
    seir_like(params, x, x[6], dx);
    dx[6] = -params.d_s * x[6];
}

/// Wolbachia derivatives on an 8-slice; `u = 0`.
pub fn wb_rhs(params: &EpiParams, x: &[f64], dx: &mut [f64]) {
    let (i_h, e_m, i_m, e_w, i_w, p) = (x[2], x[3], x[4], x[5], x[6], x[7]);
    let force = (params.beta_mh * i_m + params.beta_wh * i_w) / params.h;
    human_block(params, x, force, dx);
    let s_m = params.k * (1.0 - p) - e_m - i_m;
    let s_w = params.k * p - e_w - i_w;
    dx[3] = params.beta_hm / params.h * s_m * i_h - (params.gamma_m + params.d_m) * e_m;
    dx[4] = params.gamma_m * e_m - params.d_m * i_m;
    dx[5] = params.beta_hw / params.h * s_w * i_h - (params.gamma_w + params.d_w) * e_w;
    dx[6] = params.gamma_w * e_w - params.d_w * i_w;
    dx[7] = f_invasion(p, params);
}

pub fn rhs_seir(state: &SeirState, params: &EpiParams) -> SeirState {
    let mut dx = [0.0; 6];
    seir_rhs(params, &state.to_array(), &mut dx);
    SeirState::from_slice(&dx)
}

pub fn rhs_sit(state: &SitState, params: &EpiParams) -> SitState {
    let mut dx = [0.0; 7];
    sit_rhs(params, &state.to_array(), &mut dx);
    SitState::from_slice(&dx)
}

pub fn rhs_wb(state: &WbState, params: &EpiParams) -> WbState {
    let mut dx = [0.0; 8];
    wb_rhs(params, &state.to_array(), &mut dx);
    WbState::from_slice(&dx)
}

/// Directional derivative of the SIT epidemic block (first six components)
/// along `(dx, dy)` where `dy` perturbs `M_S`. `x` holds the seven SIT
/// components.
pub fn sit_jvp(params: &EpiParams, x: &[f64], dx: &[f64], dy: f64, out: &mut [f64]) {
    let (s_h, i_h, s_m, e_m, i_m, m_s) = (x[0], x[2], x[3], x[4], x[5], x[6]);
    let bmh = params.beta_mh / params.h;
    let bhm = params.beta_hm / params.h;
    let d_inf_h = bmh * (i_m * dx[0] + s_h * dx[5]);
    out[0] = -d_inf_h - params.b_h * dx[0];
    out[1] = d_inf_h - (params.gamma_h + params.b_h) * dx[1];
    out[2] = params.gamma_h * dx[1] - (params.sigma_h + params.b_h) * dx[2];
    let m = s_m + e_m + i_m;
    let (db_dm, db_dms) = wild_births_grad(params, m, m_s);
    let d_m_tot = dx[3] + dx[4] + dx[5];
    let d_bite = bhm * (i_h * dx[3] + s_m * dx[2]);
    out[3] = db_dm * d_m_tot + db_dms * dy - d_bite - params.d_m * dx[3];
    out[4] = d_bite - (params.gamma_m + params.d_m) * dx[4];
    out[5] = params.gamma_m * dx[4] - params.d_m * dx[5];
}

/// Directional derivative of the Wolbachia epidemic block (first seven
/// components) along `(dx, dy)` where `dy` perturbs `p`. `x` holds the
/// eight WB components.
pub fn wb_jvp(params: &EpiParams, x: &[f64], dx: &[f64], dy: f64, out: &mut [f64]) {
    let (s_h, i_h, e_m, i_m, e_w, i_w, p) = (x[0], x[2], x[3], x[4], x[5], x[6], x[7]);
    let h = params.h;
    let force = (params.beta_mh * i_m + params.beta_wh * i_w) / h;
    let d_force = (params.beta_mh * dx[4] + params.beta_wh * dx[6]) / h;
    let d_inf_h = force * dx[0] + s_h * d_force;
    out[0] = -d_inf_h - params.b_h * dx[0];
    out[1] = d_inf_h - (params.gamma_h + params.b_h) * dx[1];
    out[2] = params.gamma_h * dx[1] - (params.sigma_h + params.b_h) * dx[2];
    let s_m = params.k * (1.0 - p) - e_m - i_m;
    let ds_m = -params.k * dy - dx[3] - dx[4];
    out[3] =
        params.beta_hm / h * (ds_m * i_h + s_m * dx[2]) - (params.gamma_m + params.d_m) * dx[3];
    out[4] = params.gamma_m * dx[3] - params.d_m * dx[4];
    let s_w = params.k * p - e_w - i_w;
    let ds_w = params.k * dy - dx[5] - dx[6];
    out[5] =
        params.beta_hw / h * (ds_w * i_h + s_w * dx[2]) - (params.gamma_w + params.d_w) * dx[5];
    out[6] = params.gamma_w * dx[5] - params.d_w * dx[6];
}

fn invasion_denominator(p: f64, params: &EpiParams) -> f64 {
    params.b_m * (1.0 - p) * (1.0 - params.s_h * p) + params.b_w * p
}

/// Drift of the Wolbachia proportion.
pub fn f_invasion(p: f64, params: &EpiParams) -> f64 {
    let num = params.d_m * params.b_w - params.d_w * params.b_m * (1.0 - params.s_h * p);
    p * (1.0 - p) * num / invasion_denominator(p, params)
}

pub fn f_invasion_prime(p: f64, params: &EpiParams) -> f64 {
    let u = p * (1.0 - p);
    let du = 1.0 - 2.0 * p;
    let v = params.d_m * params.b_w - params.d_w * params.b_m * (1.0 - params.s_h * p);
    let dv = params.d_w * params.b_m * params.s_h;
    let w = invasion_denominator(p, params);
    let dw = params.b_m * (-(1.0 - params.s_h * p) - params.s_h * (1.0 - p)) + params.b_w;
    (du * v + u * dv) / w - u * v * dw / (w * w)
}

/// Per-mosquito efficiency of a release on the proportion.
pub fn g_release(p: f64, params: &EpiParams) -> f64 {
    let wild = params.b_m * (1.0 - p) * (1.0 - params.s_h * p);
    wild / (params.k * invasion_denominator(p, params))
}

/// `G(p) = ∫₀^p dq / g(q)`, the release mass needed to lift the proportion
/// from 0 to `p`. Closed form by partial fractions.
pub fn big_g(p: f64, params: &EpiParams) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("G(p) requires 0 <= p < 1, got {p}")));
    }
    Ok(big_g_unchecked(p, params))
}

fn big_g_unchecked(p: f64, params: &EpiParams) -> f64 {
    let k = params.k;
    let ratio = params.b_w / params.b_m;
    let s = params.s_h;
    // -ln(1 - p)
    let log_wild = -(-p).ln_1p();
    let tail = if (1.0 - s).abs() < 1e-12 {
        // q/(1-q)^2
        p / (1.0 - p) - log_wild
    } else {
        let log_ci = if s == 0.0 { -p } else { (-s * p).ln_1p() / s };
        (log_wild + log_ci) / (1.0 - s)
    };
    k * p + k * ratio * tail
}

/// Inverse of [`big_g`]: the unique `p` in `[0, 1)` with `G(p) = v`.
/// Values beyond `G(P_CEILING)` map to [`P_CEILING`].
pub fn big_g_inverse(v: f64, params: &EpiParams) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!(
            "G^-1(v) requires finite v >= 0, got {v}"
        )));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, P_CEILING);
    if v >= big_g_unchecked(hi, params) {
        return Ok(P_CEILING);
    }
    // g(0) = 1/K, so v/K is the linearized guess
    let mut p = (v / params.k).clamp(lo, hi);
    for _ in 0..200 {
        let r = big_g_unchecked(p, params) - v;
        if r > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        let mut next = p - r * g_release(p, params);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - p).abs();
        p = next;
        if step <= 1e-15 || hi - lo <= 1e-15 {
            break;
        }
    }
    Ok(p)
}

/// Interior zero of `f`, the invasion threshold.
pub fn theta(params: &EpiParams) -> Result<f64> {
    let ratio = params.d_m * params.b_w / (params.d_w * params.b_m);
    if params.s_h <= 0.0 || ratio >= 1.0 || ratio < 1.0 - params.s_h - 1e-12 {
        return Err(Error::NoThreshold { ratio });
    }
    Ok(((1.0 - ratio) / params.s_h).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p0() -> EpiParams {
        EpiParams::default()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let p = p0();
        let dfe = rhs_seir(&SeirState::disease_free(&p), &p);
        assert!(dfe.to_array().iter().all(|v| v.abs() < 1e-9), "{dfe:?}");
        let ext = rhs_seir(&SeirState::from_slice(&[p.h, 0.0, 0.0, 0.0, 0.0, 0.0]), &p);
        assert!(ext.to_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seir_hand_evaluation() {
        let p = p0();
        let s = SeirState::from_slice(&[p.h - 20.0, 0.0, 20.0, p.k_star() - 20.0, 0.0, 20.0]);
        let d = rhs_seir(&s, &p);
        let expected_ih = -(p.sigma_h + p.b_h) * 20.0;
        assert!(close(d.i_h, expected_ih, 1e-14));
        let expected_eh = p.beta_mh / p.h * 20.0 * (p.h - 20.0);
        assert!(close(d.e_h, expected_eh, 1e-14));
        assert!(d.e_h > 0.0 && d.i_h < 0.0);
    }

    #[test]
    fn sit_reduces_to_seir_without_sterile_males() {
        let p = p0();
        let s = SitState::from_slice(&[60000.0, 300.0, 200.0, 50000.0, 800.0, 900.0, 0.0]);
        let a = rhs_sit(&s, &p);
        let b = rhs_seir(&s.wild(), &p);
        assert_eq!(&a.to_array()[..6], &b.to_array()[..]);
    }

    #[test]
    fn no_females_no_births() {
        let p = p0();
        let s = SitState::from_slice(&[p.h, 0.0, 0.0, 0.0, 0.0, 0.0, 1e6]);
        assert_eq!(rhs_sit(&s, &p).s_m, 0.0);
        let s = SitState::from_slice(&[p.h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(rhs_sit(&s, &p).s_m, 0.0);
    }

    #[test]
    fn sterile_decay_rate() {
        let p = p0();
        let s = SitState::from_slice(&[p.h - 20.0, 0.0, 20.0, p.k_star() - 20.0, 0.0, 20.0, 1e6]);
        let d = rhs_sit(&s, &p);
        assert!(close(d.m_s, -1.2e5, 1e-14));
    }

    #[test]
    fn wolbachia_disease_free_fixed_points() {
        let p = p0();
        let th = theta(&p).unwrap();
        for q in [0.0, th, 1.0] {
            let s = WbState::from_slice(&[p.h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, q]);
            let d = rhs_wb(&s, &p);
            assert!(d.to_array().iter().all(|v| v.abs() < 1e-15), "p={q}: {d:?}");
        }
    }

    #[test]
    fn theta_closed_form() {
        let p = p0();
        let th = theta(&p).unwrap();
        let expected = (1.0 / 0.9) * (1.0 - (0.04 * 3.96) / (0.044 * 4.4));
        assert!((th - expected).abs() < 1e-15);
        assert!((th - 0.20202).abs() < 1e-4);
        assert!(f_invasion(th, &p).abs() < 1e-12);
    }

    #[test]
    fn theta_boundary_and_failure() {
        let mut p = p0();
        let ratio = p.d_m * p.b_w / (p.d_w * p.b_m);
        p.s_h = 1.0 - ratio;
        assert!((theta(&p).unwrap() - 1.0).abs() < 1e-12);
        let mut q = p0();
        q.d_w = q.d_m * q.b_w / q.b_m; // ratio = 1
        assert!(theta(&q).is_err());
        let mut r = p0();
        r.s_h = 0.05; // 1 - s_h above the ratio
        assert!(matches!(theta(&r), Err(Error::NoThreshold { .. })));
    }

    #[test]
    fn bistability_signs() {
        let p = p0();
        assert_eq!(f_invasion(0.0, &p), 0.0);
        assert_eq!(f_invasion(1.0, &p), 0.0);
        assert!(f_invasion(0.1, &p) < 0.0);
        assert!(f_invasion(0.5, &p) > 0.0);
    }

    #[test]
    fn release_efficiency_endpoints() {
        let p = p0();
        assert!(close(g_release(0.0, &p), 1.0 / p.k, 1e-15));
        assert_eq!(g_release(1.0, &p), 0.0);
        assert!(g_release(0.99, &p) > 0.0);
    }

    #[test]
    fn f_prime_matches_central_difference() {
        let p = p0();
        for q in [0.05, 0.2, 0.5, 0.9] {
            let h = 1e-6;
            let fd = (f_invasion(q + h, &p) - f_invasion(q - h, &p)) / (2.0 * h);
            assert!((fd - f_invasion_prime(q, &p)).abs() < 1e-8, "q={q}");
        }
    }

    #[test]
    fn big_g_domain() {
        let p = p0();
        assert_eq!(big_g(0.0, &p).unwrap(), 0.0);
        assert!(big_g(1.0, &p).is_err());
        assert!(big_g(-0.1, &p).is_err());
        assert!(big_g_inverse(-1.0, &p).is_err());
        assert_eq!(big_g_inverse(0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn big_g_special_incompatibility_levels() {
        // s_h = 1 and s_h = 0 use the limiting forms; compare against a
        // nearby generic value
        for (s, near) in [(1.0, 1.0 - 1e-7), (0.0, 1e-9)] {
            let mut a = p0();
            a.s_h = s;
            let mut b = p0();
            b.s_h = near;
            for q in [0.1, 0.5, 0.9] {
                let ga = big_g(q, &a).unwrap();
                let gb = big_g(q, &b).unwrap();
                assert!(close(ga, gb, 1e-5), "s_h={s} q={q}: {ga} vs {gb}");
            }
        }
    }

    #[test]
    fn big_g_inverse_round_trip() {
        let p = p0();
        for q in [0.1, 0.3, 0.7, 1e-6, 0.999] {
            let v = big_g(q, &p).unwrap();
            assert!((big_g_inverse(v, &p).unwrap() - q).abs() < 1e-10, "q={q}");
        }
        assert_eq!(big_g_inverse(1e30, &p).unwrap(), P_CEILING);
    }

    #[test]
    fn threshold_mass() {
        let p = p0();
        let th = theta(&p).unwrap();
        let g_th = big_g(th, &p).unwrap();
        assert!(close(g_th, 14850.0, 0.02), "G(theta) = {g_th}");
        let back = big_g_inverse(14850.0, &p).unwrap();
        assert!(close(back, th, 0.02));
    }

    #[test]
    fn directional_derivatives_match_finite_differences() {
        let p = p0();
        let sit = [60000.0, 300.0, 200.0, 50000.0, 800.0, 900.0, 2.0e6];
        let wb = [60000.0, 300.0, 200.0, 800.0, 900.0, 150.0, 170.0, 0.3];
        check_jvp(
            &sit,
            6,
            |x, d| sit_rhs(&p, x, d),
            |x, dx, dy, o| sit_jvp(&p, x, dx, dy, o),
        );
        check_jvp(
            &wb,
            7,
            |x, d| wb_rhs(&p, x, d),
            |x, dx, dy, o| wb_jvp(&p, x, dx, dy, o),
        );
    }

    fn check_jvp(
        x: &[f64],
        nx: usize,
        rhs: impl Fn(&[f64], &mut [f64]),
        jvp: impl Fn(&[f64], &[f64], f64, &mut [f64]),
    ) {
        let n = x.len();
        // columns of the Jacobian: each of nx state directions plus the control
        for col in 0..=nx {
            let h = 1e-6 * x[col].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[col] += h;
            xm[col] -= h;
            let mut fp = vec![0.0; n];
            let mut fm = vec![0.0; n];
            rhs(&xp, &mut fp);
            rhs(&xm, &mut fm);
            let mut dir = vec![0.0; nx];
            let mut dy = 0.0;
            if col < nx {
                dir[col] = 1.0;
            } else {
                dy = 1.0;
            }
            let mut out = vec![0.0; nx];
            jvp(x, &dir, dy, &mut out);
            for row in 0..nx {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = fd.abs().max(out[row].abs()).max(1e-8);
                assert!(
                    (fd - out[row]).abs() <= 1e-6 * scale,
                    "row {row} col {col}: fd {fd} analytic {}",
                    out[row]
                );
            }
        }
    }
}
