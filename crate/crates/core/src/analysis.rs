//! Equilibria and reproduction numbers of the uncontrolled systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, SeirState};
use crate::params::EpiParams;
use crate::sim::{ModelKind, ReleaseSchedule, SimOptions};

/// Which disease-free state a reproduction number refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R0Label {
    SitBaseline,
    WolbachiaFree,
    FullInvasion,
}

/// Per-stage reproduction number with the next-generation matrices used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Report {
    pub label: R0Label,
    /// Closed form.
    pub r0: f64,
    /// `r0²`.
    pub basic: f64,
    /// `ρ(F V⁻¹)` by power iteration.
    pub spectral: f64,
    pub f: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// One labeled steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub label: String,
    pub exists: bool,
    /// Full state vector in the model's component order; empty when the
    /// equilibrium does not exist.
    pub state: Vec<f64>,
    /// Max over components of `|rhs_i| / scale_i`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub components: Vec<String>,
    pub equilibria: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn get(&self, label: &str) -> Option<&Equilibrium> {
        self.equilibria.iter().find(|e| e.label == label)
    }
}

/// `(γ_H + b_H)(σ_H + b_H) / (b_H γ_H)`.
pub fn a_h(p: &EpiParams) -> f64 {
    (p.gamma_h + p.b_h) * (p.sigma_h + p.b_h) / (p.b_h * p.gamma_h)
}

pub fn a_m(p: &EpiParams) -> f64 {
    (p.gamma_m + p.d_m) / p.gamma_m
}

pub fn a_w(p: &EpiParams) -> f64 {
    (p.gamma_w + p.d_w) / p.gamma_w
}

fn r0_closed(
    beta_in: f64,
    beta_out: f64,
    vectors: f64,
    gamma_v: f64,
    d_v: f64,
    p: &EpiParams,
) -> f64 {
    let num = beta_in * beta_out * vectors * gamma_v * p.gamma_h;
    let den = p.h * d_v * (p.b_h + p.sigma_h) * (gamma_v + d_v) * (p.gamma_h + p.b_h);
    (num / den).sqrt()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Spectral radius of a small nonnegative matrix.
///
/// Next-generation matrices of host–vector cycles have eigenvalues `±ρ`, so
/// plain power iteration oscillates; iterating on `A²` removes the sign.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let b = a * a;
    let n = b.nrows();
    let mut x = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let y = &b * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / x.norm();
        x = y / norm;
        if (next - lambda).abs() <= 1e-14 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

fn next_generation(f: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let lu = v.clone().lu();
    let v_inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Inconsistent("transfer matrix V is singular".into()))?;
    Ok(spectral_radius(&(f * v_inv)))
}

fn human_block_v(p: &EpiParams, v: &mut DMatrix<f64>) {
    v[(0, 0)] = p.gamma_h + p.b_h;
    v[(1, 0)] = -p.gamma_h;
    v[(1, 1)] = p.sigma_h + p.b_h;
}

/// Reproduction number of the sterile-male baseline at `(H,0,0,K*,0,0)`.
pub fn r0_sit(params: &EpiParams) -> Result<R0Report> {
    let p = params;
    let ks = p.k_star();
    let mut f = DMatrix::zeros(4, 4);
    f[(0, 3)] = p.beta_mh;
    f[(2, 1)] = p.beta_hm / p.h * ks;
    let mut v = DMatrix::zeros(4, 4);
    human_block_v(p, &mut v);
    v[(2, 2)] = p.gamma_m + p.d_m;
    v[(3, 2)] = -p.gamma_m;
    v[(3, 3)] = p.d_m;
    let r0 = r0_closed(p.beta_hm, p.beta_mh, ks, p.gamma_m, p.d_m, p);
    Ok(R0Report {
        label: R0Label::SitBaseline,
        r0,
        basic: r0 * r0,
        spectral: next_generation(&f, &v)?,
        f: to_rows(&f),
        v: to_rows(&v),
    })
}

/// Reproduction numbers at the Wolbachia-free and fully invaded
/// disease-free states of the reduced model.
pub fn r0_wb(params: &EpiParams) -> Result<(R0Report, R0Report)> {
    let p = params;
    let mut v = DMatrix::zeros(6, 6);
    human_block_v(p, &mut v);
    v[(2, 2)] = p.gamma_m + p.d_m;
    v[(3, 2)] = -p.gamma_m;
    v[(3, 3)] = p.d_m;
    v[(4, 4)] = p.gamma_w + p.d_w;
    v[(5, 4)] = -p.gamma_w;
    v[(5, 5)] = p.d_w;

    let mut f_m = DMatrix::zeros(6, 6);
    f_m[(0, 3)] = p.beta_mh;
    f_m[(0, 5)] = p.beta_wh;
    let mut f_w = f_m.clone();
    f_m[(2, 1)] = p.beta_hm / p.h * p.k;
    f_w[(4, 1)] = p.beta_hw / p.h * p.k;

    let rm = r0_closed(p.beta_hm, p.beta_mh, p.k, p.gamma_m, p.d_m, p);
    let rw = r0_closed(p.beta_hw, p.beta_wh, p.k, p.gamma_w, p.d_w, p);
    let report = |label, r0: f64, f: &DMatrix<f64>| -> Result<R0Report> {
        Ok(R0Report {
            label,
            r0,
            basic: r0 * r0,
            spectral: next_generation(f, &v)?,
            f: to_rows(f),
            v: to_rows(&v),
        })
    };
    Ok((
        report(R0Label::WolbachiaFree, rm, &f_m)?,
        report(R0Label::FullInvasion, rw, &f_w)?,
    ))
}

/// `sqrt((R_0^W)² p* + (R_0^M)² (1 - p*))`.
pub fn r_pstar(params: &EpiParams, p_star: f64) -> Result<f64> {
    let (m, w) = r0_wb(params)?;
    Ok(r_pstar_from(m.basic, w.basic, p_star))
}

fn r_pstar_from(basic_m: f64, basic_w: f64, p_star: f64) -> f64 {
    (basic_w * p_star + basic_m * (1.0 - p_star)).sqrt()
}

fn scaled_residual(dx: &[f64], scales: &[f64]) -> f64 {
    dx.iter()
        .zip(scales)
        .map(|(d, s)| d.abs() / s)
        .fold(0.0, f64::max)
}

/// Extinction, disease-free and (when `R_0 > 1`) endemic states of the
/// uncontrolled model.
pub fn equilibria_seir(params: &EpiParams) -> Result<EquilibriumSet> {
    let p = params;
    let ks = p.k_star();
    let scales = [p.h, p.h, p.h, p.k, p.k, p.k];
    let eval = |label: &str, exists: bool, s: Option<SeirState>| {
        let (state, residual) = match s {
            Some(s) => {
                let d = model::rhs_seir(&s, p).to_array();
                (s.to_array().to_vec(), scaled_residual(&d, &scales))
            }
            None => (Vec::new(), 0.0),
        };
        Equilibrium {
            label: label.into(),
            exists,
            state,
            residual,
        }
    };

    let r0 = r0_sit(p)?;
    let mut out = vec![
        eval(
            "extinction",
            true,
            Some(SeirState::from_slice(&[p.h, 0.0, 0.0, 0.0, 0.0, 0.0])),
        ),
        eval("disease-free", true, Some(SeirState::disease_free(p))),
    ];
    let endemic = (r0.r0 > 1.0).then(|| {
        let (ah, am) = (a_h(p), a_m(p));
        let excess = 1.0 - 1.0 / r0.basic;
        let i_h = ks * p.beta_mh / (p.h * p.b_h * am + ks * p.beta_mh) * excess * p.h / ah;
        let i_m = p.beta_hm / (ah * p.d_m + p.beta_hm) * excess * ks / am;
        SeirState {
            s_h: p.h - ah * i_h,
            e_h: (p.sigma_h + p.b_h) / p.gamma_h * i_h,
            i_h,
            s_m: ks - am * i_m,
            e_m: p.d_m / p.gamma_m * i_m,
            i_m,
        }
    });
    out.push(eval("endemic", endemic.is_some(), endemic));
    Ok(EquilibriumSet {
        components: SeirState::NAMES.iter().map(|s| s.to_string()).collect(),
        equilibria: out,
    })
}

/// Positive root of `a Z² + b Z + c` when `a > 0 > c`, computed without
/// cancellation.
fn positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let disc = b * b - 4.0 * a * c;
    if !(a > 0.0) || disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let roots = [q / a, c / q];
    let pos: Vec<f64> = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r > 0.0)
        .collect();
    (pos.len() == 1).then(|| pos[0])
}

/// Disease-free and (when `R_{p*} > 1`) endemic states of the reduced
/// Wolbachia model with the proportion held at `p_star`.
pub fn equilibria_wb(params: &EpiParams, p_star: f64) -> Result<EquilibriumSet> {
    let p = params;
    if !(0.0..=1.0).contains(&p_star) {
        return Err(Error::Domain(format!(
            "p* must lie in [0, 1], got {p_star}"
        )));
    }
    let scales = ModelKind::Wb.scales(p);
    let eval = |label: &str, state: Vec<f64>| {
        let mut d = [0.0; 8];
        model::wb_rhs(p, &state, &mut d);
        Equilibrium {
            label: label.into(),
            exists: true,
            residual: scaled_residual(&d, &scales[..8]),
            state,
        }
    };

    let mut out = vec![eval(
        "disease-free",
        vec![p.h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, p_star],
    )];

    let (m, w) = r0_wb(p)?;
    let r2 = r_pstar_from(m.basic, w.basic, p_star).powi(2);
    if r2 > 1.0 {
        let ah = a_h(p);
        let wild = m.basic * (1.0 - p_star);
        let wolb = w.basic * p_star;
        let cross = wild * p.d_m * p.beta_hw + wolb * p.d_w * p.beta_hm;
        let qa = p.beta_hm * p.beta_hw + ah * cross;
        let qb = (p.beta_hm * p.d_w + p.beta_hw * p.d_m) + ah * p.d_m * p.d_w * r2 - cross;
        let qc = -(r2 - 1.0) * p.d_m * p.d_w;
        let r = positive_root(qa, qb, qc).ok_or_else(|| {
            Error::Inconsistent(format!(
                "R_p* = {} > 1 but no unique positive root",
                r2.sqrt()
            ))
        })?;
        let i_h = p.h * r;
        let i_m = p.k / a_m(p) * (p.beta_hm * r / (p.d_m + p.beta_hm * r)) * (1.0 - p_star);
        let i_w = p.k / a_w(p) * (p.beta_hw * r / (p.d_w + p.beta_hw * r)) * p_star;
        out.push(eval(
            "endemic",
            vec![
                p.h - ah * i_h,
                (p.sigma_h + p.b_h) / p.gamma_h * i_h,
                i_h,
                p.d_m / p.gamma_m * i_m,
                i_m,
                p.d_w / p.gamma_w * i_w,
                i_w,
                p_star,
            ],
        ));
    } else {
        out.push(Equilibrium {
            label: "endemic".into(),
            exists: false,
            state: Vec::new(),
            residual: 0.0,
        });
    }
    Ok(EquilibriumSet {
        components: model::WbState::NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        equilibria: out,
    })
}

/// All equilibria of the reduced Wolbachia model: the three fixed points of
/// the proportion equation, each with its disease-free state and possibly an
/// endemic one.
pub fn equilibria_wb_all(params: &EpiParams) -> Result<Vec<(f64, EquilibriumSet)>> {
    let mut levels = vec![0.0];
    if let Ok(th) = model::theta(params) {
        if th < 1.0 {
            levels.push(th);
        }
    }
    levels.push(1.0);
    levels
        .into_iter()
        .map(|ps| Ok((ps, equilibria_wb(params, ps)?)))
        .collect()
}

/// Long-run diagnostic: minimum of the infected aggregate
/// `E_H + I_H + E_M + I_M + E_W + I_W` over the second half of `[0, horizon]`
/// for the Wolbachia model started from an outbreak with proportion `p0`.
pub fn persistence_probe(params: &EpiParams, p0: f64, horizon: f64) -> Result<f64> {
    let mut init = ModelKind::Wb.initial_state(params, 20.0, 20.0);
    init[7] = p0;
    let traj = crate::sim::simulate(
        ModelKind::Wb,
        params,
        &ReleaseSchedule::empty(horizon),
        &init,
        &SimOptions::default(),
    )?;
    let mut lo = f64::INFINITY;
    let n = 2000;
    for i in 0..=n {
        let t = horizon * (0.5 + 0.5 * i as f64 / n as f64);
        let x = traj.state_at(t);
        let agg: f64 = [1, 2, 3, 4, 5, 6].iter().map(|&j| x[j].max(0.0)).sum();
        lo = lo.min(agg);
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_reproduction_numbers() {
        let p = EpiParams::default();
        let s = r0_sit(&p).unwrap();
        assert!((s.r0 - 1.67).abs() < 0.01, "{}", s.r0);
        assert!((s.basic - 2.80).abs() < 0.02, "{}", s.basic);
        let (m, w) = r0_wb(&p).unwrap();
        assert!((m.r0 - 1.68).abs() < 0.01 && (w.r0 - 1.04).abs() < 0.01);
        assert!((m.basic - 2.83).abs() < 0.02 && (w.basic - 1.08).abs() < 0.02);
        for r in [&s, &m, &w] {
            assert!((r.spectral - r.r0).abs() < 1e-10 * r.r0);
            assert_eq!(r.basic, r.r0 * r.r0);
        }
    }

    #[test]
    fn severed_transmission() {
        let p = EpiParams {
            beta_mh: 0.0,
            ..Default::default()
        };
        let s = r0_sit(&p).unwrap();
        assert_eq!(s.r0, 0.0);
        assert_eq!(s.spectral, 0.0);
        let e = equilibria_seir(&p).unwrap();
        assert!(!e.get("endemic").unwrap().exists);
    }

    #[test]
    fn doubling_transmission_doubles_r0() {
        let p = EpiParams::default();
        let mut q = p;
        q.beta_hm *= 2.0;
        q.beta_mh *= 2.0;
        let a = r0_sit(&p).unwrap().r0;
        let b = r0_sit(&q).unwrap().r0;
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn symmetric_wolbachia_reports_coincide() {
        let mut p = EpiParams::default();
        p.beta_hw = p.beta_hm;
        p.beta_wh = p.beta_mh;
        p.d_w = p.d_m;
        p.gamma_w = p.gamma_m;
        let (m, w) = r0_wb(&p).unwrap();
        assert!((m.r0 - w.r0).abs() < 1e-14);
        assert!((m.spectral - w.spectral).abs() < 1e-12);
    }

    #[test]
    fn r_pstar_endpoints_and_threshold() {
        let p = EpiParams::default();
        let (m, w) = r0_wb(&p).unwrap();
        assert!((r_pstar(&p, 0.0).unwrap() - m.r0).abs() < 1e-14);
        assert!((r_pstar(&p, 1.0).unwrap() - w.r0).abs() < 1e-14);
        let th = model::theta(&p).unwrap();
        let rt = r_pstar(&p, th).unwrap();
        assert!((rt - (w.basic * th + m.basic * (1.0 - th)).sqrt()).abs() < 1e-15);
        assert!((rt - 1.58).abs() < 0.01, "{rt}");
    }

    #[test]
    fn seir_equilibria_residuals() {
        let p = EpiParams::default();
        let set = equilibria_seir(&p).unwrap();
        // K* = K(1 - d_M/b_M) is rounded, so births and deaths cancel to ulps
        assert!(set.get("disease-free").unwrap().residual < 1e-15);
        assert_eq!(set.get("extinction").unwrap().residual, 0.0);
        let e = set.get("endemic").unwrap();
        assert!(e.exists);
        assert!(e.residual < 1e-8, "{}", e.residual);
        assert!(e.state.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn wb_endemic_at_full_invasion() {
        let p = EpiParams::default();
        let set = equilibria_wb(&p, 1.0).unwrap();
        let e = set.get("endemic").unwrap();
        assert!(e.exists);
        assert!(e.residual < 1e-8, "{}", e.residual);
        assert_eq!(set.get("disease-free").unwrap().residual, 0.0);
    }

    #[test]
    fn wb_endemic_matches_seir_without_wolbachia() {
        let p = EpiParams::default();
        // SEIR with K in place of K*: choose K' such that K'(1 - d_M/b_M) = K
        let mut q = p;
        q.k = p.k / (1.0 - p.d_m / p.b_m);
        let seir = equilibria_seir(&q).unwrap();
        let wb = equilibria_wb(&p, 0.0).unwrap();
        let a = seir.get("endemic").unwrap().state[2];
        let b = wb.get("endemic").unwrap().state[2];
        assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn wb_domain() {
        assert!(equilibria_wb(&EpiParams::default(), 1.5).is_err());
        let all = equilibria_wb_all(&EpiParams::default()).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn positive_root_is_stable_and_unique() {
        // (Z - 1e-9)(Z + 1e9) = Z² + (1e9 - 1e-9) Z - 1
        let r = positive_root(1.0, 1e9 - 1e-9, -1.0).unwrap();
        assert!((r - 1e-9).abs() < 1e-24);
        assert!(positive_root(1.0, -3.0, 2.0).is_none());
    }

    #[test]
    fn spectral_radius_against_eigen_solver() {
        let p = EpiParams::default();
        let (m, _) = r0_wb(&p).unwrap();
        let f = DMatrix::from_row_iterator(6, 6, m.f.iter().flatten().copied());
        let v = DMatrix::from_row_iterator(6, 6, m.v.iter().flatten().copied());
        let k = &f * v.try_inverse().unwrap();
        let eig = k
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!((spectral_radius(&k) - eig).abs() < 1e-10 * eig);
    }
}
