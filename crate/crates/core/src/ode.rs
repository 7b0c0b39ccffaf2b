//! Dormand–Prince 5(4) with Hairer's 4th-order dense output and a PI step
//! controller. Every call integrates one smooth segment; callers restart at
//! discontinuities.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Error-control settings. `atol` is per component.
#[derive(Debug, Clone)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: Vec<f64>,
    pub max_steps: usize,
}

impl Tolerances {
    pub fn new(rtol: f64, atol: Vec<f64>) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 200_000,
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    // 5 blocks of n coefficients
    rcont: Vec<f64>,
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let r = &self.rcont;
        for i in 0..n {
            out[i] = r[i]
                + s * (r[n + i] + s1 * (r[2 * n + i] + s * (r[3 * n + i] + s1 * r[4 * n + i])));
        }
    }
}

/// Solution of one smooth segment `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub y_start: Vec<f64>,
    pub y_end: Vec<f64>,
    pub steps: usize,
    dense: Vec<DenseStep>,
}

impl Segment {
    fn trivial(t: f64, y: &[f64]) -> Self {
        Self {
            t_start: t,
            t_end: t,
            y_start: y.to_vec(),
            y_end: y.to_vec(),
            steps: 0,
            dense: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.y_start.len()
    }

    /// Interpolated state at `t`, clamped into the segment. Without dense
    /// output only the end points are exact.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        if t <= self.t_start {
            out.copy_from_slice(&self.y_start);
            return;
        }
        if t >= self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        if self.dense.is_empty() {
            let s = (t - self.t_start) / (self.t_end - self.t_start);
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.y_start[i] + s * (self.y_end[i] - self.y_start[i]);
            }
            return;
        }
        let idx = self
            .dense
            .partition_point(|d| d.t0 + d.h < t)
            .min(self.dense.len() - 1);
        self.dense[idx].eval(t, out);
    }

    /// Internal step boundaries, useful as sampling nodes.
    pub fn step_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.dense.iter().map(|d| d.t0)
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let n = err.len();
    let mut sum = 0.0;
    for i in 0..n {
        let sk = tol.atol[i] + tol.rtol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sk;
        sum += e * e;
    }
    (sum / n as f64).sqrt()
}

/// Hairer's starting step heuristic.
fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], span: f64, tol: &Tolerances) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let (mut dnf, mut dny) = (0.0, 0.0);
    for i in 0..n {
        let sk = tol.atol[i] + tol.rtol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h, &y1, &mut f1);
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = tol.atol[i] + tol.rtol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(span)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 >= t0`.
///
/// `accept` runs after every accepted step with the new `(t, y)`; returning
/// an error aborts the integration.
pub fn integrate<F, G>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: &Tolerances,
    dense: bool,
    mut accept: G,
) -> Result<Segment>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    debug_assert!(t1 >= t0);
    debug_assert_eq!(tol.atol.len(), y0.len());
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(Segment::trivial(t0, y0));
    }
    let n = y0.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut y = y0.to_vec();

    let mut t = t0;
    rhs(t, &y, &mut k1);
    let mut h = initial_step(&mut rhs, t0, y0, &k1, span, tol);
    let h_min = 1e-14 * t0.abs().max(t1.abs()).max(1.0);
    let mut err_old = 1e-4_f64;
    let mut rejected = false;
    let mut steps = 0usize;
    let mut out_dense = Vec::new();

    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO: f64 = 0.2 - BETA * 0.75;

    loop {
        let last = t + h >= t1 - 1e-12 * span;
        if last {
            h = t1 - t;
        }
        if h < h_min && !last {
            return Err(Error::StepUnderflow { t });
        }
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::TooManySteps {
                t,
                steps: tol.max_steps,
            });
        }

        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &ys, &mut k5);
        for i in 0..n {
            ys[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + h };
        rhs(t_new, &ys, &mut k6);
        for i in 0..n {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &y1, &mut k7);
        for i in 0..n {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, &y, &y1, tol);
        if !e.is_finite() {
            if h <= h_min {
                return Err(Error::NonFinite { t });
            }
            h *= 0.1;
            rejected = true;
            continue;
        }

        if e <= 1.0 {
            if dense {
                let mut rcont = vec![0.0; 5 * n];
                for i in 0..n {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rcont[i] = y[i];
                    rcont[n + i] = dy;
                    rcont[2 * n + i] = bspl;
                    rcont[3 * n + i] = dy - h * k7[i] - bspl;
                    rcont[4 * n + i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                out_dense.push(DenseStep { t0: t, h, rcont });
            }
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            accept(t, &y)?;
            if last {
                break;
            }
            let mut fac = e.max(1e-10).powf(EXPO) / err_old.powf(BETA) / SAFETY;
            fac = fac.clamp(0.1, 5.0);
            if rejected {
                fac = fac.max(1.0);
            }
            err_old = e.max(1e-4);
            h /= fac;
            rejected = false;
        } else {
            let fac = (e.powf(EXPO) / SAFETY).min(5.0);
            h /= fac;
            rejected = true;
        }
    }

    Ok(Segment {
        t_start: t0,
        t_end: t1,
        y_start: y0.to_vec(),
        y_end: y,
        steps,
        dense: out_dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol(n: usize, r: f64) -> Tolerances {
        Tolerances::new(r, vec![r; n])
    }

    #[test]
    fn exponential_decay() {
        let seg = integrate(
            |_, y, d| d[0] = -0.7 * y[0],
            0.0,
            10.0,
            &[2.0],
            &tol(1, 1e-10),
            true,
            |_, _| Ok(()),
        )
        .unwrap();
        let exact = 2.0 * (-7.0_f64).exp();
        assert!((seg.y_end[0] - exact).abs() < 1e-10);
        let mut out = [0.0];
        for t in [0.3, 1.7, 4.44, 9.99] {
            seg.eval(t, &mut out);
            assert!((out[0] - 2.0 * (-0.7 * t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let seg = integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            20.0,
            &[1.0, 0.0],
            &tol(2, 1e-11),
            true,
            |_, _| Ok(()),
        )
        .unwrap();
        let mut out = [0.0; 2];
        for i in 0..200 {
            let t = 0.1 * i as f64;
            seg.eval(t, &mut out);
            assert!((out[0] - t.cos()).abs() < 1e-8, "t={t}");
            assert!((out[1] + t.sin()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn fifth_order_convergence_in_tolerance() {
        // tighter tolerance must not increase the error
        let run = |r: f64| {
            let seg = integrate(
                |t, y, d| d[0] = y[0] * t.cos(),
                0.0,
                6.0,
                &[1.0],
                &tol(1, r),
                false,
                |_, _| Ok(()),
            )
            .unwrap();
            (seg.y_end[0] - 6.0_f64.sin().exp()).abs()
        };
        let e6 = run(1e-6);
        let e10 = run(1e-10);
        assert!(e10 < e6);
        assert!(e10 < 1e-8);
    }

    #[test]
    fn empty_span_is_identity() {
        let seg = integrate(
            |_, _, d| d[0] = 1.0,
            3.0,
            3.0,
            &[5.0],
            &tol(1, 1e-8),
            true,
            |_, _| Ok(()),
        )
        .unwrap();
        assert_eq!(seg.y_end, vec![5.0]);
        assert_eq!(seg.steps, 0);
    }

    #[test]
    fn accept_hook_can_abort() {
        let res = integrate(
            |_, _, d| d[0] = -1.0,
            0.0,
            5.0,
            &[1.0],
            &tol(1, 1e-8),
            false,
            |t, y| {
                if y[0] < 0.0 {
                    Err(Error::NonFinite { t })
                } else {
                    Ok(())
                }
            },
        );
        assert!(res.is_err());
    }
}
