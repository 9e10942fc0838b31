//! Geodesic integration and the along-trajectory checks: conservation of the
//! integral family I_t and the unparameterized comparison against a second
//! metric's geodesic equation.

use serde::Serialize;

use super::pointwise::christoffel;
use crate::fields::{Chart, EndoField, MetricField};
use crate::{Error, Result};

/// One accepted integrator step. `accel` is the geodesic acceleration at
/// (point, velocity); the ODE right-hand side already computes it, and the
/// unparameterized test needs it, so it is kept rather than rederived.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub accel: Vec<f64>,
}

/// A computed geodesic. `complete` is false when the curve left the chart (or
/// hit an exclusion margin) before reaching the requested time; the samples
/// then cover the surviving prefix.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub complete: bool,
}

impl Trajectory {
    pub fn end(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Geodesic acceleration a^k = -Gamma^k_{ij} v^i v^j at (x, v).
fn acceleration(g: &MetricField, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let gamma = christoffel(g, x)?;
    let n = x.len();
    let mut a = vec![0.0; n];
    for (k, slot) in a.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += gamma.at(k, i, j) * v[i] * v[j];
            }
        }
        *slot = -acc;
    }
    Ok(a)
}

/// d/dt (x, v) = (v, a(x, v)) on the doubled state.
fn ode_rhs(g: &MetricField, y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len() / 2;
    let (x, v) = y.split_at(n);
    let a = acceleration(g, x, v)?;
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(v);
    out.extend_from_slice(&a);
    Ok(out)
}

fn step_from(y: &[f64], h: f64, stages: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, c) in stages {
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += h * c * ki;
        }
    }
    out
}

// Dormand-Prince 5(4) coefficients. The fifth-order weights equal the last
// stage row, so k7 doubles as the first stage of the next step.
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

// Difference between the fifth- and fourth-order weights, for the embedded
// error estimate.
const ERR_W: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 500_000;

/// Integrate the geodesic of g from (p0, v0) over [0, t_span] (t_span may be
/// negative) with an adaptive embedded 5(4) pair at absolute and relative
/// tolerance `tol`. Leaving the chart halts the curve and flags the result
/// incomplete rather than erroring; a step-size underflow or a non-finite
/// state is an error.
pub fn integrate_geodesic(
    g: &MetricField,
    chart: &Chart,
    p0: &[f64],
    v0: &[f64],
    t_span: f64,
    tol: f64,
) -> Result<Trajectory> {
    if p0.len() != g.dim() || v0.len() != g.dim() {
        return Err(Error::Schema(format!(
            "initial condition dimension {}/{} does not match the metric dimension {}",
            p0.len(),
            v0.len(),
            g.dim()
        )));
    }
    if !t_span.is_finite() || !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Schema(format!(
            "need finite t_span and positive tolerance, got T = {t_span}, tol = {tol}"
        )));
    }
    if v0.iter().all(|&c| c == 0.0) {
        return Err(Error::Schema(
            "zero initial velocity does not determine a geodesic".into(),
        ));
    }
    chart.check(p0)?;

    let n = g.dim();
    let mut y: Vec<f64> = p0.iter().chain(v0.iter()).copied().collect();
    let mut k1 = ode_rhs(g, &y)?;
    let mut samples = vec![TrajectorySample {
        t: 0.0,
        point: p0.to_vec(),
        velocity: v0.to_vec(),
        accel: k1[n..].to_vec(),
    }];
    if t_span == 0.0 {
        return Ok(Trajectory { samples, complete: true });
    }

    let mut t = 0.0f64;
    let mut h = t_span / 100.0;
    let mut err_prev = 1.0f64;
    let mut complete = true;

    for _step in 0..MAX_STEPS {
        let remaining = t_span - t;
        if remaining == 0.0 || remaining.signum() != t_span.signum() {
            break;
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }
        if h.abs() < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow(t));
        }

        let k2 = ode_rhs(g, &step_from(&y, h, &[(&k1, A21)]))?;
        let k3 = ode_rhs(g, &step_from(&y, h, &[(&k1, A31), (&k2, A32)]))?;
        let k4 = ode_rhs(g, &step_from(&y, h, &[(&k1, A41), (&k2, A42), (&k3, A43)]))?;
        let k5 = ode_rhs(
            g,
            &step_from(&y, h, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]),
        )?;
        let k6 = ode_rhs(
            g,
            &step_from(
                &y,
                h,
                &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)],
            ),
        )?;
        let y_new = step_from(
            &y,
            h,
            &[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)],
        );
        let k7 = ode_rhs(g, &y_new)?;

        let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
        let mut err_acc = 0.0;
        for i in 0..2 * n {
            let mut e = 0.0;
            for (k, w) in ks.iter().zip(ERR_W.iter()) {
                e += w * k[i];
            }
            e *= h;
            let sc = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err_acc += (e / sc) * (e / sc);
        }
        let err = (err_acc / (2 * n) as f64).sqrt();

        if err <= 1.0 {
            if !y_new.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("geodesic state"));
            }
            if chart.check(&y_new[..n]).is_err() {
                complete = false;
                break;
            }
            t += h;
            samples.push(TrajectorySample {
                t,
                point: y_new[..n].to_vec(),
                velocity: y_new[n..].to_vec(),
                accel: k7[n..].to_vec(),
            });
            y = y_new;
            k1 = k7;
            let fac = (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }

        if t == t_span {
            break;
        }
    }
    if complete && t != t_span && (t_span - t).signum() == t_span.signum() {
        return Err(Error::StepBudget { steps: MAX_STEPS, t });
    }

    Ok(Trajectory { samples, complete })
}

/// Resample a trajectory at n+1 evenly spaced times by cubic Hermite
/// interpolation: position from (point, velocity) data, velocity from
/// (velocity, accel), acceleration from the velocity cubic's derivative.
pub fn dense_resample(traj: &Trajectory, n: usize) -> Vec<TrajectorySample> {
    let s = &traj.samples;
    if s.len() < 2 || n == 0 {
        return s.to_vec();
    }
    let t0 = s[0].t;
    let t1 = s[s.len() - 1].t;
    let dir = (t1 - t0).signum();
    let mut seg = 0;
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let t = t0 + (t1 - t0) * m as f64 / n as f64;
        while seg + 2 < s.len() && (s[seg + 1].t - t) * dir <= 0.0 {
            seg += 1;
        }
        let (a, b) = (&s[seg], &s[seg + 1]);
        let h = b.t - a.t;
        let th = (t - a.t) / h;
        let (t2, t3) = (th * th, th * th * th);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + th;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = (6.0 * t2 - 6.0 * th) / h;
        let d10 = 3.0 * t2 - 4.0 * th + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * th) / h;
        let d11 = 3.0 * t2 - 2.0 * th;
        let dim = a.point.len();
        let mut point = Vec::with_capacity(dim);
        let mut velocity = Vec::with_capacity(dim);
        let mut accel = Vec::with_capacity(dim);
        for i in 0..dim {
            point.push(
                h00 * a.point[i] + h10 * h * a.velocity[i] + h01 * b.point[i]
                    + h11 * h * b.velocity[i],
            );
            velocity.push(
                h00 * a.velocity[i] + h10 * h * a.accel[i] + h01 * b.velocity[i]
                    + h11 * h * b.accel[i],
            );
            accel.push(d00 * a.velocity[i] + d10 * a.accel[i] + d01 * b.velocity[i] + d11 * b.accel[i]);
        }
        out.push(TrajectorySample { t, point, velocity, accel });
    }
    out
}

/// The integral I_t(xi) = g(adj(L - t I) xi, xi) evaluated on one sample. For
/// a compatible pair this is constant along every g-geodesic, for every t.
pub fn integral_it(g: &MetricField, l: &EndoField, t: f64, sample: &TrajectorySample) -> f64 {
    let gv = g.eval_raw(&sample.point).values();
    let lv = l.eval_raw(&sample.point).values();
    let adj = lv.plus_scaled_identity(-t).adjugate();
    let w = adj.mat_vec(&sample.velocity);
    let mut acc = 0.0;
    for i in 0..gv.dim() {
        for j in 0..gv.dim() {
            acc += gv.at(i, j) * w[i] * sample.velocity[j];
        }
    }
    acc
}

/// Evaluation parameters for the integral family: n+1 fixed values of t, so
/// the degree-(n-1) polynomial t -> I_t is overdetermined by one node.
pub fn choose_integral_ts(n: usize) -> Vec<f64> {
    const TS: [f64; 9] = [-1.0, 0.0, 10.0, 0.5, 2.5, -3.5, 7.0, 1.25, -0.75];
    assert!(n < TS.len(), "dimension {n} outside the supported range");
    TS[..=n].to_vec()
}

/// Per-sample residual of the unparameterized geodesic equation of `gbar`
/// along a curve: with A = x'' + Gamma-bar(x')(x'), the curve is an
/// unparameterized gbar-geodesic iff A is collinear with the velocity, so the
/// residual is the Euclidean rejection |A - (<A,v>/<v,v>) v| / (|A| + |v|^2).
/// The Euclidean inner product is deliberate: the metrics here have null
/// vectors, so gbar itself cannot measure collinearity.
pub fn unparam_geodesic_profile(
    gbar: &MetricField,
    samples: &[TrajectorySample],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let gamma = christoffel(gbar, &s.point)?;
        let n = s.point.len();
        let mut a = vec![0.0; n];
        for (k, slot) in a.iter_mut().enumerate() {
            let mut acc = s.accel[k];
            for i in 0..n {
                for j in 0..n {
                    acc += gamma.at(k, i, j) * s.velocity[i] * s.velocity[j];
                }
            }
            *slot = acc;
        }
        let vv: f64 = s.velocity.iter().map(|c| c * c).sum();
        if vv == 0.0 {
            return Err(Error::NonFinite("velocity along the trajectory"));
        }
        let av: f64 = a.iter().zip(&s.velocity).map(|(x, v)| x * v).sum();
        let mut rej_sq = 0.0;
        let mut a_sq = 0.0;
        for (x, v) in a.iter().zip(&s.velocity) {
            let r = x - (av / vv) * v;
            rej_sq += r * r;
            a_sq += x * x;
        }
        out.push(rej_sq.sqrt() / (a_sq.sqrt() + vv));
    }
    Ok(out)
}

/// Maximum of [`unparam_geodesic_profile`] over the samples.
pub fn unparam_geodesic_residual(
    gbar: &MetricField,
    samples: &[TrajectorySample],
) -> Result<f64> {
    Ok(unparam_geodesic_profile(gbar, samples)?
        .into_iter()
        .fold(0.0, f64::max))
}
