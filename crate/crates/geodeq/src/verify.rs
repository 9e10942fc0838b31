//! Verification driver: pointwise residuals over a sampled chart, geodesic
//! trials, and the aggregation of both into pass/fail reports.
//!
//! All randomness is seeded, sampling happens before any parallel work, and
//! the parallel maps preserve order, so a report is a pure function of
//! (scene, options) and reruns are byte-identical.

mod geodesic;
mod pointwise;

pub use geodesic::{
    choose_integral_ts, dense_resample, integral_it, integrate_geodesic,
    unparam_geodesic_profile, unparam_geodesic_residual, Trajectory, TrajectorySample,
};
pub use pointwise::{
    christoffel, compatibility_residual, nabla_l, nijenhuis, nijenhuis_residual,
    selfadjoint_residual, Rank3,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::Chart;
use crate::normalforms::Scene;
use crate::{Error, Result};

/// Acceptance thresholds for the individual checks. The defaults are the
/// documented contract; the geodesic-based ones are looser because integrator
/// error accumulates along the curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub selfadjoint: f64,
    pub compat: f64,
    pub nijenhuis: f64,
    pub nabla_l: f64,
    pub drift: f64,
    pub unparam: f64,
    pub holdout: f64,
    pub integrator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            selfadjoint: 1e-12,
            compat: 1e-9,
            nijenhuis: 1e-9,
            nabla_l: 1e-11,
            drift: 1e-6,
            unparam: 1e-6,
            holdout: 1e-9,
            integrator: 1e-10,
        }
    }
}

/// Initial conditions for one geodesic trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicTrial {
    pub p0: Vec<f64>,
    pub v0: Vec<f64>,
    #[serde(rename = "T")]
    pub t_span: f64,
}

/// Knobs for [`verify_pair`]. `trials` overrides the generated initial
/// conditions when nonempty.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub n_points: usize,
    pub seed: u64,
    pub n_trials: usize,
    pub trials: Vec<GeodesicTrial>,
    pub tolerances: Tolerances,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_points: 100,
            seed: 42,
            n_trials: 3,
            trials: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Outcome of one check over all its samples. `attempted`/`accepted` count
/// sampling candidates for the pointwise rows and trials/completed trials for
/// the geodesic rows.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub attempted: usize,
    pub accepted: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_point: Vec<f64>,
}

fn aggregate(
    check: &str,
    residuals: &[f64],
    worst_points: impl Fn(usize) -> Vec<f64>,
    attempted: usize,
    accepted: usize,
    tolerance: f64,
) -> VerificationReport {
    let mut max_residual = 0.0f64;
    let mut worst = None;
    let mut sum = 0.0;
    for (i, &r) in residuals.iter().enumerate() {
        sum += r;
        if worst.is_none() || r > max_residual {
            max_residual = r;
            worst = Some(i);
        }
    }
    VerificationReport {
        check: check.into(),
        attempted,
        accepted,
        max_residual,
        mean_residual: if residuals.is_empty() { 0.0 } else { sum / residuals.len() as f64 },
        tolerance,
        pass: max_residual <= tolerance,
        worst_point: worst.map(&worst_points).unwrap_or_default(),
    }
}

fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() {
        let mut w = ys[i];
        for j in 0..xs.len() {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w;
    }
    acc
}

/// Draw trial initial conditions: base points from the middle half of the
/// chart (re-drawn until clear of the exclusions), velocities scaled so a
/// straight line would cross about a third of the narrowest chart direction
/// over the trial time.
fn generate_trials<R: Rng>(chart: &Chart, n_trials: usize, rng: &mut R) -> Result<Vec<GeodesicTrial>> {
    let center = chart.center();
    let min_half = chart
        .bounds()
        .iter()
        .map(|b| 0.5 * (b[1] - b[0]))
        .fold(f64::INFINITY, f64::min);
    let t_span = 1.0;
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let mut p0 = None;
        for _ in 0..100 {
            let raw = chart.sample(rng);
            let cand: Vec<f64> = raw
                .iter()
                .zip(&center)
                .map(|(x, c)| c + 0.5 * (x - c))
                .collect();
            if chart.check(&cand).is_ok() {
                p0 = Some(cand);
                break;
            }
        }
        let p0 = p0.ok_or(Error::SamplingRejection {
            attempted: 100,
            accepted: 0,
            dominant: "geodesic base point inside the exclusion margins".into(),
        })?;
        let mut v0: Vec<f64> = vec![0.0; chart.dim()];
        loop {
            for c in v0.iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
            let sup = v0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if sup > 1e-3 {
                let scale = 0.35 * min_half / (sup * t_span);
                for c in v0.iter_mut() {
                    *c *= scale;
                }
                break;
            }
        }
        out.push(GeodesicTrial { p0, v0, t_span });
    }
    Ok(out)
}

/// Run the full battery on a scene: self-adjointness, the compatibility
/// equation, and the Nijenhuis torsion over sampled points, then integral
/// conservation, the polynomial-interpolation holdout on the integral family,
/// and the unparameterized geodesic test along integrated trials. Rows appear
/// in that fixed order.
pub fn verify_pair(scene: &Scene, opts: &VerifyOptions) -> Result<Vec<VerificationReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sampling = scene.chart.sample_points(opts.n_points, &mut rng)?;
    let points = &sampling.points;
    let l = scene.l_field();
    let gbar = scene.gbar_field();
    let tol = &opts.tolerances;
    let point_at = |i: usize| points[i].clone();

    let mut reports = Vec::with_capacity(6);

    let sa: Vec<f64> = points
        .par_iter()
        .map(|p| selfadjoint_residual(&scene.g, &l, p))
        .collect();
    reports.push(aggregate(
        "selfadjoint",
        &sa,
        point_at,
        sampling.attempted,
        points.len(),
        tol.selfadjoint,
    ));

    let compat = points
        .par_iter()
        .map(|p| compatibility_residual(&scene.g, &l, p))
        .collect::<Result<Vec<f64>>>()?;
    reports.push(aggregate(
        "compatibility",
        &compat,
        point_at,
        sampling.attempted,
        points.len(),
        tol.compat,
    ));

    let nij: Vec<f64> = points
        .par_iter()
        .map(|p| nijenhuis_residual(&l, p))
        .collect();
    reports.push(aggregate(
        "nijenhuis",
        &nij,
        point_at,
        sampling.attempted,
        points.len(),
        tol.nijenhuis,
    ));

    let trials = if opts.trials.is_empty() {
        generate_trials(&scene.chart, opts.n_trials, &mut rng)?
    } else {
        opts.trials.clone()
    };

    let n = scene.chart.dim();
    let ts = choose_integral_ts(n);
    let mut drift = Vec::new();
    let mut holdout = Vec::new();
    let mut unparam = Vec::new();
    let mut completed = 0usize;
    for (trial_idx, trial) in trials.iter().enumerate() {
        let traj = integrate_geodesic(
            &scene.g,
            &scene.chart,
            &trial.p0,
            &trial.v0,
            trial.t_span,
            tol.integrator,
        )?;
        if traj.complete {
            completed += 1;
        }
        if traj.samples.len() < 2 {
            continue;
        }

        // values of I_t per (t, sample)
        let table: Vec<Vec<f64>> = ts
            .iter()
            .map(|&t| {
                traj.samples
                    .iter()
                    .map(|s| integral_it(&scene.g, &l, t, s))
                    .collect()
            })
            .collect();
        for row in &table {
            let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let scale = 1.0 + row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            drift.push(((hi - lo) / scale, trial_idx));
        }

        // the held-out node: I_t is degree n-1 in t, so the first n nodes
        // determine the value at node n
        for si in 0..traj.samples.len() {
            let ys: Vec<f64> = (0..n).map(|ti| table[ti][si]).collect();
            let pred = lagrange_eval(&ts[..n], &ys, ts[n]);
            let actual = table[n][si];
            holdout.push(((pred - actual).abs() / (1.0 + actual.abs()), trial_idx));
        }

        for r in unparam_geodesic_profile(&gbar, &traj.samples)? {
            unparam.push((r, trial_idx));
        }
    }

    for (check, rows, tolerance) in [
        ("integral_drift", &drift, tol.drift),
        ("integral_holdout", &holdout, tol.holdout),
        ("unparam_geodesic", &unparam, tol.unparam),
    ] {
        let residuals: Vec<f64> = rows.iter().map(|&(r, _)| r).collect();
        reports.push(aggregate(
            check,
            &residuals,
            |i| trials[rows[i].1].p0.clone(),
            trials.len(),
            completed,
            tolerance,
        ));
    }

    Ok(reports)
}
