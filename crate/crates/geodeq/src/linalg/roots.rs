use num_complex::Complex64;

use super::Poly;
use crate::{Error, Result};

const MAX_ITER: usize = 200;

/// All roots of a complex-coefficient polynomial by the Aberth-Ehrlich
/// simultaneous iteration. `tol` controls the stopping test (corrections
/// relative to 1 + |z|) and the conjugate snapping of near-real roots when the
/// coefficients are real. Roots are returned sorted by (re, im).
///
/// Two floating-point realities shape the implementation. First, multiple
/// roots are genuinely reachable here (Jordan blocks), and an m-fold root of a
/// polynomial carrying O(eps) coefficient noise scatters into m simple roots
/// on a circle of radius ~eps^(1/m); the iteration therefore also stops a root
/// once |p(z)| falls below the Horner evaluation noise floor, and
/// `spectral_cluster` reconstructs the cluster. Second, with real coefficients
/// the iteration map commutes exactly with conjugation, so an exactly
/// conjugate-symmetric configuration whose two members must land on distinct
/// real roots can never break the tie: the initial guesses are deliberately
/// asymmetric, and conjugate symmetry is restored by snapping after
/// convergence instead of being enforced per step.
pub fn poly_roots(p: &Poly<Complex64>, tol: f64) -> Result<Vec<Complex64>> {
    let mut coeffs = p.coeffs().to_vec();
    // trim exact trailing zeros so the degree is honest
    while coeffs.len() > 1 && coeffs.last().unwrap().norm() == 0.0 {
        coeffs.pop();
    }
    if coeffs.len() == 1 {
        if coeffs[0].norm() == 0.0 {
            return Err(Error::ZeroPolynomial);
        }
        return Ok(vec![]);
    }

    let real_input = coeffs.iter().all(|c| c.im == 0.0);

    // factor out exact roots at the origin
    let mut roots = Vec::new();
    while coeffs[0].norm() == 0.0 && coeffs.len() > 1 {
        roots.push(Complex64::new(0.0, 0.0));
        coeffs.remove(0);
    }

    let deg = coeffs.len() - 1;
    match deg {
        0 => {}
        1 => roots.push(-coeffs[0] / coeffs[1]),
        2 => roots.extend(quadratic(coeffs[0], coeffs[1], coeffs[2])),
        _ => roots.extend(aberth(&coeffs, tol)?),
    }

    if real_input {
        snap_conjugate_symmetry(&mut roots, tol);
    }
    roots.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(roots)
}

/// Stable complex quadratic formula.
fn quadratic(c: Complex64, b: Complex64, a: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // pick the sign that avoids cancellation in -b -+ disc
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q.norm() == 0.0 {
        [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]
    } else {
        [q / a, c / q]
    }
}

fn aberth(coeffs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| c / lead).collect();
    let p = Poly::new(monic.clone());
    let dp = p.derivative();

    // Fujiwara-style radius bound, then guesses on a circle. The fixed angular
    // offset keeps the starting set away from any symmetric deadlock.
    let mut radius = 0.0f64;
    for (k, c) in monic.iter().enumerate().take(deg) {
        let r = c.norm().powf(1.0 / (deg - k) as f64);
        radius = radius.max(2.0 * r);
    }
    radius = radius.max(0.5);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / deg as f64 + 0.43;
            radius * Complex64::new(theta.cos(), theta.sin())
        })
        .collect();

    let coeff_scale = p.max_coeff();
    for _ in 0..MAX_ITER {
        let mut all_done = true;
        let mut znew = z.clone();
        for i in 0..deg {
            let pv = p.eval(z[i]);
            // Horner noise floor: eps * sum |c_k| |z|^k, with a safety factor
            let mut s = 1.0f64;
            let r = z[i].norm();
            for &c in monic.iter().rev().skip(1) {
                s = s * r + c.norm();
            }
            let floor = 8.0 * f64::EPSILON * s * (2 * deg + 1) as f64;
            if pv.norm() <= floor {
                continue; // as converged as evaluation allows
            }
            let dv = dp.eval(z[i]);
            let w = if dv.norm() == 0.0 {
                Complex64::new(f64::EPSILON.sqrt() * (1.0 + r), 0.0)
            } else {
                pv / dv
            };
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        sum += 1.0 / d;
                    }
                }
            }
            let denom = 1.0 - w * sum;
            let delta = if denom.norm() < 1e-300 { w } else { w / denom };
            znew[i] = z[i] - delta;
            if delta.norm() > tol * (1.0 + znew[i].norm()) {
                all_done = false;
            }
        }
        z = znew;
        if all_done {
            let _ = coeff_scale;
            return Ok(z);
        }
    }
    Err(Error::RootsDiverged(MAX_ITER))
}

fn snap_conjugate_symmetry(roots: &mut [Complex64], tol: f64) {
    for r in roots.iter_mut() {
        if r.im.abs() <= tol * (1.0 + r.norm()) {
            r.im = 0.0;
        }
    }
    let m = roots.len();
    let mut used = vec![false; m];
    for i in 0..m {
        if used[i] || roots[i].im == 0.0 {
            continue;
        }
        used[i] = true;
        let target = roots[i].conj();
        let mut best: Option<usize> = None;
        let mut best_d = f64::INFINITY;
        for j in 0..m {
            if !used[j] && roots[j].im != 0.0 {
                let d = (roots[j] - target).norm();
                if d < best_d {
                    best = Some(j);
                    best_d = d;
                }
            }
        }
        if let Some(j) = best {
            used[j] = true;
            let mean = 0.5 * (roots[i] + roots[j].conj());
            roots[i] = mean;
            roots[j] = mean.conj();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterKind {
    Real,
    ConjugatePair,
}

/// One spectral cluster. For a conjugate pair, `value` is the member with
/// positive imaginary part and `mult` the multiplicity of that member alone
/// (the pair accounts for 2 * mult roots).
#[derive(Clone, Debug)]
pub struct Cluster {
    pub value: Complex64,
    pub mult: usize,
    pub kind: ClusterKind,
}

impl Cluster {
    /// Number of roots this cluster accounts for.
    pub fn weight(&self) -> usize {
        match self.kind {
            ClusterKind::Real => self.mult,
            ClusterKind::ConjugatePair => 2 * self.mult,
        }
    }
}

/// Scatter envelope for a hypothesized m-fold cluster centered near c: a point
/// the root finder froze at evaluation noise level `floor` satisfies
/// |chi(z)| <= floor, and near an m-fold center that means
/// |z - c|^m <= m! floor / |chi^(m)(c)|. The derivative magnitude
/// self-regulates: it is itself tiny when the true multiplicity exceeds m, so
/// the radius grows exactly when it must.
fn scatter_radius(
    derivs: &[Poly<Complex64>],
    m: usize,
    c: Complex64,
    floor: f64,
) -> f64 {
    let dm = derivs[m].eval(c).norm();
    let mut mfact = 1.0f64;
    for k in 2..=m {
        mfact *= k as f64;
    }
    let denom = dm.max(1e-300);
    8.0 * (mfact * floor / denom).powf(1.0 / m as f64)
}

/// Horner-evaluation noise floor of p at radius |c|.
fn eval_floor(p: &Poly<Complex64>, c: Complex64) -> f64 {
    let r = c.norm();
    let mut s = 0.0f64;
    for &ck in p.coeffs().iter().rev() {
        s = s * r + ck.norm();
    }
    8.0 * f64::EPSILON * s * (2 * p.degree() + 1) as f64
}

/// Group approximate roots into multiplicity clusters and pair conjugates.
/// `tol` is the baseline radius for simple roots; the radius for a
/// hypothesized m-fold merge comes from the evaluation noise floor and the
/// local magnitude of the m-th derivative of the polynomial rebuilt from the
/// roots, which tracks the true eps^(1/m) scatter of multiple roots. Intended
/// for roots of real-coefficient polynomials (conjugate symmetric sets).
pub fn spectral_cluster(roots: &[Complex64], tol: f64) -> Vec<Cluster> {
    #[derive(Clone)]
    struct Group {
        center: Complex64,
        mult: usize,
    }
    let mut groups: Vec<Group> = roots
        .iter()
        .map(|&z| Group {
            center: z,
            mult: 1,
        })
        .collect();

    // rebuild the polynomial and its derivatives once for the scatter model
    let mut chi = Poly::constant(Complex64::new(1.0, 0.0));
    for &r in roots {
        chi = chi.mul(&Poly::linear_root(r));
    }
    let mut derivs = vec![chi.clone()];
    for _ in 0..roots.len() {
        derivs.push(derivs.last().unwrap().derivative());
    }

    loop {
        // closest pair that qualifies under its own merge radius
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let d = (groups[i].center - groups[j].center).norm();
                let total = groups[i].mult + groups[j].mult;
                let c = (groups[i].center * groups[i].mult as f64
                    + groups[j].center * groups[j].mult as f64)
                    / total as f64;
                let scale = 1.0 + c.norm();
                let radius = (tol * scale).max(scatter_radius(
                    &derivs,
                    total,
                    c,
                    eval_floor(&chi, c),
                ));
                if d <= radius && best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let total = groups[i].mult + groups[j].mult;
        let center = (groups[i].center * groups[i].mult as f64
            + groups[j].center * groups[j].mult as f64)
            / total as f64;
        groups[i] = Group {
            center,
            mult: total,
        };
        groups.remove(j);
    }

    // near-real centers collapse onto the axis; the threshold must cover the
    // same scatter the merge radius does, or a multiple real root whose
    // scattered members did not pair up exactly keeps a phantom imaginary part
    for g in groups.iter_mut() {
        let scale = 1.0 + g.center.norm();
        let snap = (tol.max(1e-9) * scale).max(scatter_radius(
            &derivs,
            g.mult,
            g.center,
            eval_floor(&chi, g.center),
        ));
        if g.center.im.abs() <= snap {
            g.center.im = 0.0;
        }
    }

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut used = vec![false; groups.len()];
    for i in 0..groups.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        if groups[i].center.im == 0.0 {
            clusters.push(Cluster {
                value: groups[i].center,
                mult: groups[i].mult,
                kind: ClusterKind::Real,
            });
            continue;
        }
        // find the conjugate partner (guaranteed for conjugate-symmetric input)
        let target = groups[i].center.conj();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..groups.len() {
            if !used[j] && groups[j].center.im != 0.0 {
                let d = (groups[j].center - target).norm();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        let value = if groups[i].center.im > 0.0 {
            groups[i].center
        } else {
            groups[i].center.conj()
        };
        match best {
            Some((j, _)) => {
                used[j] = true;
                let paired = 0.5 * (value + groups[j].center.conj().re_im_flip());
                clusters.push(Cluster {
                    value: paired,
                    mult: groups[i].mult.min(groups[j].mult).max(1),
                    kind: ClusterKind::ConjugatePair,
                });
            }
            None => {
                // non-symmetric input; keep the cluster rather than lose roots
                clusters.push(Cluster {
                    value,
                    mult: groups[i].mult,
                    kind: ClusterKind::ConjugatePair,
                });
            }
        }
    }

    clusters.sort_by(|a, b| {
        (a.value.re, a.value.im.abs())
            .partial_cmp(&(b.value.re, b.value.im.abs()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    clusters
}

trait ReImFlip {
    fn re_im_flip(self) -> Self;
}

impl ReImFlip for Complex64 {
    /// Mirror into the upper half plane.
    fn re_im_flip(self) -> Self {
        if self.im < 0.0 {
            self.conj()
        } else {
            self
        }
    }
}
