//! Generators for the explicit normal-form pairs: the two-dimensional
//! diagonal family, its three-dimensional analogue, real and complex Jordan
//! blocks (raw and with the eigenvalue normalized to a coordinate), the
//! three-dimensional block pair with a constant complex eigenvalue, and the
//! published four-dimensional pair that fails geodesic equivalence (kept as a
//! negative control).
//!
//! Each generator returns a [`Scene`]: a chart enriched with the exclusions
//! the construction needs, the metric g, and whichever of L / ḡ the normal
//! form defines directly (the missing one is derived on demand).

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fields::{
    companion_metric, projective_l_field, Chart, EndoField, MetricField, ParamFn,
};
use crate::jets::{CJet, RJet};
use crate::linalg::{Scalar, SmallMatrix};
use crate::{Error, Result};

/// A constructed pair bound to its chart. `l` and `gbar` hold whatever the
/// normal form writes down explicitly; the accessors derive the other one.
#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub chart: Chart,
    pub g: MetricField,
    pub l: Option<EndoField>,
    pub gbar: Option<MetricField>,
}

impl Scene {
    /// The endomorphism of the pair: stored, or the projective one computed
    /// from (g, ḡ).
    pub fn l_field(&self) -> EndoField {
        match &self.l {
            Some(l) => l.clone(),
            None => projective_l_field(
                &self.g,
                self.gbar
                    .as_ref()
                    .expect("scene must carry L or the companion metric"),
            ),
        }
    }

    /// The companion metric of the pair: stored, or derived from (g, L).
    pub fn gbar_field(&self) -> MetricField {
        match &self.gbar {
            Some(gbar) => gbar.clone(),
            None => companion_metric(
                &self.g,
                self.l.as_ref().expect("scene must carry L or ḡ"),
            ),
        }
    }
}

/// Which bottom-right corner the normalized Jordan forms use. Two
/// conventions are in circulation and disagree; the compatibility check
/// adjudicates (see the generator tests in the verification suite).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaVariant {
    /// sum over i of a_i * a_{n-i-1} with a_i = i x_i, i.e. coefficients
    /// i(n-i-1). Direct substitution of the eigenvalue normalization into the
    /// un-normalized form produces this one.
    #[default]
    Product,
    /// coefficients i(n-i+1), as printed next to the normalized form.
    Printed,
}

/// Anti-diagonal matrix with ones in the middle band, the a-coefficients down
/// the last column (mirrored into the last row), and the given corner entry:
///
///   [ .        .      a_{n-1} ]
///   [ .    1         a_{n-2} ]
///   [   1            ...     ]
///   [ a_{n-1} ... a_1 corner ]
///
/// `a` holds a_1..a_{n-1}; for n = 1 the single entry is 1.
fn antidiag_with_column<S: Scalar>(n: usize, a: &[S], corner: S) -> SmallMatrix<S> {
    debug_assert_eq!(a.len() + 1, n);
    let mut m = SmallMatrix::zeros(n);
    if n == 1 {
        m.set(0, 0, S::one());
        return m;
    }
    for i in 1..n - 1 {
        m.set(i, n - 1 - i, S::one());
    }
    for i in 0..n - 1 {
        // row i of the last column carries a_{n-1-i}
        m.set(i, n - 1, a[n - 2 - i]);
        m.set(n - 1, i, a[n - 2 - i]);
    }
    m.set(n - 1, n - 1, corner);
    m
}

/// Upper bidiagonal Jordan-type matrix: lambda on the diagonal, ones on the
/// superdiagonal, and a_1..a_{n-1} down the last column (the last column wins
/// the shared slot at n = 2).
fn jordan_with_column<S: Scalar>(n: usize, lambda: S, a: &[S]) -> SmallMatrix<S> {
    debug_assert_eq!(a.len() + 1, n);
    let mut m = SmallMatrix::zeros(n);
    for i in 0..n {
        m.set(i, i, lambda);
    }
    for i in 0..n.saturating_sub(2) {
        m.set(i, i + 1, S::one());
    }
    for i in 0..n - 1 {
        m.set(i, n - 1, a[i]);
    }
    m
}

/// sum over i = 1..=n-2 of a_i * a_{n-i-1}.
fn corner_product<S: Scalar>(a: &[S]) -> S {
    let n = a.len() + 1;
    let mut acc = S::zero();
    for i in 1..=n.saturating_sub(2) {
        acc = acc + a[i - 1] * a[n - i - 2];
    }
    acc
}

/// sum over i = 1..=n-2 of i(n-i+1) c_i c_{n-i-1} on the first n-1
/// coordinates (the corner printed next to the normalized forms).
fn corner_printed<S: Scalar>(n: usize, coords: &[S]) -> S {
    let mut acc = S::zero();
    for i in 1..=n.saturating_sub(2) {
        let w = S::from_f64((i * (n - i + 1)) as f64);
        acc = acc + w * coords[i - 1] * coords[n - i - 2];
    }
    acc
}

/// Realification rule for complex-linear operators: entry a+ib becomes the
/// 2x2 block [[a, -b], [b, a]].
pub fn realify_endo(lc: &SmallMatrix<CJet>) -> SmallMatrix<RJet> {
    let n = lc.dim();
    let mut m = SmallMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let e = lc.at(i, j);
            let (a, b) = (e.re(), e.im());
            m.set(2 * i, 2 * j, a);
            m.set(2 * i, 2 * j + 1, -b);
            m.set(2 * i + 1, 2 * j, b);
            m.set(2 * i + 1, 2 * j + 1, a);
        }
    }
    m
}

/// Realification rule for complex bilinear forms (the real part of the form):
/// entry a+ib becomes the 2x2 block [[a, -b], [-b, -a]].
pub fn realify_metric(gc: &SmallMatrix<CJet>) -> SmallMatrix<RJet> {
    let n = gc.dim();
    let mut m = SmallMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let e = gc.at(i, j);
            let (a, b) = (e.re(), e.im());
            m.set(2 * i, 2 * j, a);
            m.set(2 * i, 2 * j + 1, -b);
            m.set(2 * i + 1, 2 * j, -b);
            m.set(2 * i + 1, 2 * j + 1, -a);
        }
    }
    m
}

/// Scan a single-variable polynomial on an interval (dense grid including the
/// endpoints) and report its min and max.
fn range_on_interval(f: &ParamFn, interval: [f64; 2]) -> (f64, f64) {
    const GRID: usize = 256;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut point = vec![0.0; f.var() + 1];
    for k in 0..=GRID {
        let x = interval[0] + (interval[1] - interval[0]) * k as f64 / GRID as f64;
        point[f.var()] = x;
        let v = f.value_at(&point);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Two-dimensional diagonal family: g = (Y-X)(dx^2+dy^2) with its explicit
/// partner metric and L = diag(X, Y). Requires 0 < X < Y on the box.
pub fn dini_pair(x_fn: &ParamFn, y_fn: &ParamFn, chart: Chart) -> Result<Scene> {
    if chart.dim() != 2 {
        return Err(Error::Schema(format!(
            "dini construction needs a 2-dimensional chart, got {}",
            chart.dim()
        )));
    }
    x_fn.validate(2)?;
    y_fn.validate(2)?;
    let threshold = chart.threshold();
    let (x_lo, x_hi) = range_on_interval(x_fn, chart.bounds()[x_fn.var()]);
    let (y_lo, _) = range_on_interval(y_fn, chart.bounds()[y_fn.var()]);
    if x_lo <= threshold {
        return Err(Error::Schema(format!(
            "ordering 0 < X < Y violated: min X = {x_lo:.6e} on the box"
        )));
    }
    if y_lo - x_hi <= threshold {
        return Err(Error::Schema(format!(
            "ordering 0 < X < Y violated: max X = {x_hi:.6e}, min Y = {y_lo:.6e}"
        )));
    }

    let (xf, yf) = (x_fn.clone(), y_fn.clone());
    let g = MetricField::new(2, move |p| {
        let c = RJet::seed_point(p);
        let w = yf.eval_real(&c) - xf.eval_real(&c);
        let zero = RJet::constant(0.0);
        SmallMatrix::from_rows(&[vec![w, zero], vec![zero, w]])
    });
    let (xf, yf) = (x_fn.clone(), y_fn.clone());
    let gbar = MetricField::new(2, move |p| {
        let c = RJet::seed_point(p);
        let x = xf.eval_real(&c);
        let y = yf.eval_real(&c);
        let one = RJet::constant(1.0);
        let f = one / x - one / y;
        let zero = RJet::constant(0.0);
        SmallMatrix::from_rows(&[vec![f / x, zero], vec![zero, f / y]])
    });
    let (xf, yf) = (x_fn.clone(), y_fn.clone());
    let l = EndoField::new(2, move |p| {
        let c = RJet::seed_point(p);
        let zero = RJet::constant(0.0);
        SmallMatrix::from_rows(&[
            vec![xf.eval_real(&c), zero],
            vec![zero, yf.eval_real(&c)],
        ])
    });

    let (xf, yf) = (x_fn.clone(), y_fn.clone());
    let xf2 = x_fn.clone();
    let chart = chart
        .with_exclusion("Y - X", move |p| yf.value_at(p) - xf.value_at(p))
        .with_exclusion("X", move |p| xf2.value_at(p));
    Ok(Scene {
        name: "dini".into(),
        chart,
        g,
        l: Some(l),
        gbar: Some(gbar),
    })
}

/// Three-dimensional diagonal family with L = diag(X, Y, Z) and
/// g = diag((Y-X)(Z-X), (Y-X)(Z-Y), (Z-Y)(Z-X)). Requires 0 < X < Y < Z.
pub fn levicivita3_pair(
    x_fn: &ParamFn,
    y_fn: &ParamFn,
    z_fn: &ParamFn,
    chart: Chart,
) -> Result<Scene> {
    if chart.dim() != 3 {
        return Err(Error::Schema(format!(
            "levicivita3 construction needs a 3-dimensional chart, got {}",
            chart.dim()
        )));
    }
    for f in [x_fn, y_fn, z_fn] {
        f.validate(3)?;
    }
    let threshold = chart.threshold();
    let (x_lo, x_hi) = range_on_interval(x_fn, chart.bounds()[x_fn.var()]);
    let (y_lo, y_hi) = range_on_interval(y_fn, chart.bounds()[y_fn.var()]);
    let (z_lo, _) = range_on_interval(z_fn, chart.bounds()[z_fn.var()]);
    if x_lo <= threshold || y_lo - x_hi <= threshold || z_lo - y_hi <= threshold {
        return Err(Error::Schema(format!(
            "ordering 0 < X < Y < Z violated on the box: \
             X in [{x_lo:.4e}, {x_hi:.4e}], Y in [{y_lo:.4e}, {y_hi:.4e}], min Z = {z_lo:.4e}"
        )));
    }

    let fns = [x_fn.clone(), y_fn.clone(), z_fn.clone()];
    let g = {
        let fns = fns.clone();
        MetricField::new(3, move |p| {
            let c = RJet::seed_point(p);
            let x = fns[0].eval_real(&c);
            let y = fns[1].eval_real(&c);
            let z = fns[2].eval_real(&c);
            let mut m = SmallMatrix::zeros(3);
            m.set(0, 0, (y - x) * (z - x));
            m.set(1, 1, (y - x) * (z - y));
            m.set(2, 2, (z - y) * (z - x));
            m
        })
    };
    let l = {
        let fns = fns.clone();
        EndoField::new(3, move |p| {
            let c = RJet::seed_point(p);
            let mut m = SmallMatrix::zeros(3);
            for (k, f) in fns.iter().enumerate() {
                m.set(k, k, f.eval_real(&c));
            }
            m
        })
    };
    let gbar = companion_metric(&g, &l);

    let (xf, yf) = (x_fn.clone(), y_fn.clone());
    let (yf2, zf) = (y_fn.clone(), z_fn.clone());
    let xf2 = x_fn.clone();
    let chart = chart
        .with_exclusion("X", move |p| xf2.value_at(p))
        .with_exclusion("Y - X", move |p| yf.value_at(p) - xf.value_at(p))
        .with_exclusion("Z - Y", move |p| zf.value_at(p) - yf2.value_at(p));
    Ok(Scene {
        name: "levicivita3".into(),
        chart,
        g,
        l: Some(l),
        gbar: Some(gbar),
    })
}

/// Jordan-block coefficients a_1..a_{n-1} over seeded coordinates:
/// a_k = k lp c_{k-1} for k <= n-2 and a_{n-1} = 1 + (n-1) lp c_{n-2},
/// where lp is the derivative jet of the eigenvalue function.
fn jordan_coefficients<S: Scalar>(n: usize, lp: S, coords: &[S]) -> Vec<S> {
    let mut a = Vec::with_capacity(n - 1);
    for k in 1..n {
        if k < n - 1 {
            a.push(S::from_f64(k as f64) * lp * coords[k - 1]);
        } else {
            a.push(S::one() + S::from_f64(k as f64) * lp * coords[k - 1]);
        }
    }
    a
}

/// Single real Jordan block of size n with eigenvalue function lambda(x_n).
pub fn real_jordan_pair(n: usize, lambda: &ParamFn, chart: Chart) -> Result<Scene> {
    if !(1..=8).contains(&n) || chart.dim() != n {
        return Err(Error::Schema(format!(
            "real_jordan needs 1 <= n <= 8 matching the chart dimension (n = {n}, chart dim {})",
            chart.dim()
        )));
    }
    lambda.validate(n)?;
    if !lambda.is_real() || lambda.var() != n - 1 {
        return Err(Error::Schema(
            "real_jordan eigenvalue must be a real function of the last coordinate".into(),
        ));
    }

    let lam = lambda.clone();
    let g = MetricField::new(n, move |p| {
        let c = RJet::seed_point(p);
        let lp = lam.derivative().eval_real(&c);
        if n == 1 {
            let mut m = SmallMatrix::zeros(1);
            m.set(0, 0, RJet::constant(1.0));
            return m;
        }
        let a = jordan_coefficients(n, lp, &c);
        let corner = corner_product(&a);
        antidiag_with_column(n, &a, corner)
    });
    let lam = lambda.clone();
    let l = EndoField::new(n, move |p| {
        let c = RJet::seed_point(p);
        let lv = lam.eval_real(&c);
        let lp = lam.derivative().eval_real(&c);
        if n == 1 {
            let mut m = SmallMatrix::zeros(1);
            m.set(0, 0, lv);
            return m;
        }
        let a = jordan_coefficients(n, lp, &c);
        jordan_with_column(n, lv, &a)
    });

    let lam = lambda.clone();
    let lam_d = lambda.derivative();
    let mut chart = chart.with_exclusion("lambda", move |p| lam.value_at(p));
    if n >= 2 {
        chart = chart.with_exclusion("1 + (n-1) lambda' x_{n-1}", move |p| {
            1.0 + (n - 1) as f64 * lam_d.value_at(p) * p[n - 2]
        });
    }
    Ok(Scene {
        name: format!("real_jordan_n{n}"),
        chart,
        g,
        l: Some(l),
        gbar: None,
    })
}

/// Real Jordan block with the eigenvalue normalized to lambda = x_n; the free
/// function is h(x_n). The `sigma` flag picks the bottom-right corner variant.
pub fn real_jordan_normalized_pair(
    n: usize,
    h: &ParamFn,
    sigma: SigmaVariant,
    chart: Chart,
) -> Result<Scene> {
    if !(2..=8).contains(&n) || chart.dim() != n {
        return Err(Error::Schema(format!(
            "real_jordan_normalized needs 2 <= n <= 8 matching the chart dimension (n = {n})"
        )));
    }
    h.validate(n)?;
    if !h.is_real() || h.var() != n - 1 {
        return Err(Error::Schema(
            "real_jordan_normalized parameter must be a real function of the last coordinate"
                .into(),
        ));
    }

    // a_i = i x_i for i <= n-2, a_{n-1} = h(x_n) + (n-1) x_{n-1}
    let coeffs = move |h: &ParamFn, c: &[RJet]| -> Vec<RJet> {
        let mut a = Vec::with_capacity(n - 1);
        for k in 1..n {
            if k < n - 1 {
                a.push(k as f64 * c[k - 1]);
            } else {
                a.push(h.eval_real(c) + k as f64 * c[k - 1]);
            }
        }
        a
    };

    let hf = h.clone();
    let g = MetricField::new(n, move |p| {
        let c = RJet::seed_point(p);
        let a = coeffs(&hf, &c);
        let corner = match sigma {
            SigmaVariant::Product => corner_product(&a),
            SigmaVariant::Printed => corner_printed(n, &c),
        };
        antidiag_with_column(n, &a, corner)
    });
    let hf = h.clone();
    let l = EndoField::new(n, move |p| {
        let c = RJet::seed_point(p);
        let a = coeffs(&hf, &c);
        jordan_with_column(n, c[n - 1], &a)
    });

    let hf = h.clone();
    let chart = chart
        .with_exclusion("x_n", move |p| p[n - 1])
        .with_exclusion("h + (n-1) x_{n-1}", move |p| {
            hf.value_at(p) + (n - 1) as f64 * p[n - 2]
        });
    Ok(Scene {
        name: format!("real_jordan_normalized_n{n}"),
        chart,
        g,
        l: Some(l),
        gbar: None,
    })
}

/// Shared core of the two complex-block generators: given per-point complex
/// jets for the eigenvalue and the a-coefficients, assemble
/// g^C = -i S (L^C - conj(lambda) I)^n and realify both matrices.
fn complex_block_fields(
    n: usize,
    eval: impl Fn(&[CJet]) -> (CJet, Vec<CJet>, CJet) + Send + Sync + Clone + 'static,
) -> (MetricField, EndoField) {
    let dim = 2 * n;
    let eval_l = eval.clone();
    let l = EndoField::new(dim, move |p| {
        let z = CJet::seed_complex_point(p);
        let (lam, a, _) = eval_l(&z);
        realify_endo(&jordan_with_column(n, lam, &a))
    });
    let g = MetricField::new(dim, move |p| {
        let z = CJet::seed_complex_point(p);
        let (lam, a, corner) = eval(&z);
        let lc = jordan_with_column(n, lam, &a);
        let s = antidiag_with_column(n, &a, corner);
        let shifted = lc.plus_scaled_identity(-lam.conj());
        let mut power = SmallMatrix::identity(n);
        for _ in 0..n {
            power = power.mul(&shifted);
        }
        let gc = s
            .mul(&power)
            .scale(CJet::constant(Complex64::new(0.0, -1.0)))
            .symmetrize();
        realify_metric(&gc)
    });
    (g, l)
}

/// Complex Jordan block of complex size n (real dimension 2n) with
/// holomorphic eigenvalue function lambda(z_n). Coordinates are interleaved
/// (x1, y1, ..., xn, yn).
pub fn complex_jordan_pair(n: usize, lambda: &ParamFn, chart: Chart) -> Result<Scene> {
    if !(1..=4).contains(&n) || chart.dim() != 2 * n {
        return Err(Error::Schema(format!(
            "complex_jordan needs 1 <= n <= 4 with a chart of real dimension 2n (n = {n}, chart dim {})",
            chart.dim()
        )));
    }
    lambda.validate(n)?;
    if lambda.var() != n - 1 {
        return Err(Error::Schema(
            "complex_jordan eigenvalue must depend on the last complex coordinate".into(),
        ));
    }

    let lam_fn = lambda.clone();
    let lam_d = lambda.derivative();
    let (g, l) = complex_block_fields(n, move |z| {
        let lam = lam_fn.eval_holomorphic(z);
        let lp = lam_d.eval_holomorphic(z);
        let a = jordan_coefficients(n, lp, z);
        let corner = corner_product(&a);
        (lam, a, corner)
    });

    let at_point = |f: &ParamFn, p: &[f64]| -> Complex64 {
        let z = CJet::seed_complex_point(p);
        f.eval_holomorphic(&z).value()
    };
    let lam_fn = lambda.clone();
    let mut chart = chart.with_exclusion("Im lambda", move |p| at_point(&lam_fn, p).im);
    let lam_fn = lambda.clone();
    chart = chart.with_exclusion("lambda", move |p| at_point(&lam_fn, p).norm());
    if n >= 2 {
        let lam_d = lambda.derivative();
        chart = chart.with_exclusion("1 + (n-1) lambda' z_{n-1}", move |p| {
            let zprev = Complex64::new(p[2 * n - 4], p[2 * n - 3]);
            (Complex64::new(1.0, 0.0) + (n - 1) as f64 * at_point(&lam_d, p) * zprev).norm()
        });
    }
    let g_for_det = g.clone();
    let chart = chart.with_exclusion("det g", move |p| {
        g_for_det.eval_raw(p).values().det()
    });
    Ok(Scene {
        name: format!("complex_jordan_n{n}"),
        chart,
        g,
        l: Some(l),
        gbar: None,
    })
}

/// Complex Jordan block with the eigenvalue normalized to lambda = z_n; the
/// free holomorphic function is h(z_n).
pub fn complex_jordan_normalized_pair(
    n: usize,
    h: &ParamFn,
    sigma: SigmaVariant,
    chart: Chart,
) -> Result<Scene> {
    if !(2..=4).contains(&n) || chart.dim() != 2 * n {
        return Err(Error::Schema(format!(
            "complex_jordan_normalized needs 2 <= n <= 4 with a chart of real dimension 2n (n = {n})"
        )));
    }
    h.validate(n)?;
    if h.var() != n - 1 {
        return Err(Error::Schema(
            "complex_jordan_normalized parameter must depend on the last complex coordinate"
                .into(),
        ));
    }

    let hf = h.clone();
    let (g, l) = complex_block_fields(n, move |z| {
        let lam = z[n - 1];
        let mut a = Vec::with_capacity(n - 1);
        for k in 1..n {
            if k < n - 1 {
                a.push(CJet::constant(Complex64::new(k as f64, 0.0)) * z[k - 1]);
            } else {
                a.push(
                    hf.eval_holomorphic(z)
                        + CJet::constant(Complex64::new(k as f64, 0.0)) * z[k - 1],
                );
            }
        }
        let corner = match sigma {
            SigmaVariant::Product => corner_product(&a),
            SigmaVariant::Printed => corner_printed(n, z),
        };
        (lam, a, corner)
    });

    let hf = h.clone();
    let chart = chart
        .with_exclusion("Im z_n", move |p| p[2 * n - 1])
        .with_exclusion("z_n", move |p| {
            Complex64::new(p[2 * n - 2], p[2 * n - 1]).norm()
        })
        .with_exclusion("h + (n-1) z_{n-1}", move |p| {
            let z = CJet::seed_complex_point(p);
            let zprev = Complex64::new(p[2 * n - 4], p[2 * n - 3]);
            (hf.eval_holomorphic(&z).value() + (n - 1) as f64 * zprev).norm()
        });
    let g_for_det = g.clone();
    let chart = chart.with_exclusion("det g", move |p| {
        g_for_det.eval_raw(p).values().det()
    });
    Ok(Scene {
        name: format!("complex_jordan_normalized_n{n}"),
        chart,
        g,
        l: Some(l),
        gbar: None,
    })
}

/// Three-dimensional pair with one real eigenvalue function lambda(x_1) and a
/// constant complex pair alpha +- i beta:
/// g = diag((lambda-alpha)^2 + beta^2, [[-beta, alpha-lambda], [alpha-lambda, beta]]),
/// L = diag(lambda, [[alpha, beta], [-beta, alpha]]).
pub fn affine_complex3_pair(
    alpha: f64,
    beta: f64,
    lambda: &ParamFn,
    chart: Chart,
) -> Result<Scene> {
    if chart.dim() != 3 {
        return Err(Error::Schema(format!(
            "affine_complex3 needs a 3-dimensional chart, got {}",
            chart.dim()
        )));
    }
    if beta == 0.0 || !beta.is_finite() || !alpha.is_finite() {
        return Err(Error::Schema(
            "affine_complex3 needs finite alpha and nonzero beta".into(),
        ));
    }
    lambda.validate(3)?;
    if !lambda.is_real() || lambda.var() != 0 {
        return Err(Error::Schema(
            "affine_complex3 eigenvalue must be a real function of the first coordinate".into(),
        ));
    }

    let lam = lambda.clone();
    let g = MetricField::new(3, move |p| {
        let c = RJet::seed_point(p);
        let lv = lam.eval_real(&c);
        let d = lv - alpha;
        let mut m = SmallMatrix::zeros(3);
        m.set(0, 0, d * d + beta * beta);
        m.set(1, 1, RJet::constant(-beta));
        m.set(1, 2, -d);
        m.set(2, 1, -d);
        m.set(2, 2, RJet::constant(beta));
        m
    });
    let lam = lambda.clone();
    let l = EndoField::new(3, move |p| {
        let c = RJet::seed_point(p);
        let mut m = SmallMatrix::zeros(3);
        m.set(0, 0, lam.eval_real(&c));
        m.set(1, 1, RJet::constant(alpha));
        m.set(1, 2, RJet::constant(beta));
        m.set(2, 1, RJet::constant(-beta));
        m.set(2, 2, RJet::constant(alpha));
        m
    });

    let lam = lambda.clone();
    let chart = chart.with_exclusion("lambda", move |p| lam.value_at(p));
    Ok(Scene {
        name: "affine_complex3".into(),
        chart,
        g,
        l: Some(l),
        gbar: None,
    })
}

/// The published four-dimensional pair that is claimed geodesically
/// equivalent but is not. Kept as the negative control: every equivalence
/// check is expected to fail on it.
pub fn aminova_pair(omega: &ParamFn, chart: Chart) -> Result<Scene> {
    if chart.dim() != 4 {
        return Err(Error::Schema(format!(
            "aminova construction needs a 4-dimensional chart, got {}",
            chart.dim()
        )));
    }
    omega.validate(4)?;
    if !omega.is_real() || omega.var() != 3 {
        return Err(Error::Schema(
            "aminova parameter must be a real function of the fourth coordinate".into(),
        ));
    }
    if chart.bounds()[3][0] <= 0.0 {
        return Err(Error::Schema(
            "aminova chart must keep the fourth coordinate positive (denominators up to x_4^8)"
                .into(),
        ));
    }

    let om = omega.clone();
    let g = MetricField::new(4, move |p| {
        let c = RJet::seed_point(p);
        let w = om.eval_real(&c);
        let a = 3.0 * c[2] + 3.0 * w;
        let zero = RJet::constant(0.0);
        let one = RJet::constant(1.0);
        SmallMatrix::from_rows(&[
            vec![zero, zero, zero, a],
            vec![zero, zero, one, 2.0 * c[1]],
            vec![zero, one, zero, c[0]],
            vec![a, 2.0 * c[1], c[0], 4.0 * c[0] * c[1]],
        ])
    });
    let om = omega.clone();
    let gbar = MetricField::new(4, move |p| {
        let c = RJet::seed_point(p);
        let w = om.eval_real(&c);
        let a = 3.0 * c[2] + 3.0 * w;
        let x4 = c[3];
        let p5 = x4.powi(5);
        let p6 = x4.powi(6);
        let p7 = x4.powi(7);
        let p8 = x4.powi(8);
        let zero = RJet::constant(0.0);
        let e03 = a / p5;
        let e12 = 2.0 * (RJet::constant(1.0) / p5);
        let e13 = (-a + 2.0 * c[1] * x4) / p6;
        let e22 = -(RJet::constant(1.0) / p6);
        let e23 = (a - 2.0 * c[1] * x4 + c[0] * x4 * x4) / p7;
        let e33 = (-a + 2.0 * c[1] * x4) * (2.0 * c[0] * x4 * x4 + a - 2.0 * c[1] * x4) / p8;
        SmallMatrix::from_rows(&[
            vec![zero, zero, zero, e03],
            vec![zero, zero, e12, e13],
            vec![zero, e12, e22, e23],
            vec![e03, e13, e23, e33],
        ])
    });

    let g_for_det = g.clone();
    let gbar_for_det = gbar.clone();
    let chart = chart
        .with_exclusion("x_4", |p| p[3])
        .with_exclusion("det g", move |p| g_for_det.eval_raw(p).values().det())
        .with_exclusion("det gbar", move |p| gbar_for_det.eval_raw(p).values().det());
    Ok(Scene {
        name: "aminova".into(),
        chart,
        g,
        l: None,
        gbar: Some(gbar),
    })
}

/// Flip the sign of both metrics of a scene (the compatibility equation is
/// sign-covariant, so this preserves every property being verified).
pub fn flip_metric_sign(scene: Scene) -> Scene {
    let g = scene.g.clone();
    let dim = g.dim();
    let flipped_g = MetricField::new(dim, move |p| g.eval_raw(p).neg());
    let flipped_gbar = scene.gbar.as_ref().map(|gbar| {
        let gbar = gbar.clone();
        MetricField::new(dim, move |p| gbar.eval_raw(p).neg())
    });
    Scene {
        name: scene.name,
        chart: scene.chart,
        g: flipped_g,
        l: scene.l,
        gbar: flipped_gbar,
    }
}

/// Serializable construction spec. JSON form:
/// {"kind": "...", "n": ..., "params": {...}, "epsilon": 1,
///  "sigma": "product", "chart": {"box": [[lo, hi], ...], "margin": 0.001}}
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFormSpec {
    pub kind: NormalFormKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalFormKind {
    Dini,
    Levicivita3,
    RealJordan,
    RealJordanNormalized,
    ComplexJordan,
    ComplexJordanNormalized,
    AffineComplex3,
    Aminova,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartSpec {
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl ChartSpec {
    pub fn to_chart(&self) -> Result<Chart> {
        if self.bounds.is_empty() || self.bounds.len() > 8 {
            return Err(Error::Schema(format!(
                "chart box needs 1..=8 intervals, got {}",
                self.bounds.len()
            )));
        }
        for b in &self.bounds {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::Schema(format!("bad chart interval {b:?}")));
            }
        }
        let mut chart = Chart::new(&self.bounds);
        if let Some(m) = self.margin {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Schema(format!("bad chart margin {m}")));
            }
            chart = chart.with_margin(m);
        }
        Ok(chart)
    }
}

impl NormalFormSpec {
    /// Plain spec with all-default parameters for a kind.
    pub fn of_kind(kind: NormalFormKind, n: Option<usize>) -> Self {
        NormalFormSpec {
            kind,
            n,
            params: BTreeMap::new(),
            epsilon: None,
            sigma: None,
            alpha: None,
            beta: None,
            chart: None,
        }
    }

    fn param(&self, key: &str, default: ParamFn) -> ParamFn {
        self.params.get(key).cloned().unwrap_or(default)
    }

    fn known_params(&self, allowed: &[&str]) -> Result<()> {
        for key in self.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Schema(format!(
                    "unknown parameter `{key}` for kind {:?} (allowed: {allowed:?})",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    fn chart_or(&self, default_bounds: &[[f64; 2]]) -> Result<Chart> {
        match &self.chart {
            Some(spec) => spec.to_chart(),
            None => Ok(Chart::new(default_bounds)),
        }
    }

    fn dim_n(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    /// Materialize the scene this spec describes.
    pub fn build(&self) -> Result<Scene> {
        let epsilon = match self.epsilon {
            None | Some(1) => 1,
            Some(-1) => -1,
            Some(e) => {
                return Err(Error::Schema(format!("epsilon must be +1 or -1, got {e}")));
            }
        };
        let sigma = self.sigma.unwrap_or_default();

        let scene = match self.kind {
            NormalFormKind::Dini => {
                self.known_params(&["x", "y"])?;
                let x = self.param("x", ParamFn::real(0, &[1.0, 0.1]));
                let y = self.param("y", ParamFn::real(1, &[2.0, 0.1]));
                let chart = self.chart_or(&[[-0.5, 0.5], [-0.5, 0.5]])?;
                dini_pair(&x, &y, chart)?
            }
            NormalFormKind::Levicivita3 => {
                self.known_params(&["x", "y", "z"])?;
                let x = self.param("x", ParamFn::real(0, &[1.0, 0.1]));
                let y = self.param("y", ParamFn::real(1, &[2.0, 0.1]));
                let z = self.param("z", ParamFn::real(2, &[4.0, 0.1]));
                let chart = self.chart_or(&[[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]])?;
                levicivita3_pair(&x, &y, &z, chart)?
            }
            NormalFormKind::RealJordan => {
                self.known_params(&["lambda"])?;
                let n = self.dim_n(3);
                let lambda = self.param("lambda", ParamFn::real(n.saturating_sub(1), &[1.0, 0.3]));
                let mut bounds = vec![[-0.2, 0.2]; n];
                bounds[n - 1] = [-0.5, 0.5];
                let chart = self.chart_or(&bounds)?;
                real_jordan_pair(n, &lambda, chart)?
            }
            NormalFormKind::RealJordanNormalized => {
                self.known_params(&["h"])?;
                let n = self.dim_n(3);
                let h = self.param("h", ParamFn::real(n.saturating_sub(1), &[1.0]));
                let mut bounds = vec![[-0.2, 0.2]; n];
                bounds[n - 1] = [0.5, 1.5];
                let chart = self.chart_or(&bounds)?;
                real_jordan_normalized_pair(n, &h, sigma, chart)?
            }
            NormalFormKind::ComplexJordan => {
                self.known_params(&["lambda"])?;
                let n = self.dim_n(2);
                let lambda = self.param(
                    "lambda",
                    ParamFn::complex(
                        n.saturating_sub(1),
                        &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
                    ),
                );
                let mut bounds = vec![[-0.2, 0.2]; 2 * n];
                bounds[2 * n - 1] = [0.5, 1.5];
                let chart = self.chart_or(&bounds)?;
                complex_jordan_pair(n, &lambda, chart)?
            }
            NormalFormKind::ComplexJordanNormalized => {
                self.known_params(&["h"])?;
                let n = self.dim_n(2);
                let h = self.param(
                    "h",
                    ParamFn::complex(n.saturating_sub(1), &[Complex64::new(1.0, 0.0)]),
                );
                let mut bounds = vec![[-0.2, 0.2]; 2 * n];
                bounds[2 * n - 1] = [0.5, 1.5];
                let chart = self.chart_or(&bounds)?;
                complex_jordan_normalized_pair(n, &h, sigma, chart)?
            }
            NormalFormKind::AffineComplex3 => {
                self.known_params(&["lambda"])?;
                let alpha = self.alpha.unwrap_or(0.3);
                let beta = self.beta.unwrap_or(0.8);
                let lambda = self.param("lambda", ParamFn::real(0, &[0.0, 1.0]));
                let chart =
                    self.chart_or(&[[0.25, 1.25], [-0.5, 0.5], [-0.5, 0.5]])?;
                affine_complex3_pair(alpha, beta, &lambda, chart)?
            }
            NormalFormKind::Aminova => {
                self.known_params(&["omega"])?;
                let omega = self.param("omega", ParamFn::real(3, &[0.0]));
                let chart =
                    self.chart_or(&[[0.5, 1.5], [0.5, 1.5], [0.5, 1.5], [1.0, 2.0]])?;
                aminova_pair(&omega, chart)?
            }
        };

        Ok(if epsilon == -1 {
            flip_metric_sign(scene)
        } else {
            scene
        })
    }
}
