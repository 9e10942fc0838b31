//! Metric and endomorphism fields over a coordinate chart.
//!
//! A field is an immutable evaluator mapping a chart point to a matrix of
//! first-order jets, so every evaluation carries the full coordinate gradient.
//! The chart tracks the box the construction lives on plus the scalar
//! expressions that must stay away from zero (determinants, eigenvalue
//! functions); sampling rejects points that get too close and reports which
//! expression fired. The two conversions between the metric pair picture
//! (g, ḡ) and the endomorphism picture (g, L) also live here:
//!
//!   L = |det ḡ / det g|^{1/(n+1)} ḡ⁻¹ g        (projective endomorphism)
//!   ḡ(u, v) = (1/|det L|) g(L⁻¹ u, v)            (companion metric)

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::jets::{CJet, RJet};
use crate::linalg::SmallMatrix;
use crate::{Error, Result};

/// Maximum admissible polynomial degree for a parameter function.
pub const MAX_PARAM_DEGREE: usize = 12;

/// A polynomial in a single chart coordinate. These hold the free functions
/// of the normal forms (the diagonal entries of the two-dimensional family,
/// the eigenvalue function of a Jordan block, a conformal factor). Complex
/// coefficients make the polynomial a holomorphic function of one complex
/// coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ParamFnRepr", into = "ParamFnRepr")]
pub struct ParamFn {
    var: usize,
    coeffs: Vec<Complex64>,
}

/// JSON form: {"var": 0, "coeffs": [1.0, [0.0, 2.0]]} with complex
/// coefficients as [re, im] pairs.
#[derive(Serialize, Deserialize)]
struct ParamFnRepr {
    var: usize,
    coeffs: Vec<CoeffRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffRepr {
    Real(f64),
    Complex([f64; 2]),
}

impl From<ParamFnRepr> for ParamFn {
    fn from(r: ParamFnRepr) -> Self {
        let coeffs = r
            .coeffs
            .iter()
            .map(|c| match *c {
                CoeffRepr::Real(x) => Complex64::new(x, 0.0),
                CoeffRepr::Complex([re, im]) => Complex64::new(re, im),
            })
            .collect();
        ParamFn { var: r.var, coeffs }
    }
}

impl From<ParamFn> for ParamFnRepr {
    fn from(f: ParamFn) -> Self {
        let coeffs = f
            .coeffs
            .iter()
            .map(|c| {
                if c.im == 0.0 {
                    CoeffRepr::Real(c.re)
                } else {
                    CoeffRepr::Complex([c.re, c.im])
                }
            })
            .collect();
        ParamFnRepr { var: f.var, coeffs }
    }
}

impl ParamFn {
    /// Real polynomial c0 + c1 x + ... in coordinate `var`.
    pub fn real(var: usize, coeffs: &[f64]) -> Self {
        ParamFn {
            var,
            coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }

    /// Holomorphic polynomial in complex coordinate `var`.
    pub fn complex(var: usize, coeffs: &[Complex64]) -> Self {
        ParamFn {
            var,
            coeffs: coeffs.to_vec(),
        }
    }

    pub fn constant(c: f64) -> Self {
        ParamFn::real(0, &[c])
    }

    pub fn var(&self) -> usize {
        self.var
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    /// Schema-level checks for functions read from a scene file.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.coeffs.is_empty() {
            return Err(Error::Schema("parameter function has no coefficients".into()));
        }
        if self.degree() > MAX_PARAM_DEGREE {
            return Err(Error::Schema(format!(
                "parameter function degree {} exceeds the maximum {}",
                self.degree(),
                MAX_PARAM_DEGREE
            )));
        }
        if self.var >= dim {
            return Err(Error::Schema(format!(
                "parameter function depends on coordinate {} but the chart has dimension {}",
                self.var, dim
            )));
        }
        if !self
            .coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
        {
            return Err(Error::Schema(
                "parameter function has non-finite coefficients".into(),
            ));
        }
        Ok(())
    }

    /// Evaluate at seeded real coordinates. Requires real coefficients.
    pub fn eval_real(&self, coords: &[RJet]) -> RJet {
        debug_assert!(self.is_real(), "real evaluation of a complex parameter");
        let x = coords[self.var];
        let mut acc = RJet::constant(0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.re;
        }
        acc
    }

    /// Evaluate at seeded complex coordinates (holomorphic in coordinate
    /// `var`, so the jet gradient satisfies the Cauchy-Riemann relations by
    /// construction).
    pub fn eval_holomorphic(&self, coords: &[CJet]) -> CJet {
        let z = coords[self.var];
        let mut acc = CJet::constant(Complex64::new(0.0, 0.0));
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + CJet::constant(c);
        }
        acc
    }

    /// Evaluate the plain value at a real point (no gradients).
    pub fn value_at(&self, p: &[f64]) -> f64 {
        debug_assert!(self.is_real());
        let x = p[self.var];
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.re;
        }
        acc
    }

    pub fn derivative(&self) -> ParamFn {
        if self.coeffs.len() <= 1 {
            return ParamFn {
                var: self.var,
                coeffs: vec![Complex64::new(0.0, 0.0)],
            };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        ParamFn {
            var: self.var,
            coeffs,
        }
    }
}

type ScalarExpr = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A scalar expression that must keep |value| >= margin on valid points,
/// e.g. det g or the eigenvalue function of a Jordan block.
#[derive(Clone)]
pub struct Exclusion {
    name: String,
    f: ScalarExpr,
}

impl Exclusion {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Exclusion {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        (self.f)(p)
    }
}

impl fmt::Debug for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Exclusion").field("name", &self.name).finish()
    }
}

/// The coordinate box a construction lives on, together with its exclusions.
#[derive(Clone, Debug)]
pub struct Chart {
    bounds: Vec<[f64; 2]>,
    /// Relative exclusion margin; the absolute threshold is margin * scale().
    margin: f64,
    exclusions: Vec<Exclusion>,
}

impl Chart {
    pub fn new(bounds: &[[f64; 2]]) -> Self {
        assert!(
            !bounds.is_empty() && bounds.len() <= 8,
            "chart dimension {} outside 1..=8",
            bounds.len()
        );
        for b in bounds {
            assert!(b[0] < b[1], "empty chart interval {b:?}");
        }
        Chart {
            bounds: bounds.to_vec(),
            margin: 1e-3,
            exclusions: Vec::new(),
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        assert!(margin > 0.0, "exclusion margin must be positive");
        self.margin = margin;
        self
    }

    pub fn with_exclusion(
        mut self,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.exclusions.push(Exclusion::new(name, f));
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn exclusions(&self) -> &[Exclusion] {
        &self.exclusions
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Characteristic size of the box, used to make the margin relative.
    pub fn scale(&self) -> f64 {
        self.bounds
            .iter()
            .map(|b| b[0].abs().max(b[1].abs()).max(b[1] - b[0]))
            .fold(0.0, f64::max)
    }

    /// Absolute exclusion threshold.
    pub fn threshold(&self) -> f64 {
        self.margin * self.scale()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.bounds.iter())
                .all(|(&x, b)| x >= b[0] && x <= b[1])
    }

    /// Full admission check: inside the box and clear of every exclusion.
    pub fn check(&self, p: &[f64]) -> Result<()> {
        if !self.contains(p) {
            return Err(Error::OutsideChart { point: p.to_vec() });
        }
        let threshold = self.threshold();
        for ex in &self.exclusions {
            let v = ex.value(p);
            if !v.is_finite() || v.abs() < threshold {
                return Err(Error::ExclusionViolation {
                    name: ex.name.clone(),
                    point: p.to_vec(),
                    value: v,
                    margin: threshold,
                });
            }
        }
        Ok(())
    }

    /// One uniform draw from the box (no exclusion filtering).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|b| rng.random_range(b[0]..=b[1]))
            .collect()
    }

    /// Draw `n` points clear of all exclusions. Aborts once more than half of
    /// a meaningful number of attempts were rejected, since that signals a
    /// misconfigured chart rather than bad luck.
    pub fn sample_points<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Sampling> {
        let mut points = Vec::with_capacity(n);
        let mut attempted = 0usize;
        let mut rejections: Vec<usize> = vec![0; self.exclusions.len() + 1];
        while points.len() < n {
            attempted += 1;
            let p = self.sample(rng);
            match self.check(&p) {
                Ok(()) => points.push(p),
                Err(Error::ExclusionViolation { name, .. }) => {
                    let idx = self
                        .exclusions
                        .iter()
                        .position(|e| e.name == name)
                        .unwrap_or(self.exclusions.len());
                    rejections[idx] += 1;
                }
                Err(_) => rejections[self.exclusions.len()] += 1,
            }
            // enough attempts to judge, and under 50% acceptance: give up
            if attempted >= 64.max(2 * n) && points.len() * 2 < attempted {
                let dominant = rejections
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, &c)| c)
                    .map(|(i, _)| {
                        self.exclusions
                            .get(i)
                            .map(|e| e.name.clone())
                            .unwrap_or_else(|| "outside chart box".into())
                    })
                    .unwrap_or_else(|| "outside chart box".into());
                return Err(Error::SamplingRejection {
                    attempted,
                    accepted: points.len(),
                    dominant,
                });
            }
        }
        Ok(Sampling { points, attempted })
    }
}

/// Accepted sample points plus how many draws it took to get them.
#[derive(Clone, Debug)]
pub struct Sampling {
    pub points: Vec<Vec<f64>>,
    pub attempted: usize,
}

type Evaluator = Arc<dyn Fn(&[f64]) -> SmallMatrix<RJet> + Send + Sync>;

/// Symmetric 2-tensor field: point -> matrix of jets, each entry carrying its
/// coordinate gradient.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    eval: Evaluator,
}

/// (1,1)-tensor field in the same representation.
#[derive(Clone)]
pub struct EndoField {
    dim: usize,
    eval: Evaluator,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField").field("dim", &self.dim).finish()
    }
}

impl fmt::Debug for EndoField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EndoField").field("dim", &self.dim).finish()
    }
}

impl MetricField {
    pub fn new(
        dim: usize,
        eval: impl Fn(&[f64]) -> SmallMatrix<RJet> + Send + Sync + 'static,
    ) -> Self {
        MetricField {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate without chart admission checks. The evaluators built by the
    /// generators produce exactly symmetric matrices (both triangles are
    /// assigned from one expression).
    pub fn eval_raw(&self, p: &[f64]) -> SmallMatrix<RJet> {
        let m = (self.eval)(p);
        debug_assert_eq!(m.dim(), self.dim);
        debug_assert_eq!(m.asymmetry(), 0.0, "metric evaluator lost symmetry");
        m
    }

    /// Checked evaluation: point must be inside the chart and clear of its
    /// exclusions, and the result must be finite.
    pub fn eval_with_jets(&self, chart: &Chart, p: &[f64]) -> Result<SmallMatrix<RJet>> {
        chart.check(p)?;
        let m = self.eval_raw(p);
        if !m.is_finite() {
            return Err(Error::NonFinite("metric evaluation"));
        }
        Ok(m)
    }
}

impl EndoField {
    pub fn new(
        dim: usize,
        eval: impl Fn(&[f64]) -> SmallMatrix<RJet> + Send + Sync + 'static,
    ) -> Self {
        EndoField {
            dim,
            eval: Arc::new(eval),
        }
    }

    /// Constant endomorphism (gradients all zero).
    pub fn constant(m: SmallMatrix<f64>) -> Self {
        let dim = m.dim();
        EndoField::new(dim, move |_| m.to_jets())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_raw(&self, p: &[f64]) -> SmallMatrix<RJet> {
        let m = (self.eval)(p);
        debug_assert_eq!(m.dim(), self.dim);
        m
    }

    pub fn eval_with_jets(&self, chart: &Chart, p: &[f64]) -> Result<SmallMatrix<RJet>> {
        chart.check(p)?;
        let m = self.eval_raw(p);
        if !m.is_finite() {
            return Err(Error::NonFinite("endomorphism evaluation"));
        }
        Ok(m)
    }
}

/// L = |det ḡ / det g|^{1/(n+1)} ḡ⁻¹ g at one point, everything jet-valued.
pub fn projective_l_point(
    g: &SmallMatrix<RJet>,
    gbar: &SmallMatrix<RJet>,
) -> Result<SmallMatrix<RJet>> {
    assert_eq!(g.dim(), gbar.dim(), "metric dimension mismatch");
    let n = g.dim();
    let det_g = g.det();
    if det_g.value().abs() < 1e-300 {
        return Err(Error::SingularMatrix(det_g.value()));
    }
    let ratio = (gbar.det() / det_g).abs();
    let scale = ratio.powf(1.0 / (n as f64 + 1.0));
    let l = gbar.inverse()?.mul(g).scale(scale);
    Ok(l)
}

/// Field-level projective endomorphism of a metric pair.
pub fn projective_l(g: &MetricField, gbar: &MetricField, p: &[f64]) -> Result<SmallMatrix<RJet>> {
    projective_l_point(&g.eval_raw(p), &gbar.eval_raw(p))
}

/// Package the conversion as a field. Evaluation panics on singular metrics,
/// so the owning chart must exclude the degeneracy locus (det g, det ḡ).
pub fn projective_l_field(g: &MetricField, gbar: &MetricField) -> EndoField {
    assert_eq!(g.dim(), gbar.dim());
    let (g, gbar) = (g.clone(), gbar.clone());
    EndoField::new(g.dim(), move |p| {
        projective_l_point(&g.eval_raw(p), &gbar.eval_raw(p))
            .expect("projective endomorphism on the degeneracy locus; chart exclusions missing")
    })
}

/// ḡ = (1/|det L|) (L⁻¹)ᵀ g at one point. Symmetric whenever gL is, and the
/// output is symmetrized so the representation invariant holds exactly.
pub fn companion_metric_point(
    g: &SmallMatrix<RJet>,
    l: &SmallMatrix<RJet>,
) -> Result<SmallMatrix<RJet>> {
    assert_eq!(g.dim(), l.dim(), "metric/endomorphism dimension mismatch");
    let li = l.inverse()?;
    let w = RJet::constant(1.0)
        .try_div(l.det().abs())
        .map_err(|_| Error::SingularMatrix(l.det().value()))?;
    Ok(li.transpose().mul(g).scale(w).symmetrize())
}

/// Field-level companion metric of (g, L). Panics on singular L at
/// evaluation, so the owning chart must exclude det L = 0.
pub fn companion_metric(g: &MetricField, l: &EndoField) -> MetricField {
    assert_eq!(g.dim(), l.dim());
    let (g, l) = (g.clone(), l.clone());
    MetricField::new(g.dim(), move |p| {
        companion_metric_point(&g.eval_raw(p), &l.eval_raw(p))
            .expect("companion metric of a singular endomorphism; chart exclusions missing")
    })
}
