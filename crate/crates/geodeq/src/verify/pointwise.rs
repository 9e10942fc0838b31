//! Pointwise residuals: Christoffel symbols, the compatibility equation on
//! (g, L), self-adjointness, the covariant derivative of L, and the Nijenhuis
//! torsion. Every derivative comes from the jet gradients of the fields, so
//! the residuals measure the identities themselves, not differencing noise.

use crate::fields::{EndoField, MetricField};
use crate::jets::RJet;
use crate::linalg::SmallMatrix;
use crate::Result;

/// Rank-3 array of f64, n <= 8. The index convention is documented per
/// producer: christoffel stores Gamma^k_{ij} at (k, i, j), nabla_l stores
/// nabla_k L^i_j at (k, i, j), nijenhuis stores N^k_{ij} at (k, i, j).
#[derive(Clone, Debug)]
pub struct Rank3 {
    n: usize,
    a: Vec<f64>,
}

impl Rank3 {
    pub fn zeros(n: usize) -> Self {
        Rank3 {
            n,
            a: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.a[(k * self.n + i) * self.n + j]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.a[(k * self.n + i) * self.n + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Christoffel symbols from an already-evaluated jet matrix of g.
pub(crate) fn christoffel_from_jets(gj: &SmallMatrix<RJet>) -> Result<Rank3> {
    let n = gj.dim();
    let ginv = gj.values().inverse()?;
    let mut gamma = Rank3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..=i {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += ginv.at(k, m)
                        * (gj.at(m, j).partial(i) + gj.at(m, i).partial(j)
                            - gj.at(i, j).partial(m));
                }
                gamma.set(k, i, j, 0.5 * acc);
                gamma.set(k, j, i, 0.5 * acc);
            }
        }
    }
    Ok(gamma)
}

/// Levi-Civita connection coefficients of g at p:
/// Gamma^k_{ij} = 1/2 g^{km} (d_i g_{mj} + d_j g_{mi} - d_m g_{ij}),
/// symmetric in (i, j) by construction.
pub fn christoffel(g: &MetricField, p: &[f64]) -> Result<Rank3> {
    christoffel_from_jets(&g.eval_raw(p))
}

/// Residual of the compatibility equation at p: with L_{ij} = g_{im} L^m_j
/// and lambda = 1/2 tr L, the covariant derivative must satisfy
/// L_{ij,k} = lambda_{,i} g_{jk} + lambda_{,j} g_{ik}. Returns the max-norm
/// defect normalized by 1 + |g| |L|.
pub fn compatibility_residual(g: &MetricField, l: &EndoField, p: &[f64]) -> Result<f64> {
    let gj = g.eval_raw(p);
    let lj = l.eval_raw(p);
    let n = gj.dim();
    let gamma = christoffel_from_jets(&gj)?;
    let gl = gj.mul(&lj);
    let gv = gj.values();
    let lv = lj.values();
    let glv = gl.values();

    let mut lam_grad = [0.0f64; 8];
    for (i, slot) in lam_grad.iter_mut().enumerate().take(n) {
        let mut acc = 0.0;
        for m in 0..n {
            acc += lj.at(m, m).partial(i);
        }
        *slot = 0.5 * acc;
    }

    let scale = 1.0 + gv.max_abs() * lv.max_abs();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut cov = gl.at(i, j).partial(k);
                for m in 0..n {
                    cov -= gamma.at(m, k, i) * glv.at(m, j) + gamma.at(m, k, j) * glv.at(i, m);
                }
                let rhs = lam_grad[i] * gv.at(j, k) + lam_grad[j] * gv.at(i, k);
                worst = worst.max((cov - rhs).abs());
            }
        }
    }
    Ok(worst / scale)
}

/// |gL - (gL)^T| / (|gL| + 1): zero iff L is g-self-adjoint at p.
pub fn selfadjoint_residual(g: &MetricField, l: &EndoField, p: &[f64]) -> f64 {
    let gl = g.eval_raw(p).values().mul(&l.eval_raw(p).values());
    gl.asymmetry() / (gl.max_abs() + 1.0)
}

/// Covariant derivative nabla_k L^i_j = d_k L^i_j + Gamma^i_{km} L^m_j
/// - Gamma^m_{kj} L^i_m, stored at (k, i, j).
pub fn nabla_l(g: &MetricField, l: &EndoField, p: &[f64]) -> Result<Rank3> {
    let gj = g.eval_raw(p);
    let lj = l.eval_raw(p);
    let n = gj.dim();
    let gamma = christoffel_from_jets(&gj)?;
    let lv = lj.values();
    let mut out = Rank3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = lj.at(i, j).partial(k);
                for m in 0..n {
                    acc += gamma.at(i, k, m) * lv.at(m, j) - gamma.at(m, k, j) * lv.at(i, m);
                }
                out.set(k, i, j, acc);
            }
        }
    }
    Ok(out)
}

/// Nijenhuis torsion, stored at (k, i, j) and antisymmetric in (i, j):
/// N^k_{ij} = L^m_i d_m L^k_j - L^m_j d_m L^k_i - L^k_m (d_i L^m_j - d_j L^m_i).
pub fn nijenhuis(l: &EndoField, p: &[f64]) -> Rank3 {
    let lj = l.eval_raw(p);
    let n = lj.dim();
    let lv = lj.values();
    let mut out = Rank3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..i {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += lv.at(m, i) * lj.at(k, j).partial(m)
                        - lv.at(m, j) * lj.at(k, i).partial(m)
                        - lv.at(k, m) * (lj.at(m, j).partial(i) - lj.at(m, i).partial(j));
                }
                out.set(k, i, j, acc);
                out.set(k, j, i, -acc);
            }
        }
    }
    out
}

/// Nijenhuis defect as a dimensionless number: the torsion is quadratic in L
/// with one derivative, so it is normalized by 1 + |L| max_k |d_k L|.
pub fn nijenhuis_residual(l: &EndoField, p: &[f64]) -> f64 {
    let lj = l.eval_raw(p);
    let n = lj.dim();
    let mut dl_max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                dl_max = dl_max.max(lj.at(i, j).partial(k).abs());
            }
        }
    }
    let scale = 1.0 + lj.values().max_abs() * dl_max;
    nijenhuis(l, p).max_abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ParamFn;
    use crate::normalforms::{dini_pair, real_jordan_pair, NormalFormKind, NormalFormSpec};
    use crate::fields::Chart;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_metric(entries: &[&[f64]]) -> MetricField {
        let n = entries.len();
        let rows: Vec<Vec<f64>> = entries.iter().map(|r| r.to_vec()).collect();
        MetricField::new(n, move |_| {
            let mut m = SmallMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, RJet::constant(rows[i][j]));
                }
            }
            m
        })
    }

    fn constant_endo(entries: &[&[f64]]) -> EndoField {
        let n = entries.len();
        let rows: Vec<Vec<f64>> = entries.iter().map(|r| r.to_vec()).collect();
        EndoField::new(n, move |_| {
            let mut m = SmallMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, RJet::constant(rows[i][j]));
                }
            }
            m
        })
    }

    #[test]
    fn constant_metric_has_zero_christoffel() {
        let g = constant_metric(&[&[2.0, 0.3], &[0.3, -1.0]]);
        let gamma = christoffel(&g, &[0.4, -0.7]).unwrap();
        assert_eq!(gamma.max_abs(), 0.0);
    }

    #[test]
    fn conformal_metric_matches_hand_christoffel() {
        // g = (1+x)^2 I: Gamma^1_11 = 1/(1+x), Gamma^1_22 = -1/(1+x),
        // Gamma^2_12 = 1/(1+x)
        let g = MetricField::new(2, |p| {
            let c = RJet::seed_point(p);
            let phi = 1.0 + c[0];
            let w = phi * phi;
            let mut m = SmallMatrix::zeros(2);
            m.set(0, 0, w);
            m.set(1, 1, w);
            m
        });
        let x = 0.3;
        let gamma = christoffel(&g, &[x, -0.2]).unwrap();
        let s = 1.0 / (1.0 + x);
        assert!((gamma.at(0, 0, 0) - s).abs() <= 1e-12);
        assert!((gamma.at(0, 1, 1) + s).abs() <= 1e-12);
        assert!((gamma.at(1, 0, 1) - s).abs() <= 1e-12);
        assert!((gamma.at(1, 1, 0) - s).abs() <= 1e-12);
        assert!(gamma.at(1, 0, 0).abs() <= 1e-12);
        assert!(gamma.at(0, 0, 1).abs() <= 1e-12);
    }

    #[test]
    fn christoffel_is_symmetric_in_the_lower_indices() {
        let spec = NormalFormSpec::of_kind(NormalFormKind::RealJordan, Some(3));
        let scene = spec.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = scene.chart.sample_points(20, &mut rng).unwrap().points;
        for p in &pts {
            let gamma = christoffel(&scene.g, p).unwrap();
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert_eq!(gamma.at(k, i, j), gamma.at(k, j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn flat_metric_constant_l_is_compatible() {
        let g = constant_metric(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let l = constant_endo(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let r = compatibility_residual(&g, &l, &[0.1, 0.2]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn diagonal_2d_family_satisfies_the_compatibility_equation() {
        let x = ParamFn::real(0, &[1.0, 0.0, 0.1]);
        let y = ParamFn::real(1, &[3.0, 0.0, 0.1]);
        let scene = dini_pair(&x, &y, Chart::new(&[[-1.0, 1.0], [-1.0, 1.0]])).unwrap();
        let l = scene.l_field();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = scene.chart.sample_points(50, &mut rng).unwrap().points;
        for p in &pts {
            let r = compatibility_residual(&scene.g, &l, p).unwrap();
            assert!(r <= 1e-12, "residual {r:.3e} at {p:?}");
        }
    }

    #[test]
    fn published_counterexample_fails_compatibility() {
        let scene = NormalFormSpec::of_kind(NormalFormKind::Aminova, None)
            .build()
            .unwrap();
        let l = scene.l_field();
        let r = compatibility_residual(&scene.g, &l, &[1.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(r > 1e-2, "expected a gross violation, got {r:.3e}");
    }

    #[test]
    fn selfadjoint_residual_flags_the_witness() {
        let g = constant_metric(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let l = constant_endo(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let r = selfadjoint_residual(&g, &l, &[0.0, 0.0]);
        assert!((r - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn generated_pairs_are_self_adjoint() {
        for kind in [
            NormalFormKind::Dini,
            NormalFormKind::RealJordan,
            NormalFormKind::ComplexJordan,
            NormalFormKind::AffineComplex3,
        ] {
            let scene = NormalFormSpec::of_kind(kind, None).build().unwrap();
            let l = scene.l_field();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let pts = scene.chart.sample_points(20, &mut rng).unwrap().points;
            for p in &pts {
                let r = selfadjoint_residual(&scene.g, &l, p);
                assert!(r <= 1e-13, "{kind:?} residual {r:.3e} at {p:?}");
            }
        }
    }

    #[test]
    fn constant_eigenvalue_jordan_block_has_covariantly_constant_l() {
        let lambda = ParamFn::real(2, &[1.5]);
        let mut bounds = vec![[-0.2, 0.2]; 3];
        bounds[2] = [-0.5, 0.5];
        let scene = real_jordan_pair(3, &lambda, Chart::new(&bounds)).unwrap();
        let l = scene.l_field();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = scene.chart.sample_points(20, &mut rng).unwrap().points;
        for p in &pts {
            let nl = nabla_l(&scene.g, &l, p).unwrap();
            assert!(nl.max_abs() <= 1e-11, "nabla L {:.3e} at {p:?}", nl.max_abs());
        }
    }

    #[test]
    fn varying_eigenvalues_make_nabla_l_nonzero() {
        let scene = NormalFormSpec::of_kind(NormalFormKind::Dini, None)
            .build()
            .unwrap();
        let l = scene.l_field();
        let nl = nabla_l(&scene.g, &l, &[0.1, -0.2]).unwrap();
        assert!(nl.max_abs() > 1e-3);
    }

    #[test]
    fn constant_l_has_zero_torsion() {
        let l = constant_endo(&[&[1.0, 2.0], &[0.5, -1.0]]);
        assert_eq!(nijenhuis(&l, &[0.3, 0.4]).max_abs(), 0.0);
    }

    #[test]
    fn torsion_is_antisymmetric() {
        let scene = NormalFormSpec::of_kind(NormalFormKind::RealJordan, Some(4))
            .build()
            .unwrap();
        let l = scene.l_field();
        let p = scene.chart.center();
        let n = nijenhuis(&l, &p);
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(n.at(k, i, j), -n.at(k, j, i));
                }
            }
        }
    }

    #[test]
    fn compatible_pairs_have_vanishing_torsion() {
        for kind in [
            NormalFormKind::Dini,
            NormalFormKind::Levicivita3,
            NormalFormKind::RealJordan,
            NormalFormKind::ComplexJordan,
        ] {
            let scene = NormalFormSpec::of_kind(kind, None).build().unwrap();
            let l = scene.l_field();
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            let pts = scene.chart.sample_points(20, &mut rng).unwrap().points;
            for p in &pts {
                let r = nijenhuis_residual(&l, p);
                assert!(r <= 1e-10, "{kind:?} torsion {r:.3e} at {p:?}");
            }
        }
    }

    #[test]
    fn the_product_corner_is_the_compatible_one() {
        // the two corner conventions for the normalized Jordan form disagree
        // from n = 3 up; the compatibility equation picks the product one
        let sampled_max = |sigma| {
            let mut spec =
                NormalFormSpec::of_kind(NormalFormKind::RealJordanNormalized, Some(4));
            spec.sigma = Some(sigma);
            let scene = spec.build().unwrap();
            let l = scene.l_field();
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let pts = scene.chart.sample_points(20, &mut rng).unwrap().points;
            pts.iter()
                .map(|p| compatibility_residual(&scene.g, &l, p).unwrap())
                .fold(0.0f64, f64::max)
        };
        let product = sampled_max(crate::normalforms::SigmaVariant::Product);
        let printed = sampled_max(crate::normalforms::SigmaVariant::Printed);
        assert!(product <= 1e-10, "product corner residual {product:.3e}");
        assert!(printed > 1e-4, "printed corner residual {printed:.3e}");
    }

    #[test]
    fn compatibility_oracle_against_finite_differences() {
        // independent check of the jet-based covariant derivative: recompute
        // d_k (gL)_{ij} by central differences and rebuild the residual for
        // the 2-D diagonal family at one point
        let x = ParamFn::real(0, &[1.0, 0.2]);
        let y = ParamFn::real(1, &[2.0, -0.15]);
        let scene = dini_pair(&x, &y, Chart::new(&[[-0.5, 0.5], [-0.5, 0.5]])).unwrap();
        let l = scene.l_field();
        let p = [0.12, -0.3];
        let h = 1e-6;
        let gl_at = |q: &[f64]| {
            scene
                .g
                .eval_raw(q)
                .values()
                .mul(&l.eval_raw(q).values())
        };
        let gj = scene.g.eval_raw(&p);
        let lj = l.eval_raw(&p);
        let gl_jets = gj.mul(&lj);
        for k in 0..2 {
            let mut qp = p.to_vec();
            let mut qm = p.to_vec();
            qp[k] += h;
            qm[k] -= h;
            let fd = gl_at(&qp).sub(&gl_at(&qm)).scale(1.0 / (2.0 * h));
            for i in 0..2 {
                for j in 0..2 {
                    let jet = gl_jets.at(i, j).partial(k);
                    assert!(
                        (fd.at(i, j) - jet).abs() <= 1e-7 * (1.0 + jet.abs()),
                        "d_{k} (gL)_{i}{j}: fd {} vs jet {}",
                        fd.at(i, j),
                        jet
                    );
                }
            }
        }
    }

    #[test]
    fn random_constant_pairs_hit_zero_residual_exactly() {
        // compatibility and torsion both vanish identically for constant
        // fields regardless of the matrices involved
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let n = rng.random_range(2..=4);
            let mut ge = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.random_range(-2.0..2.0);
                    ge[i][j] = v;
                    ge[j][i] = v;
                }
                ge[i][i] += 3.0;
            }
            let rows: Vec<&[f64]> = ge.iter().map(|r| r.as_slice()).collect();
            let g = constant_metric(&rows);
            let mut le = vec![vec![0.0; n]; n];
            for row in le.iter_mut() {
                for e in row.iter_mut() {
                    *e = rng.random_range(-2.0..2.0);
                }
            }
            let lrows: Vec<&[f64]> = le.iter().map(|r| r.as_slice()).collect();
            let l = constant_endo(&lrows);
            let p = vec![0.0; n];
            assert_eq!(compatibility_residual(&g, &l, &p).unwrap(), 0.0);
            assert_eq!(nijenhuis(&l, &p).max_abs(), 0.0);
        }
    }
}
