//! Matrix functions by Hermite interpolation on the spectrum. A function
//! defined near the eigenvalues (with derivative data up to each cluster's
//! multiplicity) is replaced by its Hermite interpolation polynomial, which is
//! then evaluated on the matrix by Horner in Newton form. For locally constant
//! data (spectral projectors, the +-i indicator defining the canonical complex
//! structure) this is exact up to rounding.
//!
//! The jet variants make the whole pipeline differentiable: eigenvalues become
//! jets by implicit differentiation of an appropriate derivative of the
//! characteristic polynomial, so the result carries exact first derivatives
//! of the matrix function field.

use num_complex::Complex64;

use super::{poly_roots, spectral_cluster, Cluster, ClusterKind, Poly, Scalar, SmallMatrix};
use crate::jets::{CJet, RJet};
#[cfg(test)]
use crate::jets::Jet;
use crate::{Error, Result};

/// Baseline tolerance for the root finder feeding spectral decompositions.
const ROOT_TOL: f64 = 1e-13;
/// Default clustering radius for simple roots.
const CLUSTER_TOL: f64 = 1e-7;

/// Cluster value with explicit derivative targets f, f', ..., f^(mult-1).
/// For `ConjugatePair` the data applies to the upper-half-plane member and is
/// conjugate-mirrored onto the partner.
#[derive(Clone, Debug)]
pub struct ClusterTargets {
    pub value: Complex64,
    pub mult: usize,
    pub kind: ClusterKind,
    pub derivs: Vec<Complex64>,
}

/// Eigenvalue of a jet-valued matrix: the value part is a root of the
/// characteristic polynomial, the gradient comes from implicit
/// differentiation, so d(lambda)/dx_k is exact to rounding.
#[derive(Clone, Debug)]
pub struct EigenJet {
    pub value: CJet,
    pub mult: usize,
    pub kind: ClusterKind,
}

/// Newton-polish a cluster representative. For a cluster of multiplicity m
/// the value is a simple root of the (m-1)-th derivative of chi, where Newton
/// converges quadratically and recovers full precision even though the raw
/// roots of chi scatter.
pub fn polish_cluster(chi: &Poly<Complex64>, value: Complex64, mult: usize) -> Complex64 {
    let mut f = chi.clone();
    for _ in 1..mult {
        f = f.derivative();
    }
    let df = f.derivative();
    let mut z = value;
    for _ in 0..4 {
        let dv = df.eval(z);
        if dv.norm() < 1e-280 {
            break;
        }
        let step = f.eval(z) / dv;
        z -= step;
        if step.norm() <= f64::EPSILON * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Divided-difference coefficients for Hermite interpolation. `nodes` lists
/// interpolation points flattened with multiplicity, contiguous per cluster;
/// `cluster_of[i]` names the cluster of node i; `targets[c][k]` is the raw
/// k-th derivative target at cluster c. Returns Newton-form coefficients.
fn hermite_newton<S: Scalar>(nodes: &[S], cluster_of: &[usize], targets: &[Vec<S>]) -> Vec<S> {
    let n = nodes.len();
    let mut fact = vec![1.0f64; n.max(1)];
    for k in 1..n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut prev: Vec<S> = (0..n).map(|i| targets[cluster_of[i]][0]).collect();
    let mut coeffs = vec![S::zero(); n];
    coeffs[0] = prev[0];
    for j in 1..n {
        let mut cur = vec![S::zero(); n - j];
        for i in 0..n - j {
            cur[i] = if cluster_of[i] == cluster_of[i + j] {
                targets[cluster_of[i]][j] / S::from_f64(fact[j])
            } else {
                (prev[i + 1] - prev[i]) / (nodes[i + j] - nodes[i])
            };
        }
        coeffs[j] = cur[0];
        prev = cur;
    }
    coeffs
}

/// Horner in Newton form: c_0 + (A - z_0)(c_1 + (A - z_1)(...)).
fn newton_eval_matrix<S: Scalar>(
    coeffs: &[S],
    nodes: &[S],
    a: &SmallMatrix<S>,
) -> SmallMatrix<S> {
    let n = coeffs.len();
    let mut acc = SmallMatrix::identity(a.dim()).scale(coeffs[n - 1]);
    for k in (0..n - 1).rev() {
        let shifted = a.plus_scaled_identity(-nodes[k]);
        acc = acc.mul(&shifted).plus_scaled_identity(coeffs[k]);
    }
    acc
}

fn expand_value_targets<F>(clusters: &[Cluster], f: &F) -> (Vec<Complex64>, Vec<usize>, Vec<Vec<Complex64>>)
where
    F: Fn(Complex64, usize) -> Complex64,
{
    let mut nodes = Vec::new();
    let mut cluster_of = Vec::new();
    let mut targets: Vec<Vec<Complex64>> = Vec::new();
    for cl in clusters {
        let derivs: Vec<Complex64> = (0..cl.mult).map(|k| f(cl.value, k)).collect();
        match cl.kind {
            ClusterKind::Real => {
                let id = targets.len();
                targets.push(derivs);
                for _ in 0..cl.mult {
                    nodes.push(cl.value);
                    cluster_of.push(id);
                }
            }
            ClusterKind::ConjugatePair => {
                let id = targets.len();
                targets.push(derivs.clone());
                for _ in 0..cl.mult {
                    nodes.push(cl.value);
                    cluster_of.push(id);
                }
                let id = targets.len();
                targets.push(derivs.iter().map(|d| d.conj()).collect());
                for _ in 0..cl.mult {
                    nodes.push(cl.value.conj());
                    cluster_of.push(id);
                }
            }
        }
    }
    (nodes, cluster_of, targets)
}

/// f(A) for a real matrix. The closure supplies f and its derivatives on the
/// spectrum: `f(lambda, k)` is the k-th derivative target at eigenvalue
/// cluster `lambda` (only upper-half-plane representatives are queried; the
/// conjugate branch is mirrored, so real output requires nothing extra from
/// the caller). Errors if the result fails to be real to within `tol`.
pub fn matrix_function<F>(a: &SmallMatrix<f64>, tol: f64, f: F) -> Result<SmallMatrix<f64>>
where
    F: Fn(Complex64, usize) -> Complex64,
{
    let chi = a.char_poly().to_complex();
    let roots = poly_roots(&chi, ROOT_TOL)?;
    let mut clusters = spectral_cluster(&roots, CLUSTER_TOL);
    for cl in clusters.iter_mut() {
        cl.value = polish_cluster(&chi, cl.value, cl.mult);
        if cl.kind == ClusterKind::Real {
            cl.value.im = 0.0;
        }
    }
    let (nodes, cluster_of, targets) = expand_value_targets(&clusters, &f);
    debug_assert_eq!(nodes.len(), a.dim());
    let coeffs = hermite_newton(&nodes, &cluster_of, &targets);
    let result = newton_eval_matrix(&coeffs, &nodes, &a.to_complex());
    let residue = result.max_im();
    let scale = 1.0 + result.re_part().max_abs();
    if residue > tol * scale {
        return Err(Error::ImaginaryResidue(residue, tol * scale));
    }
    Ok(result.re_part())
}

/// f(A) from explicit per-cluster targets (no spectral analysis of A beyond
/// what the caller already did). Rejects target lists whose cluster values
/// collide within the clustering tolerance but disagree on data.
pub fn matrix_function_targets(
    a: &SmallMatrix<f64>,
    targets: &[ClusterTargets],
    tol: f64,
) -> Result<SmallMatrix<f64>> {
    for (i, ti) in targets.iter().enumerate() {
        for tj in targets.iter().skip(i + 1) {
            let sep = (ti.value - tj.value).norm();
            if sep <= CLUSTER_TOL * (1.0 + ti.value.norm()) && ti.derivs != tj.derivs {
                return Err(Error::ConflictingTargets);
            }
        }
    }
    let mut nodes = Vec::new();
    let mut cluster_of = Vec::new();
    let mut data: Vec<Vec<Complex64>> = Vec::new();
    for t in targets {
        assert_eq!(t.derivs.len(), t.mult, "need one target per derivative order");
        match t.kind {
            ClusterKind::Real => {
                let id = data.len();
                data.push(t.derivs.clone());
                for _ in 0..t.mult {
                    nodes.push(t.value);
                    cluster_of.push(id);
                }
            }
            ClusterKind::ConjugatePair => {
                let id = data.len();
                data.push(t.derivs.clone());
                for _ in 0..t.mult {
                    nodes.push(t.value);
                    cluster_of.push(id);
                }
                let id = data.len();
                data.push(t.derivs.iter().map(|d| d.conj()).collect());
                for _ in 0..t.mult {
                    nodes.push(t.value.conj());
                    cluster_of.push(id);
                }
            }
        }
    }
    assert_eq!(
        nodes.len(),
        a.dim(),
        "cluster multiplicities must sum to the matrix dimension"
    );
    let coeffs = hermite_newton(&nodes, &cluster_of, &data);
    let result = newton_eval_matrix(&coeffs, &nodes, &a.to_complex());
    let residue = result.max_im();
    let scale = 1.0 + result.re_part().max_abs();
    if residue > tol * scale {
        return Err(Error::ImaginaryResidue(residue, tol * scale));
    }
    Ok(result.re_part())
}

/// The canonical complex structure J = f(A) with f = +-i on the upper/lower
/// half plane. Defined only when no eigenvalue sits within `tol` of the real
/// axis; then J^2 = -I and J commutes with A to rounding.
pub fn complex_structure_j(a: &SmallMatrix<f64>, tol: f64) -> Result<SmallMatrix<f64>> {
    let chi = a.char_poly().to_complex();
    let roots = poly_roots(&chi, ROOT_TOL)?;
    let clusters = spectral_cluster(&roots, CLUSTER_TOL);
    for cl in &clusters {
        if cl.kind == ClusterKind::Real || cl.value.im.abs() <= tol {
            return Err(Error::EigenvalueNearRealAxis {
                re: cl.value.re,
                im: cl.value.im,
                tol,
            });
        }
    }
    matrix_function(a, tol.max(1e-12), |_, k| {
        if k == 0 {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Eigenvalues of a jet-valued matrix with multiplicities, gradients included.
/// For a cluster of multiplicity m, lambda is a simple root of
/// F = chi^(m-1), so F(lambda(x), x) = 0 gives
/// d(lambda)/dx_k = -(dF/dx_k) / (dF/dt), all evaluated exactly on jets.
pub fn eigen_jets(a: &SmallMatrix<RJet>, cluster_tol: f64) -> Result<Vec<EigenJet>> {
    let chi_jet: Poly<CJet> = a.char_poly().to_complex_jets();
    let chi_vals = chi_jet.values();
    let roots = poly_roots(&chi_vals, ROOT_TOL)?;
    let clusters = spectral_cluster(&roots, cluster_tol);
    let mut out = Vec::with_capacity(clusters.len());
    for cl in &clusters {
        let mut f = chi_jet.clone();
        for _ in 1..cl.mult {
            f = f.derivative();
        }
        let fv = f.values();
        let mut z = polish_cluster(&chi_vals, cl.value, cl.mult);
        if cl.kind == ClusterKind::Real {
            z.im = 0.0;
        } else if z.im < 0.0 {
            z = z.conj();
        }
        let dfdt = fv.derivative().eval(z);
        let scale = fv.max_coeff().max(1.0);
        if dfdt.norm() <= 1e-10 * scale {
            return Err(Error::NonFinite("eigenvalue implicit derivative"));
        }
        let u = f.eval_at_value(z);
        let mut grad = [Complex64::new(0.0, 0.0); crate::jets::MAX_DIM];
        for (k, g) in grad.iter_mut().enumerate().take(u.dim()) {
            *g = -u.partial(k) / dfdt;
        }
        let value = CJet::from_parts(z, &grad[..u.dim()]);
        out.push(EigenJet {
            value,
            mult: cl.mult,
            kind: cl.kind,
        });
    }
    Ok(out)
}

/// Jet target for the k-th derivative of f along a moving eigenvalue:
/// d/dx f^(k)(lambda(x)) = f^(k+1)(lambda) * d(lambda)/dx.
fn target_jet<F>(lambda: &CJet, k: usize, f: &F) -> CJet
where
    F: Fn(Complex64, usize) -> Complex64,
{
    let v = f(lambda.value(), k);
    let chain = f(lambda.value(), k + 1);
    let mut grad = [Complex64::new(0.0, 0.0); crate::jets::MAX_DIM];
    for (j, g) in grad.iter_mut().enumerate().take(lambda.dim()) {
        *g = chain * lambda.partial(j);
    }
    CJet::from_parts(v, &grad[..lambda.dim()])
}

/// f(A) for a jet-valued real matrix: the full derivative of the matrix
/// function field, including the motion of the interpolation nodes. The
/// closure is queried one derivative order beyond each cluster multiplicity
/// for the chain rule.
pub fn matrix_function_jet<F>(
    a: &SmallMatrix<RJet>,
    tol: f64,
    f: F,
) -> Result<SmallMatrix<RJet>>
where
    F: Fn(Complex64, usize) -> Complex64,
{
    let eig = eigen_jets(a, CLUSTER_TOL)?;
    let mut nodes: Vec<CJet> = Vec::new();
    let mut cluster_of = Vec::new();
    let mut targets: Vec<Vec<CJet>> = Vec::new();
    for e in &eig {
        let derivs: Vec<CJet> = (0..e.mult).map(|k| target_jet(&e.value, k, &f)).collect();
        match e.kind {
            ClusterKind::Real => {
                // scrub rounding-level imaginary parts: a real cluster's
                // eigenvalue and its derivatives are real
                let node = e.value.re().promote_complex();
                let id = targets.len();
                targets.push(derivs);
                for _ in 0..e.mult {
                    nodes.push(node);
                    cluster_of.push(id);
                }
            }
            ClusterKind::ConjugatePair => {
                let id = targets.len();
                targets.push(derivs.clone());
                for _ in 0..e.mult {
                    nodes.push(e.value);
                    cluster_of.push(id);
                }
                let id = targets.len();
                targets.push(derivs.iter().map(|d| d.conj()).collect());
                for _ in 0..e.mult {
                    nodes.push(e.value.conj());
                    cluster_of.push(id);
                }
            }
        }
    }
    assert_eq!(nodes.len(), a.dim(), "spectral weights must sum to dim");
    let coeffs = hermite_newton(&nodes, &cluster_of, &targets);
    let result = newton_eval_matrix(&coeffs, &nodes, &a.to_complex_jets());
    let residue = result.max_im();
    let scale = 1.0 + result.values().re_part().max_abs();
    if residue > tol * scale * 100.0 {
        return Err(Error::ImaginaryResidue(residue, tol * scale * 100.0));
    }
    Ok(result.re_jets())
}

/// Jet version of the canonical complex structure field.
pub fn complex_structure_j_jet(a: &SmallMatrix<RJet>, tol: f64) -> Result<SmallMatrix<RJet>> {
    let eig = eigen_jets(a, CLUSTER_TOL)?;
    for e in &eig {
        if e.kind == ClusterKind::Real || e.value.value().im.abs() <= tol {
            return Err(Error::EigenvalueNearRealAxis {
                re: e.value.value().re,
                im: e.value.value().im,
                tol,
            });
        }
    }
    matrix_function_jet(a, tol.max(1e-12), |_, k| {
        if k == 0 {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_function_matches_direct_evaluation() {
        // f(t) = t^2 - 3t + 2 applied through the interpolation path must
        // agree with direct matrix arithmetic
        let a = SmallMatrix::from_rows(&[
            vec![1.0, 2.0, 0.5],
            vec![0.0, -1.0, 1.0],
            vec![0.5, 0.0, 2.0],
        ]);
        let f = |z: Complex64, k: usize| match k {
            0 => z * z - 3.0 * z + 2.0,
            1 => 2.0 * z - 3.0,
            2 => Complex64::new(2.0, 0.0),
            _ => Complex64::new(0.0, 0.0),
        };
        let via_interp = matrix_function(&a, 1e-9, f).unwrap();
        let direct = a
            .mul(&a)
            .sub(&a.scale(3.0))
            .plus_scaled_identity(2.0);
        let err = via_interp.sub(&direct).max_abs();
        assert!(err < 1e-11, "err {err}");
    }

    #[test]
    fn jordan_block_uses_derivative_targets() {
        // A = [[2, 1], [0, 2]]: f(A) = [[f(2), f'(2)], [0, f(2)]]
        let a = SmallMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]);
        let f = |z: Complex64, k: usize| match k {
            0 => z * z * z,
            1 => 3.0 * z * z,
            2 => 6.0 * z,
            _ => Complex64::new(6.0, 0.0),
        };
        let fa = matrix_function(&a, 1e-9, f).unwrap();
        assert!((fa.at(0, 0) - 8.0).abs() < 1e-9);
        assert!((fa.at(0, 1) - 12.0).abs() < 1e-9);
        assert!(fa.at(1, 0).abs() < 1e-9);
    }

    #[test]
    fn complex_structure_squares_to_minus_identity() {
        // rotation-like block with eigenvalues 1 +- 2i and a second pair 3 +- i
        let a = SmallMatrix::from_rows(&[
            vec![1.0, -2.0, 0.0, 0.0],
            vec![2.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0, -1.0],
            vec![0.0, 0.0, 1.0, 3.0],
        ]);
        let j = complex_structure_j(&a, 1e-8).unwrap();
        let jj = j.mul(&j).plus_scaled_identity(1.0);
        assert!(jj.max_abs() < 1e-10, "J^2 + I = {:?}", jj);
        let comm = j.mul(&a).sub(&a.mul(&j));
        assert!(comm.max_abs() < 1e-10, "[J, A] = {:?}", comm);
    }

    #[test]
    fn complex_structure_rejects_real_spectrum() {
        let a = SmallMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(matches!(
            complex_structure_j(&a, 1e-8),
            Err(Error::EigenvalueNearRealAxis { .. })
        ));
    }

    #[test]
    fn eigen_jets_differentiate_a_parameterized_eigenvalue() {
        // L = [[x, 1], [0, 3]] has eigenvalues x and 3
        let x = Jet::variable(1.25, 0, 1);
        let l = SmallMatrix::from_rows(&[
            vec![x, Jet::constant(1.0)],
            vec![Jet::constant(0.0), Jet::constant(3.0)],
        ]);
        let eig = eigen_jets(&l, 1e-7).unwrap();
        assert_eq!(eig.len(), 2);
        let moving = eig
            .iter()
            .find(|e| (e.value.value().re - 1.25).abs() < 1e-8)
            .unwrap();
        assert!((moving.value.partial(0).re - 1.0).abs() < 1e-9);
        let fixed = eig
            .iter()
            .find(|e| (e.value.value().re - 3.0).abs() < 1e-8)
            .unwrap();
        assert!(fixed.value.partial(0).norm() < 1e-9);
    }

    #[test]
    fn eigen_jets_handle_jordan_multiplicity() {
        // L = [[lam(x), 1], [0, lam(x)]] with lam = 1 + x/2: double eigenvalue,
        // d(lam)/dx = 1/2 recovered through the derivative trick
        let x = Jet::variable(0.4, 0, 1);
        let lam = Jet::constant(1.0) + Jet::constant(0.5) * x;
        let l = SmallMatrix::from_rows(&[
            vec![lam, Jet::constant(1.0)],
            vec![Jet::constant(0.0), lam],
        ]);
        let eig = eigen_jets(&l, 1e-7).unwrap();
        assert_eq!(eig.len(), 1);
        assert_eq!(eig[0].mult, 2);
        assert!((eig[0].value.value().re - 1.2).abs() < 1e-9);
        assert!((eig[0].value.partial(0).re - 0.5).abs() < 1e-9);
        assert!(eig[0].value.partial(0).im.abs() < 1e-9);
    }

    #[test]
    fn jet_complex_structure_of_rotation_block_is_constant() {
        // L = [[a(x), -b], [b, a(x)]]: J = [[0, -1], [1, 0]] with zero gradient
        let x = Jet::variable(0.1, 0, 1);
        let a = Jet::constant(1.0) + x;
        let b = Jet::constant(2.0);
        let l = SmallMatrix::from_rows(&[vec![a, -b], vec![b, a]]);
        let j = complex_structure_j_jet(&l, 1e-8).unwrap();
        assert!((j.at(0, 1).value() + 1.0).abs() < 1e-10);
        assert!((j.at(1, 0).value() - 1.0).abs() < 1e-10);
        assert!(j.at(0, 0).value().abs() < 1e-10);
        for i in 0..2 {
            for jj in 0..2 {
                assert!(j.at(i, jj).partial(0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conflicting_targets_are_rejected() {
        let a = SmallMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0 + 1e-9]]);
        let targets = vec![
            ClusterTargets {
                value: Complex64::new(1.0, 0.0),
                mult: 1,
                kind: ClusterKind::Real,
                derivs: vec![Complex64::new(5.0, 0.0)],
            },
            ClusterTargets {
                value: Complex64::new(1.0 + 1e-9, 0.0),
                mult: 1,
                kind: ClusterKind::Real,
                derivs: vec![Complex64::new(-5.0, 0.0)],
            },
        ];
        assert!(matches!(
            matrix_function_targets(&a, &targets, 1e-9),
            Err(Error::ConflictingTargets)
        ));
    }
}
