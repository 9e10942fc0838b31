//! Independent oracles for the core linear algebra: textbook recomputations
//! (cofactor expansion, principal-minor sums, central differences, explicit
//! eigendecompositions) checked against the library's implementations on
//! randomized instances. Shared between the oracle suite and the acceptance
//! gate.

// index-heavy matrix comparisons read better as plain loops
#![allow(clippy::needless_range_loop)]

use geodeq::jets::RJet;
use geodeq::linalg::{matrix_function, SmallMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn minor(m: &[Vec<f64>], drop_row: usize, drop_col: usize) -> Vec<Vec<f64>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != drop_row)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(c, _)| *c != drop_col)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

fn laplace_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut acc = 0.0;
    for j in 0..n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * m[0][j] * laplace_det(&minor(m, 0, j));
    }
    acc
}

/// adj(A) by cofactor expansion: adj[j][i] = (-1)^{i+j} det(minor_{ij}).
fn cofactor_adjugate(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut adj = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[j][i] = sign * laplace_det(&minor(m, i, j));
        }
    }
    adj
}

/// Integer 4x4 matrices: the library adjugate must agree with cofactor
/// expansion bit for bit (every intermediate is an exactly representable
/// integer).
pub fn run_adjugate_oracle(instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for inst in 0..instances {
        let n = 4;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-5..=5) as f64).collect())
            .collect();
        let a = SmallMatrix::from_rows(&rows);
        let adj = a.adjugate();
        let oracle = cofactor_adjugate(&rows);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(
                    adj.at(i, j),
                    oracle[i][j],
                    "instance {inst}: adjugate entry ({i},{j}) differs"
                );
            }
        }
        // and the defining identity, also exact on integers
        let det = laplace_det(&rows);
        let prod = a.mul(&adj);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { det } else { 0.0 };
                assert_eq!(prod.at(i, j), expect, "instance {inst}: A adj(A) != det I");
            }
        }
    }
}

/// char_poly against the subset formula: the coefficient of t^{n-m} in
/// det(tI - A) is (-1)^m times the sum of the m x m principal minors.
pub fn run_charpoly_oracle(instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for inst in 0..instances {
        let n = rng.random_range(2..=5usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let a = SmallMatrix::from_rows(&rows);
        let chi = a.char_poly();
        assert_eq!(chi.degree(), n);
        for m in 0..=n {
            let mut elementary = 0.0;
            for mask in 0..(1u32 << n) {
                if mask.count_ones() as usize != m {
                    continue;
                }
                let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                let sub: Vec<Vec<f64>> = idx
                    .iter()
                    .map(|&r| idx.iter().map(|&c| rows[r][c]).collect())
                    .collect();
                elementary += if m == 0 { 1.0 } else { laplace_det(&sub) };
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let expect = sign * elementary;
            let got = chi.coeff(n - m);
            assert!(
                (got - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                "instance {inst} (n={n}): coefficient of t^{} is {got}, oracle {expect}",
                n - m
            );
        }
    }
}

/// A fixed-shape rational expression with random coefficients, used to push
/// nontrivial arithmetic through the jet type.
fn jet_expr(coords: &[RJet], c: &[f64; 6], k: usize, l: usize) -> RJet {
    let quad = coords[k] * coords[l];
    let cube = coords[k].powi(3);
    let denom = RJet::constant(2.0 + c[4] * c[4]) + coords[l] * coords[l];
    RJet::constant(c[0])
        + c[1] * coords[0]
        + c[2] * quad
        + c[3] * cube
        + (RJet::constant(c[5]) / denom)
}

/// Jet gradients against central finite differences, through a scalar
/// expression and through the determinant of a matrix with polynomial
/// entries.
pub fn run_jets_oracle(instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    for inst in 0..instances {
        let dim = rng.random_range(2..=4usize);
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect();
        let mut c = [0.0; 6];
        for slot in c.iter_mut() {
            *slot = rng.random_range(-1.0..1.0);
        }
        let k = rng.random_range(0..dim);
        let l = rng.random_range(0..dim);

        let scalar_at = |q: &[f64]| {
            let consts: Vec<RJet> = q.iter().map(|&x| RJet::constant(x)).collect();
            jet_expr(&consts, &c, k, l).value()
        };
        let det_at = |q: &[f64]| {
            let consts: Vec<RJet> = q.iter().map(|&x| RJet::constant(x)).collect();
            poly_matrix(&consts, dim).det().value()
        };

        let coords = RJet::seed_point(&p);
        let scalar_jet = jet_expr(&coords, &c, k, l);
        let det_jet = poly_matrix(&coords, dim).det();

        for d in 0..dim {
            let mut qp = p.clone();
            let mut qm = p.clone();
            qp[d] += h;
            qm[d] -= h;

            let fd = (scalar_at(&qp) - scalar_at(&qm)) / (2.0 * h);
            let grad = scalar_jet.partial(d);
            assert!(
                (fd - grad).abs() <= 1e-7 * (1.0 + grad.abs()),
                "instance {inst}: scalar d/dx_{d} jet {grad} vs fd {fd}"
            );

            let fd = (det_at(&qp) - det_at(&qm)) / (2.0 * h);
            let grad = det_jet.partial(d);
            assert!(
                (fd - grad).abs() <= 1e-7 * (1.0 + grad.abs()),
                "instance {inst}: det d/dx_{d} jet {grad} vs fd {fd}"
            );
        }
    }
}

/// Matrix with polynomial entries and a dominant diagonal, so det and its
/// gradient stay O(1).
fn poly_matrix(coords: &[RJet], dim: usize) -> SmallMatrix<RJet> {
    SmallMatrix::from_fn(dim, |i, j| {
        let base = RJet::constant(if i == j { 3.0 } else { 0.2 });
        base + ((j + 1) as f64 * 0.3) * coords[i] + 0.1 * (coords[j] * coords[i % coords.len()])
    })
}

/// matrix_function(exp) against an explicit eigendecomposition: A is
/// constructed as V D V^{-1} with a known spectrum (separated reals, plus an
/// optional conjugate pair), so exp(A) = V exp(D) V^{-1} is available in
/// closed form.
pub fn run_matfun_oracle(instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(2..=5usize);
        let with_pair = n >= 2 && rng.random_range(0..3) == 0;
        let n_real = if with_pair { n - 2 } else { n };

        // separated real eigenvalues
        let mut reals = Vec::with_capacity(n_real);
        for i in 0..n_real {
            reals.push(-2.0 + 1.2 * i as f64 + rng.random_range(-0.25..0.25));
        }
        let pair = (
            rng.random_range(2.0..3.0),
            rng.random_range(0.6..2.0),
        );

        let mut d = SmallMatrix::zeros(n);
        let mut exp_d = SmallMatrix::zeros(n);
        for (i, &lam) in reals.iter().enumerate() {
            d.set(i, i, lam);
            exp_d.set(i, i, lam.exp());
        }
        if with_pair {
            let (a, b) = pair;
            let base = n_real;
            d.set(base, base, a);
            d.set(base, base + 1, b);
            d.set(base + 1, base, -b);
            d.set(base + 1, base + 1, a);
            let (ea, cb, sb) = (a.exp(), b.cos(), b.sin());
            exp_d.set(base, base, ea * cb);
            exp_d.set(base, base + 1, ea * sb);
            exp_d.set(base + 1, base, -ea * sb);
            exp_d.set(base + 1, base + 1, ea * cb);
        }

        let v = SmallMatrix::from_fn(n, |i, j| {
            let noise: f64 = rng.random_range(-1.0..1.0);
            if i == j {
                1.0 + 0.35 * noise
            } else {
                0.35 * noise
            }
        });
        let v_inv = match v.inverse() {
            Ok(inv) if v.mul(&inv).plus_scaled_identity(-1.0).max_abs() <= 1e-11 => inv,
            _ => continue, // badly conditioned draw; redraw
        };

        let a = v.mul(&d).mul(&v_inv);
        let reference = v.mul(&exp_d).mul(&v_inv);
        let computed = matrix_function(&a, 1e-7, |z: Complex64, _k| z.exp()).unwrap();
        let err = computed.sub(&reference).max_abs();
        let scale = 1.0 + reference.max_abs();
        assert!(
            err / scale <= 1e-9,
            "instance {done} (n={n}, pair={with_pair}): |exp(A) - V exp(D) V^-1| = {err:.3e}"
        );
        done += 1;
    }
}
