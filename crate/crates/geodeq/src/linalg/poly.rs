use num_complex::Complex64;

use super::{Scalar, SmallMatrix};
use crate::jets::{CJet, Component, Jet, RJet};

/// Polynomial with ascending coefficients: c[0] + c[1] t + ... + c[d] t^d.
/// Characteristic polynomials keep their leading 1 exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T: Scalar> {
    c: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Poly { c: coeffs }
    }

    pub fn constant(v: T) -> Self {
        Poly { c: vec![v] }
    }

    pub fn zero_poly() -> Self {
        Poly {
            c: vec![T::zero()],
        }
    }

    /// (t - r) as a building block for products of linear factors.
    pub fn linear_root(r: T) -> Self {
        Poly {
            c: vec![-r, T::one()],
        }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> T {
        if k < self.c.len() {
            self.c[k]
        } else {
            T::zero()
        }
    }

    /// Degree by storage length; trailing zeros are the caller's business.
    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn eval(&self, t: T) -> T {
        let mut acc = *self.c.last().unwrap();
        for &ck in self.c.iter().rev().skip(1) {
            acc = acc * t + ck;
        }
        acc
    }

    /// Horner evaluation on a matrix argument.
    pub fn eval_matrix(&self, a: &SmallMatrix<T>) -> SmallMatrix<T> {
        let n = a.dim();
        let mut acc = SmallMatrix::identity(n).scale(*self.c.last().unwrap());
        for &ck in self.c.iter().rev().skip(1) {
            acc = acc.mul(a).plus_scaled_identity(ck);
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.c.len() == 1 {
            return Poly::zero_poly();
        }
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &ck)| ck * T::from_f64(k as f64))
            .collect();
        Poly { c }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut c = vec![T::zero(); self.c.len() + rhs.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in rhs.c.iter().enumerate() {
                c[i + j] = c[i + j] + a * b;
            }
        }
        Poly { c }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let len = self.c.len().max(rhs.c.len());
        let c = (0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        Poly { c }
    }

    pub fn scale(&self, s: T) -> Self {
        Poly {
            c: self.c.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Poly<U> {
        Poly {
            c: self.c.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.c.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
    }
}

impl Poly<f64> {
    pub fn to_complex(&self) -> Poly<Complex64> {
        self.map(|x| Complex64::new(x, 0.0))
    }

    pub fn to_jets(&self) -> Poly<RJet> {
        self.map(Jet::constant)
    }
}

impl Poly<RJet> {
    pub fn values(&self) -> Poly<f64> {
        self.map(|j| j.value())
    }

    pub fn to_complex_jets(&self) -> Poly<CJet> {
        self.map(|j| j.promote_complex())
    }
}

impl Poly<CJet> {
    pub fn values(&self) -> Poly<Complex64> {
        self.map(|j| j.value())
    }
}

impl<C: Component> Poly<Jet<C>> {
    /// Evaluate at a plain scalar point, keeping coefficient gradients:
    /// the result's gradient is the partial in the coefficients' variables
    /// at fixed t.
    pub fn eval_at_value(&self, t: C) -> Jet<C> {
        self.eval(Jet::constant(t))
    }
}
