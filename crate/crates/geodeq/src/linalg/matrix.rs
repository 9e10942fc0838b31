use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::jets::{CJet, Component, Jet, RJet};
use crate::{Error, Result};

/// Entry types the matrix and polynomial kernels are generic over.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    /// Magnitude of the value part; jets ignore their gradient here, which is
    /// what pivoting and convergence checks want.
    fn magnitude(&self) -> f64;
    fn is_finite_scalar(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite_scalar(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite_scalar(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<C: Component> Scalar for Jet<C> {
    fn zero() -> Self {
        Jet::constant(C::zero())
    }
    fn one() -> Self {
        Jet::constant(C::one())
    }
    fn from_f64(x: f64) -> Self {
        Jet::constant(C::from_f64(x))
    }
    fn magnitude(&self) -> f64 {
        self.value().magnitude()
    }
    fn is_finite_scalar(&self) -> bool {
        self.is_finite()
    }
}

/// Row-major square matrix, dimension 1 through 8.
#[derive(Clone, PartialEq)]
pub struct SmallMatrix<T: Scalar> {
    n: usize,
    a: Vec<T>,
}

impl<T: Scalar> SmallMatrix<T> {
    fn check_dim(n: usize) {
        assert!(
            (1..=8).contains(&n),
            "matrix dimension {n} outside the supported range 1..=8"
        );
    }

    pub fn zeros(n: usize) -> Self {
        Self::check_dim(n);
        SmallMatrix {
            n,
            a: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        Self::check_dim(n);
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(f(i, j));
            }
        }
        SmallMatrix { n, a }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        Self::check_dim(n);
        for r in rows {
            assert_eq!(r.len(), n, "ragged rows in matrix constructor");
        }
        SmallMatrix {
            n,
            a: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> SmallMatrix<U> {
        SmallMatrix {
            n: self.n,
            a: self.a.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        SmallMatrix::from_fn(self.n, |i, j| self.at(j, i))
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for i in 0..self.n {
            t = t + self.at(i, i);
        }
        t
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        SmallMatrix {
            n: self.n,
            a: self
                .a
                .iter()
                .zip(&rhs.a)
                .map(|(&x, &y)| x + y)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        SmallMatrix {
            n: self.n,
            a: self
                .a
                .iter()
                .zip(&rhs.a)
                .map(|(&x, &y)| x - y)
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|x| -x)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        SmallMatrix::from_fn(n, |i, j| {
            let mut acc = T::zero();
            for k in 0..n {
                acc = acc + self.at(i, k) * rhs.at(k, j);
            }
            acc
        })
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = T::zero();
                for k in 0..self.n {
                    acc = acc + self.at(i, k) * v[k];
                }
                acc
            })
            .collect()
    }

    /// A + s I.
    pub fn plus_scaled_identity(&self, s: T) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.set(i, i, m.at(i, i) + s);
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite_scalar())
    }

    pub fn symmetrize(&self) -> Self {
        let half = T::from_f64(0.5);
        SmallMatrix::from_fn(self.n, |i, j| (self.at(i, j) + self.at(j, i)) * half)
    }

    /// Largest |a_ij - a_ji|, the departure from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).magnitude());
            }
        }
        worst
    }

    /// Faddeev-LeVerrier recursion: characteristic polynomial det(tI - A)
    /// (monic, ascending coefficients) together with the adjugate, using only
    /// ring operations plus division by the integers 1..=n. Works unchanged
    /// over jets, and A * adj(A) = det(A) * I holds identically even for
    /// singular A.
    pub fn char_poly_adjugate(&self) -> (super::Poly<T>, SmallMatrix<T>) {
        let n = self.n;
        let mut coeffs = vec![T::zero(); n + 1];
        coeffs[n] = T::one();
        // m walks through M_k = A^(k-1) + c_{n-1} A^(k-2) + ... + c_{n-k+1} I
        let mut m = SmallMatrix::identity(n);
        for k in 1..=n {
            let am = self.mul(&m);
            let ck = -(am.trace() / T::from_f64(k as f64));
            coeffs[n - k] = ck;
            if k < n {
                m = am.plus_scaled_identity(ck);
            }
        }
        // adj(A) = (-1)^(n-1) M_n
        let adj = if n % 2 == 1 { m } else { m.neg() };
        (super::Poly::new(coeffs), adj)
    }

    pub fn char_poly(&self) -> super::Poly<T> {
        self.char_poly_adjugate().0
    }

    pub fn adjugate(&self) -> Self {
        self.char_poly_adjugate().1
    }

    /// det(A) = (-1)^n chi(0).
    pub fn det(&self) -> T {
        let c0 = self.char_poly().coeff(0);
        if self.n.is_multiple_of(2) {
            c0
        } else {
            -c0
        }
    }

    /// Gauss-Jordan inverse with partial pivoting on value magnitude. Over
    /// jets the pivot choice looks only at value parts; the arithmetic then
    /// carries the gradients exactly.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let scale = self.max_abs().max(1.0);
        let mut a = self.clone();
        let mut inv = SmallMatrix::identity(n);
        for col in 0..n {
            let (mut pivot_row, mut pivot_mag) = (col, a.at(col, col).magnitude());
            for r in col + 1..n {
                let mag = a.at(r, col).magnitude();
                if mag > pivot_mag {
                    pivot_row = r;
                    pivot_mag = mag;
                }
            }
            if pivot_mag <= 1e-13 * scale {
                return Err(Error::SingularMatrix(pivot_mag));
            }
            if pivot_row != col {
                for j in 0..n {
                    let (x, y) = (a.at(col, j), a.at(pivot_row, j));
                    a.set(col, j, y);
                    a.set(pivot_row, j, x);
                    let (x, y) = (inv.at(col, j), inv.at(pivot_row, j));
                    inv.set(col, j, y);
                    inv.set(pivot_row, j, x);
                }
            }
            let p = a.at(col, col);
            for j in 0..n {
                a.set(col, j, a.at(col, j) / p);
                inv.set(col, j, inv.at(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f.magnitude() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let av = a.at(col, j) * f;
                    a.set(r, j, a.at(r, j) - av);
                    let iv = inv.at(col, j) * f;
                    inv.set(r, j, inv.at(r, j) - iv);
                }
            }
        }
        Ok(inv)
    }
}

impl SmallMatrix<f64> {
    pub fn to_complex(&self) -> SmallMatrix<Complex64> {
        self.map(|x| Complex64::new(x, 0.0))
    }

    pub fn to_jets(&self) -> SmallMatrix<RJet> {
        self.map(Jet::constant)
    }
}

impl SmallMatrix<RJet> {
    /// Value parts only.
    pub fn values(&self) -> SmallMatrix<f64> {
        self.map(|j| j.value())
    }

    /// Entrywise d/dx_k.
    pub fn partial(&self, k: usize) -> SmallMatrix<f64> {
        self.map(|j| j.partial(k))
    }

    pub fn to_complex_jets(&self) -> SmallMatrix<CJet> {
        self.map(|j| j.promote_complex())
    }
}

impl SmallMatrix<Complex64> {
    pub fn re_part(&self) -> SmallMatrix<f64> {
        self.map(|z| z.re)
    }

    pub fn max_im(&self) -> f64 {
        self.a.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

impl SmallMatrix<CJet> {
    pub fn values(&self) -> SmallMatrix<Complex64> {
        self.map(|j| j.value())
    }

    pub fn re_jets(&self) -> SmallMatrix<RJet> {
        self.map(|j| j.re())
    }

    /// Largest imaginary magnitude across values and gradients.
    pub fn max_im(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in &self.a {
            worst = worst.max(j.value().im.abs());
            for g in j.grad() {
                worst = worst.max(g.im.abs());
            }
        }
        worst
    }
}

impl<T: Scalar> fmt::Debug for SmallMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SmallMatrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:?} ", self.at(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
