//! First-order jets: value plus gradient, the scalars every field evaluation
//! runs on. A `Jet` carries d/dx_k for each chart coordinate, so derivative
//! data propagates exactly through arithmetic (no finite differences).
//!
//! Jets are order one only. Gradient length is fixed per chart; a jet of
//! dimension 0 is a constant and combines with any dimension, while mixing two
//! distinct nonzero dimensions is a programming error and panics.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::{Error, Result};

/// Hard cap on chart dimension; glued products are rejected past this.
pub const MAX_DIM: usize = 8;

/// Scalar types a jet can carry components in.
pub trait Component:
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
    fn magnitude(self) -> f64;
    fn is_finite_component(self) -> bool;
}

impl Component for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_component(self) -> bool {
        self.is_finite()
    }
}

impl Component for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_component(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Value plus gradient of length `dim`. `dim == 0` marks a constant that
/// broadcasts against any gradient length.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet<T: Component> {
    value: T,
    dim: u8,
    grad: [T; MAX_DIM],
}

pub type RJet = Jet<f64>;
pub type CJet = Jet<Complex64>;

impl<T: Component> Jet<T> {
    /// Dimension-polymorphic constant: zero gradient against anything.
    pub fn constant(value: T) -> Self {
        Jet {
            value,
            dim: 0,
            grad: [T::zero(); MAX_DIM],
        }
    }

    /// Constant with a committed gradient length.
    pub fn constant_dim(value: T, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        Jet {
            value,
            dim: dim as u8,
            grad: [T::zero(); MAX_DIM],
        }
    }

    /// Coordinate jet: value with unit dual part on one axis.
    pub fn variable(value: T, axis: usize, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        let mut grad = [T::zero(); MAX_DIM];
        grad[axis] = T::one();
        Jet {
            value,
            dim: dim as u8,
            grad,
        }
    }

    pub fn from_parts(value: T, grad_slice: &[T]) -> Self {
        assert!(
            grad_slice.len() <= MAX_DIM,
            "jet dimension {} exceeds {MAX_DIM}",
            grad_slice.len()
        );
        let mut grad = [T::zero(); MAX_DIM];
        grad[..grad_slice.len()].copy_from_slice(grad_slice);
        Jet {
            value,
            dim: grad_slice.len() as u8,
            grad,
        }
    }

    /// Re-index the gradient into a wider chart: this jet's coordinates become
    /// coordinates offset..offset+dim of the product chart. Constants (dim 0)
    /// stay dimension-polymorphic.
    pub fn embed(&self, dim: usize, offset: usize) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        assert!(
            offset + self.dim as usize <= dim,
            "block at offset {offset} does not fit in dimension {dim}"
        );
        if self.dim == 0 {
            return *self;
        }
        let mut grad = [T::zero(); MAX_DIM];
        grad[offset..offset + self.dim as usize]
            .copy_from_slice(&self.grad[..self.dim as usize]);
        Jet {
            value: self.value,
            dim: dim as u8,
            grad,
        }
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn grad(&self) -> &[T] {
        &self.grad[..self.dim as usize]
    }

    /// Partial derivative along axis `k` (zero beyond the stored dimension,
    /// so constants read as flat in every direction).
    pub fn partial(&self, k: usize) -> T {
        if k < MAX_DIM {
            self.grad[k]
        } else {
            T::zero()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite_component() && self.grad.iter().all(|c| c.is_finite_component())
    }

    pub fn map_components<U: Component>(&self, f: impl Fn(T) -> U) -> Jet<U> {
        let mut grad = [U::zero(); MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = f(self.grad[k]);
        }
        Jet {
            value: f(self.value),
            dim: self.dim,
            grad,
        }
    }

    fn join_dim(a: u8, b: u8) -> u8 {
        match (a, b) {
            (0, d) => d,
            (d, 0) => d,
            (d, e) => {
                assert!(
                    d == e,
                    "jet dimension mismatch: {d} vs {e} (jets from different charts)"
                );
                d
            }
        }
    }

    /// Division that reports a zero divisor instead of panicking.
    pub fn try_div(self, rhs: Self) -> Result<Self> {
        if rhs.value.magnitude() == 0.0 {
            return Err(Error::JetDivisionByZero);
        }
        Ok(self / rhs)
    }

    /// Integer power by repeated multiplication (exponent >= 0).
    pub fn powi(self, mut e: u32) -> Self {
        let mut acc = Jet::constant_dim(T::one(), self.dim());
        let mut base = self;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }
}

impl RJet {
    /// Seed jets for every coordinate of a point at once.
    pub fn seed_point(point: &[f64]) -> Vec<RJet> {
        let n = point.len();
        (0..n).map(|k| Jet::variable(point[k], k, n)).collect()
    }

    /// |x| with the sign folded into the gradient. Undefined at 0; callers
    /// keep arguments away from 0 via chart exclusions.
    pub fn abs(self) -> Self {
        if self.value < 0.0 {
            -self
        } else {
            self
        }
    }

    /// x^a for real exponent: d(x^a) = a x^(a-1) dx. Requires x > 0.
    pub fn powf(self, a: f64) -> Self {
        let v = self.value.powf(a);
        let factor = a * self.value.powf(a - 1.0);
        let mut grad = [0.0; MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = factor * self.grad[k];
        }
        Jet {
            value: v,
            dim: self.dim,
            grad,
        }
    }

    pub fn promote_complex(self) -> CJet {
        self.map_components(|x| Complex64::new(x, 0.0))
    }
}

impl CJet {
    /// Seed for a complex coordinate z_k = x_{2k} + i x_{2k+1} of a chart with
    /// `pairs` complex coordinates (2*pairs real ones, interleaved re/im).
    pub fn seed_complex(point: &[f64], k: usize) -> CJet {
        let pairs = point.len() / 2;
        assert_eq!(point.len(), 2 * pairs, "realified chart needs even length");
        assert!(k < pairs, "complex coordinate {k} out of range");
        let dim = 2 * pairs;
        assert!(dim <= MAX_DIM);
        let mut grad = [Complex64::new(0.0, 0.0); MAX_DIM];
        grad[2 * k] = Complex64::new(1.0, 0.0);
        grad[2 * k + 1] = Complex64::new(0.0, 1.0);
        Jet {
            value: Complex64::new(point[2 * k], point[2 * k + 1]),
            dim: dim as u8,
            grad,
        }
    }

    pub fn seed_complex_point(point: &[f64]) -> Vec<CJet> {
        (0..point.len() / 2)
            .map(|k| CJet::seed_complex(point, k))
            .collect()
    }

    /// Complex conjugate; commutes with real-coordinate differentiation.
    pub fn conj(self) -> Self {
        self.map_components(|c| c.conj())
    }

    pub fn re(self) -> RJet {
        self.map_components(|c| c.re)
    }

    pub fn im(self) -> RJet {
        self.map_components(|c| c.im)
    }
}

impl<T: Component> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet({:?}; {:?})", self.value, self.grad())
    }
}

impl<T: Component> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let dim = Self::join_dim(self.dim, rhs.dim);
        let mut grad = [T::zero(); MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = self.grad[k] + rhs.grad[k];
        }
        Jet {
            value: self.value + rhs.value,
            dim,
            grad,
        }
    }
}

impl<T: Component> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let dim = Self::join_dim(self.dim, rhs.dim);
        let mut grad = [T::zero(); MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = self.grad[k] - rhs.grad[k];
        }
        Jet {
            value: self.value - rhs.value,
            dim,
            grad,
        }
    }
}

impl<T: Component> Mul for Jet<T> {
    type Output = Self;
    // (f g)' = f' g + f g'
    fn mul(self, rhs: Self) -> Self {
        let dim = Self::join_dim(self.dim, rhs.dim);
        let mut grad = [T::zero(); MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = self.grad[k] * rhs.value + self.value * rhs.grad[k];
        }
        Jet {
            value: self.value * rhs.value,
            dim,
            grad,
        }
    }
}

impl<T: Component> Div for Jet<T> {
    type Output = Self;
    // (f / g)' = (f' - (f/g) g') / g
    fn div(self, rhs: Self) -> Self {
        let dim = Self::join_dim(self.dim, rhs.dim);
        let q = self.value / rhs.value;
        let mut grad = [T::zero(); MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = (self.grad[k] - q * rhs.grad[k]) / rhs.value;
        }
        Jet {
            value: q,
            dim,
            grad,
        }
    }
}

impl<T: Component> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut grad = [T::zero(); MAX_DIM];
        for k in 0..MAX_DIM {
            grad[k] = -self.grad[k];
        }
        Jet {
            value: -self.value,
            dim: self.dim,
            grad,
        }
    }
}

impl<T: Component> AddAssign for Jet<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Component> SubAssign for Jet<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Component> MulAssign for Jet<T> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Component> DivAssign for Jet<T> {
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

/// Scale by a plain scalar without building a constant jet first.
impl<T: Component> Mul<Jet<T>> for f64 {
    type Output = Jet<T>;
    fn mul(self, rhs: Jet<T>) -> Jet<T> {
        rhs.map_components(|c| c * T::from_f64(self))
    }
}

impl<T: Component> Add<f64> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value = self.value + T::from_f64(rhs);
        self
    }
}

impl<T: Component> Add<Jet<T>> for f64 {
    type Output = Jet<T>;
    fn add(self, rhs: Jet<T>) -> Jet<T> {
        rhs + self
    }
}

impl<T: Component> Sub<f64> for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.value = self.value - T::from_f64(rhs);
        self
    }
}

impl<T: Component> Sub<Jet<T>> for f64 {
    type Output = Jet<T>;
    fn sub(self, rhs: Jet<T>) -> Jet<T> {
        -rhs + self
    }
}
