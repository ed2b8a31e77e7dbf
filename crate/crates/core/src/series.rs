//! Truncated formal power series `Σ_{k≤N} t^k a_k` with Cauchy-product arithmetic.

use crate::multilinear::MultiMap;
use crate::ratlin::{q, MatrixQ, Q};
use crate::superalg::SuperElement;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("series does not start with the identity")]
    NotInvertible,
    #[error("series has a nonzero constant term")]
    NonzeroConstant,
    #[error("truncation orders differ ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("series must have at least one coefficient")]
    Empty,
}

/// Coefficient space of a formal series.
pub trait Coeff: Clone + PartialEq + std::fmt::Debug {
    fn zero_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, s: &Q) -> Self;
    fn vanishes(&self) -> bool;
}

/// Coefficients that form an associative algebra with unit.
pub trait AlgebraCoeff: Coeff {
    fn one_like(&self) -> Self;
    fn product(&self, o: &Self) -> Self;
    fn is_one(&self) -> bool {
        *self == self.one_like()
    }
}

impl Coeff for Q {
    fn zero_like(&self) -> Self {
        Q::zero()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn times(&self, s: &Q) -> Self {
        self * s
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
}

impl AlgebraCoeff for Q {
    fn one_like(&self) -> Self {
        Q::one()
    }
    fn product(&self, o: &Self) -> Self {
        self * o
    }
}

impl Coeff for MatrixQ {
    fn zero_like(&self) -> Self {
        MatrixQ::zeros(self.rows(), self.cols())
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn times(&self, s: &Q) -> Self {
        self.scale(s)
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
}

impl AlgebraCoeff for MatrixQ {
    fn one_like(&self) -> Self {
        MatrixQ::identity(self.rows())
    }
    fn product(&self, o: &Self) -> Self {
        self.mul(o)
    }
}

impl Coeff for MultiMap {
    fn zero_like(&self) -> Self {
        MultiMap::zero(self.dim(), self.arity())
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn times(&self, s: &Q) -> Self {
        self.scale(s)
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
}

impl Coeff for SuperElement {
    fn zero_like(&self) -> Self {
        SuperElement::zero(self.gens())
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn times(&self, s: &Q) -> Self {
        self.scale(s)
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
}

impl AlgebraCoeff for SuperElement {
    fn one_like(&self) -> Self {
        SuperElement::one(self.gens())
    }
    fn product(&self, o: &Self) -> Self {
        self * o
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Coeff> FormalSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::Empty);
        }
        Ok(FormalSeries { coeffs })
    }

    /// `a` in order 0, zero up to order `n`.
    pub fn constant(a: T, n: usize) -> Self {
        let z = a.zero_like();
        let mut coeffs = vec![a];
        coeffs.extend(std::iter::repeat_n(z, n));
        FormalSeries { coeffs }
    }

    /// Pads with zeros (or truncates) to order `n`.
    pub fn with_order(mut self, n: usize) -> Self {
        let z = self.coeffs[0].zero_like();
        self.coeffs.resize(n + 1, z);
        self
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &T {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn set_coeff(&mut self, k: usize, a: T) {
        self.coeffs[k] = a;
    }

    fn check(&self, o: &Self) -> Result<(), SeriesError> {
        if self.order() != o.order() {
            Err(SeriesError::OrderMismatch(self.order(), o.order()))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check(o)?;
        Ok(FormalSeries { coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.plus(b)).collect() })
    }

    pub fn scale(&self, s: &Q) -> Self {
        FormalSeries { coeffs: self.coeffs.iter().map(|a| a.times(s)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Result<Self, SeriesError> {
        self.add(&o.scale(&q(-1)))
    }

    /// `t^k`-shift, keeping the truncation order.
    pub fn shift(&self, k: usize) -> Self {
        let z = self.coeffs[0].zero_like();
        let n = self.order();
        let mut coeffs = vec![z; k.min(n + 1)];
        coeffs.extend(self.coeffs.iter().take(n + 1 - coeffs.len()).cloned());
        FormalSeries { coeffs }
    }

    /// Lowest order with a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|a| !a.vanishes())
    }

    /// Cauchy product `Σ_k t^k Σ_{l≤k} f(a_l, b_{k−l})` for any bilinear `f`.
    pub fn cauchy<U: Coeff, V: Coeff>(&self, o: &FormalSeries<U>, f: impl Fn(&T, &U) -> V) -> Result<FormalSeries<V>, SeriesError> {
        if self.order() != o.order() {
            return Err(SeriesError::OrderMismatch(self.order(), o.order()));
        }
        let n = self.order();
        let coeffs = (0..=n)
            .map(|k| {
                let mut acc = f(&self.coeffs[0], &o.coeffs[k]);
                for l in 1..=k {
                    acc = acc.plus(&f(&self.coeffs[l], &o.coeffs[k - l]));
                }
                acc
            })
            .collect();
        Ok(FormalSeries { coeffs })
    }
}

impl<T: AlgebraCoeff> FormalSeries<T> {
    pub fn one_like(&self) -> Self {
        Self::constant(self.coeffs[0].one_like(), self.order())
    }

    pub fn mul(&self, o: &Self) -> Result<Self, SeriesError> {
        self.cauchy(o, |a, b| a.product(b))
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(self.one_like(), |acc, _| acc.mul(self).unwrap())
    }

    /// `(1 + t w)^{−1} = Σ (−t w)^k`.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_one() {
            return Err(SeriesError::NotInvertible);
        }
        let u = self.sub(&self.one_like())?.scale(&q(-1));
        let mut acc = self.one_like();
        let mut term = self.one_like();
        for _ in 1..=self.order() {
            term = term.mul(&u)?;
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// `exp(t w) = Σ (t w)^k / k!`.
    pub fn exp(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].vanishes() {
            return Err(SeriesError::NonzeroConstant);
        }
        let mut acc = self.one_like();
        let mut term = self.one_like();
        for k in 1..=self.order() {
            term = term.mul(self)?.scale(&Q::new(1.into(), (k as i64).into()));
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// `ln(1 + t w) = Σ_{k≥1} (−1)^{k−1} (t w)^k / k`.
    pub fn ln(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_one() {
            return Err(SeriesError::NotInvertible);
        }
        let u = self.sub(&self.one_like())?;
        let mut acc = FormalSeries::constant(self.coeffs[0].zero_like(), self.order());
        let mut term = self.one_like();
        for k in 1..=self.order() {
            term = term.mul(&u)?;
            let c = Q::new(if k % 2 == 1 { 1.into() } else { (-1).into() }, (k as i64).into());
            acc = acc.add(&term.scale(&c))?;
        }
        Ok(acc)
    }
}
