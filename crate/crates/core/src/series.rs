//! Truncated power series ("jets") of a fixed order.
//!
//! A [`Jet`] carries the Taylor coefficients `c[0..=order]` of a function of
//! one small variable. Coefficients are generic over [`Scalar`], so a jet in
//! `ε` whose coefficients are themselves jets in `δr` gives the nested
//! expansion used to extract both the ε-orders and the r-derivatives of a
//! standard-form right-hand side from one evaluation.
//!
//! Arithmetic between jets of different orders is a bookkeeping bug. The
//! `checked_*` methods report it as [`SeriesError::OrderMismatch`]; the
//! operator impls panic on it.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("a variable jet needs order >= 1")]
    ZeroOrderVariable,
    #[error("division by a series with vanishing constant term")]
    DivisionByZero,
    #[error("{function} undefined at constant term {value}")]
    Domain { function: &'static str, value: f64 },
}

/// Coefficient ring for jets: `f64` or a nested [`Jet`].
///
/// Operations that can leave the domain of the underlying real function are
/// fallible; everything else goes through the std operator traits.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
{
    /// Innermost constant term.
    fn value(&self) -> f64;
    /// A constant with the same shape as `self`.
    fn lift(&self, c: f64) -> Self;
    fn try_recip(&self) -> Result<Self, SeriesError>;
    fn try_ln(&self) -> Result<Self, SeriesError>;
    fn try_powf(&self, p: f64) -> Result<Self, SeriesError>;
    fn exp(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self);
    /// Four-quadrant arctangent of `self / x`.
    fn atan2(&self, x: &Self) -> Self;

    fn sin(&self) -> Self {
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        self.sin_cos().1
    }

    fn try_div(&self, rhs: &Self) -> Result<Self, SeriesError> {
        Ok(self.clone() * rhs.try_recip()?)
    }

    fn powi(&self, n: i32) -> Result<Self, SeriesError> {
        let base = if n < 0 { self.try_recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = self.lift(1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * sq.clone();
            }
            e >>= 1;
            if e > 0 {
                sq = sq.clone() * sq;
            }
        }
        Ok(acc)
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }

    fn lift(&self, c: f64) -> Self {
        c
    }

    fn try_recip(&self) -> Result<Self, SeriesError> {
        if *self == 0.0 {
            Err(SeriesError::DivisionByZero)
        } else {
            Ok(1.0 / self)
        }
    }

    fn try_ln(&self) -> Result<Self, SeriesError> {
        if *self > 0.0 {
            Ok(self.ln())
        } else {
            Err(SeriesError::Domain {
                function: "ln",
                value: *self,
            })
        }
    }

    fn try_powf(&self, p: f64) -> Result<Self, SeriesError> {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return Scalar::powi(self, p as i32);
        }
        if *self > 0.0 {
            Ok(self.powf(p))
        } else {
            Err(SeriesError::Domain {
                function: "pow",
                value: *self,
            })
        }
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }

    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }

    fn powi(&self, n: i32) -> Result<Self, SeriesError> {
        if n < 0 && *self == 0.0 {
            return Err(SeriesError::DivisionByZero);
        }
        Ok(f64::powi(*self, n))
    }
}

/// Supported elementary compositions for [`Jet::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
    Ln,
    Pow(f64),
}

/// Truncated power series `c[0] + c[1] δ + … + c[order] δ^order`.
#[derive(Clone, PartialEq)]
pub struct Jet<T = f64> {
    coeffs: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}

impl Jet<f64> {
    /// `c + 0·δ + …`
    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Jet { coeffs }
    }

    /// `c + δ`, the seed for expanding a function around `c`.
    pub fn variable(c: f64, order: usize) -> Result<Self, SeriesError> {
        if order == 0 {
            return Err(SeriesError::ZeroOrderVariable);
        }
        Ok(Self::seed(c, order))
    }

    /// Like [`Jet::variable`] but degrades to a constant at order zero.
    pub fn seed(c: f64, order: usize) -> Self {
        let mut j = Self::constant(c, order);
        if order > 0 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    /// `m!·c[m]`, the m-th derivative at the expansion point.
    pub fn derivative(&self, m: usize) -> f64 {
        let mut f = 1.0;
        for k in 2..=m {
            f *= k as f64;
        }
        self.coeffs[m] * f
    }

    /// Horner evaluation of the truncated polynomial at `h`.
    pub fn eval(&self, h: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * h + c)
    }
}

impl<T: Scalar> Jet<T> {
    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { coeffs }
    }

    /// Jet of the given order whose constant term is `c` (an inner scalar).
    pub fn constant_of(c: T, order: usize) -> Self {
        let zero = c.lift(0.0);
        let mut coeffs = vec![zero; order + 1];
        coeffs[0] = c;
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> &T {
        &self.coeffs[m]
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    fn zero_coeff(&self) -> T {
        self.coeffs[0].lift(0.0)
    }

    fn check_order(&self, other: &Self) -> Result<(), SeriesError> {
        if self.order() != other.order() {
            Err(SeriesError::OrderMismatch {
                left: self.order(),
                right: other.order(),
            })
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.check_order(rhs)?;
        Ok(Jet {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    /// Truncated Cauchy product.
    pub fn checked_mul(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.check_order(rhs)?;
        let n = self.coeffs.len();
        let mut out = Vec::with_capacity(n);
        for m in 0..n {
            let mut acc = self.coeffs[0].clone() * rhs.coeffs[m].clone();
            for p in 1..=m {
                acc = acc + self.coeffs[p].clone() * rhs.coeffs[m - p].clone();
            }
            out.push(acc);
        }
        Ok(Jet { coeffs: out })
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.check_order(rhs)?;
        let inv0 = rhs.coeffs[0].try_recip()?;
        let n = self.coeffs.len();
        let mut out: Vec<T> = Vec::with_capacity(n);
        for m in 0..n {
            let mut acc = self.coeffs[m].clone();
            for k in 1..=m {
                acc = acc - rhs.coeffs[k].clone() * out[m - k].clone();
            }
            out.push(acc * inv0.clone());
        }
        Ok(Jet { coeffs: out })
    }

    /// Multiply every coefficient by an inner scalar.
    pub fn scale_by(&self, s: &T) -> Self {
        Jet {
            coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
        }
    }

    pub fn apply(&self, f: Elementary) -> Result<Self, SeriesError> {
        match f {
            Elementary::Sin => Ok(self.sin_cos().0),
            Elementary::Cos => Ok(self.sin_cos().1),
            Elementary::Exp => Ok(Scalar::exp(self)),
            Elementary::Ln => self.try_ln(),
            Elementary::Pow(p) => self.try_powf(p),
        }
    }

    /// `δ·d/dδ` of the series, i.e. coefficients `m·c[m]`.
    fn weighted(&self) -> Vec<T> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c.clone() * m as f64)
            .collect()
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn value(&self) -> f64 {
        self.coeffs[0].value()
    }

    fn lift(&self, c: f64) -> Self {
        Jet::constant_of(self.coeffs[0].lift(c), self.order())
    }

    fn try_recip(&self) -> Result<Self, SeriesError> {
        self.lift(1.0).checked_div(self)
    }

    fn try_div(&self, rhs: &Self) -> Result<Self, SeriesError> {
        self.checked_div(rhs)
    }

    fn try_ln(&self) -> Result<Self, SeriesError> {
        if self.value() <= 0.0 {
            return Err(SeriesError::Domain {
                function: "ln",
                value: self.value(),
            });
        }
        let a = &self.coeffs;
        let inv0 = a[0].try_recip()?;
        let mut b: Vec<T> = Vec::with_capacity(a.len());
        b.push(a[0].try_ln()?);
        for m in 1..a.len() {
            let mut acc = a[m].clone();
            for k in 1..m {
                acc = acc - b[k].clone() * a[m - k].clone() * (k as f64 / m as f64);
            }
            b.push(acc * inv0.clone());
        }
        Ok(Jet { coeffs: b })
    }

    fn try_powf(&self, p: f64) -> Result<Self, SeriesError> {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return self.powi(p as i32);
        }
        if self.value() <= 0.0 {
            return Err(SeriesError::Domain {
                function: "pow",
                value: self.value(),
            });
        }
        let a = &self.coeffs;
        let inv0 = a[0].try_recip()?;
        let mut b: Vec<T> = Vec::with_capacity(a.len());
        b.push(a[0].try_powf(p)?);
        for m in 1..a.len() {
            let mut acc = self.zero_coeff();
            for k in 1..=m {
                let w = p * k as f64 - (m - k) as f64;
                acc = acc + a[k].clone() * b[m - k].clone() * w;
            }
            b.push(acc * inv0.clone() * (1.0 / m as f64));
        }
        Ok(Jet { coeffs: b })
    }

    fn exp(&self) -> Self {
        let a = self.weighted();
        let mut b: Vec<T> = Vec::with_capacity(a.len());
        b.push(self.coeffs[0].exp());
        for m in 1..a.len() {
            let mut acc = self.zero_coeff();
            for k in 1..=m {
                acc = acc + a[k].clone() * b[m - k].clone();
            }
            b.push(acc * (1.0 / m as f64));
        }
        Jet { coeffs: b }
    }

    fn sin_cos(&self) -> (Self, Self) {
        let a = self.weighted();
        let (s0, c0) = self.coeffs[0].sin_cos();
        let mut s = Vec::with_capacity(a.len());
        let mut c = Vec::with_capacity(a.len());
        s.push(s0);
        c.push(c0);
        for m in 1..a.len() {
            let mut sa = self.zero_coeff();
            let mut ca = self.zero_coeff();
            for k in 1..=m {
                sa = sa + a[k].clone() * c[m - k].clone();
                ca = ca - a[k].clone() * s[m - k].clone();
            }
            s.push(sa * (1.0 / m as f64));
            c.push(ca * (1.0 / m as f64));
        }
        (Jet { coeffs: s }, Jet { coeffs: c })
    }

    fn atan2(&self, x: &Self) -> Self {
        // θ' = (x y' − y x') / (x² + y²), integrated term by term.
        let y = self;
        let n = y.coeffs.len();
        let r2 = x.clone() * x.clone() + y.clone() * y.clone();
        let base = y.coeffs[0].atan2(&x.coeffs[0]);
        let mut out = vec![base];
        if n > 1 {
            let dx = Jet { coeffs: x.weighted() };
            let dy = Jet { coeffs: y.weighted() };
            // δ·θ' with the same truncation; coefficient m of δθ' is m·θ_m.
            let num = x.clone() * dy - y.clone() * dx;
            let w = num.checked_div(&r2).expect("atan2 at the origin has no series");
            for m in 1..n {
                out.push(w.coeffs[m].clone() * (1.0 / m as f64));
            }
        }
        Jet { coeffs: out }
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Self {
        self.checked_add(&rhs).expect("jet addition")
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Self {
        self.check_order(&rhs).expect("jet subtraction");
        Jet {
            coeffs: self.coeffs.into_iter().zip(rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Self {
        self.checked_mul(&rhs).expect("jet multiplication")
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Self {
        Jet {
            coeffs: self.coeffs.into_iter().map(|c| -c).collect(),
        }
    }
}

impl<T: Scalar> Mul<f64> for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: f64) -> Self {
        Jet {
            coeffs: self.coeffs.into_iter().map(|c| c * rhs).collect(),
        }
    }
}

impl<T: Scalar> Add<f64> for Jet<T> {
    type Output = Jet<T>;
    fn add(mut self, rhs: f64) -> Self {
        let c0 = self.coeffs[0].clone();
        self.coeffs[0] = c0 + rhs;
        self
    }
}

impl<T: Scalar> Sub<f64> for Jet<T> {
    type Output = Jet<T>;
    fn sub(mut self, rhs: f64) -> Self {
        let c0 = self.coeffs[0].clone();
        self.coeffs[0] = c0 - rhs;
        self
    }
}
