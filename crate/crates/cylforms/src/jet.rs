//! Truncated bivariate Taylor jets.
//!
//! A `Jet2` of order `N` stores the Taylor coefficients `c[a,b]` of
//! `f(x1 + t1, x2 + t2) = Σ c[a,b] t1^a t2^b` for `a + b ≤ N`. Arithmetic
//! truncates to the smaller order of its operands, and differentiation
//! lowers the order by one, so a negative order marks a jet whose values
//! are unknown. Consumers read values through [`Jet2::value`] and
//! [`Jet2::partial`], which refuse to answer beyond the tracked order.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::NumAssign;

use crate::error::{Error, Result};

/// Scalar types a jet can carry.
pub trait JetScalar:
    Copy + NumAssign + Neg<Output = Self> + From<f64> + Send + Sync + std::fmt::Debug + 'static
{
}

impl JetScalar for f64 {}
impl JetScalar for Complex64 {}

#[inline]
fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn idx(a: usize, b: usize) -> usize {
    tri(a + b) + b
}

fn len_for(order: i32) -> usize {
    if order < 0 {
        0
    } else {
        tri(order as usize + 1)
    }
}

/// Truncated Taylor expansion in two variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T: JetScalar = f64> {
    order: i32,
    coeffs: Vec<T>,
}

impl<T: JetScalar> Jet2<T> {
    pub fn zero(order: i32) -> Self {
        Self { order, coeffs: vec![T::zero(); len_for(order)] }
    }

    pub fn constant(value: T, order: i32) -> Self {
        let mut j = Self::zero(order);
        if order >= 0 {
            j.coeffs[0] = value;
        }
        j
    }

    /// The jet of `x1` at `x1 = value`.
    pub fn var1(value: T, order: i32) -> Self {
        let mut j = Self::constant(value, order);
        if order >= 1 {
            j.coeffs[idx(1, 0)] = T::one();
        }
        j
    }

    /// The jet of `x2` at `x2 = value`.
    pub fn var2(value: T, order: i32) -> Self {
        let mut j = Self::constant(value, order);
        if order >= 1 {
            j.coeffs[idx(0, 1)] = T::one();
        }
        j
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn is_known(&self) -> bool {
        self.order >= 0
    }

    /// Raw Taylor coefficient of `t1^a t2^b`.
    pub fn coeff(&self, a: usize, b: usize) -> Option<T> {
        ((a + b) as i32 <= self.order).then(|| self.coeffs[idx(a, b)])
    }

    pub fn set_coeff(&mut self, a: usize, b: usize, v: T) {
        assert!((a + b) as i32 <= self.order, "coefficient beyond jet order");
        self.coeffs[idx(a, b)] = v;
    }

    pub fn value(&self) -> Result<T> {
        self.coeff(0, 0).ok_or(Error::InsufficientJetDepth { needed: 0, available: self.order })
    }

    /// `∂1^a ∂2^b f` at the expansion point.
    pub fn partial(&self, a: usize, b: usize) -> Result<T> {
        let c = self
            .coeff(a, b)
            .ok_or(Error::InsufficientJetDepth { needed: (a + b) as i32, available: self.order })?;
        Ok(c * T::from(factorial(a) * factorial(b)))
    }

    pub fn truncate(&self, order: i32) -> Self {
        if order >= self.order {
            return self.clone();
        }
        let mut j = Self::zero(order);
        let n = j.coeffs.len();
        j.coeffs.copy_from_slice(&self.coeffs[..n]);
        j
    }

    pub fn map<U: JetScalar>(&self, f: impl Fn(T) -> U) -> Jet2<U> {
        Jet2 { order: self.order, coeffs: self.coeffs.iter().map(|&c| f(c)).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        Jet2 { order: self.order, coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    pub fn add_const(&self, s: T) -> Self {
        let mut j = self.clone();
        if j.order >= 0 {
            j.coeffs[0] += s;
        }
        j
    }

    pub fn d1(&self) -> Self {
        let mut out = Self::zero(self.order - 1);
        for n in 0..=out.order.max(-1) {
            let n = n as usize;
            for b in 0..=n {
                let a = n - b;
                out.coeffs[idx(a, b)] = self.coeffs[idx(a + 1, b)] * T::from((a + 1) as f64);
            }
        }
        out
    }

    pub fn d2(&self) -> Self {
        let mut out = Self::zero(self.order - 1);
        for n in 0..=out.order.max(-1) {
            let n = n as usize;
            for b in 0..=n {
                let a = n - b;
                out.coeffs[idx(a, b)] = self.coeffs[idx(a, b + 1)] * T::from((b + 1) as f64);
            }
        }
        out
    }

    /// `∂1^a ∂2^b` applied to the jet.
    pub fn deriv(&self, a: usize, b: usize) -> Self {
        let mut j = self.clone();
        for _ in 0..a {
            j = j.d1();
        }
        for _ in 0..b {
            j = j.d2();
        }
        j
    }

    /// Antiderivative in `x2` vanishing on `t2 = 0`.
    pub fn integrate2(&self) -> Self {
        let mut out = Self::zero(self.order + 1);
        for n in 0..=self.order.max(-1) {
            let n = n as usize;
            for b in 0..=n {
                let a = n - b;
                out.coeffs[idx(a, b + 1)] = self.coeffs[idx(a, b)] / T::from((b + 1) as f64);
            }
        }
        out
    }

    fn hom(&self, n: usize) -> &[T] {
        &self.coeffs[tri(n)..tri(n + 1)]
    }

    /// Evaluate the truncated polynomial at displacement `(t1, t2)`.
    pub fn eval_at(&self, t1: T, t2: T) -> Result<T> {
        if self.order < 0 {
            return Err(Error::InsufficientJetDepth { needed: 0, available: self.order });
        }
        let mut s = T::zero();
        for n in 0..=self.order as usize {
            for b in 0..=n {
                let a = n - b;
                s += self.coeffs[idx(a, b)] * powi(t1, a) * powi(t2, b);
            }
        }
        Ok(s)
    }
}

fn powi<T: JetScalar>(x: T, n: usize) -> T {
    let mut p = T::one();
    for _ in 0..n {
        p *= x;
    }
    p
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Product of two homogeneous polynomials, accumulated with a weight.
fn hom_mul_acc<T: JetScalar>(out: &mut [T], p: &[T], q: &[T], w: T) {
    for (i, &pi) in p.iter().enumerate() {
        if pi.is_zero() {
            continue;
        }
        for (j, &qj) in q.iter().enumerate() {
            out[i + j] += pi * qj * w;
        }
    }
}

impl<T: JetScalar> Jet2<T> {
    pub fn mul_jet(&self, rhs: &Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut out = Self::zero(order);
        if order < 0 {
            return out;
        }
        for n in 0..=order as usize {
            let acc = &mut out.coeffs[tri(n)..tri(n + 1)];
            for i in 0..=n {
                hom_mul_acc(acc, self.hom(i), rhs.hom(n - i), T::one());
            }
        }
        out
    }

    fn zip(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        let order = self.order.min(rhs.order);
        let n = len_for(order);
        Jet2 { order, coeffs: (0..n).map(|i| f(self.coeffs[i], rhs.coeffs[i])).collect() }
    }

    /// Multiplicative inverse, via the homogeneous-degree recurrence.
    pub fn recip(&self) -> Result<Self> {
        let g0 = self.value()?;
        if g0.is_zero() {
            return Err(Error::Domain("reciprocal of a jet with zero constant term".into()));
        }
        let inv0 = T::one() / g0;
        let mut out = Self::zero(self.order);
        out.coeffs[0] = inv0;
        for n in 1..=self.order as usize {
            let mut acc = vec![T::zero(); n + 1];
            for k in 1..=n {
                let prev: Vec<T> = out.coeffs[tri(n - k)..tri(n - k + 1)].to_vec();
                hom_mul_acc(&mut acc, self.hom(k), &prev, T::one());
            }
            for (b, v) in acc.into_iter().enumerate() {
                out.coeffs[tri(n) + b] = -v * inv0;
            }
        }
        Ok(out)
    }

    /// Degree-by-degree recurrence `f_n = Σ_k w(n,k) g_k f_{n−k}`, the form
    /// taken by `Df = f·Dg` under the Euler operator `D`.
    fn euler_recurrence(&self, f0: T, coef: impl Fn(usize, usize) -> T) -> Self {
        let mut out = Self::zero(self.order);
        out.coeffs[0] = f0;
        for n in 1..=self.order as usize {
            let mut acc = vec![T::zero(); n + 1];
            for k in 1..=n {
                let prev: Vec<T> = out.coeffs[tri(n - k)..tri(n - k + 1)].to_vec();
                hom_mul_acc(&mut acc, self.hom(k), &prev, coef(n, k));
            }
            for (b, v) in acc.into_iter().enumerate() {
                out.coeffs[tri(n) + b] = v;
            }
        }
        out
    }
}

impl Jet2<f64> {
    pub fn exp(&self) -> Result<Self> {
        let g0 = self.value()?;
        Ok(self.euler_recurrence(g0.exp(), |n, k| k as f64 / n as f64))
    }

    pub fn ln(&self) -> Result<Self> {
        let g0 = self.value()?;
        if g0 <= 0.0 {
            return Err(Error::Domain(format!("logarithm of non-positive value {g0}")));
        }
        // g·Df = Dg  ⇒  g0 n f_n = n g_n − Σ_{k=1}^{n−1} (n−k) g_k f_{n−k}
        let mut out = Self::zero(self.order);
        out.coeffs[0] = g0.ln();
        for n in 1..=self.order as usize {
            let mut acc: Vec<f64> = self.hom(n).iter().map(|&v| v * n as f64).collect();
            for k in 1..n {
                let prev: Vec<f64> = out.coeffs[tri(n - k)..tri(n - k + 1)].to_vec();
                hom_mul_acc(&mut acc, self.hom(k), &prev, -((n - k) as f64));
            }
            for (b, v) in acc.into_iter().enumerate() {
                out.coeffs[tri(n) + b] = v / (g0 * n as f64);
            }
        }
        Ok(out)
    }

    /// `self^p` for real `p`, requiring a positive constant term.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let g0 = self.value()?;
        if g0 <= 0.0 {
            return Err(Error::Domain(format!("real power of non-positive value {g0}")));
        }
        // g·Df = p f·Dg  ⇒  g0 n f_n = Σ_{k=1}^{n} (p k − (n − k)) g_k f_{n−k}
        let mut out = Self::zero(self.order);
        out.coeffs[0] = g0.powf(p);
        for n in 1..=self.order as usize {
            let mut acc = vec![0.0; n + 1];
            for k in 1..=n {
                let prev: Vec<f64> = out.coeffs[tri(n - k)..tri(n - k + 1)].to_vec();
                hom_mul_acc(&mut acc, self.hom(k), &prev, p * k as f64 - (n - k) as f64);
            }
            for (b, v) in acc.into_iter().enumerate() {
                out.coeffs[tri(n) + b] = v / (g0 * n as f64);
            }
        }
        Ok(out)
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }

    /// Simultaneous cosine and sine.
    pub fn cos_sin(&self) -> Result<(Self, Self)> {
        let g0 = self.value()?;
        let mut c = Self::zero(self.order);
        let mut s = Self::zero(self.order);
        c.coeffs[0] = g0.cos();
        s.coeffs[0] = g0.sin();
        // n c_n = −Σ k g_k s_{n−k},  n s_n = Σ k g_k c_{n−k}
        for n in 1..=self.order as usize {
            let mut ac = vec![0.0; n + 1];
            let mut as_ = vec![0.0; n + 1];
            for k in 1..=n {
                let w = k as f64 / n as f64;
                let sp: Vec<f64> = s.coeffs[tri(n - k)..tri(n - k + 1)].to_vec();
                let cp: Vec<f64> = c.coeffs[tri(n - k)..tri(n - k + 1)].to_vec();
                hom_mul_acc(&mut ac, self.hom(k), &sp, -w);
                hom_mul_acc(&mut as_, self.hom(k), &cp, w);
            }
            for b in 0..=n {
                c.coeffs[tri(n) + b] = ac[b];
                s.coeffs[tri(n) + b] = as_[b];
            }
        }
        Ok((c, s))
    }

    pub fn to_complex(&self) -> Jet2<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl<T: JetScalar> Add for &Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: Self) -> Jet2<T> {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: JetScalar> Sub for &Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: Self) -> Jet2<T> {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: JetScalar> Mul for &Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: Self) -> Jet2<T> {
        self.mul_jet(rhs)
    }
}

impl<T: JetScalar> Neg for &Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        self.scale(-T::one())
    }
}

impl<T: JetScalar> Add for Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: Self) -> Jet2<T> {
        &self + &rhs
    }
}

impl<T: JetScalar> Sub for Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: Self) -> Jet2<T> {
        &self - &rhs
    }
}

impl<T: JetScalar> Mul for Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: Self) -> Jet2<T> {
        &self * &rhs
    }
}

impl<T: JetScalar> Neg for Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        -&self
    }
}
