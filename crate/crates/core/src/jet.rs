//! Truncated univariate Taylor series.
//!
//! `Jet<T, N>` holds `c[k] = f^(k)(x0) / k!` for `k < N`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::{Real, Ring};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T, const N: usize> {
    pub c: [T; N],
}

impl<T: Real, const N: usize> Jet<T, N> {
    pub fn constant(v: T) -> Self {
        let mut c = [T::zero(); N];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable expanded at `x0`.
    pub fn variable(x0: T) -> Self {
        let mut c = [T::zero(); N];
        c[0] = x0;
        if N > 1 {
            c[1] = T::one();
        }
        Jet { c }
    }

    /// `x0 + h·dir` as a jet in `h`.
    pub fn line(x0: T, dir: T) -> Self {
        let mut c = [T::zero(); N];
        c[0] = x0;
        if N > 1 {
            c[1] = dir;
        }
        Jet { c }
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> T {
        let mut f = T::one();
        for i in 2..=k {
            f = f * T::from_usize(i).unwrap();
        }
        self.c[k] * f
    }

    /// d/dx of the series; the top coefficient is lost.
    pub fn diff(&self) -> Self {
        let mut c = [T::zero(); N];
        for k in 1..N {
            c[k - 1] = self.c[k] * T::from_usize(k).unwrap();
        }
        Jet { c }
    }

    pub fn scale(&self, s: T) -> Self {
        let mut c = self.c;
        for v in c.iter_mut() {
            *v = *v * s;
        }
        Jet { c }
    }

    pub fn recip(&self) -> Self {
        let a0 = self.c[0];
        let mut r = [T::zero(); N];
        r[0] = T::one() / a0;
        for k in 1..N {
            let mut s = T::zero();
            for j in 1..=k {
                s = s + self.c[j] * r[k - j];
            }
            r[k] = -s / a0;
        }
        Jet { c: r }
    }

    pub fn sqrt(&self) -> Self {
        let a0 = self.c[0].sqrt();
        let mut r = [T::zero(); N];
        r[0] = a0;
        for k in 1..N {
            let mut s = self.c[k];
            for j in 1..k {
                s = s - r[j] * r[k - j];
            }
            r[k] = s / (a0 + a0);
        }
        Jet { c: r }
    }
}

impl<T: Real, const N: usize> Add for Jet<T, N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.c[k] = self.c[k] + rhs.c[k];
        }
        self
    }
}

impl<T: Real, const N: usize> Sub for Jet<T, N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.c[k] = self.c[k] - rhs.c[k];
        }
        self
    }
}

impl<T: Real, const N: usize> Mul for Jet<T, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [T::zero(); N];
        for i in 0..N {
            if self.c[i] == T::zero() {
                continue;
            }
            for j in 0..N - i {
                c[i + j] = c[i + j] + self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }
}

impl<T: Real, const N: usize> Div for Jet<T, N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Real, const N: usize> Neg for Jet<T, N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl<T: Real, const N: usize> Ring<T> for Jet<T, N> {
    fn cst(v: T) -> Self {
        Jet::constant(v)
    }
}
