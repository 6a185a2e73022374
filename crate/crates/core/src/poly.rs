//! Sparse multivariate Laurent polynomials.
//!
//! Exponents are signed so that scaled parameters like `μ̃/ε` stay polynomial
//! objects. Exact algorithms (gcd, exact division, content) work on
//! `Poly<Rational>` with nonnegative exponents.

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Write as _};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::{Real, Ring};

pub type Rational = BigRational;
pub type Exps = Vec<i32>;

pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(v: i64) -> Self;
}

impl Coeff for BigRational {
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

impl Coeff for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Closest rational to a finite float (exact binary expansion).
pub fn rat_from_f64(v: f64) -> Option<Rational> {
    BigRational::from_float(v)
}

#[derive(Clone, PartialEq)]
pub struct Poly<C> {
    nvars: usize,
    terms: BTreeMap<Exps, C>,
}

impl<C: Coeff> Poly<C> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(nvars, e, C::one())
    }

    pub fn monomial(nvars: usize, exps: Exps, c: C) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exps, C)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Exps, c: C) {
        debug_assert_eq!(e.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&e);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the exact monomial `exps`.
    pub fn coeff(&self, exps: &[i32]) -> C {
        self.terms.get(exps).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&x| x == 0))
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&vec![0; self.nvars])
    }

    pub fn uses_var(&self, i: usize) -> bool {
        self.terms.keys().any(|e| e[i] != 0)
    }

    pub fn uses_any(&self, vars: &[usize]) -> bool {
        vars.iter().any(|&v| self.uses_var(v))
    }

    pub fn degree_in(&self, i: usize) -> i32 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn min_exp_in(&self, i: usize) -> i32 {
        self.terms.keys().map(|e| e[i]).min().unwrap_or(0)
    }

    /// Total degree over the listed variables.
    pub fn degree_over(&self, vars: &[usize]) -> i32 {
        self.terms
            .keys()
            .map(|e| vars.iter().map(|&v| e[v]).sum::<i32>())
            .max()
            .unwrap_or(0)
    }

    /// Lex-largest term (variable 0 most significant).
    pub fn leading(&self) -> Option<(&Exps, &C)> {
        self.terms.iter().next_back()
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v.clone() * c.clone())).collect(),
        }
    }

    pub fn mul_monomial(&self, exps: &[i32]) -> Self {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, v)| (e.iter().zip(exps).map(|(a, b)| a + b).collect(), v.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne[i] -= 1;
            out.add_term(ne, c.clone() * C::from_int(e[i] as i64));
        }
        out
    }

    /// Replace variable `i` by `q`. Requires nonnegative exponents of `i`.
    pub fn substitute(&self, i: usize, q: &Self) -> Self {
        assert!(self.min_exp_in(i) >= 0, "substitution into a negative power");
        let mut powers = vec![Self::one(self.nvars)];
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let k = e[i] as usize;
            while powers.len() <= k {
                let next = powers.last().unwrap() * q;
                powers.push(next);
            }
            let mut rest = e.clone();
            rest[i] = 0;
            let t = Self::monomial(self.nvars, rest, c.clone());
            out = out + &t * &powers[k];
        }
        out
    }

    /// Coefficients of `x_i^k`, k = 0..=deg (nonnegative exponents).
    pub fn coeffs_in(&self, i: usize) -> Vec<Self> {
        let d = self.degree_in(i).max(0) as usize;
        let mut out = vec![Self::zero(self.nvars); d + 1];
        for (e, c) in &self.terms {
            assert!(e[i] >= 0);
            let mut ne = e.clone();
            ne[i] = 0;
            out[e[i] as usize].add_term(ne, c.clone());
        }
        out
    }

    /// Group terms by the exponents of `vars`; returns monomial → coefficient polynomial.
    pub fn split_by(&self, vars: &[usize]) -> BTreeMap<Vec<i32>, Self> {
        let mut out: BTreeMap<Vec<i32>, Self> = BTreeMap::new();
        for (e, c) in &self.terms {
            let key: Vec<i32> = vars.iter().map(|&v| e[v]).collect();
            let mut ne = e.clone();
            for &v in vars {
                ne[v] = 0;
            }
            out.entry(key).or_insert_with(|| Self::zero(self.nvars)).add_term(ne, c.clone());
        }
        out
    }

    /// Map variable `i` of self to `map[i]` in a ring with `nvars` variables.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Self {
        let mut out = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut ne = vec![0; nvars];
            for (i, &x) in e.iter().enumerate() {
                if x != 0 {
                    ne[map[i]] += x;
                }
            }
            out.add_term(ne, c.clone());
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        Poly::from_terms(self.nvars, self.terms.iter().map(|(e, c)| (e.clone(), f(c))))
    }

    /// Smallest exponent of every variable across all terms.
    pub fn min_exps(&self) -> Exps {
        let mut m = vec![0; self.nvars];
        for (i, slot) in m.iter_mut().enumerate() {
            *slot = self.min_exp_in(i);
        }
        m
    }

    pub fn fmt_with(&self, names: &[String]) -> String
    where
        C: fmt::Display,
    {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (e, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                s.push_str(" + ");
            }
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0)
                .map(|(i, &x)| if x == 1 { names[i].clone() } else { format!("{}^{}", names[i], x) })
                .collect();
            if mono.is_empty() {
                let _ = write!(s, "{c}");
            } else if c.is_one() {
                s.push_str(&mono.join("*"));
            } else {
                let _ = write!(s, "({c})*{}", mono.join("*"));
            }
        }
        s
    }
}

impl<C: Coeff> Debug for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

impl<'a, C: Coeff> Add<&'a Poly<C>> for &'a Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: &Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl<C: Coeff> Add for Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: Poly<C>) -> Poly<C> {
        &self + &rhs
    }
}

impl<'a, C: Coeff> Sub<&'a Poly<C>> for &'a Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: &Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl<C: Coeff> Sub for Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: Poly<C>) -> Poly<C> {
        &self - &rhs
    }
}

impl<'a, C: Coeff> Mul<&'a Poly<C>> for &'a Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: &Poly<C>) -> Poly<C> {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Exps = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca.clone() * cb.clone());
            }
        }
        out
    }
}

impl<C: Coeff> Mul for Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: Poly<C>) -> Poly<C> {
        &self * &rhs
    }
}

impl<C: Coeff> Neg for Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        Poly {
            nvars: self.nvars,
            terms: self.terms.into_iter().map(|(e, c)| (e, -c)).collect(),
        }
    }
}

impl<C: Coeff> Neg for &Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        -self.clone()
    }
}

// ---------------------------------------------------------------------------
// exact algorithms over the rationals

impl Poly<Rational> {
    /// Divide by the leading coefficient so that equal factors compare equal.
    pub fn monic(&self) -> Self {
        match self.leading() {
            Some((_, c)) => {
                let inv = c.recip();
                self.scale(&inv)
            }
            None => self.clone(),
        }
    }

    /// Multiply by the monomial that makes every exponent nonnegative and
    /// removes common monomial factors in `vars`. Returns the shifted poly
    /// and the exponent shift applied.
    pub fn clear_monomials(&self, vars: &[usize]) -> (Self, Exps) {
        let m = self.min_exps();
        let shift: Exps = (0..self.nvars)
            .map(|i| if vars.contains(&i) || m[i] < 0 { -m[i] } else { 0 })
            .collect();
        (self.mul_monomial(&shift), shift)
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        let (de, dc) = d.leading().map(|(e, c)| (e.clone(), c.clone()))?;
        let mut r = self.clone();
        let mut q = Self::zero(self.nvars);
        let mut guard = 0usize;
        while let Some((re, rc)) = r.leading().map(|(e, c)| (e.clone(), c.clone())) {
            guard += 1;
            if guard > 100_000 {
                return None;
            }
            let te: Exps = re.iter().zip(&de).map(|(a, b)| a - b).collect();
            if te.iter().any(|&x| x < 0) {
                return None;
            }
            let t = Self::monomial(self.nvars, te, rc / dc.clone());
            r = &r - &(&t * d);
            q = q + t;
        }
        Some(q)
    }

    fn lowest_var(a: &Self, b: &Self) -> Option<usize> {
        (0..a.nvars).find(|&i| a.uses_var(i) || b.uses_var(i))
    }

    /// Content with respect to variable `v`: gcd of the coefficients in `v`.
    pub fn content_in(&self, v: usize) -> Self {
        let mut g = Self::zero(self.nvars);
        for c in self.coeffs_in(v) {
            g = Self::gcd(&g, &c);
            if g.is_constant() && !g.is_zero() {
                return Self::one(self.nvars);
            }
        }
        g
    }

    fn primitive_in(&self, v: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let c = self.content_in(v);
        self.div_exact(&c).expect("content divides")
    }

    fn prem(a: &Self, b: &Self, v: usize) -> Self {
        let db = b.degree_in(v);
        let lb = b.coeffs_in(v).pop().unwrap();
        let mut r = a.clone();
        while !r.is_zero() && r.degree_in(v) >= db {
            let dr = r.degree_in(v);
            let lr = r.coeffs_in(v).pop().unwrap();
            let mut e = vec![0; a.nvars];
            e[v] = dr - db;
            let t = lr.mul_monomial(&e);
            r = &(&lb * &r) - &(&t * b);
        }
        r
    }

    /// Greatest common divisor (monic), via recursive primitive remainder
    /// sequences. Inputs must have nonnegative exponents.
    pub fn gcd(a: &Self, b: &Self) -> Self {
        if a.is_zero() {
            return b.monic();
        }
        if b.is_zero() {
            return a.monic();
        }
        let v = match Self::lowest_var(a, b) {
            Some(v) => v,
            None => return Self::one(a.nvars),
        };
        if !a.uses_var(v) {
            return Self::gcd(a, &b.content_in(v));
        }
        if !b.uses_var(v) {
            return Self::gcd(&a.content_in(v), b);
        }
        let ca = a.content_in(v);
        let cb = b.content_in(v);
        let gc = Self::gcd(&ca, &cb);
        let mut p = a.div_exact(&ca).unwrap();
        let mut q = b.div_exact(&cb).unwrap();
        let g = loop {
            if p.degree_in(v) < q.degree_in(v) {
                std::mem::swap(&mut p, &mut q);
            }
            let r = Self::prem(&p, &q, v);
            if r.is_zero() {
                break q;
            }
            if r.degree_in(v) == 0 {
                break Self::one(a.nvars);
            }
            p = q;
            q = r.primitive_in(v);
        };
        (&gc * &g.primitive_in(v)).monic()
    }

    /// Numeric copy with the listed variables substituted by values.
    /// The remaining variables keep their indices.
    pub fn bind<T: Real>(&self, values: &[(usize, T)]) -> Poly<f64> {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut coef = rat_to_f64(c);
            let mut ne = e.clone();
            for &(i, val) in values {
                if e[i] != 0 {
                    coef *= val.to_f64().unwrap().powi(e[i]);
                    ne[i] = 0;
                }
            }
            out.add_term(ne, coef);
        }
        out
    }

    pub fn is_positive_constant(&self) -> bool {
        self.is_constant() && self.constant_term().is_positive()
    }
}

// ---------------------------------------------------------------------------
// compiled numeric polynomials

/// Polynomial over `dim` variables with real coefficients, ready for
/// repeated evaluation at reals or jets.
#[derive(Clone, Debug)]
pub struct NumPoly<T> {
    dim: usize,
    terms: Vec<(Vec<u32>, T)>,
}

impl<T: Real> NumPoly<T> {
    /// Compile `p`, keeping the variables `vars` (in order) and requiring
    /// every other variable to be absent.
    pub fn compile(p: &Poly<f64>, vars: &[usize]) -> Result<Self, String> {
        let mut terms = Vec::with_capacity(p.len());
        for (e, c) in p.terms() {
            for (i, &x) in e.iter().enumerate() {
                if x != 0 && !vars.contains(&i) {
                    return Err(format!("variable {i} is unbound"));
                }
                if x < 0 {
                    return Err(format!("negative power of state variable {i}"));
                }
            }
            let ex: Vec<u32> = vars.iter().map(|&v| e[v] as u32).collect();
            terms.push((ex, T::from_f64(*c).unwrap()));
        }
        Ok(NumPoly { dim: vars.len(), terms })
    }

    pub fn zero(dim: usize) -> Self {
        NumPoly { dim, terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval<X: Ring<T>>(&self, x: &[X]) -> X {
        let mut acc = X::cst(T::zero());
        for (e, c) in &self.terms {
            let mut t = X::cst(*c);
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t = t * xi.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne[i] -= 1;
            terms.push((ne, *c * T::from_u32(e[i]).unwrap()));
        }
        NumPoly { dim: self.dim, terms }
    }
}
