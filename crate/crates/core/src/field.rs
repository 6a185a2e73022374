//! Exact fields for linear algebra on stoichiometric matrices.

use std::fmt;

use num_traits::{One, Zero};

use crate::poly::{Poly, Rational};

pub trait Field: Clone + PartialEq + fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
}

impl Field for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

/// Rational function in one indeterminate, kept in lowest terms with a
/// monic denominator.
#[derive(Clone, PartialEq)]
pub struct RatFunc {
    num: Poly<Rational>,
    den: Poly<Rational>,
}

impl RatFunc {
    pub fn new(num: Poly<Rational>, den: Poly<Rational>) -> Self {
        assert_eq!(num.nvars(), 1);
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Self::constant(<Rational as Zero>::zero());
        }
        let g = Poly::gcd(&num, &den);
        let mut n = num.div_exact(&g).unwrap();
        let mut d = den.div_exact(&g).unwrap();
        let lc = d.leading().unwrap().1.clone();
        n = n.scale(&lc.recip());
        d = d.scale(&lc.recip());
        RatFunc { num: n, den: d }
    }

    pub fn constant(c: Rational) -> Self {
        RatFunc { num: Poly::constant(1, c), den: Poly::one(1) }
    }

    /// `c · t^k` for the indeterminate `t`.
    pub fn scaled_symbol(c: Rational, k: u32) -> Self {
        let mut num = Poly::constant(1, c);
        if k > 0 {
            num = num.mul_monomial(&[k as i32]);
        }
        Self::new(num, Poly::one(1))
    }

    pub fn num(&self) -> &Poly<Rational> {
        &self.num
    }

    pub fn den(&self) -> &Poly<Rational> {
        &self.den
    }

    /// As a Laurent polynomial `Σ c_k t^k` when the denominator is a monomial.
    pub fn as_laurent(&self) -> Option<Vec<(i32, Rational)>> {
        if self.den.len() != 1 {
            return None;
        }
        let (e, c) = self.den.leading().unwrap();
        let shift = e[0];
        Some(self.num.terms().map(|(ne, nc)| (ne[0] - shift, nc / c)).collect())
    }

    pub fn render(&self, symbol: &str) -> String {
        let names = [symbol.to_string()];
        if self.den.is_constant() {
            self.num.fmt_with(&names)
        } else {
            format!("({})/({})", self.num.fmt_with(&names), self.den.fmt_with(&names))
        }
    }
}

impl fmt::Debug for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render("t"))
    }
}

impl Field for RatFunc {
    fn zero() -> Self {
        Self::constant(<Rational as Zero>::zero())
    }
    fn one() -> Self {
        Self::constant(<Rational as One>::one())
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        Self::new(&(&self.num * &o.den) + &(&o.num * &self.den), &self.den * &o.den)
    }
    fn sub(&self, o: &Self) -> Self {
        Self::new(&(&self.num * &o.den) - &(&o.num * &self.den), &self.den * &o.den)
    }
    fn mul(&self, o: &Self) -> Self {
        Self::new(&self.num * &o.num, &self.den * &o.den)
    }
    fn div(&self, o: &Self) -> Self {
        assert!(!o.is_zero(), "division by zero");
        Self::new(&self.num * &o.den, &self.den * &o.num)
    }
}

/// Reduced row-echelon form in place; returns pivot columns.
pub fn rref<F: Field>(m: &mut [Vec<F>]) -> Vec<usize> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = F::one().div(&m[r][c]);
        for j in 0..cols {
            m[r][j] = m[r][j].mul(&inv);
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let t = f.mul(&m[r][j]);
                    m[i][j] = m[i][j].sub(&t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Basis of `{x : A x = 0}` for an `rows × cols` matrix, plus rank.
pub fn nullspace<F: Field>(a: &[Vec<F>], cols: usize) -> (Vec<Vec<F>>, usize) {
    let mut m: Vec<Vec<F>> = a.to_vec();
    let pivots = rref(&mut m);
    let rank = pivots.len();
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![F::zero(); cols];
        v[free] = F::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = F::zero().sub(&m[i][free]);
        }
        basis.push(v);
    }
    (basis, rank)
}

/// Inverse of a square matrix, `None` when singular.
pub fn inverse<F: Field>(a: &[Vec<F>]) -> Option<Vec<Vec<F>>> {
    let n = a.len();
    let mut m: Vec<Vec<F>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { F::one() } else { F::zero() }));
            r
        })
        .collect();
    let piv = rref(&mut m);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}
