//! Asymptotic scalings, ε-expansion of a reduced system and the
//! factorization `F₀ = N₀ f₀` of the leading-order field.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::crn::ReducedSystem;
use crate::error::{Error, Result, Stage};
use crate::poly::{Poly, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Small,
    One,
    Large,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Small, Category::One, Category::Large];

    /// Power of ε multiplying `μ̃`.
    pub fn exponent(self) -> i32 {
        match self {
            Category::Small => 1,
            Category::One => 0,
            Category::Large => -1,
        }
    }

    pub fn code(self) -> char {
        match self {
            Category::Small => 's',
            Category::One => 'o',
            Category::Large => 'l',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            's' => Some(Category::Small),
            'o' => Some(Category::One),
            'l' => Some(Category::Large),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Small => "small",
            Category::One => "one",
            Category::Large => "large",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingAssignment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub categories: BTreeMap<String, Category>,
    #[serde(default)]
    pub tilde: BTreeMap<String, f64>,
}

impl ScalingAssignment {
    /// Categories from a code like `"sosl"`, one letter per parameter.
    pub fn from_code(params: &[String], code: &str) -> Result<Self> {
        let chars: Vec<char> = code.chars().collect();
        if chars.len() != params.len() {
            return Err(Error::invalid(
                Stage::Scaling,
                format!("configuration '{code}' needs {} letters", params.len()),
            ));
        }
        let mut categories = BTreeMap::new();
        for (p, ch) in params.iter().zip(chars) {
            let c = Category::from_code(ch)
                .ok_or_else(|| Error::invalid(Stage::Scaling, format!("unknown category letter '{ch}'")))?;
            categories.insert(p.clone(), c);
        }
        Ok(ScalingAssignment { epsilon: None, categories, tilde: BTreeMap::new() })
    }

    pub fn code(&self, params: &[String]) -> String {
        params.iter().map(|p| self.categories.get(p).map_or('?', |c| c.code())).collect()
    }

    pub fn with_tilde(mut self, params: &[String], values: &[f64]) -> Self {
        for (p, v) in params.iter().zip(values) {
            self.tilde.insert(p.clone(), *v);
        }
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let s: Self = serde_json::from_value(v.clone())
            .map_err(|e| Error::invalid(Stage::Scaling, format!("malformed scaling: {e}")))?;
        if let Some(e) = s.epsilon {
            if !(e > 0.0) {
                return Err(Error::invalid(Stage::Scaling, "epsilon must be positive"));
            }
        }
        for (p, v) in &s.tilde {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(Stage::Scaling, format!("tilde value of '{p}' must be positive")));
            }
        }
        Ok(s)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("scaling serializes")
    }

    pub fn category(&self, name: &str) -> Option<Category> {
        self.categories.get(name).copied()
    }

    fn check_params(&self, params: &[String]) -> Result<()> {
        for p in params {
            if !self.categories.contains_key(p) {
                return Err(Error::invalid(Stage::Scaling, format!("parameter '{p}' has no category")));
            }
        }
        for k in self.categories.keys() {
            if !params.contains(k) {
                return Err(Error::invalid(Stage::Scaling, format!("'{k}' is not a parameter of the model")));
            }
        }
        Ok(())
    }

    /// Tilde values in parameter order.
    pub fn tilde_values(&self, params: &[String]) -> Result<Vec<f64>> {
        params
            .iter()
            .map(|p| {
                self.tilde
                    .get(p)
                    .copied()
                    .ok_or_else(|| Error::invalid(Stage::Scaling, format!("missing tilde value for parameter '{p}'")))
            })
            .collect()
    }

    /// Physical parameter values `ε^e μ̃` at a given ε.
    pub fn physical_values(&self, params: &[String], eps: f64) -> Result<Vec<f64>> {
        let t = self.tilde_values(params)?;
        Ok(params
            .iter()
            .zip(t)
            .map(|(p, v)| v * eps.powi(self.categories.get(p).map_or(0, |c| c.exponent())))
            .collect())
    }
}

/// `Σ εⁱ Fᵢ(y)` over the ring (chart coordinates ++ tilde parameters).
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonSystem {
    pub names: Vec<String>,
    pub dim: usize,
    pub terms: Vec<Vec<Poly<Rational>>>,
    /// The original field equals `ε^{-m} Σ εⁱ Fᵢ`.
    pub time_shift: i32,
    pub scaling: ScalingAssignment,
}

impl EpsilonSystem {
    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.names[self.dim..]
    }

    /// Highest ε-power present.
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn term(&self, i: usize) -> Option<&[Poly<Rational>]> {
        self.terms.get(i).map(|v| v.as_slice())
    }

    pub fn leading(&self) -> &[Poly<Rational>] {
        &self.terms[0]
    }

    pub fn tilde_values(&self) -> Result<Vec<f64>> {
        self.scaling.tilde_values(self.param_names())
    }

    /// `Σ εⁱ Fᵢ(y)` with tilde parameters bound.
    pub fn eval(&self, y: &[f64], tilde: &[f64], eps: f64) -> Vec<f64> {
        let mut point = y.to_vec();
        point.extend_from_slice(tilde);
        let mut out = vec![0.0; self.dim];
        let mut w = 1.0;
        for t in &self.terms {
            for (o, p) in out.iter_mut().zip(t) {
                *o += w * crate::crn::eval_f64(p, &point);
            }
            w *= eps;
        }
        out
    }

    pub fn render(&self) -> Vec<Vec<String>> {
        self.terms.iter().map(|t| t.iter().map(|p| p.fmt_with(&self.names)).collect()).collect()
    }
}

pub fn expand(reduced: &ReducedSystem, scaling: &ScalingAssignment) -> Result<EpsilonSystem> {
    let field = &reduced.field;
    let params = field.param_names().to_vec();
    scaling.check_params(&params)?;
    let dim = field.dim;
    let nv = field.nvars();
    let weights: Vec<i32> = (0..nv)
        .map(|i| if i < dim { 0 } else { scaling.categories[&field.names[i]].exponent() })
        .collect();
    let mut by_power: BTreeMap<i32, Vec<Poly<Rational>>> = BTreeMap::new();
    for (k, comp) in field.comps.iter().enumerate() {
        for (e, c) in comp.terms() {
            let pw: i32 = e.iter().zip(&weights).map(|(a, b)| a * b).sum();
            let slot = by_power.entry(pw).or_insert_with(|| vec![Poly::zero(nv); dim]);
            slot[k] = &slot[k] + &Poly::monomial(nv, e.clone(), c.clone());
        }
    }
    by_power.retain(|_, v| v.iter().any(|p| !p.is_zero()));
    let (&lo, _) = by_power
        .iter()
        .next()
        .ok_or_else(|| Error::invalid(Stage::Expand, "the field vanishes identically; not a perturbation problem"))?;
    let hi = *by_power.keys().next_back().unwrap();
    let terms = (lo..=hi)
        .map(|p| by_power.remove(&p).unwrap_or_else(|| vec![Poly::zero(nv); dim]))
        .collect();
    Ok(EpsilonSystem {
        names: field.names.clone(),
        dim,
        terms,
        time_shift: -lo,
        scaling: scaling.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Singularity {
    Singular { k: usize },
    NotSingular,
}

/// Polynomial with nonnegative exponents obtained by clearing negative
/// parameter powers; also returns the applied shift.
fn clear_negative(p: &Poly<Rational>) -> (Poly<Rational>, Vec<i32>) {
    p.clear_monomials(&[])
}

/// Common factor of the nonzero components of F₀.
fn common_factor(f0: &[Poly<Rational>]) -> Option<Poly<Rational>> {
    let mut g: Option<Poly<Rational>> = None;
    for p in f0.iter().filter(|p| !p.is_zero()) {
        let (q, _) = clear_negative(p);
        g = Some(match g {
            None => q.monic(),
            Some(h) => Poly::gcd(&h, &q),
        });
    }
    g
}

pub fn detect_singular(eps: &EpsilonSystem) -> Singularity {
    let chart: Vec<usize> = (0..eps.dim).collect();
    match common_factor(eps.leading()) {
        Some(g) if g.uses_any(&chart) => Singularity::Singular { k: eps.dim - 1 },
        _ => Singularity::NotSingular,
    }
}

/// Distinct factors of `g` that involve the chart variables.
pub fn chart_factors(g: &Poly<Rational>, chart: &[usize]) -> Vec<Poly<Rational>> {
    let nv = g.nvars();
    let mut out = Vec::new();
    let (h, shift) = g.clear_monomials(chart);
    for &v in chart {
        if shift[v] < 0 {
            out.push(Poly::var(nv, v));
        }
    }
    split_factors(&h, chart, &mut out);
    let mut uniq: Vec<Poly<Rational>> = Vec::new();
    for f in out {
        if !uniq.contains(&f) {
            uniq.push(f);
        }
    }
    uniq
}

fn split_factors(p: &Poly<Rational>, chart: &[usize], out: &mut Vec<Poly<Rational>>) {
    if !p.uses_any(chart) {
        return;
    }
    for &v in chart {
        if !p.uses_var(v) {
            continue;
        }
        let cont = p.content_in(v);
        if cont.uses_any(chart) {
            split_factors(&cont, chart, out);
            split_factors(&p.div_exact(&cont).expect("content divides"), chart, out);
            return;
        }
    }
    let mut q = p.clone();
    for &v in chart {
        if q.uses_var(v) {
            let c = q.content_in(v);
            if !c.is_constant() {
                q = q.div_exact(&c).expect("content divides");
            }
        }
    }
    for &v in chart {
        if q.uses_var(v) {
            let d = Poly::gcd(&q, &q.derivative(v));
            if d.uses_any(chart) {
                split_factors(&d, chart, out);
                split_factors(&q.div_exact(&d).expect("gcd divides"), chart, out);
                return;
            }
        }
    }
    out.push(q.monic());
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootSign {
    /// Smaller root of the quadratic (the negative square root).
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub names: Vec<String>,
    pub dim: usize,
    /// Single column of N₀ (codimension one).
    pub n0: Vec<Poly<Rational>>,
    pub f0: Poly<Rational>,
    pub codim: usize,
    pub branch_id: String,
    /// Root selection when `f0` is quadratic in `quad_var`.
    pub root: Option<RootSign>,
    pub quad_var: usize,
    /// N₀ degenerates along the branch (`f0` divides `Df₀·N₀`).
    pub degenerate: bool,
}

impl Factorization {
    /// `Df₀·N₀` as a polynomial.
    pub fn lambda(&self) -> Poly<Rational> {
        let mut acc = Poly::zero(self.names.len());
        for i in 0..self.dim {
            acc = &acc + &(&self.f0.derivative(i) * &self.n0[i]);
        }
        acc
    }

    pub fn product(&self) -> Vec<Poly<Rational>> {
        self.n0.iter().map(|n| n * &self.f0).collect()
    }

    pub fn render_n0(&self) -> Vec<String> {
        self.n0.iter().map(|p| p.fmt_with(&self.names)).collect()
    }

    pub fn render_f0(&self) -> String {
        self.f0.fmt_with(&self.names)
    }
}

pub fn factorize(eps: &EpsilonSystem) -> Result<Vec<Factorization>> {
    factorize_in(eps, eps.dim - 1)
}

/// Factorize with quadratic branches split as roots in chart variable `eta`.
pub fn factorize_in(eps: &EpsilonSystem, eta: usize) -> Result<Vec<Factorization>> {
    let chart: Vec<usize> = (0..eps.dim).collect();
    let f0 = eps.leading();
    let g = match common_factor(f0) {
        Some(g) if g.uses_any(&chart) => g,
        _ => {
            return Err(Error::unsupported(
                Stage::Factorize,
                "components of F0 share no factor; zero set has codimension >= 2 or is discrete",
            ))
        }
    };
    let cleared: Vec<(Poly<Rational>, Vec<i32>)> = f0.iter().map(clear_negative).collect();
    let mut out = Vec::new();
    for f in chart_factors(&g, &chart) {
        let mut n0 = Vec::with_capacity(eps.dim);
        for (q, shift) in &cleared {
            if q.is_zero() {
                n0.push(q.clone());
                continue;
            }
            let quot = q.div_exact(&f).ok_or_else(|| {
                Error::numerical(Stage::Factorize, "factor does not divide a component of F0")
            })?;
            let back: Vec<i32> = shift.iter().map(|x| -x).collect();
            n0.push(quot.mul_monomial(&back));
        }
        let mut f = f;
        if let Some(last) = n0.iter().rev().find(|p| !p.is_zero()) {
            if last.leading().unwrap().1.is_negative() {
                n0 = n0.into_iter().map(|p| -p).collect();
                f = -f;
            }
        }
        let mut fact = Factorization {
            names: eps.names.clone(),
            dim: eps.dim,
            n0,
            f0: f,
            codim: 1,
            branch_id: String::new(),
            root: None,
            quad_var: eta,
            degenerate: false,
        };
        let (lam, _) = clear_negative(&fact.lambda());
        fact.degenerate = lam.is_zero() || lam.div_exact(&fact.f0).is_some();
        let base = format!("{}=0", fact.f0.monic().fmt_with(&fact.names));
        if fact.f0.degree_in(eta) == 2 {
            for (sign, tag) in [(RootSign::Lower, "lower"), (RootSign::Upper, "upper")] {
                let mut b = fact.clone();
                b.root = Some(sign);
                b.branch_id = format!("{base}:{tag}");
                out.push(b);
            }
        } else {
            fact.branch_id = base;
            out.push(fact);
        }
    }
    Ok(out)
}
