//! Critical manifolds as graphs, hyperbolicity, and the fibre/form taxonomy
//! of the two-dimensional Michaelis-Menten chart.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::epsilon::{Factorization, RootSign};
use crate::error::{Error, Result, Stage};
use crate::jet::Jet;
use crate::poly::{NumPoly, Poly, Rational};
use crate::scalar::{Real, Ring};

pub const HYPERBOLIC_TOL: f64 = 1e-8;
const NEWTON_MAX: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

/// Chart coordinates split into base `ρ` and the solved coordinate `η`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartSplit {
    pub rho: Vec<usize>,
    pub eta: usize,
}

impl ChartSplit {
    pub fn new(dim: usize, eta: usize) -> Result<Self> {
        if eta >= dim {
            return Err(Error::invalid(Stage::Geometry, format!("eta index {eta} outside chart of dimension {dim}")));
        }
        Ok(ChartSplit { rho: (0..dim).filter(|&i| i != eta).collect(), eta })
    }

    /// The last chart coordinate is solved for.
    pub fn last(dim: usize) -> Self {
        Self::new(dim, dim - 1).expect("nonempty chart")
    }

    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn dim(&self) -> usize {
        self.rho.len() + 1
    }

    pub fn assemble<X: Clone>(&self, rho: &[X], eta: X) -> Vec<X> {
        let mut y: Vec<Option<X>> = vec![None; self.dim()];
        for (k, &i) in self.rho.iter().enumerate() {
            y[i] = Some(rho[k].clone());
        }
        y[self.eta] = Some(eta);
        y.into_iter().map(|v| v.unwrap()).collect()
    }
}

/// A factorization with tilde parameters bound, compiled for evaluation.
#[derive(Clone, Debug)]
pub struct Branch<T: Real> {
    pub split: ChartSplit,
    pub branch_id: String,
    pub degenerate: bool,
    pub root: Option<RootSign>,
    /// N₀ does not depend on the state.
    pub n0_constant: bool,
    f0: NumPoly<T>,
    grad: Vec<NumPoly<T>>,
    n0: Vec<NumPoly<T>>,
    /// Coefficients of f₀ in powers of η, when its degree in η is at most 2.
    eta_coeffs: Option<Vec<NumPoly<T>>>,
}

fn compile<T: Real>(p: &Poly<Rational>, dim: usize, bind: &[(usize, f64)]) -> Result<NumPoly<T>> {
    let vars: Vec<usize> = (0..dim).collect();
    NumPoly::compile(&p.bind(bind), &vars).map_err(|e| Error::invalid(Stage::Geometry, e))
}

impl<T: Real> Branch<T> {
    pub fn bind(fact: &Factorization, split: &ChartSplit, tilde: &[f64]) -> Result<Self> {
        let dim = fact.dim;
        if split.dim() != dim {
            return Err(Error::invalid(Stage::Geometry, "chart split does not match the system dimension"));
        }
        if tilde.len() + dim != fact.names.len() {
            return Err(Error::invalid(Stage::Geometry, "wrong number of tilde values"));
        }
        let bind: Vec<(usize, f64)> = tilde.iter().enumerate().map(|(k, &v)| (dim + k, v)).collect();
        let f0 = compile(&fact.f0, dim, &bind)?;
        let grad = (0..dim).map(|i| compile(&fact.f0.derivative(i), dim, &bind)).collect::<Result<_>>()?;
        let n0 = fact.n0.iter().map(|p| compile(p, dim, &bind)).collect::<Result<_>>()?;
        let eta_coeffs = if fact.f0.min_exp_in(split.eta) >= 0 && fact.f0.degree_in(split.eta) <= 2 {
            Some(fact.f0.coeffs_in(split.eta).iter().map(|p| compile(p, dim, &bind)).collect::<Result<_>>()?)
        } else {
            None
        };
        let root = if split.eta == fact.quad_var { fact.root } else { None };
        let n0_constant = fact.n0.iter().all(|p| (0..dim).all(|i| !p.uses_var(i)));
        Ok(Branch {
            split: split.clone(),
            branch_id: fact.branch_id.clone(),
            degenerate: fact.degenerate,
            root,
            n0_constant,
            f0,
            grad,
            n0,
            eta_coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.split.dim()
    }

    pub fn f0<X: Ring<T>>(&self, y: &[X]) -> X {
        self.f0.eval(y)
    }

    pub fn grad<X: Ring<T>>(&self, y: &[X]) -> Vec<X> {
        self.grad.iter().map(|g| g.eval(y)).collect()
    }

    pub fn n0<X: Ring<T>>(&self, y: &[X]) -> Vec<X> {
        self.n0.iter().map(|g| g.eval(y)).collect()
    }

    /// `Df₀·N₀`, the nontrivial eigenvalue for codimension one.
    pub fn lambda<X: Ring<T>>(&self, y: &[X]) -> X {
        let g = self.grad(y);
        let n = self.n0(y);
        let mut acc = X::cst(T::zero());
        for (a, b) in g.into_iter().zip(n) {
            acc = acc + a * b;
        }
        acc
    }

    pub fn d_eta(&self, y: &[T]) -> T {
        self.grad[self.split.eta].eval(y)
    }

    /// Real roots of f₀ in η at fixed ρ when f₀ is at most quadratic in η,
    /// sorted ascending.
    pub fn eta_roots(&self, rho: &[T]) -> Option<Vec<T>> {
        let cs = self.eta_coeffs.as_ref()?;
        let y = self.split.assemble(rho, T::zero());
        let c: Vec<T> = cs.iter().map(|p| p.eval(&y)).collect();
        let tiny = T::lit(1e-300);
        let a = if c.len() > 2 { c[2] } else { T::zero() };
        let b = if c.len() > 1 { c[1] } else { T::zero() };
        let d = c[0];
        if a.abs() <= tiny {
            if b.abs() <= tiny {
                return Some(Vec::new());
            }
            return Some(vec![-d / b]);
        }
        let disc = b * b - T::lit(4.0) * a * d;
        if disc < T::zero() {
            return Some(Vec::new());
        }
        // cancellation-free pair
        let q = -(b + b.signum() * disc.sqrt()) / T::lit(2.0);
        let mut r = if q == T::zero() { vec![T::zero(), T::zero()] } else { vec![q / a, d / q] };
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Some(r)
    }

    /// Initial η for Newton at ρ.
    pub fn seed(&self, rho: &[T], guess: Option<T>) -> Option<T> {
        if let Some(roots) = self.eta_roots(rho) {
            if roots.len() == 2 {
                if let Some(sign) = self.root {
                    return Some(match sign {
                        RootSign::Lower => roots[0],
                        RootSign::Upper => roots[1],
                    });
                }
            }
            if let Some(g) = guess {
                return roots.into_iter().min_by(|a, b| (*a - g).abs().partial_cmp(&(*b - g).abs()).unwrap()).or(Some(g));
            }
            if !roots.is_empty() {
                let inside = roots.iter().copied().find(|r| *r >= T::zero() && *r <= T::one());
                return inside.or(Some(roots[0]));
            }
        }
        if guess.is_some() {
            return guess;
        }
        // coarse scan for a sign change on [0, 1]
        let n = 40;
        let mut prev: Option<(T, T)> = None;
        for i in 0..=n {
            let e = T::lit(i as f64 / n as f64);
            let v = self.f0(&self.split.assemble(rho, e));
            if let Some((pe, pv)) = prev {
                if pv * v <= T::zero() {
                    return Some((pe + e) / T::lit(2.0));
                }
            }
            prev = Some((e, v));
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldPoint<T> {
    pub rho: Vec<T>,
    pub eta: T,
    pub eigenvalues: Vec<T>,
    pub hyperbolic: bool,
    pub attracting: bool,
    pub residual: T,
}

impl<T: Real> ManifoldPoint<T> {
    pub fn y(&self, split: &ChartSplit) -> Vec<T> {
        split.assemble(&self.rho, self.eta)
    }
}

pub fn solve_graph<T: Real>(branch: &Branch<T>, rho: &[T], eta_guess: Option<T>) -> Result<ManifoldPoint<T>> {
    if rho.len() != branch.split.k() {
        return Err(Error::invalid(Stage::Geometry, "rho has the wrong dimension"));
    }
    let mut eta = branch
        .seed(rho, eta_guess)
        .ok_or_else(|| Error::numerical(Stage::Geometry, format!("no point of branch {} above rho", branch.branch_id)))?;
    let tol = T::lit(NEWTON_TOL);
    let res = |e: T| branch.f0(&branch.split.assemble(rho, e));
    let mut r = res(eta);
    let mut it = 0;
    while r.abs() > tol {
        if it == NEWTON_MAX {
            return Err(Error::numerical(
                Stage::Geometry,
                format!("Newton did not converge on branch {} (residual {:e})", branch.branch_id, r.to_f64().unwrap()),
            ));
        }
        it += 1;
        let d = branch.d_eta(&branch.split.assemble(rho, eta));
        if d.abs() <= T::lit(1e-14) {
            return Err(Error::numerical(
                Stage::Geometry,
                format!("df0/deta vanishes: branch {} is not a graph over rho here", branch.branch_id),
            ));
        }
        let step = r / d;
        let mut t = T::one();
        loop {
            let cand = eta - t * step;
            let rc = res(cand);
            if rc.abs() < r.abs() || t < T::lit(1e-6) {
                eta = cand;
                r = rc;
                break;
            }
            t = t / T::lit(2.0);
        }
    }
    let y = branch.split.assemble(rho, eta);
    if branch.d_eta(&y).abs() <= T::lit(1e-14) {
        return Err(Error::numerical(Stage::Geometry, "df0/deta vanishes at the solution; graph property lost"));
    }
    let lam = branch.lambda(&y);
    let hyperbolic = lam.abs() > T::lit(HYPERBOLIC_TOL);
    Ok(ManifoldPoint {
        rho: rho.to_vec(),
        eta,
        eigenvalues: vec![lam],
        hyperbolic,
        attracting: hyperbolic && lam < T::zero(),
        residual: r.abs(),
    })
}

/// ψ₀ along a jet curve ρ(h), given the base value η₀ = ψ₀(ρ(0)).
pub fn implicit_jet<T: Real, const N: usize>(branch: &Branch<T>, rho: &[Jet<T, N>], eta0: T) -> Result<Jet<T, N>> {
    let rho0: Vec<T> = rho.iter().map(|j| j.value()).collect();
    let fe = branch.d_eta(&branch.split.assemble(&rho0, eta0));
    if fe.abs() <= T::lit(1e-14) {
        return Err(Error::numerical(Stage::Geometry, "singular df0/deta in implicit differentiation"));
    }
    let inv = T::one() / fe;
    let mut eta = Jet::constant(eta0);
    for _ in 0..N {
        let r = branch.f0(&branch.split.assemble(rho, eta));
        eta = eta - r.scale(inv);
    }
    eta.c[0] = eta0;
    Ok(eta)
}

/// `[ψ₀, ψ₀′, …, ψ₀^(order)]` for a one-dimensional base.
pub fn graph_derivatives<T: Real>(branch: &Branch<T>, point: &ManifoldPoint<T>, order: usize) -> Result<Vec<T>> {
    if branch.split.k() != 1 {
        return Err(Error::unsupported(Stage::Geometry, "scalar derivatives need a one-dimensional base"));
    }
    if order > 3 {
        return Err(Error::unsupported(Stage::Geometry, "derivatives above third order"));
    }
    let j: Jet<T, 4> = implicit_jet(branch, &[Jet::variable(point.rho[0])], point.eta)?;
    Ok((0..=order).map(|k| j.derivative(k)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FiberClass {
    S,
    R,
    T,
    Unclassified,
}

impl fmt::Display for FiberClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiberClass::S => "S",
            FiberClass::R => "R",
            FiberClass::T => "T",
            FiberClass::Unclassified => "unclassified",
        })
    }
}

pub fn classify_fibers(fact: &Factorization) -> FiberClass {
    if fact.dim != 2 {
        return FiberClass::Unclassified;
    }
    match (fact.n0[0].is_zero(), fact.n0[1].is_zero()) {
        (true, false) => FiberClass::S,
        (false, true) => FiberClass::R,
        (false, false) => FiberClass::T,
        (true, true) => FiberClass::Unclassified,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Form {
    #[serde(rename = "1")]
    F1,
    #[serde(rename = "2a")]
    F2a,
    #[serde(rename = "2b")]
    F2b,
    #[serde(rename = "3")]
    F3,
    #[serde(rename = "4")]
    F4,
    #[serde(rename = "5a")]
    F5a,
    #[serde(rename = "5b")]
    F5b,
    #[serde(rename = "5c")]
    F5c,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::F1 => "1",
            Form::F2a => "2a",
            Form::F2b => "2b",
            Form::F3 => "3",
            Form::F4 => "4",
            Form::F5a => "5a",
            Form::F5b => "5b",
            Form::F5c => "5c",
            Form::Unclassified => "unclassified",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormInfo {
    pub form: Form,
    pub meta: BTreeMap<String, String>,
}

/// Form of the critical set from all branches of one configuration, on the
/// (s, c) chart.
pub fn classify_form(branches: &[Factorization]) -> FormInfo {
    let mut meta = BTreeMap::new();
    let unclassified = FormInfo { form: Form::Unclassified, meta: BTreeMap::new() };
    let Some(first) = branches.first() else {
        return unclassified;
    };
    if first.dim != 2 {
        return unclassified;
    }
    let names = &first.names;
    let nv = names.len();
    let (s, c) = (0usize, 1usize);
    let mut factors: Vec<Poly<Rational>> = Vec::new();
    for b in branches {
        let m = b.f0.monic();
        if !factors.contains(&m) {
            factors.push(m);
        }
    }
    let cvar = Poly::<Rational>::var(nv, c);
    let one = Poly::<Rational>::one(nv);
    let c_minus_1 = (&cvar - &one).monic();
    let is_c = |f: &Poly<Rational>| *f == cvar;
    let is_c1 = |f: &Poly<Rational>| *f == c_minus_1;
    let render = |p: &Poly<Rational>| p.fmt_with(names);

    match factors.len() {
        1 => {
            let f = &factors[0];
            if is_c(f) {
                return FormInfo { form: Form::F2b, meta };
            }
            if is_c1(f) {
                return FormInfo { form: Form::F5c, meta };
            }
            let dc = f.degree_in(c);
            if dc == 2 {
                let co = f.coeffs_in(c);
                meta.insert("a".into(), render(&co[2]));
                meta.insert("b".into(), render(&co[1]));
                meta.insert("d".into(), render(&co[0]));
                return FormInfo { form: Form::F3, meta };
            }
            if dc == 1 && f.uses_var(s) {
                // f = P c + Q, graph c = Q / (-P) = n / d
                let co = f.coeffs_in(c);
                let (mut n, mut d) = (co[0].clone(), -co[1].clone());
                let top = d.coeffs_in(s).pop().unwrap();
                if top.leading().is_some_and(|(_, v)| v < &num_traits::Zero::zero()) {
                    n = -n;
                    d = -d;
                }
                let delta = &d - &n;
                if !delta.uses_var(s) && !delta.uses_var(c) && !delta.is_zero() {
                    let n0 = n.substitute(s, &Poly::zero(nv));
                    let form = if n0.is_zero() { Form::F1 } else { Form::F4 };
                    meta.insert("delta".into(), render(&delta));
                    meta.insert("numerator".into(), render(&n));
                    return FormInfo { form, meta };
                }
            }
            unclassified
        }
        2 => {
            let has_c = factors.iter().any(|f| is_c(f));
            let has_c1 = factors.iter().any(|f| is_c1(f));
            if has_c && has_c1 {
                return FormInfo { form: Form::F5b, meta };
            }
            if !has_c1 {
                return unclassified;
            }
            let other = factors.iter().find(|f| !is_c1(f)).unwrap();
            if !other.uses_var(c) && other.degree_in(s) == 1 {
                let co = other.coeffs_in(s);
                let star = if co[1].is_constant() {
                    render(&(-&co[0]).scale(&co[1].constant_term().recip()))
                } else {
                    format!("({})/({})", render(&-&co[0]), render(&co[1]))
                };
                meta.insert("s_star".into(), star);
                return FormInfo { form: Form::F2a, meta };
            }
            if let Some(bi) = names.iter().position(|n| n == "beta") {
                let line = (&(&Poly::var(nv, s) + &(&Poly::var(nv, bi) * &cvar)) - &one).monic();
                if *other == line {
                    return FormInfo { form: Form::F5a, meta };
                }
            }
            unclassified
        }
        _ => unclassified,
    }
}
