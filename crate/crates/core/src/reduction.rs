//! Oblique projectors and the parametrization method for the slow manifold
//! and slow vector field, evaluated pointwise with jets.

use serde_json::{json, Value};

use crate::epsilon::{EpsilonSystem, Factorization};
use crate::error::{Error, Result, Stage};
use crate::geometry::{implicit_jet, solve_graph, Branch, ChartSplit, ManifoldPoint};
use crate::jet::Jet;
use crate::linalg;
use crate::poly::{NumPoly, Poly, Rational};
use crate::scalar::Real;

pub const MAX_ORDER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeftInverse {
    /// `(I_k 0)` in the chart split.
    Coordinate,
    MoorePenrose,
}

#[derive(Clone, Debug)]
pub struct Projectors<T> {
    pub pi_s: Vec<Vec<T>>,
    pub pi_n: Vec<Vec<T>>,
    /// r × k tangent frame of the graph.
    pub dphi0: Vec<Vec<T>>,
    /// k × r.
    pub dphi0_left: Vec<Vec<T>>,
    pub df0: Vec<T>,
    pub df0_right: Vec<T>,
    pub n0: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct ReductionJet<T> {
    pub rho: Vec<T>,
    /// ψ₀ … ψ_order at ρ.
    pub psi: Vec<T>,
    /// ∂ψⱼ/∂ρ for a one-dimensional base, else empty.
    pub dpsi: Vec<T>,
    /// R₁ … R_order, each a k-vector.
    pub r_terms: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
    pub order: usize,
}

impl<T: Real> ReductionJet<T> {
    /// First nonzero slow-field order at this point, with its value.
    pub fn leading_term(&self, tol: T) -> Option<(usize, &[T])> {
        self.r_terms
            .iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| v.abs() > tol))
            .map(|(j, r)| (j + 1, r.as_slice()))
    }

    pub fn to_json(&self, residual: Option<(f64, f64)>) -> Value {
        let f = |v: &T| v.to_f64().unwrap();
        let mut out = json!({
            "rho": self.rho.iter().map(f).collect::<Vec<_>>(),
            "eigenvalues": self.eigenvalues.iter().map(f).collect::<Vec<_>>(),
        });
        for (j, p) in self.psi.iter().enumerate() {
            out[format!("psi{j}")] = json!(f(p));
        }
        for (j, r) in self.r_terms.iter().enumerate() {
            out[format!("R{}", j + 1)] = json!(r.iter().map(f).collect::<Vec<_>>());
        }
        if let Some((eps, res)) = residual {
            out["epsilon"] = json!(eps);
            out["residual"] = json!(res);
        }
        out
    }
}

type J<T, const N: usize> = Jet<T, N>;

/// Bound evaluator for one branch of one ε-system.
#[derive(Clone, Debug)]
pub struct Reducer<T: Real> {
    pub branch: Branch<T>,
    pub left: LeftInverse,
    /// `derivs[i][m][c]`: m-th η-derivative of component c of Fᵢ.
    derivs: Vec<Vec<Vec<NumPoly<T>>>>,
    dim: usize,
}

impl<T: Real> Reducer<T> {
    pub fn new(eps: &EpsilonSystem, fact: &Factorization, split: &ChartSplit, tilde: &[f64]) -> Result<Self> {
        if fact.degenerate {
            return Err(Error::unsupported(
                Stage::Projector,
                format!("branch {} is degenerate; its reduction needs a blow-up", fact.branch_id),
            ));
        }
        let branch = Branch::bind(fact, split, tilde)?;
        let dim = eps.dim;
        let vars: Vec<usize> = (0..dim).collect();
        let bind: Vec<(usize, f64)> = tilde.iter().enumerate().map(|(k, &v)| (dim + k, v)).collect();
        let comp = |p: &Poly<Rational>| -> Result<NumPoly<T>> {
            NumPoly::compile(&p.bind(&bind), &vars).map_err(|e| Error::invalid(Stage::Parametrize, e))
        };
        let mut derivs = Vec::new();
        for (i, term) in eps.terms.iter().enumerate() {
            let top = MAX_ORDER.saturating_sub(i);
            let mut by_m = Vec::new();
            let mut cur: Vec<Poly<Rational>> = term.clone();
            for _ in 0..=top {
                by_m.push(cur.iter().map(comp).collect::<Result<Vec<_>>>()?);
                cur = cur.iter().map(|p| p.derivative(split.eta)).collect();
            }
            derivs.push(by_m);
        }
        Ok(Reducer { branch, left: LeftInverse::Coordinate, derivs, dim })
    }

    pub fn with_left_inverse(mut self, left: LeftInverse) -> Self {
        self.left = left;
        self
    }

    pub fn split(&self) -> &ChartSplit {
        &self.branch.split
    }

    pub fn k(&self) -> usize {
        self.branch.split.k()
    }

    fn term<X: crate::scalar::Ring<T>>(&self, i: usize, m: usize, y: &[X]) -> Vec<X> {
        match self.derivs.get(i).and_then(|d| d.get(m)) {
            Some(ps) => ps.iter().map(|p| p.eval(y)).collect(),
            None => vec![X::cst(T::zero()); self.dim],
        }
    }

    /// Full field `Σ εⁱ Fᵢ(y)` of the ε-system.
    pub fn field(&self, y: &[T], eps: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        let mut w = T::one();
        for i in 0..self.derivs.len() {
            for (o, v) in out.iter_mut().zip(self.term(i, 0, y)) {
                *o = *o + w * v;
            }
            w = w * eps;
        }
        out
    }

    pub fn point(&self, rho: &[T], guess: Option<T>) -> Result<ManifoldPoint<T>> {
        solve_graph(&self.branch, rho, guess)
    }

    pub fn projectors(&self, point: &ManifoldPoint<T>) -> Result<Projectors<T>> {
        build_projectors(&self.branch, point, self.left)
    }

    /// R₁ through the explicit projector matrices.
    pub fn reduced_field_1(&self, rho: &[T], guess: Option<T>) -> Result<Vec<T>> {
        let p = self.point(rho, guess)?;
        let pr = self.projectors(&p)?;
        let g = self.term(1, 0, &p.y(self.split()));
        Ok(linalg::matvec(&pr.dphi0_left, &linalg::matvec(&pr.pi_s, &g)))
    }

    /// Homological solve: `(R, ψ)` from an inhomogeneity `G`.
    fn hom<const N: usize>(
        &self,
        n: &[J<T, N>],
        df: &[J<T, N>],
        lam: J<T, N>,
        dpsi0: &[J<T, N>],
        g: &[J<T, N>],
    ) -> Result<(Vec<J<T, N>>, J<T, N>)> {
        let split = self.split();
        let mut dg = J::constant(T::zero());
        for (a, b) in df.iter().zip(g) {
            dg = dg + *a * *b;
        }
        let ratio = dg / lam;
        let pis: Vec<J<T, N>> = g.iter().zip(n).map(|(gi, ni)| *gi - *ni * ratio).collect();
        let psi = -(ratio / df[split.eta]);
        let r = match self.left {
            LeftInverse::Coordinate => split.rho.iter().map(|&i| pis[i]).collect(),
            LeftInverse::MoorePenrose => {
                // (DφᵀDφ)⁻¹ Dφᵀ with Dφ = (I; ∇ψ₀)ᵀ
                let k = split.k();
                if k == 1 {
                    let d = dpsi0[0];
                    let num = pis[split.rho[0]] + d * pis[split.eta];
                    vec![num / (J::constant(T::one()) + d * d)]
                } else {
                    let d: Vec<T> = dpsi0.iter().map(|j| j.value()).collect();
                    let gram: Vec<Vec<T>> = (0..k)
                        .map(|a| (0..k).map(|b| if a == b { T::one() } else { T::zero() } + d[a] * d[b]).collect())
                        .collect();
                    let rhs: Vec<T> =
                        (0..k).map(|a| pis[split.rho[a]].value() + d[a] * pis[split.eta].value()).collect();
                    let x = linalg::solve(&gram, &rhs)
                        .ok_or_else(|| Error::numerical(Stage::Projector, "singular Gram matrix"))?;
                    x.into_iter().map(J::constant).collect()
                }
            }
        };
        Ok((r, psi))
    }

    fn run<const N: usize>(&self, rho: &[J<T, N>], eta0: T, order: usize) -> Result<(J<T, N>, Vec<Vec<J<T, N>>>, Vec<J<T, N>>)> {
        let split = self.split();
        let e = split.eta;
        let zero = J::constant(T::zero());
        let psi0 = implicit_jet(&self.branch, rho, eta0)?;
        let y = split.assemble(rho, psi0);
        let n = self.branch.n0(&y);
        let df = self.branch.grad(&y);
        let mut lam = zero;
        for (a, b) in df.iter().zip(&n) {
            lam = lam + *a * *b;
        }
        let dpsi0: Vec<J<T, N>> = split.rho.iter().map(|&i| -(df[i] / df[e])).collect();
        // derivs_at[i][m] = ∂ᵐ_η Fᵢ at φ₀, scaled by 1/m!
        let mut derivs_at: Vec<Vec<Vec<J<T, N>>>> = Vec::new();
        for i in 0..=order {
            let mut by_m = Vec::new();
            let mut fact = T::one();
            for m in 0..=(order - i) {
                if m > 0 {
                    fact = fact * T::lit(m as f64);
                }
                let inv = T::one() / fact;
                by_m.push(self.term(i, m, &y).into_iter().map(|v| v.scale(inv)).collect());
            }
            derivs_at.push(by_m);
        }
        let mut rs: Vec<Vec<J<T, N>>> = Vec::new();
        let mut psis: Vec<J<T, N>> = Vec::new();
        for j in 1..=order {
            // δ = Σ_{m<j} εᵐψₘ as a series in ε; pw[m] = δᵐ truncated at εʲ
            let mut delta = vec![zero; j + 1];
            for (m, p) in psis.iter().enumerate() {
                delta[m + 1] = *p;
            }
            let mut pw: Vec<Vec<J<T, N>>> = vec![{
                let mut one = vec![zero; j + 1];
                one[0] = J::constant(T::one());
                one
            }];
            for m in 1..=j {
                let prev = &pw[m - 1];
                let mut next = vec![zero; j + 1];
                for a in 0..=j {
                    for b in 1..=(j - a) {
                        next[a + b] = next[a + b] + prev[a] * delta[b];
                    }
                }
                pw.push(next);
            }
            let mut g = vec![zero; self.dim];
            for (i, by_m) in derivs_at.iter().enumerate().take(j + 1) {
                let need = j - i;
                for (m, d) in by_m.iter().enumerate().take(need + 1) {
                    let w = pw[m][need];
                    for c in 0..self.dim {
                        g[c] = g[c] + d[c] * w;
                    }
                }
            }
            for i in 1..j {
                g[e] = g[e] - psis[i - 1].diff() * rs[j - i - 1][0];
            }
            let (r, p) = self.hom(&n, &df, lam, &dpsi0, &g)?;
            rs.push(r);
            psis.push(p);
        }
        Ok((psi0, rs, psis))
    }

    pub fn parametrize(&self, rho: &[T], order: usize, guess: Option<T>) -> Result<ReductionJet<T>> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::unsupported(Stage::Parametrize, format!("order {order} is outside 1..={MAX_ORDER}")));
        }
        let k = self.k();
        if k > 1 && order > 1 {
            return Err(Error::unsupported(
                Stage::Parametrize,
                "orders above one need a one-dimensional slow base",
            ));
        }
        let point = self.point(rho, guess)?;
        if !point.hyperbolic {
            return Err(Error::unsupported(Stage::Projector, "point is not normally hyperbolic; projector undefined"));
        }
        let (psi, dpsi, r_terms) = if k == 1 {
            let s: [J<T, { MAX_ORDER + 1 }>; 1] = [Jet::variable(rho[0])];
            let (p0, rs, ps) = self.run(&s, point.eta, order)?;
            let mut psi = vec![p0.value()];
            let mut dpsi = vec![p0.derivative(1)];
            for p in &ps {
                psi.push(p.value());
                dpsi.push(p.derivative(1));
            }
            (psi, dpsi, rs.iter().map(|r| r.iter().map(|j| j.value()).collect()).collect())
        } else {
            let s: Vec<J<T, 1>> = rho.iter().map(|&v| Jet::constant(v)).collect();
            let (p0, rs, ps) = self.run(&s, point.eta, order)?;
            let mut psi = vec![p0.value()];
            psi.extend(ps.iter().map(|p| p.value()));
            (psi, Vec::new(), rs.iter().map(|r| r.iter().map(|j| j.value()).collect()).collect())
        };
        Ok(ReductionJet { rho: rho.to_vec(), psi, dpsi, r_terms, eigenvalues: point.eigenvalues, order })
    }

    /// Point `φ(ρ, ε)` of the truncated slow manifold.
    pub fn embed(&self, jet: &ReductionJet<T>, eps: T) -> Vec<T> {
        let mut eta = T::zero();
        let mut w = T::one();
        for p in &jet.psi {
            eta = eta + w * *p;
            w = w * eps;
        }
        self.split().assemble(&jet.rho, eta)
    }

    /// Slow field `Σ εʲ Rⱼ(ρ)` to the given order.
    pub fn slow_field(&self, rho: &[T], eps: T, order: usize, guess: Option<T>) -> Result<Vec<T>> {
        let jet = self.parametrize(rho, order, guess)?;
        let mut out = vec![T::zero(); rho.len()];
        let mut w = eps;
        for r in &jet.r_terms {
            for (o, v) in out.iter_mut().zip(r) {
                *o = *o + w * *v;
            }
            w = w * eps;
        }
        Ok(out)
    }

    /// ‖Dφ·εR − F(φ, ε)‖ for the truncated series (one-dimensional base).
    pub fn conjugacy_residual(&self, jet: &ReductionJet<T>, eps: T) -> Result<T> {
        if self.k() != 1 {
            return Err(Error::unsupported(Stage::Parametrize, "residual needs a one-dimensional slow base"));
        }
        let m = jet.order;
        let mut eta = T::zero();
        let mut deta = T::zero();
        let mut w = T::one();
        for j in 0..=m {
            eta = eta + w * jet.psi[j];
            deta = deta + w * jet.dpsi[j];
            w = w * eps;
        }
        let mut r = T::zero();
        let mut w = T::one();
        for rj in &jet.r_terms {
            r = r + w * rj[0];
            w = w * eps;
        }
        let split = self.split();
        let y = split.assemble(&jet.rho, eta);
        let mut lhs = vec![T::zero(); self.dim];
        lhs[split.rho[0]] = eps * r;
        lhs[split.eta] = deta * eps * r;
        let f = self.field(&y, eps);
        Ok(linalg::norm(&lhs.iter().zip(&f).map(|(a, b)| *a - *b).collect::<Vec<_>>()))
    }
}

pub fn build_projectors<T: Real>(branch: &Branch<T>, point: &ManifoldPoint<T>, left: LeftInverse) -> Result<Projectors<T>> {
    if !point.hyperbolic {
        return Err(Error::unsupported(Stage::Projector, "point is not normally hyperbolic; projector undefined"));
    }
    let split = &branch.split;
    let r = split.dim();
    let k = split.k();
    let y = point.y(split);
    let df = branch.grad(&y);
    let n = branch.n0(&y);
    let lam = point.eigenvalues[0];
    let pi_n: Vec<Vec<T>> = (0..r).map(|i| (0..r).map(|j| n[i] * df[j] / lam).collect()).collect();
    let pi_s: Vec<Vec<T>> = (0..r)
        .map(|i| (0..r).map(|j| if i == j { T::one() } else { T::zero() } - pi_n[i][j]).collect())
        .collect();
    let fe = df[split.eta];
    let mut dphi0 = vec![vec![T::zero(); k]; r];
    for (a, &i) in split.rho.iter().enumerate() {
        dphi0[i][a] = T::one();
        dphi0[split.eta][a] = -df[i] / fe;
    }
    let dphi0_left = match left {
        LeftInverse::Coordinate => {
            let mut l = vec![vec![T::zero(); r]; k];
            for (a, &i) in split.rho.iter().enumerate() {
                l[a][i] = T::one();
            }
            l
        }
        LeftInverse::MoorePenrose => {
            let t: Vec<Vec<T>> = (0..k).map(|a| (0..r).map(|i| dphi0[i][a]).collect()).collect();
            let gram = linalg::matmul(&t, &dphi0);
            let inv = linalg::inverse(&gram).ok_or_else(|| Error::numerical(Stage::Projector, "singular Gram matrix"))?;
            linalg::matmul(&inv, &t)
        }
    };
    let nn = df.iter().fold(T::zero(), |a, v| a + *v * *v);
    let df0_right = df.iter().map(|v| *v / nn).collect();
    Ok(Projectors { pi_s, pi_n, dphi0, dphi0_left, df0: df, df0_right, n0: n })
}
