//! Mass-action reaction networks, conservation laws and the reduction to a
//! stoichiometric compatibility class.

use std::collections::BTreeSet;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result, Stage};
use crate::field::{inverse, nullspace, rref, Field, RatFunc};
use crate::poly::{rat, rat_from_f64, Poly, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<u32>,
    pub products: Vec<u32>,
    /// Index into the parameter list; `None` is a unit rate constant.
    pub rate: Option<usize>,
}

/// A named polynomial vector field: the first `dim` names are state
/// variables, the rest are parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyField {
    pub names: Vec<String>,
    pub dim: usize,
    pub comps: Vec<Poly<Rational>>,
}

impl PolyField {
    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.names[self.dim..]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn render(&self) -> Vec<String> {
        self.comps.iter().map(|p| p.fmt_with(&self.names)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrnModel {
    species: Vec<String>,
    params: Vec<Param>,
    reactions: Vec<Reaction>,
    /// Optional parameter multiplying a species' row of the stoichiometry.
    scales: Vec<Option<usize>>,
    ics: Vec<Option<f64>>,
}

impl CrnModel {
    pub fn new(
        species: Vec<String>,
        params: Vec<Param>,
        reactions: Vec<Reaction>,
        scales: Vec<Option<usize>>,
        ics: Vec<Option<f64>>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &species {
            if !seen.insert(s.as_str()) {
                return Err(Error::invalid(Stage::Model, format!("duplicate species '{s}'")));
            }
        }
        let mut pseen = BTreeSet::new();
        for p in &params {
            if !pseen.insert(p.name.as_str()) {
                return Err(Error::invalid(Stage::Model, format!("duplicate parameter '{}'", p.name)));
            }
            if seen.contains(p.name.as_str()) {
                return Err(Error::invalid(Stage::Model, format!("'{}' is both species and parameter", p.name)));
            }
        }
        let n = species.len();
        for (j, r) in reactions.iter().enumerate() {
            if r.reactants.len() != n || r.products.len() != n {
                return Err(Error::invalid(Stage::Model, format!("reaction {j} has wrong arity")));
            }
            if let Some(k) = r.rate {
                if k >= params.len() {
                    return Err(Error::invalid(Stage::Model, format!("reaction {j} rate out of range")));
                }
            }
        }
        if scales.len() != n || ics.len() != n {
            return Err(Error::invalid(Stage::Model, "scale/ic vectors must match species"));
        }
        let symbols: BTreeSet<usize> = scales.iter().flatten().copied().collect();
        if symbols.len() > 1 {
            return Err(Error::unsupported(Stage::Model, "row scalings may use a single parameter symbol"));
        }
        if symbols.iter().any(|&k| k >= params.len()) {
            return Err(Error::invalid(Stage::Model, "row scaling names an unknown parameter"));
        }
        Ok(CrnModel { species, params, reactions, scales, ics })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn ics(&self) -> &[Option<f64>] {
        &self.ics
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn scale_symbol(&self) -> Option<usize> {
        self.scales.iter().flatten().copied().next()
    }

    /// Integer stoichiometry (product − reactant), n × m.
    pub fn integer_stoichiometry(&self) -> Vec<Vec<i64>> {
        let n = self.species.len();
        (0..n)
            .map(|i| {
                self.reactions
                    .iter()
                    .map(|r| r.products[i] as i64 - r.reactants[i] as i64)
                    .collect()
            })
            .collect()
    }

    /// Stoichiometry with row scalings, entries in the field of rational
    /// functions of the scaling symbol.
    pub fn stoichiometry(&self) -> Vec<Vec<RatFunc>> {
        self.integer_stoichiometry()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let k = u32::from(self.scales[i].is_some());
                row.into_iter().map(|v| RatFunc::scaled_symbol(rat(v, 1), k)).collect()
            })
            .collect()
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(v.clone())
            .map_err(|e| Error::invalid(Stage::Model, format!("malformed model: {e}")))?;
        file.into_model()
    }

    pub fn to_json(&self) -> Value {
        let mut params = Map::new();
        for p in &self.params {
            params.insert(p.name.clone(), p.value.map(Value::from).unwrap_or(Value::Null));
        }
        let stoich = |v: &[u32]| {
            let mut m = Map::new();
            for (i, &k) in v.iter().enumerate() {
                if k > 0 {
                    m.insert(self.species[i].clone(), Value::from(k));
                }
            }
            Value::Object(m)
        };
        let reactions: Vec<Value> = self
            .reactions
            .iter()
            .map(|r| {
                serde_json::json!({
                    "reactants": stoich(&r.reactants),
                    "products": stoich(&r.products),
                    "rate": r.rate.map(|k| Value::from(self.params[k].name.clone())).unwrap_or(Value::Null),
                })
            })
            .collect();
        let mut ics = Map::new();
        for (i, v) in self.ics.iter().enumerate() {
            if let Some(x) = v {
                ics.insert(self.species[i].clone(), Value::from(*x));
            }
        }
        let mut scale = Map::new();
        for (i, s) in self.scales.iter().enumerate() {
            if let Some(k) = s {
                scale.insert(self.species[i].clone(), Value::from(self.params[*k].name.clone()));
            }
        }
        let mut out = serde_json::json!({
            "species": self.species,
            "params": params,
            "reactions": reactions,
            "ics": ics,
        });
        if !scale.is_empty() {
            out["scale"] = Value::Object(scale);
        }
        out
    }

    pub fn builtin(id: &str) -> Result<Self> {
        let v = match id {
            "mm-reversible" => serde_json::json!({
                "species": ["s", "e", "c", "p"],
                "params": {"alpha": null, "beta": null, "gamma": null, "delta": null},
                "reactions": [
                    {"reactants": {"s": 1, "e": 1}, "products": {"c": 1}, "rate": null},
                    {"reactants": {"c": 1}, "products": {"s": 1, "e": 1}, "rate": "alpha"},
                    {"reactants": {"c": 1}, "products": {"e": 1, "p": 1}, "rate": "gamma"},
                    {"reactants": {"e": 1, "p": 1}, "products": {"c": 1}, "rate": "delta"}
                ],
                "ics": {"s": 1, "e": 1, "c": 0, "p": 0},
                "scale": {"s": "beta", "p": "beta"}
            }),
            "mm-irreversible" => serde_json::json!({
                "species": ["s", "e", "c", "p"],
                "params": {"alpha": null, "beta": null, "gamma": null},
                "reactions": [
                    {"reactants": {"s": 1, "e": 1}, "products": {"c": 1}, "rate": null},
                    {"reactants": {"c": 1}, "products": {"s": 1, "e": 1}, "rate": "alpha"},
                    {"reactants": {"c": 1}, "products": {"e": 1, "p": 1}, "rate": "gamma"}
                ],
                "ics": {"s": 1, "e": 1, "c": 0, "p": 0},
                "scale": {"s": "beta", "p": "beta"}
            }),
            "kim-forger" => serde_json::json!({
                "species": ["x", "y", "z", "s", "c"],
                "params": {
                    "alpha": 0.004, "beta": 1.0, "gamma": 1e-6,
                    "rho1": 5e-6, "rho2": 1e-6, "rho3": 1e-5,
                    "rho4": 1e-6, "rho5": 1e-6, "rho6": 1e-6
                },
                "reactions": [
                    {"reactants": {"s": 1}, "products": {"x": 1, "s": 1}, "rate": "rho1"},
                    {"reactants": {"x": 1}, "products": {}, "rate": "rho2"},
                    {"reactants": {"x": 1}, "products": {"x": 1, "y": 1}, "rate": "rho3"},
                    {"reactants": {"y": 1}, "products": {}, "rate": "rho4"},
                    {"reactants": {"y": 1}, "products": {"y": 1, "z": 1}, "rate": "rho5"},
                    {"reactants": {"z": 1}, "products": {}, "rate": "rho6"},
                    {"reactants": {"s": 1, "z": 1}, "products": {"c": 1}, "rate": null},
                    {"reactants": {"c": 1}, "products": {"s": 1, "z": 1}, "rate": "alpha"},
                    {"reactants": {"c": 1}, "products": {"s": 1}, "rate": "gamma"}
                ],
                "ics": {"x": 1, "y": 1, "z": 0.06128, "s": 0.06128, "c": 0.93872},
                "scale": {"s": "beta"}
            }),
            _ => return Err(Error::invalid(Stage::Model, format!("unknown built-in model '{id}'"))),
        };
        Self::from_json(&v)
    }
}

#[derive(Deserialize, Serialize)]
struct ReactionFile {
    #[serde(default)]
    reactants: Map<String, Value>,
    #[serde(default)]
    products: Map<String, Value>,
    #[serde(default)]
    rate: Option<String>,
}

#[derive(Deserialize, Serialize)]
struct ModelFile {
    species: Vec<String>,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default)]
    reactions: Vec<ReactionFile>,
    #[serde(default)]
    ics: Map<String, Value>,
    #[serde(default)]
    scale: Map<String, Value>,
}

impl ModelFile {
    fn into_model(self) -> Result<CrnModel> {
        let n = self.species.len();
        let sp_index = |name: &str| {
            self.species
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::invalid(Stage::Model, format!("unknown species '{name}'")))
        };
        let mut params = Vec::new();
        for (name, v) in &self.params {
            let value = match v {
                Value::Null => None,
                Value::Number(x) => x.as_f64(),
                _ => return Err(Error::invalid(Stage::Model, format!("parameter '{name}' must be a number or null"))),
            };
            params.push(Param { name: name.clone(), value });
        }
        let p_index = |name: &str| {
            params
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| Error::invalid(Stage::Model, format!("rate '{name}' is not a declared parameter")))
        };
        let stoich = |m: &Map<String, Value>| -> Result<Vec<u32>> {
            let mut v = vec![0u32; n];
            for (name, k) in m {
                let i = sp_index(name)?;
                let k = k
                    .as_i64()
                    .ok_or_else(|| Error::invalid(Stage::Model, format!("stoichiometry of '{name}' must be an integer")))?;
                if k < 0 {
                    return Err(Error::invalid(Stage::Model, format!("negative stoichiometry for '{name}'")));
                }
                v[i] = k as u32;
            }
            Ok(v)
        };
        let mut reactions = Vec::new();
        for r in &self.reactions {
            let rate = match r.rate.as_deref() {
                None | Some("1") => None,
                Some(name) => Some(p_index(name)?),
            };
            reactions.push(Reaction { reactants: stoich(&r.reactants)?, products: stoich(&r.products)?, rate });
        }
        let mut scales = vec![None; n];
        for (name, v) in &self.scale {
            let i = sp_index(name)?;
            let pname = v
                .as_str()
                .ok_or_else(|| Error::invalid(Stage::Model, "scale entries must name a parameter"))?;
            scales[i] = Some(p_index(pname)?);
        }
        let mut ics = vec![None; n];
        for (name, v) in &self.ics {
            let i = sp_index(name)?;
            ics[i] = v.as_f64();
        }
        CrnModel::new(self.species, params, reactions, scales, ics)
    }
}

/// `S·V(X)` over the ring (species ++ params).
pub fn build_rhs(model: &CrnModel) -> PolyField {
    let n = model.species.len();
    let p = model.params.len();
    let nv = n + p;
    let mut names = model.species.clone();
    names.extend(model.params.iter().map(|q| q.name.clone()));
    let mut comps = vec![Poly::zero(nv); n];
    for r in &model.reactions {
        let mut e = vec![0i32; nv];
        for (i, &k) in r.reactants.iter().enumerate() {
            e[i] = k as i32;
        }
        if let Some(k) = r.rate {
            e[n + k] += 1;
        }
        for i in 0..n {
            let net = r.products[i] as i64 - r.reactants[i] as i64;
            if net == 0 {
                continue;
            }
            let mut ei = e.clone();
            if let Some(k) = model.scales[i] {
                ei[n + k] += 1;
            }
            comps[i] = &comps[i] + &Poly::monomial(nv, ei, rat(net, 1));
        }
    }
    PolyField { names, dim: n, comps }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservationBasis {
    /// Rows in reduced row-echelon form.
    pub vectors: Vec<Vec<RatFunc>>,
    pub rank_r: usize,
    /// Parameter the entries depend on, if any.
    pub symbol: Option<String>,
}

impl ConservationBasis {
    pub fn render(&self) -> Vec<Vec<String>> {
        let sym = self.symbol.clone().unwrap_or_else(|| "t".into());
        self.vectors.iter().map(|v| v.iter().map(|x| x.render(&sym)).collect()).collect()
    }
}

pub fn conservation_laws(model: &CrnModel) -> ConservationBasis {
    let s = model.stoichiometry();
    let n = model.species.len();
    let m = model.reactions.len();
    let st: Vec<Vec<RatFunc>> = (0..m).map(|j| (0..n).map(|i| s[i][j].clone()).collect()).collect();
    let (mut basis, rank) = if m == 0 {
        let id = (0..n)
            .map(|i| (0..n).map(|j| if i == j { RatFunc::one() } else { RatFunc::zero() }).collect())
            .collect();
        (id, 0)
    } else {
        nullspace(&st, n)
    };
    rref(&mut basis);
    basis.retain(|row| row.iter().any(|x| !x.is_zero()));
    ConservationBasis {
        vectors: basis,
        rank_r: rank,
        symbol: model.scale_symbol().map(|k| model.params[k].name.clone()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSystem {
    /// Names are chart species followed by parameters.
    pub field: PolyField,
    pub chart: Vec<usize>,
    /// (species index, expression over the reduced ring).
    pub eliminated: Vec<(usize, Poly<Rational>)>,
    pub totals: Vec<Rational>,
    pub params: Vec<Param>,
    pub species: Vec<String>,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.field.dim
    }

    /// Full species state from a chart point, with parameters bound.
    pub fn lift(&self, y: &[f64], params: &[f64]) -> Vec<f64> {
        let n = self.species.len();
        let mut x = vec![0.0; n];
        for (k, &i) in self.chart.iter().enumerate() {
            x[i] = y[k];
        }
        let mut point: Vec<f64> = y.to_vec();
        point.extend_from_slice(params);
        for (i, e) in &self.eliminated {
            x[*i] = eval_f64(e, &point);
        }
        x
    }
}

/// Evaluate an exact polynomial at a real point (Laurent powers allowed).
pub fn eval_f64(p: &Poly<Rational>, x: &[f64]) -> f64 {
    p.terms()
        .map(|(e, c)| {
            let mut t = c.to_f64().unwrap();
            for (xi, &k) in x.iter().zip(e) {
                if k != 0 {
                    t *= xi.powi(k);
                }
            }
            t
        })
        .sum()
}

/// Totals `L·x(0)` from the model's initial conditions.
pub fn totals_from_ics(model: &CrnModel, basis: &ConservationBasis) -> Result<Vec<Rational>> {
    let sym_value = match model.scale_symbol() {
        Some(k) => model.params[k].value.and_then(rat_from_f64),
        None => None,
    };
    let mut out = Vec::new();
    for v in &basis.vectors {
        let mut t = <Rational as Zero>::zero();
        for (i, coef) in v.iter().enumerate() {
            if coef.is_zero() {
                continue;
            }
            let x0 = model.ics[i]
                .and_then(rat_from_f64)
                .ok_or_else(|| Error::invalid(Stage::Conservation, format!("missing initial value for '{}'", model.species[i])))?;
            if Zero::is_zero(&x0) {
                continue;
            }
            let c = match coef.as_laurent() {
                Some(terms) if terms.iter().all(|(k, _)| *k == 0) => terms.iter().map(|(_, c)| c.clone()).sum(),
                _ => {
                    let b = sym_value.clone().ok_or_else(|| {
                        Error::invalid(Stage::Conservation, "totals depend on an unvalued scaling symbol")
                    })?;
                    eval_ratfunc(coef, &b)
                }
            };
            t += c * x0;
        }
        out.push(t);
    }
    Ok(out)
}

fn eval_ratfunc(f: &RatFunc, x: &Rational) -> Rational {
    let ev = |p: &Poly<Rational>| -> Rational {
        p.terms()
            .map(|(e, c)| {
                let mut t = c.clone();
                for _ in 0..e[0] {
                    t *= x.clone();
                }
                t
            })
            .sum()
    };
    ev(f.num()) / ev(f.den())
}

pub fn reduce_to_class(
    model: &CrnModel,
    basis: &ConservationBasis,
    chart: &[usize],
    totals: &[Rational],
) -> Result<ReducedSystem> {
    let n = model.species.len();
    let p = model.params.len();
    let q = basis.vectors.len();
    let mut chart_sorted: Vec<usize> = chart.to_vec();
    chart_sorted.dedup();
    if chart.iter().any(|&i| i >= n) || chart_sorted.len() != chart.len() {
        return Err(Error::invalid(Stage::Chart, "chart indices must be distinct species"));
    }
    if chart.len() + q != n {
        return Err(Error::invalid(
            Stage::Chart,
            format!("chart has {} coordinates but the class has dimension {}", chart.len(), n - q),
        ));
    }
    if totals.len() != q {
        return Err(Error::invalid(Stage::Chart, format!("expected {q} conserved totals")));
    }
    let elim: Vec<usize> = (0..n).filter(|i| !chart.contains(i)).collect();
    let block: Vec<Vec<RatFunc>> = basis.vectors.iter().map(|v| elim.iter().map(|&e| v[e].clone()).collect()).collect();
    let inv = if q == 0 {
        Vec::new()
    } else {
        inverse(&block).ok_or_else(|| {
            Error::invalid(Stage::Chart, "the elimination block is singular; the chart cannot host the class as a graph")
        })?
    };

    // ring: species ++ params; eliminations expressed there first
    let nv = n + p;
    let sym_var = model.scale_symbol().map(|k| n + k);
    let lift = |f: &RatFunc| -> Result<Poly<Rational>> {
        let terms = f
            .as_laurent()
            .ok_or_else(|| Error::unsupported(Stage::Chart, "elimination needs a non-monomial denominator"))?;
        let mut out = Poly::zero(nv);
        for (k, c) in terms {
            let mut e = vec![0; nv];
            if k != 0 {
                e[sym_var.expect("symbolic entry without symbol")] = k;
            }
            out = &out + &Poly::monomial(nv, e, c);
        }
        Ok(out)
    };
    let mut exprs = Vec::new();
    for (a, &e) in elim.iter().enumerate() {
        let mut expr = Poly::zero(nv);
        for k in 0..q {
            let coef = lift(&inv[a][k])?;
            expr = &expr + &coef.scale(&totals[k]);
            for &j in chart {
                let lj = &basis.vectors[k][j];
                if lj.is_zero() {
                    continue;
                }
                let c = lift(&inv[a][k].mul(lj))?;
                expr = &expr - &(&c * &Poly::var(nv, j));
            }
        }
        exprs.push((e, expr));
    }

    let full = build_rhs(model);
    let r = chart.len();
    let mut map = vec![usize::MAX; nv];
    for (k, &i) in chart.iter().enumerate() {
        map[i] = k;
    }
    for k in 0..p {
        map[n + k] = r + k;
    }
    let reduce = |poly: &Poly<Rational>| -> Poly<Rational> {
        let mut out = poly.clone();
        for (e, expr) in &exprs {
            out = out.substitute(*e, expr);
        }
        // eliminated species no longer appear; point them anywhere
        let m: Vec<usize> = map.iter().map(|&x| if x == usize::MAX { 0 } else { x }).collect();
        out.remap(r + p, &m)
    };
    let comps: Vec<Poly<Rational>> = chart.iter().map(|&i| reduce(&full.comps[i])).collect();
    let mut names: Vec<String> = chart.iter().map(|&i| model.species[i].clone()).collect();
    names.extend(model.params.iter().map(|q| q.name.clone()));
    let eliminated = exprs.iter().map(|(e, ex)| (*e, reduce(ex))).collect();
    Ok(ReducedSystem {
        field: PolyField { names, dim: r, comps },
        chart: chart.to_vec(),
        eliminated,
        totals: totals.to_vec(),
        params: model.params.clone(),
        species: model.species.clone(),
    })
}

/// The paper-standard reduced system for a built-in: MM on the (s, c)
/// chart with totals from the initial conditions, KF on (x, y, z, s).
pub fn standard_reduction(model: &CrnModel) -> Result<ReducedSystem> {
    let basis = conservation_laws(model);
    let names: &[&str] = if model.species_index("x").is_some() { &["x", "y", "z", "s"] } else { &["s", "c"] };
    let chart: Vec<usize> = names
        .iter()
        .map(|n| model.species_index(n).ok_or_else(|| Error::invalid(Stage::Chart, format!("no species '{n}'"))))
        .collect::<Result<_>>()?;
    let totals = if model.species_index("x").is_some() { vec![rat(1, 1)] } else { totals_from_ics(model, &basis)? };
    reduce_to_class(model, &basis, &chart, &totals)
}
