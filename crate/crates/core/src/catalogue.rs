//! Census of the Michaelis-Menten asymptotic configurations, relevance
//! filtering, closed-form reduction oracles, QSSA validity scalars and the
//! Kim-Forger scenario.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::crn::{eval_f64, standard_reduction, CrnModel, ReducedSystem};
use crate::dynamics::{integrate, Engine, Tolerance, Trajectory};
use crate::epsilon::{
    detect_singular, expand, factorize, Category, EpsilonSystem, Factorization, RootSign, ScalingAssignment,
    Singularity,
};
use crate::error::{Error, Result, Stage};
use crate::geometry::{classify_fibers, classify_form, Branch, ChartSplit, FiberClass, Form};
use crate::poly::{Poly, Rational};
use crate::reduction::Reducer;

/// Tilde values used for per-branch verdicts.
pub const REFERENCE_TILDE: [f64; 4] = [0.7, 0.6, 0.8, 0.5];
const NH_GRID: [f64; 3] = [0.3, 1.0, 3.0];
const NH_SAMPLES: usize = 41;
const NH_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Irreversible,
    Reversible,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "irreversible" | "mm-irreversible" => Some(Scheme::Irreversible),
            "reversible" | "mm-reversible" => Some(Scheme::Reversible),
            _ => None,
        }
    }

    pub fn model_id(self) -> &'static str {
        match self {
            Scheme::Irreversible => "mm-irreversible",
            Scheme::Reversible => "mm-reversible",
        }
    }

    pub fn nparams(self) -> usize {
        match self {
            Scheme::Irreversible => 3,
            Scheme::Reversible => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Irreversible => "irreversible",
            Scheme::Reversible => "reversible",
        }
    }

    /// All `3^p` configuration codes in lexicographic small < one < large order.
    pub fn codes(self) -> Vec<String> {
        let n = self.nparams();
        (0..3usize.pow(n as u32))
            .map(|k| (0..n).map(|i| Category::ALL[(k / 3usize.pow((n - 1 - i) as u32)) % 3].code()).collect())
            .collect()
    }

    pub fn reduced(self) -> Result<ReducedSystem> {
        standard_reduction(&CrnModel::builtin(self.model_id())?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Attracting {
    Yes,
    No,
    Partial,
    /// No branch point in the sampled box.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchVerdict {
    pub branch_id: String,
    pub hyperbolic: bool,
    pub attracting: Attracting,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Relevance {
    pub relevant: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogueEntry {
    pub scheme: Scheme,
    pub config: String,
    #[serde(skip)]
    pub scaling: ScalingAssignment,
    pub singular: bool,
    pub fiber_class: Option<FiberClass>,
    pub form: Option<Form>,
    pub normally_hyperbolic: bool,
    pub branches: Vec<BranchVerdict>,
    pub relevant: bool,
    pub reason: String,
    pub oracle: Option<String>,
    pub published_order: Option<usize>,
}

impl CatalogueEntry {
    pub fn category(&self, name: &str) -> Option<Category> {
        self.scaling.category(name)
    }

    /// Whether some branch is `c = 0`.
    fn has_c_zero(&self) -> bool {
        self.branches.iter().any(|b| b.branch_id == "c=0")
    }
}

fn system(red: &ReducedSystem, code: &str) -> Result<EpsilonSystem> {
    let sc = ScalingAssignment::from_code(red.field.param_names(), code)?;
    expand(red, &sc)
}

/// Chart in which a branch is a graph: over s unless `f₀` ignores c.
fn natural_split(fact: &Factorization) -> ChartSplit {
    if fact.f0.uses_var(1) {
        ChartSplit::last(2)
    } else {
        ChartSplit::new(2, 0).expect("two-dimensional chart")
    }
}

/// λ along a branch at a grid of base coordinates; roots outside `[0, 1]`
/// are dropped when `boxed`.
fn lambda_samples(branch: &Branch<f64>, rhos: &[f64], boxed: bool, pick: Option<RootSign>) -> Vec<f64> {
    let mut out = Vec::new();
    let split = &branch.split;
    for &rho in rhos {
        let Some(mut roots) = branch.eta_roots(&[rho]) else { continue };
        if roots.len() == 2 {
            match pick {
                Some(RootSign::Lower) => roots.truncate(1),
                Some(RootSign::Upper) => {
                    roots.remove(0);
                }
                None => {}
            }
        }
        for r in roots {
            if !boxed || (-1e-12..=1.0 + 1e-12).contains(&r) {
                out.push(branch.lambda(&split.assemble(&[rho], r)));
            }
        }
    }
    out
}

fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn tilde_grid(p: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..p {
        out = out.into_iter().flat_map(|v| NH_GRID.iter().map(move |x| [v.clone(), vec![*x]].concat())).collect();
    }
    out
}

fn fixed_sign(vals: &[f64]) -> bool {
    if vals.iter().any(|v| v.abs() < NH_TOL || !v.is_finite()) {
        return false;
    }
    vals.iter().all(|v| *v < 0.0) || vals.iter().all(|v| *v > 0.0)
}

/// λ is nonzero with fixed sign on branch ∩ [0,1]² for every tilde vector of
/// the {0.3, 1, 3} grid.
fn uniformly_hyperbolic(fact: &Factorization, tildes: &[Vec<f64>]) -> Result<bool> {
    if fact.degenerate {
        return Ok(false);
    }
    let split = natural_split(fact);
    let pts = grid(NH_SAMPLES, 0.0, 1.0);
    for t in tildes {
        let b = Branch::<f64>::bind(fact, &split, t)?;
        let vals = lambda_samples(&b, &pts, true, b.root);
        if !vals.is_empty() && !fixed_sign(&vals) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn attracting_at(fact: &Factorization, tilde: &[f64]) -> Result<Attracting> {
    if fact.degenerate {
        return Ok(Attracting::Unknown);
    }
    let split = natural_split(fact);
    let b = Branch::<f64>::bind(fact, &split, tilde)?;
    let pts: Vec<f64> = (1..20).map(|i| 0.05 * i as f64).collect();
    let vals = lambda_samples(&b, &pts, split.eta == 1, b.root);
    let neg = vals.iter().filter(|v| **v < -5e-13).count();
    let pos = vals.iter().filter(|v| **v > 5e-13).count();
    Ok(match (neg, pos) {
        (0, 0) => Attracting::Unknown,
        (_, 0) => Attracting::Yes,
        (0, _) => Attracting::No,
        _ => Attracting::Partial,
    })
}

pub fn relevance_filter(entry: &CatalogueEntry) -> Relevance {
    let no = |r: &str| Relevance { relevant: false, reason: r.to_string() };
    if !entry.singular {
        return no("not singularly perturbed");
    }
    if entry.fiber_class == Some(FiberClass::R) {
        if entry.branches.iter().all(|b| b.degenerate) {
            return no("degenerate everywhere; needs a blow-up");
        }
        return no("rapid equilibration");
    }
    let cat = |n: &str| entry.category(n);
    if let (Some(b), Some(g), Some(d)) = (cat("beta"), cat("gamma"), cat("delta")) {
        if b != Category::Large && g < d {
            return no("negative product formation: gamma << delta");
        }
        if entry.has_c_zero() && ((b != Category::Large && g == d) || (b == Category::Large && g <= d)) {
            return no("negative product formation on c = 0");
        }
    }
    let attracting = entry
        .branches
        .iter()
        .any(|b| !b.degenerate && matches!(b.attracting, Attracting::Yes | Attracting::Partial));
    if !attracting {
        return no("repelling manifold");
    }
    Relevance { relevant: true, reason: "relevant".into() }
}

fn classify(scheme: Scheme, red: &ReducedSystem, code: &str) -> Result<CatalogueEntry> {
    let eps = system(red, code)?;
    let p = scheme.nparams();
    let mut entry = CatalogueEntry {
        scheme,
        config: code.to_string(),
        scaling: eps.scaling.clone(),
        singular: false,
        fiber_class: None,
        form: None,
        normally_hyperbolic: false,
        branches: Vec::new(),
        relevant: false,
        reason: String::new(),
        oracle: None,
        published_order: None,
    };
    if let Some(row) = oracle_rows().into_iter().find(|r| r.scheme == scheme && r.code == code) {
        entry.oracle = Some(row.label.to_string());
        entry.published_order = Some(row.order);
    }
    if matches!(detect_singular(&eps), Singularity::Singular { .. }) {
        entry.singular = true;
        let facts = factorize(&eps)?;
        entry.fiber_class = Some(classify_fibers(&facts[0]));
        entry.form = Some(classify_form(&facts).form);
        let tildes = tilde_grid(p);
        let reference = &REFERENCE_TILDE[..p];
        let mut nh = true;
        for f in &facts {
            let hyperbolic = uniformly_hyperbolic(f, &tildes)?;
            nh &= hyperbolic;
            entry.branches.push(BranchVerdict {
                branch_id: f.branch_id.clone(),
                hyperbolic,
                attracting: attracting_at(f, reference)?,
                degenerate: f.degenerate,
            });
        }
        entry.normally_hyperbolic = nh;
    }
    let rel = relevance_filter(&entry);
    entry.relevant = rel.relevant;
    entry.reason = rel.reason;
    Ok(entry)
}

/// Worker pool honoring `SLOWFAST_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SLOWFAST_THREADS") {
        let n: usize =
            v.parse().map_err(|_| Error::invalid(Stage::Catalogue, format!("SLOWFAST_THREADS='{v}' is not a count")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::numerical(Stage::Catalogue, e.to_string()))
}

pub fn enumerate_mm(scheme: Scheme) -> Result<Vec<CatalogueEntry>> {
    let red = scheme.reduced()?;
    let codes = scheme.codes();
    thread_pool()?.install(|| codes.par_iter().map(|c| classify(scheme, &red, c)).collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Census {
    pub total: usize,
    pub singular: usize,
    pub normally_hyperbolic: usize,
    pub classes: BTreeMap<String, usize>,
    pub relevant: BTreeMap<String, usize>,
}

impl Census {
    pub fn of(entries: &[CatalogueEntry]) -> Census {
        let mut c = Census { total: entries.len(), ..Default::default() };
        for e in entries.iter().filter(|e| e.singular) {
            c.singular += 1;
            c.normally_hyperbolic += e.normally_hyperbolic as usize;
            let k = e.fiber_class.map_or("none".to_string(), |f| f.to_string());
            *c.classes.entry(k.clone()).or_default() += 1;
            if e.relevant {
                *c.relevant.entry(k).or_default() += 1;
            }
        }
        c
    }

    pub fn relevant_total(&self) -> usize {
        self.relevant.values().sum()
    }

    pub fn summary(&self) -> String {
        let cls = |k: &str| self.classes.get(k).copied().unwrap_or(0);
        format!(
            "{} configurations, {} singular, {} NH, S={} T={} R={}, {} relevant",
            self.total,
            self.singular,
            self.normally_hyperbolic,
            cls("S"),
            cls("T"),
            cls("R"),
            self.relevant_total()
        )
    }
}

pub fn entries_json(entries: &[CatalogueEntry], oracle_status: &BTreeMap<String, bool>) -> Value {
    Value::Array(
        entries
            .iter()
            .map(|e| {
                let mut v = serde_json::to_value(e).expect("entry serializes");
                v["oracle_verified"] = match &e.oracle {
                    Some(_) => json!(oracle_status.get(&e.config).copied()),
                    None => Value::Null,
                };
                v
            })
            .collect(),
    )
}

pub fn write_entries_csv<W: Write>(
    out: W,
    entries: &[CatalogueEntry],
    oracle_status: &BTreeMap<String, bool>,
) -> Result<()> {
    let err = |e: csv::Error| Error::numerical(Stage::Catalogue, e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["config", "singular", "class", "form", "branches", "relevant", "reason", "oracle-verified"])
        .map_err(err)?;
    for e in entries {
        let branches: Vec<String> = e
            .branches
            .iter()
            .map(|b| {
                let a = serde_json::to_value(b.attracting).unwrap();
                format!(
                    "{}[{}{}{}]",
                    b.branch_id,
                    if b.hyperbolic { "nh" } else { "non-nh" },
                    if b.degenerate { ",degenerate," } else { "," },
                    a.as_str().unwrap()
                )
            })
            .collect();
        let verified = match (&e.oracle, oracle_status.get(&e.config)) {
            (Some(_), Some(true)) => "pass",
            (Some(_), Some(false)) => "fail",
            (Some(_), None) => "unchecked",
            (None, _) => "",
        };
        w.write_record([
            e.config.clone(),
            e.singular.to_string(),
            e.fiber_class.map_or(String::new(), |f| f.to_string()),
            e.form.map_or(String::new(), |f| f.to_string()),
            branches.join(";"),
            e.relevant.to_string(),
            e.reason.clone(),
            verified.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::numerical(Stage::Catalogue, e.to_string()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// closed-form oracles

/// Tilde values by role; order-one parameters carry their plain value.
#[derive(Clone, Copy, Debug)]
pub struct Params {
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pick {
    Only,
    /// The `c = 1` branch.
    COne,
    /// The `s = 0` branch, reduced over c.
    SZero,
    /// Smaller root of a quadratic branch.
    Lower,
}

type Expr = fn(&Params, f64) -> f64;

#[derive(Clone, Debug)]
pub struct OracleRow {
    pub table: &'static str,
    pub label: &'static str,
    pub scheme: Scheme,
    pub code: &'static str,
    /// Power of ε of the published leading term.
    pub order: usize,
    pub eps_param: &'static str,
    pub pick: Pick,
    /// Substrate depletion (or ċ on the c-chart) divided by εⁿ.
    pub substrate: Expr,
    /// Product formation divided by εⁿ, when it is not `-substrate`.
    pub product: Option<Expr>,
}

fn s1_sub(p: &Params, s: f64) -> f64 {
    -p.g * s / (p.a + p.g + s)
}

fn conic_h2(p: &Params, s: f64) -> f64 {
    (p.d * (p.b + s) - (p.g + p.d)).powi(2) + 4.0 * p.b * p.g * p.d
}

/// c₀′ on the lower root `(h₁ − √h₂)/(2βδ)`.
fn conic_slope(p: &Params, s: f64) -> f64 {
    let dh2 = 2.0 * p.d * (p.d * (p.b + s) - (p.g + p.d));
    (-p.d - dh2 / (2.0 * conic_h2(p, s).sqrt())) / (2.0 * p.b * p.d)
}

fn s3_i(p: &Params, s: f64) -> f64 {
    let h = p.d * s * (p.b + s - 1.0) - s * (p.g - conic_h2(p, s).sqrt());
    -h / (2.0 * p.d)
}

fn s3_ii(p: &Params, s: f64) -> f64 {
    let h3 = -p.d * (p.a + s + p.a * p.b - p.a * s - p.b * s - s * s);
    let h = h3 - (p.a + s) * (p.g - conic_h2(p, s).sqrt());
    -h / (2.0 * p.d)
}

fn t1_rev(p: &Params, s: f64) -> f64 {
    let d0 = -p.a * p.a * p.d;
    let d1 = p.a * (1.0 - p.d + p.a * p.d + p.b * p.d);
    let d2 = 1.0 + p.a * p.d;
    -p.b * (d2 * s * s + d1 * s + d0) / ((p.a + s).powi(2) + p.a * p.b)
}

pub fn oracle_rows() -> Vec<OracleRow> {
    use Pick::*;
    use Scheme::*;
    let row = |table, label, scheme, code, order, eps_param, pick, substrate: Expr| OracleRow {
        table,
        label,
        scheme,
        code,
        order,
        eps_param,
        pick,
        substrate,
        product: None,
    };
    vec![
        row("irr", "S.1(i)", Irreversible, "oso", 1, "beta", Only, s1_sub),
        row("irr", "S.1(ii)", Irreversible, "sso", 1, "beta", Only, |p, s| -p.g * s / (p.g + s)),
        row("irr", "S.1(iii)", Irreversible, "oss", 2, "beta", Only, |p, s| -p.g * s / (p.a + s)),
        row("irr", "S.2b(i)", Irreversible, "lso", 3, "beta", Only, |p, s| -p.g * s / p.a),
        row("irr", "S.2b(iv)", Irreversible, "lss", 4, "beta", Only, |p, s| -p.g * s / p.a),
        row("irr", "S.2b(ii)", Irreversible, "osl", 2, "beta", Only, |_, s| -s),
        row("irr", "S.2b(iii)", Irreversible, "lsl", 2, "beta", Only, |p, s| -p.g / (p.a + p.g) * s),
        row("irr", "S.2b(v)", Irreversible, "ssl", 2, "beta", Only, |_, s| -s),
        row("irr", "S.2b(vi)", Irreversible, "ool", 1, "gamma", Only, |p, s| -p.b * s),
        row("irr", "S.2b(vii)", Irreversible, "sol", 1, "gamma", Only, |p, s| -p.b * s),
        OracleRow {
            product: Some(|p, s| p.b * s / (s + p.a)),
            ..row("irr", "T.1(i)", Irreversible, "oos", 1, "gamma", Only, |p, s| {
                -p.b * s * (p.a + s) / (p.a * p.b + (p.a + s).powi(2))
            })
        },
        row("irr", "T.2b(i)", Irreversible, "loo", 2, "alpha", Only, |p, s| -p.b * p.g * s),
        row("irr", "T.2b(ii)", Irreversible, "los", 3, "alpha", Only, |p, s| -p.b * p.g * s),
        row("irr", "T.2b(iii)", Irreversible, "lol", 1, "alpha", Only, |p, s| -p.b * p.g * s / (1.0 + p.g)),
        // non-hyperbolic pieces, irreversible
        row("irr-loss", "S.2a(i)", Irreversible, "sss", 2, "beta", COne, |p, _| -p.g),
        OracleRow {
            product: Some(|p, c| p.b * c),
            ..row("irr-loss", "T.2a(i)(a)", Irreversible, "sos", 1, "gamma", SZero, |_, c| -c)
        },
        row("irr-loss", "T.2a(i)(b)", Irreversible, "sos", 1, "gamma", COne, |p, _| -p.b),
        // reversible, single attracting manifold
        row("rev-single", "S.1(i)", Reversible, "osos", 1, "beta", Only, s1_sub),
        row("rev-single", "S.1(ii)", Reversible, "ssos", 1, "beta", Only, |p, s| -p.g * s / (p.g + s)),
        row("rev-single", "S.1(iii)", Reversible, "osss", 2, "beta", Only, |p, s| {
            -(p.g * s + p.a * p.d * (s - 1.0)) / (p.a + s)
        }),
        row("rev-single", "S.2b(i)", Reversible, "ssls", 2, "beta", Only, |_, s| -s),
        row("rev-single", "S.2b(ii)", Reversible, "sslo", 2, "beta", Only, |_, s| -s),
        row("rev-single", "S.2b(iii)", Reversible, "osls", 2, "beta", Only, |_, s| -s),
        row("rev-single", "S.2b(iv)", Reversible, "oslo", 2, "beta", Only, |_, s| -s),
        row("rev-single", "S.2b(xi)", Reversible, "sols", 1, "gamma", Only, |p, s| -p.b * s),
        row("rev-single", "S.2b(xii)", Reversible, "solo", 1, "gamma", Only, |p, s| -p.b * s),
        row("rev-single", "S.2b(xiii)", Reversible, "ools", 1, "gamma", Only, |p, s| -p.b * s),
        row("rev-single", "S.2b(xiv)", Reversible, "oolo", 1, "gamma", Only, |p, s| -p.b * s),
        OracleRow {
            product: Some(|p, s| -p.g * s / (p.a + p.g)),
            ..row("rev-single", "S.2b(ix)", Reversible, "lsls", 2, "beta", Only, |p, s| -p.g * s / (p.a + p.g))
        },
        row("rev-single", "S.2b(x)", Reversible, "lslo", 2, "beta", Only, |p, s| {
            -p.a * (-p.d - s + p.d * s) / (p.a + p.g) - s
        }),
        row("rev-single", "S.2b(vii)", Reversible, "lsos", 3, "beta", Only, |p, s| {
            -p.d * (s - 1.0) - p.g * s / p.a
        }),
        // reversible, conic pair
        OracleRow {
            product: Some(|p, s| -(1.0 + p.b * conic_slope(p, s)) * s3_i(p, s)),
            ..row("rev-conic", "S.3(i)", Reversible, "soll", 1, "gamma", Lower, s3_i)
        },
        OracleRow {
            product: Some(|p, s| -(1.0 + p.b * conic_slope(p, s)) * s3_ii(p, s)),
            ..row("rev-conic", "S.3(ii)", Reversible, "ooll", 1, "gamma", Lower, s3_ii)
        },
        // reversible, hyperbola
        row("rev-hyperbola", "S.4(i)", Reversible, "ssll", 2, "beta", Only, |p, s| {
            -p.g * s / (p.g + p.d - p.d * s)
        }),
        row("rev-hyperbola", "S.4(ii)", Reversible, "ssoo", 1, "beta", Only, |p, s| {
            -p.g * s / (p.g + p.d + s - p.d * s)
        }),
        row("rev-hyperbola", "S.4(iv)", Reversible, "osoo", 1, "beta", Only, |p, s| {
            -(p.g * s + p.a * p.d * (s - 1.0)) / (p.g + p.d + p.a + s - p.d * s)
        }),
        row("rev-hyperbola", "S.4(v)", Reversible, "osll", 2, "beta", Only, |p, s| {
            -(p.g * s + p.a * p.d * (s - 1.0)) / (p.g + p.d - p.d * s)
        }),
        row("rev-hyperbola", "S.4(viii)", Reversible, "lsll", 1, "beta", Only, |p, s| {
            -p.a * p.d * (s - 1.0) / (p.a + p.g + p.d - p.d * s)
        }),
        // reversible, class T
        OracleRow {
            product: Some(|p, s| -(1.0 + p.b * p.a / (p.a + s).powi(2)) * t1_rev(p, s)),
            ..row("rev-t", "T.1(i)", Reversible, "ooss", 1, "gamma", Only, t1_rev)
        },
        row("rev-t", "T.2b(iii)", Reversible, "loos", 2, "alpha", Only, |p, s| {
            -p.b * (p.d * (s - 1.0) + p.g * s)
        }),
        row("rev-t", "T.2b(v)", Reversible, "lols", 1, "alpha", Only, |p, s| -p.b * p.g * s / (1.0 + p.g)),
        row("rev-t", "T.2b(vi)", Reversible, "lolo", 1, "alpha", Only, |p, s| {
            -p.b * (-p.d + (p.d - 1.0) * s) / (1.0 + p.g) - p.b * s
        }),
        // non-hyperbolic pieces, reversible
        row("rev-loss", "S.2a(i)", Reversible, "ssss", 2, "beta", COne, |p, _| -p.g),
        OracleRow {
            product: Some(|p, c| p.b * (c - p.d * (1.0 - p.b * c) * (1.0 - c))),
            ..row("rev-loss", "T.2a(i)(a)", Reversible, "soss", 1, "gamma", SZero, |p, c| {
                -(c + p.d * (1.0 - c) * (p.b * c - 1.0))
            })
        },
        row("rev-loss", "T.2a(i)(b)", Reversible, "soss", 1, "gamma", COne, |p, _| -p.b),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleOutcome {
    pub table: String,
    pub label: String,
    pub scheme: Scheme,
    pub config: String,
    pub order: usize,
    pub samples: usize,
    /// Worst relative error of the substrate (or ċ) term.
    pub max_rel_error: f64,
    /// Largest |Rⱼ| below the published order.
    pub max_lower_order: f64,
    pub product_rel_error: f64,
    pub passed: bool,
    pub product_passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub samples: usize,
    pub draws: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { samples: 20, draws: 3, rel_tol: 1e-8, seed: 7 }
    }
}

fn pick_branch(facts: &[Factorization], pick: Pick) -> Result<Factorization> {
    let nv = facts[0].names.len();
    let (s, c) = (Poly::<Rational>::var(nv, 0), Poly::<Rational>::var(nv, 1));
    let target = match pick {
        Pick::Only => {
            return if facts.len() == 1 {
                Ok(facts[0].clone())
            } else {
                Err(Error::invalid(Stage::Catalogue, "configuration has several branches"))
            }
        }
        Pick::Lower => {
            return facts
                .iter()
                .find(|f| f.root == Some(RootSign::Lower))
                .cloned()
                .ok_or_else(|| Error::invalid(Stage::Catalogue, "no quadratic branch"))
        }
        Pick::COne => (&c - &Poly::one(nv)).monic(),
        Pick::SZero => s,
    };
    facts
        .iter()
        .find(|f| f.f0.monic() == target)
        .cloned()
        .ok_or_else(|| Error::invalid(Stage::Catalogue, "requested branch not present"))
}

fn rel_err(got: f64, want: f64) -> f64 {
    let scale = want.abs().max(got.abs());
    if scale == 0.0 {
        0.0
    } else {
        (got - want).abs() / scale
    }
}

fn verify_row(row: &OracleRow, red: &ReducedSystem, opts: &OracleOptions) -> Result<OracleOutcome> {
    let eps = system(red, row.code)?;
    let facts = factorize(&eps)?;
    let fact = pick_branch(&facts, row.pick)?;
    let split = if row.pick == Pick::SZero { ChartSplit::new(2, 0)? } else { ChartSplit::last(2) };
    let names = eps.param_names().to_vec();
    let beta_cat = eps.scaling.category("beta").unwrap_or(Category::One);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ hash(row.table) ^ hash(row.label));
    let mut out = OracleOutcome {
        table: row.table.into(),
        label: row.label.into(),
        scheme: row.scheme,
        config: row.code.into(),
        order: row.order,
        samples: 0,
        max_rel_error: 0.0,
        max_lower_order: 0.0,
        product_rel_error: 0.0,
        passed: false,
        product_passed: false,
        error: None,
    };
    for _ in 0..opts.draws {
        let tilde: Vec<f64> =
            names.iter().map(|n| if n == row.eps_param { 1.0 } else { rng.gen_range(0.3..3.0) }).collect();
        let get = |n: &str| names.iter().position(|m| m == n).map_or(0.0, |i| tilde[i]);
        let p = Params { a: get("alpha"), b: get("beta"), g: get("gamma"), d: get("delta") };
        let r: Reducer<f64> = Reducer::new(&eps, &fact, &split, &tilde)?;
        let beta_lead = if beta_cat == Category::One { p.b } else { 0.0 };
        for _ in 0..opts.samples {
            let x: f64 = rng.gen_range(0.02..0.98);
            let jet = r.parametrize(&[x], row.order, None)?;
            let rn = jet.r_terms[row.order - 1][0];
            for rj in &jet.r_terms[..row.order - 1] {
                out.max_lower_order = out.max_lower_order.max(rj[0].abs());
            }
            out.max_rel_error = out.max_rel_error.max(rel_err(rn, (row.substrate)(&p, x)));
            let prod = if row.pick == Pick::SZero { -beta_lead * rn } else { -(1.0 + beta_lead * jet.dpsi[0]) * rn };
            let want = match row.product {
                Some(f) => f(&p, x),
                None => -(row.substrate)(&p, x),
            };
            out.product_rel_error = out.product_rel_error.max(rel_err(prod, want));
            out.samples += 1;
        }
    }
    out.passed = out.max_rel_error <= opts.rel_tol && out.max_lower_order <= 1e-10;
    out.product_passed = out.product_rel_error <= opts.rel_tol;
    Ok(out)
}

fn hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Check every oracle row; numerical failures are reported per row.
pub fn verify_oracles(opts: &OracleOptions) -> Result<Vec<OracleOutcome>> {
    let irr = Scheme::Irreversible.reduced()?;
    let rev = Scheme::Reversible.reduced()?;
    let rows = oracle_rows();
    thread_pool()?.install(|| {
        Ok(rows
            .par_iter()
            .map(|row| {
                let red = if row.scheme == Scheme::Irreversible { &irr } else { &rev };
                verify_row(row, red, opts).unwrap_or_else(|e| OracleOutcome {
                    table: row.table.into(),
                    label: row.label.into(),
                    scheme: row.scheme,
                    config: row.code.into(),
                    order: row.order,
                    samples: 0,
                    max_rel_error: f64::NAN,
                    max_lower_order: f64::NAN,
                    product_rel_error: f64::NAN,
                    passed: false,
                    product_passed: false,
                    error: Some(e.to_string()),
                })
            })
            .collect())
    })
}

/// Per-configuration verdict: every row for the configuration passed.
pub fn oracle_status(outcomes: &[OracleOutcome], scheme: Scheme) -> BTreeMap<String, bool> {
    let mut m: BTreeMap<String, bool> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.scheme == scheme) {
        let e = m.entry(o.config.clone()).or_insert(true);
        *e &= o.passed;
    }
    m
}

// ---------------------------------------------------------------------------
// validity scalars

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidityScalars {
    pub eps_hta: f64,
    pub eps_ss: f64,
    pub eps_sssm: f64,
    pub eps_bdbs: f64,
    /// `None` when the radicand is not positive.
    pub eps_t: Option<f64>,
}

pub fn validity_scalars(alpha: f64, beta: f64, gamma: f64) -> Result<ValidityScalars> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
        return Err(Error::invalid(Stage::Catalogue, "validity scalars need positive parameters"));
    }
    let eps_bdbs = beta * gamma / (alpha + gamma + beta + 1.0).powi(2);
    let rad = 1.0 - 4.0 * eps_bdbs / gamma;
    Ok(ValidityScalars {
        eps_hta: beta,
        eps_ss: beta / (1.0 + alpha + gamma),
        eps_sssm: gamma / beta,
        eps_bdbs,
        eps_t: (rad > 0.0).then(|| gamma / 2.0 * (rad.powf(-0.5) - 1.0)),
    })
}

// ---------------------------------------------------------------------------
// Kim-Forger

pub const KF_STATE: [&str; 4] = ["x", "y", "z", "s"];
pub const KF_IC: [f64; 4] = [1.0, 1.0, 0.06128, 0.06128];

/// The KF sequestration model with α, β of order one and all other rates
/// small, ε = ρ₁.
pub struct KfScenario {
    pub names: Vec<String>,
    /// Physical parameter values in model order.
    pub params: Vec<f64>,
    pub tilde: Vec<f64>,
    pub epsilon: f64,
    pub reducer: Reducer<f64>,
    comps: Vec<Poly<Rational>>,
}

impl KfScenario {
    pub fn new(gamma_over_rho6: f64) -> Result<Self> {
        Self::with_params(&[], gamma_over_rho6)
    }

    /// Table values, optionally overridden by name.
    pub fn with_params(overrides: &[(&str, f64)], gamma_over_rho6: f64) -> Result<Self> {
        if !(gamma_over_rho6 > 0.0) {
            return Err(Error::invalid(Stage::Catalogue, "gamma/rho6 must be positive"));
        }
        let model = CrnModel::builtin("kim-forger")?;
        let red = standard_reduction(&model)?;
        let names = red.field.param_names().to_vec();
        let mut params: Vec<f64> = model.params().iter().map(|p| p.value.unwrap_or(1.0)).collect();
        let idx = |n: &str| names.iter().position(|m| m == n).unwrap();
        for (n, v) in overrides {
            let i = names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::invalid(Stage::Catalogue, format!("unknown parameter '{n}'")))?;
            if !(*v > 0.0) {
                return Err(Error::invalid(Stage::Catalogue, format!("parameter '{n}' must be positive")));
            }
            params[i] = *v;
        }
        params[idx("gamma")] = gamma_over_rho6 * params[idx("rho6")];
        let epsilon = params[idx("rho1")];
        let mut cats = BTreeMap::new();
        let mut tilde = Vec::new();
        for (n, v) in names.iter().zip(&params) {
            let c = if n == "alpha" || n == "beta" { Category::One } else { Category::Small };
            cats.insert(n.clone(), c);
            tilde.push(v / epsilon.powi(c.exponent()));
        }
        let sc = ScalingAssignment { epsilon: Some(epsilon), categories: cats, tilde: BTreeMap::new() };
        let eps = expand(&red, &sc)?;
        let fact = factorize(&eps)?.into_iter().next().unwrap();
        let reducer = Reducer::new(&eps, &fact, &ChartSplit::last(4), &tilde)?;
        Ok(KfScenario { names, params, tilde, epsilon, reducer, comps: red.field.comps })
    }

    fn p(&self, n: &str) -> f64 {
        self.params[self.names.iter().position(|m| m == n).unwrap()]
    }

    /// Full 4-D field on (x, y, z, s).
    pub fn full_field(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        x.extend_from_slice(&self.params);
        self.comps.iter().map(|p| eval_f64(p, &x)).collect()
    }

    /// Reduced 3-D field `ε R₁` on (x, y, z).
    pub fn reduced_field(&self, xyz: &[f64]) -> Result<Vec<f64>> {
        let r = self.reducer.slow_field(xyz, self.epsilon, 1, None)?;
        Ok(r)
    }

    /// `K(z) = (α+βz)/((α+βz)²+α)`.
    pub fn k(&self, z: f64) -> f64 {
        let (a, b) = (self.p("alpha"), self.p("beta"));
        let w = a + b * z;
        w / (w * w + a)
    }

    /// Displayed closed form of the reduced field, physical time.
    pub fn closed_form(&self, xyz: &[f64]) -> Vec<f64> {
        let (x, y, z) = (xyz[0], xyz[1], xyz[2]);
        let (a, b) = (self.p("alpha"), self.p("beta"));
        let w = a + b * z;
        vec![
            self.p("rho1") * a / w - self.p("rho2") * x,
            self.p("rho3") * x - self.p("rho4") * y,
            self.k(z) * (w * (self.p("rho5") * y - self.p("rho6") * z) - self.p("gamma") * z),
        ]
    }

    pub fn simulate_full(&self, horizon: f64, tol: Tolerance<f64>, engine: Engine) -> Result<Trajectory<f64>> {
        integrate(|y: &[f64]| self.full_field(y), &KF_IC, (0.0, horizon), tol, engine)
    }

    pub fn simulate_reduced(&self, horizon: f64, tol: Tolerance<f64>, engine: Engine) -> Result<Trajectory<f64>> {
        // the slow field is smooth on the positive orthant; a failed graph
        // solve surfaces as a NaN and then as an integrator error
        let f = |y: &[f64]| self.reduced_field(y).unwrap_or_else(|_| vec![f64::NAN; 3]);
        integrate(f, &KF_IC[..3], (0.0, horizon), tol, engine)
    }
}

/// Peak-to-peak amplitude of one component over `[t0, t1]`.
pub fn amplitude(tr: &Trajectory<f64>, comp: usize, t0: f64, t1: f64, n: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=n {
        let t = t0 + (t1 - t0) * i as f64 / n as f64;
        let v = tr.sample(t)[comp];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Oscillation {
    /// Amplitude over the first half of the horizon.
    pub transient: f64,
    /// Amplitudes over the third and fourth quarters.
    pub late: [f64; 2],
}

impl Oscillation {
    pub fn of(tr: &Trajectory<f64>, comp: usize) -> Self {
        let t = tr.t_end();
        Oscillation {
            transient: amplitude(tr, comp, 0.0, t / 2.0, 2000),
            late: [amplitude(tr, comp, t / 2.0, 0.75 * t, 1000), amplitude(tr, comp, 0.75 * t, t, 1000)],
        }
    }

    pub fn late_amplitude(&self) -> f64 {
        self.late[0].max(self.late[1])
    }

    /// Amplitude over the second half below 10% of the transient.
    pub fn decays(&self) -> bool {
        self.late_amplitude() < 0.1 * self.transient
    }

    /// The last quarter keeps more than half the third quarter's amplitude.
    pub fn sustained(&self) -> bool {
        self.late[1] > 0.5 * self.late[0] && self.late[0] > 1e-3 * self.transient
    }
}
