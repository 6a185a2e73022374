use serde_json::{json, Value};
use slowfast::crn::{standard_reduction, CrnModel, ReducedSystem};
use slowfast::epsilon::{detect_singular, expand, factorize, EpsilonSystem, Factorization, ScalingAssignment, Singularity};
use slowfast::geometry::{classify_fibers, classify_form, ChartSplit};
use slowfast::reduction::{Reducer, ReductionJet};
use slowfast::{Error, Stage};

use crate::output::{csv_bytes, json_bytes, read_json, CliResult, Failure, Sink};
use crate::{Format, ModelArgs, ReduceArgs};

pub struct Setup {
    pub model_id: String,
    pub reduced: ReducedSystem,
    pub eps: EpsilonSystem,
    pub epsilon: Option<f64>,
}

pub fn load_model(spec: &str) -> CliResult<CrnModel> {
    match CrnModel::builtin(spec) {
        Ok(m) => Ok(m),
        Err(_) if std::path::Path::new(spec).exists() => Ok(CrnModel::from_json(&read_json(spec, "model")?)?),
        Err(_) => Err(Failure::Input {
            stage: "model",
            msg: format!("'{spec}' is neither a built-in model nor a readable file"),
        }),
    }
}

pub fn setup(args: &ModelArgs) -> CliResult<Setup> {
    let model = load_model(&args.model)?;
    let reduced = standard_reduction(&model)?;
    let scaling = ScalingAssignment::from_json(&read_json(&args.scaling, "scaling")?)?;
    let epsilon = args.epsilon.or(scaling.epsilon);
    if let Some(e) = epsilon {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::invalid(Stage::Scaling, "epsilon must be positive").into());
        }
    }
    let eps = expand(&reduced, &scaling)?;
    Ok(Setup { model_id: args.model.clone(), reduced, eps, epsilon })
}

impl Setup {
    pub fn code(&self) -> String {
        self.eps.scaling.code(self.eps.param_names())
    }

    /// Tilde values from the scaling file, else `value / ε^e` from the model.
    pub fn tilde(&self) -> CliResult<Vec<f64>> {
        let sc = &self.eps.scaling;
        self.eps
            .param_names()
            .iter()
            .map(|p| {
                if let Some(v) = sc.tilde.get(p) {
                    return Ok(*v);
                }
                let value = self.reduced.params.iter().find(|q| &q.name == p).and_then(|q| q.value);
                match (value, self.epsilon, sc.category(p)) {
                    (Some(v), Some(e), Some(c)) => Ok(v / e.powi(c.exponent())),
                    _ => Err(Error::invalid(Stage::Scaling, format!("missing tilde value for parameter '{p}'")).into()),
                }
            })
            .collect()
    }
}

/// Chart in which a branch is a graph: over the last coordinate when `f₀`
/// depends on it.
pub fn graph_split(fact: &Factorization) -> CliResult<ChartSplit> {
    let dim = fact.dim;
    if fact.f0.uses_var(dim - 1) {
        return Ok(ChartSplit::last(dim));
    }
    let eta = (0..dim)
        .find(|&i| fact.f0.uses_var(i))
        .ok_or_else(|| Error::invalid(Stage::Chart, format!("branch {} ignores the chart", fact.branch_id)))?;
    Ok(ChartSplit::new(dim, eta)?)
}

fn base_grid(k: usize) -> Vec<Vec<f64>> {
    if k == 1 {
        return (1..=20).map(|i| vec![i as f64 / 20.0]).collect();
    }
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out.into_iter().flat_map(|v: Vec<f64>| [0.5, 1.0, 1.5].map(|x| [v.clone(), vec![x]].concat())).collect();
    }
    out
}

fn require_singular(eps: &EpsilonSystem) -> CliResult<usize> {
    match detect_singular(eps) {
        Singularity::Singular { k } => Ok(k),
        Singularity::NotSingular => {
            Err(Error::invalid(Stage::Factorize, "configuration is not singularly perturbed").into())
        }
    }
}

struct BranchRun {
    fact: Factorization,
    split: Option<ChartSplit>,
    points: Vec<Result<(ReductionJet<f64>, Option<f64>), Error>>,
}

pub fn reduce(args: &ReduceArgs) -> CliResult<()> {
    let st = setup(&args.model)?;
    let order = args.order as usize;
    require_singular(&st.eps)?;
    let tilde = st.tilde()?;
    let facts = factorize(&st.eps)?;
    let mut runs = Vec::new();
    for fact in facts {
        if fact.degenerate {
            runs.push(BranchRun { fact, split: None, points: Vec::new() });
            continue;
        }
        let split = graph_split(&fact)?;
        let reducer = Reducer::<f64>::new(&st.eps, &fact, &split, &tilde)?;
        if order > 1 && reducer.k() > 1 {
            return Err(Error::unsupported(Stage::Parametrize, "orders above one need a one-dimensional slow base").into());
        }
        let points = base_grid(split.k())
            .iter()
            .map(|rho| {
                let jet = reducer.parametrize(rho, order, None)?;
                let res = match st.epsilon {
                    Some(e) if reducer.k() == 1 => Some(reducer.conjugacy_residual(&jet, e)?),
                    _ => None,
                };
                Ok((jet, res))
            })
            .collect();
        runs.push(BranchRun { fact, split: Some(split), points });
    }
    if runs.iter().all(|r| r.split.is_none()) {
        return Err(Error::unsupported(Stage::Projector, "every branch is degenerate; its reduction needs a blow-up").into());
    }
    if !runs.iter().flat_map(|r| &r.points).any(|p| p.is_ok()) {
        let first = runs.into_iter().flat_map(|r| r.points).find_map(|p| p.err()).expect("a failed point");
        return Err(first.into());
    }
    let sink = Sink::new(args.model.out.as_deref())?;
    let names = &st.eps.names;
    match args.model.format {
        Format::Json => {
            let branches: Vec<Value> = runs
                .iter()
                .map(|r| {
                    let mut b = json!({
                        "branch": r.fact.branch_id,
                        "f0": r.fact.render_f0(),
                        "n0": r.fact.render_n0(),
                        "degenerate": r.fact.degenerate,
                    });
                    if let Some(split) = &r.split {
                        b["eta"] = json!(names[split.eta]);
                        b["rho"] = json!(split.rho.iter().map(|&i| names[i].clone()).collect::<Vec<_>>());
                        b["points"] = r
                            .points
                            .iter()
                            .map(|p| match p {
                                Ok((jet, res)) => jet.to_json(res.map(|v| (st.epsilon.unwrap(), v))),
                                Err(e) => json!({ "error": e.to_string() }),
                            })
                            .collect();
                    }
                    b
                })
                .collect();
            let report = json!({
                "model": st.model_id,
                "configuration": st.code(),
                "epsilon": st.epsilon,
                "order": order,
                "time_shift": st.eps.time_shift,
                "branches": branches,
            });
            sink.emit("reduction.json", &json_bytes(&report))
        }
        Format::Csv => {
            let mut header = vec!["branch".to_string(), "rho".into(), "eta".into(), "eigenvalues".into()];
            header.extend((1..=order).map(|j| format!("R{j}")));
            header.push("residual".into());
            let mut rows = Vec::new();
            for r in runs.iter().filter(|r| r.split.is_some()) {
                for (jet, res) in r.points.iter().flatten() {
                    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";");
                    let mut row = vec![r.fact.branch_id.clone(), join(&jet.rho), format!("{:e}", jet.psi[0]), join(&jet.eigenvalues)];
                    row.extend(jet.r_terms.iter().map(|t| join(t)));
                    row.push(res.map_or(String::new(), |v| format!("{v:e}")));
                    rows.push(row);
                }
            }
            sink.emit("reduction.csv", &csv_bytes(&header, &rows)?)
        }
    }
}

pub fn classify(args: &ModelArgs) -> CliResult<()> {
    let st = setup(args)?;
    let sink = Sink::new(args.out.as_deref())?;
    let singular = detect_singular(&st.eps);
    let facts = match singular {
        Singularity::Singular { .. } => factorize(&st.eps)?,
        Singularity::NotSingular => Vec::new(),
    };
    let form = (st.eps.dim == 2 && !facts.is_empty()).then(|| classify_form(&facts).form.to_string());
    let class = |f: &Factorization| (f.dim == 2).then(|| classify_fibers(f).to_string());
    match args.format {
        Format::Json => {
            let branches: Vec<Value> = facts
                .iter()
                .map(|f| {
                    json!({
                        "branch": f.branch_id,
                        "f0": f.render_f0(),
                        "n0": f.render_n0(),
                        "lambda": f.lambda().fmt_with(&f.names),
                        "degenerate": f.degenerate,
                        "root": f.root,
                        "fiber_class": class(f),
                    })
                })
                .collect();
            let report = json!({
                "model": st.model_id,
                "configuration": st.code(),
                "singular": matches!(singular, Singularity::Singular { .. }),
                "k": match singular { Singularity::Singular { k } => Some(k), _ => None },
                "time_shift": st.eps.time_shift,
                "leading": st.eps.render().first().cloned().unwrap_or_default(),
                "form": form,
                "branches": branches,
            });
            sink.emit("classification.json", &json_bytes(&report))
        }
        Format::Csv => {
            let header: Vec<String> =
                ["branch", "f0", "n0", "lambda", "degenerate", "class", "form"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = facts
                .iter()
                .map(|f| {
                    vec![
                        f.branch_id.clone(),
                        f.render_f0(),
                        f.render_n0().join(";"),
                        f.lambda().fmt_with(&f.names),
                        f.degenerate.to_string(),
                        class(f).unwrap_or_default(),
                        form.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            sink.emit("classification.csv", &csv_bytes(&header, &rows)?)
        }
    }
}
