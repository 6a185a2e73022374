use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use slowfast::catalogue::{KfScenario, Oscillation, KF_STATE};
use slowfast::crn::{standard_reduction, CrnModel};
use slowfast::dynamics::{base_point, compare, integrate, Engine, Tolerance, Trajectory};
use slowfast::epsilon::{expand, factorize, ScalingAssignment};
use slowfast::geometry::{Branch, ChartSplit};
use slowfast::reduction::Reducer;
use slowfast::{Error, Stage};

use crate::output::{json_bytes, CliResult, Failure, Sink};
use crate::{KfArgs, Scenario, SimulateArgs};

const TQSSA_TILDE: [f64; 3] = [0.75, 1.0, 1.0];
const KF_RATIOS: [f64; 2] = [1.0, 1.5];

fn engine(arg: &Option<String>, default: Engine) -> CliResult<Engine> {
    match arg {
        None => Ok(default),
        Some(s) => Engine::parse(s)
            .ok_or_else(|| Error::invalid(Stage::Integrate, format!("unknown engine '{s}'")).into()),
    }
}

fn positive(v: f64, what: &str) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(Stage::Integrate, format!("{what} must be positive")).into())
    }
}

fn csv_of(tr: &Trajectory<f64>, names: &[&str], samples: usize) -> CliResult<Vec<u8>> {
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf, &names, Some(samples))?;
    Ok(buf)
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    if args.samples < 2 {
        return Err(Error::invalid(Stage::Integrate, "need at least two samples").into());
    }
    match args.scenario {
        Scenario::Tqssa => tqssa(args),
        Scenario::Kf => kf_pair(args),
    }
}

fn tqssa(args: &SimulateArgs) -> CliResult<()> {
    let eps = positive(args.epsilon.unwrap_or(0.005), "epsilon")?;
    let horizon = positive(args.horizon.unwrap_or(5.0 / eps), "horizon")?;
    let engine = engine(&args.engine, Engine::Explicit)?;
    let red = standard_reduction(&CrnModel::builtin("mm-irreversible")?)?;
    let sc = ScalingAssignment::from_code(red.field.param_names(), "oos")?;
    let sys = expand(&red, &sc)?;
    let fact = factorize(&sys)?.into_iter().next().expect("one branch");
    let split = ChartSplit::last(2);
    let reducer = Reducer::<f64>::new(&sys, &fact, &split, &TQSSA_TILDE)?;
    let branch = Branch::<f64>::bind(&fact, &split, &TQSSA_TILDE)?;
    let order = args.order;
    let y0 = [1.0, 0.0];
    let bp = base_point(&branch, &y0)?;
    let tol = Tolerance { atol: 1e-12, rtol: 1e-10 };
    let full = integrate(|y: &[f64]| reducer.field(y, eps), &y0, (0.0, horizon), tol, engine)?;
    let slow = integrate(
        |s: &[f64]| reducer.slow_field(s, eps, order, None).unwrap_or_else(|_| vec![f64::NAN]),
        &bp.yb[..1],
        (0.0, horizon),
        tol,
        engine,
    )?;
    // c along the reduced trajectory from the truncated graph
    let (ts, ys) = slow.grid(args.samples);
    let mut rows = Vec::new();
    for (t, y) in ts.iter().zip(&ys) {
        let jet = reducer.parametrize(y, order, None)?;
        let lifted = reducer.embed(&jet, eps);
        rows.push(vec![format!("{t:e}"), format!("{:e}", lifted[0]), format!("{:e}", lifted[1])]);
    }
    let reduced_csv = crate::output::csv_bytes(&["t".into(), "s".into(), "c".into()], &rows)?;
    let whole = compare(&full, 0, &slow, 0, args.samples, eps, order);
    let layer = 0.05 * horizon;
    let mut after = Vec::new();
    for i in 0..args.samples {
        let t = layer + (horizon - layer) * i as f64 / (args.samples - 1) as f64;
        after.push((full.sample(t)[0] - slow.sample(t)[0]).abs());
    }
    let report = json!({
        "scenario": "tqssa",
        "alpha": TQSSA_TILDE[0],
        "beta": TQSSA_TILDE[1],
        "gamma": TQSSA_TILDE[2] * eps,
        "epsilon": eps,
        "order": order,
        "engine": engine,
        "horizon": horizon,
        "initial_state": y0,
        "base_point": bp.yb,
        "fiber_kind": bp.fiber_kind,
        "sup_error_s": whole.sup_error,
        "rms_error_s": whole.l2_error,
        "sup_error_s_after_layer": after.iter().cloned().fold(0.0, f64::max),
        "full_stats": full.stats,
        "reduced_stats": slow.stats,
    });
    let sink = Sink::new(args.out.as_deref())?;
    sink.file("tqssa_full.csv", &csv_of(&full, &["s", "c"], args.samples)?)?;
    sink.file("tqssa_reduced.csv", &reduced_csv)?;
    sink.file("tqssa_comparison.json", &json_bytes(&report))?;
    print_json(&report)
}

fn kf_pair(args: &SimulateArgs) -> CliResult<()> {
    let horizon = positive(args.horizon.unwrap_or(2e8), "horizon")?;
    let engine = engine(&args.engine, Engine::Implicit)?;
    if args.epsilon.is_some() {
        return Err(Error::invalid(Stage::Scaling, "the KF scenario fixes epsilon = rho1").into());
    }
    let tol = Tolerance { atol: 1e-9, rtol: 1e-6 };
    let sink = Sink::new(args.out.as_deref())?;
    let mut runs = Vec::new();
    for ratio in KF_RATIOS {
        let kf = KfScenario::new(ratio)?;
        let full = kf.simulate_full(horizon, tol, engine)?;
        let reduced = kf.simulate_reduced(horizon, tol, engine)?;
        let tag = format!("kf_gamma{ratio:.1}");
        sink.file(&format!("{tag}_full.csv"), &csv_of(&full, &KF_STATE, args.samples)?)?;
        sink.file(&format!("{tag}_reduced.csv"), &csv_of(&reduced, &KF_STATE[..3], args.samples)?)?;
        let osc = |tr: &Trajectory<f64>| {
            let o = Oscillation::of(tr, 2);
            json!({ "transient": o.transient, "late": o.late, "decays": o.decays(), "sustained": o.sustained() })
        };
        runs.push(json!({
            "gamma_over_rho6": ratio,
            "gamma": kf.params[kf.names.iter().position(|n| n == "gamma").unwrap()],
            "full": osc(&full),
            "reduced": osc(&reduced),
        }));
    }
    let report = json!({
        "scenario": "kf",
        "epsilon": KfScenario::new(1.0)?.epsilon,
        "engine": engine,
        "horizon": horizon,
        "component": "z",
        "runs": runs,
    });
    sink.file("kf_comparison.json", &json_bytes(&report))?;
    print_json(&report)
}

fn print_json(v: &Value) -> CliResult<()> {
    use std::io::Write;
    std::io::stdout().write_all(&json_bytes(v)).map_err(|e| Failure::Output(e.to_string()))
}

/// Reduced KF field against the closed form at random points, and the
/// diagonal projector entries along z.
pub fn kf(args: &KfArgs) -> CliResult<()> {
    let kf = KfScenario::new(args.gamma_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut field_err = 0.0f64;
    for _ in 0..args.points {
        let p = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let got = kf.reduced_field(&p)?;
        for (a, b) in got.iter().zip(kf.closed_form(&p)) {
            field_err = field_err.max((a - b).abs() / b.abs().max(1e-300));
        }
    }
    let mut sigma_err = 0.0f64;
    for _ in 0..args.points {
        let z = rng.gen_range(0.0..2.0);
        let point = kf.reducer.point(&[1.0, 1.0, z], None)?;
        let pr = kf.reducer.projectors(&point)?;
        sigma_err = sigma_err.max((pr.pi_s[2][2] + pr.pi_s[3][3] - 1.0).abs());
    }
    let report = json!({
        "gamma_over_rho6": args.gamma_ratio,
        "epsilon": kf.epsilon,
        "k0": kf.k(0.0),
        "points": args.points,
        "seed": args.seed,
        "max_field_rel_error": field_err,
        "max_sigma_sum_error": sigma_err,
    });
    Sink::new(args.out.as_deref())?.file("kf_reduction.json", &json_bytes(&report))?;
    print_json(&report)?;
    if field_err > 1e-10 || sigma_err > 1e-14 {
        return Err(Failure::Check("reduced KF field differs from its closed form".into()));
    }
    Ok(())
}
