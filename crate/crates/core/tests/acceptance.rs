//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines reach the console under a plain `cargo test`.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowfast::catalogue::{enumerate_mm, verify_oracles, Census, KfScenario, OracleOptions, Oscillation, Scheme};
use slowfast::crn::{build_rhs, conservation_laws, eval_f64, standard_reduction, CrnModel};
use slowfast::dynamics::{base_point, compare, integrate, Engine, Tolerance};
use slowfast::epsilon::{expand, factorize, EpsilonSystem, ScalingAssignment};
use slowfast::geometry::{Branch, ChartSplit};
use slowfast::linalg::{matmul, matvec};
use slowfast::poly::rat_to_f64;
use slowfast::reduction::{LeftInverse, Reducer};

/// Criteria whose literal target is not reproducible; see the message.
const KNOWN_FAILURES: [usize; 1] = [3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn system(id: &str, code: &str) -> EpsilonSystem {
    let red = standard_reduction(&CrnModel::builtin(id).unwrap()).unwrap();
    let sc = ScalingAssignment::from_code(red.field.param_names(), code).unwrap();
    expand(&red, &sc).unwrap()
}

fn reducer(id: &str, code: &str, tilde: &[f64]) -> (Reducer<f64>, Branch<f64>) {
    let e = system(id, code);
    let f = &factorize(&e).unwrap()[0];
    let split = ChartSplit::last(e.dim);
    (Reducer::new(&e, f, &split, tilde).unwrap(), Branch::bind(f, &split, tilde).unwrap())
}

fn census() -> Outcome {
    let t = Instant::now();
    let irr = Census::of(&enumerate_mm(Scheme::Irreversible).unwrap());
    let rev = Census::of(&enumerate_mm(Scheme::Reversible).unwrap());
    let secs = t.elapsed().as_secs_f64();
    let cls = |c: &Census, k: &str| c.classes.get(k).copied().unwrap_or(0);
    let rel = |c: &Census, k: &str| c.relevant.get(k).copied().unwrap_or(0);
    let pass = (rev.total, rev.singular, rev.normally_hyperbolic) == (81, 67, 47)
        && (irr.total, irr.singular, irr.normally_hyperbolic) == (27, 23, 16)
        && (cls(&irr, "S"), cls(&irr, "T"), cls(&irr, "R")) == (11, 5, 7)
        && (rel(&rev, "S"), rel(&rev, "T")) == (22, 5)
        && secs < 30.0;
    outcome(
        pass,
        format!(
            "reversible {}/{}/{}, irreversible {}/{}/{} S={} T={} R={}, relevant reversible {}+{}, {secs:.2}s",
            rev.total,
            rev.singular,
            rev.normally_hyperbolic,
            irr.total,
            irr.singular,
            irr.normally_hyperbolic,
            cls(&irr, "S"),
            cls(&irr, "T"),
            cls(&irr, "R"),
            rel(&rev, "S"),
            rel(&rev, "T"),
        ),
    )
}

fn oracles() -> Outcome {
    let t = Instant::now();
    let out = verify_oracles(&OracleOptions::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &out {
        *rows.entry(o.table.as_str()).or_default() += 1;
    }
    let failed: Vec<&str> = out.iter().filter(|o| !o.passed || o.samples < 60).map(|o| o.label.as_str()).collect();
    let worst = out.iter().map(|o| o.max_rel_error).fold(0.0, f64::max);
    outcome(
        failed.is_empty() && secs < 120.0,
        format!("{} rows, worst relative error {worst:.1e}, failed {failed:?}, {secs:.2}s", out.len()),
    )
}

fn worked_examples() -> Outcome {
    let (a, b) = (0.75, 1.0);
    let (tq, br) = reducer("mm-irreversible", "oos", &[a, b, 1.0]);
    let r1 = tq.parametrize(&[1.0], 1, None).unwrap().r_terms[0][0];
    // ds/dt = -ε βs(α+s)/(αβ+(α+s)²)
    let r1_oracle = -b * (a + 1.0) / (a * b + (a + 1.0) * (a + 1.0));
    let sb = base_point(&br, &[1.0, 0.0]).unwrap().yb[0];
    let k = a + b - 1.0;
    let sb_oracle = (-k + (k * k + 4.0 * a).sqrt()) / 2.0;
    let (sq, _) = reducer("mm-irreversible", "oss", &[1.0, 1.0, 1.0]);
    let jet = sq.parametrize(&[1.0], 2, None).unwrap();
    let (psi1, r2) = (jet.psi[1], jet.r_terms[1][0]);
    // O(ε) invariance: -(α+s) c₁ - γ̃ c₀ = 0
    let psi1_derived = -1.0 / 4.0;
    let r1_ok = (r1 - r1_oracle).abs() < 1e-12 && (r1 + 0.459016).abs() < 1e-6;
    let sb_ok = (sb - sb_oracle).abs() < 1e-12 && (sb - 0.568729).abs() < 1e-6;
    let r2_ok = (r2 + 0.5).abs() < 1e-10;
    let psi1_matches_derivation = (psi1 - psi1_derived).abs() < 1e-10;
    let psi1_target = (psi1 - 0.25).abs() < 1e-10;
    assert!(r1_ok && sb_ok && r2_ok && psi1_matches_derivation, "{r1} {sb} {r2} {psi1}");
    outcome(
        r1_ok && sb_ok && r2_ok && psi1_target,
        format!(
            "tQSSA ds/dt coefficient {r1:.6}, base point {sb:.6}, sQSSA R2(1) = {r2:.10}, psi1(1) = {psi1:.10} \
             (target +0.25; the displayed c1 carries the wrong sign, the O(eps) invariance equation gives -0.25)"
        ),
    )
}

fn kf_equivalence() -> Outcome {
    let t = Instant::now();
    let kf = KfScenario::new(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut field = 0.0f64;
    for _ in 0..100 {
        let p = [rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0)];
        let got = kf.reduced_field(&p).unwrap();
        for (x, y) in got.iter().zip(kf.closed_form(&p)) {
            field = field.max((x - y).abs() / y.abs());
        }
    }
    let (a, b) = (0.004, 1.0);
    let mut sigma = 0.0f64;
    for _ in 0..100 {
        let z: f64 = rng.gen_range(0.0..2.0);
        let q = (a + b * z) * (a + b * z);
        let (s1, s2) = (q / (q + a), a / (q + a));
        let pr = kf.reducer.projectors(&kf.reducer.point(&[1.0, 1.0, z], None).unwrap()).unwrap();
        assert!((pr.pi_s[2][2] - s1).abs() < 1e-12 && (pr.pi_s[3][3] - s2).abs() < 1e-12);
        sigma = sigma.max((pr.pi_s[2][2] + pr.pi_s[3][3] - 1.0).abs()).max((s1 + s2 - 1.0).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        field <= 1e-10 && sigma <= 1e-14 && secs < 10.0,
        format!("max relative field error {field:.1e}, max |sigma1+sigma2-1| {sigma:.1e}, {secs:.2}s"),
    )
}

/// Least-squares slope of log residual against log ε.
fn residual_slope(r: &Reducer<f64>, s: f64, m: usize) -> f64 {
    let jet = r.parametrize(&[s], m, None).unwrap();
    let pts: Vec<(f64, f64)> =
        [1e-2f64, 1e-3, 1e-4].iter().map(|&e| (e.ln(), r.conjugacy_residual(&jet, e).unwrap().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn residual_orders() -> Outcome {
    let cases = [("tqssa", "oos", [0.75, 1.0, 1.0], 1usize), ("sqssa", "oss", [1.0, 1.0, 1.0], 2)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, code, tilde, m) in cases {
        let (r, _) = reducer("mm-irreversible", code, &tilde);
        let slopes: Vec<f64> = [0.3, 0.7, 1.0].iter().map(|&s| residual_slope(&r, s, m)).collect();
        ok &= slopes.iter().all(|k| (k - (m + 1) as f64).abs() <= 0.15);
        parts.push(format!("{name} m={m} slopes {slopes:.3?}"));
    }
    outcome(ok, parts.join(", "))
}

fn tracking_error(eps: f64) -> f64 {
    let (r, br) = reducer("mm-irreversible", "oos", &[0.75, 1.0, 1.0]);
    let bp = base_point(&br, &[1.0, 0.0]).unwrap();
    let t1 = 5.0 / eps;
    let tol = Tolerance { atol: 1e-12, rtol: 1e-10 };
    let full = integrate(|y: &[f64]| r.field(y, eps), &bp.yb, (0.0, t1), tol, Engine::Explicit).unwrap();
    let red =
        integrate(|s: &[f64]| r.slow_field(s, eps, 1, None).unwrap(), &bp.yb[..1], (0.0, t1), tol, Engine::Explicit)
            .unwrap();
    compare(&full, 0, &red, 0, 400, eps, 1).sup_error
}

/// Worst drift of each conservation law relative to `atol + rtol |c₀|`.
fn conservation_drift(id: &str, values: &[f64], t1: f64, engine: Engine) -> f64 {
    let m = CrnModel::builtin(id).unwrap();
    let rhs = build_rhs(&m);
    let params: Vec<f64> = m.params().iter().enumerate().map(|(i, p)| p.value.unwrap_or_else(|| values[i])).collect();
    let basis = conservation_laws(&m);
    let f = |y: &[f64]| {
        let mut x = y.to_vec();
        x.extend_from_slice(&params);
        rhs.comps.iter().map(|p| eval_f64(p, &x)).collect::<Vec<f64>>()
    };
    let y0: Vec<f64> = m.ics().iter().map(|v| v.unwrap()).collect();
    let tol = Tolerance::default();
    let tr = integrate(f, &y0, (0.0, t1), tol, engine).unwrap();
    let x = basis.symbol.as_ref().map_or(1.0, |n| params[m.param_index(n).unwrap()]);
    let mut worst = 0.0f64;
    for v in &basis.vectors {
        let w: Vec<f64> = v
            .iter()
            .map(|c| c.as_laurent().unwrap().iter().map(|(e, q)| rat_to_f64(q) * x.powi(*e)).sum())
            .collect();
        let law = |y: &[f64]| y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let c0 = law(&y0);
        for y in &tr.states {
            worst = worst.max((law(y) - c0).abs() / (tol.atol + tol.rtol * c0.abs()));
        }
    }
    worst
}

fn trajectory_convergence() -> Outcome {
    let t = Instant::now();
    let (e1, e2) = (tracking_error(5e-3), tracking_error(2.5e-3));
    let ratio = e1 / e2;
    let mm = conservation_drift("mm-irreversible", &[0.75, 1.0, 0.005], 1000.0, Engine::Explicit);
    let mmr = conservation_drift("mm-reversible", &[0.7, 0.6, 0.8, 0.5], 200.0, Engine::Explicit);
    let kf = conservation_drift("kim-forger", &[], 2e5, Engine::Implicit);
    let drift = mm.max(mmr).max(kf);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        (1.6..=2.6).contains(&ratio) && drift < 10.0 && secs < 60.0,
        format!(
            "sup errors {e1:.3e} / {e2:.3e}, ratio {ratio:.3}; conservation drift {drift:.1e} x tolerance, {secs:.2}s"
        ),
    )
}

fn kf_oscillation() -> Outcome {
    let t = Instant::now();
    let tol = Tolerance { atol: 1e-9, rtol: 1e-6 };
    let mut ok = true;
    let mut parts = Vec::new();
    for ratio in [1.0, 1.5] {
        let kf = KfScenario::new(ratio).unwrap();
        let full = kf.simulate_full(2e8, tol, Engine::Implicit).unwrap();
        let red = kf.simulate_reduced(2e8, tol, Engine::Implicit).unwrap();
        for (name, tr) in [("4-D", &full), ("3-D", &red)] {
            let o = Oscillation::of(tr, 2);
            let good = if ratio == 1.0 { o.decays() } else { o.sustained() };
            ok &= good;
            parts.push(format!(
                "gamma={ratio}rho6 {name} transient {:.3} late {:.2e}/{:.2e}",
                o.transient, o.late[0], o.late[1]
            ));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(ok && secs < 120.0, format!("{}, {secs:.1}s", parts.join("; ")))
}

struct Case {
    name: &'static str,
    id: &'static str,
    code: &'static str,
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

fn projector_suite() -> Outcome {
    let cases = [
        Case { name: "tqssa", id: "mm-irreversible", code: "oos" },
        Case { name: "sqssa", id: "mm-irreversible", code: "oss" },
        Case { name: "reversible", id: "mm-reversible", code: "osos" },
        Case { name: "kim-forger", id: "kim-forger", code: "" },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut counts = Vec::new();
    for c in &cases {
        let e = if c.code.is_empty() {
            let red = standard_reduction(&CrnModel::builtin(c.id).unwrap()).unwrap();
            let cats = red
                .field
                .param_names()
                .iter()
                .map(|p| (p.clone(), if p == "alpha" || p == "beta" { "one" } else { "small" }))
                .collect::<BTreeMap<_, _>>();
            let sc = ScalingAssignment::from_json(&serde_json::json!({ "categories": cats })).unwrap();
            expand(&red, &sc).unwrap()
        } else {
            system(c.id, c.code)
        };
        let f = &factorize(&e).unwrap()[0];
        let split = ChartSplit::last(e.dim);
        let k = split.k();
        let mut n = 0;
        let mut draws = 0;
        while n < 200 {
            draws += 1;
            assert!(draws < 10_000, "too few hyperbolic points for {}", c.name);
            let tilde: Vec<f64> = (0..e.param_names().len()).map(|_| rng.gen_range(0.3..3.0)).collect();
            let rho: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let r = Reducer::<f64>::new(&e, f, &split, &tilde).unwrap();
            let Ok(p) = r.point(&rho, None) else { continue };
            if !p.hyperbolic {
                continue;
            }
            let pr = r.projectors(&p).unwrap();
            let dim = e.dim;
            let sq = matmul(&pr.pi_s, &pr.pi_s);
            let idem: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| sq[i][j] - pr.pi_s[i][j]).collect()).collect();
            let pn = matvec(&pr.pi_s, &pr.n0);
            let pd = matmul(&pr.pi_s, &pr.dphi0);
            let dd: Vec<Vec<f64>> =
                (0..dim).map(|i| (0..k).map(|j| pd[i][j] - pr.dphi0[i][j]).collect()).collect();
            let li = matmul(&pr.dphi0_left, &pr.dphi0);
            let lid: Vec<Vec<f64>> =
                (0..k).map(|i| (0..k).map(|j| li[i][j] - if i == j { 1.0 } else { 0.0 }).collect()).collect();
            let scale = 1.0f64.max(max_abs(&pr.pi_s)).max(pr.n0.iter().fold(0.0, |a, v| a.max(v.abs())));
            let r1 = r.reduced_field_1(&rho, None).unwrap();
            let r1_mp = r.clone().with_left_inverse(LeftInverse::MoorePenrose).reduced_field_1(&rho, None).unwrap();
            let r1_scale = r1.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let inv = r1.iter().zip(&r1_mp).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / r1_scale;
            let errs = [max_abs(&idem) / scale, pn.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale, max_abs(&dd) / scale, max_abs(&lid), inv];
            worst = errs.iter().fold(worst, |a, v| a.max(*v));
            n += 1;
        }
        counts.push(format!("{} {n}", c.name));
    }
    outcome(worst <= 1e-11, format!("{} points, worst identity error {worst:.1e}", counts.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("census reproduction", census),
        ("closed-form oracle suite", oracles),
        ("worked-example values", worked_examples),
        ("KF reduction equivalence", kf_equivalence),
        ("conjugacy-residual order", residual_orders),
        ("trajectory convergence", trajectory_convergence),
        ("KF oscillation onset", kf_oscillation),
        ("projector property suite", projector_suite),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let o = f();
        println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == KNOWN_FAILURES.contains(&n) {
            unexpected.push(n);
        }
    }
    let passed = criteria.len() - KNOWN_FAILURES.len();
    if unexpected.is_empty() {
        println!("acceptance: {passed}/{} criteria pass; criterion 3 fails only on the sign of psi1, as recorded", criteria.len());
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
