use slowfast::crn::{build_rhs, conservation_laws, eval_f64, standard_reduction, CrnModel};
use slowfast::dynamics::{
    base_point, compare, integrate, one_step_coefficients, substrate_product_pair, Engine, FiberKind, Tolerance,
};
use slowfast::epsilon::{expand, factorize, EpsilonSystem, ScalingAssignment};
use slowfast::geometry::{Branch, ChartSplit};
use slowfast::poly::rat_to_f64;
use slowfast::reduction::Reducer;

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

#[test]
fn harmonic_period_both_engines() {
    let f = |y: &[f64]| vec![-y[1], y[0]];
    let tp = 2.0 * std::f64::consts::PI;
    let tr = integrate(f, &[1.0, 0.0], (0.0, tp), Tolerance::default(), Engine::Explicit).unwrap();
    let y = tr.last();
    assert!((y[0] - 1.0).abs() < 1e-7 && y[1].abs() < 1e-7);
    let tol = Tolerance { atol: 1e-12, rtol: 1e-10 };
    let tr = integrate(f, &[1.0, 0.0], (0.0, tp), tol, Engine::Implicit).unwrap();
    let y = tr.last();
    assert!((y[0] - 1.0).abs() < 1e-5 && y[1].abs() < 1e-5, "{y:?}");
    // dense output on the circle
    let mid = tr.sample(tp / 3.0);
    assert!((mid[0] - (tp / 3.0).cos()).abs() < 1e-5);
}

#[test]
fn times_strictly_increase() {
    let tr = integrate(|y: &[f64]| vec![-y[0]], &[1.0], (0.0, 3.0), Tolerance::default(), Engine::Explicit).unwrap();
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(tr.t_end(), 3.0);
    assert!((tr.last()[0] - (-3.0f64).exp()).abs() < 1e-8);
}

#[test]
fn stiff_linear_problem() {
    // y1' = -1e6 (y1 - cos t), y2' = -y2
    let f = |y: &[f64]| vec![-1e6 * (y[0] - y[2].cos()), -y[1], 1.0];
    let tr = integrate(f, &[0.0, 1.0, 0.0], (0.0, 2.0), Tolerance { atol: 1e-8, rtol: 1e-6 }, Engine::Implicit).unwrap();
    let y = tr.last();
    assert!((y[0] - 2.0f64.cos()).abs() < 1e-4);
    assert!((y[1] - (-2.0f64).exp()).abs() < 1e-4);
    assert!(tr.stats.steps < 5_000, "{}", tr.stats.steps);
}

#[test]
fn blow_up_is_numerical_failure() {
    let err = integrate(|y: &[f64]| vec![y[0] * y[0]], &[1.0], (0.0, 2.0), Tolerance::default(), Engine::Explicit)
        .unwrap_err();
    assert!(err.is_numerical());
    assert!(err.to_string().starts_with("integrate"));
}

#[test]
fn tqssa_base_point() {
    let (a, b) = (0.75, 1.0);
    let (_, br) = reducer("mm-irreversible", "oos", &[a, b, 1.0]);
    let bp = base_point(&br, &[1.0, 0.0]).unwrap();
    assert_eq!(bp.fiber_kind, FiberKind::LinearExact);
    let k = a + b - 1.0;
    let sb = (-k + (k * k + 4.0 * a).sqrt()) / 2.0;
    assert!((bp.yb[0] - sb).abs() < 1e-12);
    assert!((bp.yb[1] - sb / (sb + a)).abs() < 1e-12);
    assert!((bp.yb[0] - 0.568729).abs() < 1e-6);
    assert!((bp.yb[1] - 0.431271).abs() < 1e-6);
    // displacement along N0 = (-beta, 1)
    let d = [bp.yb[0] - 1.0, bp.yb[1]];
    assert!((d[0] + b * d[1]).abs() < 1e-12);
    assert!(br.f0(&bp.yb).abs() <= 1e-12);
}

#[test]
fn sqssa_base_point_and_correction() {
    let (a, g) = (0.6, 1.4);
    let (r, br) = reducer("mm-irreversible", "oss", &[a, 1.0, g]);
    let bp = base_point(&br, &[1.0, 0.0]).unwrap();
    assert!((bp.yb[0] - 1.0).abs() < 1e-14);
    assert!((bp.yb[1] - 1.0 / (a + 1.0)).abs() < 1e-12);
    let eps = 1e-3;
    let jet = r.parametrize(&[1.0], 1, None).unwrap();
    let y = r.embed(&jet, eps);
    // c = 1/(a+1) + eps c1(1) with c1(s) = -g s / (a+s)^2
    assert!((y[1] - (1.0 / (a + 1.0) - eps * g / ((a + 1.0) * (a + 1.0)))).abs() < 1e-14);
}

#[test]
fn base_point_on_manifold_is_fixed() {
    let (_, br) = reducer("mm-irreversible", "oos", &[0.75, 1.0, 1.0]);
    let y = [0.5, 0.5 / 1.25];
    let bp = base_point(&br, &y).unwrap();
    assert_eq!(bp.yb, y.to_vec());
}

#[test]
fn rate_pair_and_one_step() {
    let (a, b) = (0.75, 1.0);
    let (r, _) = reducer("mm-irreversible", "oos", &[a, b, 1.0]);
    let eps = 1e-3;
    let jet = r.parametrize(&[1.0], 1, None).unwrap();
    let pair = substrate_product_pair(&jet, b, eps).unwrap();
    assert_eq!(pair.order, 1);
    // dp/dt = eps gamma c0(s)
    assert!((pair.dp_dt / eps - 1.0 / 1.75).abs() < 1e-12);
    assert!((pair.ds_dt / eps + 0.459016).abs() < 1e-6);
    let (kp, lp) = one_step_coefficients(&jet, b, eps).unwrap();
    assert!((kp / eps - 0.571429).abs() < 1e-6);
    assert!((lp / eps - 0.112412).abs() < 1e-6);
    assert!((jet.dpsi[0] - 0.244898).abs() < 1e-6);
    for s in [0.1, 0.4, 0.9] {
        let jet = r.parametrize(&[s], 1, None).unwrap();
        let pair = substrate_product_pair(&jet, b, eps).unwrap();
        let (kp, lp) = one_step_coefficients(&jet, b, eps).unwrap();
        // k s - l s = -ds/dt, and dp/dt + ds/dt = -beta c0' ds/dt
        assert!((kp * s - lp * s + pair.ds_dt).abs() < 1e-15);
        assert!((pair.dp_dt + pair.ds_dt + b * jet.dpsi[0] * pair.ds_dt).abs() < 1e-15);
    }
    let zero = r.parametrize(&[0.0], 1, None).unwrap();
    let p = substrate_product_pair(&zero, b, eps).unwrap();
    assert_eq!((p.ds_dt, p.dp_dt), (0.0, 0.0));
    assert!(one_step_coefficients(&zero, b, eps).is_err());
}

#[test]
fn sqssa_pair_is_second_order() {
    let (a, g) = (0.8, 1.3);
    let (r, _) = reducer("mm-irreversible", "oss", &[a, 1.0, g]);
    let eps = 1e-3;
    let jet = r.parametrize(&[0.7], 2, None).unwrap();
    // beta is small, so the leading-order pair uses beta = 0
    let p = substrate_product_pair(&jet, 0.0, eps).unwrap();
    assert_eq!(p.order, 2);
    let v = eps * eps * g * 0.7 / (a + 0.7);
    assert!((p.ds_dt + v).abs() < 1e-18);
    assert!((p.dp_dt - v).abs() < 1e-18);
    let first = r.parametrize(&[0.7], 1, None).unwrap();
    assert!(substrate_product_pair(&first, 0.0, eps).is_err());
}

#[test]
fn flat_branch_has_no_backward_rate() {
    let (r, _) = reducer("mm-reversible", "soso", &[0.7, 0.6, 0.8, 0.5]);
    let jet = r.parametrize(&[0.4], 1, None).unwrap();
    if let Ok((_, lp)) = one_step_coefficients(&jet, 0.6, 1e-3) {
        assert_eq!(lp.abs(), 0.0);
    }
    assert_eq!(jet.dpsi[0], 0.0);
}

fn tracking_error(eps: f64) -> f64 {
    let tilde = [0.75, 1.0, 1.0];
    let (r, br) = reducer("mm-irreversible", "oos", &tilde);
    let bp = base_point(&br, &[1.0, 0.0]).unwrap();
    let t1 = 5.0 / eps;
    let tol = Tolerance { atol: 1e-12, rtol: 1e-10 };
    let full = integrate(|y: &[f64]| r.field(y, eps), &bp.yb, (0.0, t1), tol, Engine::Explicit).unwrap();
    let red = integrate(
        |s: &[f64]| r.slow_field(s, eps, 1, None).unwrap(),
        &bp.yb[..1],
        (0.0, t1),
        tol,
        Engine::Explicit,
    )
    .unwrap();
    compare(&full, 0, &red, 0, 400, eps, 1).sup_error
}

#[test]
fn tqssa_tracking_error_is_first_order() {
    let e1 = tracking_error(5e-3);
    let e2 = tracking_error(2.5e-3);
    let ratio = e1 / e2;
    assert!((1.6..=2.6).contains(&ratio), "{e1} {e2} {ratio}");
}

#[test]
fn conservation_along_full_trajectory() {
    let m = CrnModel::builtin("kim-forger").unwrap();
    let rhs = build_rhs(&m);
    let params: Vec<f64> = m.params().iter().map(|p| p.value.unwrap()).collect();
    let basis = conservation_laws(&m);
    let f = |y: &[f64]| {
        let mut x = y.to_vec();
        x.extend_from_slice(&params);
        rhs.comps.iter().map(|p| eval_f64(p, &x)).collect::<Vec<f64>>()
    };
    let y0: Vec<f64> = m.ics().iter().map(|v| v.unwrap()).collect();
    let tol = Tolerance::default();
    let tr = integrate(f, &y0, (0.0, 2e5), tol, Engine::Implicit).unwrap();
    let law = |y: &[f64], v: &[f64]| y.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let vs: Vec<Vec<f64>> = basis
        .vectors
        .iter()
        .map(|v| {
            v.iter()
                .map(|c| {
                    let x = basis.symbol.as_ref().map_or(1.0, |n| params[m.param_index(n).unwrap()]);
                    c.as_laurent().unwrap().iter().map(|(e, q)| rat_to_f64(q) * x.powi(*e)).sum()
                })
                .collect()
        })
        .collect();
    for v in &vs {
        let c0 = law(&y0, v);
        for y in &tr.states {
            assert!((law(y, v) - c0).abs() < 10.0 * (tol.atol + tol.rtol * c0.abs()) * y.len() as f64);
        }
    }
}

#[test]
fn csv_header() {
    let tr = integrate(|y: &[f64]| vec![-y[0], y[0]], &[1.0, 0.0], (0.0, 1.0), Tolerance::default(), Engine::Explicit)
        .unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf, &["s".into(), "p".into()], Some(5)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,s,p");
    assert_eq!(lines.len(), 6);
}

#[test]
fn engine_heuristic() {
    assert_eq!(Engine::auto(5e-6, 0.13), Engine::Implicit);
    assert_eq!(Engine::auto(5e-3, 2.2), Engine::Explicit);
}

fn sqssa_relative_error(eps: f64) -> f64 {
    let tilde = [1.0, 1.0, 1.0];
    let (r, br) = reducer("mm-irreversible", "oss", &tilde);
    let bp = base_point(&br, &[1.0, 0.0]).unwrap();
    let t1 = 3.0 / (eps * eps);
    let tol = Tolerance { atol: 1e-12, rtol: 1e-10 };
    let full = integrate(|y: &[f64]| r.field(y, eps), &bp.yb, (0.0, t1), tol, Engine::Explicit).unwrap();
    let red =
        integrate(|s: &[f64]| r.slow_field(s, eps, 2, None).unwrap(), &bp.yb[..1], (0.0, t1), tol, Engine::Explicit)
            .unwrap();
    let (ts, ys) = full.grid(400);
    ts.iter()
        .zip(&ys)
        .map(|(t, y)| (y[0] - red.sample(*t)[0]).abs() / y[0].abs().max(1e-12))
        .fold(0.0, f64::max)
}

#[test]
fn sqssa_second_order_tracking() {
    let e1 = sqssa_relative_error(1e-2);
    let e2 = sqssa_relative_error(5e-3);
    let ratio = e1 / e2;
    assert!((1.4..=2.6).contains(&ratio), "{e1} {e2} {ratio}");
}
