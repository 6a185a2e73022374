use proptest::prelude::*;
use slowfast::crn::{
    build_rhs, conservation_laws, eval_f64, reduce_to_class, standard_reduction, CrnModel, PolyField,
};
use slowfast::field::{rref, RatFunc};
use slowfast::poly::{rat, Poly, Rational};

fn v(f: &PolyField, name: &str) -> Poly<Rational> {
    Poly::var(f.nvars(), f.var_index(name).unwrap())
}

fn k(f: &PolyField, c: i64) -> Poly<Rational> {
    Poly::constant(f.nvars(), rat(c, 1))
}

#[test]
fn dimensional_mm_matches_mass_action_rows() {
    let m = CrnModel::from_json(&serde_json::json!({
        "species": ["S", "E", "C", "P"],
        "params": {"k1": null, "km1": null, "k2": null, "km2": null},
        "reactions": [
            {"reactants": {"S": 1, "E": 1}, "products": {"C": 1}, "rate": "k1"},
            {"reactants": {"C": 1}, "products": {"S": 1, "E": 1}, "rate": "km1"},
            {"reactants": {"C": 1}, "products": {"E": 1, "P": 1}, "rate": "k2"},
            {"reactants": {"E": 1, "P": 1}, "products": {"C": 1}, "rate": "km2"}
        ]
    }))
    .unwrap();
    let f = build_rhs(&m);
    let (s, e, c, p) = (v(&f, "S"), v(&f, "E"), v(&f, "C"), v(&f, "P"));
    let v1 = &(&v(&f, "k1") * &s) * &e;
    let v2 = &v(&f, "km1") * &c;
    let v3 = &v(&f, "k2") * &c;
    let v4 = &(&v(&f, "km2") * &p) * &e;
    assert_eq!(f.comps[0], &v2 - &v1);
    assert_eq!(f.comps[1], &(&(&v2 - &v1) + &v3) - &v4);
    assert_eq!(f.comps[2], &(&(&v1 - &v2) - &v3) + &v4);
    assert_eq!(f.comps[3], &v3 - &v4);
}

#[test]
fn empty_network_is_zero_field() {
    let m = CrnModel::from_json(&serde_json::json!({"species": ["a", "b"], "params": {}, "reactions": []})).unwrap();
    let f = build_rhs(&m);
    assert!(f.comps.iter().all(|p| p.is_zero()));
}

#[test]
fn kim_forger_rows() {
    let m = CrnModel::builtin("kim-forger").unwrap();
    let f = build_rhs(&m);
    let (x, y, z, s, c) = (v(&f, "x"), v(&f, "y"), v(&f, "z"), v(&f, "s"), v(&f, "c"));
    let r = |n: &str| v(&f, n);
    let b = r("beta");
    let bind = &s * &z;
    let unbind = &r("alpha") * &c;
    let decay = &r("gamma") * &c;
    assert_eq!(f.comps[0], &(&r("rho1") * &s) - &(&r("rho2") * &x));
    assert_eq!(f.comps[1], &(&r("rho3") * &x) - &(&r("rho4") * &y));
    assert_eq!(f.comps[2], &(&(&(&r("rho5") * &y) - &(&r("rho6") * &z)) - &bind) + &unbind);
    assert_eq!(f.comps[3], &b * &(&(&unbind + &decay) - &bind));
    assert_eq!(f.comps[4], &(&bind - &unbind) - &decay);
}

fn beta_sym(c: i64) -> RatFunc {
    RatFunc::scaled_symbol(rat(c, 1), 1)
}

fn int(c: i64) -> RatFunc {
    RatFunc::constant(rat(c, 1))
}

#[test]
fn mm_conservation_span() {
    let m = CrnModel::builtin("mm-reversible").unwrap();
    let b = conservation_laws(&m);
    assert_eq!(b.rank_r, 2);
    assert_eq!(b.symbol.as_deref(), Some("beta"));
    let mut expected = vec![vec![int(0), int(1), int(1), int(0)], vec![int(1), int(0), beta_sym(1), int(1)]];
    rref(&mut expected);
    assert_eq!(b.vectors, expected);
}

#[test]
fn kf_conservation_span() {
    let m = CrnModel::builtin("kim-forger").unwrap();
    let b = conservation_laws(&m);
    assert_eq!(b.rank_r, 4);
    let mut expected = vec![vec![int(0), int(0), int(0), int(1), beta_sym(1)]];
    rref(&mut expected);
    assert_eq!(b.vectors, expected);
}

#[test]
fn full_rank_has_empty_basis() {
    let m = CrnModel::from_json(&serde_json::json!({
        "species": ["a", "b"],
        "params": {"k": null},
        "reactions": [
            {"reactants": {"a": 1}, "products": {}, "rate": "k"},
            {"reactants": {"b": 1}, "products": {}, "rate": "k"}
        ]
    }))
    .unwrap();
    let b = conservation_laws(&m);
    assert!(b.vectors.is_empty());
    assert_eq!(b.rank_r, 2);
    let red = reduce_to_class(&m, &b, &[0, 1], &[]).unwrap();
    assert_eq!(red.field.comps, build_rhs(&m).comps);
}

#[test]
fn conservation_annihilates_field_exactly() {
    for id in ["mm-reversible", "mm-irreversible", "kim-forger"] {
        let m = CrnModel::builtin(id).unwrap();
        let f = build_rhs(&m);
        let b = conservation_laws(&m);
        let sym = f.var_index(b.symbol.as_deref().unwrap()).unwrap();
        for row in &b.vectors {
            let mut acc = Poly::zero(f.nvars());
            for (i, coef) in row.iter().enumerate() {
                for (e, c) in coef.as_laurent().unwrap() {
                    let mut ex = vec![0; f.nvars()];
                    ex[sym] = e;
                    acc = &acc + &(&Poly::monomial(f.nvars(), ex, c) * &f.comps[i]);
                }
            }
            assert!(acc.is_zero(), "{id}");
        }
    }
}

#[test]
fn mm_reduction_matches_two_dimensional_model() {
    let m = CrnModel::builtin("mm-reversible").unwrap();
    let red = standard_reduction(&m).unwrap();
    let f = &red.field;
    assert_eq!(f.dim, 2);
    let (s, c) = (v(f, "s"), v(f, "c"));
    let (a, b, g, d) = (v(f, "alpha"), v(f, "beta"), v(f, "gamma"), v(f, "delta"));
    let one = k(f, 1);
    let bind = &s * &(&one - &c);
    let back = &a * &c;
    let cat = &g * &c;
    let rev = &(&d * &(&(&one - &s) - &(&b * &c))) * &(&one - &c);
    assert_eq!(f.comps[0], &b * &(&back - &bind));
    assert_eq!(f.comps[1], &(&(&bind - &back) - &cat) + &rev);
    let e_expr = &red.eliminated.iter().find(|(i, _)| *i == 1).unwrap().1;
    let p_expr = &red.eliminated.iter().find(|(i, _)| *i == 3).unwrap().1;
    assert_eq!(*e_expr, &one - &c);
    assert_eq!(*p_expr, &(&one - &s) - &(&b * &c));
}

#[test]
fn kf_reduction_matches_four_dimensional_model() {
    let m = CrnModel::builtin("kim-forger").unwrap();
    let red = standard_reduction(&m).unwrap();
    let f = &red.field;
    assert_eq!(f.dim, 4);
    let (z, s) = (v(f, "z"), v(f, "s"));
    let b = v(f, "beta");
    let binv = Poly::monomial(f.nvars(), {
        let mut e = vec![0; f.nvars()];
        e[f.var_index("beta").unwrap()] = -1;
        e
    }, rat(1, 1));
    let c_expr = &binv * &(&k(f, 1) - &s);
    assert_eq!(red.eliminated[0].1, c_expr);
    let bind = &s * &z;
    let unbind = &v(f, "alpha") * &c_expr;
    let decay = &v(f, "gamma") * &c_expr;
    assert_eq!(f.comps[2], &(&(&(&v(f, "rho5") * &v(f, "y")) - &(&v(f, "rho6") * &z)) - &bind) + &unbind);
    assert_eq!(f.comps[3], &b * &(&(&unbind + &decay) - &bind));
}

#[test]
fn singular_chart_is_rejected() {
    let m = CrnModel::builtin("mm-reversible").unwrap();
    let b = conservation_laws(&m);
    // eliminating s and p leaves a singular block in e + c = 1 rows
    let err = reduce_to_class(&m, &b, &[1, 2], &[rat(1, 1), rat(1, 1)]).unwrap_err();
    assert!(err.to_string().contains("chart"));
}

/// d/dt of each elimination (chain rule through the reduced field) equals
/// the full right-hand side of that species, as polynomials.
#[test]
fn elimination_roundtrip_identity() {
    for id in ["mm-reversible", "mm-irreversible", "kim-forger"] {
        let m = CrnModel::builtin(id).unwrap();
        let red = standard_reduction(&m).unwrap();
        let full = build_rhs(&m);
        let f = &red.field;
        let r = f.dim;
        let p = m.params().len();
        let n = m.species().len();
        // reduced ring -> species ring
        let mut map: Vec<usize> = red.chart.clone();
        map.extend((0..p).map(|k| n + k));
        for (sp, expr) in &red.eliminated {
            let mut dt = Poly::zero(f.nvars());
            for j in 0..r {
                dt = &dt + &(&expr.derivative(j) * &f.comps[j]);
            }
            let mut target = full.comps[*sp].clone();
            for (e2, ex2) in &red.eliminated {
                target = target.substitute(*e2, &ex2.remap(n + p, &map));
            }
            let mut back = vec![0usize; n + p];
            for (kk, &i) in red.chart.iter().enumerate() {
                back[i] = kk;
            }
            for kk in 0..p {
                back[n + kk] = r + kk;
            }
            let target = target.remap(f.nvars(), &back);
            assert!((&dt - &target).is_zero(), "{id} species {sp}");
        }
    }
}

proptest! {
    #[test]
    fn conservation_holds_numerically(xs in prop::collection::vec(0.0f64..2.0, 5), ps in prop::collection::vec(0.1f64..3.0, 9)) {
        let m = CrnModel::builtin("kim-forger").unwrap();
        let f = build_rhs(&m);
        let mut point = xs.clone();
        point.extend_from_slice(&ps);
        let rhs: Vec<f64> = f.comps.iter().map(|c| eval_f64(c, &point)).collect();
        let beta = ps[1];
        let total = rhs[3] + beta * rhs[4];
        let scale = rhs.iter().map(|x| x.abs()).fold(1.0, f64::max);
        prop_assert!(total.abs() <= 1e-14 * scale);
    }
}

#[test]
fn totals_of_builtins() {
    let m = CrnModel::builtin("mm-irreversible").unwrap();
    let red = standard_reduction(&m).unwrap();
    assert!(red.totals.iter().all(|t| *t == rat(1, 1)));
}
