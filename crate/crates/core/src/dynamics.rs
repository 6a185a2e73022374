//! Time integration of full and reduced fields, fast-fibre base points and
//! the substrate/product rate pair.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::geometry::Branch;
use crate::linalg;
use crate::reduction::ReductionJet;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance<T> {
    pub atol: T,
    pub rtol: T,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance { atol: T::lit(1e-10), rtol: T::lit(1e-8) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Dormand-Prince 5(4).
    Explicit,
    /// Two-stage L-stable SDIRK with Newton inner iteration.
    Implicit,
}

impl Engine {
    /// Stiff when ε·|λ_fast| falls below 1e−3.
    pub fn auto(eps: f64, fast_eigenvalue: f64) -> Engine {
        if eps * fast_eigenvalue.abs() < 1e-3 {
            Engine::Implicit
        } else {
            Engine::Explicit
        }
    }

    pub fn parse(s: &str) -> Option<Engine> {
        match s {
            "explicit" | "dopri5" => Some(Engine::Explicit),
            "implicit" | "sdirk2" => Some(Engine::Implicit),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// Field values at the stored states, used for dense output.
    pub slopes: Vec<Vec<T>>,
    pub stats: Stats,
    pub tol: Tolerance<T>,
    pub engine: Engine,
}

impl<T: Real> Trajectory<T> {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn last(&self) -> &[T] {
        self.states.last().unwrap()
    }

    pub fn t_end(&self) -> T {
        *self.times.last().unwrap()
    }

    /// Cubic Hermite interpolation; clamps outside the covered interval.
    pub fn sample(&self, t: T) -> Vec<T> {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let th = (t - t0) / h;
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = (one + two * th) * (one - th) * (one - th);
        let h10 = th * (one - th) * (one - th);
        let h01 = th * th * (three - two * th);
        let h11 = th * th * (th - one);
        (0..self.dim())
            .map(|c| {
                h00 * self.states[i][c]
                    + h10 * h * self.slopes[i][c]
                    + h01 * self.states[i + 1][c]
                    + h11 * h * self.slopes[i + 1][c]
            })
            .collect()
    }

    /// `n` uniformly spaced samples over `[t0, t_end]`.
    pub fn grid(&self, n: usize) -> (Vec<T>, Vec<Vec<T>>) {
        let t0 = self.times[0];
        let t1 = self.t_end();
        let ts: Vec<T> = (0..n).map(|i| t0 + (t1 - t0) * T::lit(i as f64 / (n - 1).max(1) as f64)).collect();
        let ys = ts.iter().map(|&t| self.sample(t)).collect();
        (ts, ys)
    }

    pub fn write_csv<W: Write>(&self, out: W, names: &[String], samples: Option<usize>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::numerical(Stage::Integrate, format!("csv: {e}"));
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        let (ts, ys) = match samples {
            Some(n) => self.grid(n),
            None => (self.times.clone(), self.states.clone()),
        };
        for (t, y) in ts.iter().zip(&ys) {
            let mut row = vec![t.to_string()];
            row.extend(y.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::numerical(Stage::Integrate, format!("csv: {e}")))?;
        Ok(())
    }
}

const MAX_STEPS: usize = 5_000_000;

fn wnorm<T: Real>(e: &[T], y0: &[T], y1: &[T], tol: &Tolerance<T>) -> T {
    let n = T::lit(e.len().max(1) as f64);
    let s = e.iter().zip(y0.iter().zip(y1)).fold(T::zero(), |acc, (ei, (a, b))| {
        let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
        acc + (*ei / sc) * (*ei / sc)
    });
    (s / n).sqrt()
}

fn check_finite<T: Real>(y: &[T], t: T) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(Stage::Integrate, format!("non-finite state at t = {t}")));
    }
    Ok(())
}

fn axpy<T: Real>(y: &[T], h: T, terms: &[(T, &[T])]) -> Vec<T> {
    (0..y.len())
        .map(|i| y[i] + h * terms.iter().fold(T::zero(), |acc, (c, k)| acc + *c * k[i]))
        .collect()
}

fn initial_step<T: Real>(y: &[T], f0: &[T], span: T, tol: &Tolerance<T>) -> T {
    let zero = vec![T::zero(); y.len()];
    let d0 = wnorm(y, &zero, y, tol);
    let d1 = wnorm(f0, &zero, y, tol);
    let h = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    let h = h.min(span.abs());
    h.max(span.abs() * T::lit(1e-12))
}

pub fn integrate<T: Real, F: Fn(&[T]) -> Vec<T>>(
    field: F,
    y0: &[T],
    t_span: (T, T),
    tol: Tolerance<T>,
    engine: Engine,
) -> Result<Trajectory<T>> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::invalid(Stage::Integrate, "time span must be increasing"));
    }
    check_finite(y0, t0)?;
    match engine {
        Engine::Explicit => dopri5(&field, y0, t0, t1, tol),
        Engine::Implicit => sdirk2(&field, y0, t0, t1, tol),
    }
}

// Dormand-Prince tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth minus fourth order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri5<T: Real, F: Fn(&[T]) -> Vec<T>>(f: &F, y0: &[T], t0: T, t1: T, tol: Tolerance<T>) -> Result<Trajectory<T>> {
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(&y);
    stats.evaluations += 1;
    let mut traj = Trajectory {
        times: vec![t],
        states: vec![y.clone()],
        slopes: vec![k1.clone()],
        stats: Stats::default(),
        tol,
        engine: Engine::Explicit,
    };
    let mut h = initial_step(&y, &k1, t1 - t0, &tol);
    let h_min = (t1 - t0).abs() * T::lit(1e-15);
    while t < t1 {
        if stats.steps + stats.rejected > MAX_STEPS {
            return Err(Error::numerical(Stage::Integrate, "step budget exhausted"));
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let mut ks: Vec<Vec<T>> = vec![k1.clone()];
        for s in 1..7 {
            let terms: Vec<(T, &[T])> = (0..s).map(|j| (T::lit(A[s][j]), ks[j].as_slice())).collect();
            let ys = axpy(&y, h, &terms);
            ks.push(f(&ys));
        }
        stats.evaluations += 6;
        let terms: Vec<(T, &[T])> = (0..6).map(|j| (T::lit(A[6][j]), ks[j].as_slice())).collect();
        let y_new = axpy(&y, h, &terms);
        let err_v: Vec<T> = (0..y.len())
            .map(|i| h * (0..7).fold(T::zero(), |acc, j| acc + T::lit(E[j]) * ks[j][i]))
            .collect();
        let err = wnorm(&err_v, &y, &y_new, &tol);
        if !err.is_finite() {
            stats.rejected += 1;
            h = h * T::lit(0.2);
            if h < h_min {
                return Err(Error::numerical(Stage::Integrate, format!("non-finite state at t = {t}")));
            }
            continue;
        }
        let fac = if err == T::zero() { T::lit(5.0) } else { T::lit(0.9) * err.powf(T::lit(-0.2)) };
        let fac = fac.max(T::lit(0.2)).min(T::lit(5.0));
        if err <= T::one() {
            t = if h == t1 - t { t1 } else { t + h };
            y = y_new;
            k1 = ks[6].clone();
            check_finite(&y, t)?;
            stats.steps += 1;
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.slopes.push(k1.clone());
        } else {
            stats.rejected += 1;
        }
        h = h * fac;
        if h < h_min && t < t1 {
            return Err(Error::numerical(Stage::Integrate, format!("step size underflow at t = {t}")));
        }
    }
    traj.stats = stats;
    Ok(traj)
}

fn jacobian<T: Real, F: Fn(&[T]) -> Vec<T>>(f: &F, y: &[T], fy: &[T]) -> Vec<Vec<T>> {
    let n = y.len();
    let mut jac = vec![vec![T::zero(); n]; n];
    let root = T::epsilon().sqrt();
    for j in 0..n {
        let d = root * y[j].abs().max(T::one());
        let mut yp = y.to_vec();
        yp[j] = yp[j] + d;
        let fp = f(&yp);
        for i in 0..n {
            jac[i][j] = (fp[i] - fy[i]) / d;
        }
    }
    jac
}

fn sdirk2<T: Real, F: Fn(&[T]) -> Vec<T>>(f: &F, y0: &[T], t0: T, t1: T, tol: Tolerance<T>) -> Result<Trajectory<T>> {
    let n = y0.len();
    let g = T::one() - T::one() / T::lit(2.0).sqrt();
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut fy = f(&y);
    stats.evaluations += 1;
    let mut traj = Trajectory {
        times: vec![t],
        states: vec![y.clone()],
        slopes: vec![fy.clone()],
        stats: Stats::default(),
        tol,
        engine: Engine::Implicit,
    };
    let mut h = initial_step(&y, &fy, t1 - t0, &tol);
    let h_min = (t1 - t0).abs() * T::lit(1e-15);
    let mut jac = jacobian(f, &y, &fy);
    stats.evaluations += n;
    while t < t1 {
        if stats.steps + stats.rejected > MAX_STEPS {
            return Err(Error::numerical(Stage::Integrate, "step budget exhausted"));
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let hg = h * g;
        let m: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() } - hg * jac[i][j]).collect())
            .collect();
        // stage solve: Y = base + hγ f(Y)
        let stage = |base: &[T], start: Vec<T>, evals: &mut usize| -> Option<Vec<T>> {
            let mut z = start;
            for _ in 0..12 {
                let fz = f(&z);
                *evals += 1;
                let r: Vec<T> = (0..n).map(|i| z[i] - base[i] - hg * fz[i]).collect();
                let d = linalg::solve(&m, &r)?;
                for i in 0..n {
                    z[i] = z[i] - d[i];
                }
                if z.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                if wnorm(&d, &z, &z, &tol) < T::lit(1e-3) {
                    return Some(z);
                }
            }
            None
        };
        let mut ev = 0;
        let y1 = stage(&y, y.clone(), &mut ev);
        let result = y1.and_then(|y1| {
            let k1: Vec<T> = (0..n).map(|i| (y1[i] - y[i]) / hg).collect();
            let base: Vec<T> = (0..n).map(|i| y[i] + h * (T::one() - g) * k1[i]).collect();
            let start: Vec<T> = (0..n).map(|i| y1[i] + h * (T::one() - g) * k1[i]).collect();
            stage(&base, start, &mut ev).map(|y2| (k1, base, y2))
        });
        stats.evaluations += ev;
        let Some((k1, base, y_new)) = result else {
            stats.rejected += 1;
            h = h * T::lit(0.25);
            if h < h_min {
                return Err(Error::numerical(Stage::Integrate, format!("step size underflow at t = {t}")));
            }
            jac = jacobian(f, &y, &fy);
            stats.evaluations += n;
            continue;
        };
        let k2: Vec<T> = (0..n).map(|i| (y_new[i] - base[i]) / hg).collect();
        // embedded first-order estimate, filtered through (I - hγJ)⁻¹
        let raw: Vec<T> = (0..n).map(|i| hg * (k2[i] - k1[i])).collect();
        let est = linalg::solve(&m, &raw).unwrap_or(raw);
        let err = wnorm(&est, &y, &y_new, &tol);
        let fac = if err == T::zero() { T::lit(4.0) } else { T::lit(0.9) * err.powf(T::lit(-0.5)) };
        let fac = fac.max(T::lit(0.2)).min(T::lit(4.0));
        if err.is_finite() && err <= T::one() {
            t = if h == t1 - t { t1 } else { t + h };
            y = y_new;
            check_finite(&y, t)?;
            fy = f(&y);
            stats.evaluations += 1;
            stats.steps += 1;
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.slopes.push(fy.clone());
            jac = jacobian(f, &y, &fy);
            stats.evaluations += n;
        } else {
            stats.rejected += 1;
        }
        h = if err.is_finite() { h * fac } else { h * T::lit(0.2) };
        if h < h_min && t < t1 {
            return Err(Error::numerical(Stage::Integrate, format!("step size underflow at t = {t}")));
        }
    }
    traj.stats = stats;
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberKind {
    LinearExact,
    LinearApprox,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasePoint<T> {
    pub y0: Vec<T>,
    pub yb: Vec<T>,
    pub fiber_kind: FiberKind,
}

/// Intersect `y0 + t N₀(y0)` with `{f₀ = 0}` inside the nonnegative orthant,
/// taking the root nearest to `y0`.
pub fn base_point<T: Real>(branch: &Branch<T>, y0: &[T]) -> Result<BasePoint<T>> {
    let kind = if branch.n0_constant { FiberKind::LinearExact } else { FiberKind::LinearApprox };
    let tiny = T::lit(1e-14);
    if branch.f0(y0).abs() <= tiny {
        return Ok(BasePoint { y0: y0.to_vec(), yb: y0.to_vec(), fiber_kind: kind });
    }
    let n = branch.n0(y0);
    let big = T::lit(10.0) * (T::one() + y0.iter().fold(T::zero(), |a, v| a.max(v.abs())));
    let (mut lo, mut hi) = (-big, big);
    for (yi, ni) in y0.iter().zip(&n) {
        if ni.abs() > tiny {
            let t = -*yi / *ni;
            if *ni > T::zero() {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
        }
    }
    if lo > hi {
        return Err(Error::invalid(Stage::BasePoint, "initial condition lies outside the nonnegative orthant"));
    }
    let g = |t: T| branch.f0(&axpy(y0, t, &[(T::one(), n.as_slice())]));
    let steps = 400;
    let mut best: Option<T> = None;
    let mut consider = |a: T, b: T| {
        let (mut a, mut b) = (a, b);
        let mut ga = g(a);
        for _ in 0..200 {
            let m = (a + b) / T::lit(2.0);
            let gm = g(m);
            if ga * gm <= T::zero() {
                b = m;
            } else {
                a = m;
                ga = gm;
            }
        }
        let r = (a + b) / T::lit(2.0);
        if best.map_or(true, |x: T| r.abs() < x.abs()) {
            best = Some(r);
        }
    };
    let mut prev = (lo, g(lo));
    for i in 1..=steps {
        let t = lo + (hi - lo) * T::lit(i as f64 / steps as f64);
        let v = g(t);
        if prev.1 == T::zero() {
            consider(prev.0, prev.0);
        } else if prev.1 * v < T::zero() || v == T::zero() {
            consider(prev.0, t);
        }
        prev = (t, v);
    }
    let t = best.ok_or_else(|| Error::numerical(Stage::BasePoint, "fast fibre does not meet the critical manifold"))?;
    let yb = axpy(y0, t, &[(T::one(), n.as_slice())]);
    Ok(BasePoint { y0: y0.to_vec(), yb, fiber_kind: kind })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePair<T> {
    pub ds_dt: T,
    pub dp_dt: T,
    /// Power of ε of the first nonzero slow-field term.
    pub order: usize,
}

const RATE_TOL: f64 = 1e-13;

fn leading<T: Real>(jet: &ReductionJet<T>) -> Result<(usize, T)> {
    if jet.dpsi.is_empty() {
        return Err(Error::unsupported(Stage::Parametrize, "rate pair needs a one-dimensional slow base"));
    }
    let (j, r) = jet
        .leading_term(T::lit(RATE_TOL))
        .ok_or_else(|| Error::unsupported(Stage::Parametrize, "flow slower than computed order"))?;
    Ok((j, r[0]))
}

/// Leading-order `(ds/dt, dp/dt)` with `s + βc + p` conserved.
pub fn substrate_product_pair<T: Real>(jet: &ReductionJet<T>, beta: T, eps: T) -> Result<RatePair<T>> {
    if jet.rho.first().is_some_and(|s| *s == T::zero()) {
        return Ok(RatePair { ds_dt: T::zero(), dp_dt: T::zero(), order: jet.order });
    }
    let (j, r) = leading(jet)?;
    let w = eps.powi(j as i32);
    let ds = w * r;
    Ok(RatePair { ds_dt: ds, dp_dt: -(beta * jet.dpsi[0] + T::one()) * ds, order: j })
}

/// Rates `(k₊, l₊)` of the one-step network with `ds/dt = −(k₊ − l₊)s`.
pub fn one_step_coefficients<T: Real>(jet: &ReductionJet<T>, beta: T, eps: T) -> Result<(T, T)> {
    let s = jet.rho[0];
    if s <= T::zero() {
        return Err(Error::invalid(Stage::Parametrize, "one-step rates are undefined at s = 0"));
    }
    let (j, r) = leading(jet)?;
    let w = eps.powi(j as i32) * r / s;
    let c1 = jet.dpsi[0];
    Ok((-(beta * c1 + T::one()) * w, -(beta * c1) * w))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub sup_error: f64,
    pub l2_error: f64,
    pub epsilon: f64,
    pub order: usize,
}

/// Sup and RMS difference of one component on a uniform grid over the common interval.
pub fn compare(
    a: &Trajectory<f64>,
    ia: usize,
    b: &Trajectory<f64>,
    ib: usize,
    samples: usize,
    epsilon: f64,
    order: usize,
) -> Comparison {
    let t0 = a.times[0].max(b.times[0]);
    let t1 = a.t_end().min(b.t_end());
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    for i in 0..samples {
        let t = t0 + (t1 - t0) * i as f64 / (samples - 1).max(1) as f64;
        let d = (a.sample(t)[ia] - b.sample(t)[ib]).abs();
        sup = sup.max(d);
        sq += d * d;
    }
    Comparison { sup_error: sup, l2_error: (sq / samples as f64).sqrt(), epsilon, order }
}
