//! Structural and cross-route checks behind `gapflow verify`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fredholm::{
    fredholm_det, gap_interval, nystrom_solve, operator_grid, truncate_interval, working_range,
};
use crate::painleve::{painleve_gap, route_params};
use crate::tw::{
    check_integrals, endpoint_sign, integrate, state_from_nystrom, states_at, sigma_algebraic, TwState,
};
use crate::weights::{cd_kernel, kernel_sum, orthonormal_poly, recurrence_data, EnsembleSpec, Kind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, max_residual: f64, tolerance: f64) -> Self {
        Self { name: name.into(), max_residual, tolerance, pass: max_residual.is_finite() && max_residual <= tolerance }
    }

    fn failed(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), max_residual: f64::INFINITY, tolerance, pass: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub spec: EnsembleSpec,
    pub s_range: (f64, f64),
    pub checks: Vec<Check>,
    /// Errors hit while running individual checks, by check name.
    pub errors: Vec<(String, String)>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub order: usize,
    pub tol: f64,
    pub points: usize,
    pub delta: f64,
    /// Added to σ in the Tracy–Widom initial state (fault injection).
    pub perturb_sigma: f64,
    /// Endpoint range; defaults to where E₂ ≥ [`RANGE_FLOOR`].
    pub range: Option<(f64, f64)>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { order: 64, tol: 1e-10, points: 20, delta: 1e-3, perturb_sigma: 0.0, range: None }
    }
}

pub const CROSS_ROUTE_TOL: f64 = 1e-5;
pub const INTEGRAL_TOL: f64 = 1e-7;
/// Smallest E₂ in the default s-range; below it I − K is too close to
/// singular for difference checks at the stated tolerances.
pub const RANGE_FLOOR: f64 = 1e-6;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x) })
}

/// Interval carrying essentially all of the weight.
fn support_window(spec: &EnsembleSpec) -> Result<(f64, f64)> {
    Ok(match spec.kind {
        Kind::Gaussian => {
            let t = truncate_interval(spec, 0.0)?.1;
            (-t, t)
        }
        Kind::Laguerre => (0.0, truncate_interval(spec, 0.0)?.1),
        Kind::Jacobi => (-1.0, 1.0),
    })
}

fn sample_points(spec: &EnsembleSpec, n: usize) -> Result<Vec<f64>> {
    let (lo, hi) = support_window(spec)?;
    let (lo, hi) = match spec.kind {
        Kind::Gaussian => (lo.max(-(2.0 * spec.n as f64).sqrt() - 2.0), hi.min((2.0 * spec.n as f64).sqrt() + 2.0)),
        Kind::Laguerre => (0.05, (4.0 * spec.n as f64 + 2.0 * spec.a + 4.0).min(hi)),
        Kind::Jacobi => (-0.97, 0.97),
    };
    Ok(linspace(lo, hi, n))
}

fn check_cd(spec: &EnsembleSpec) -> Result<Check> {
    let xs = sample_points(spec, 9)?;
    let mut worst: f64 = 0.0;
    for &x in &xs {
        for &y in &xs {
            for dy in [0.0, 1e-9, 1e-3] {
                let y = (y + dy).min(xs[xs.len() - 1]);
                let k = cd_kernel(spec, x, y)?;
                let s = kernel_sum(spec, x, y)?;
                worst = worst.max((k - s).abs() / (1.0 + s.abs()));
            }
        }
    }
    Ok(Check::new("cd_identity", worst, 1e-9))
}

fn check_orthonormality(spec: &EnsembleSpec, order: usize) -> Result<Check> {
    let (lo, hi) = support_window(spec)?;
    let grid = operator_grid(spec, lo, hi, order.max(64))?;
    let n = spec.n;
    let mut gram = vec![0.0; (n + 1) * (n + 1)];
    for (&x, &wt) in grid.nodes.iter().zip(&grid.weights) {
        let w = spec.weight(x)?;
        let ps: Vec<f64> = (0..=n).map(|k| orthonormal_poly(spec, k, x)).collect::<Result<_>>()?;
        for j in 0..=n {
            for k in 0..=n {
                gram[j * (n + 1) + k] += wt * w * ps[j] * ps[k];
            }
        }
    }
    let worst = max_of((0..=n).flat_map(|j| {
        let g = &gram;
        (0..=n).map(move |k| (g[j * (n + 1) + k] - if j == k { 1.0 } else { 0.0 }).abs())
    }));
    Ok(Check::new("orthonormality", worst, 1e-9))
}

fn check_trace(spec: &EnsembleSpec, order: usize) -> Result<Check> {
    let (lo, hi) = support_window(spec)?;
    let grid = operator_grid(spec, lo, hi, order.max(64))?;
    let mut tr = 0.0;
    for (&x, &wt) in grid.nodes.iter().zip(&grid.weights) {
        tr += wt * cd_kernel(spec, x, x)?;
    }
    Ok(Check::new("trace_equals_n", (tr - spec.n as f64).abs(), 1e-9))
}

fn check_dual_v(spec: &EnsembleSpec, pts: &[f64], order: usize) -> Result<Check> {
    let res: Vec<f64> = pts
        .par_iter()
        .map(|&s| {
            let sol = nystrom_solve(spec, gap_interval(spec, s)?, order)?;
            Ok((sol.v - sol.v_dual).abs() / (1.0 + sol.v.abs()))
        })
        .collect::<Result<_>>()?;
    Ok(Check::new("dual_v_equality", max_of(res), 1e-10))
}

/// Five-point differences of ln E₂ and u, v, w from Nyström states,
/// against −εR and εq², εqp, εp². The step is 1e−3, shrunk by 1 − s² for
/// Jacobi, where u, v, w steepen toward s = 1.
fn check_derivatives(spec: &EnsembleSpec, pts: &[f64], order: usize) -> Result<(Check, Check)> {
    let eps = endpoint_sign(spec.kind);
    let d = recurrence_data(spec);
    let rows: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&s| {
            let h = if spec.kind == Kind::Jacobi { 1e-3 * (1.0 - s * s) } else { 1e-3 };
            let c = state_from_nystrom(spec, s, order)?;
            let st: Vec<TwState> = [-2.0, -1.0, 1.0, 2.0]
                .iter()
                .map(|k| state_from_nystrom(spec, s + k * h, order))
                .collect::<Result<_>>()?;
            let fd = |f: fn(&TwState) -> f64| {
                (f(&st[0]) - 8.0 * f(&st[1]) + 8.0 * f(&st[2]) - f(&st[3])) / (12.0 * h)
            };
            let r = c.sigma / d.m(s);
            let dlog = (fd(|x| x.log_e) + eps * r).abs() / (1.0 + r.abs());
            let scale = 1.0 + c.q * c.q + c.p * c.p;
            let duvw = [
                fd(|x| x.u) - eps * c.q * c.q,
                fd(|x| x.v) - eps * c.q * c.p,
                fd(|x| x.w) - eps * c.p * c.p,
            ]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
                / scale;
            Ok((dlog, duvw))
        })
        .collect::<Result<_>>()?;
    Ok((
        Check::new("dlogE_equals_minus_R", max_of(rows.iter().map(|r| r.0)), 1e-6),
        Check::new("uvw_derivatives", max_of(rows.iter().map(|r| r.1)), 1e-6),
    ))
}

fn tw_init(spec: &EnsembleSpec, opts: &VerifyOptions) -> Result<TwState> {
    let s0 = match spec.kind {
        Kind::Gaussian => (2.0 * spec.n as f64).sqrt() + 1.5,
        Kind::Laguerre => opts.delta,
        Kind::Jacobi => -1.0 + opts.delta,
    };
    let mut init = state_from_nystrom(spec, s0, opts.order)?;
    init.sigma += opts.perturb_sigma;
    Ok(init)
}

fn check_tw(spec: &EnsembleSpec, pts: &[f64], fred: &[f64], opts: &VerifyOptions) -> Result<(Check, Check, Check)> {
    let init = tw_init(spec, opts)?;
    let states = states_at(spec, &init, pts, opts.tol)?;
    let agree = max_of(states.iter().zip(fred).map(|(s, f)| (s.e2() - f).abs()));
    let d = recurrence_data(spec);
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut integ: f64 = 0.0;
    let mut sig: f64 = 0.0;
    for end in [lo, hi] {
        if end == init.s {
            continue;
        }
        let traj = integrate(spec, &init, end, &[], opts.tol)?;
        for r in check_integrals(&traj)? {
            integ = integ.max(match spec.kind {
                Kind::Jacobi => r.max_abs(),
                _ => r.first.abs(),
            });
        }
        for st in &traj.steps {
            let (c1, c2, c3) = crate::tw::coefficients(&d, st.s, st.u, st.v, st.w);
            let scale = 1.0
                + (c3 * st.q * st.q).abs()
                + (c2 * st.p * st.p).abs()
                + (2.0 * c1 * st.q * st.p).abs();
            sig = sig.max((st.sigma - sigma_algebraic(&d, st)).abs() / scale);
        }
    }
    Ok((
        Check::new("tw_ode_vs_fredholm", agree, CROSS_ROUTE_TOL),
        Check::new("integrals_of_motion", integ, INTEGRAL_TOL),
        Check::new("sigma_consistency", sig, 10.0 * opts.tol),
    ))
}

fn check_painleve(spec: &EnsembleSpec, pts: &[f64], fred: &[f64], opts: &VerifyOptions) -> Result<Check> {
    let p = route_params(spec)?;
    let curve = painleve_gap(&p, pts, opts.delta, opts.tol.min(1e-11))?;
    if !curve.complete || curve.samples.len() != pts.len() {
        return Err(Error::StepCollapse { last_good: curve.last_good_t });
    }
    let worst = max_of(curve.samples.iter().zip(fred).map(|(s, f)| (s.e2 - f).abs()));
    Ok(Check::new("painleve_vs_fredholm", worst, CROSS_ROUTE_TOL))
}

/// Runs every check. Failures to evaluate a check count as failed checks
/// (residual ∞) and are listed under `errors`.
pub fn run_suite(spec: &EnsembleSpec, opts: &VerifyOptions) -> Result<VerifyReport> {
    let range = match opts.range {
        Some(r) => r,
        None => working_range(spec, RANGE_FLOOR, opts.order)?,
    };
    let pts = linspace(range.0, range.1, opts.points.max(2));
    let fred: Vec<f64> = pts
        .par_iter()
        .map(|&s| fredholm_det(spec, gap_interval(spec, s)?, opts.order))
        .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    let mut record = |name: &str, tol: f64, r: Result<Vec<Check>>| match r {
        Ok(cs) => checks.extend(cs),
        Err(e) => {
            checks.push(Check::failed(name, tol));
            errors.push((name.to_string(), e.to_string()));
        }
    };
    record("cd_identity", 1e-9, check_cd(spec).map(|c| vec![c]));
    record("orthonormality", 1e-9, check_orthonormality(spec, opts.order).map(|c| vec![c]));
    record("trace_equals_n", 1e-9, check_trace(spec, opts.order).map(|c| vec![c]));
    record("dual_v_equality", 1e-10, check_dual_v(spec, &pts, opts.order).map(|c| vec![c]));
    record(
        "derivatives",
        1e-6,
        check_derivatives(spec, &pts, opts.order).map(|(a, b)| vec![a, b]),
    );
    record(
        "tw_ode",
        CROSS_ROUTE_TOL,
        check_tw(spec, &pts, &fred, opts).map(|(a, b, c)| vec![a, b, c]),
    );
    record("painleve_vs_fredholm", CROSS_ROUTE_TOL, check_painleve(spec, &pts, &fred, opts).map(|c| vec![c]));
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { spec: *spec, s_range: range, checks, errors, pass })
}

impl VerifyReport {
    pub fn human(&self) -> String {
        let mut out = format!(
            "verify {} N={} a={} b={} on s ∈ [{:.6}, {:.6}]\n",
            self.spec.kind, self.spec.n, self.spec.a, self.spec.b, self.s_range.0, self.s_range.1
        );
        for c in &self.checks {
            out.push_str(&format!(
                "  {:<4} {:<24} max residual {:>10.3e}  tolerance {:.1e}\n",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.max_residual,
                c.tolerance
            ));
        }
        for (name, e) in &self.errors {
            out.push_str(&format!("  error in {name}: {e}\n"));
        }
        out.push_str(if self.pass { "all checks passed\n" } else { "verification FAILED\n" });
        out
    }
}
