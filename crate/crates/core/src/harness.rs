//! Run configuration, dispatch to the four routes, and CSV/JSON output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fredholm::{gap_interval, spacing_pdf, working_range};
use crate::mc::{estimate_gap, estimate_spacing, sample_batch};
use crate::painleve::{mapping_status, painleve_gap, route_params, s_of_t};
use crate::tw::{anchor_point, integrate, state_from_nystrom, TwState};
use crate::verify::RANGE_FLOOR;
use crate::weights::{EnsembleSpec, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fredholm,
    TwOde,
    Painleve,
    Mc,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Fredholm => "fredholm",
            Method::TwOde => "tw-ode",
            Method::Painleve => "painleve",
            Method::Mc => "mc",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| Error::ParamDomain(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| Error::ParamDomain(format!("unknown format '{s}'")))
    }
}

pub const DEFAULT_ORDER: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_POINTS: usize = 50;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_WINDOW: f64 = 0.05;

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub spec: EnsembleSpec,
    pub method: Method,
    /// Endpoint range; `None` means the range where E₂ ≥ 1e−6.
    pub s_range: Option<(f64, f64)>,
    pub points: usize,
    pub order: usize,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub delta: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(spec: EnsembleSpec, method: Method) -> Self {
        Self {
            spec,
            method,
            s_range: None,
            points: DEFAULT_POINTS,
            order: DEFAULT_ORDER,
            tol: DEFAULT_TOL,
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            delta: DEFAULT_DELTA,
            output: None,
            format: Format::Csv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::ParamDomain("points must be at least 1".into()));
        }
        if self.order < 2 {
            return Err(Error::ParamDomain(format!("order {} < 2", self.order)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::ParamDomain(format!("tol {} outside (0, 1)", self.tol)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::ParamDomain(format!("delta {} outside (0, 0.5)", self.delta)));
        }
        if self.samples == 0 {
            return Err(Error::ParamDomain("samples must be at least 1".into()));
        }
        if self.method == Method::Mc {
            for (name, x) in [("a", self.spec.a), ("b", self.spec.b)] {
                if x.fract() != 0.0 || x < 0.0 {
                    return Err(Error::ParamDomain(format!(
                        "{name} = {x}: Monte-Carlo sampling needs a non-negative integer exponent"
                    )));
                }
            }
        }
        if let Some((lo, hi)) = self.s_range {
            if !lo.is_finite() || !hi.is_finite() || (lo == hi && self.points > 1) {
                return Err(Error::ParamDomain(format!("bad s-range [{lo}, {hi}]")));
            }
            let (a, b) = self.spec.support();
            let bad = match self.spec.kind {
                Kind::Gaussian => false,
                Kind::Laguerre => lo.min(hi) <= a,
                Kind::Jacobi => lo.min(hi) <= a || lo.max(hi) >= b,
            };
            if bad {
                return Err(Error::ParamDomain(format!(
                    "s-range [{lo}, {hi}] must lie inside the support ({a}, {b})"
                )));
            }
        }
        Ok(())
    }

    /// `key=value` pairs echoed into output metadata.
    pub fn meta(&self) -> Vec<(String, String)> {
        let mut m = vec![
            ("ensemble".to_string(), self.spec.kind.to_string()),
            ("n".into(), self.spec.n.to_string()),
            ("a".into(), self.spec.a.to_string()),
            ("b".into(), self.spec.b.to_string()),
            ("method".into(), self.method.to_string()),
            ("points".into(), self.points.to_string()),
            ("order".into(), self.order.to_string()),
            ("tol".into(), format!("{:e}", self.tol)),
            ("seed".into(), self.seed.to_string()),
            ("samples".into(), self.samples.to_string()),
            ("delta".into(), format!("{:e}", self.delta)),
        ];
        if let Some((lo, hi)) = self.s_range {
            m.push(("s-from".into(), lo.to_string()));
            m.push(("s-to".into(), hi.to_string()));
        }
        m
    }

    pub fn resolved_range(&self) -> Result<(f64, f64)> {
        match self.s_range {
            Some(r) => Ok(r),
            None => working_range(&self.spec, RANGE_FLOOR, self.order),
        }
    }

    pub fn s_points(&self) -> Result<Vec<f64>> {
        let (lo, hi) = self.resolved_range()?;
        Ok(linspace(lo, hi, self.points))
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys are normalized to
/// lower case with `_` read as `-`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::ParamDomain(format!("config line {}: expected key=value", i + 1)));
        };
        let key = k.trim().to_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(Error::ParamDomain(format!("config line {}: empty key", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Tabular output of any command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub method: Method,
    pub spec: EnsembleSpec,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: Vec<(String, String)>,
}

impl Curve {
    fn new(cfg: &RunConfig, columns: &[&str]) -> Self {
        Self {
            method: cfg.method,
            spec: cfg.spec,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: cfg.meta(),
        }
    }

    pub fn push_meta(&mut self, k: &str, v: impl ToString) {
        self.meta.push((k.to_string(), v.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }

    pub fn write(&self, path: &Path, format: Format) -> std::io::Result<()> {
        let text = match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        };
        std::fs::write(path, text)
    }
}

/// A run that stopped on a numerical error; `partial` holds the rows
/// computed before it.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub partial: Curve,
    pub error: Error,
}

pub type RunResult = std::result::Result<Curve, Box<RunFailure>>;

fn fail(mut partial: Curve, error: Error) -> Box<RunFailure> {
    partial.push_meta("rows_written", partial.rows.len());
    partial.push_meta("error", error.to_string());
    Box::new(RunFailure { partial, error })
}

const STATE_COLUMNS: [&str; 8] = ["s", "E2", "sigma", "q", "p", "u", "v", "w"];

fn state_row(st: &TwState) -> Vec<f64> {
    vec![st.s, st.e2(), st.sigma, st.q, st.p, st.u, st.v, st.w]
}

/// Rows for `points` in order, continuing from the anchor one segment at a
/// time so a failure keeps everything reached before it. Returns the rows
/// reached (by index) and the first error, if any.
fn tw_sweep(cfg: &RunConfig, points: &[f64]) -> (Vec<Option<TwState>>, Option<Error>) {
    let mut out = vec![None; points.len()];
    let init = match state_from_nystrom(&cfg.spec, anchor_point(&cfg.spec, cfg.delta), cfg.order) {
        Ok(s) => s,
        Err(e) => return (out, Some(e)),
    };
    let mut up: Vec<usize> = (0..points.len()).filter(|&i| points[i] >= init.s).collect();
    let mut down: Vec<usize> = (0..points.len()).filter(|&i| points[i] < init.s).collect();
    up.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    down.sort_by(|&a, &b| points[b].total_cmp(&points[a]));
    let mut first_err = None;
    for branch in [up, down] {
        let mut cur = init;
        for i in branch {
            let target = points[i];
            let next = if target == cur.s {
                Ok(cur)
            } else {
                integrate(&cfg.spec, &cur, target, &[target], cfg.tol)
                    .map(|t| t.checkpoints.last().copied().unwrap_or(cur))
            };
            match next {
                Ok(st) => {
                    out[i] = Some(st);
                    cur = st;
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                    break;
                }
            }
        }
    }
    (out, first_err)
}

/// Rows for the points that were reached, in grid order.
fn collect_rows<T>(slots: Vec<Option<T>>, row: impl Fn(&T) -> Vec<f64>) -> Vec<Vec<f64>> {
    slots.iter().flatten().map(row).collect()
}

/// E₂ over the configured s-grid by the configured method.
pub fn run_gap(cfg: &RunConfig) -> RunResult {
    let t0 = Instant::now();
    let columns: &[&str] = match cfg.method {
        Method::Fredholm | Method::TwOde => &STATE_COLUMNS,
        Method::Painleve => &["s", "E2", "sigma", "omega", "omega_prime"],
        Method::Mc => &["s", "E2", "std_error"],
    };
    let mut curve = Curve::new(cfg, columns);
    let pts = match cfg.s_points() {
        Ok(p) => p,
        Err(e) => return Err(fail(curve, e)),
    };
    curve.push_meta("s_first", pts[0]);
    curve.push_meta("s_last", pts[pts.len() - 1]);
    match cfg.method {
        Method::Fredholm => {
            let res: Vec<Result<TwState>> =
                pts.par_iter().map(|&s| state_from_nystrom(&cfg.spec, s, cfg.order)).collect();
            for r in res {
                match r {
                    Ok(st) => curve.rows.push(state_row(&st)),
                    Err(e) => return Err(fail(curve, e)),
                }
            }
        }
        Method::TwOde => {
            curve.push_meta("anchor", anchor_point(&cfg.spec, cfg.delta));
            let (slots, err) = tw_sweep(cfg, &pts);
            curve.rows = collect_rows(slots, state_row);
            if let Some(e) = err {
                return Err(fail(curve, e));
            }
        }
        Method::Painleve => {
            let p = match route_params(&cfg.spec) {
                Ok(p) => p,
                Err(e) => return Err(fail(curve, e)),
            };
            curve.push_meta("painleve", format!("{:?}", p.kind));
            curve.push_meta("alpha", p.alpha);
            curve.push_meta("beta", p.beta);
            curve.push_meta("gamma", p.gamma);
            curve.push_meta("delta_param", p.delta);
            curve.push_meta("mapping", format!("{:?}", mapping_status(&p)));
            match painleve_gap(&p, &pts, cfg.delta, cfg.tol) {
                Ok(c) => {
                    curve.rows =
                        c.samples.iter().map(|s| vec![s.s, s.e2, s.sigma, s.omega, s.omega_prime]).collect();
                    if !c.complete {
                        curve.push_meta("diagnostic", c.diagnostic.unwrap_or_default());
                        return Err(fail(curve, Error::StepCollapse { last_good: s_of_t(&p, c.last_good_t) }));
                    }
                }
                Err(e) => return Err(fail(curve, e)),
            }
        }
        Method::Mc => {
            let batch = match sample_batch(&cfg.spec, cfg.samples, cfg.seed) {
                Ok(b) => b,
                Err(e) => return Err(fail(curve, e)),
            };
            for &s in &pts {
                let iv = match cfg.spec.kind {
                    Kind::Gaussian => (s, f64::INFINITY),
                    _ => match gap_interval(&cfg.spec, s) {
                        Ok(iv) => iv,
                        Err(e) => return Err(fail(curve, e)),
                    },
                };
                match estimate_gap(&batch, iv) {
                    Ok((e, se)) => curve.rows.push(vec![s, e, se]),
                    Err(e) => return Err(fail(curve, e)),
                }
            }
        }
    }
    curve.push_meta("runtime_s", format!("{:.3}", t0.elapsed().as_secs_f64()));
    Ok(curve)
}

/// (s, q, p, u, v, w, R, σ) from the Nyström solution or the TW flow.
pub fn run_diag(cfg: &RunConfig) -> RunResult {
    let t0 = Instant::now();
    let mut curve = Curve::new(cfg, &["s", "q", "p", "u", "v", "w", "R", "sigma"]);
    let pts = match cfg.s_points() {
        Ok(p) => p,
        Err(e) => return Err(fail(curve, e)),
    };
    let d = crate::weights::recurrence_data(&cfg.spec);
    let row = |st: &TwState| vec![st.s, st.q, st.p, st.u, st.v, st.w, st.sigma / d.m(st.s), st.sigma];
    match cfg.method {
        Method::TwOde => {
            let (slots, err) = tw_sweep(cfg, &pts);
            curve.rows = collect_rows(slots, row);
            if let Some(e) = err {
                return Err(fail(curve, e));
            }
        }
        Method::Fredholm => {
            let res: Vec<Result<TwState>> =
                pts.par_iter().map(|&s| state_from_nystrom(&cfg.spec, s, cfg.order)).collect();
            for r in res {
                match r {
                    Ok(st) => curve.rows.push(row(&st)),
                    Err(e) => return Err(fail(curve, e)),
                }
            }
        }
        m => {
            return Err(fail(
                curve,
                Error::ParamDomain(format!("diag supports fredholm and tw-ode, not {m}")),
            ))
        }
    }
    curve.push_meta("runtime_s", format!("{:.3}", t0.elapsed().as_secs_f64()));
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingConfig {
    pub a1: f64,
    /// Range of the neighbour position a2.
    pub a2_range: (f64, f64),
    pub bins: usize,
    pub window: f64,
    /// Difference step of the determinant route.
    pub h: f64,
}

/// Nearest-neighbour density at a2 given an eigenvalue at a1. The
/// determinant route reports bin averages (4-point Gauss rule per bin) so
/// it is directly comparable with the histogram.
pub fn run_spacing(cfg: &RunConfig, sp: &SpacingConfig) -> RunResult {
    let t0 = Instant::now();
    let (lo, hi) = sp.a2_range;
    let columns: &[&str] = match cfg.method {
        Method::Mc => &["a2", "p", "std_error", "bin_lo", "bin_hi"],
        _ => &["a2", "p", "bin_lo", "bin_hi"],
    };
    let mut curve = Curve::new(cfg, columns);
    curve.push_meta("a1", sp.a1);
    curve.push_meta("a2-from", lo);
    curve.push_meta("a2-to", hi);
    curve.push_meta("bins", sp.bins);
    curve.push_meta("window", sp.window);
    if !(hi > lo) || sp.bins == 0 || !(lo >= sp.a1) {
        return Err(fail(
            curve,
            Error::ParamDomain(format!("need a1 ≤ a2-from < a2-to and bins ≥ 1 (a1 = {}, [{lo}, {hi}])", sp.a1)),
        ));
    }
    let edges = linspace(lo, hi, sp.bins + 1);
    match cfg.method {
        Method::Mc => {
            let batch = match sample_batch(&cfg.spec, cfg.samples, cfg.seed) {
                Ok(b) => b,
                Err(e) => return Err(fail(curve, e)),
            };
            match estimate_spacing(&batch, sp.a1, &edges, sp.window) {
                Ok(h) => {
                    curve.push_meta("events", h.events);
                    for (k, c) in h.centers().iter().enumerate() {
                        curve.rows.push(vec![*c, h.density[k], h.std_error[k], edges[k], edges[k + 1]]);
                    }
                }
                Err(e) => return Err(fail(curve, e)),
            }
        }
        Method::Fredholm => {
            curve.push_meta("h", sp.h);
            let (gx, gw) = crate::quad::gauss_legendre(4);
            let res: Vec<Result<f64>> = edges
                .par_windows(2)
                .map(|e| {
                    let (c, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
                    let mut acc = 0.0;
                    for (x, w) in gx.iter().zip(&gw) {
                        let a2 = c + half * x;
                        if a2 - sp.a1 > 2.0 * sp.h {
                            acc += 0.5 * w * spacing_pdf(&cfg.spec, sp.a1, a2, sp.h, cfg.order)?;
                        }
                    }
                    Ok(acc)
                })
                .collect();
            for (k, r) in res.into_iter().enumerate() {
                match r {
                    Ok(p) => curve.rows.push(vec![0.5 * (edges[k] + edges[k + 1]), p, edges[k], edges[k + 1]]),
                    Err(e) => return Err(fail(curve, e)),
                }
            }
        }
        m => {
            return Err(fail(curve, Error::ParamDomain(format!("spacing supports fredholm and mc, not {m}"))))
        }
    }
    curve.push_meta("runtime_s", format!("{:.3}", t0.elapsed().as_secs_f64()));
    Ok(curve)
}

/// Caps the global rayon pool at GAPFLOW_THREADS when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GAPFLOW_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::ParamDomain(format!("GAPFLOW_THREADS='{v}' is not a thread count")))?;
        if n == 0 {
            return Err(Error::ParamDomain("GAPFLOW_THREADS must be at least 1".into()));
        }
        // a pool already built (e.g. in tests) is left as is
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
