//! Painlevé IV/V/VI initial-value solvers and the maps between a
//! transcendent (ω, ω′) and the gap-probability quantities q′/q, p′/p, σ.
//!
//! Canonical forms (t is s for PIV and PV, x = (s+1)/2 for PVI):
//!
//! ```text
//! PIV  ω″ = ω′²/(2ω) + (3/2)ω³ + 4tω² + 2(t² − α)ω + β/ω
//! PV   ω″ = (1/(2ω) + 1/(ω−1))ω′² − ω′/t + (ω−1)²(αω + β/ω)/t²
//!           + γω/t + δω(ω+1)/(ω−1)
//! PVI  ω″ = ½(1/ω + 1/(ω−1) + 1/(ω−t))ω′² − (1/t + 1/(t−1) + 1/(ω−t))ω′
//!           + ω(ω−1)(ω−t)/(t²(t−1)²)·[α + βt/ω² + γ(t−1)/(ω−1)² + δt(t−1)/(ω−t)²]
//! ```
//!
//! Transcendents used by the ω-route, as functions of the Tracy–Widom state:
//!
//! * Gaussian (α, β) = (2N−1, 0): ω = 2p²/(√(2N) + 2w).
//! * Gaussian (α, β) = (−N−1, −2N²): ω = −s − q′/q; with (−N+1, −2N²):
//!   ω = p′/p − s. Both reproduce the same R.
//! * Laguerre (α, β, γ, δ) = (a²/2, 0, −(2N+a+1), −½): ω = z/(z−1) with
//!   z = p²/(√(N(N+a)) − w).
//! * Jacobi (½, −a²/2, b²/2, (1−(2N+a+b)²)/2): ω = x + 2(2N+a+b)x(x−1)/(2c1 + c2 p/q + c3 q/p).
//!
//! When b = 0 (Jacobi) or a = 0 (Laguerre) the gap probability is
//! elementary and the transcendent sits on a fixed singular value
//! (ω ≡ 1, respectively ω ≡ ∞); σ is then the limit of the mapping,
//! 2N(N+a)x and Ns.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{dopri5, Control, OdeOptions, Outcome};
use crate::tw::{coefficients, endpoint_sign, state_from_nystrom, tw_rhs, TwState};
use crate::weights::{recurrence_data, EnsembleSpec, Kind, RecurrenceData};

pub const GUARD_BAND: f64 = 1e-6;
const POLE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PainleveKind {
    PIV,
    PV,
    PVI,
}

/// Which parameter set of a family: the listed rows, the two signs of the
/// second Gaussian row, or the Laguerre set this crate integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    Listed,
    Plus,
    Minus,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PainleveSpec {
    pub kind: PainleveKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub ensemble: EnsembleSpec,
    pub row: usize,
    pub variant: Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PainleveState {
    pub t: f64,
    pub omega: f64,
    pub omega_prime: f64,
}

/// Quantities recovered from (t, ω, ω′). Log-derivatives are absent for
/// parameter sets that only determine R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aux {
    pub q_log_deriv: Option<f64>,
    pub p_log_deriv: Option<f64>,
    pub r: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MappingStatus {
    /// ω ↦ (q′/q, p′/p, σ) checked against the Nyström oracle.
    Validated,
    /// ω ↦ R checked against the oracle; no log-derivative map.
    ROnly,
    /// Parameter values only.
    ParametersOnly,
    /// A map exists in the listed form but disagrees with the oracle.
    Unverified,
}

fn family(kind: Kind) -> PainleveKind {
    match kind {
        Kind::Gaussian => PainleveKind::PIV,
        Kind::Laguerre => PainleveKind::PV,
        Kind::Jacobi => PainleveKind::PVI,
    }
}

pub fn row_count(kind: Kind) -> usize {
    match kind {
        Kind::Gaussian => 2,
        Kind::Laguerre => 4,
        Kind::Jacobi => 8,
    }
}

/// Listed parameter row (1-based). Gaussian row 2 is "α = −N±1"; this
/// returns the upper sign, see [`params_for_sign`].
pub fn params_for(spec: &EnsembleSpec, row: usize) -> Result<PainleveSpec> {
    params_for_sign(spec, row, Variant::Plus)
}

pub fn params_for_sign(spec: &EnsembleSpec, row: usize, sign: Variant) -> Result<PainleveSpec> {
    let rows = row_count(spec.kind);
    if row == 0 || row > rows {
        return Err(Error::ParamDomain(format!(
            "row {row} out of range 1..={rows} for {}",
            spec.kind
        )));
    }
    let n = spec.n as f64;
    let (a, b) = (spec.a, spec.b);
    let h = |x: f64| 0.5 * x;
    let (alpha, beta, gamma, delta, variant) = match spec.kind {
        Kind::Gaussian => match row {
            1 => (2.0 * n - 1.0, 0.0, 0.0, 0.0, Variant::Listed),
            _ => {
                let al = if sign == Variant::Minus { -n - 1.0 } else { -n + 1.0 };
                let v = if sign == Variant::Minus { Variant::Minus } else { Variant::Plus };
                (al, -2.0 * n * n, 0.0, 0.0, v)
            }
        },
        Kind::Laguerre => {
            let (al, be, ga) = match row {
                1 => (h((1.0 - a).powi(2)), 0.0, -2.0 * n - a),
                2 => (0.5, -h(a * a), 2.0 * n + a),
                3 => (h((1.0 - a - n).powi(2)), -h(n * n), -a),
                _ => (h((1.0 - n).powi(2)), -h((n + a).powi(2)), a),
            };
            (al, be, ga, -0.5, Variant::Listed)
        }
        Kind::Jacobi => {
            let t = 2.0 * n + a + b;
            let sq = |x: f64| x * x;
            let (al, be, ga, de) = match row {
                1 => (0.5, -h(a * a), h(b * b), h(1.0 - t * t)),
                2 => (h(sq(1.0 - t)), -h(b * b), h(a * a), 0.5),
                3 => (h(sq(1.0 - a)), 0.0, h(t * t), h(1.0 - b * b)),
                4 => (h(sq(1.0 - b)), -h(t * t), 0.0, h(1.0 - a * a)),
                5 => (h(sq(1.0 - n - a - b)), -h(sq(n + b)), h(sq(n + a)), h(1.0 - n * n)),
                6 => (h(sq(1.0 - n)), -h(sq(n + a)), h(sq(n + b)), h(1.0 - sq(n + a + b))),
                7 => (h(sq(1.0 - n - a)), -h(n * n), h(sq(n + a + b)), h(1.0 - sq(n + b))),
                _ => (h(sq(1.0 - n - b)), -h(sq(n + a + b)), h(n * n), h(1.0 - sq(n + a))),
            };
            (al, be, ga, de, Variant::Listed)
        }
    };
    Ok(PainleveSpec { kind: family(spec.kind), alpha, beta, gamma, delta, ensemble: *spec, row, variant })
}

/// The Laguerre parameter set whose transcendent z/(z−1) reproduces the
/// oracle. It is listed row 1 with a shifted to a + 1.
pub fn laguerre_derived_params(spec: &EnsembleSpec) -> Result<PainleveSpec> {
    if spec.kind != Kind::Laguerre {
        return Err(Error::ParamDomain("Laguerre ensemble expected".into()));
    }
    let (n, a) = (spec.n as f64, spec.a);
    Ok(PainleveSpec {
        kind: PainleveKind::PV,
        alpha: 0.5 * a * a,
        beta: 0.0,
        gamma: -(2.0 * n + a + 1.0),
        delta: -0.5,
        ensemble: *spec,
        row: 1,
        variant: Variant::Derived,
    })
}

/// Parameter set integrated by the ω-route for each ensemble.
pub fn route_params(spec: &EnsembleSpec) -> Result<PainleveSpec> {
    match spec.kind {
        Kind::Laguerre => laguerre_derived_params(spec),
        _ => params_for(spec, 1),
    }
}

pub fn mapping_status(p: &PainleveSpec) -> MappingStatus {
    match (p.ensemble.kind, p.row, p.variant) {
        (Kind::Gaussian, 1, _) => MappingStatus::Validated,
        (Kind::Gaussian, 2, _) => MappingStatus::ROnly,
        (Kind::Laguerre, 1, Variant::Derived) => MappingStatus::Validated,
        (Kind::Laguerre, 1, _) => MappingStatus::Unverified,
        (Kind::Jacobi, 1, _) => MappingStatus::Validated,
        _ => MappingStatus::ParametersOnly,
    }
}

fn guard(p: &PainleveSpec, st: &PainleveState) -> Result<()> {
    let (t, w) = (st.t, st.omega);
    let near = |x: f64| (w - x).abs() < GUARD_BAND;
    let bad = match p.kind {
        PainleveKind::PIV => near(0.0),
        PainleveKind::PV => near(0.0) || near(1.0) || t == 0.0,
        PainleveKind::PVI => near(0.0) || near(1.0) || near(t) || t == 0.0 || t == 1.0,
    };
    if bad || !w.is_finite() {
        return Err(Error::GuardBand { t });
    }
    Ok(())
}

/// ω″ from the canonical equation.
pub fn painleve_rhs(p: &PainleveSpec, st: &PainleveState) -> Result<f64> {
    guard(p, st)?;
    let (t, w, wp) = (st.t, st.omega, st.omega_prime);
    let (al, be, ga, de) = (p.alpha, p.beta, p.gamma, p.delta);
    Ok(match p.kind {
        PainleveKind::PIV => {
            wp * wp / (2.0 * w) + 1.5 * w.powi(3) + 4.0 * t * w * w + 2.0 * (t * t - al) * w + be / w
        }
        PainleveKind::PV => {
            (1.0 / (2.0 * w) + 1.0 / (w - 1.0)) * wp * wp - wp / t
                + (w - 1.0).powi(2) / (t * t) * (al * w + be / w)
                + ga * w / t
                + de * w * (w + 1.0) / (w - 1.0)
        }
        PainleveKind::PVI => {
            0.5 * (1.0 / w + 1.0 / (w - 1.0) + 1.0 / (w - t)) * wp * wp
                - (1.0 / t + 1.0 / (t - 1.0) + 1.0 / (w - t)) * wp
                + w * (w - 1.0) * (w - t) / (t * t * (t - 1.0).powi(2))
                    * (al + be * t / (w * w) + ga * (t - 1.0) / (w - 1.0).powi(2)
                        + de * t * (t - 1.0) / (w - t).powi(2))
        }
    })
}

/// Moving endpoint s for the independent variable t.
pub fn s_of_t(p: &PainleveSpec, t: f64) -> f64 {
    match p.kind {
        PainleveKind::PVI => 2.0 * t - 1.0,
        _ => t,
    }
}

pub fn t_of_s(p: &PainleveSpec, s: f64) -> f64 {
    match p.kind {
        PainleveKind::PVI => 0.5 * (s + 1.0),
        _ => s,
    }
}

fn gaussian_row2_r(n: f64, s: f64, w: f64, wp: f64) -> f64 {
    -n * n / (2.0 * w) - n * s - 0.5 * (s * s + n) * w - 0.5 * s * w * w - w.powi(3) / 8.0
        + wp * wp / (8.0 * w)
}

/// The Laguerre maps for the derived parameter set.
fn laguerre_aux(n: f64, a: f64, s: f64, w: f64, wp: f64) -> Aux {
    let kappa2 = n * (n + a);
    let c1 = 0.5 * (s - a - 2.0 * n);
    let (sigma, lp, z, zp) = if w.is_infinite() {
        (n * s, -0.5, 1.0, 0.0)
    } else {
        let w1 = w - 1.0;
        let sigma = (s * s * (w * w - wp * wp)
            + 4.0 * n * s * w * w * w1
            + a * a * w * w * w1 * w1
            + 2.0 * a * s * w * w * w1)
            / (4.0 * w * w1 * w1);
        let lp = -(w * w + wp) / (2.0 * w * w1);
        (sigma, lp, w / w1, -wp / (w1 * w1))
    };
    let pi = 0.5 * (s * z * z - 2.0 * c1 * z - s * zp);
    let lq = (c1 + (kappa2 - s * pi + sigma) * z / pi) / s;
    Aux { q_log_deriv: Some(lq), p_log_deriv: Some(lp), r: sigma / s, sigma }
}

/// The Laguerre maps in the form listed alongside parameter row 1.
pub fn laguerre_listed_aux(n: f64, a: f64, s: f64, w: f64, wp: f64) -> Aux {
    let lq = ((a - 1.0) * w - a) / (2.0 * s) - 2.0 * n * w / ((w + wp) * s + (a - 1.0) * w * (w - 1.0))
        + (wp - 1.0) / (2.0 * (w - 1.0));
    let lp = ((a - 1.0) * w - a) / (2.0 * s)
        + 2.0 * (n + a) * w / ((w - wp) * s - (a - 1.0) * w * (w - 1.0))
        + (wp + 1.0) / (2.0 * (w - 1.0));
    let sigma = -1.0 / (4.0 * w) * (s * wp / (w - 1.0) - w).powi(2)
        + 0.25 * a * a * w
        + 0.5 * (2.0 * n + a) * s * w / (w - 1.0)
        + 0.25 * s * s * w / (w - 1.0).powi(2);
    Aux { q_log_deriv: Some(lq), p_log_deriv: Some(lp), r: sigma / s, sigma }
}

fn jacobi_aux(n: f64, a: f64, b: f64, x: f64, w: f64, wp: f64) -> Aux {
    let t = 2.0 * n + a + b;
    let m = 4.0 * x * (1.0 - x);
    let xx = x * (x - 1.0);
    let common = x - 1.0 + w + x * (1.0 - x) * wp / (w - x);
    let lq = (common + (t + 1.0) * xx / (w - x)) / m;
    let lp = (common - (t - 1.0) * xx / (w - x)) / m;
    let sigma = if w == 1.0 && b == 0.0 {
        -0.5 * a * a * x + 0.5 * t * t * x
    } else {
        xx * xx / (2.0 * w * (w - 1.0) * (w - x)) * (wp - w * (w - 1.0) / xx).powi(2)
            - 0.5 * a * a * x / w
            + 0.5 * b * b * (x - 1.0) / (w - 1.0)
            + 0.5 * t * t * x * (1.0 - x) / (w - x)
    };
    Aux { q_log_deriv: Some(lq), p_log_deriv: Some(lp), r: sigma / m, sigma }
}

/// (q′/q, p′/p, R, σ) from the transcendent.
pub fn aux_from_omega(p: &PainleveSpec, st: &PainleveState) -> Result<Aux> {
    let e = &p.ensemble;
    let n = e.n as f64;
    let (t, w, wp) = (st.t, st.omega, st.omega_prime);
    let classical = is_classical_value(p, w);
    if !classical {
        guard(p, st)?;
    }
    let aux = match (e.kind, p.row, p.variant) {
        (Kind::Gaussian, 1, _) => {
            let s = t;
            let den = 0.5 * wp - 0.5 * w * w - s * w;
            let r = -0.5 * (s * s - 2.0 * n) * w - 0.5 * s * w * w - w.powi(3) / 8.0 + wp * wp / (8.0 * w);
            Aux {
                q_log_deriv: Some(-s - w - 2.0 * n * w / den),
                p_log_deriv: Some(-0.5 * w + wp / (2.0 * w)),
                r,
                sigma: r,
            }
        }
        (Kind::Gaussian, 2, _) => {
            let r = gaussian_row2_r(n, t, w, wp);
            Aux { q_log_deriv: None, p_log_deriv: None, r, sigma: r }
        }
        (Kind::Laguerre, 1, Variant::Derived) => laguerre_aux(n, e.a, t, w, wp),
        (Kind::Laguerre, 1, _) => laguerre_listed_aux(n, e.a, t, w, wp),
        (Kind::Jacobi, 1, _) => jacobi_aux(n, e.a, e.b, t, w, wp),
        _ => {
            return Err(Error::NoMapping(format!(
                "{} row {} carries parameter values only",
                e.kind, p.row
            )))
        }
    };
    if !(aux.r.is_finite() && aux.sigma.is_finite()) {
        return Err(Error::GuardBand { t });
    }
    Ok(aux)
}

/// True when ω is the fixed singular value carrying an elementary
/// solution for this parameter set.
fn is_classical_value(p: &PainleveSpec, w: f64) -> bool {
    match (p.ensemble.kind, p.variant) {
        (Kind::Jacobi, _) => p.row == 1 && p.ensemble.b == 0.0 && w == 1.0,
        (Kind::Laguerre, Variant::Derived) => p.ensemble.a == 0.0 && w.is_infinite(),
        _ => false,
    }
}

/// d/ds of the log-derivatives of q and p along the Tracy–Widom flow.
fn log_deriv_slopes(spec: &EnsembleSpec, d: &RecurrenceData, st: &TwState) -> Result<(f64, f64, f64, f64)> {
    let r = tw_rhs(spec, d, st)?;
    let s = st.s;
    let m = d.m(s);
    let mp = d.m_prime(s);
    let (c1, c2, c3) = coefficients(d, s, st.u, st.v, st.w);
    let c1p = d.alpha1 - d.mu2 * r.v - d.beta1 * r.w + d.gamma1 * r.u;
    let c2p = d.beta1 + (2.0 * d.alpha1 + d.mu2) * r.u + 2.0 * d.beta1 * r.v;
    let c3p = d.gamma1 - (2.0 * d.alpha1 - d.mu2) * r.w - 2.0 * d.gamma1 * r.v;
    let lq = r.q / st.q;
    let lp = r.p / st.p;
    let ratio = st.p / st.q;
    let ratio_p = ratio * (lp - lq);
    let lq_p = ((c1p + c2p * ratio + c2 * ratio_p) * m - (c1 + c2 * ratio) * mp) / (m * m);
    let inv = st.q / st.p;
    let inv_p = -inv * (lp - lq);
    let lp_p = -((c3p * inv + c3 * inv_p + c1p) * m - (c3 * inv + c1) * mp) / (m * m);
    Ok((lq, lp, lq_p, lp_p))
}

/// Closed-form (ω, ω′) from a Tracy–Widom state, used as the Newton seed.
pub fn omega_from_tw(p: &PainleveSpec, st: &TwState) -> Result<PainleveState> {
    let e = &p.ensemble;
    let d = recurrence_data(e);
    let (lq, lp, lq_p, lp_p) = log_deriv_slopes(e, &d, st)?;
    let s = st.s;
    let (c1, c2, c3) = coefficients(&d, s, st.u, st.v, st.w);
    let t = t_of_s(p, s);
    let (w, wp) = match (e.kind, p.row, p.variant) {
        (Kind::Gaussian, 1, _) => {
            let w = 2.0 * st.p * st.p / c3;
            (w, w * (2.0 * lp + w))
        }
        (Kind::Gaussian, 2, Variant::Minus) => (-s - lq, -1.0 - lq_p),
        (Kind::Gaussian, 2, _) => (lp - s, lp_p - 1.0),
        (Kind::Laguerre, 1, Variant::Derived) => {
            let z = st.p * st.p / c3;
            if e.a == 0.0 && (z - 1.0).abs() < 1e-8 {
                (f64::INFINITY, 0.0)
            } else {
                let c3p = -(2.0 * d.alpha1 - d.mu2) * st.p * st.p;
                let zp = (2.0 * st.p * st.p * lp * c3 - st.p * st.p * c3p) / (c3 * c3);
                (z / (z - 1.0), -zp / (z - 1.0).powi(2))
            }
        }
        (Kind::Jacobi, 1, _) => {
            let x = t;
            let k = 2.0 * e.n as f64 + e.a + e.b;
            let w = x + 2.0 * k * x * (x - 1.0) / (2.0 * c1 + c2 * st.p / st.q + c3 * st.q / st.p);
            if e.b == 0.0 && (w - 1.0).abs() < 1e-8 {
                (1.0, 0.0)
            } else {
                let m = 1.0 - s * s;
                let wp = (m * lp - (x - 1.0 + w) + (k - 1.0) * x * (x - 1.0) / (w - x)) * (w - x)
                    / (x * (1.0 - x));
                (w, wp)
            }
        }
        _ => return Err(Error::NoMapping(format!("{} row {}", e.kind, p.row))),
    };
    Ok(PainleveState { t, omega: w, omega_prime: wp })
}

/// Starting abscissa of the ω-route: √(2N) + 3/2 for Gaussian (ω there is
/// still well clear of the guard band), δ for Laguerre, x = δ/2 for Jacobi.
pub fn anchor_t(p: &PainleveSpec, delta: f64) -> f64 {
    match p.ensemble.kind {
        Kind::Gaussian => (2.0 * p.ensemble.n as f64).sqrt() + 1.5,
        Kind::Laguerre => delta,
        Kind::Jacobi => 0.5 * delta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PainleveInit {
    pub state: PainleveState,
    pub log_e: f64,
    /// ω sits on a fixed singular value carrying an elementary solution.
    pub classical: bool,
    pub newton_iterations: usize,
    pub residual: f64,
}

fn targets(p: &PainleveSpec, st: &PainleveState) -> Result<[f64; 2]> {
    if p.ensemble.kind == Kind::Gaussian && p.row == 2 {
        let n = p.ensemble.n as f64;
        let (s, w, wp) = (st.t, st.omega, st.omega_prime);
        let wpp = painleve_rhs(p, st)?;
        let ds = -n - s * w - 0.5 * w * w;
        let dw = n * n / (2.0 * w * w) - 0.5 * (s * s + n) - s * w - 0.375 * w * w - wp * wp / (8.0 * w * w);
        let dwp = wp / (4.0 * w);
        return Ok([gaussian_row2_r(n, s, w, wp), ds + dw * wp + dwp * wpp]);
    }
    let a = aux_from_omega(p, st)?;
    Ok([a.q_log_deriv.unwrap_or(f64::NAN), a.sigma])
}

/// (ω, ω′) at the anchor by damped Newton on the ω-map, matching the
/// oracle's (q′/q, σ), or (R, R′) for the second Gaussian row. The seed is
/// the closed-form inverse [`omega_from_tw`].
pub fn omega_init(p: &PainleveSpec, delta: f64) -> Result<PainleveInit> {
    omega_init_with_order(p, delta, 64)
}

pub fn omega_init_with_order(p: &PainleveSpec, delta: f64, order: usize) -> Result<PainleveInit> {
    let t0 = anchor_t(p, delta);
    let s0 = s_of_t(p, t0);
    let e = &p.ensemble;
    let d = recurrence_data(e);
    let tw = state_from_nystrom(e, s0, order)?;
    let seed = omega_from_tw(p, &tw)?;
    if is_classical_value(p, seed.omega) {
        return Ok(PainleveInit { state: seed, log_e: tw.log_e, classical: true, newton_iterations: 0, residual: 0.0 });
    }
    let want = if e.kind == Kind::Gaussian && p.row == 2 {
        let r = tw_rhs(e, &d, &tw)?;
        [tw.sigma, r.sigma]
    } else {
        let r = tw_rhs(e, &d, &tw)?;
        [r.q / tw.q, tw.sigma]
    };
    let scale = 1.0 + want[0].abs().max(want[1].abs());
    let resid = |z: [f64; 2]| -> Option<[f64; 2]> {
        let st = PainleveState { t: t0, omega: z[0], omega_prime: z[1] };
        let g = targets(p, &st).ok()?;
        let r = [g[0] - want[0], g[1] - want[1]];
        r.iter().all(|x| x.is_finite()).then_some(r)
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut z = [seed.omega, seed.omega_prime];
    let mut f = resid(z).ok_or(Error::NewtonFailed { residual: f64::INFINITY })?;
    let mut iters = 0;
    while norm(f) > 1e-13 * scale && iters < 60 {
        iters += 1;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * (1.0 + z[k].abs());
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let (Some(fp), Some(fm)) = (resid(zp), resid(zm)) else {
                return Err(Error::NewtonFailed { residual: norm(f) });
            };
            for i in 0..2 {
                jac[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NewtonFailed { residual: norm(f) });
        }
        let dz = [
            (jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            (-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = [z[0] - lambda * dz[0], z[1] - lambda * dz[1]];
            if let Some(fc) = resid(cand) {
                if norm(fc) < norm(f) {
                    z = cand;
                    f = fc;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = norm(f);
    if residual > 1e-10 * scale {
        return Err(Error::NewtonFailed { residual });
    }
    Ok(PainleveInit {
        state: PainleveState { t: t0, omega: z[0], omega_prime: z[1] },
        log_e: tw.log_e,
        classical: false,
        newton_iterations: iters,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PainleveSample {
    pub s: f64,
    pub t: f64,
    pub e2: f64,
    pub log_e: f64,
    pub sigma: f64,
    pub r: f64,
    pub omega: f64,
    pub omega_prime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PainleveCurve {
    pub spec: PainleveSpec,
    /// Samples at the requested points that were reached.
    pub samples: Vec<PainleveSample>,
    pub complete: bool,
    pub last_good_t: f64,
    pub diagnostic: Option<String>,
}

/// Integrates ω together with ln E₂ (via R from the ω-map) from the
/// initial state to `t_to`, sampling at `t_points`. A movable pole or a
/// guard-band crossing ends the curve early with a diagnostic.
pub fn integrate_painleve(
    p: &PainleveSpec,
    init: &PainleveInit,
    t_to: f64,
    t_points: &[f64],
    tol: f64,
) -> Result<PainleveCurve> {
    let eps = endpoint_sign(p.ensemble.kind);
    let ds_dt = if p.kind == PainleveKind::PVI { 2.0 } else { 1.0 };
    let classical = init.classical;
    let w_fixed = init.state.omega;
    let mut f = |t: f64, y: &[f64; 3]| -> Option<[f64; 3]> {
        if classical {
            let st = PainleveState { t, omega: w_fixed, omega_prime: 0.0 };
            let a = aux_from_omega(p, &st).ok()?;
            return Some([0.0, 0.0, -eps * a.r * ds_dt]);
        }
        if y[0].abs() > POLE_LIMIT {
            return None;
        }
        let st = PainleveState { t, omega: y[0], omega_prime: y[1] };
        let wpp = painleve_rhs(p, &st).ok()?;
        let a = aux_from_omega(p, &st).ok()?;
        Some([y[1], wpp, -eps * a.r * ds_dt])
    };
    let y0 = if classical {
        [0.0, 0.0, init.log_e]
    } else {
        [init.state.omega, init.state.omega_prime, init.log_e]
    };
    let mut on_step = |_t: f64, y: &[f64; 3], _: &[f64; 3]| {
        if !classical && y[0].abs() > 0.1 * POLE_LIMIT {
            Control::Stop
        } else {
            Control::Continue
        }
    };
    let run = dopri5(&mut f, init.state.t, y0, t_to, t_points, &OdeOptions::with_tol(tol), &mut on_step);
    let mut samples = Vec::with_capacity(run.outputs.len());
    for (t, y) in &run.outputs {
        let st = if classical {
            PainleveState { t: *t, omega: w_fixed, omega_prime: 0.0 }
        } else {
            PainleveState { t: *t, omega: y[0], omega_prime: y[1] }
        };
        let a = aux_from_omega(p, &st)?;
        samples.push(PainleveSample {
            s: s_of_t(p, *t),
            t: *t,
            e2: y[2].exp(),
            log_e: y[2],
            sigma: a.sigma,
            r: a.r,
            omega: st.omega,
            omega_prime: st.omega_prime,
        });
    }
    let (complete, diagnostic) = match run.outcome {
        Outcome::Completed => (true, None),
        Outcome::Stopped => (false, Some(format!("|ω| exceeded {:e}: movable pole near t = {}", 0.1 * POLE_LIMIT, run.t_last))),
        Outcome::Collapsed => (
            false,
            Some(format!("step size collapsed near t = {}: movable pole or fixed singular value", run.t_last)),
        ),
        Outcome::MaxSteps => (false, Some(format!("step budget exhausted at t = {}", run.t_last))),
    };
    Ok(PainleveCurve { spec: *p, samples, complete, last_good_t: run.t_last, diagnostic })
}

/// E₂ along the ω-route at the given s values, integrating outward from
/// the anchor in each direction needed. Samples come back in the order of
/// `s_points`; points beyond a pole are missing and the curve is marked
/// incomplete.
pub fn painleve_gap(
    p: &PainleveSpec,
    s_points: &[f64],
    delta: f64,
    tol: f64,
) -> Result<PainleveCurve> {
    let init = omega_init(p, delta)?;
    let t0 = init.state.t;
    let ts: Vec<(usize, f64)> = s_points.iter().map(|&s| t_of_s(p, s)).enumerate().collect();
    let mut up: Vec<(usize, f64)> = ts.iter().copied().filter(|x| x.1 >= t0).collect();
    let mut down: Vec<(usize, f64)> = ts.iter().copied().filter(|x| x.1 < t0).collect();
    up.sort_by(|a, b| a.1.total_cmp(&b.1));
    down.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut slots: Vec<Option<PainleveSample>> = vec![None; s_points.len()];
    let mut complete = true;
    let mut diagnostic = None;
    let mut last_good_t = t0;
    for branch in [up, down] {
        let Some(&(_, end)) = branch.last() else { continue };
        let pts: Vec<f64> = branch.iter().map(|x| x.1).collect();
        let c = integrate_painleve(p, &init, end, &pts, tol)?;
        for ((i, _), smp) in branch.iter().zip(c.samples) {
            slots[*i] = Some(smp);
        }
        if !c.complete {
            complete = false;
            last_good_t = c.last_good_t;
            diagnostic = c.diagnostic;
        }
    }
    Ok(PainleveCurve {
        spec: *p,
        samples: slots.into_iter().flatten().collect(),
        complete,
        last_good_t,
        diagnostic,
    })
}
