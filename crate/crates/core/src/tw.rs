//! The Tracy–Widom system for (q, p, u, v, w, σ, ln E₂) as the moving
//! endpoint s of the gap interval varies.
//!
//! With m(s), A, B, C from [`RecurrenceData`] and ε = +1 for a moving right
//! endpoint (Laguerre, Jacobi) or −1 for the moving left endpoint of the
//! Gaussian (s, ∞):
//!
//! ```text
//! c1 = α₀ + α₁s − μ₂v − β₁w + γ₁u
//! c2 = β₀ + β₁s + (2α₁ + μ₂)u + 2β₁v
//! c3 = γ₀ + γ₁s − (2α₁ − μ₂)w − 2γ₁v
//! m q′ = c1 q + c2 p          m p′ = −c3 q − c1 p
//! u′ = εq²   v′ = εqp   w′ = εp²
//! σ = mR = c3 q² + c2 p² + 2 c1 qp       σ′ = γ₁q² + β₁p² + 2α₁qp
//! (ln E₂)′ = −εR
//! ```
//!
//! For Jacobi this is exactly the printed system; the Gaussian and
//! Laguerre instances are checked against the Nyström oracle in the tests.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fredholm::{gap_interval, moving_end, nystrom_solve, operator_grid};
use crate::ode::{dopri5, Control, OdeOptions, Outcome};
use crate::weights::{phi_psi, recurrence_data, EnsembleSpec, Kind, RecurrenceData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwState {
    pub s: f64,
    pub q: f64,
    pub p: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    /// m(s)·R(s, s): (1−s²)R for Jacobi, sR for Laguerre, R for Gaussian.
    pub sigma: f64,
    pub log_e: f64,
}

impl TwState {
    pub fn e2(&self) -> f64 {
        self.log_e.exp()
    }

    fn to_array(self) -> [f64; 7] {
        [self.log_e, self.q, self.p, self.u, self.v, self.w, self.sigma]
    }

    fn from_array(s: f64, y: &[f64; 7]) -> Self {
        Self { s, log_e: y[0], q: y[1], p: y[2], u: y[3], v: y[4], w: y[5], sigma: y[6] }
    }
}

/// d/ds of every field of [`TwState`] except s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwDerivative {
    pub log_e: f64,
    pub q: f64,
    pub p: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub sigma: f64,
}

pub fn endpoint_sign(kind: Kind) -> f64 {
    match kind {
        Kind::Gaussian => -1.0,
        Kind::Laguerre | Kind::Jacobi => 1.0,
    }
}

/// (c1, c2, c3) at (s, u, v, w).
pub fn coefficients(d: &RecurrenceData, s: f64, u: f64, v: f64, w: f64) -> (f64, f64, f64) {
    let c1 = d.alpha0 + d.alpha1 * s - d.mu2 * v - d.beta1 * w + d.gamma1 * u;
    let c2 = d.beta0 + d.beta1 * s + (2.0 * d.alpha1 + d.mu2) * u + 2.0 * d.beta1 * v;
    let c3 = d.gamma0 + d.gamma1 * s - (2.0 * d.alpha1 - d.mu2) * w - 2.0 * d.gamma1 * v;
    (c1, c2, c3)
}

fn rhs_signed(st: &TwState, d: &RecurrenceData, eps: f64) -> Result<TwDerivative> {
    let m = d.m(st.s);
    if m.abs() < 1e-14 {
        return Err(Error::SingularCoefficient { s: st.s });
    }
    let (c1, c2, c3) = coefficients(d, st.s, st.u, st.v, st.w);
    let (q, p) = (st.q, st.p);
    Ok(TwDerivative {
        log_e: -eps * st.sigma / m,
        q: (c1 * q + c2 * p) / m,
        p: -(c3 * q + c1 * p) / m,
        u: eps * q * q,
        v: eps * q * p,
        w: eps * p * p,
        sigma: d.gamma1 * q * q + d.beta1 * p * p + 2.0 * d.alpha1 * q * p,
    })
}

pub fn tw_rhs(spec: &EnsembleSpec, d: &RecurrenceData, st: &TwState) -> Result<TwDerivative> {
    rhs_signed(st, d, endpoint_sign(spec.kind))
}

pub fn jacobi_tw_rhs(st: &TwState, d: &RecurrenceData) -> Result<TwDerivative> {
    if st.s.abs() >= 1.0 {
        return Err(Error::SingularCoefficient { s: st.s });
    }
    rhs_signed(st, d, 1.0)
}

pub fn laguerre_tw_rhs(st: &TwState, d: &RecurrenceData) -> Result<TwDerivative> {
    if st.s <= 0.0 {
        return Err(Error::SingularCoefficient { s: st.s });
    }
    rhs_signed(st, d, 1.0)
}

pub fn gaussian_tw_rhs(st: &TwState, d: &RecurrenceData) -> Result<TwDerivative> {
    rhs_signed(st, d, -1.0)
}

/// σ recomputed from (q, p, u, v, w) by c3 q² + c2 p² + 2 c1 qp.
pub fn sigma_algebraic(d: &RecurrenceData, st: &TwState) -> f64 {
    let (c1, c2, c3) = coefficients(d, st.s, st.u, st.v, st.w);
    c3 * st.q * st.q + c2 * st.p * st.p + 2.0 * c1 * st.q * st.p
}

/// Residuals of the conserved relations.
///
/// Gaussian: `first` = √(2N)(u−w) + 2uw − qp. Laguerre: `first` =
/// √(N(N+a))(w−u) + uw − sqp + sR. For both, `second` is σ minus its
/// algebraic expression. Jacobi: `first` = σ + (2N+a+b)v, `second` is the
/// quadratic relation between (c2, c3) and (σ, σ′).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResiduals {
    pub first: f64,
    pub second: f64,
}

impl IntegralResiduals {
    pub fn max_abs(&self) -> f64 {
        self.first.abs().max(self.second.abs())
    }
}

pub fn integral_residuals(spec: &EnsembleSpec, d: &RecurrenceData, st: &TwState) -> Result<IntegralResiduals> {
    let n = spec.n as f64;
    let TwState { s, q, p, u, v, w, sigma, .. } = *st;
    Ok(match spec.kind {
        Kind::Gaussian => IntegralResiduals {
            first: (2.0 * n).sqrt() * (u - w) + 2.0 * u * w - q * p,
            second: sigma - sigma_algebraic(d, st),
        },
        Kind::Laguerre => IntegralResiduals {
            first: (n * (n + spec.a)).sqrt() * (w - u) + u * w - s * q * p + sigma,
            second: sigma - sigma_algebraic(d, st),
        },
        Kind::Jacobi => {
            let t = 2.0 * n + spec.a + spec.b;
            let sigma_p = tw_rhs(spec, d, st)?.sigma;
            let (_, c2, c3) = coefficients(d, s, u, v, w);
            let (a0, a1) = (d.alpha0, d.alpha1);
            let rhs = d.beta0 * d.gamma0 - (1.0 - s * s) * sigma_p - s * sigma
                + a0 / a1 * sigma
                + sigma * sigma / (4.0 * a1 * a1);
            IntegralResiduals { first: sigma + t * v, second: c2 * c3 - rhs }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitSource {
    Asymptotic,
    Nystrom,
}

/// Starting abscissa next to the anchored end of the gap interval:
/// δ for Laguerre, −1 + δ for Jacobi, and √(2N) + 3/2 for Gaussian (δ is
/// not used there). Starting the Gaussian flow further out loses digits: the
/// backward flow amplifies the rounding in the tiny initial u, v, w.
pub fn anchor_point(spec: &EnsembleSpec, delta: f64) -> f64 {
    match spec.kind {
        Kind::Gaussian => (2.0 * spec.n as f64).sqrt() + 1.5,
        Kind::Laguerre => delta,
        Kind::Jacobi => -1.0 + delta,
    }
}

/// Full state at s taken from the Nyström solution on the gap interval.
pub fn state_from_nystrom(spec: &EnsembleSpec, s: f64, order: usize) -> Result<TwState> {
    let sol = nystrom_solve(spec, gap_interval(spec, s)?, order)?;
    let e = moving_end(spec);
    let m = recurrence_data(spec).m(s);
    Ok(TwState {
        s,
        q: sol.q_endpoints[e],
        p: sol.p_endpoints[e],
        u: sol.u,
        v: sol.v,
        w: sol.w,
        sigma: m * sol.r_diag[e],
        log_e: sol.log_det,
    })
}

/// The leading-order σ (= m·R) near the anchored endpoint, including the
/// bracketed first correction where one is listed.
pub fn sigma_leading(spec: &EnsembleSpec, s: f64) -> f64 {
    let n = spec.n as f64;
    let (a, b) = (spec.a, spec.b);
    match spec.kind {
        Kind::Gaussian => {
            let ln_c = (n - 1.0) * 2f64.ln() - 0.5 * std::f64::consts::PI.ln() - ln_gamma(n);
            (ln_c + (2.0 * n - 2.0) * s.ln() - s * s).exp()
        }
        Kind::Laguerre => {
            let ln_c = ln_gamma(n + a + 1.0) - ln_gamma(n) - ln_gamma(a + 1.0) - ln_gamma(a + 2.0);
            (ln_c + (a + 1.0) * s.ln() - s).exp() * (1.0 - (2.0 * n - 2.0) / (a + 2.0) * s)
        }
        Kind::Jacobi => {
            let x = s + 1.0;
            let ln_c = ln_gamma(n + a + b + 1.0) + ln_gamma(n + b + 1.0)
                - b * 2f64.ln()
                - ln_gamma(n)
                - ln_gamma(n + a)
                - ln_gamma(b + 1.0)
                - ln_gamma(b + 2.0);
            let k = (2.0 * n * n + 2.0 * n * (a + b) + a * b - b) / (2.0 * (b + 2.0));
            (ln_c + (b + 1.0) * x.ln()).exp() * (1.0 - k * x)
        }
    }
}

/// Leading-order (q′/q, p′/p) near the anchored endpoint.
pub fn log_derivs_leading(spec: &EnsembleSpec, s: f64) -> (f64, f64) {
    let n = spec.n as f64;
    let (a, b) = (spec.a, spec.b);
    match spec.kind {
        Kind::Gaussian => (-s + n / s, -s + (n - 1.0) / s),
        Kind::Laguerre => (
            a / (2.0 * s) - (2.0 * n - 1.0 + a) / (2.0 * (a + 1.0)),
            a / (2.0 * s) - (2.0 * n + 1.0 + a) / (2.0 * (a + 1.0)),
        ),
        Kind::Jacobi => {
            let x = s + 1.0;
            (
                b / (2.0 * x)
                    - (2.0 * n * n + 2.0 * n * (a + b + 1.0) + a * (b + 1.0)) / (4.0 * (b + 1.0)),
                b / (2.0 * x)
                    - (2.0 * n * n + 2.0 * n * (a + b - 1.0) + a * (b - 1.0) - 2.0 * b)
                        / (4.0 * (b + 1.0)),
            )
        }
    }
}

pub fn init_state(spec: &EnsembleSpec, delta: f64, source: InitSource) -> Result<TwState> {
    init_state_with_order(spec, delta, source, 64)
}

/// State at [`anchor_point`]. The asymptotic source takes q, p to leading
/// order as φ, ψ at the anchor, u, v, w as the integrals of φ², φψ, ψ², and
/// σ and ln E₂ from the leading-order σ; it fails when that σ is more than
/// 1% away from the Nyström value.
pub fn init_state_with_order(
    spec: &EnsembleSpec,
    delta: f64,
    source: InitSource,
    order: usize,
) -> Result<TwState> {
    let s0 = anchor_point(spec, delta);
    let ny = state_from_nystrom(spec, s0, order)?;
    if source == InitSource::Nystrom {
        return Ok(ny);
    }
    let (lo, hi) = gap_interval(spec, s0)?;
    let grid = operator_grid(spec, lo, hi, order)?;
    let mut uvw = [0.0; 3];
    for (&x, &wt) in grid.nodes.iter().zip(&grid.weights) {
        let f = phi_psi(spec, x)?;
        uvw[0] += wt * f.phi * f.phi;
        uvw[1] += wt * f.phi * f.psi;
        uvw[2] += wt * f.psi * f.psi;
    }
    let f0 = phi_psi(spec, s0)?;
    let d = recurrence_data(spec);
    let r_lead = |t: f64| sigma_leading(spec, t) / d.m(t);
    let log_e = -grid.integrate(r_lead);
    let sigma = sigma_leading(spec, s0);
    if (sigma - ny.sigma).abs() > 0.01 * ny.sigma.abs() {
        return Err(Error::AsymptoticRange(format!(
            "leading-order σ = {sigma:e} vs Nyström {:e} at s = {s0}",
            ny.sigma
        )));
    }
    Ok(TwState { s: s0, q: f0.phi, p: f0.psi, u: uvw[0], v: uvw[1], w: uvw[2], sigma, log_e })
}

#[derive(Debug, Clone, Serialize)]
pub struct TwTrajectory {
    pub spec: EnsembleSpec,
    /// States at the requested checkpoints, in integration order.
    pub checkpoints: Vec<TwState>,
    /// State after every accepted step, starting with the initial state.
    pub steps: Vec<TwState>,
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates from `init.s` to `s_to` with relative and absolute tolerance
/// `tol`, sampling at `checkpoints` by dense output.
pub fn integrate(
    spec: &EnsembleSpec,
    init: &TwState,
    s_to: f64,
    checkpoints: &[f64],
    tol: f64,
) -> Result<TwTrajectory> {
    let d = recurrence_data(spec);
    let eps = endpoint_sign(spec.kind);
    let mut f = |s: f64, y: &[f64; 7]| {
        let st = TwState::from_array(s, y);
        let r = rhs_signed(&st, &d, eps).ok()?;
        Some([r.log_e, r.q, r.p, r.u, r.v, r.w, r.sigma])
    };
    let mut steps = Vec::new();
    let mut on_step = |s: f64, y: &[f64; 7], _: &[f64; 7]| {
        steps.push(TwState::from_array(s, y));
        Control::Continue
    };
    let run = dopri5(&mut f, init.s, init.to_array(), s_to, checkpoints, &OdeOptions::with_tol(tol), &mut on_step);
    match run.outcome {
        Outcome::Completed => {}
        _ => return Err(Error::StepCollapse { last_good: run.t_last }),
    }
    Ok(TwTrajectory {
        spec: *spec,
        checkpoints: run.outputs.iter().map(|(s, y)| TwState::from_array(*s, y)).collect(),
        steps,
        accepted: run.accepted,
        rejected: run.rejected,
    })
}

/// Integral residuals at every accepted step, σ′ taken from the system.
pub fn check_integrals(traj: &TwTrajectory) -> Result<Vec<IntegralResiduals>> {
    let d = recurrence_data(&traj.spec);
    traj.steps.iter().map(|st| integral_residuals(&traj.spec, &d, st)).collect()
}

/// States at arbitrary points, integrating outward from `init` in both
/// directions as needed. Output follows the order of `points`.
pub fn states_at(spec: &EnsembleSpec, init: &TwState, points: &[f64], tol: f64) -> Result<Vec<TwState>> {
    let mut up: Vec<(usize, f64)> = points.iter().copied().enumerate().filter(|&(_, s)| s >= init.s).collect();
    let mut down: Vec<(usize, f64)> = points.iter().copied().enumerate().filter(|&(_, s)| s < init.s).collect();
    up.sort_by(|a, b| a.1.total_cmp(&b.1));
    down.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = vec![*init; points.len()];
    for branch in [up, down] {
        let Some(&(_, end)) = branch.last() else { continue };
        let pts: Vec<f64> = branch.iter().map(|p| p.1).collect();
        let traj = integrate(spec, init, end, &pts, tol)?;
        for ((i, _), st) in branch.iter().zip(traj.checkpoints) {
            out[*i] = st;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_is_fixed_point() {
        let spec = EnsembleSpec::jacobi(2, 0.0, 0.0).unwrap();
        let d = recurrence_data(&spec);
        let st = TwState { s: 0.1, q: 0.0, p: 0.0, u: 0.3, v: 0.1, w: 0.2, sigma: 0.0, log_e: -0.5 };
        let r = jacobi_tw_rhs(&st, &d).unwrap();
        for x in [r.log_e, r.q, r.p, r.u, r.v, r.w, r.sigma] {
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn singular_coefficients() {
        let d = recurrence_data(&EnsembleSpec::jacobi(1, 0.0, 0.0).unwrap());
        let st = TwState { s: 1.0, q: 1.0, p: 1.0, u: 0.0, v: 0.0, w: 0.0, sigma: 0.0, log_e: 0.0 };
        assert!(jacobi_tw_rhs(&st, &d).is_err());
        let dl = recurrence_data(&EnsembleSpec::laguerre(1, 0.0).unwrap());
        assert!(laguerre_tw_rhs(&TwState { s: 0.0, ..st }, &dl).is_err());
    }
}
