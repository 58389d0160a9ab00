//! Nyström discretization of 𝕀 − 𝕂 on an interval: the determinant
//! E₂(0;I) together with Q, P, q, p, u, v, w and the diagonal resolvent.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{build_grid, graded_grid, GradeEnd, QuadGrid};
use crate::weights::{cd_kernel, phi_psi, EnsembleSpec, Kind, PhiPsi};

const GRADED_PANELS: usize = 12;
const GRADED_RATIO: f64 = 0.15;

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// Quadrature grid for the operator on (lo, hi). An end that sits on a
/// support endpoint with a non-integer exponent gets a geometrically graded
/// composite mesh; otherwise a single Gauss–Legendre rule is used.
pub fn operator_grid(spec: &EnsembleSpec, lo: f64, hi: f64, order: usize) -> Result<QuadGrid> {
    let rough = |x: f64| spec.exponent_at(x).is_some_and(|p| !is_integer(p));
    let end = match (rough(lo), rough(hi)) {
        (false, false) => return build_grid(lo, hi, order),
        (true, false) => GradeEnd::Lo,
        (false, true) => GradeEnd::Hi,
        (true, true) => GradeEnd::Both,
    };
    graded_grid(lo, hi, (order / 4).max(16), end, GRADED_PANELS, GRADED_RATIO)
}

fn kernel_between(spec: &EnsembleSpec, x: f64, fx: PhiPsi, y: f64, fy: PhiPsi) -> Result<f64> {
    if (x - y).abs() < 1e-6 * (1.0 + x.abs() + y.abs()) {
        cd_kernel(spec, x, y)
    } else {
        Ok((fx.phi * fy.psi - fy.phi * fx.psi) / (x - y))
    }
}

struct Discretized {
    grid: QuadGrid,
    sw: Vec<f64>,
    f: Vec<PhiPsi>,
    k: DMatrix<f64>,
}

fn discretize(spec: &EnsembleSpec, lo: f64, hi: f64, order: usize) -> Result<Discretized> {
    let grid = operator_grid(spec, lo, hi, order)?;
    let n = grid.len();
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let f = grid
        .nodes
        .iter()
        .map(|&x| phi_psi(spec, x))
        .collect::<Result<Vec<_>>>()?;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let kij = if i == j {
                cd_kernel(spec, grid.nodes[i], grid.nodes[i])?
            } else {
                kernel_between(spec, grid.nodes[i], f[i], grid.nodes[j], f[j])?
            };
            k[(i, j)] = kij;
            k[(j, i)] = kij;
        }
    }
    Ok(Discretized { grid, sw, f, k })
}

impl Discretized {
    /// δ_ij − √w_i K(x_i, x_j) √w_j
    fn operator(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d - self.sw[i] * self.k[(i, j)] * self.sw[j]
        })
    }
}

/// Either factorization of the symmetrized operator, with its determinant.
enum Factor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Chol(c) => c.solve(b),
            Factor::Lu(l) => l.solve(b).unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN)),
        }
    }
}

fn factor(a: DMatrix<f64>) -> Result<(Factor, f64, f64)> {
    match Cholesky::new(a.clone()) {
        Some(c) => {
            let log_det: f64 = 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            Ok((Factor::Chol(c), log_det.exp(), log_det))
        }
        None => {
            let lu = a.lu();
            let det = lu.determinant();
            if det < -1e-12 || !det.is_finite() {
                return Err(Error::NotPositiveDefinite { det });
            }
            let det = det.max(0.0);
            Ok((Factor::Lu(lu), det, det.ln()))
        }
    }
}

/// E₂(0;(lo, hi)) by the Nyström determinant.
pub fn fredholm_det(spec: &EnsembleSpec, interval: (f64, f64), order: usize) -> Result<f64> {
    log_fredholm_det(spec, interval, order).map(f64::exp)
}

pub fn log_fredholm_det(spec: &EnsembleSpec, interval: (f64, f64), order: usize) -> Result<f64> {
    let (lo, hi) = interval;
    let d = discretize(spec, lo, hi, order)?;
    factor(d.operator()).map(|(_, _, l)| l)
}

#[derive(Debug, Clone, Serialize)]
pub struct NystromSolution {
    pub interval: (f64, f64),
    pub det_value: f64,
    pub log_det: f64,
    /// q at (lo, hi); NaN where the endpoint is a singular point of the weight.
    pub q_endpoints: [f64; 2],
    pub p_endpoints: [f64; 2],
    /// R(x, x) at (lo, hi).
    pub r_diag: [f64; 2],
    pub u: f64,
    pub v: f64,
    /// v computed as ⟨φ|P⟩.
    pub v_dual: f64,
    pub w: f64,
    pub nodes: Vec<f64>,
    pub q_nodes: Vec<f64>,
    pub p_nodes: Vec<f64>,
}

pub fn nystrom_solve(spec: &EnsembleSpec, interval: (f64, f64), order: usize) -> Result<NystromSolution> {
    let (lo, hi) = interval;
    let d = discretize(spec, lo, hi, order)?;
    let n = d.grid.len();
    let (fac, det_value, log_det) = factor(d.operator())?;

    let b_phi = DVector::from_fn(n, |i, _| d.sw[i] * d.f[i].phi);
    let b_psi = DVector::from_fn(n, |i, _| d.sw[i] * d.f[i].psi);
    let qt = fac.solve(&b_phi);
    let pt = fac.solve(&b_psi);

    let u = b_phi.dot(&qt);
    let v = b_psi.dot(&qt);
    let v_dual = b_phi.dot(&pt);
    let w = b_psi.dot(&pt);

    let wq = DVector::from_fn(n, |i, _| d.sw[i] * qt[i]);
    let wp = DVector::from_fn(n, |i, _| d.sw[i] * pt[i]);
    let kq = &d.k * &wq;
    let kp = &d.k * &wp;
    let q_nodes = (0..n).map(|i| d.f[i].phi + kq[i]).collect();
    let p_nodes = (0..n).map(|i| d.f[i].psi + kp[i]).collect();

    let mut q_end = [f64::NAN; 2];
    let mut p_end = [f64::NAN; 2];
    let mut r_diag = [f64::NAN; 2];
    for (slot, &e) in [lo, hi].iter().enumerate() {
        let Ok(fe) = phi_psi(spec, e) else { continue };
        let kvec = (0..n)
            .map(|j| kernel_between(spec, d.grid.nodes[j], d.f[j], e, fe).map(|k| d.sw[j] * k))
            .collect::<Result<Vec<_>>>()?;
        let kvec = DVector::from_vec(kvec);
        q_end[slot] = fe.phi + kvec.dot(&qt);
        p_end[slot] = fe.psi + kvec.dot(&pt);
        r_diag[slot] = cd_kernel(spec, e, e)? + kvec.dot(&fac.solve(&kvec));
    }

    Ok(NystromSolution {
        interval,
        det_value,
        log_det,
        q_endpoints: q_end,
        p_endpoints: p_end,
        r_diag,
        u,
        v,
        v_dual,
        w,
        nodes: d.grid.nodes,
        q_nodes,
        p_nodes,
    })
}

fn tail_trace(spec: &EnsembleSpec, t: f64, len: f64) -> f64 {
    build_grid(t, t + len, 48)
        .map(|g| g.integrate(|x| cd_kernel(spec, x, x).unwrap_or(0.0)))
        .unwrap_or(f64::INFINITY)
}

/// Finite stand-in (s, T) for a semi-infinite interval (s, ∞): T is pushed
/// out until the trace of the kernel beyond T is below 1e−14. Jacobi needs
/// no truncation and returns (s, 1).
pub fn truncate_interval(spec: &EnsembleSpec, s: f64) -> Result<(f64, f64)> {
    let n = spec.n as f64;
    let (start, step, len) = match spec.kind {
        Kind::Jacobi => return Ok((s, 1.0)),
        Kind::Gaussian => ((2.0 * n).sqrt() + 2.0, 0.25, 12.0),
        Kind::Laguerre => (4.0 * n + 2.0 * spec.a + 2.0 * n.sqrt(), 1.0, 80.0),
    };
    let mut t = start;
    for _ in 0..400 {
        if tail_trace(spec, t, len) < 1e-14 {
            break;
        }
        t += step;
    }
    if s >= t {
        return Ok((s, s + 1.0));
    }
    Ok((s, t))
}

/// The interval I(s) whose gap probability is tracked as the endpoint s
/// moves: (s, ∞) truncated for Gaussian, (0, s) for Laguerre, (−1, s) for
/// Jacobi.
pub fn gap_interval(spec: &EnsembleSpec, s: f64) -> Result<(f64, f64)> {
    match spec.kind {
        Kind::Gaussian => truncate_interval(spec, s),
        Kind::Laguerre => Ok((0.0, s)),
        Kind::Jacobi => Ok((-1.0, s)),
    }
}

/// Index (0 = lo, 1 = hi) of the moving endpoint within `gap_interval`.
pub fn moving_end(spec: &EnsembleSpec) -> usize {
    match spec.kind {
        Kind::Gaussian => 0,
        Kind::Laguerre | Kind::Jacobi => 1,
    }
}

/// 1 + Σ_{n≤nmax} (−1)ⁿ/n! ∫_Iⁿ ρ_n by tensor-product quadrature.
pub fn gap_series(spec: &EnsembleSpec, interval: (f64, f64), nmax: usize) -> Result<f64> {
    gap_series_with_order(spec, interval, nmax, 24)
}

pub fn gap_series_with_order(
    spec: &EnsembleSpec,
    interval: (f64, f64),
    nmax: usize,
    order: usize,
) -> Result<f64> {
    if nmax > spec.n {
        return Err(Error::ParamDomain(format!(
            "nmax = {nmax} exceeds N = {}; higher correlations vanish",
            spec.n
        )));
    }
    let (lo, hi) = interval;
    if hi <= lo || nmax == 0 {
        return Ok(1.0);
    }
    let d = discretize(spec, lo, hi, order)?;
    let m = d.grid.len();
    let wts = &d.grid.weights;
    let mut total = 1.0;
    let mut factorial = 1.0;
    let mut idx = Vec::new();
    let mut sub = DMatrix::zeros(0, 0);
    for n in 1..=nmax {
        factorial *= n as f64;
        idx.clear();
        idx.resize(n, 0usize);
        sub.resize_mut(n, n, 0.0);
        let mut acc = 0.0;
        'outer: loop {
            let mut wprod = 1.0;
            for a in 0..n {
                wprod *= wts[idx[a]];
                for b in 0..n {
                    sub[(a, b)] = d.k[(idx[a], idx[b])];
                }
            }
            acc += wprod * sub.determinant();
            for pos in (0..n).rev() {
                idx[pos] += 1;
                if idx[pos] < m {
                    continue 'outer;
                }
                idx[pos] = 0;
            }
            break;
        }
        let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
        total += sign * acc / factorial;
    }
    Ok(total)
}

/// −(1/ρ₁(a1)) ∂²E₂(0;(a1,a2))/∂a1∂a2 by central differences of step h.
pub fn spacing_pdf(spec: &EnsembleSpec, a1: f64, a2: f64, h: f64, order: usize) -> Result<f64> {
    if !(a2 - a1 > 2.0 * h) {
        return Err(Error::ParamDomain(format!(
            "need a2 − a1 > 2h (a1 = {a1}, a2 = {a2}, h = {h})"
        )));
    }
    let rho = cd_kernel(spec, a1, a1)?;
    if rho < 1e-12 {
        return Err(Error::ParamDomain(format!("density ρ₁({a1}) = {rho:e} too small")));
    }
    let e = |x: f64, y: f64| fredholm_det(spec, (x, y), order);
    let mixed = e(a1 + h, a2 + h)? - e(a1 + h, a2 - h)? - e(a1 - h, a2 + h)? + e(a1 - h, a2 - h)?;
    Ok(-mixed / (4.0 * h * h) / rho)
}

/// Endpoint range over which E₂(0; I(s)) stays at or above `floor`, with
/// the anchored side pulled in to where the interval is non-trivial:
/// Gaussian up to √(2N) + 1, Laguerre from 0.05, Jacobi from −0.95. The
/// other side is located by bisection on the determinant.
pub fn working_range(spec: &EnsembleSpec, floor: f64, order: usize) -> Result<(f64, f64)> {
    let e = |s: f64| -> Result<f64> { fredholm_det(spec, gap_interval(spec, s)?, order) };
    let n = spec.n as f64;
    let (fixed, mut inside, mut outside) = match spec.kind {
        Kind::Gaussian => {
            let hi = (2.0 * n).sqrt() + 1.0;
            (hi, hi, -(2.0 * n).sqrt() - 4.0)
        }
        Kind::Laguerre => (0.05, 0.05, 4.0 * n + 2.0 * spec.a + 40.0),
        Kind::Jacobi => (-0.95, -0.95, 0.999),
    };
    if e(outside)? >= floor {
        return Ok(order_pair(fixed, outside));
    }
    if e(inside)? < floor {
        return Err(Error::ParamDomain(format!("E₂ already below {floor:e} at s = {inside}")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (inside + outside);
        if e(mid)? >= floor {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(order_pair(fixed, inside))
}

fn order_pair(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}
