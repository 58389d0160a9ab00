//! Independent reference computations for the integration tests.
//!
//! Polynomials come from a Cholesky factorisation of the exact moment
//! matrix, and partial integrals of w·xᵐ come from incomplete gamma and
//! beta functions, so nothing here touches the library's recurrences or
//! quadrature.
#![allow(dead_code)]

use gapflow::{EnsembleSpec, Kind};
use nalgebra::DMatrix;
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

fn binom(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// ∫_t^∞ xᵐ e^{−x²} dx for any real t.
fn gauss_upper(m: usize, t: f64) -> f64 {
    let h = 0.5 * (m as f64 + 1.0);
    let full = if m % 2 == 0 { ln_gamma(h).exp() } else { 0.0 };
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return full;
    }
    if t == 0.0 {
        return 0.5 * ln_gamma(h).exp();
    }
    if t > 0.0 {
        0.5 * ln_gamma(h).exp() * gamma_ur(h, t * t)
    } else {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        full - sign * gauss_upper(m, -t)
    }
}

/// ∫_lo^hi w(x) xᵐ dx, exactly up to special-function accuracy.
pub fn partial_moment(spec: &EnsembleSpec, m: usize, lo: f64, hi: f64) -> f64 {
    match spec.kind {
        Kind::Gaussian => gauss_upper(m, lo) - gauss_upper(m, hi),
        Kind::Laguerre => {
            let p = m as f64 + spec.a + 1.0;
            let reg = |x: f64| if x == f64::INFINITY { 1.0 } else if x <= 0.0 { 0.0 } else { gamma_lr(p, x) };
            ln_gamma(p).exp() * (reg(hi) - reg(lo))
        }
        Kind::Jacobi => {
            // x = 2t − 1: w dx = 2^{a+b+1} t^b (1−t)^a dt, x^m = Σ C(m,j) 2^j t^j (−1)^{m−j}
            let (a, b) = (spec.a, spec.b);
            let reg = |x: f64, p: f64| {
                let t = (0.5 * (x + 1.0)).clamp(0.0, 1.0);
                beta_reg(p, a + 1.0, t)
            };
            (0..=m)
                .map(|j| {
                    let p = b + j as f64 + 1.0;
                    let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binom(m, j)
                        * 2f64.powi(j as i32)
                        * ln_beta(p, a + 1.0).exp()
                        * (reg(hi, p) - reg(lo, p))
                })
                .sum::<f64>()
                * 2f64.powf(a + b + 1.0)
        }
    }
}

pub fn moment(spec: &EnsembleSpec, m: usize) -> f64 {
    let (lo, hi) = spec.support();
    partial_moment(spec, m, lo, hi)
}

pub fn weight(spec: &EnsembleSpec, x: f64) -> f64 {
    match spec.kind {
        Kind::Gaussian => (-x * x).exp(),
        Kind::Laguerre => x.powf(spec.a) * (-x).exp(),
        Kind::Jacobi => (1.0 - x).powf(spec.a) * (1.0 + x).powf(spec.b),
    }
}

/// Orthonormal polynomials p_0..p_deg in the monomial basis.
pub struct GramSchmidt {
    pub spec: EnsembleSpec,
    /// coeffs[k][j] multiplies x^j in p_k.
    pub coeffs: Vec<Vec<f64>>,
}

impl GramSchmidt {
    pub fn new(spec: &EnsembleSpec, deg: usize) -> Self {
        let h = DMatrix::from_fn(deg + 1, deg + 1, |i, j| moment(spec, i + j));
        let l = h.cholesky().expect("moment matrix is positive definite").l();
        let li = l.try_inverse().expect("invertible factor");
        let coeffs = (0..=deg).map(|k| (0..=k).map(|j| li[(k, j)]).collect()).collect();
        Self { spec: *spec, coeffs }
    }

    pub fn p(&self, k: usize, x: f64) -> f64 {
        self.coeffs[k].iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// √(w(x)w(y)) Σ_{k<N} p_k(x)p_k(y).
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        let n = self.spec.n;
        let s: f64 = (0..n).map(|k| self.p(k, x) * self.p(k, y)).sum();
        (weight(&self.spec, x) * weight(&self.spec, y)).sqrt() * s
    }
}

/// det(δ_jk − ∫_I w p_j p_k), j, k < N: the gap probability of a rank-N
/// kernel, with every integral done in closed form.
pub fn rank_n_gap(spec: &EnsembleSpec, lo: f64, hi: f64) -> f64 {
    let n = spec.n;
    let gs = GramSchmidt::new(spec, n - 1);
    let mom: Vec<f64> = (0..2 * n - 1).map(|m| partial_moment(spec, m, lo, hi)).collect();
    let g = DMatrix::from_fn(n, n, |j, k| {
        let mut acc = 0.0;
        for (r, cj) in gs.coeffs[j].iter().enumerate() {
            for (c, ck) in gs.coeffs[k].iter().enumerate() {
                acc += cj * ck * mom[r + c];
            }
        }
        (if j == k { 1.0 } else { 0.0 }) - acc
    });
    g.determinant()
}

/// Gauss–Legendre rule on (lo, hi) by Newton iteration on P_n.
pub fn legendre_rule(n: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (lo + hi) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w));
    }
    out
}

pub fn integrate(n: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    legendre_rule(n, lo, hi).into_iter().map(|(x, w)| w * f(x)).sum()
}

/// (1 + erf(s))/2, the N = 1 Gaussian gap probability on (s, ∞), by a
/// 64-point rule on (0, s); statrs' erf is only good to ~1e−11.
pub fn gaussian_cdf(s: f64) -> f64 {
    0.5 + integrate(64, 0.0, s, |x| (-x * x).exp()) / std::f64::consts::PI.sqrt()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// The ensembles the route comparisons run over.
pub fn route_matrix() -> Vec<EnsembleSpec> {
    let mut v = Vec::new();
    for n in 2..=4 {
        v.push(EnsembleSpec::gaussian(n).unwrap());
        for a in [0.0, 1.0] {
            v.push(EnsembleSpec::laguerre(n, a).unwrap());
        }
        for (a, b) in [(0.0, 0.0), (1.0, 0.5)] {
            v.push(EnsembleSpec::jacobi(n, a, b).unwrap());
        }
    }
    v
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
