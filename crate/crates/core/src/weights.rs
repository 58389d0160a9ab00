//! Classical weights, orthonormal polynomials, the (φ, ψ) pair and the
//! Christoffel–Darboux kernel.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Gaussian,
    Laguerre,
    Jacobi,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Gaussian => "gaussian",
            Kind::Laguerre => "laguerre",
            Kind::Jacobi => "jacobi",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gue" | "hermite" => Ok(Kind::Gaussian),
            "laguerre" | "lue" => Ok(Kind::Laguerre),
            "jacobi" | "jue" => Ok(Kind::Jacobi),
            other => Err(Error::ParamDomain(format!("unknown ensemble `{other}`"))),
        }
    }
}

/// Which classical weight, the matrix size N, and the exponents.
///
/// `a` is the Laguerre exponent or the Jacobi exponent at +1; `b` is the
/// Jacobi exponent at −1. Unused exponents are stored as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: Kind,
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

pub fn make_ensemble(kind: Kind, n: usize, a: f64, b: f64) -> Result<EnsembleSpec> {
    EnsembleSpec::new(kind, n, a, b)
}

impl EnsembleSpec {
    pub fn new(kind: Kind, n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::ParamDomain("matrix size n must be at least 1".into()));
        }
        let (a, b) = match kind {
            Kind::Gaussian => (0.0, 0.0),
            Kind::Laguerre => (a, 0.0),
            Kind::Jacobi => (a, b),
        };
        for (name, v) in [("a", a), ("b", b)] {
            if !v.is_finite() || v <= -1.0 {
                return Err(Error::ParamDomain(format!("{name} = {v} must exceed -1")));
            }
        }
        Ok(Self { kind, n, a, b })
    }

    pub fn gaussian(n: usize) -> Result<Self> {
        Self::new(Kind::Gaussian, n, 0.0, 0.0)
    }

    pub fn laguerre(n: usize, a: f64) -> Result<Self> {
        Self::new(Kind::Laguerre, n, a, 0.0)
    }

    pub fn jacobi(n: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(Kind::Jacobi, n, a, b)
    }

    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            Kind::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
            Kind::Laguerre => (0.0, f64::INFINITY),
            Kind::Jacobi => (-1.0, 1.0),
        }
    }

    /// Exponents of the weight at the finite support endpoints, as
    /// (lower endpoint, exponent) pairs.
    pub fn endpoint_exponents(&self) -> Vec<(f64, f64)> {
        match self.kind {
            Kind::Gaussian => vec![],
            Kind::Laguerre => vec![(0.0, self.a)],
            Kind::Jacobi => vec![(-1.0, self.b), (1.0, self.a)],
        }
    }

    /// Exponent of the weight if `x` is a finite support endpoint.
    pub fn exponent_at(&self, x: f64) -> Option<f64> {
        self.endpoint_exponents()
            .into_iter()
            .find(|&(e, _)| e == x)
            .map(|(_, p)| p)
    }

    pub fn weight(&self, x: f64) -> Result<f64> {
        self.sqrt_weight(x).map(|r| r * r)
    }

    pub fn sqrt_weight(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return Err(Error::ParamDomain(format!(
                "x = {x} outside the support of the {} weight",
                self.kind
            )));
        }
        if let Some(p) = self.exponent_at(x) {
            if p < 0.0 {
                return Err(Error::SingularEndpoint { x });
            }
        }
        Ok(match self.kind {
            Kind::Gaussian => (-0.5 * x * x).exp(),
            Kind::Laguerre => x.powf(0.5 * self.a) * (-0.5 * x).exp(),
            Kind::Jacobi => (1.0 - x).powf(0.5 * self.a) * (1.0 + x).powf(0.5 * self.b),
        })
    }

    pub fn recurrence(&self) -> Recurrence {
        Recurrence::new(self)
    }
}

/// Coefficients of x p_k = b_{k+1} p_{k+1} + α_k p_k + b_k p_{k−1} for the
/// orthonormal family, k = 0..=N.
#[derive(Debug, Clone)]
pub struct Recurrence {
    pub alpha: Vec<f64>,
    pub b: Vec<f64>,
    pub p0: f64,
}

impl Recurrence {
    fn new(spec: &EnsembleSpec) -> Self {
        let n = spec.n;
        let (a, bb) = (spec.a, spec.b);
        let mut alpha = vec![0.0; n + 1];
        let mut b = vec![0.0; n + 1];
        let p0;
        match spec.kind {
            Kind::Gaussian => {
                for (k, bk) in b.iter_mut().enumerate().skip(1) {
                    *bk = (k as f64 / 2.0).sqrt();
                }
                p0 = PI.powf(-0.25);
            }
            Kind::Laguerre => {
                for k in 0..=n {
                    let kf = k as f64;
                    alpha[k] = 2.0 * kf + a + 1.0;
                    b[k] = (kf * (kf + a)).sqrt();
                }
                p0 = (-0.5 * ln_gamma(a + 1.0)).exp();
            }
            Kind::Jacobi => {
                let s = a + bb;
                alpha[0] = (bb - a) / (s + 2.0);
                for k in 1..=n {
                    let kf = k as f64;
                    let t = 2.0 * kf + s;
                    alpha[k] = (bb * bb - a * a) / (t * (t + 2.0));
                    b[k] = if k == 1 {
                        (4.0 * (1.0 + a) * (1.0 + bb) / ((2.0 + s).powi(2) * (3.0 + s))).sqrt()
                    } else {
                        (4.0 * kf * (kf + a) * (kf + bb) * (kf + s)
                            / (t * t * (t + 1.0) * (t - 1.0)))
                            .sqrt()
                    };
                }
                let ln_h0 = (s + 1.0) * 2f64.ln() + ln_gamma(a + 1.0) + ln_gamma(bb + 1.0)
                    - ln_gamma(s + 2.0);
                p0 = (-0.5 * ln_h0).exp();
            }
        }
        Self { alpha, b, p0 }
    }

    /// p_0..=p_k at x.
    pub fn values(&self, k: usize, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(k + 1);
        let (mut prev, mut cur) = (0.0, self.p0);
        out.push(cur);
        for j in 0..k {
            let next = ((x - self.alpha[j]) * cur - self.b[j] * prev) / self.b[j + 1];
            prev = cur;
            cur = next;
            out.push(cur);
        }
        out
    }

    /// (p, p′, p″) of degrees k−1 and k at x, k ≥ 1.
    pub fn top_pair(&self, k: usize, x: f64) -> ([f64; 3], [f64; 3]) {
        let mut prev = [0.0; 3];
        let mut cur = [self.p0, 0.0, 0.0];
        for j in 0..k {
            let c = x - self.alpha[j];
            let bj = self.b[j];
            let d = self.b[j + 1];
            let next = [
                (c * cur[0] - bj * prev[0]) / d,
                (c * cur[1] + cur[0] - bj * prev[1]) / d,
                (c * cur[2] + 2.0 * cur[1] - bj * prev[2]) / d,
            ];
            prev = cur;
            cur = next;
        }
        (prev, cur)
    }
}

pub fn orthonormal_poly(spec: &EnsembleSpec, k: usize, x: f64) -> Result<f64> {
    if k > spec.n {
        return Err(Error::ParamDomain(format!("degree {k} exceeds N = {}", spec.n)));
    }
    Ok(*spec.recurrence().values(k, x).last().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPsi {
    pub phi: f64,
    pub psi: f64,
}

/// φ, ψ with K(x,y) = (φ(x)ψ(y) − φ(y)ψ(x))/(x − y).
///
/// With c = √(a_{N−1}/a_N) = √b_N: Gaussian and Jacobi take
/// (φ, ψ) = (c√w p_N, c√w p_{N−1}); Laguerre takes (c√w p_{N−1}, −c√w p_N),
/// which is the pairing that reproduces A(s) = −a/2 − N + s/2 and
/// B = C = √(N(N+a)).
pub fn phi_psi(spec: &EnsembleSpec, x: f64) -> Result<PhiPsi> {
    let sw = spec.sqrt_weight(x)?;
    let rec = spec.recurrence();
    let (lo, hi) = rec.top_pair(spec.n, x);
    let c = rec.b[spec.n].sqrt() * sw;
    Ok(match spec.kind {
        Kind::Gaussian | Kind::Jacobi => PhiPsi { phi: c * hi[0], psi: c * lo[0] },
        Kind::Laguerre => PhiPsi { phi: c * lo[0], psi: -c * hi[0] },
    })
}

fn near_diagonal(x: f64, y: f64) -> bool {
    (x - y).abs() < 1e-6 * (1.0 + x.abs() + y.abs())
}

/// Christoffel–Darboux form of K(x, y); the confluent form is used
/// near the diagonal.
pub fn cd_kernel(spec: &EnsembleSpec, x: f64, y: f64) -> Result<f64> {
    let sw = spec.sqrt_weight(x)? * spec.sqrt_weight(y)?;
    let rec = spec.recurrence();
    let bn = rec.b[spec.n];
    let (px1, px) = rec.top_pair(spec.n, x);
    if near_diagonal(x, y) {
        // f(t) = p_N(x)p_{N−1}(t) − p_{N−1}(x)p_N(t) vanishes at t = x
        let g1 = px[0] * px1[1] - px1[0] * px[1];
        let g2 = px[0] * px1[2] - px1[0] * px[2];
        return Ok(-sw * bn * (g1 + 0.5 * g2 * (y - x)));
    }
    let (py1, py) = rec.top_pair(spec.n, y);
    Ok(sw * bn * (px[0] * py1[0] - px1[0] * py[0]) / (x - y))
}

/// √(w(x)w(y)) Σ_{k<N} p_k(x) p_k(y).
pub fn kernel_sum(spec: &EnsembleSpec, x: f64, y: f64) -> Result<f64> {
    let sw = spec.sqrt_weight(x)? * spec.sqrt_weight(y)?;
    let rec = spec.recurrence();
    let px = rec.values(spec.n - 1, x);
    let py = rec.values(spec.n - 1, y);
    Ok(sw * px.iter().zip(&py).map(|(a, b)| a * b).sum::<f64>())
}

/// n-point correlation det[K(x_i, x_j)].
pub fn rho_n(spec: &EnsembleSpec, points: &[f64]) -> Result<f64> {
    let n = points.len();
    if n == 0 || n > spec.n {
        return Err(Error::ParamDomain(format!(
            "need 1 ≤ #points ≤ N = {}, got {n}",
            spec.n
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let k = cd_kernel(spec, points[i], points[j])?;
            m[(i, j)] = k;
            m[(j, i)] = k;
        }
    }
    Ok(m.determinant())
}

/// Coefficients of m(s) = μ₀ + μ₁s + μ₂s², A = α₀ + α₁s, B = β₀ + β₁s,
/// C = γ₀ + γ₁s in m φ′ = Aφ + Bψ, m ψ′ = −Cφ − Aψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceData {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl RecurrenceData {
    pub fn m(&self, s: f64) -> f64 {
        self.mu0 + s * (self.mu1 + s * self.mu2)
    }

    pub fn m_prime(&self, s: f64) -> f64 {
        self.mu1 + 2.0 * self.mu2 * s
    }

    pub fn a(&self, s: f64) -> f64 {
        self.alpha0 + self.alpha1 * s
    }

    pub fn b(&self, s: f64) -> f64 {
        self.beta0 + self.beta1 * s
    }

    pub fn c(&self, s: f64) -> f64 {
        self.gamma0 + self.gamma1 * s
    }
}

pub fn recurrence_data(spec: &EnsembleSpec) -> RecurrenceData {
    let n = spec.n as f64;
    let zero = RecurrenceData {
        mu0: 0.0,
        mu1: 0.0,
        mu2: 0.0,
        alpha0: 0.0,
        alpha1: 0.0,
        beta0: 0.0,
        beta1: 0.0,
        gamma0: 0.0,
        gamma1: 0.0,
    };
    match spec.kind {
        Kind::Gaussian => {
            let r = (2.0 * n).sqrt();
            RecurrenceData { mu0: 1.0, alpha1: -1.0, beta0: r, gamma0: r, ..zero }
        }
        Kind::Laguerre => {
            let k = (n * (n + spec.a)).sqrt();
            RecurrenceData {
                mu1: 1.0,
                alpha0: -0.5 * spec.a - n,
                alpha1: 0.5,
                beta0: k,
                gamma0: k,
                ..zero
            }
        }
        Kind::Jacobi => {
            let (a, b) = (spec.a, spec.b);
            let t = 2.0 * n + a + b;
            // b_N (2N+a+b±1) equals the closed forms for β₀, γ₀ and stays
            // finite when N + a + b ≤ 0
            let bn = spec.recurrence().b[spec.n];
            RecurrenceData {
                mu0: 1.0,
                mu2: -1.0,
                alpha0: (b * b - a * a) / (2.0 * t),
                alpha1: -0.5 * t,
                beta0: bn * (t + 1.0),
                gamma0: bn * (t - 1.0),
                ..zero
            }
        }
    }
}
