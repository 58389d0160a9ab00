//! Direct sampling of GUE, LUE and JUE eigenvalues.
//!
//! Stream rule: sample i of a batch with seed S is drawn from
//! `ChaCha8Rng::seed_from_u64(S)` on stream ⌊i / CHUNK⌋, starting from that
//! stream's first word. Chunks run in parallel and are merged by index, so
//! a batch depends only on (spec, count, seed).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::weights::{EnsembleSpec, Kind};

pub const CHUNK: usize = 1024;
pub const MIN_CONDITIONED: usize = 100;

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("positive standard deviation")
}

fn hermitian_eigenvalues(h: DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn gaussian_block(rows: usize, cols: usize, sd: f64, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = normal(sd);
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(g.sample(rng), g.sample(rng)))
}

/// Hermitian matrix with diagonal density e^{−x²}/√π and off-diagonal
/// density (2/π)e^{−2|z|²}; returns its eigenvalues, ascending.
pub fn sample_gue(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let diag = normal(std::f64::consts::FRAC_1_SQRT_2);
    let off = normal(0.5);
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(diag.sample(rng), 0.0);
        for j in i + 1..n {
            let z = Complex64::new(off.sample(rng), off.sample(rng));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    hermitian_eigenvalues(h)
}

fn check_integer(name: &str, x: f64) -> Result<usize> {
    if x < 0.0 || x.fract() != 0.0 {
        return Err(Error::ParamDomain(format!(
            "{name} = {x}: Monte-Carlo sampling needs a non-negative integer exponent"
        )));
    }
    Ok(x as usize)
}

/// Eigenvalues of XX* with X an n × (n+a) matrix of unit-variance complex
/// Gaussians: weight x^a e^{−x}.
pub fn sample_lue(n: usize, a: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let x = gaussian_block(n, n + a, std::f64::consts::FRAC_1_SQRT_2, rng);
    hermitian_eigenvalues(&x * x.adjoint())
}

/// With W₁ = X₁X₁* (n+b columns) and W₂ = X₂X₂* (n+a columns), the
/// eigenvalues λ of (W₁+W₂)^{−1/2} W₁ (W₁+W₂)^{−1/2} have weight
/// λ^b (1−λ)^a; they are returned as x = 2λ − 1.
pub fn sample_jue(n: usize, a: usize, b: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    let x1 = gaussian_block(n, n + b, sd, rng);
    let x2 = gaussian_block(n, n + a, sd, rng);
    let w1 = &x1 * x1.adjoint();
    let total = &w1 + &x2 * x2.adjoint();
    let l = total.cholesky().expect("sum of full-rank Wishart matrices is positive definite").l();
    let li = l.try_inverse().expect("Cholesky factor is invertible");
    let m = &li * w1 * li.adjoint();
    hermitian_eigenvalues(m).into_iter().map(|lam| (2.0 * lam - 1.0).clamp(-1.0, 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub spec: EnsembleSpec,
    pub count: usize,
    /// One ascending N-vector per sample.
    pub eigenvalue_sets: Vec<Vec<f64>>,
    pub seed: u64,
}

pub fn sample_batch(spec: &EnsembleSpec, count: usize, seed: u64) -> Result<SampleBatch> {
    let n = spec.n;
    let (a, b) = match spec.kind {
        Kind::Gaussian => (0, 0),
        Kind::Laguerre => (check_integer("a", spec.a)?, 0),
        Kind::Jacobi => (check_integer("a", spec.a)?, check_integer("b", spec.b)?),
    };
    let kind = spec.kind;
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len)
                .map(|_| match kind {
                    Kind::Gaussian => sample_gue(n, &mut rng),
                    Kind::Laguerre => sample_lue(n, a, &mut rng),
                    Kind::Jacobi => sample_jue(n, a, b, &mut rng),
                })
                .collect()
        })
        .collect();
    Ok(SampleBatch { spec: *spec, count, eigenvalue_sets: parts.into_iter().flatten().collect(), seed })
}

/// Fraction of samples with no eigenvalue in the open interval, and its
/// binomial standard error.
pub fn estimate_gap(batch: &SampleBatch, interval: (f64, f64)) -> Result<(f64, f64)> {
    if batch.count == 0 {
        return Err(Error::InsufficientSamples("empty batch".into()));
    }
    let (lo, hi) = interval;
    let hits = batch
        .eigenvalue_sets
        .iter()
        .filter(|ev| !ev.iter().any(|&x| x > lo && x < hi))
        .count();
    let m = batch.count as f64;
    let p = hits as f64 / m;
    Ok((p, (p * (1.0 - p) / m).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Number of events the density is normalized by.
    pub events: usize,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn mass(&self) -> f64 {
        self.edges.windows(2).zip(&self.density).map(|(e, d)| (e[1] - e[0]) * d).sum()
    }
}

fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    if x < edges[0] || x >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

fn histogram(edges: &[f64], counts: &[usize], events: usize) -> Histogram {
    let m = events as f64;
    let (density, std_error) = edges
        .windows(2)
        .zip(counts)
        .map(|(e, &c)| {
            let w = e[1] - e[0];
            let f = c as f64 / m;
            (f / w, (f * (1.0 - f).max(0.0) / m).sqrt() / w)
        })
        .unzip();
    Histogram { edges: edges.to_vec(), density, std_error, events }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|e| !(e[0] < e[1])) {
        return Err(Error::ParamDomain("bin edges must be strictly increasing, at least two".into()));
    }
    Ok(())
}

/// Conditional density of the nearest eigenvalue to the right of one at a1.
/// Every eigenvalue within `window` of a1 is an event; its right neighbour
/// is recorded at a1 + (neighbour − eigenvalue). Events without a right
/// neighbour add no mass.
pub fn estimate_spacing(batch: &SampleBatch, a1: f64, edges: &[f64], window: f64) -> Result<Histogram> {
    check_edges(edges)?;
    if !(window > 0.0) {
        return Err(Error::ParamDomain(format!("conditioning window {window} must be positive")));
    }
    let mut counts = vec![0usize; edges.len() - 1];
    let mut events = 0;
    for ev in &batch.eigenvalue_sets {
        for (j, &x) in ev.iter().enumerate() {
            if (x - a1).abs() >= window {
                continue;
            }
            events += 1;
            if let Some(&next) = ev.get(j + 1) {
                if let Some(k) = bin_index(edges, a1 + next - x) {
                    counts[k] += 1;
                }
            }
        }
    }
    if events < MIN_CONDITIONED {
        return Err(Error::InsufficientSamples(format!(
            "{events} eigenvalues within {window} of {a1}; need at least {MIN_CONDITIONED}"
        )));
    }
    Ok(histogram(edges, &counts, events))
}

/// Empirical one-point density: eigenvalue counts per bin divided by the
/// number of samples and the bin width, so the total mass over the support
/// is N.
pub fn rho1_histogram(batch: &SampleBatch, edges: &[f64]) -> Result<Histogram> {
    check_edges(edges)?;
    if batch.count == 0 {
        return Err(Error::InsufficientSamples("empty batch".into()));
    }
    let mut counts = vec![0usize; edges.len() - 1];
    let mut sq = vec![0usize; edges.len() - 1];
    for ev in &batch.eigenvalue_sets {
        let mut local = vec![0usize; edges.len() - 1];
        for &x in ev {
            if let Some(k) = bin_index(edges, x) {
                local[k] += 1;
            }
        }
        for k in 0..local.len() {
            counts[k] += local[k];
            sq[k] += local[k] * local[k];
        }
    }
    let m = batch.count as f64;
    let mut h = histogram(edges, &counts, batch.count);
    for (k, e) in edges.windows(2).enumerate() {
        let mean = counts[k] as f64 / m;
        let var = (sq[k] as f64 / m - mean * mean).max(0.0);
        h.std_error[k] = (var / m).sqrt() / (e[1] - e[0]);
    }
    Ok(h)
}
