//! Gauss–Legendre rules and composite grids.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    pub interval: (f64, f64),
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes (ascending) and weights of the n-point rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule of the given order mapped onto (lo, hi).
pub fn build_grid(lo: f64, hi: f64, order: usize) -> Result<QuadGrid> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateInterval { lo, hi });
    }
    if order < 2 {
        return Err(Error::ParamDomain(format!("quadrature order {order} < 2")));
    }
    let (x, w) = gauss_legendre(order);
    let (c, h) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    Ok(QuadGrid {
        interval: (lo, hi),
        nodes: x.iter().map(|t| c + h * t).collect(),
        weights: w.iter().map(|v| h * v).collect(),
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradeEnd {
    Lo,
    Hi,
    Both,
}

/// Composite rule on panels shrinking geometrically (ratio `ratio`) toward
/// the graded end(s), `per_panel` nodes each.
pub fn graded_grid(
    lo: f64,
    hi: f64,
    per_panel: usize,
    end: GradeEnd,
    panels: usize,
    ratio: f64,
) -> Result<QuadGrid> {
    if !(lo < hi) {
        return Err(Error::DegenerateInterval { lo, hi });
    }
    let unit: Vec<f64> = {
        let mut v: Vec<f64> = (0..panels).map(|j| ratio.powi((panels - j) as i32)).collect();
        v.insert(0, 0.0);
        v.push(1.0);
        v.dedup();
        v
    };
    let breaks: Vec<f64> = match end {
        GradeEnd::Lo => unit.iter().map(|t| lo + (hi - lo) * t).collect(),
        GradeEnd::Hi => unit.iter().rev().map(|t| hi - (hi - lo) * t).collect(),
        GradeEnd::Both => {
            let mid = 0.5 * (lo + hi);
            let mut b: Vec<f64> = unit.iter().map(|t| lo + (mid - lo) * t).collect();
            b.extend(unit.iter().rev().skip(1).map(|t| hi - (hi - mid) * t));
            b
        }
    };
    let (x, w) = gauss_legendre(per_panel);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in breaks.windows(2) {
        let (c, h) = (0.5 * (pair[0] + pair[1]), 0.5 * (pair[1] - pair[0]));
        nodes.extend(x.iter().map(|t| c + h * t));
        weights.extend(w.iter().map(|v| h * v));
    }
    Ok(QuadGrid { interval: (lo, hi), nodes, weights, order: per_panel })
}
