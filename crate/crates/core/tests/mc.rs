mod common;

use gapflow::fredholm::{fredholm_det, gap_interval, truncate_interval};
use gapflow::harness::{run_spacing, Method, RunConfig, SpacingConfig};
use gapflow::mc::{estimate_gap, estimate_spacing, rho1_histogram, sample_batch, SampleBatch, CHUNK};
use gapflow::weights::cd_kernel;
use gapflow::{EnsembleSpec, Error};

fn within_3se(est: f64, se: f64, exact: f64) -> bool {
    (est - exact).abs() <= 3.0 * se.max(1e-12)
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn firsts(batch: &SampleBatch) -> Vec<f64> {
    batch.eigenvalue_sets.iter().map(|e| e[0]).collect()
}

#[test]
fn gue_one_second_moment() {
    let b = sample_batch(&EnsembleSpec::gaussian(1).unwrap(), 100_000, 1).unwrap();
    let sq: Vec<f64> = firsts(&b).iter().map(|x| x * x).collect();
    let m = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / m;
    let var = sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    assert!(within_3se(mean, (var / m).sqrt(), 0.5), "{mean}");
}

#[test]
fn gue_one_is_normal() {
    let b = sample_batch(&EnsembleSpec::gaussian(1).unwrap(), 20_000, 3).unwrap();
    let d = ks_statistic(firsts(&b), |x| common::gaussian_cdf(x));
    assert!(d < 1.628 / (20_000f64).sqrt(), "{d}");
}

#[test]
fn gue_two_gap_on_half_line() {
    let spec = EnsembleSpec::gaussian(2).unwrap();
    let b = sample_batch(&spec, 100_000, 42).unwrap();
    let (est, se) = estimate_gap(&b, (0.0, f64::INFINITY)).unwrap();
    let exact = fredholm_det(&spec, truncate_interval(&spec, 0.0).unwrap(), 64).unwrap();
    assert!(within_3se(est, se, exact), "{est} ± {se} vs {exact}");
}

#[test]
fn lue_one_is_exponential() {
    let b = sample_batch(&EnsembleSpec::laguerre(1, 0.0).unwrap(), 100_000, 5).unwrap();
    for s in [0.5, 1.0, 2.0] {
        let (est, se) = estimate_gap(&b, (0.0, s)).unwrap();
        assert!(within_3se(est, se, (-s as f64).exp()), "s={s}: {est}");
    }
}

#[test]
fn jue_one_is_uniform() {
    let b = sample_batch(&EnsembleSpec::jacobi(1, 0.0, 0.0).unwrap(), 20_000, 9).unwrap();
    let d = ks_statistic(firsts(&b), |x| 0.5 * (x + 1.0));
    assert!(d < 1.628 / (20_000f64).sqrt(), "{d}");
}

#[test]
fn jue_exponents_follow_the_weight() {
    // N = 1 with weight (1−x)^a(1+x)^b: P(x < s) is a regularised beta function
    let (a, b) = (2.0, 1.0);
    let batch = sample_batch(&EnsembleSpec::jacobi(1, a, b).unwrap(), 20_000, 11).unwrap();
    let d = ks_statistic(firsts(&batch), |x| statrs::function::beta::beta_reg(b + 1.0, a + 1.0, 0.5 * (x + 1.0)));
    assert!(d < 1.628 / (20_000f64).sqrt(), "{d}");
}

#[test]
fn lue_three_against_determinant() {
    let spec = EnsembleSpec::laguerre(3, 2.0).unwrap();
    let b = sample_batch(&spec, 100_000, 42).unwrap();
    for s in [0.5, 1.0, 2.0] {
        let (est, se) = estimate_gap(&b, (0.0, s)).unwrap();
        let exact = fredholm_det(&spec, (0.0, s), 64).unwrap();
        assert!(within_3se(est, se, exact), "s={s}: {est} ± {se} vs {exact}");
    }
}

#[test]
fn jue_two_against_determinant() {
    let spec = EnsembleSpec::jacobi(2, 1.0, 0.0).unwrap();
    let b = sample_batch(&spec, 100_000, 42).unwrap();
    for s in [-0.5, 0.0, 0.4] {
        let (est, se) = estimate_gap(&b, gap_interval(&spec, s).unwrap()).unwrap();
        let exact = fredholm_det(&spec, (-1.0, s), 64).unwrap();
        assert!(within_3se(est, se, exact), "s={s}: {est} ± {se} vs {exact}");
    }
}

#[test]
fn fixed_seed_is_reproducible() {
    let spec = EnsembleSpec::laguerre(3, 1.0).unwrap();
    let a = sample_batch(&spec, 3000, 17).unwrap();
    let b = sample_batch(&spec, 3000, 17).unwrap();
    assert_eq!(a, b);
    let c = sample_batch(&spec, 3000, 18).unwrap();
    assert_ne!(a.eigenvalue_sets, c.eigenvalue_sets);
    // sample i depends on the seed and i alone
    let short = sample_batch(&spec, CHUNK + 7, 17).unwrap();
    assert_eq!(short.eigenvalue_sets[..], a.eigenvalue_sets[..CHUNK + 7]);
}

#[test]
fn gap_estimator_edge_cases() {
    let spec = EnsembleSpec::jacobi(3, 1.0, 1.0).unwrap();
    let b = sample_batch(&spec, 1000, 2).unwrap();
    assert_eq!(estimate_gap(&b, (0.2, 0.2)).unwrap(), (1.0, 0.0));
    assert_eq!(estimate_gap(&b, (-1.0, 1.0)).unwrap(), (0.0, 0.0));
    let empty = sample_batch(&spec, 0, 2).unwrap();
    assert!(matches!(estimate_gap(&empty, (0.0, 0.5)), Err(Error::InsufficientSamples(_))));
}

#[test]
fn one_point_density() {
    let spec = EnsembleSpec::gaussian(3).unwrap();
    let b = sample_batch(&spec, 50_000, 4).unwrap();
    let wide: Vec<f64> = (0..=4).map(|i| -8.0 + 4.0 * i as f64).collect();
    assert!((rho1_histogram(&b, &wide).unwrap().mass() - 3.0).abs() < 1e-12);
    // bins out in the tails would be empty at this sample size
    let edges: Vec<f64> = (0..=28).map(|i| -3.5 + 0.25 * i as f64).collect();
    let h = rho1_histogram(&b, &edges).unwrap();
    let mut outliers = 0;
    for ((e, d), se) in edges.windows(2).zip(&h.density).zip(&h.std_error) {
        let exact = common::integrate(8, e[0], e[1], |x| cd_kernel(&spec, x, x).unwrap()) / (e[1] - e[0]);
        if (d - exact).abs() > 3.0 * se.max(1e-12) {
            outliers += 1;
        }
    }
    assert!(outliers <= 1, "{outliers} bins beyond 3 SE");
}

fn spacing_oracle(edges_lo: f64, edges_hi: f64, bins: usize) -> Vec<f64> {
    let cfg = RunConfig::new(EnsembleSpec::gaussian(2).unwrap(), Method::Fredholm);
    let sp = SpacingConfig { a1: 0.0, a2_range: (edges_lo, edges_hi), bins, window: 0.05, h: 1e-3 };
    run_spacing(&cfg, &sp).unwrap().column("p").unwrap()
}

#[test]
fn spacing_histogram_against_determinant() {
    let spec = EnsembleSpec::gaussian(2).unwrap();
    let b = sample_batch(&spec, 100_000, 42).unwrap();
    let edges: Vec<f64> = (0..=12).map(|i| 0.25 * i as f64).collect();
    let h = estimate_spacing(&b, 0.0, &edges, 0.05).unwrap();
    assert!(h.mass() <= 1.0 + 1e-12);
    let oracle = spacing_oracle(0.0, 3.0, 12);
    for ((d, se), o) in h.density.iter().zip(&h.std_error).zip(&oracle) {
        assert!(within_3se(*d, *se, *o), "{d} ± {se} vs {o}");
    }
}

#[test]
fn narrower_windows_reduce_bias() {
    let spec = EnsembleSpec::gaussian(2).unwrap();
    let b = sample_batch(&spec, 100_000, 42).unwrap();
    let edges: Vec<f64> = (0..=12).map(|i| 0.25 * i as f64).collect();
    let oracle = spacing_oracle(0.0, 3.0, 12);
    // shift of the mean spacing relative to the oracle
    let shift = |w: f64| {
        let h = estimate_spacing(&b, 0.0, &edges, w).unwrap();
        h.density.iter().zip(&oracle).zip(h.centers()).map(|((a, o), c)| (a - o) * c * 0.25).sum::<f64>().abs()
    };
    let s: Vec<f64> = [0.6, 0.4, 0.2].iter().map(|&w| shift(w)).collect();
    assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
}

#[test]
fn spacing_needs_enough_events() {
    let b = sample_batch(&EnsembleSpec::gaussian(2).unwrap(), 200, 1).unwrap();
    let edges = [0.0, 1.0, 2.0];
    assert!(matches!(estimate_spacing(&b, 0.0, &edges, 0.01), Err(Error::InsufficientSamples(_))));
    assert!(estimate_spacing(&b, 0.0, &[1.0, 0.0], 0.1).is_err());
    assert!(estimate_spacing(&b, 0.0, &edges, 0.0).is_err());
}
