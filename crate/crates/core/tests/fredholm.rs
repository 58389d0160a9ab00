mod common;

use common::{gaussian_cdf, rank_n_gap};
use gapflow::fredholm::{
    fredholm_det, gap_interval, gap_series, log_fredholm_det, nystrom_solve, spacing_pdf, truncate_interval,
    working_range,
};
use gapflow::quad::{build_grid, gauss_legendre};
use gapflow::weights::{cd_kernel, phi_psi};
use gapflow::{EnsembleSpec, Error, Kind};
use proptest::prelude::*;

#[test]
fn gauss_legendre_rules() {
    let (x, w) = gauss_legendre(2);
    let r = 1.0 / 3f64.sqrt();
    assert!((x[0].abs() - r).abs() < 1e-15 && (x[1].abs() - r).abs() < 1e-15);
    assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    let g = build_grid(0.0, 3.0, 40).unwrap();
    assert!((g.weights.iter().sum::<f64>() - 3.0).abs() < 1e-13);
    assert!((g.integrate(|x| x.powi(7)) - 3f64.powi(8) / 8.0).abs() < 1e-10);
    assert!(matches!(build_grid(2.0, 2.0, 10), Err(Error::DegenerateInterval { .. })));
}

#[test]
fn single_eigenvalue_closed_forms() {
    let g = EnsembleSpec::gaussian(1).unwrap();
    let half = fredholm_det(&g, truncate_interval(&g, 0.0).unwrap(), 64).unwrap();
    assert!((half - 0.5).abs() < 1e-13);
    for s in [-1.0, 0.0, 1.0] {
        let e = fredholm_det(&g, gap_interval(&g, s).unwrap(), 64).unwrap();
        assert!((e - gaussian_cdf(s)).abs() < 1e-13, "s={s}: {e} vs {}", gaussian_cdf(s));
    }
    let l = EnsembleSpec::laguerre(1, 0.0).unwrap();
    for s in [0.5, 1.0, 2.0] {
        assert!((fredholm_det(&l, (0.0, s), 64).unwrap() - (-s).exp()).abs() < 1e-13);
    }
    let j = EnsembleSpec::jacobi(1, 0.0, 0.0).unwrap();
    for s in [-0.7, 0.0, 0.9] {
        assert!((fredholm_det(&j, (-1.0, s), 64).unwrap() - 0.5 * (1.0 - s)).abs() < 1e-13);
    }
}

#[test]
fn determinant_matches_rank_n_oracle() {
    let cases: Vec<(EnsembleSpec, Vec<(f64, f64)>)> = vec![
        (EnsembleSpec::gaussian(3).unwrap(), vec![(-0.5, 0.5), (-1.0, 2.0), (0.7, 1.1)]),
        (EnsembleSpec::gaussian(4).unwrap(), vec![(-2.0, -0.5), (0.0, 1.0)]),
        (EnsembleSpec::laguerre(2, 0.0).unwrap(), vec![(0.0, 1.0), (0.5, 3.0)]),
        (EnsembleSpec::laguerre(3, 1.0).unwrap(), vec![(0.0, 2.0), (1.0, 1.5), (2.0, 8.0)]),
        (EnsembleSpec::laguerre(3, 0.5).unwrap(), vec![(0.0, 1.5)]),
        (EnsembleSpec::jacobi(2, 0.0, 0.0).unwrap(), vec![(-1.0, 0.0), (-0.3, 0.4)]),
        (EnsembleSpec::jacobi(3, 1.0, 0.5).unwrap(), vec![(-1.0, -0.2), (0.0, 1.0), (-0.5, 0.5)]),
        (EnsembleSpec::jacobi(4, 2.0, 1.0).unwrap(), vec![(-1.0, 0.1)]),
    ];
    for (spec, intervals) in cases {
        for (lo, hi) in intervals {
            let ours = fredholm_det(&spec, (lo, hi), 64).unwrap();
            let oracle = rank_n_gap(&spec, lo, hi);
            assert!((ours - oracle).abs() < 1e-10, "{spec:?} ({lo}, {hi}): {ours} vs {oracle}");
        }
    }
}

#[test]
fn semi_infinite_gaussian_matches_oracle() {
    for n in 2..=4 {
        let g = EnsembleSpec::gaussian(n).unwrap();
        for s in [-1.0, 0.0, 1.0, 2.0] {
            let ours = fredholm_det(&g, gap_interval(&g, s).unwrap(), 64).unwrap();
            let oracle = rank_n_gap(&g, s, f64::INFINITY);
            assert!((ours - oracle).abs() < 1e-10, "N={n} s={s}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn order_doubling_converges() {
    let cases = [
        (EnsembleSpec::gaussian(3).unwrap(), (-0.5, 2.0)),
        (EnsembleSpec::laguerre(2, 0.5).unwrap(), (0.0, 3.0)),
        (EnsembleSpec::jacobi(3, 1.0, 0.5).unwrap(), (-1.0, 0.3)),
    ];
    for (spec, iv) in cases {
        let a = fredholm_det(&spec, iv, 32).unwrap();
        let b = fredholm_det(&spec, iv, 64).unwrap();
        let c = fredholm_det(&spec, iv, 128).unwrap();
        assert!((b - a).abs() < 1e-10 && (c - b).abs() < 1e-10, "{spec:?}: {a} {b} {c}");
    }
}

#[test]
fn log_det_agrees() {
    let spec = EnsembleSpec::laguerre(3, 1.0).unwrap();
    let d = fredholm_det(&spec, (0.0, 2.5), 64).unwrap();
    let l = log_fredholm_det(&spec, (0.0, 2.5), 64).unwrap();
    assert!((l - d.ln()).abs() < 1e-12);
}

#[test]
fn tiny_interval_limit() {
    for (spec, x) in [
        (EnsembleSpec::gaussian(3).unwrap(), 0.4),
        (EnsembleSpec::laguerre(2, 1.0).unwrap(), 1.3),
        (EnsembleSpec::jacobi(2, 1.0, 1.0).unwrap(), -0.2),
    ] {
        let sol = nystrom_solve(&spec, (x, x + 1e-8), 16).unwrap();
        assert!(sol.u.abs() < 1e-7 && sol.v.abs() < 1e-7 && sol.w.abs() < 1e-7);
        let f = phi_psi(&spec, x).unwrap();
        assert!((sol.q_endpoints[0] - f.phi).abs() < 1e-7);
        assert!((sol.p_endpoints[0] - f.psi).abs() < 1e-7);
    }
}

#[test]
fn jacobi_first_integral() {
    let spec = EnsembleSpec::jacobi(2, 0.0, 0.0).unwrap();
    for s in [-0.5, 0.0, 0.5] {
        let sol = nystrom_solve(&spec, (-1.0, s), 64).unwrap();
        let sigma = (1.0 - s * s) * sol.r_diag[1];
        assert!((sigma + 4.0 * sol.v).abs() < 1e-6, "s={s}: {sigma} vs {}", -4.0 * sol.v);
    }
}

#[test]
fn gaussian_first_integral() {
    let spec = EnsembleSpec::gaussian(3).unwrap();
    let sol = nystrom_solve(&spec, gap_interval(&spec, 1.0).unwrap(), 64).unwrap();
    let (q, p) = (sol.q_endpoints[0], sol.p_endpoints[0]);
    let res = 6f64.sqrt() * (sol.u - sol.w) + 2.0 * sol.u * sol.w - q * p;
    assert!(res.abs() < 1e-6, "{res}");
    assert!((sol.v - sol.v_dual).abs() < 1e-12);
}

#[test]
fn truncation_points() {
    let g1 = EnsembleSpec::gaussian(1).unwrap();
    let (_, t) = truncate_interval(&g1, 0.0).unwrap();
    assert!(0.5 * statrs::function::erf::erfc(t) < 1e-14 && t < 7.0, "T = {t}");
    let g4 = EnsembleSpec::gaussian(4).unwrap();
    let (_, t4) = truncate_interval(&g4, -2.0).unwrap();
    assert!(t4 > 8f64.sqrt());
    let base = fredholm_det(&g4, (-2.0, t4), 64).unwrap();
    let doubled = fredholm_det(&g4, (-2.0, 2.0 * t4), 128).unwrap();
    assert!((base - doubled).abs() < 1e-12, "{base} vs {doubled}");
}

#[test]
fn series_is_exact_at_full_order() {
    for spec in [
        EnsembleSpec::gaussian(2).unwrap(),
        EnsembleSpec::gaussian(3).unwrap(),
        EnsembleSpec::laguerre(3, 1.0).unwrap(),
        EnsembleSpec::jacobi(3, 1.0, 0.5).unwrap(),
    ] {
        let iv = match spec.kind {
            Kind::Gaussian => (-0.2, 0.3),
            Kind::Laguerre => (1.0, 1.5),
            Kind::Jacobi => (-0.6, -0.1),
        };
        let series = gap_series(&spec, iv, spec.n).unwrap();
        let det = fredholm_det(&spec, iv, 64).unwrap();
        assert!((series - det).abs() < 1e-8, "{spec:?}: {series} vs {det}");
    }
}

#[test]
fn series_leading_order() {
    let spec = EnsembleSpec::gaussian(3).unwrap();
    let (x0, eps) = (0.3, 1e-3);
    let one = gap_series(&spec, (x0 - eps / 2.0, x0 + eps / 2.0), 1).unwrap();
    let k = cd_kernel(&spec, x0, x0).unwrap();
    assert!((one - (1.0 - eps * k)).abs() < 1e-8);
    assert!(gap_series(&spec, (0.0, 1.0), 4).is_err());
}

#[test]
fn spacing_density() {
    let spec = EnsembleSpec::gaussian(2).unwrap();
    let h = 1e-3;
    let a2s: Vec<f64> = (1..=60).map(|i| 0.1 * i as f64).collect();
    let p: Vec<f64> = a2s.iter().map(|&a2| spacing_pdf(&spec, 0.0, a2, h, 48).unwrap()).collect();
    assert!(p.iter().all(|&v| v >= -1e-6));
    // trapezoid from a spacing of 0.1 onward; the density vanishes like a2² at 0
    let mass: f64 = p.windows(2).map(|w| 0.05 * (w[0] + w[1])).sum();
    assert!(mass <= 1.0 + 1e-3 && mass > 0.4, "{mass}");
    assert!(spacing_pdf(&spec, 0.0, 0.001, h, 48).is_err());
}

#[test]
fn working_ranges() {
    for spec in [
        EnsembleSpec::gaussian(3).unwrap(),
        EnsembleSpec::laguerre(2, 1.0).unwrap(),
        EnsembleSpec::jacobi(4, 1.0, 0.5).unwrap(),
    ] {
        let (lo, hi) = working_range(&spec, 1e-6, 64).unwrap();
        assert!(lo < hi);
        let e_lo = fredholm_det(&spec, gap_interval(&spec, lo).unwrap(), 64).unwrap();
        let e_hi = fredholm_det(&spec, gap_interval(&spec, hi).unwrap(), 64).unwrap();
        assert!(e_lo.min(e_hi) >= 0.99e-6, "{spec:?}: {e_lo} {e_hi}");
        assert!(e_lo.min(e_hi) < 1.1e-6, "{spec:?}: {e_lo} {e_hi}");
    }
}

#[test]
fn bad_intervals() {
    let j = EnsembleSpec::jacobi(2, 0.0, 0.0).unwrap();
    assert!(fredholm_det(&j, (0.5, 0.5), 32).is_err());
    assert!(fredholm_det(&j, (0.5, 0.2), 32).is_err());
    assert!(fredholm_det(&j, (-2.0, 0.2), 32).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gap_probability_shrinks_as_the_interval_grows(kind in 0usize..3, n in 1usize..5, u in 0.05f64..0.9, du in 0.01f64..0.1) {
        let spec = match kind {
            0 => EnsembleSpec::gaussian(n).unwrap(),
            1 => EnsembleSpec::laguerre(n, 1.0).unwrap(),
            _ => EnsembleSpec::jacobi(n, 1.0, 0.5).unwrap(),
        };
        let (s1, s2) = match kind {
            0 => (3.0 - 6.0 * u, 3.0 - 6.0 * (u + du)),
            1 => (8.0 * u, 8.0 * (u + du)),
            _ => (-1.0 + 2.0 * u, -1.0 + 2.0 * (u + du).min(0.99)),
        };
        let e1 = fredholm_det(&spec, gap_interval(&spec, s1).unwrap(), 48).unwrap();
        let e2 = fredholm_det(&spec, gap_interval(&spec, s2).unwrap(), 48).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e1));
        prop_assert!(e2 <= e1 + 1e-12, "{} then {}", e1, e2);
    }

    #[test]
    fn dual_v_and_symmetric_resolvent(n in 1usize..5, lo in -1.0f64..0.0, w in 0.1f64..1.5) {
        let spec = EnsembleSpec::gaussian(n).unwrap();
        let sol = nystrom_solve(&spec, (lo, lo + w), 48).unwrap();
        prop_assert!((sol.v - sol.v_dual).abs() < 1e-10 * (1.0 + sol.v.abs()));
        prop_assert!(sol.r_diag.iter().all(|r| *r >= -1e-12));
    }
}
