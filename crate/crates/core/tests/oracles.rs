//! Cross-checks against independent implementations: nalgebra for dense
//! linear algebra, composite Simpson rules for integrals.

use mimo_adhoc::analysis::{eta_mp, gamma_cdf, GammaFit};
use mimo_adhoc::detectors::{mmse_sinr, mmse_sinr_receiver, mmse_sinr_schur, schur_inverse_entry};
use mimo_adhoc::geometry::{interference_power_density, interference_power_density_theta4};
use mimo_adhoc::randmat::{dominant_mode, lambda_moment_exact, largest_gain_cdf, sample_channel};
use mimo_adhoc::seed::rng_from_seed;
use mimo_adhoc::{build_realization, ComplexMatrix, Scenario};
use nalgebra::{Complex, DMatrix};
use rand::Rng;

fn to_na(a: &ComplexMatrix<f64>) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn random_pd(n: usize, seed: u64) -> ComplexMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let g = ComplexMatrix::from_fn(n, n + 2, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut a = g.gram_outer();
    for i in 0..n {
        a[(i, i)] += Complex::new(0.1, 0.0);
    }
    a
}

#[test]
fn dominant_gain_matches_nalgebra_eigen() {
    for seed in 0..50 {
        let h = sample_channel::<f64>(4, seed).unwrap();
        let mode = dominant_mode(&h).unwrap();
        let hh = to_na(&h) * to_na(&h).adjoint();
        let eig = hh.symmetric_eigenvalues();
        let top = eig.iter().cloned().fold(f64::MIN, f64::max);
        assert!((mode.gain() - top).abs() / top < 1e-10, "seed {seed}");
    }
}

#[test]
fn dominant_mode_of_identity_and_rank_one() {
    let id = ComplexMatrix::<f64>::identity(3);
    assert!((dominant_mode(&id).unwrap().lambda1 - 1.0).abs() < 1e-12);

    let s = 0.5f64.sqrt();
    let u = [Complex::new(s, 0.0), Complex::new(0.0, s)];
    let v = [Complex::new(0.6, 0.0), Complex::new(0.0, -0.8)];
    let h = ComplexMatrix::from_fn(2, 2, |i, j| u[i] * v[j].conj() * 2.0);
    let mode = dominant_mode(&h).unwrap();
    assert!((mode.lambda1 - 2.0).abs() < 1e-12);
    let overlap: Complex<f64> = u.iter().zip(&mode.u1).map(|(a, b)| a.conj() * b).sum();
    assert!((overlap.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn schur_entry_matches_nalgebra_inverse() {
    for t in 0..1000u64 {
        let n = 2 + (t as usize % 11);
        let a = random_pd(n, 1000 + t);
        let inv = to_na(&a).try_inverse().unwrap();
        let direct = inv[(0, 0)].re;
        let got = schur_inverse_entry(&a).unwrap();
        assert!((got - direct).abs() / direct.abs() < 1e-10, "t={t} n={n}");
    }
}

#[test]
fn mmse_routes_match_nalgebra() {
    for (t, (m, k)) in [(2, 0), (2, 5), (4, 1), (4, 6), (4, 20), (6, 20)].into_iter().enumerate() {
        for rep in 0..20u64 {
            let s = Scenario::<f64>::default().with_antennas(m);
            let r = build_realization(&s, k, 31 * t as u64 + rep).unwrap();
            let g = to_na(&r.equivalent_channel());
            let gram = DMatrix::identity(k + 1, k + 1) + g.adjoint() * &g;
            let oracle = 1.0 / gram.try_inverse().unwrap()[(0, 0)].re - 1.0;
            for got in [
                mmse_sinr(&r).unwrap(),
                mmse_sinr_schur(&r).unwrap(),
                mmse_sinr_receiver(&r).unwrap(),
            ] {
                assert!((got - oracle).abs() / oracle < 1e-8, "m={m} K={k} {got} {oracle}");
            }
        }
    }
}

#[test]
fn eta_closed_form_matches_simpson() {
    let s = Scenario::<f64>::default();
    let mp = s.m as f64 * s.signal_power();
    let (e2, r2) = (s.eps * s.eps, s.radius * s.radius);
    for i in 0..50 {
        let gamma = 10f64.powf(-5.0 + 6.0 * i as f64 / 49.0);
        // Distance density 2c/(R²−ε²) after t = c²: uniform on [ε², R²].
        let oracle = simpson(|t| 1.0 / (1.0 + gamma * mp * s.c0.powi(4) / (t * t)), e2, r2, 400_000) / (r2 - e2);
        let got = eta_mp(gamma, &s).unwrap();
        assert!((got - oracle).abs() < 1e-8, "gamma={gamma} {got} {oracle}");
    }
}

#[test]
fn power_density_normalized_and_theta4_consistent() {
    let s = Scenario::<f64>::default();
    let (lo, hi) = s.power_support();
    // Substitute x = e^y to tame the heavy tail.
    let mass = simpson(|y| interference_power_density(y.exp(), &s) * y.exp(), lo.ln(), hi.ln(), 200_000);
    assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    for x in [lo * 1.01, 3.0, 50.0, 1e4, hi * 0.99] {
        let a = interference_power_density(x, &s);
        let b = interference_power_density_theta4(x, &s);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{x}");
    }
    assert_eq!(interference_power_density(lo * 0.5, &s), 0.0);
}

#[test]
fn gamma_cdf_matches_density_quadrature() {
    let fit = GammaFit { a: 4.0, b: 2.5 };
    let density = |x: f64| x.powi(3) * (-x / 2.5).exp() / (6.0 * 2.5f64.powi(4));
    let oracle = simpson(density, 0.0, 10.0, 20_000);
    assert!((gamma_cdf(10.0, &fit) - oracle).abs() < 1e-10);
    let exp = GammaFit { a: 1.0, b: 3.0 };
    for x in [0.0, 0.5, 3.0, 20.0] {
        assert!((gamma_cdf(x, &exp) - (1.0 - (-x / 3.0f64).exp())).abs() < 1e-14);
    }
}

#[test]
fn khatri_cdf_matches_nalgebra_sampling() {
    let m = 3;
    let n = 20_000;
    let mut gains: Vec<f64> = (0..n)
        .map(|i| {
            let h = sample_channel::<f64>(m, 50_000 + i).unwrap();
            let hh = to_na(&h) * to_na(&h).adjoint();
            hh.symmetric_eigenvalues().iter().cloned().fold(f64::MIN, f64::max)
        })
        .collect();
    gains.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d = 0.0f64;
    for (i, &g) in gains.iter().enumerate() {
        let f = largest_gain_cdf(m, g);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    // Kolmogorov critical value at 0.01 is 1.63/sqrt(n).
    assert!(d < 1.63 / (n as f64).sqrt(), "{d}");
    let mean = gains.iter().sum::<f64>() / n as f64;
    let exact = lambda_moment_exact::<f64>(m, 1).unwrap();
    assert!((mean - exact).abs() / exact < 0.01);
}
