use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use shelab::density::{gaussian_envelope, kde, minimal_constant, tail_envelope, tail_probability, KdeOptions};
use shelab::field::{sample_spectral, SpaceTimeGrid};
use shelab::green::{covariance, evaluate_green, BoundaryCondition, KernelMethod, KernelParams};
use shelab::stats::{fit_line, wilson};

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kde_is_nonnegative_with_unit_mass(seed in 0u64..1000, n in 200usize..800, scale in 0.1f64..5.0) {
        let xs: Vec<f64> = normals(seed, n).into_iter().map(|v| v * scale).collect();
        let est = kde(&[&xs], &KdeOptions::default()).unwrap();
        prop_assert!(est.values.iter().all(|v| *v >= 0.0));
        prop_assert!((est.mass() - 1.0).abs() < 1e-2, "mass {}", est.mass());
    }

    #[test]
    fn kde_two_dims_has_unit_mass(seed in 0u64..1000) {
        let a = normals(seed, 400);
        let b = normals(seed + 1, 400);
        let est = kde(&[&a, &b], &KdeOptions::undersmoothed()).unwrap();
        prop_assert!(est.values.iter().all(|v| *v >= 0.0));
        prop_assert!((est.mass() - 1.0).abs() < 2e-2, "mass {}", est.mass());
    }

    #[test]
    fn kde_shifts_with_the_samples(seed in 0u64..1000, shift in -3.0f64..3.0) {
        let xs = normals(seed, 300);
        let moved: Vec<f64> = xs.iter().map(|v| v + shift).collect();
        let a = kde(&[&xs], &KdeOptions::default()).unwrap();
        let b = kde(&[&moved], &KdeOptions::default()).unwrap();
        for z in [-1.0, 0.0, 0.5, 1.5] {
            prop_assert!((a.interpolate(&[z]) - b.interpolate(&[z + shift])).abs() < 1e-2);
        }
    }

    #[test]
    fn wilson_contains_the_point_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn tail_curve_is_nonincreasing(seed in 0u64..1000) {
        let xs = normals(seed, 500);
        let th: Vec<f64> = (0..20).map(|i| -2.0 + 0.2 * i as f64).collect();
        let c = tail_probability(&xs, &th);
        prop_assert!(c.prob.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn envelopes_are_monotone_in_c(c in 0.01f64..100.0, f in 1.0f64..10.0, z in 0.0f64..3.0, s in 0.05f64..2.0) {
        prop_assert!(gaussian_envelope(c * f, &[z], s) >= gaussian_envelope(c, &[z], s));
        prop_assert!(tail_envelope(c * f, &[z], s) >= tail_envelope(c, &[z], s));
    }

    #[test]
    fn minimal_constant_attains_the_value(v in 1e-6f64..10.0, z in 0.0f64..2.0, s in 0.1f64..1.0) {
        let c = minimal_constant(v, &[z], s, gaussian_envelope);
        prop_assert!(gaussian_envelope(c, &[z], s) >= v * (1.0 - 1e-6));
        prop_assert!(gaussian_envelope(c * 0.99, &[z], s) < v);
    }

    #[test]
    fn line_fit_recovers_exact_lines(a in -5.0f64..5.0, b in -3.0f64..3.0) {
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.7 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let fit = fit_line(&x, &y, None);
        prop_assert!((fit.slope - b).abs() < 1e-9 && (fit.intercept - a).abs() < 1e-9);
    }

    #[test]
    fn green_methods_agree(t in 0.002f64..0.5, x in 0.05f64..0.95, y in 0.05f64..0.95, dirichlet in any::<bool>()) {
        let bc = if dirichlet { BoundaryCondition::Dirichlet } else { BoundaryCondition::Neumann };
        let img = evaluate_green(t, x, y, bc, &KernelParams::default().with_method(KernelMethod::Image)).unwrap();
        let eig = evaluate_green(t, x, y, bc, &KernelParams::default().with_method(KernelMethod::Eigen)).unwrap();
        prop_assert!((img - eig).abs() < 1e-8 * (1.0 + img.abs()), "{img} vs {eig}");
        prop_assert!(img >= -1e-12);
    }

    #[test]
    fn covariance_is_symmetric(t in 0.01f64..1.0, s in 0.01f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let p = KernelParams::default();
        let a = covariance(t, x, s, y, BoundaryCondition::Neumann, &p).unwrap();
        let b = covariance(s, y, t, x, BoundaryCondition::Neumann, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed(seed in 0u64..10_000) {
        let g = SpaceTimeGrid::new(0.1, 8, 8).unwrap();
        let a = sample_spectral(g, BoundaryCondition::Dirichlet, seed, 32).unwrap();
        let b = sample_spectral(g, BoundaryCondition::Dirichlet, seed, 32).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
