use displab::born::{partial_fractions, sine_telescope};
use displab::norms::{kato_global, l32_norm, rollnik, RollnikMethod};
use displab::oscillatory::{critical_point_lambda, critical_point_u, PhaseLambda, PhaseU, Sign};
use displab::potentials::{Atom, SeparablePotential, SpatialPotential, TimeProfile};
use displab::quadrature::QuadConfig;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn quad() -> QuadConfig {
    QuadConfig::default()
}

fn rollnik_quad() -> RollnikMethod {
    RollnikMethod::Quadrature(QuadConfig { abs_tol: 1e-13, rel_tol: 1e-11, max_panels: 200_000 })
}

fn spatial() -> impl Strategy<Value = SpatialPotential> {
    prop_oneof![
        (0.1f64..3.0, 0.3f64..3.0).prop_map(|(a, w)| SpatialPotential::gaussian(a, w).unwrap()),
        (0.1f64..3.0, 0.3f64..3.0).prop_map(|(a, r)| SpatialPotential::ball(a, r).unwrap()),
        (0.1f64..3.0, 0.2f64..2.0).prop_map(|(a, e)| SpatialPotential::inverse_power(a, e).unwrap()),
        (0.2f64..1.0, 0.2f64..1.0, -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(r1, dr, v1, v2)| SpatialPotential::piecewise(vec![r1, r1 + dr], vec![v1, v2]).unwrap()),
    ]
}

fn atoms() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, -2.0f64..2.0, -2.0f64..2.0), 1..5)
}

fn profile(a: &[(f64, f64, f64)]) -> TimeProfile {
    TimeProfile::new(a.iter().map(|&(f, re, im)| Atom::new(f, Complex64::new(re, im))).collect()).unwrap()
}

/// Atoms paired with their conjugates, so the profile is real.
fn real_profile(a: &[(f64, f64, f64)]) -> TimeProfile {
    let mut v = Vec::new();
    for &(f, re, im) in a {
        v.push(Atom::new(f, Complex64::new(re, im)));
        v.push(Atom::new(-f, Complex64::new(re, -im)));
    }
    TimeProfile::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_separable(v0 in spatial(), a in atoms(), t in -10.0f64..10.0, t2 in -10.0f64..10.0, x in prop::array::uniform3(-2.0f64..2.0)) {
        let v = SeparablePotential::new(real_profile(&a), v0.clone()).unwrap();
        let phi_t2 = v.phi(t2);
        prop_assume!(phi_t2.abs() > 1e-3 && v0.eval(x).abs() > 1e-6);
        let lhs = v.eval(t, x) / v.eval(t2, x);
        let rhs = v.phi(t) / phi_t2;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn fourier_mass_ignores_frequencies_and_phases(a in atoms(), shifts in prop::collection::vec(-9.0f64..9.0, 5), angles in prop::collection::vec(-PI..PI, 5)) {
        let base = profile(&a).fourier_mass();
        let moved: Vec<(f64, f64, f64)> = a
            .iter()
            .enumerate()
            .map(|(i, &(f, re, im))| {
                let c = Complex64::new(re, im) * Complex64::from_polar(1.0, angles[i]);
                (f + shifts[i], c.re, c.im)
            })
            .collect();
        let m = profile(&moved).fourier_mass();
        prop_assert!((m - base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn norms_are_homogeneous_in_amplitude(v0 in spatial(), a in 0.01f64..20.0) {
        let va = v0.scaled(a).unwrap();
        for (x, y) in [
            (kato_global(&v0, &quad()).unwrap(), kato_global(&va, &quad()).unwrap()),
            (l32_norm(&v0, &quad()).unwrap(), l32_norm(&va, &quad()).unwrap()),
            (rollnik(&v0, rollnik_quad()).unwrap().mean, rollnik(&va, rollnik_quad()).unwrap().mean),
        ] {
            prop_assert!((a * x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{} vs {y}", a * x);
        }
    }

    #[test]
    fn critical_norms_are_scale_invariant(v0 in spatial()) {
        let k = kato_global(&v0, &quad()).unwrap();
        let r = rollnik(&v0, rollnik_quad()).unwrap().mean;
        for big_r in [0.5, 2.0, 5.0] {
            let w = v0.rescaled(big_r).unwrap();
            let kw = kato_global(&w, &quad()).unwrap();
            let rw = rollnik(&w, rollnik_quad()).unwrap().mean;
            prop_assert!((kw - k).abs() <= 1e-8 * k, "Kato {k} vs {kw} at R={big_r}");
            prop_assert!((rw - r).abs() <= 1e-8 * r, "Rollnik {r} vs {rw} at R={big_r}");
        }
    }

    #[test]
    fn sine_telescope_holds(a in prop::collection::vec(-10.0f64..10.0, 2..=10)) {
        let (l, r) = sine_telescope(&a).unwrap();
        prop_assert!((l - r).norm() <= 1e-10);
    }

    #[test]
    fn partial_fractions_hold(z in prop::collection::vec((0.3f64..3.0, -PI..PI), 1..=8)) {
        let z: Vec<Complex64> = z.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect();
        let sep = (0..z.len()).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| (z[i] - z[j]).norm()).fold(f64::INFINITY, f64::min);
        prop_assume!(sep > 0.05);
        let (l, r) = partial_fractions(&z).unwrap();
        prop_assert!((l - r).norm() <= 1e-9 * r.norm(), "{l} vs {r}");
    }

    #[test]
    fn critical_point_residual_and_sign_structure(
        b in prop::collection::vec(0.05f64..5.0, 1..=4),
        sig in prop::collection::vec(0.0f64..50.0, 4),
    ) {
        let mut sigma: Vec<f64> = sig[..b.len()].to_vec();
        sigma.sort_by(|x, y| y.total_cmp(x));
        let p = PhaseLambda::new(Sign::Minus, b.clone(), sigma.clone()).unwrap();
        let Some(l0) = critical_point_lambda(&p).unwrap() else {
            // No root: φ′ ≥ 0 throughout.
            for i in 1..=1000 {
                let l = 20.0 * i as f64 / 1000.0;
                prop_assert!(p.derivatives(l).unwrap()[1] >= -1e-12);
            }
            return Ok(());
        };
        let g: f64 = b.iter().zip(&sigma).map(|(b, s)| b / (l0 * l0 + s).sqrt()).sum();
        prop_assert!((g - 1.0).abs() <= 1e-10, "residual {}", g - 1.0);
        let top = 3.0 * l0 + 1.0;
        let mut changes = 0;
        let mut last: Option<bool> = None;
        for i in 1..=1000 {
            let l = top * i as f64 / 1000.0;
            if (l - l0).abs() < 1e-6 * (1.0 + l0) {
                continue;
            }
            let d = p.derivatives(l).unwrap();
            prop_assert!(if l < l0 { d[1] < 0.0 } else { d[1] > 0.0 }, "φ′({l}) = {} with λ₀ = {l0}", d[1]);
            if l < l0 && d[2] != 0.0 {
                let pos = d[2] > 0.0;
                if last.is_some_and(|q| q != pos) {
                    changes += 1;
                }
                last = Some(pos);
            }
        }
        prop_assert!(changes <= 1);
    }

    #[test]
    fn phi2_over_phi1_cubed_is_nonincreasing(
        b in prop::collection::vec(0.05f64..5.0, 1..=4),
        sig in prop::collection::vec(0.01f64..50.0, 4),
    ) {
        let mut sigma: Vec<f64> = sig[..b.len()].to_vec();
        sigma.sort_by(|x, y| y.total_cmp(x));
        let p = PhaseLambda::new(Sign::Minus, b, sigma).unwrap();
        let l0 = critical_point_lambda(&p).unwrap();
        let q = |l: f64| {
            let d = p.derivatives(l).unwrap();
            d[2] / d[1].powi(3)
        };
        let top = 3.0 * l0.unwrap_or(1.0) + 5.0;
        let pts: Vec<f64> = (1..=1000).map(|i| top * i as f64 / 1000.0).filter(|l| l0.is_none_or(|z| (l - z).abs() > 1e-3)).collect();
        for w in pts.windows(2) {
            if l0.is_some_and(|z| w[0] < z && w[1] > z) {
                continue;
            }
            let (a, c) = (q(w[0]), q(w[1]));
            prop_assert!(c <= a + 1e-9 * a.abs().max(c.abs()), "q({}) = {a} < q({}) = {c}", w[0], w[1]);
        }
    }

    #[test]
    fn u_critical_point_residual(b in prop::collection::vec(0.01f64..2.0, 1..=4), tau in prop::collection::vec(0.5f64..100.0, 4)) {
        let mut tau: Vec<f64> = tau[..b.len()].to_vec();
        tau.sort_by(|x, y| y.total_cmp(x));
        let p = PhaseU::new(b.clone(), tau.clone()).unwrap();
        let exists = b.iter().zip(&tau).map(|(b, t)| b / t.sqrt()).sum::<f64>() < 1.0;
        let u0 = critical_point_u(&p);
        prop_assert_eq!(u0.is_some(), exists);
        if let Some(u0) = u0 {
            let g: f64 = b.iter().zip(&tau).map(|(b, t)| b / (t - u0 * u0).sqrt()).sum();
            prop_assert!((g - 1.0).abs() <= 1e-10);
            prop_assert!(p.derivative(0.5 * u0) > 0.0);
        }
    }

    #[test]
    fn weight_derivative_bounds(tau in 1e-3f64..1e3, x in 1e-3f64..1e2) {
        // w(λ) = λ/√(λ²+τ); |w′| ≤ min(τ^{−1/2}, τλ^{−3}), |w″| ≤ 3·min(τ^{−1}, τλ^{−4}).
        let lambda = x * tau.sqrt();
        let w = |l: f64| l / (l * l + tau).sqrt();
        let h = 1e-4 * lambda;
        let d1 = (w(lambda + h) - w(lambda - h)) / (2.0 * h);
        let d2 = (w(lambda + h) - 2.0 * w(lambda) + w(lambda - h)) / (h * h);
        let b1 = tau.powf(-0.5).min(tau / lambda.powi(3));
        let b2 = 3.0 * (1.0 / tau).min(tau / lambda.powi(4));
        prop_assert!(d1.abs() <= b1 * (1.0 + 1e-5), "{d1} vs {b1}");
        prop_assert!(d2.abs() <= b2 * (1.0 + 1e-3) + 1e-6 * d1.abs() / h, "{d2} vs {b2}");
    }
}
