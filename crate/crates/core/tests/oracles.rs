//! Closed-form oracles, derived by hand and frozen here, checked against the
//! library's independent numerical routes.

use displab::born::{born_pairing, iterated_kato_estimate, iterated_kato_first_order, kato_apply, BornConfig};
use displab::mc::Proposal;
use displab::norms::{kato_global, l32_norm, rollnik_squared, RollnikMethod};
use displab::potentials::{SeparablePotential, SpatialPotential, TimeProfile};
use displab::propagator::{
    evolve, gaussian_l6_squared_time_integral, measure_dispersive, measure_strichartz, EvolveOptions, Grid3, WaveField,
};
use displab::quadrature::QuadConfig;
use num_complex::Complex64;
use std::f64::consts::PI;

fn quad() -> QuadConfig {
    QuadConfig::default()
}

// ∫∫_{B_R×B_R} |x−y|^{−2} = 4π²R⁴, from the lens volume π(4+d)(2−d)²/12
// of two unit balls at distance d.
fn ball_rollnik_squared(a: f64, r: f64) -> f64 {
    4.0 * PI * PI * a * a * r.powi(4)
}

// Centre-of-mass/relative coordinates split the Gaussian double integral:
// (πw²/2)^{3/2} · 2π√(2π)w = π³w⁴.
fn gaussian_rollnik_squared(a: f64, w: f64) -> f64 {
    PI.powi(3) * a * a * w.powi(4)
}

#[test]
fn rollnik_quadrature_matches_closed_forms() {
    let q = RollnikMethod::Quadrature(QuadConfig { abs_tol: 1e-13, rel_tol: 1e-11, max_panels: 200_000 });
    let cases = [
        (SpatialPotential::ball(0.7, 1.3).unwrap(), ball_rollnik_squared(0.7, 1.3)),
        (SpatialPotential::gaussian(1.5, 0.8).unwrap(), gaussian_rollnik_squared(1.5, 0.8)),
    ];
    for (v0, exact) in cases {
        let got = rollnik_squared(&v0, q).unwrap().mean;
        assert!((got - exact).abs() <= 1e-7 * exact, "{got} vs {exact}");
    }
}

#[test]
fn rollnik_monte_carlo_agrees_within_three_sigma() {
    let cases = [
        (SpatialPotential::ball(1.0, 1.0).unwrap(), ball_rollnik_squared(1.0, 1.0)),
        (SpatialPotential::gaussian(1.0, 1.0).unwrap(), gaussian_rollnik_squared(1.0, 1.0)),
    ];
    for (i, (v0, exact)) in cases.into_iter().enumerate() {
        let e = rollnik_squared(&v0, RollnikMethod::MonteCarlo { samples: 400_000, seed: 11 + i as u64 }).unwrap();
        assert!(e.z_score(exact) < 3.0, "{e:?} vs {exact}");
    }
}

#[test]
fn kato_and_l32_closed_forms() {
    // Centred sup: 4π∫₀^R r dr = 2πR² for the ball, 4π∫ r e^{−r²/w²} dr = 2πw² for the Gaussian.
    let ball = SpatialPotential::ball(0.4, 2.0).unwrap();
    let gauss = SpatialPotential::gaussian(2.0, 0.5).unwrap();
    let k_ball = kato_global(&ball, &quad()).unwrap();
    let k_gauss = kato_global(&gauss, &quad()).unwrap();
    assert!((k_ball - 0.4 * 2.0 * PI * 4.0).abs() < 1e-9 * k_ball, "{k_ball}");
    assert!((k_gauss - 2.0 * 2.0 * PI * 0.25).abs() < 1e-9 * k_gauss, "{k_gauss}");
    // (∫ e^{−3r²/(2w²)})^{2/3} = 2πw²/3.
    let l = l32_norm(&gauss, &quad()).unwrap();
    assert!((l - 2.0 * 2.0 * PI * 0.25 / 3.0).abs() < 1e-9 * l, "{l}");
}

#[test]
fn kato_apply_off_centre_matches_newton() {
    // Outside a uniform ball the Newton potential is the point-mass value (4π/3)R³/|x|.
    let v0 = SpatialPotential::ball(1.0, 1.0).unwrap();
    let x = [0.0, 0.0, 2.5];
    let e = kato_apply(&v0, |_| 1.0, x, 200_000, 21);
    let exact = 4.0 * PI / 3.0 / 2.5;
    assert!(e.z_score(exact) < 3.0, "{e:?} vs {exact}");
}

#[test]
fn iterated_kato_respects_its_bound() {
    let v0 = SpatialPotential::gaussian(1.0, 1.0).unwrap();
    let (x0, x1) = ([0.3, 0.0, 0.0], [0.0, 0.5, 0.2]);
    let first = iterated_kato_first_order(&v0, x0, x1, &quad()).unwrap();
    for k in 1..=3 {
        let r = iterated_kato_estimate(&v0, k, x0, x1, 100_000, 30 + k as u64, &quad()).unwrap();
        assert!(r.estimate.mean <= r.bound, "k={k}: {:?} above {}", r.estimate, r.bound);
        if k == 1 {
            assert!(r.estimate.z_score(first) < 3.0, "{:?} vs {first}", r.estimate);
        }
    }
}

#[test]
fn free_gaussian_sup_decay() {
    // ‖ψ(t)‖_∞ = (a²/(a²+t²))^{3/4}, ‖ψ₀‖₁ = (4πa)^{3/2}.
    let (a, n, l) = (0.25, 128, 20.0);
    let grid = Grid3::new(n, l).unwrap();
    let psi = WaveField::gaussian(grid, a, [0.0; 3]);
    let v = SeparablePotential::new(TimeProfile::constant(), SpatialPotential::gaussian(0.0, 1.0).unwrap()).unwrap();
    let traj = evolve(&psi, &v, 0.0, 4.0, EvolveOptions { dt: 1.0, sample_every: 2, keep_fields: false }).unwrap();
    let recs = measure_dispersive(&traj);
    assert_eq!(recs.len(), 2);
    for r in recs {
        assert!(!r.past_wrap, "t = {}", r.t);
        let exact = (r.t * r.t / (a * a + r.t * r.t)).powf(0.75) * (4.0 * PI).powf(-1.5);
        assert!((r.scaled - exact).abs() < 0.02 * exact, "t = {}: {} vs {exact}", r.t, r.scaled);
    }
}

#[test]
fn strichartz_gaussian_time_integral() {
    let (a, big_t) = (1.0, 4.0);
    let grid = Grid3::new(64, 20.0).unwrap();
    let psi = WaveField::gaussian(grid, a, [0.0; 3]);
    let v = SeparablePotential::new(TimeProfile::constant(), SpatialPotential::gaussian(0.0, 1.0).unwrap()).unwrap();
    let traj = evolve(&psi, &v, 0.0, big_t, EvolveOptions { dt: 0.1, sample_every: 1, keep_fields: false }).unwrap();
    let (sup, l6) = measure_strichartz(&traj, psi.l6());
    assert!((sup - psi.l2()).abs() < 1e-10 * sup);
    let exact = gaussian_l6_squared_time_integral(a, big_t);
    assert!((l6 * l6 - exact).abs() < 0.02 * exact, "{} vs {exact}", l6 * l6);
}

#[test]
fn first_born_pairing_decays_like_free_flow() {
    // |T|^{3/2}|⟨I₁ψ, g⟩| stays bounded over two decades of T.
    let v = SeparablePotential::new(TimeProfile::cosine(1.0), SpatialPotential::gaussian(0.05, 1.0).unwrap()).unwrap();
    let g = |y: [f64; 3]| Complex64::new((-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / 4.0).exp(), 0.0);
    let prop = Proposal::Gaussian { sigma: 2f64.sqrt() };
    for t in [1.0, 8.0, 64.0] {
        let e = born_pairing(&v, 1, t, 0.0, g, prop, g, prop, 400, 3, &BornConfig::default()).unwrap();
        let scaled = e.mean.norm() * f64::powf(t, 1.5);
        assert!(scaled < 1.0, "T = {t}: {scaled}");
    }
}
