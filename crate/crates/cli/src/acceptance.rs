//! The ten acceptance criteria, each runnable on its own.

use crate::constants::FittedConstants;
use displab::born::{born_applied, iterated_kato_estimate, iterated_kato_first_order, partial_fractions, sine_telescope, BornConfig};
use displab::mc::{self, Proposal};
use displab::norms::{y_norm, NormConfig};
use displab::oscillatory::{run_sweep, PhaseLambda, Sign, SweepFamily};
use displab::potentials::{SeparablePotential, SpatialPotential, TimeProfile};
use displab::propagator::{
    duhamel_iterate, evolve, free_evolve, log_log_slope, measure_dispersive, stein_tomas_check, wrap_horizon, EvolveOptions, Grid3, Spectral, WaveField,
};
use displab::quadrature::QuadConfig;
use num_complex::Complex64;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

pub const DEFAULT_SEED: u64 = 20_240_917;
/// Cases per sweep; calibration uses indices [0, N), validation [N, 2N).
pub const SWEEP_CASES: u64 = 500;
/// Fitted constants are the calibration maxima times this factor.
pub const HEADROOM: f64 = 1.25;

/// (4π)^{−3/2}, the sup-norm constant of the free propagator.
pub fn free_constant() -> f64 {
    (4.0 * PI).powf(-1.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  ({:.1} s) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub const NAMES: [&str; 10] = [
    "identities",
    "free-dispersive-constant",
    "gaussian-oracle",
    "l2-monotonicity",
    "iterated-kato",
    "oscillatory-bounds",
    "degenerate-phase",
    "stein-tomas-scaling",
    "born-cross-check",
    "time-dependent-dispersive",
];

/// Criterion ids selected by a suite name: `all`, a criterion name, or a
/// comma-separated list of ids.
pub fn select(suite: &str) -> Option<Vec<u8>> {
    if suite == "all" {
        return Some((1..=10).collect());
    }
    if let Some(i) = NAMES.iter().position(|n| *n == suite) {
        return Some(vec![i as u8 + 1]);
    }
    suite
        .split(',')
        .map(|p| p.trim().parse::<u8>().ok().filter(|i| (1..=10).contains(i)))
        .collect()
}

pub fn run(id: u8, seed: u64, constants: &FittedConstants) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = match id {
        1 => identities(seed),
        2 => free_dispersive_constant(),
        3 => gaussian_oracle(),
        4 => l2_monotonicity(),
        5 => iterated_kato(seed),
        6 => oscillatory_bounds(seed, constants),
        7 => degenerate_phase(),
        8 => stein_tomas_scaling(),
        9 => born_cross_check(seed, constants),
        10 => time_dependent_dispersive(),
        _ => Ok((false, format!("no criterion {id}"))),
    }
    .unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome { id, name: NAMES[(id as usize).clamp(1, 10) - 1], pass, detail, seconds: start.elapsed().as_secs_f64() }
}

type Check = Result<(bool, String), displab::Error>;

fn identities(seed: u64) -> Check {
    const CASES: u64 = 10_000;
    let mut sine_worst = 0.0f64;
    let mut pf_worst = 0.0f64;
    for i in 0..CASES {
        let mut rng = mc::stream(seed ^ 0x51e, i);
        let n = rng.random_range(2..=10);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let (lhs, rhs) = sine_telescope(&a)?;
        sine_worst = sine_worst.max((lhs - rhs).norm());

        let k = rng.random_range(1..=8);
        let mut z: Vec<Complex64> = Vec::with_capacity(k);
        while z.len() < k {
            let w = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-PI..PI));
            if z.iter().all(|&u| (u - w).norm() > 0.1) {
                z.push(w);
            }
        }
        let (lhs, rhs) = partial_fractions(&z)?;
        pf_worst = pf_worst.max((lhs - rhs).norm() / rhs.norm());
    }
    Ok((
        sine_worst <= 1e-10 && pf_worst <= 1e-9,
        format!("{CASES} cases each; sine max abs {sine_worst:.2e}, partial fractions max rel {pf_worst:.2e}"),
    ))
}

fn free_dispersive_constant() -> Check {
    let grid = Grid3::new(128, 20.0)?;
    let a = 0.25;
    let psi = WaveField::gaussian(grid, a, [0.0; 3]);
    let l1 = psi.l1();
    let horizon = wrap_horizon(grid, Spectral::new(grid).rms_frequency(&psi));
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [2.0f64, 4.0, 8.0] {
        let ratio = free_evolve(&psi, t).linf() * t.powf(1.5) / l1 / free_constant();
        let ok = (ratio - 1.0).abs() <= 0.02;
        pass &= ok;
        parts.push(format!("t={t}: {ratio:.4}{}{}", if ok { "" } else { " (off)" }, if t > horizon { " past wrap" } else { "" }));
    }
    Ok((pass, format!("ratio to (4π)^(-3/2): {}; wrap horizon {horizon:.2}", parts.join(", "))))
}

fn gaussian_oracle() -> Check {
    let grid = Grid3::new(128, 20.0)?;
    let a = 1.0;
    let psi = WaveField::gaussian(grid, a, [0.0; 3]);
    let mut worst = 0.0f64;
    let mut whole_space = 0.0f64;
    for t in [0.5, 1.0, 2.0, 4.0] {
        let f = free_evolve(&psi, t);
        worst = worst.max(f.relative_l2_distance(&WaveField::gaussian_free_solution_periodic(grid, a, t, 2)));
        whole_space = whole_space.max(f.relative_l2_distance(&WaveField::gaussian_free_solution(grid, a, t)));
    }
    Ok((
        worst <= 1e-6,
        format!("max rel L2 vs periodic closed form {worst:.2e} (vs whole-space form {whole_space:.2e})"),
    ))
}

fn l2_monotonicity() -> Check {
    let grid = Grid3::new(64, 20.0)?;
    let v = SeparablePotential::new(TimeProfile::cosine(1.0), SpatialPotential::gaussian(0.2, 1.0)?)?;
    let psi = WaveField::gaussian(grid, 1.0, [0.5, 0.0, 0.0]);
    let tr = evolve(&psi, &v, 0.0, 16.0, EvolveOptions { dt: 0.05, sample_every: 1, keep_fields: false })?;
    let worst = tr.records.iter().map(|r| r.l2 / tr.l2_initial).fold(0.0, f64::max);
    Ok((worst <= 1.0 + 1e-10, format!("{} samples, max ratio − 1 = {:.2e}", tr.records.len(), worst - 1.0)))
}

fn iterated_kato(seed: u64) -> Check {
    const SAMPLES: u64 = 1_000_000;
    let quad = QuadConfig::default();
    let (x0, x_end) = ([0.3, 0.0, 0.0], [0.0, 0.5, 0.2]);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, v0) in [("ball", SpatialPotential::ball(1.0, 1.0)?), ("gaussian", SpatialPotential::gaussian(1.0, 1.0)?)] {
        for k in 1..=3 {
            let r = iterated_kato_estimate(&v0, k, x0, x_end, SAMPLES, seed.wrapping_add(k as u64), &quad)?;
            let ok = r.estimate.mean <= r.bound + 3.0 * r.estimate.std_error;
            pass &= ok;
            parts.push(format!("{name} k={k} {:.3}±{:.3} ≤ {:.3}", r.estimate.mean, r.estimate.std_error, r.bound));
            if k == 1 {
                let exact = iterated_kato_first_order(&v0, x0, x_end, &quad)?;
                let z = r.estimate.z_score(exact);
                pass &= z.abs() <= 3.0;
                parts.push(format!("{name} k=1 telescoped {exact:.4} (z={z:.2})"));
            }
        }
    }
    Ok((pass, parts.join("; ")))
}

/// Per-family maxima of ratio = |value| / (bound with unit constant).
pub fn sweep_maxima(seed: u64, start: u64) -> Result<BTreeMap<String, f64>, displab::Error> {
    let cfg = displab::oscillatory::OscConfig::default();
    let mut out = BTreeMap::new();
    for fam in [SweepFamily::Lambda, SweepFamily::U, SweepFamily::StatPhase] {
        for (_, case, r) in run_sweep(fam, seed, start, SWEEP_CASES as usize, &cfg) {
            let r = r?;
            let e = out.entry(format!("osc.{}", case.bound_key())).or_insert(0.0f64);
            *e = e.max(r.ratio);
        }
    }
    Ok(out)
}

/// Phase-family maxima share one constant C₀; the statphase integral has its own.
fn pooled(maxima: &BTreeMap<String, f64>) -> (f64, f64) {
    let phase = maxima.iter().filter(|(k, _)| k.as_str() != "osc.statphase").map(|(_, v)| *v).fold(0.0, f64::max);
    (phase, maxima.get("osc.statphase").copied().unwrap_or(0.0))
}

fn oscillatory_bounds(seed: u64, constants: &FittedConstants) -> Check {
    let maxima = sweep_maxima(seed, SWEEP_CASES)?;
    let (phase, statphase) = pooled(&maxima);
    let per_family: Vec<String> = maxima.iter().map(|(k, v)| format!("{} {v:.3}", k.trim_start_matches("osc."))).collect();
    let (Some(c0), Some(cs)) = (constants.get("osc.c0"), constants.get("osc.statphase")) else {
        return Ok((false, "fitted osc.c0 / osc.statphase missing".into()));
    };
    Ok((
        phase <= c0 && statphase <= cs,
        format!(
            "validation cases {}..{}: max ratio {phase:.3} ≤ C0 {c0:.3}, statphase {statphase:.3} ≤ {cs:.3} (per family: {})",
            SWEEP_CASES,
            2 * SWEEP_CASES,
            per_family.join(", ")
        ),
    ))
}

fn degenerate_phase() -> Check {
    let m = 2.0f64;
    let b = vec![1.0, 1.0];
    let sigma: Vec<f64> = b.iter().map(|x| m * m * x * x).collect();
    let p = PhaseLambda::new(Sign::Minus, b.clone(), sigma)?;
    let f = |x: f64| p.phase(x);
    let h = 1e-3;
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h.powi(3));
    let h4 = 0.05;
    let d4 = (-f(3.0 * h4) + 12.0 * f(2.0 * h4) - 39.0 * f(h4) + 56.0 * f(0.0) - 39.0 * f(-h4) + 12.0 * f(-2.0 * h4) - f(-3.0 * h4)) / (6.0 * h4.powi(4));
    let stated: f64 = 3.0 / (m * m) * b.iter().map(|x| x.powi(-2)).sum::<f64>();
    let series: f64 = 3.0 / m.powi(3) * b.iter().map(|x| x.powi(-2)).sum::<f64>();
    let low = d1.abs() <= 1e-6 && d2.abs() <= 1e-6 && d3.abs() <= 1e-6;
    let rel = (d4 - stated).abs() / stated;
    Ok((
        low && rel <= 1e-4,
        format!(
            "|φ'|,|φ''|,|φ'''| = {:.1e}, {:.1e}, {:.1e}; φ'''' = {d4:.6} vs target {stated} (rel {rel:.2e}); Taylor value 3Σb/σ^(3/2) = {series}",
            d1.abs(),
            d2.abs(),
            d3.abs()
        ),
    ))
}

fn slope_for<F: Fn(f64) -> Box<dyn Fn(f64) -> f64>>(make: F, support: impl Fn(f64) -> f64) -> Result<f64, displab::Error> {
    let mut pts = Vec::new();
    for j in 0..=8 {
        let lambda = 2f64.powi(j);
        let f = make(lambda);
        let st = stein_tomas_check(lambda, &f, support(lambda))?;
        pts.push((lambda, st.ratio));
    }
    Ok(log_log_slope(&pts))
}

fn stein_tomas_scaling() -> Check {
    let fixed = slope_for(|_| Box::new(|s: f64| (-s * s).exp()), |_| 7.0)?;
    // Data dilated with the frequency, f(x) = g(√λ x): the ratio is then
    // exactly λ^{−1/4}·const, which checks the resolvent numerics.
    let dilated = slope_for(|l| Box::new(move |s: f64| (-l * s * s).exp()), |l| 7.0 / l.sqrt())?;
    Ok((
        (fixed + 0.25).abs() <= 0.02,
        format!("fixed Gaussian slope {fixed:.4} (target −0.25 ± 0.02); dilated Gaussian slope {dilated:.4}"),
    ))
}

fn born_static_vs_duhamel(seed: u64) -> Result<(bool, String), displab::Error> {
    let v = SeparablePotential::time_independent(SpatialPotential::gaussian(0.3, 1.0)?);
    let a = 1.0;
    let grid = Grid3::new(64, 12.0)?;
    let d = duhamel_iterate(&WaveField::gaussian(grid, a, [0.0; 3]), &v, 0.0, 1.0, 0.01, 1)?;
    let o = grid.n() / 2;
    let cfg = BornConfig::default();
    let psi = move |y: mc::Point| Complex64::new((-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / (4.0 * a)).exp(), 0.0);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (i, shift) in [0usize, 4].into_iter().enumerate() {
        let idx = grid.index(o + shift, o, o);
        let x = grid.point(idx);
        let grid_value = d.terms[1].values()[idx];
        let e = born_applied(&v, 1, 1.0, 0.0, x, psi, Proposal::Gaussian { sigma: (2.0 * a).sqrt() }, 4_000_000, seed.wrapping_add(i as u64), &cfg)?;
        let rel = (e.mean - grid_value).norm() / grid_value.norm();
        worst = worst.max(rel);
        parts.push(format!("x={:.2}: rel {rel:.2e} (MC se {:.1e})", x[0], e.std_error / grid_value.norm()));
    }
    Ok((worst <= 1e-2, parts.join(", ")))
}

/// Largest per-order ratio of the Duhamel series divided by y_norm, for a
/// cos(t)-modulated Gaussian of the given amplitude.
pub fn duhamel_contraction(amplitude: f64) -> Result<(f64, f64, f64, Vec<f64>), displab::Error> {
    let v = SeparablePotential::new(TimeProfile::cosine(1.0), SpatialPotential::gaussian(amplitude, 1.0)?)?;
    let y = y_norm(&v, &NormConfig::default())?.y_norm;
    let grid = Grid3::new(32, 8.0)?;
    let psi = WaveField::gaussian(grid, 0.8, [0.0; 3]);
    let d = duhamel_iterate(&psi, &v, 0.0, 1.0, 0.01, 4)?;
    let exact = evolve(&psi, &v, 0.0, 1.0, EvolveOptions { dt: 0.01, sample_every: 1_000, keep_fields: true })?.fields.pop().unwrap();
    let dist = d.partial_sums[4].relative_l2_distance(&exact);
    let worst = d.ratios.iter().cloned().fold(0.0, f64::max);
    Ok((y, worst, dist, d.ratios))
}

/// Calibration amplitude for C₁ and validation amplitudes (the last sits
/// just below the smallness threshold c₀ = 0.05).
pub const C1_CALIBRATION_AMPLITUDE: f64 = 0.003;
pub const C1_VALIDATION_AMPLITUDES: [f64; 2] = [0.001, 0.0055];

fn born_cross_check(seed: u64, constants: &FittedConstants) -> Check {
    let (first_ok, first) = born_static_vs_duhamel(seed)?;
    let c1 = constants.get("born.c1");
    let c0 = displab::norms::DEFAULT_C0;
    let mut pass = first_ok;
    let mut parts = vec![format!("m=1 static vs grid: {first}")];
    for amp in C1_VALIDATION_AMPLITUDES {
        let (y, worst, dist, _) = duhamel_contraction(amp)?;
        let within = c1.is_some_and(|c| worst <= c * y);
        pass &= y <= c0 && dist <= 1e-3 && worst <= 0.5 && within;
        parts.push(format!("amp {amp}: y={y:.4}, partial sum m≤4 vs split {dist:.1e}, max ratio {worst:.2e} (C1·y = {:.2e})", c1.unwrap_or(f64::NAN) * y));
    }
    match c1 {
        Some(c) => {
            pass &= c * c0 < 0.5;
            parts.push(format!("C1·c0 = {:.3}", c * c0));
        }
        None => {
            pass = false;
            parts.push("no fitted born.c1".into());
        }
    }
    Ok((pass, parts.join("; ")))
}

fn time_dependent_dispersive() -> Check {
    let v = SeparablePotential::new(TimeProfile::cosine(1.0), SpatialPotential::gaussian(0.005, 1.0)?)?;
    let report = y_norm(&v, &NormConfig::default())?;
    let grid = Grid3::new(64, 20.0)?;
    let psi = WaveField::gaussian(grid, 3.0, [0.0; 3]);
    let tr = evolve(&psi, &v, 0.0, 16.0, EvolveOptions { dt: 0.05, sample_every: 20, keep_fields: false })?;
    let recs = measure_dispersive(&tr);
    let in_window: Vec<_> = recs.iter().filter(|r| r.t - tr.s >= 1.0 - 1e-9).collect();
    let worst = in_window.iter().map(|r| r.scaled).fold(0.0, f64::max) / free_constant();
    let wrapped = in_window.iter().filter(|r| r.past_wrap).count();
    Ok((
        report.flags.y_small && worst <= 1.5 && wrapped == 0,
        format!("y_norm {:.4}, {} samples, max scaled/free {worst:.4} (≤ 1.5), {wrapped} past wrap horizon", report.y_norm, in_window.len()),
    ))
}

/// Recomputes every fitted constant on the calibration ranges.
pub fn calibrate(seed: u64) -> Result<FittedConstants, displab::Error> {
    let mut c = FittedConstants::default();
    let maxima = sweep_maxima(seed, 0)?;
    let (phase, statphase) = pooled(&maxima);
    c.values.insert("osc.c0".into(), phase * HEADROOM);
    c.values.insert("osc.statphase".into(), statphase * HEADROOM);
    for (k, v) in maxima.into_iter().filter(|(k, _)| k.as_str() != "osc.statphase") {
        c.values.insert(format!("{k}.calibration_max"), v);
    }
    let (y, worst, _, _) = duhamel_contraction(C1_CALIBRATION_AMPLITUDE)?;
    c.values.insert("born.c1".into(), worst / y * HEADROOM);
    c.values.insert("calibration.seed".into(), seed as f64);
    c.values.insert("calibration.headroom".into(), HEADROOM);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_selection() {
        assert_eq!(select("all").unwrap().len(), 10);
        assert_eq!(select("identities").unwrap(), vec![1]);
        assert_eq!(select("2, 7").unwrap(), vec![2, 7]);
        assert!(select("11").is_none());
        assert!(select("bogus").is_none());
    }

    #[test]
    fn identities_suite_passes() {
        let o = run(1, DEFAULT_SEED, &FittedConstants::default());
        assert!(o.pass, "{}", o.detail);
        assert!(o.line().contains("PASS"));
    }
}
