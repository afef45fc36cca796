//! Scaling-critical norms of radial potentials: global Kato, Rollnik, L^{3/2}
//! and the composite norm used as the smallness gate.

use crate::error::{Error, Result};
use crate::mc::{self, dist, mixture_pdf, mixture_sample, Component, Estimate};
use crate::potentials::{SeparablePotential, SpatialPotential};
use crate::quadrature::{integrate, integrate_to_infinity, Quad, QuadConfig};
use std::f64::consts::PI;

/// Kato threshold 4π.
pub const KATO_THRESHOLD: f64 = 4.0 * PI;
/// Rollnik threshold: ‖V‖_R² < (4π)².
pub const ROLLNIK_SQ_THRESHOLD: f64 = 16.0 * PI * PI;
/// Default smallness constant for the composite norm.
pub const DEFAULT_C0: f64 = 0.05;

fn checked(q: Quad<f64>, what: &str) -> Result<f64> {
    if !q.value.is_finite() {
        return Err(Error::Divergent(format!("{what} is not finite")));
    }
    if !q.converged {
        return Err(Error::NoConvergence { error: q.error, tolerance: f64::NAN });
    }
    Ok(q.value)
}

/// ∫_lo^hi g(s, |V₀(s)|) ds, hi = ∞ when `None`.
pub(crate) fn radial_integral<G>(v0: &SpatialPotential, lo: f64, hi: Option<f64>, g: G, quad: &QuadConfig) -> Quad<f64>
where
    G: Fn(f64, f64) -> f64,
{
    let f = |s: f64| g(s, v0.radial_abs(s));
    let mut top = hi.unwrap_or(f64::INFINITY);
    if let Some(sup) = v0.support_radius() {
        top = top.min(sup);
    }
    if top <= lo {
        return Quad::zero();
    }
    let mut breaks: Vec<f64> = vec![lo];
    breaks.extend(v0.kinks().into_iter().filter(|&k| k > lo && k < top));
    if top.is_finite() {
        breaks.push(top);
        return integrate(&f, &breaks, quad);
    }
    let ell = v0.length_scale();
    let mid = lo.max(8.0 * ell);
    if mid > lo {
        breaks.push(mid);
    }
    let head = integrate(&f, &breaks, quad);
    let tail = integrate_to_infinity(&f, mid, ell.max(mid), &[], quad);
    head.combine(tail)
}

/// Newton reduction ∫|V₀(y)|/|x−y| dy at |x| = r for radial V₀.
pub fn kato_potential(v0: &SpatialPotential, r: f64, quad: &QuadConfig) -> Result<f64> {
    let outer = radial_integral(v0, r, None, |s, v| 4.0 * PI * s * v, quad);
    let outer = checked(outer, "Kato tail integral")?;
    if r == 0.0 {
        return Ok(outer);
    }
    let inner = radial_integral(v0, 0.0, Some(r), |s, v| 4.0 * PI * s * s * v, quad);
    Ok(checked(inner, "Kato core integral")? / r + outer)
}

/// Global Kato norm sup_x ∫|V₀(y)|/|x−y| dy.
pub fn kato_global(v0: &SpatialPotential, quad: &QuadConfig) -> Result<f64> {
    if v0.is_radially_nonincreasing() {
        return kato_potential(v0, 0.0, quad);
    }
    // Coarse scan then golden-section refinement of the best bracket.
    let reach = v0.support_radius().unwrap_or(10.0 * v0.length_scale()) * 1.5;
    let n = 240;
    let grid: Vec<f64> = (0..=n).map(|i| reach * i as f64 / n as f64).collect();
    let vals = grid.iter().map(|&r| kato_potential(v0, r, quad)).collect::<Result<Vec<_>>>()?;
    let (best, _) = vals.iter().enumerate().fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = kato_potential(v0, c, quad)?;
    let mut fd = kato_potential(v0, d, quad)?;
    while (b - a) > 1e-10 * reach {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = kato_potential(v0, c, quad)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = kato_potential(v0, d, quad)?;
        }
    }
    Ok(vals[best].max(fc).max(fd))
}

/// ‖V₀‖_{L^{3/2}}.
pub fn l32_norm(v0: &SpatialPotential, quad: &QuadConfig) -> Result<f64> {
    let q = radial_integral(v0, 0.0, None, |s, v| 4.0 * PI * s * s * v.powf(1.5), quad);
    Ok(checked(q, "L^{3/2} integral")?.powf(2.0 / 3.0))
}

/// How the Rollnik double integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RollnikMethod {
    /// Radial reduction to a 2D integral with a logarithmic diagonal kernel.
    Quadrature(QuadConfig),
    /// 6D importance-sampled Monte Carlo.
    MonteCarlo { samples: u64, seed: u64 },
}

/// ln|(r+s)/(r−s)| without cancellation.
fn log_kernel(r: f64, s: f64) -> f64 {
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    if hi == lo {
        return f64::INFINITY;
    }
    (2.0 * lo / (hi - lo)).ln_1p()
}

/// ∫∫|V₀(x)||V₀(y)|/|x−y|² as an estimate (std_error is the quadrature
/// error estimate on the quadrature path).
pub fn rollnik_squared(v0: &SpatialPotential, method: RollnikMethod) -> Result<Estimate> {
    match method {
        RollnikMethod::Quadrature(quad) => rollnik_squared_quad(v0, &quad),
        RollnikMethod::MonteCarlo { samples, seed } => Ok(rollnik_squared_mc(v0, samples, seed)),
    }
}

/// Rollnik norm ‖V₀‖_R with its standard error (delta method for Monte Carlo).
pub fn rollnik(v0: &SpatialPotential, method: RollnikMethod) -> Result<Estimate> {
    let sq = rollnik_squared(v0, method)?;
    let mean = sq.mean.max(0.0).sqrt();
    let se = if mean > 0.0 { sq.std_error / (2.0 * mean) } else { sq.std_error.sqrt() };
    Ok(Estimate { mean, std_error: se, samples: sq.samples })
}

fn rollnik_squared_quad(v0: &SpatialPotential, quad: &QuadConfig) -> Result<Estimate> {
    // Angular average of |x−y|^{−2} over the relative angle is
    // ln|(r+s)/(r−s)|/(2rs); the radial measures contribute 16π² r² s².
    let inner_cfg = QuadConfig { rel_tol: quad.rel_tol * 0.1, abs_tol: quad.abs_tol * 0.1, ..*quad };
    let failed = std::cell::Cell::new(false);
    let inner = |r: f64| -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let mut kinks = v0.kinks();
        kinks.push(r);
        kinks.sort_by(f64::total_cmp);
        let top = v0.support_radius();
        let f = |s: f64| s * v0.radial_abs(s) * log_kernel(r, s);
        let mut breaks = vec![0.0];
        breaks.extend(kinks.into_iter().filter(|&k| k > 0.0 && top.is_none_or(|t| k <= t)));
        let q = match top {
            Some(t) => {
                if *breaks.last().unwrap() < t {
                    breaks.push(t);
                }
                integrate(&f, &breaks, &inner_cfg)
            }
            None => {
                let mid = (8.0 * v0.length_scale()).max(2.0 * r);
                breaks.push(mid);
                integrate(&f, &breaks, &inner_cfg).combine(integrate_to_infinity(&f, mid, mid, &[], &inner_cfg))
            }
        };
        if !q.converged {
            failed.set(true);
        }
        q.value
    };
    let q = radial_integral(v0, 0.0, None, |r, v| if v == 0.0 { 0.0 } else { r * v * inner(r) }, quad);
    if failed.get() {
        return Err(Error::NoConvergence { error: q.error, tolerance: quad.rel_tol });
    }
    let value = checked(q, "Rollnik integral")?;
    Ok(Estimate { mean: 8.0 * PI * PI * value, std_error: 8.0 * PI * PI * q.error, samples: 0 })
}

fn rollnik_squared_mc(v0: &SpatialPotential, samples: u64, seed: u64) -> Estimate {
    let p = v0.proposal();
    let reach = match v0.support_radius() {
        Some(r) => 2.0 * r,
        None => 3.0 * v0.length_scale(),
    };
    mc::estimate(samples, seed, |rng| {
        let x = p.sample(rng);
        let vx = v0.eval(x).abs();
        let comps = [(0.5, Component::Shell { center: x, radius: reach }), (0.5, Component::Global(p))];
        let y = mixture_sample(rng, &comps);
        let vy = v0.eval(y).abs();
        if vx == 0.0 || vy == 0.0 {
            return 0.0;
        }
        let d = dist(x, y);
        vx * vy / (d * d * p.pdf(x) * mixture_pdf(y, &comps))
    })
}

/// Settings for [`y_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConfig {
    pub quad: QuadConfig,
    pub rollnik: RollnikMethod,
    pub c0: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            quad: QuadConfig::default(),
            rollnik: RollnikMethod::Quadrature(QuadConfig { abs_tol: 1e-12, rel_tol: 1e-9, max_panels: 200_000 }),
            c0: DEFAULT_C0,
        }
    }
}

/// Smallness flags derived from a [`NormReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormFlags {
    pub rollnik_small: bool,
    pub kato_small: bool,
    pub y_small: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub rollnik: f64,
    pub rollnik_se: f64,
    pub kato_global: f64,
    pub l32: f64,
    pub fourier_mass: f64,
    pub y_norm: f64,
    pub flags: NormFlags,
}

/// Flags as pure functions of the values and thresholds.
pub fn flags(rollnik: f64, kato: f64, y: f64, c0: f64) -> NormFlags {
    NormFlags {
        rollnik_small: rollnik * rollnik < ROLLNIK_SQ_THRESHOLD,
        kato_small: kato < KATO_THRESHOLD,
        y_small: y < c0,
    }
}

/// Composite norm mass·‖V₀‖_{3/2} + mass·‖V₀‖_K, with mass = Σ|c| standing in
/// for sup_t|φ| in the first term.
pub fn y_norm(v: &SeparablePotential, cfg: &NormConfig) -> Result<NormReport> {
    let v0 = v.space();
    let mass = v.fourier_mass();
    let kato = kato_global(v0, &cfg.quad)?;
    let l32 = l32_norm(v0, &cfg.quad)?;
    let r = rollnik(v0, cfg.rollnik)?;
    let y = mass * l32 + mass * kato;
    Ok(NormReport {
        rollnik: r.mean,
        rollnik_se: r.std_error,
        kato_global: kato,
        l32,
        fourier_mass: mass,
        y_norm: y,
        flags: flags(r.mean, kato, y, cfg.c0),
    })
}
