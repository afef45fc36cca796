//! Born series kernels for separable potentials with atomic time profiles,
//! iterated Kato integrals, and the two algebraic identities the series
//! representation rests on.
//!
//! The m-th Duhamel iterate has kernel
//!
//!   I_m(x, y) = Σ_atoms ∏c_j · P · ∫ ∏V₀(x_j) ∏_q (4π r_q)^{−1} · B(r) dx₁…dx_m,
//!
//! where r_q = |x_q − x_{q+1}| (x₀ = x, x_{m+1} = y), P collects the time
//! phases and B is a finite sum of one-dimensional oscillatory integrals in
//! the spectral variable κ: one per slot over [0, ∞) and, when the time
//! frequencies differ, damped pieces over [0, √ρ_d].

use crate::error::{invalid, Error, Result};
use crate::mc::{self, dist, mixture_pdf, mixture_sample, Component, ComplexEstimate, Estimate, Point, Proposal};
use crate::norms::{kato_global, kato_potential};
use crate::oscillatory::{osc_value, DampedWeight, OscConfig, PhaseLambda, Sign, WeightKind};
use crate::potentials::{SeparablePotential, SpatialPotential};
use crate::quadrature::QuadConfig;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Σ_k e^{i(a₁+…+a_{k−1} − a_{k+1} − … − a_n)} sin a_k and sin(Σ a_k).
pub fn sine_telescope(a: &[f64]) -> Result<(Complex64, f64)> {
    if a.len() < 2 {
        return Err(invalid("sine telescope needs at least two angles"));
    }
    let total: f64 = a.iter().sum();
    let mut before = 0.0;
    let mut lhs = Complex64::new(0.0, 0.0);
    for (k, &ak) in a.iter().enumerate() {
        let after: f64 = a[k + 1..].iter().sum();
        lhs += Complex64::from_polar(ak.sin(), before - after);
        before += ak;
    }
    Ok((lhs, total.sin()))
}

/// Σ_k z_k^{−1} ∏_{r≠k} (z_r − z_k)^{−1} and ∏ z_r^{−1}.
pub fn partial_fractions(z: &[Complex64]) -> Result<(Complex64, Complex64)> {
    if z.is_empty() {
        return Err(invalid("partial fractions need at least one point"));
    }
    if z.iter().any(|w| w.norm() == 0.0) {
        return Err(Error::Degenerate("zero entry".into()));
    }
    for i in 0..z.len() {
        for j in 0..i {
            if (z[i] - z[j]).norm() < 1e-8 {
                return Err(Error::Degenerate(format!("points {j} and {i} closer than 1e-8")));
            }
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let lhs = z
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            let prod = z.iter().enumerate().filter(|&(r, _)| r != k).fold(zk, |acc, (_, &zr)| acc * (zr - zk));
            one / prod
        })
        .sum();
    let rhs = one / z.iter().fold(one, |acc, &w| acc * w);
    Ok((lhs, rhs))
}

fn shell_reach(v0: &SpatialPotential) -> f64 {
    match v0.support_radius() {
        Some(r) => 2.0 * r,
        None => 3.0 * v0.length_scale(),
    }
}

/// (A f)(x) = ∫ |V₀(y)| f(y)/|x − y| dy by importance sampling.
pub fn kato_apply<F>(v0: &SpatialPotential, f: F, x: Point, samples: u64, seed: u64) -> Estimate
where
    F: Fn(Point) -> f64 + Sync + Send,
{
    let p = v0.proposal();
    let comps = [(0.5, Component::Global(p)), (0.5, Component::Shell { center: x, radius: shell_reach(v0) })];
    mc::estimate(samples, seed, |rng| {
        let y = mixture_sample(rng, &comps);
        let v = v0.eval(y).abs();
        if v == 0.0 {
            return 0.0;
        }
        v * f(y) / (dist(x, y) * mixture_pdf(y, &comps))
    })
}

/// Sample path x₀, …, x_{k+1} with its importance weight 1/density.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub points: Vec<Point>,
    pub weight: f64,
}

/// Draws interior chain points from a mixture of the potential's proposal and
/// 1/r²-compensating shells around the previous point (and, for the last
/// point, around the fixed endpoint).
#[derive(Debug, Clone, Copy)]
pub struct ChainSampler {
    proposal: Proposal,
    reach: f64,
}

impl ChainSampler {
    pub fn new(v0: &SpatialPotential) -> Self {
        ChainSampler { proposal: v0.proposal(), reach: shell_reach(v0) }
    }

    fn components(&self, prev: Point, end: Option<Point>) -> Vec<(f64, Component)> {
        let mut c = vec![(1.0, Component::Global(self.proposal)), (1.0, Component::Shell { center: prev, radius: self.reach })];
        if let Some(e) = end {
            c.push((1.0, Component::Shell { center: e, radius: self.reach }));
        }
        c
    }

    /// k interior points between fixed `x0` and `end`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, x0: Point, end: Point, k: usize) -> ChainSample {
        let mut points = Vec::with_capacity(k + 2);
        points.push(x0);
        let mut density = 1.0;
        for j in 1..=k {
            let prev = points[j - 1];
            let comps = self.components(prev, (j == k).then_some(end));
            let x = loop {
                let x = mixture_sample(rng, &comps);
                if x != prev && x != end {
                    break x;
                }
            };
            density *= mixture_pdf(x, &comps);
            points.push(x);
        }
        points.push(end);
        ChainSample { points, weight: 1.0 / density }
    }

    /// k interior points after `x0`, followed by a free endpoint drawn from
    /// `end_proposal` mixed with a shell around the last interior point.
    pub fn sample_open<R: Rng + ?Sized>(&self, rng: &mut R, x0: Point, k: usize, end_proposal: Proposal) -> ChainSample {
        let mut s = self.sample_interior(rng, x0, k);
        let last = *s.points.last().unwrap();
        let comps = [(1.0, Component::Global(end_proposal)), (1.0, Component::Shell { center: last, radius: self.reach })];
        let y = loop {
            let y = mixture_sample(rng, &comps);
            if y != last {
                break y;
            }
        };
        s.weight /= mixture_pdf(y, &comps);
        s.points.push(y);
        s
    }

    fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R, x0: Point, k: usize) -> ChainSample {
        let mut points = vec![x0];
        let mut density = 1.0;
        for j in 1..=k {
            let prev = points[j - 1];
            let comps = self.components(prev, None);
            let x = loop {
                let x = mixture_sample(rng, &comps);
                if x != prev {
                    break x;
                }
            };
            density *= mixture_pdf(x, &comps);
            points.push(x);
        }
        ChainSample { points, weight: 1.0 / density }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IteratedKato {
    pub estimate: Estimate,
    pub bound: f64,
}

/// ∫ ∏|V₀(x_j)| / ∏|x_j − x_{j+1}| · Σ_ℓ |x_ℓ − x_{ℓ+1}| dx₁…dx_k against
/// the bound (k+1)‖V₀‖_K^k.
pub fn iterated_kato_estimate(
    v0: &SpatialPotential,
    k: usize,
    x0: Point,
    xk1: Point,
    samples: u64,
    seed: u64,
    quad: &QuadConfig,
) -> Result<IteratedKato> {
    if !(1..=3).contains(&k) {
        return Err(invalid("iterated Kato order must be 1, 2 or 3"));
    }
    if x0 == xk1 {
        return Err(invalid("chain endpoints must differ"));
    }
    let kato = kato_global(v0, quad)?;
    let bound = (k as f64 + 1.0) * kato.powi(k as i32);
    if v0.is_zero() {
        return Ok(IteratedKato { estimate: Estimate::exact(0.0), bound });
    }
    let sampler = ChainSampler::new(v0);
    let est = mc::estimate(samples, seed, |rng| {
        let c = sampler.sample(rng, x0, xk1, k);
        let mut v = 1.0;
        for x in &c.points[1..=k] {
            v *= v0.eval(*x).abs();
        }
        if v == 0.0 {
            return 0.0;
        }
        let r: Vec<f64> = c.points.windows(2).map(|w| dist(w[0], w[1])).collect();
        let sum: f64 = (0..=k).map(|l| r.iter().enumerate().filter(|&(q, _)| q != l).map(|(_, d)| 1.0 / d).product::<f64>()).sum();
        v * sum * c.weight
    });
    if est.mean > 0.0 && est.std_error / est.mean > 0.05 {
        log::warn!("iterated Kato estimate has relative standard error {:.3}; increase samples", est.std_error / est.mean);
    }
    Ok(IteratedKato { estimate: est, bound })
}

/// k = 1 value obtained by telescoping: A1(x₀) + A1(x₂).
pub fn iterated_kato_first_order(v0: &SpatialPotential, x0: Point, x2: Point, quad: &QuadConfig) -> Result<f64> {
    Ok(kato_potential(v0, mc::norm(x0), quad)? + kato_potential(v0, mc::norm(x2), quad)?)
}

/// One atom combination of the m-th Born term between times s < t.
///
/// `thetas[j−1]` is the angular frequency carried by the potential factor at
/// x_j. Slot q (the segment x_q → x_{q+1}) carries the prefix sum
/// Θ_q = θ₁ + … + θ_q, and σ_q = Θ_q − min_p Θ_p ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BornTermParams {
    pub m: usize,
    pub t: f64,
    pub s: f64,
    pub thetas: Vec<f64>,
}

impl BornTermParams {
    pub fn new(m: usize, t: f64, s: f64, thetas: Vec<f64>) -> Result<Self> {
        if !(t > s) || !t.is_finite() || !s.is_finite() {
            return Err(invalid("Born term needs finite s < t"));
        }
        if thetas.len() != m {
            return Err(invalid("one frequency per potential factor"));
        }
        if thetas.iter().any(|x| !x.is_finite()) {
            return Err(invalid("frequencies must be finite"));
        }
        Ok(BornTermParams { m, t, s, thetas })
    }

    pub fn static_term(m: usize, t: f64, s: f64) -> Result<Self> {
        Self::new(m, t, s, vec![0.0; m])
    }

    /// Builds from the suffix parametrization τ_j = −θ_j.
    pub fn from_taus(m: usize, t: f64, s: f64, taus: &[f64]) -> Result<Self> {
        Self::new(m, t, s, taus.iter().map(|x| -x).collect())
    }

    pub fn elapsed(&self) -> f64 {
        self.t - self.s
    }

    fn prefix(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for th in &self.thetas {
            out.push(out.last().unwrap() + th);
        }
        out
    }

    /// σ_0, …, σ_m.
    pub fn sigmas(&self) -> Vec<f64> {
        let p = self.prefix();
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        p.iter().map(|x| x - lo).collect()
    }

    /// σ sorted descending (ω₁ ≥ … ≥ ω_{m+1} = 0) and the slot of each rank.
    pub fn omegas(&self) -> (Vec<f64>, Vec<usize>) {
        let s = self.sigmas();
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        (idx.iter().map(|&i| s[i]).collect(), idx)
    }

    /// ρ_a = ω_{d−1} − ω_a for a = d, …, m+1 (ranks 1-based).
    pub fn rhos(&self, d: usize) -> Vec<f64> {
        let (w, _) = self.omegas();
        (d..=self.m + 1).map(|a| w[d - 2] - w[a - 1]).collect()
    }

    /// e^{isΘ_m} e^{iTΘ_min} (−i)^{2m+1} / (πT).
    fn time_factor(&self) -> Complex64 {
        let p = self.prefix();
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let big_t = self.elapsed();
        let unit = Complex64::new(0.0, -1.0).powu(2 * self.m as u32 + 1);
        Complex64::from_polar(1.0 / (PI * big_t), self.s * p[self.m] + big_t * lo) * unit
    }
}

/// Which part of the spectral sum B to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BornPart {
    All,
    /// Slot ℓ ∈ 0..=m, integral over [0, ∞).
    L(usize),
    /// 2 ≤ d ≤ m+1, rank c < d: Kato-weighted damped piece.
    M { d: usize, c: usize },
    /// 2 ≤ d ≤ m+1, rank a ≥ d: singular-weighted damped piece.
    MTilde { d: usize, a: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BornConfig {
    pub osc: OscConfig,
    /// Use the closed form ½√(π/(iT)) e^{iR²/4T} for slots when every σ vanishes.
    pub closed_form_static: bool,
}

impl Default for BornConfig {
    fn default() -> Self {
        BornConfig { osc: OscConfig::default(), closed_form_static: true }
    }
}

/// ∫₀^{end} e^{−iTκ²} {cos, sin}(Σ b_j √(κ² + σ_j)) · W(κ) dκ via the
/// rescaling κ = λ/√(2T) onto the standard phase λ²/2 ± Σ b̃ √(λ² + σ̃).
fn spectral_piece(big_t: f64, b: &[f64], sigma: &[f64], kind: WeightKind, rho: &[f64], c: &[f64], sine: bool, cfg: &OscConfig) -> Result<Complex64> {
    let sc = (2.0 * big_t).sqrt();
    let bb: Vec<f64> = b.iter().map(|x| x / sc).collect();
    let ss: Vec<f64> = sigma.iter().map(|x| x * 2.0 * big_t).collect();
    let rr: Vec<f64> = rho.iter().map(|x| x * 2.0 * big_t).collect();
    let cc: Vec<f64> = c.iter().map(|x| x / sc).collect();
    let w = DampedWeight::new(kind, rr, cc)?;
    let jp = osc_value(&PhaseLambda::new(Sign::Plus, bb.clone(), ss.clone())?, &w, None, cfg)?.value;
    let jm = osc_value(&PhaseLambda::new(Sign::Minus, bb, ss)?, &w, None, cfg)?.value;
    let v = if sine { (jp - jm) / Complex64::new(0.0, 2.0) } else { (jp + jm) * 0.5 } / sc;
    Ok(v.conj())
}

/// ½√(π/(iT)) e^{iR²/(4T)} = ∫₀^∞ e^{−iTκ²} cos(Rκ) dκ.
fn static_slot(big_t: f64, total_r: f64) -> Complex64 {
    Complex64::from_polar(0.5 * (PI / big_t).sqrt(), -PI / 4.0 + total_r * total_r / (4.0 * big_t))
}

/// Slot-ℓ integral over [0, ∞) with the Kato weight κ/√(κ² + σ_ℓ).
fn slot_integral(p: &BornTermParams, r: &[f64], ell: usize, cfg: &BornConfig) -> Result<Complex64> {
    let sig = p.sigmas();
    let big_t = p.elapsed();
    if cfg.closed_form_static && sig.iter().all(|&x| x == 0.0) {
        return Ok(static_slot(big_t, r.iter().sum()));
    }
    let mut idx: Vec<usize> = (0..sig.len()).collect();
    idx.sort_by(|&a, &b| sig[b].total_cmp(&sig[a]).then(a.cmp(&b)));
    let b: Vec<f64> = idx.iter().map(|&i| r[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| sig[i]).collect();
    let k = idx.iter().position(|&i| i == ell).unwrap();
    spectral_piece(big_t, &b, &s, WeightKind::Kato { k }, &[], &[], false, &cfg.osc)
}

/// Damped piece for split index d, with either the Kato weight on rank
/// `which` < d or the singular weight on rank `which` ≥ d.
fn damped_integral(p: &BornTermParams, r: &[f64], d: usize, which: usize, cfg: &BornConfig) -> Result<Complex64> {
    let (w, slot) = p.omegas();
    let m = p.m;
    let rho_d = w[d - 2] - w[d - 1];
    if rho_d <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // Oscillating ranks c < d: σ′_c = ω_c − ω_{d−1}, already descending.
    let b: Vec<f64> = (1..d).map(|c| r[slot[c - 1]]).collect();
    let s: Vec<f64> = (1..d).map(|c| w[c - 1] - w[d - 2]).collect();
    // Damping ranks a ≥ d, ρ ascending in a: reverse to descending.
    let rho: Vec<f64> = (d..=m + 1).rev().map(|a| w[d - 2] - w[a - 1]).collect();
    let cc: Vec<f64> = (d..=m + 1).rev().map(|a| r[slot[a - 1]]).collect();
    let big_t = p.elapsed();
    let rot = Complex64::from_polar(1.0, big_t * w[d - 2]);
    if which < d {
        let v = spectral_piece(big_t, &b, &s, WeightKind::Kato { k: which - 1 }, &rho, &cc, false, &cfg.osc)?;
        Ok(rot * v * r[slot[which - 1]])
    } else {
        let k = m + 1 - which;
        let v = spectral_piece(big_t, &b, &s, WeightKind::Singular { k }, &rho, &cc, true, &cfg.osc)?;
        Ok(rot * v * r[slot[which - 1]])
    }
}

fn validate_part(m: usize, part: BornPart) -> Result<()> {
    let ok = match part {
        BornPart::All => true,
        BornPart::L(l) => l <= m,
        BornPart::M { d, c } => (2..=m + 1).contains(&d) && c >= 1 && c < d,
        BornPart::MTilde { d, a } => (2..=m + 1).contains(&d) && a >= d && a <= m + 1,
    };
    if ok { Ok(()) } else { Err(invalid(format!("Born part {part:?} out of range for m = {m}"))) }
}

/// Spectral sum B(r) restricted to `part`, times r of the weighted slot.
pub fn spectral_sum(p: &BornTermParams, r: &[f64], part: BornPart, cfg: &BornConfig) -> Result<Complex64> {
    validate_part(p.m, part)?;
    if r.len() != p.m + 1 || r.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("need m+1 positive distances"));
    }
    let m = p.m;
    match part {
        BornPart::L(l) => Ok(slot_integral(p, r, l, cfg)? * r[l]),
        BornPart::M { d, c } => damped_integral(p, r, d, c, cfg),
        BornPart::MTilde { d, a } => damped_integral(p, r, d, a, cfg),
        BornPart::All => {
            let mut acc = Complex64::new(0.0, 0.0);
            let sig = p.sigmas();
            if cfg.closed_form_static && sig.iter().all(|&x| x == 0.0) {
                let total: f64 = r.iter().sum();
                return Ok(static_slot(p.elapsed(), total) * total);
            }
            for l in 0..=m {
                acc += slot_integral(p, r, l, cfg)? * r[l];
            }
            for d in 2..=m + 1 {
                for which in 1..=m + 1 {
                    acc += damped_integral(p, r, d, which, cfg)?;
                }
            }
            Ok(acc)
        }
    }
}

/// Kernel integrand at fixed interior points, without ∏V₀ and ∏c:
/// P · ∏_q (4πr_q)^{−1} · B(r).
pub fn chain_factor(p: &BornTermParams, r: &[f64], part: BornPart, cfg: &BornConfig) -> Result<Complex64> {
    let b = spectral_sum(p, r, part, cfg)?;
    let inv: f64 = r.iter().map(|x| 1.0 / (4.0 * PI * x)).product();
    Ok(p.time_factor() * b * inv)
}

/// All atom combinations (angular frequencies, ∏c) for m factors.
fn atom_combinations(v: &SeparablePotential, m: usize) -> Vec<(Vec<f64>, Complex64)> {
    let atoms = v.time().atoms();
    let mut out = vec![(Vec::new(), Complex64::new(1.0, 0.0))];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * atoms.len());
        for (th, c) in &out {
            for a in atoms {
                let mut t = th.clone();
                t.push(a.angular());
                next.push((t, c * a.coeff));
            }
        }
        out = next;
    }
    out
}

fn chain_integrand(v: &SeparablePotential, m: usize, t: f64, s: f64, pts: &[Point], part: BornPart, cfg: &BornConfig) -> Result<Complex64> {
    let mut vprod = 1.0;
    for x in &pts[1..=m] {
        vprod *= v.space().eval(*x);
    }
    if vprod == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let r: Vec<f64> = pts.windows(2).map(|w| dist(w[0], w[1])).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (thetas, c) in atom_combinations(v, m) {
        let p = BornTermParams::new(m, t, s, thetas)?;
        acc += c * chain_factor(&p, &r, part, cfg)?;
    }
    Ok(acc * vprod)
}

fn run_mc<F>(samples: u64, seed: u64, f: F) -> Result<ComplexEstimate>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Complex64> + Sync + Send,
{
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let est = mc::estimate_complex(samples, seed, |rng| match f(rng) {
        Ok(v) => v,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

/// Kernel I_m(t, s)(x, y), or one part of it, by Monte Carlo over the chain
/// x₁…x_m. For m = 0 the value is exact.
#[allow(clippy::too_many_arguments)]
pub fn born_kernel(v: &SeparablePotential, m: usize, t: f64, s: f64, part: BornPart, x: Point, y: Point, samples: u64, seed: u64, cfg: &BornConfig) -> Result<ComplexEstimate> {
    validate_part(m, part)?;
    if !(t > s) {
        return Err(invalid("Born kernel needs s < t"));
    }
    if x == y && m == 0 {
        return Err(Error::Domain("diagonal of the free kernel".into()));
    }
    if m == 0 {
        let v = chain_integrand(v, 0, t, s, &[x, y], part, cfg)?;
        return Ok(ComplexEstimate { mean: v, std_error: 0.0, samples: 0 });
    }
    if v.space().is_zero() {
        return Ok(ComplexEstimate { mean: Complex64::new(0.0, 0.0), std_error: 0.0, samples: 0 });
    }
    let sampler = ChainSampler::new(v.space());
    run_mc(samples, seed, |rng| {
        let c = sampler.sample(rng, x, y, m);
        Ok(chain_integrand(v, m, t, s, &c.points, part, cfg)? * c.weight)
    })
}

/// Slot term L^ℓ of the m-th kernel.
#[allow(clippy::too_many_arguments)]
pub fn born_kernel_l(v: &SeparablePotential, m: usize, t: f64, s: f64, ell: usize, x: Point, y: Point, samples: u64, seed: u64, cfg: &BornConfig) -> Result<ComplexEstimate> {
    born_kernel(v, m, t, s, BornPart::L(ell), x, y, samples, seed, cfg)
}

/// Damped term M^{d,ℓ} (Kato weight) or its singular-weight companion.
#[allow(clippy::too_many_arguments)]
pub fn born_kernel_m(v: &SeparablePotential, m: usize, t: f64, s: f64, d: usize, ell: usize, tilde: bool, x: Point, y: Point, samples: u64, seed: u64, cfg: &BornConfig) -> Result<ComplexEstimate> {
    let part = if tilde { BornPart::MTilde { d, a: ell } } else { BornPart::M { d, c: ell } };
    born_kernel(v, m, t, s, part, x, y, samples, seed, cfg)
}

/// (I_m ψ)(x) = ∫ I_m(x, y) ψ(y) dy, jointly sampling the chain and y.
#[allow(clippy::too_many_arguments)]
pub fn born_applied<F>(v: &SeparablePotential, m: usize, t: f64, s: f64, x: Point, psi: F, psi_proposal: Proposal, samples: u64, seed: u64, cfg: &BornConfig) -> Result<ComplexEstimate>
where
    F: Fn(Point) -> Complex64 + Sync + Send,
{
    if !(t > s) {
        return Err(invalid("Born term needs s < t"));
    }
    if m > 0 && v.space().is_zero() {
        return Ok(ComplexEstimate { mean: Complex64::new(0.0, 0.0), std_error: 0.0, samples: 0 });
    }
    let sampler = ChainSampler::new(v.space());
    run_mc(samples, seed, |rng| {
        let c = sampler.sample_open(rng, x, m, psi_proposal);
        let y = *c.points.last().unwrap();
        let f = psi(y);
        if f == Complex64::new(0.0, 0.0) {
            return Ok(f);
        }
        Ok(chain_integrand(v, m, t, s, &c.points, BornPart::All, cfg)? * f * c.weight)
    })
}

/// ⟨I_m ψ, g⟩ = ∫∫ conj(g(x)) I_m(x, y) ψ(y) dx dy with x drawn from
/// `g_proposal`.
#[allow(clippy::too_many_arguments)]
pub fn born_pairing<F, G>(v: &SeparablePotential, m: usize, t: f64, s: f64, psi: F, psi_proposal: Proposal, g: G, g_proposal: Proposal, samples: u64, seed: u64, cfg: &BornConfig) -> Result<ComplexEstimate>
where
    F: Fn(Point) -> Complex64 + Sync + Send,
    G: Fn(Point) -> Complex64 + Sync + Send,
{
    if !(t > s) {
        return Err(invalid("Born term needs s < t"));
    }
    if m > 0 && v.space().is_zero() {
        return Ok(ComplexEstimate { mean: Complex64::new(0.0, 0.0), std_error: 0.0, samples: 0 });
    }
    let sampler = ChainSampler::new(v.space());
    run_mc(samples, seed, |rng| {
        let x = g_proposal.sample(rng);
        let wx = 1.0 / g_proposal.pdf(x);
        let c = sampler.sample_open(rng, x, m, psi_proposal);
        let y = *c.points.last().unwrap();
        let f = psi(y) * g(x).conj();
        if f == Complex64::new(0.0, 0.0) || x == y {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(chain_integrand(v, m, t, s, &c.points, BornPart::All, cfg)? * f * c.weight * wx)
    })
}
