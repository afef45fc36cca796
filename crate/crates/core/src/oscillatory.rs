//! Oscillatory integrals over the two degenerate phase families
//!
//!   φ(λ) = λ²/2 ± Σ b_j √(λ² + σ_j),   ψ(u) = u²/2 + Σ b_j √(τ_j − u²),
//!
//! with optional damping, singular endpoint weights and smooth cutoffs, plus
//! the upper bounds these integrals are known to satisfy.

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, Quad, QuadConfig};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

fn sorted_descending(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

/// φ(λ) = λ²/2 + s·Σ b_j √(λ² + σ_j), s = ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLambda {
    sign: Sign,
    b: Vec<f64>,
    sigma: Vec<f64>,
}

impl PhaseLambda {
    /// An empty `b` is accepted and gives the pure Fresnel phase λ²/2.
    pub fn new(sign: Sign, b: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if b.len() != sigma.len() {
            return Err(invalid("b and sigma must have equal length"));
        }
        if b.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("b entries must be positive and finite"));
        }
        if sigma.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("sigma entries must be nonnegative and finite"));
        }
        if !sorted_descending(&sigma) {
            return Err(invalid("sigma must be sorted in descending order"));
        }
        Ok(PhaseLambda { sign, b, sigma })
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
    pub fn m(&self) -> usize {
        self.b.len()
    }
    pub fn sum_b(&self) -> f64 {
        self.b.iter().sum()
    }
    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    pub fn phase(&self, lambda: f64) -> f64 {
        let s: f64 = self.b.iter().zip(&self.sigma).map(|(b, sg)| b * (lambda * lambda + sg).sqrt()).sum();
        0.5 * lambda * lambda + self.sign.value() * s
    }

    /// (φ, φ′, φ″, φ‴) in closed form.
    pub fn derivatives(&self, lambda: f64) -> Result<[f64; 4]> {
        if !(lambda >= 0.0) || (lambda == 0.0 && self.sigma.contains(&0.0)) {
            return Err(Error::Domain(format!("phase derivatives undefined at lambda = {lambda}")));
        }
        let s = self.sign.value();
        let l2 = lambda * lambda;
        let (mut p0, mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0, 0.0);
        for (&b, &sg) in self.b.iter().zip(&self.sigma) {
            let q = l2 + sg;
            let r = q.sqrt();
            p0 += b * r;
            p1 += b / r;
            p2 += b * sg / (q * r);
            p3 += b * sg * lambda / (q * q * r);
        }
        Ok([0.5 * l2 + s * p0, lambda * (1.0 + s * p1), 1.0 + s * p2, -3.0 * s * p3])
    }

    /// Local oscillation rate used to size quadrature panels.
    fn rate(&self, lambda: f64) -> f64 {
        let l = lambda.max(1e-300);
        match self.derivatives(l) {
            Ok([_, d1, d2, d3]) => d1.abs() + d2.abs().sqrt() + d3.abs().cbrt(),
            Err(_) => 0.0,
        }
    }
}

/// Unique zero of Σ b_j/√(λ²+σ_j) = 1 for the minus-sign phase.
pub fn critical_point_lambda(p: &PhaseLambda) -> Result<Option<f64>> {
    if p.sign != Sign::Minus {
        return Err(invalid("critical points are defined for the minus-sign phase"));
    }
    if p.m() == 0 {
        return Ok(None);
    }
    let g = |l: f64| -> f64 { p.b.iter().zip(&p.sigma).map(|(b, s)| b / (l * l + s).sqrt()).sum::<f64>() - 1.0 };
    let has_zero = p.sigma.contains(&0.0);
    if !has_zero && g(0.0) <= 0.0 {
        return Ok(None);
    }
    Ok(Some(bisect_decreasing(g, 0.0, p.sum_b() + 1.0)))
}

/// Root of a strictly decreasing function with g(lo) > 0 ≥ g(hi).
fn bisect_decreasing<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// ψ(u) = u²/2 + Σ b_j √(τ_j − u²) on [0, √τ_m).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseU {
    b: Vec<f64>,
    tau: Vec<f64>,
}

impl PhaseU {
    pub fn new(b: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if b.len() != tau.len() || b.is_empty() {
            return Err(invalid("b and tau must be nonempty with equal length"));
        }
        if b.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("b entries must be positive and finite"));
        }
        if tau.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("tau entries must be positive"));
        }
        if !sorted_descending(&tau) {
            return Err(invalid("tau must be sorted in descending order"));
        }
        Ok(PhaseU { b, tau })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Right end √τ_m of the domain.
    pub fn domain_end(&self) -> f64 {
        self.tau.last().unwrap().sqrt()
    }

    pub fn value(&self, u: f64) -> f64 {
        0.5 * u * u + self.b.iter().zip(&self.tau).map(|(b, t)| b * (t - u * u).sqrt()).sum::<f64>()
    }

    /// ψ′(u) = u(1 − Σ b_j/√(τ_j − u²)).
    pub fn derivative(&self, u: f64) -> f64 {
        u * (1.0 - self.b.iter().zip(&self.tau).map(|(b, t)| b / (t - u * u).sqrt()).sum::<f64>())
    }
}

/// Unique u₀ ∈ (0, √τ_m) with Σ b_j/√(τ_j − u₀²) = 1, if any.
///
/// The left side increases from Σ b_j/√τ_j to +∞, so a root exists exactly
/// when Σ b_j/√τ_j < 1.
pub fn critical_point_u(p: &PhaseU) -> Option<f64> {
    let h = |u: f64| 1.0 - p.b.iter().zip(&p.tau).map(|(b, t)| b / (t - u * u).sqrt()).sum::<f64>();
    if h(0.0) <= 0.0 {
        return None;
    }
    let end = p.domain_end();
    let mut lo = 0.0;
    let mut hi = end;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        // Beyond the domain the square root is NaN: treat as past the root.
        let v = h(mid);
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Smooth monotone step families on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Bump {
    /// 6x⁵ − 15x⁴ + 10x³ (C²).
    #[default]
    Smoothstep,
    /// e^{−1/x}/(e^{−1/x} + e^{−1/(1−x)}) (C^∞).
    Exponential,
}

impl Bump {
    /// Step rising from 0 at x ≤ 0 to 1 at x ≥ 1.
    pub fn step(self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            Bump::Smoothstep => x * x * x * (10.0 + x * (-15.0 + 6.0 * x)),
            Bump::Exponential => {
                let a = (-1.0 / x).exp();
                let b = (-1.0 / (1.0 - x)).exp();
                a / (a + b)
            }
        }
    }

    /// Even cutoff: 1 on [−1, 1], 0 outside [−2, 2].
    pub fn cutoff(self, x: f64) -> f64 {
        1.0 - self.step(x.abs() - 1.0)
    }

    /// Partition function χ: 0 below ¼, 1 above ½.
    pub fn chi(self, x: f64) -> f64 {
        self.step(4.0 * x - 1.0)
    }
}

/// Multiplier ψ(λ/scale) applied to the integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub bump: Bump,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    Unit,
    /// λ/√(λ² + σ_k).
    Kato { k: usize },
    /// λ/√(ρ_k − λ²).
    Singular { k: usize },
}

/// Weight and damping ∏ exp(−c_i √(ρ_i − λ²)) multiplying the oscillation.
#[derive(Debug, Clone, PartialEq)]
pub struct DampedWeight {
    kind: WeightKind,
    rho: Vec<f64>,
    c: Vec<f64>,
}

impl DampedWeight {
    pub fn unit() -> Self {
        DampedWeight { kind: WeightKind::Unit, rho: vec![], c: vec![] }
    }

    pub fn kato(k: usize) -> Self {
        DampedWeight { kind: WeightKind::Kato { k }, rho: vec![], c: vec![] }
    }

    /// `c` is empty (no damping) or matches `rho` in length.
    pub fn new(kind: WeightKind, rho: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if rho.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("rho entries must be positive and finite"));
        }
        if !sorted_descending(&rho) {
            return Err(invalid("rho must be sorted in descending order"));
        }
        if !c.is_empty() && c.len() != rho.len() {
            return Err(invalid("c must be empty or match rho in length"));
        }
        if c.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("damping coefficients must be positive"));
        }
        if let WeightKind::Singular { k } = kind {
            if k >= rho.len() {
                return Err(invalid(format!("singular weight index {k} out of range")));
            }
        }
        Ok(DampedWeight { kind, rho, c })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn is_damped(&self) -> bool {
        !self.c.is_empty()
    }
    /// ρ_ℓ, the smallest ρ, which fixes the integration endpoint.
    pub fn rho_min(&self) -> Option<f64> {
        self.rho.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscResult {
    pub value: Complex64,
    pub quad_error: f64,
    pub bound: f64,
    pub ratio: f64,
}

impl OscResult {
    fn new(q: Quad<Complex64>, bound: f64) -> Self {
        let ratio = if bound > 0.0 { q.value.norm() / bound } else { f64::INFINITY };
        OscResult { value: q.value, quad_error: q.error, bound, ratio }
    }
}

/// Which route evaluates the piece of a finite-endpoint integral next to √ρ_ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TailRoute {
    /// u = √(ρ_ℓ − λ²), integrand written in closed form in u.
    #[default]
    USubstitution,
    /// λ = √ρ_ℓ (1 − v²), quadratic clustering at the endpoint.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscConfig {
    pub quad: QuadConfig,
    /// Largest panel length in λ.
    pub h_max: f64,
    /// Partition function between the bulk and the endpoint piece.
    pub chi: Bump,
    pub cutoff: Option<Cutoff>,
    pub tail: TailRoute,
    /// Upper bound on the number of initial panels.
    pub max_initial_panels: usize,
}

impl Default for OscConfig {
    fn default() -> Self {
        OscConfig {
            quad: QuadConfig { abs_tol: 1e-12, rel_tol: 1e-10, max_panels: 400_000 },
            h_max: 0.5,
            chi: Bump::Smoothstep,
            cutoff: None,
            tail: TailRoute::USubstitution,
            max_initial_panels: 2_000_000,
        }
    }
}

/// Breakpoints stepping through [a, b] with local length ≈ π/rate, capped.
fn oscillation_panels<R: Fn(f64) -> f64>(a: f64, b: f64, rate: R, h_max: f64, cap: usize) -> Result<Vec<f64>> {
    let mut breaks = vec![a];
    let mut x = a;
    let h_min = (b - a) * 1e-9;
    while x < b {
        let k = rate(x);
        let h = if k > 0.0 { (PI / k).min(h_max) } else { h_max }.max(h_min);
        x = (x + h).min(b);
        breaks.push(x);
        if breaks.len() > cap {
            return Err(invalid("oscillation too fast for the panel budget"));
        }
    }
    Ok(breaks)
}

fn merge_breaks(mut breaks: Vec<f64>, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let (a, b) = (breaks[0], *breaks.last().unwrap());
    breaks.extend(extra.into_iter().filter(|&x| x > a && x < b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

fn checked(q: Quad<Complex64>, cfg: &QuadConfig) -> Result<Quad<Complex64>> {
    if !q.value.re.is_finite() || !q.value.im.is_finite() {
        return Err(Error::Divergent("oscillatory integrand produced a non-finite value".into()));
    }
    if !q.converged {
        return Err(Error::NoConvergence { error: q.error, tolerance: cfg.tolerance(q.value.norm()) });
    }
    Ok(q)
}

/// Weight evaluated at complex λ in the closed first quadrant.
fn weight_complex(p: &PhaseLambda, w: &DampedWeight, z: Complex64) -> Complex64 {
    match w.kind {
        WeightKind::Unit => Complex64::new(1.0, 0.0),
        WeightKind::Kato { k } => z / (z * z + p.sigma[k]).sqrt(),
        WeightKind::Singular { k } => z / (w.rho[k] - z * z).sqrt(),
    }
}

fn phase_complex(p: &PhaseLambda, z: Complex64) -> Complex64 {
    let z2 = z * z;
    let s: Complex64 = p.b.iter().zip(&p.sigma).map(|(&b, &sg)| (z2 + sg).sqrt() * b).sum();
    z2 * 0.5 + s * p.sign.value()
}

/// ∫₀^{upper} e^{iφ(λ)} · damping · weight · cutoff dλ with its error estimate.
///
/// `upper` must be √ρ_ℓ when the weight carries ρ; otherwise any positive
/// value or `None` for +∞.
pub fn osc_value(p: &PhaseLambda, w: &DampedWeight, upper: Option<f64>, cfg: &OscConfig) -> Result<Quad<Complex64>> {
    if let WeightKind::Kato { k } = w.kind {
        if k >= p.m() {
            return Err(invalid(format!("Kato weight index {k} out of range")));
        }
    }
    if let WeightKind::Singular { .. } = w.kind {
        if w.rho.is_empty() {
            return Err(invalid("singular weight needs rho"));
        }
    }
    match w.rho_min() {
        Some(rl) => {
            let end = rl.sqrt();
            if let Some(u) = upper {
                if (u - end).abs() > 1e-12 * end {
                    return Err(invalid("upper limit must equal sqrt(rho_min) for damped or singular weights"));
                }
            }
            finite_endpoint(p, w, rl, cfg)
        }
        None => match upper {
            Some(u) if u.is_finite() => {
                if !(u > 0.0) {
                    return Err(invalid("upper limit must be positive"));
                }
                undamped_finite(p, w, u, cfg)
            }
            _ => undamped_infinite(p, w, cfg),
        },
    }
}

fn cutoff_factor(cfg: &OscConfig, lambda: f64) -> f64 {
    cfg.cutoff.map_or(1.0, |c| c.bump.cutoff(lambda / c.scale))
}

fn cutoff_breaks(cfg: &OscConfig) -> Vec<f64> {
    cfg.cutoff.map_or(vec![], |c| vec![c.scale, 2.0 * c.scale])
}

fn real_axis_integrand<'a>(p: &'a PhaseLambda, w: &'a DampedWeight, cfg: &'a OscConfig) -> impl Fn(f64) -> Complex64 + 'a {
    move |l: f64| {
        let g = cutoff_factor(cfg, l);
        if g == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let wt = match w.kind {
            WeightKind::Unit => 1.0,
            WeightKind::Kato { k } => {
                let s = p.sigma[k];
                if s == 0.0 { 1.0 } else { l / (l * l + s).sqrt() }
            }
            WeightKind::Singular { k } => l / (w.rho[k] - l * l).sqrt(),
        };
        let damp: f64 = w.rho.iter().zip(&w.c).map(|(r, c)| c * (r - l * l).max(0.0).sqrt()).sum();
        Complex64::from_polar(g * wt * (-damp).exp(), p.phase(l))
    }
}

fn bulk_breaks(p: &PhaseLambda, a: f64, b: f64, cfg: &OscConfig) -> Result<Vec<f64>> {
    let mut br = oscillation_panels(a, b, |l| p.rate(l), cfg.h_max, cfg.max_initial_panels)?;
    let mut extra = cutoff_breaks(cfg);
    if p.sign == Sign::Minus {
        if let Some(l0) = critical_point_lambda(p)? {
            extra.push(l0);
            // Stationary window of width ~ |φ″(λ₀)|^{-1/2}, at least the cubic scale.
            if let Ok([_, _, d2, d3]) = p.derivatives(l0) {
                let mut delta = 1.0 / d2.abs().max(1e-300).sqrt();
                if d3 != 0.0 {
                    delta = delta.min(d3.abs().powf(-1.0 / 3.0));
                }
                let delta = delta.min(cfg.h_max);
                extra.extend([l0 - delta, l0 + delta]);
            }
        }
    }
    br = merge_breaks(br, extra);
    Ok(br)
}

fn undamped_finite(p: &PhaseLambda, w: &DampedWeight, upper: f64, cfg: &OscConfig) -> Result<Quad<Complex64>> {
    let f = real_axis_integrand(p, w, cfg);
    let top = cfg.cutoff.map_or(upper, |c| upper.min(2.0 * c.scale));
    let br = bulk_breaks(p, 0.0, top, cfg)?;
    checked(integrate(&f, &br, &cfg.quad), &cfg.quad)
}

fn undamped_infinite(p: &PhaseLambda, w: &DampedWeight, cfg: &OscConfig) -> Result<Quad<Complex64>> {
    if let Some(c) = cfg.cutoff {
        return undamped_finite(p, w, 2.0 * c.scale, cfg);
    }
    // Real segment [0, Λ], then the vertical ray Λ + is on which
    // |integrand| ≤ |weight| e^{−(Λ − Σb)s}.
    let sum_b = if p.sign == Sign::Minus { p.sum_b() } else { 0.0 };
    let big = sum_b + 3.0;
    let f = real_axis_integrand(p, w, cfg);
    let br = bulk_breaks(p, 0.0, big, cfg)?;
    let head = checked(integrate(&f, &br, &cfg.quad), &cfg.quad)?;
    let rate = big - sum_b;
    let s_max = 40.0 / rate;
    let g = |s: f64| {
        let z = Complex64::new(big, s);
        let v = (Complex64::i() * phase_complex(p, z)).exp() * weight_complex(p, w, z);
        v * Complex64::i()
    };
    let mut rb = vec![0.0];
    let mut x = 0.02 / rate;
    while x < s_max {
        rb.push(x);
        x *= 2.0;
    }
    rb.push(s_max);
    let tail = checked(integrate(&g, &rb, &cfg.quad), &cfg.quad)?;
    Ok(head.combine(tail))
}

/// Integrand of the endpoint piece in u = √(ρ_ℓ − λ²), including the
/// Jacobian u/λ, the partition χ and the cutoff.
fn u_integrand<'a>(p: &'a PhaseLambda, w: &'a DampedWeight, rl: f64, cfg: &'a OscConfig) -> impl Fn(f64) -> Complex64 + 'a {
    let root = rl.sqrt();
    move |u: f64| {
        let u2 = u * u;
        let lam2 = rl - u2;
        let lam = lam2.max(0.0).sqrt();
        let chi = cfg.chi.chi(lam / root) * cutoff_factor(cfg, lam);
        if chi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let jac_w = match w.kind {
            WeightKind::Unit => u / lam,
            WeightKind::Kato { k } => u / (lam2 + p.sigma[k]).sqrt(),
            WeightKind::Singular { k } => u / ((w.rho[k] - rl) + u2).sqrt(),
        };
        let damp: f64 = w.rho.iter().zip(&w.c).map(|(r, c)| c * ((r - rl) + u2).sqrt()).sum();
        let s: f64 = p.b.iter().zip(&p.sigma).map(|(b, sg)| b * ((rl + sg) - u2).sqrt()).sum();
        let phase = 0.5 * lam2 + p.sign.value() * s;
        let v = chi * (-damp).exp();
        // Singular weight with k = ℓ at u = 0 is 0/0 → limit 1.
        let jw = if jac_w.is_nan() { 1.0 } else { jac_w };
        Complex64::from_polar(v * jw, phase)
    }
}

fn u_rate(p: &PhaseLambda, rl: f64, u: f64) -> f64 {
    let s = p.sign.value();
    let (mut a, mut c) = (0.0, 0.0);
    for (&b, &sg) in p.b.iter().zip(&p.sigma) {
        let q = (rl + sg) - u * u;
        a += b / q.sqrt();
        c += b * u * u / (q * q.sqrt());
    }
    let d1 = u * (1.0 + s * a);
    let d2 = 1.0 + s * a + s * c;
    d1.abs() + d2.abs().sqrt()
}

fn finite_endpoint(p: &PhaseLambda, w: &DampedWeight, rl: f64, cfg: &OscConfig) -> Result<Quad<Complex64>> {
    let root = rl.sqrt();
    let f = real_axis_integrand(p, w, cfg);
    let chi = cfg.chi;
    let bulk_f = |l: f64| f(l) * (1.0 - chi.chi(l / root));
    let br = bulk_breaks(p, 0.0, 0.5 * root, cfg)?;
    let br = merge_breaks(br, [0.25 * root]);
    let bulk = checked(integrate(&bulk_f, &br, &cfg.quad), &cfg.quad)?;
    let tail = match cfg.tail {
        TailRoute::USubstitution => {
            let g = u_integrand(p, w, rl, cfg);
            let u_max = (rl - rl / 16.0).sqrt();
            let mut ub = oscillation_panels(0.0, u_max, |u| u_rate(p, rl, u), cfg.h_max, cfg.max_initial_panels)?;
            let mut extra: Vec<f64> = w.rho.iter().map(|r| (r - rl).sqrt()).collect();
            extra.extend(w.c.iter().map(|c| 1.0 / c));
            extra.push((rl - 0.25 * rl).sqrt());
            if let Some(c) = cfg.cutoff {
                for x in [c.scale, 2.0 * c.scale] {
                    if x < root {
                        extra.push((rl - x * x).sqrt());
                    }
                }
            }
            ub = merge_breaks(ub, extra);
            checked(integrate(&g, &ub, &cfg.quad), &cfg.quad)?
        }
        TailRoute::Direct => {
            // λ = √ρ_ℓ(1 − v²); the weight and damping are rebuilt from
            // ρ_i − λ² = (ρ_i − ρ_ℓ) + ρ_ℓ v²(2 − v²) to keep the endpoint exact.
            let g = |v: f64| {
                let v2 = v * v;
                let lam = root * (1.0 - v2);
                let gap = rl * v2 * (2.0 - v2);
                let chi_v = chi.chi(lam / root) * cutoff_factor(cfg, lam);
                if chi_v == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let jac = 2.0 * root * v;
                let wt = match w.kind {
                    WeightKind::Unit => jac,
                    WeightKind::Kato { k } => jac * lam / (lam * lam + p.sigma[k]).sqrt(),
                    WeightKind::Singular { k } => {
                        let d = (w.rho[k] - rl) + gap;
                        if d == 0.0 { 2.0 * root / (rl * 2.0).sqrt() * lam / root } else { jac * lam / d.sqrt() }
                    }
                };
                let damp: f64 = w.rho.iter().zip(&w.c).map(|(r, c)| c * ((r - rl) + gap).sqrt()).sum();
                Complex64::from_polar(chi_v * wt * (-damp).exp(), p.phase(lam))
            };
            let v_max = 0.75f64.sqrt();
            let rate = |v: f64| {
                let lam = root * (1.0 - v * v);
                p.rate(lam) * 2.0 * root * v + 1.0
            };
            let mut vb = oscillation_panels(0.0, v_max, rate, cfg.h_max, cfg.max_initial_panels)?;
            let mut extra: Vec<f64> = w.rho.iter().map(|r| ((r - rl) / rl).sqrt().min(1.0).sqrt() * 0.5).collect();
            extra.extend(w.c.iter().map(|c| (1.0 / (c * root)).sqrt()));
            extra.push(0.5f64.sqrt());
            vb = merge_breaks(vb, extra);
            checked(integrate(&g, &vb, &cfg.quad), &cfg.quad)?
        }
    };
    Ok(bulk.combine(tail))
}

/// Bound families, each with its own fitted constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundFamily {
    /// Kato weight, no damping.
    Bound1,
    /// Unit weight.
    Bound1Unit,
    /// Kato weight with damping.
    Bound2,
    /// Singular weight.
    Bound3,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 4] = [BoundFamily::Bound1, BoundFamily::Bound1Unit, BoundFamily::Bound2, BoundFamily::Bound3];

    pub fn of(w: &DampedWeight) -> Self {
        match w.kind {
            WeightKind::Unit => BoundFamily::Bound1Unit,
            WeightKind::Kato { .. } if w.is_damped() => BoundFamily::Bound2,
            WeightKind::Kato { .. } => BoundFamily::Bound1,
            WeightKind::Singular { .. } => BoundFamily::Bound3,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            BoundFamily::Bound1 => "bound1",
            BoundFamily::Bound1Unit => "bound1_unit",
            BoundFamily::Bound2 => "bound2",
            BoundFamily::Bound3 => "bound3",
        }
    }
}

/// Right-hand side of the oscillatory bound selected by the weight.
pub fn bound_osc1(p: &PhaseLambda, w: &DampedWeight, c0: f64) -> f64 {
    let growth = (1.0 + p.sigma_max() + w.rho_min().unwrap_or(0.0)).powf(0.25);
    let m32 = (p.m().max(1) as f64).powf(1.5);
    let max_b = p.b.iter().copied().fold(0.0, f64::max);
    match w.kind {
        WeightKind::Unit => c0 * growth,
        WeightKind::Kato { k } => c0 * growth.min(m32 * max_b / p.b[k]),
        WeightKind::Singular { k } => {
            if w.c.is_empty() {
                return c0 * growth;
            }
            let max_c = w.c.iter().copied().fold(0.0, f64::max);
            c0 * growth.min(m32 * (max_b + max_c) / w.c[k])
        }
    }
}

/// Oscillatory integral together with its bound for constant `c0`.
pub fn osc_integral_lambda(p: &PhaseLambda, w: &DampedWeight, upper: Option<f64>, c0: f64, cfg: &OscConfig) -> Result<OscResult> {
    let q = osc_value(p, w, upper, cfg)?;
    Ok(OscResult::new(q, bound_osc1(p, w, c0)))
}

/// I_L(a, t) = ∫₀^∞ e^{itλ} sin(a√λ) ψ(√λ/L) dλ
///           = 2∫₀^{2L} μ e^{itμ²} sin(aμ) ψ(μ/L) dμ,
/// with bound c·t^{−3/2}|a|.
pub fn osc_integral_statphase(a: f64, t: f64, big_l: f64, bump: Bump, c: f64, quad: &QuadConfig) -> Result<OscResult> {
    if !(t >= 1.0) || !(big_l >= 1.0) || !a.is_finite() {
        return Err(invalid("statphase needs t >= 1, L >= 1 and finite a"));
    }
    let bound = c * t.powf(-1.5) * a.abs();
    if a == 0.0 {
        return Ok(OscResult { value: Complex64::new(0.0, 0.0), quad_error: 0.0, bound, ratio: 0.0 });
    }
    let f = |mu: f64| Complex64::from_polar(2.0 * mu * (a * mu).sin() * bump.cutoff(mu / big_l), t * mu * mu);
    let top = 2.0 * big_l;
    let rate = |mu: f64| 2.0 * t * mu + a.abs() + (2.0 * t).sqrt();
    let br = oscillation_panels(0.0, top, rate, 0.25, 10_000_000)?;
    let br = merge_breaks(br, [big_l]);
    let q = checked(integrate(&f, &br, quad), quad)?;
    Ok(OscResult::new(q, bound))
}

/// Parameter families swept when certifying the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepFamily {
    /// Undamped phases on [0, ∞), unit or Kato weight, optionally with a cutoff.
    Lambda,
    /// Damped phases up to √ρ_ℓ, reached through the u-substitution.
    U,
    /// The sine-weighted stationary-phase integral I_L(a, t).
    StatPhase,
}

impl SweepFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lambda" => Some(SweepFamily::Lambda),
            "u" => Some(SweepFamily::U),
            "statphase" => Some(SweepFamily::StatPhase),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepFamily::Lambda => "lambda",
            SweepFamily::U => "u",
            SweepFamily::StatPhase => "statphase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepCase {
    Phase { phase: PhaseLambda, weight: DampedWeight, cutoff: Option<Cutoff> },
    StatPhase { a: f64, t: f64, big_l: f64 },
}

fn log_uniform<R: rand::Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Nonnegative spectral shift: zero with probability 0.1, otherwise
/// log-uniform on [1e−2, 1e4].
fn shift<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<f64>() < 0.1 { 0.0 } else { log_uniform(rng, 1e-2, 1e4) }
}

/// Case `index` of a sweep; depends only on (family, seed, index).
pub fn sweep_case(family: SweepFamily, seed: u64, index: u64) -> SweepCase {
    use rand::Rng;
    let mut rng = crate::mc::stream(seed, index);
    if family == SweepFamily::StatPhase {
        let a = log_uniform(&mut rng, 0.1, 10.0);
        let t = log_uniform(&mut rng, 1.0, 100.0);
        let big_l = [1.0, 4.0, 16.0][rng.random_range(0..3)];
        return SweepCase::StatPhase { a, t, big_l };
    }
    let m = rng.random_range(1..=8usize);
    let sign = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
    let b: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, 1e-2, 1e2)).collect();
    let mut pairs: Vec<(f64, f64)> = b.into_iter().map(|bj| (bj, shift(&mut rng))).collect();
    pairs.sort_by(|x, y| y.1.total_cmp(&x.1));
    let (b, sigma): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let k = rng.random_range(0..m);
    match family {
        SweepFamily::Lambda => {
            let roll = rng.random::<f64>();
            if roll < 0.2 {
                let scale = log_uniform(&mut rng, 1.0, 30.0);
                let phase = PhaseLambda::new(Sign::Plus, b, sigma).unwrap();
                let cutoff = Some(Cutoff { bump: Bump::Smoothstep, scale });
                SweepCase::Phase { phase, weight: DampedWeight::unit(), cutoff }
            } else {
                let weight = if roll < 0.5 { DampedWeight::unit() } else { DampedWeight::kato(k) };
                SweepCase::Phase { phase: PhaseLambda::new(sign, b, sigma).unwrap(), weight, cutoff: None }
            }
        }
        SweepFamily::U => {
            let ell = rng.random_range(1..=4usize);
            let mut rho: Vec<f64> = (0..ell).map(|_| log_uniform(&mut rng, 1e-2, 1e4)).collect();
            rho.sort_by(|x, y| y.total_cmp(x));
            let c: Vec<f64> = (0..ell).map(|_| log_uniform(&mut rng, 1e-2, 1e2)).collect();
            let roll = rng.random::<f64>();
            let kind = if roll < 0.5 {
                WeightKind::Singular { k: rng.random_range(0..ell) }
            } else if roll < 0.8 {
                WeightKind::Kato { k }
            } else {
                WeightKind::Unit
            };
            let weight = DampedWeight::new(kind, rho, c).unwrap();
            SweepCase::Phase { phase: PhaseLambda::new(sign, b, sigma).unwrap(), weight, cutoff: None }
        }
        SweepFamily::StatPhase => unreachable!(),
    }
}

impl SweepCase {
    /// Constant family used to scale this case's bound.
    pub fn bound_key(&self) -> &'static str {
        match self {
            SweepCase::Phase { weight, .. } => BoundFamily::of(weight).key(),
            SweepCase::StatPhase { .. } => "statphase",
        }
    }

    /// Evaluates with unit constant, so `ratio` is the constant this case needs.
    pub fn evaluate(&self, cfg: &OscConfig) -> Result<OscResult> {
        match self {
            SweepCase::Phase { phase, weight, cutoff } => {
                let c = OscConfig { cutoff: *cutoff, ..*cfg };
                osc_integral_lambda(phase, weight, None, 1.0, &c)
            }
            SweepCase::StatPhase { a, t, big_l } => {
                // The sine-weighted integrand has a roundoff floor near 5e−12.
                let quad = QuadConfig { abs_tol: cfg.quad.abs_tol.max(1e-10), ..cfg.quad };
                osc_integral_statphase(*a, *t, *big_l, Bump::Smoothstep, 1.0, &quad)
            }
        }
    }

    /// Flattened parameters: sign, m, weight, k, b, sigma, rho, c, cutoff
    /// (lists joined by ';').
    pub fn csv_fields(&self) -> Vec<String> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(";");
        match self {
            SweepCase::Phase { phase, weight, cutoff } => {
                let (wname, k) = match weight.kind() {
                    WeightKind::Unit => ("unit", String::new()),
                    WeightKind::Kato { k } => ("kato", k.to_string()),
                    WeightKind::Singular { k } => ("singular", k.to_string()),
                };
                vec![
                    if phase.sign() == Sign::Plus { "+" } else { "-" }.to_string(),
                    phase.m().to_string(),
                    wname.to_string(),
                    k,
                    list(phase.b()),
                    list(phase.sigma()),
                    list(weight.rho()),
                    list(weight.c()),
                    cutoff.map_or(String::new(), |c| format!("{:.12e}", c.scale)),
                ]
            }
            SweepCase::StatPhase { a, t, big_l } => vec![
                String::new(),
                String::new(),
                "statphase".into(),
                String::new(),
                format!("a={a:.12e}"),
                format!("t={t:.12e}"),
                String::new(),
                String::new(),
                format!("{big_l:.12e}"),
            ],
        }
    }
}

pub const SWEEP_CSV_HEADER: &str = "index,family,bound_family,sign,m,weight,k,b,sigma,rho,c,cutoff,value_re,value_im,quad_error,bound,ratio";

/// Evaluates cases `start..start+count` in parallel; output order is the
/// index order.
pub fn run_sweep(family: SweepFamily, seed: u64, start: u64, count: usize, cfg: &OscConfig) -> Vec<(u64, SweepCase, Result<OscResult>)> {
    crate::parallel::map_range(count, |i| {
        let idx = start + i as u64;
        let case = sweep_case(family, seed, idx);
        let r = case.evaluate(cfg);
        (idx, case, r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> OscConfig {
        OscConfig::default()
    }

    #[test]
    fn critical_points_lambda_examples() {
        let p = PhaseLambda::new(Sign::Minus, vec![1.0], vec![0.0]).unwrap();
        assert!((critical_point_lambda(&p).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let p = PhaseLambda::new(Sign::Minus, vec![2.0], vec![3.0]).unwrap();
        assert!((critical_point_lambda(&p).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let p = PhaseLambda::new(Sign::Minus, vec![1.0], vec![4.0]).unwrap();
        assert_eq!(critical_point_lambda(&p).unwrap(), None);
        let p = PhaseLambda::new(Sign::Plus, vec![1.0], vec![4.0]).unwrap();
        assert!(critical_point_lambda(&p).is_err());
    }

    #[test]
    fn critical_points_u_examples() {
        let p = PhaseU::new(vec![1.0], vec![5.0]).unwrap();
        assert!((critical_point_u(&p).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(critical_point_u(&PhaseU::new(vec![3.0], vec![4.0]).unwrap()), None);
        // Σb/√τ = 0.05 < 1: the root sits at √(τ − b²).
        let u0 = critical_point_u(&PhaseU::new(vec![0.1], vec![4.0]).unwrap()).unwrap();
        assert!((u0 - 3.99f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let p = PhaseLambda::new(Sign::Minus, vec![1.0], vec![0.0]).unwrap();
        for l in [0.3, 1.0, 2.5] {
            assert!((p.derivatives(l).unwrap()[1] - (l - 1.0)).abs() < 1e-15);
        }
        let p = PhaseLambda::new(Sign::Minus, vec![0.7, 0.4], vec![2.0, 0.5]).unwrap();
        let (l, h) = (1.3, 1e-5);
        let fd = (p.phase(l + h) - p.phase(l - h)) / (2.0 * h);
        assert!((fd - p.derivatives(l).unwrap()[1]).abs() < 1e-8);
    }

    #[test]
    fn degenerate_example_fourth_derivative() {
        // σ_j = m² b_j² makes φ′, φ″, φ‴ vanish at 0; the fourth derivative is
        // 3 Σ b_j/σ_j^{3/2} = (3/m³) Σ b_j^{−2}.
        let p = PhaseLambda::new(Sign::Minus, vec![1.0, 1.0], vec![4.0, 4.0]).unwrap();
        let d = p.derivatives(0.0).unwrap();
        assert!(d[1].abs() < 1e-15 && d[2].abs() < 1e-15 && d[3].abs() < 1e-15);
        let h = 1e-4;
        let fourth = (p.derivatives(h).unwrap()[3] - (-p.derivatives(h).unwrap()[3])) / (2.0 * h);
        assert!((fourth - 0.75).abs() < 1e-6, "{fourth}");
    }

    #[test]
    fn fresnel_oracle() {
        let p = PhaseLambda::new(Sign::Plus, vec![], vec![]).unwrap();
        let q = osc_value(&p, &DampedWeight::unit(), None, &cfg()).unwrap();
        let exact = Complex64::from_polar((PI / 2.0).sqrt(), PI / 4.0);
        assert!((q.value - exact).norm() < 1e-9, "{:?}", q.value);
    }

    #[test]
    fn plane_wave_shift_oracle() {
        // σ = 0: φ = λ²/2 ± bλ, a shifted Fresnel integral with an erfc-free
        // check via the symmetric sum over both signs.
        let b = 0.8;
        let plus = PhaseLambda::new(Sign::Plus, vec![b], vec![0.0]).unwrap();
        let minus = PhaseLambda::new(Sign::Minus, vec![b], vec![0.0]).unwrap();
        let ip = osc_value(&plus, &DampedWeight::unit(), None, &cfg()).unwrap().value;
        let im = osc_value(&minus, &DampedWeight::unit(), None, &cfg()).unwrap().value;
        // ∫_{−∞}^{∞} e^{i(λ²/2 + bλ)} dλ = √(2π) e^{iπ/4} e^{−ib²/2}.
        let exact = Complex64::from_polar((2.0 * PI).sqrt(), PI / 4.0 - b * b / 2.0);
        assert!((ip + im - exact).norm() < 1e-9);
    }

    #[test]
    fn damped_singular_closed_form() {
        // No phase dependence on b: ∫₀^{√ρ} e^{iλ²/2} e^{−c√(ρ−λ²)} λ/√(ρ−λ²) dλ
        // = ∫₀^{√ρ} e^{i(ρ−u²)/2} e^{−cu} du, compared against direct 1D quadrature in u.
        let (rho, c) = (4.0, 10.0);
        let p = PhaseLambda::new(Sign::Plus, vec![], vec![]).unwrap();
        let w = DampedWeight::new(WeightKind::Singular { k: 0 }, vec![rho], vec![c]).unwrap();
        let v = osc_value(&p, &w, Some(2.0), &cfg()).unwrap().value;
        let f = |u: f64| Complex64::from_polar((-c * u).exp(), 0.5 * (rho - u * u));
        let oracle = integrate(&f, &[0.0, 0.1, 0.5, 2.0], &QuadConfig::default()).value;
        assert!((v - oracle).norm() < 1e-10);
        assert!(v.norm() <= 1.0 / c);
    }

    #[test]
    fn tail_routes_agree() {
        let p = PhaseLambda::new(Sign::Minus, vec![0.9, 0.3], vec![3.0, 0.2]).unwrap();
        for w in [
            DampedWeight::new(WeightKind::Singular { k: 1 }, vec![6.0, 2.5], vec![0.7, 0.2]).unwrap(),
            DampedWeight::new(WeightKind::Singular { k: 0 }, vec![6.0, 2.5], vec![0.7, 0.2]).unwrap(),
            DampedWeight::new(WeightKind::Kato { k: 0 }, vec![9.0], vec![1.5]).unwrap(),
            DampedWeight::new(WeightKind::Unit, vec![9.0], vec![]).unwrap(),
        ] {
            let a = osc_value(&p, &w, None, &cfg()).unwrap();
            let c = OscConfig { tail: TailRoute::Direct, ..cfg() };
            let b = osc_value(&p, &w, None, &c).unwrap();
            assert!((a.value - b.value).norm() <= 1e-8 + 10.0 * (a.error + b.error), "{:?} {:?}", a.value, b.value);
        }
    }

    #[test]
    fn chi_bump_independence() {
        let p = PhaseLambda::new(Sign::Plus, vec![0.5], vec![1.0]).unwrap();
        let w = DampedWeight::new(WeightKind::Singular { k: 0 }, vec![16.0], vec![0.3]).unwrap();
        let a = osc_value(&p, &w, None, &cfg()).unwrap().value;
        let b = osc_value(&p, &w, None, &OscConfig { chi: Bump::Exponential, ..cfg() }).unwrap().value;
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn infinite_contour_matches_long_real_integral_with_weight() {
        // Moving the rotation point far out must not change the value.
        let p = PhaseLambda::new(Sign::Minus, vec![1.2], vec![2.0]).unwrap();
        let w = DampedWeight::kato(0);
        let a = osc_value(&p, &w, None, &cfg()).unwrap().value;
        let big = 40.0;
        let c = cfg();
        let f = real_axis_integrand(&p, &w, &c);
        let br = bulk_breaks(&p, 0.0, big, &c).unwrap();
        let head = integrate(&f, &br, &cfg().quad).value;
        let g = |s: f64| {
            let z = Complex64::new(big, s);
            (Complex64::i() * phase_complex(&p, z)).exp() * weight_complex(&p, &w, z) * Complex64::i()
        };
        let tail = integrate(&g, &[0.0, 0.01, 0.1, 1.0, 2.0], &cfg().quad).value;
        assert!((a - head - tail).norm() < 1e-8);
    }

    #[test]
    fn bound_examples() {
        let p = PhaseLambda::new(Sign::Minus, vec![1.0, 1.0], vec![15.0, 0.0]).unwrap();
        assert!((bound_osc1(&p, &DampedWeight::kato(0), 1.0) - 2.0).abs() < 1e-15);
        assert!((bound_osc1(&p, &DampedWeight::unit(), 1.0) - 2.0).abs() < 1e-15);
        let q = PhaseLambda::new(Sign::Minus, vec![2.0], vec![0.0]).unwrap();
        let w = DampedWeight::new(WeightKind::Singular { k: 0 }, vec![1e-300], vec![4.0]);
        // ρ_ℓ must be positive; use a tiny value so the growth factor is 1.
        let w = w.unwrap();
        let b = bound_osc1(&q, &w, 1.0);
        assert!((b - 1.0).abs() < 1e-12, "{b}");
    }

    #[test]
    fn statphase_examples() {
        let quad = QuadConfig::default();
        assert_eq!(osc_integral_statphase(0.0, 3.0, 1.0, Bump::Smoothstep, 1.0, &quad).unwrap().value, Complex64::new(0.0, 0.0));
        let a = osc_integral_statphase(1.0, 2.0, 1.0, Bump::Smoothstep, 1.0, &quad).unwrap().value;
        let b = osc_integral_statphase(-1.0, 2.0, 1.0, Bump::Smoothstep, 1.0, &quad).unwrap().value;
        assert!((a + b).norm() < 1e-10);
        // Fine-grid Gauss–Legendre oracle on the original variable λ.
        let (x, wts) = crate::quadrature::gauss_legendre(20);
        let (t, l) = (4.0, 1.0);
        let n = 4000;
        let h = 4.0 * l * l / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let a0 = i as f64 * h;
            for (xi, wi) in x.iter().zip(&wts) {
                let lam = a0 + 0.5 * h * (xi + 1.0);
                let g = Bump::Smoothstep.cutoff(lam.sqrt() / l) * lam.sqrt().sin();
                acc += Complex64::from_polar(0.5 * h * wi * g, t * lam);
            }
        }
        let v = osc_integral_statphase(1.0, t, l, Bump::Smoothstep, 1.0, &quad).unwrap().value;
        assert!((v - acc).norm() < 1e-6, "{v} vs {acc}");
    }
}
