//! Seeded Monte-Carlo plumbing: independent streams, sharded estimators and
//! the isotropic proposal densities used against 1/r-type singularities.

use crate::parallel::map_range;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Fixed shard count: results depend on (seed, samples) only, never on the
/// number of worker threads.
pub const SHARDS: usize = 64;

pub type Point = [f64; 3];

/// Deterministic generator for stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean and standard error of a real-valued estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, std_error: 0.0, samples: 0 }
    }

    /// |self − other| in units of the combined standard error.
    pub fn z_score(&self, other: f64) -> f64 {
        let d = (self.mean - other).abs();
        if self.std_error == 0.0 {
            if d == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            d / self.std_error
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Estimate { mean: a * self.mean, std_error: a.abs() * self.std_error, samples: self.samples }
    }
}

/// Mean and standard error (of the modulus) of a complex estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub std_error: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct ComplexMoments {
    n: u64,
    sum: Complex64,
    sum_sq: f64,
}

fn shard_sizes(samples: u64) -> Vec<u64> {
    let base = samples / SHARDS as u64;
    let rem = samples % SHARDS as u64;
    (0..SHARDS as u64).map(|i| base + u64::from(i < rem)).collect()
}

/// Averages `f(rng)` over `samples` draws split across seeded shards.
pub fn estimate<F>(samples: u64, seed: u64, f: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let sizes = shard_sizes(samples);
    let parts = map_range(SHARDS, |i| {
        let mut rng = stream(seed, i as u64);
        let mut m = Moments::default();
        for _ in 0..sizes[i] {
            let v = f(&mut rng);
            m.n += 1;
            m.sum += v;
            m.sum_sq += v * v;
        }
        m
    });
    let mut tot = Moments::default();
    for p in parts {
        tot.n += p.n;
        tot.sum += p.sum;
        tot.sum_sq += p.sum_sq;
    }
    finish(tot)
}

fn finish(m: Moments) -> Estimate {
    if m.n == 0 {
        return Estimate { mean: 0.0, std_error: f64::INFINITY, samples: 0 };
    }
    let n = m.n as f64;
    let mean = m.sum / n;
    let var = if m.n > 1 { ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { f64::INFINITY };
    Estimate { mean, std_error: (var / n).sqrt(), samples: m.n }
}

/// Complex analogue of [`estimate`].
pub fn estimate_complex<F>(samples: u64, seed: u64, f: F) -> ComplexEstimate
where
    F: Fn(&mut ChaCha8Rng) -> Complex64 + Sync + Send,
{
    let sizes = shard_sizes(samples);
    let parts = map_range(SHARDS, |i| {
        let mut rng = stream(seed, i as u64);
        let mut m = ComplexMoments::default();
        for _ in 0..sizes[i] {
            let v = f(&mut rng);
            m.n += 1;
            m.sum += v;
            m.sum_sq += v.norm_sqr();
        }
        m
    });
    let mut tot = ComplexMoments::default();
    for p in parts {
        tot.n += p.n;
        tot.sum += p.sum;
        tot.sum_sq += p.sum_sq;
    }
    if tot.n == 0 {
        return ComplexEstimate { mean: Complex64::new(0.0, 0.0), std_error: f64::INFINITY, samples: 0 };
    }
    let n = tot.n as f64;
    let mean = tot.sum / n;
    let var = if tot.n > 1 {
        ((tot.sum_sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0)
    } else {
        f64::INFINITY
    };
    ComplexEstimate { mean, std_error: (var / n).sqrt(), samples: tot.n }
}

/// Uniform direction on the unit sphere.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Point {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

pub fn norm(x: Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub fn dist(x: Point, y: Point) -> f64 {
    norm([x[0] - y[0], x[1] - y[1], x[2] - y[2]])
}

/// Isotropic densities centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    /// Uniform in the ball of the given radius.
    UniformBall { radius: f64 },
    /// Product normal with per-axis standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Radial density (1/s)/(1+r/s)², heavy-tailed.
    Pareto { scale: f64 },
}

impl Proposal {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Proposal::UniformBall { radius } => {
                let r = radius * rng.random::<f64>().cbrt();
                let u = unit_vector(rng);
                [r * u[0], r * u[1], r * u[2]]
            }
            Proposal::Gaussian { sigma } => {
                let g = |rng: &mut R| sigma * rng.sample::<f64, _>(StandardNormal);
                [g(rng), g(rng), g(rng)]
            }
            Proposal::Pareto { scale } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let r = scale * (1.0 / u - 1.0);
                let d = unit_vector(rng);
                [r * d[0], r * d[1], r * d[2]]
            }
        }
    }

    pub fn pdf(&self, x: Point) -> f64 {
        let r = norm(x);
        match *self {
            Proposal::UniformBall { radius } => {
                if r <= radius { 3.0 / (4.0 * PI * radius.powi(3)) } else { 0.0 }
            }
            Proposal::Gaussian { sigma } => {
                (2.0 * PI * sigma * sigma).powf(-1.5) * (-r * r / (2.0 * sigma * sigma)).exp()
            }
            Proposal::Pareto { scale } => {
                if r == 0.0 {
                    return f64::INFINITY;
                }
                let g = 1.0 / (scale * (1.0 + r / scale).powi(2));
                g / (4.0 * PI * r * r)
            }
        }
    }
}

/// One component of a sampling mixture.
#[derive(Debug, Clone, Copy)]
pub enum Component {
    /// Isotropic proposal around the origin.
    Global(Proposal),
    /// Offset from `center` with uniform radius in [0, radius]: density
    /// 1/(4π·radius·|x−center|²), which cancels a 1/|x−center|² singularity.
    Shell { center: Point, radius: f64 },
}

impl Component {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Component::Global(p) => p.sample(rng),
            Component::Shell { center, radius } => {
                let r = radius * rng.random::<f64>();
                let u = unit_vector(rng);
                [center[0] + r * u[0], center[1] + r * u[1], center[2] + r * u[2]]
            }
        }
    }

    fn pdf(&self, x: Point) -> f64 {
        match *self {
            Component::Global(p) => p.pdf(x),
            Component::Shell { center, radius } => {
                let r = dist(x, center);
                if r == 0.0 {
                    f64::INFINITY
                } else if r <= radius {
                    1.0 / (4.0 * PI * radius * r * r)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Draws from a finite mixture; weights need not be normalised.
pub fn mixture_sample<R: Rng + ?Sized>(rng: &mut R, comps: &[(f64, Component)]) -> Point {
    let total: f64 = comps.iter().map(|c| c.0).sum();
    let mut u = rng.random::<f64>() * total;
    for (w, c) in comps {
        if u < *w {
            return c.sample(rng);
        }
        u -= w;
    }
    comps[comps.len() - 1].1.sample(rng)
}

/// Density of the mixture at `x`.
pub fn mixture_pdf(x: Point, comps: &[(f64, Component)]) -> f64 {
    let total: f64 = comps.iter().map(|c| c.0).sum();
    comps.iter().map(|(w, c)| w * c.pdf(x)).sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 1), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 1), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 2), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn estimate_of_uniform_mean() {
        let e = estimate(200_000, 3, |rng| rng.random::<f64>());
        assert!(e.z_score(0.5) < 4.0, "{e:?}");
        assert!((e.std_error - (1.0f64 / 12.0 / 200_000.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn proposals_integrate_to_one() {
        // E_q[p/q] = 1 with q = uniform ball of radius 12.
        for p in [
            Proposal::Gaussian { sigma: 0.7 },
            Proposal::UniformBall { radius: 2.0 },
        ] {
            let q = Proposal::UniformBall { radius: 12.0 };
            let e = estimate(400_000, 11, |rng| {
                let x = q.sample(rng);
                p.pdf(x) / q.pdf(x)
            });
            assert!(e.z_score(1.0) < 4.0, "{p:?} {e:?}");
        }
    }

    #[test]
    fn pareto_radial_law() {
        // P(|x| <= s) = 1/2 at r = scale.
        let p = Proposal::Pareto { scale: 1.5 };
        let e = estimate(100_000, 5, |rng| f64::from(u8::from(norm(p.sample(rng)) <= 1.5)));
        assert!(e.z_score(0.5) < 4.0);
    }

    #[test]
    fn shell_density_matches_sampler() {
        let comps = [(1.0, Component::Shell { center: [1.0, 0.0, 0.0], radius: 2.0 })];
        // E[1/pdf] over the shell support equals its volume.
        let e = estimate(200_000, 9, |rng| {
            let x = mixture_sample(rng, &comps);
            1.0 / mixture_pdf(x, &comps)
        });
        let vol = 4.0 / 3.0 * PI * 8.0;
        assert!((e.mean - vol).abs() < 5.0 * e.std_error, "{e:?} vs {vol}");
    }
}
