//! Spatial profiles, quasi-periodic time profiles and their separable product.

use crate::error::{invalid, Result};
use crate::mc::{norm, Point, Proposal};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Radial spatial profile V₀.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `values[i]` on (r_{i−1}, r_i] with r_{−1} = 0; zero beyond the last breakpoint.
    RadialPiecewise { breakpoints: Vec<f64>, values: Vec<f64> },
    /// amplitude · exp(−|x|²/width²).
    Gaussian { amplitude: f64, width: f64 },
    /// amplitude · (1 + |x|²/scale²)^{−1−eps}.
    InversePower { amplitude: f64, eps: f64, scale: f64 },
    /// amplitude on |x| ≤ radius.
    Ball { amplitude: f64, radius: f64 },
}

/// Immutable, validated spatial potential.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPotential {
    profile: Profile,
}

fn finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() { Ok(()) } else { Err(invalid(format!("{what} must be finite"))) }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 { Ok(()) } else { Err(invalid(format!("{what} must be positive and finite"))) }
}

impl SpatialPotential {
    pub fn new(profile: Profile) -> Result<Self> {
        match &profile {
            Profile::RadialPiecewise { breakpoints, values } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(invalid("piecewise profile needs one value per breakpoint"));
                }
                let mut prev = 0.0;
                for &r in breakpoints {
                    positive(r, "breakpoint")?;
                    if r <= prev {
                        return Err(invalid("breakpoints must be strictly increasing"));
                    }
                    prev = r;
                }
                for &v in values {
                    finite(v, "piecewise value")?;
                }
            }
            Profile::Gaussian { amplitude, width } => {
                finite(*amplitude, "amplitude")?;
                positive(*width, "width")?;
            }
            Profile::InversePower { amplitude, eps, scale } => {
                finite(*amplitude, "amplitude")?;
                positive(*eps, "eps")?;
                positive(*scale, "scale")?;
            }
            Profile::Ball { amplitude, radius } => {
                finite(*amplitude, "amplitude")?;
                positive(*radius, "radius")?;
            }
        }
        Ok(SpatialPotential { profile })
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self> {
        Self::new(Profile::Gaussian { amplitude, width })
    }

    pub fn ball(amplitude: f64, radius: f64) -> Result<Self> {
        Self::new(Profile::Ball { amplitude, radius })
    }

    pub fn inverse_power(amplitude: f64, eps: f64) -> Result<Self> {
        Self::new(Profile::InversePower { amplitude, eps, scale: 1.0 })
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(Profile::RadialPiecewise { breakpoints, values })
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// V₀ at radius r ≥ 0.
    pub fn radial(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::RadialPiecewise { breakpoints, values } => {
                let i = breakpoints.partition_point(|&b| b < r);
                values.get(i).copied().unwrap_or(0.0)
            }
            Profile::Gaussian { amplitude, width } => amplitude * (-(r / width).powi(2)).exp(),
            Profile::InversePower { amplitude, eps, scale } => {
                amplitude * (1.0 + (r / scale).powi(2)).powf(-1.0 - eps)
            }
            Profile::Ball { amplitude, radius } => {
                if r <= *radius { *amplitude } else { 0.0 }
            }
        }
    }

    /// |V₀(r)|.
    pub fn radial_abs(&self, r: f64) -> f64 {
        self.radial(r).abs()
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.radial(norm(x))
    }

    /// a·V₀.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        let profile = match &self.profile {
            Profile::RadialPiecewise { breakpoints, values } => Profile::RadialPiecewise {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| a * v).collect(),
            },
            Profile::Gaussian { amplitude, width } => Profile::Gaussian { amplitude: a * amplitude, width: *width },
            Profile::InversePower { amplitude, eps, scale } => {
                Profile::InversePower { amplitude: a * amplitude, eps: *eps, scale: *scale }
            }
            Profile::Ball { amplitude, radius } => Profile::Ball { amplitude: a * amplitude, radius: *radius },
        };
        Self::new(profile)
    }

    /// The critically rescaled potential R²·V₀(R·).
    pub fn rescaled(&self, big_r: f64) -> Result<Self> {
        positive(big_r, "rescaling factor")?;
        let r2 = big_r * big_r;
        let profile = match &self.profile {
            Profile::RadialPiecewise { breakpoints, values } => Profile::RadialPiecewise {
                breakpoints: breakpoints.iter().map(|b| b / big_r).collect(),
                values: values.iter().map(|v| r2 * v).collect(),
            },
            Profile::Gaussian { amplitude, width } => {
                Profile::Gaussian { amplitude: r2 * amplitude, width: width / big_r }
            }
            Profile::InversePower { amplitude, eps, scale } => {
                Profile::InversePower { amplitude: r2 * amplitude, eps: *eps, scale: scale / big_r }
            }
            Profile::Ball { amplitude, radius } => Profile::Ball { amplitude: r2 * amplitude, radius: radius / big_r },
        };
        Self::new(profile)
    }

    /// Radius outside which V₀ vanishes, if compactly supported.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.profile {
            Profile::RadialPiecewise { breakpoints, .. } => breakpoints.last().copied(),
            Profile::Ball { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Characteristic length of the profile.
    pub fn length_scale(&self) -> f64 {
        match &self.profile {
            Profile::RadialPiecewise { breakpoints, .. } => breakpoints[breakpoints.len() - 1],
            Profile::Gaussian { width, .. } => *width,
            Profile::InversePower { scale, .. } => *scale,
            Profile::Ball { radius, .. } => *radius,
        }
    }

    /// Radii where |V₀| is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.profile {
            Profile::RadialPiecewise { breakpoints, .. } => breakpoints.clone(),
            Profile::Ball { radius, .. } => vec![*radius],
            _ => Vec::new(),
        }
    }

    /// Whether |V₀| is non-increasing in the radius.
    pub fn is_radially_nonincreasing(&self) -> bool {
        match &self.profile {
            Profile::RadialPiecewise { values, .. } => {
                let mut prev = f64::INFINITY;
                for v in values.iter().map(|v| v.abs()) {
                    if v > prev {
                        return false;
                    }
                    prev = v;
                }
                true
            }
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.profile {
            Profile::RadialPiecewise { values, .. } => values.iter().all(|v| *v == 0.0),
            Profile::Gaussian { amplitude, .. }
            | Profile::InversePower { amplitude, .. }
            | Profile::Ball { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// sup |V₀|.
    pub fn sup_abs(&self) -> f64 {
        match &self.profile {
            Profile::RadialPiecewise { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Profile::Gaussian { amplitude, .. }
            | Profile::InversePower { amplitude, .. }
            | Profile::Ball { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Isotropic sampling density covering the support, independent of the
    /// amplitude so that the zero potential samples like any other.
    pub fn proposal(&self) -> Proposal {
        match &self.profile {
            Profile::RadialPiecewise { breakpoints, .. } => {
                Proposal::UniformBall { radius: breakpoints[breakpoints.len() - 1] }
            }
            Profile::Ball { radius, .. } => Proposal::UniformBall { radius: *radius },
            Profile::Gaussian { width, .. } => Proposal::Gaussian { sigma: width / 2f64.sqrt() },
            Profile::InversePower { scale, .. } => Proposal::Pareto { scale: *scale },
        }
    }
}

/// One atom c·e^{2πi·freq·t} of a time profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub freq: f64,
    pub coeff: Complex64,
}

impl Atom {
    pub fn new(freq: f64, coeff: Complex64) -> Self {
        Atom { freq, coeff }
    }

    /// Angular frequency 2π·freq.
    pub fn angular(&self) -> f64 {
        2.0 * PI * self.freq
    }
}

/// φ(t) = Σ c·e^{2πi·freq·t} over finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    atoms: Vec<Atom>,
}

impl TimeProfile {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !(a.freq.is_finite() && a.coeff.re.is_finite() && a.coeff.im.is_finite()) {
                return Err(invalid("time atoms must be finite"));
            }
        }
        Ok(TimeProfile { atoms })
    }

    /// The single atom (0, 1).
    pub fn constant() -> Self {
        TimeProfile { atoms: vec![Atom::new(0.0, Complex64::new(1.0, 0.0))] }
    }

    /// cos(ω t) as two atoms ±ω/2π with weight ½.
    pub fn cosine(omega: f64) -> Self {
        let f = omega / (2.0 * PI);
        let h = Complex64::new(0.5, 0.0);
        TimeProfile { atoms: vec![Atom::new(f, h), Atom::new(-f, h)] }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.atoms
            .iter()
            .map(|a| a.coeff * Complex64::from_polar(1.0, a.angular() * t))
            .sum()
    }

    /// Total-variation mass Σ|c| of the time Fourier transform.
    pub fn fourier_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.coeff.norm()).sum()
    }

    /// True when φ is real: the summed coefficient at −f is the conjugate of
    /// the summed coefficient at f, for every frequency present.
    pub fn is_real(&self, tol: f64) -> bool {
        let at = |f: f64| -> Complex64 {
            self.atoms.iter().filter(|a| (a.freq - f).abs() <= tol).map(|a| a.coeff).sum()
        };
        self.atoms.iter().all(|a| (at(a.freq) - at(-a.freq).conj()).norm() <= tol * (1.0 + at(a.freq).norm()))
    }
}

/// V(t, x) = φ(t)·V₀(x) with real φ.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePotential {
    time: TimeProfile,
    space: SpatialPotential,
}

impl SeparablePotential {
    pub fn new(time: TimeProfile, space: SpatialPotential) -> Result<Self> {
        if !time.is_real(1e-12) {
            return Err(invalid("time profile must be real: atoms need conjugate-frequency partners"));
        }
        Ok(SeparablePotential { time, space })
    }

    pub fn time_independent(space: SpatialPotential) -> Self {
        SeparablePotential { time: TimeProfile::constant(), space }
    }

    pub fn time(&self) -> &TimeProfile {
        &self.time
    }

    pub fn space(&self) -> &SpatialPotential {
        &self.space
    }

    pub fn eval(&self, t: f64, x: Point) -> f64 {
        self.phi(t) * self.space.eval(x)
    }

    /// Real time factor φ(t).
    pub fn phi(&self, t: f64) -> f64 {
        self.time.eval(t).re
    }

    pub fn fourier_mass(&self) -> f64 {
        self.time.fourier_mass()
    }

    /// Upper bound Σ|c|·sup|V₀| for sup_{t,x}|V|.
    pub fn sup_bound(&self) -> f64 {
        self.fourier_mass() * self.space.sup_abs()
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Ok(SeparablePotential { time: self.time.clone(), space: self.space.scaled(a)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ball_inside_and_outside() {
        let v = SeparablePotential::time_independent(SpatialPotential::ball(1.0, 1.0).unwrap());
        assert_eq!(v.eval(0.0, [0.5, 0.0, 0.0]), 1.0);
        assert_eq!(v.eval(0.0, [2.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn cosine_gaussian_at_pi() {
        let v = SeparablePotential::new(TimeProfile::cosine(1.0), SpatialPotential::gaussian(1.0, 1.0).unwrap()).unwrap();
        assert!((v.eval(PI, [0.0; 3]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fourier_mass_examples() {
        assert_eq!(TimeProfile::constant().fourier_mass(), 1.0);
        assert_eq!(TimeProfile::cosine(2.0).fourier_mass(), 1.0);
        let p = TimeProfile::new(vec![
            Atom::new(0.0, c(0.3, 0.0)),
            Atom::new(1.0, c(0.0, 0.7)),
            Atom::new(2.0, c(-0.2, 0.0)),
        ])
        .unwrap();
        assert!((p.fourier_mass() - 1.2).abs() < 1e-15);
        assert!(!p.is_real(1e-12));
    }

    #[test]
    fn left_continuity_at_breakpoints() {
        let v = SpatialPotential::piecewise(vec![1.0, 2.0], vec![3.0, -1.0]).unwrap();
        assert_eq!(v.radial(1.0), 3.0);
        assert_eq!(v.radial(1.0 + 1e-12), -1.0);
        assert_eq!(v.radial(2.0), -1.0);
        assert_eq!(v.radial(2.0 + 1e-12), 0.0);
        assert_eq!(v.radial(0.0), 3.0);
    }

    #[test]
    fn rejects_invalid_profiles() {
        assert!(SpatialPotential::inverse_power(1.0, 0.0).is_err());
        assert!(SpatialPotential::inverse_power(1.0, -0.5).is_err());
        assert!(SpatialPotential::piecewise(vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SpatialPotential::gaussian(1.0, 0.0).is_err());
        let complex = TimeProfile::new(vec![Atom::new(0.3, c(1.0, 0.0))]).unwrap();
        assert!(SeparablePotential::new(complex, SpatialPotential::ball(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn rescaling_is_critical() {
        let v = SpatialPotential::gaussian(1.5, 0.8).unwrap();
        let w = v.rescaled(2.0).unwrap();
        for r in [0.0, 0.3, 1.1] {
            assert!((w.radial(r) - 4.0 * v.radial(2.0 * r)).abs() < 1e-14);
        }
        let p = SpatialPotential::inverse_power(1.0, 0.3).unwrap();
        let q = p.rescaled(5.0).unwrap();
        assert!((q.radial(0.7) - 25.0 * p.radial(3.5)).abs() < 1e-12);
    }

    #[test]
    fn real_profile_accepts_conjugate_pairs() {
        let p = TimeProfile::new(vec![
            Atom::new(0.5, c(0.2, 0.3)),
            Atom::new(-0.5, c(0.2, -0.3)),
            Atom::new(0.0, c(1.0, 0.0)),
        ])
        .unwrap();
        assert!(p.is_real(1e-12));
        for t in [0.0, 0.37, 2.5] {
            assert!(p.eval(t).im.abs() < 1e-14);
        }
    }
}
