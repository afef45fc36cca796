//! Closed-form kernels of the free Laplacian in three dimensions.

use crate::error::{invalid, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub lambda: f64,
    pub r: f64,
    pub branch: Branch,
}

fn require_positive_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(crate::error::Error::Domain(format!("kernel distance must be positive and finite, got {r}")))
    }
}

/// Boundary value (−Δ − λ ∓ i0)^{−1}(x, y) at |x − y| = r.
pub fn free_resolvent_kernel(p: KernelPoint) -> Result<Complex64> {
    require_positive_r(p.r)?;
    let inv = 1.0 / (4.0 * PI * p.r);
    if p.lambda < 0.0 {
        return Ok(Complex64::new((-(-p.lambda).sqrt() * p.r).exp() * inv, 0.0));
    }
    let phase = p.lambda.sqrt() * p.r;
    let z = Complex64::from_polar(inv, phase);
    Ok(match p.branch {
        Branch::Plus => z,
        Branch::Minus => z.conj(),
    })
}

/// Im R₊(λ)(r) = sin(√λ r)/(4πr) for λ > 0, zero otherwise.
///
/// This is the imaginary part of the outgoing resolvent; the spectral measure
/// density itself carries an extra 1/π.
pub fn spectral_density_kernel(lambda: f64, r: f64) -> Result<f64> {
    require_positive_r(r)?;
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    Ok((lambda.sqrt() * r).sin() / (4.0 * PI * r))
}

/// Kernel of e^{−it(−Δ)}: (4πit)^{−3/2} e^{ir²/(4t)}.
pub fn free_propagator_kernel(t: f64, r: f64) -> Result<Complex64> {
    if t == 0.0 || !t.is_finite() {
        return Err(crate::error::Error::Domain("free propagator needs t != 0".into()));
    }
    // (4πit)^{−3/2} on the principal branch: arg(it) = ±π/2.
    let modulus = (4.0 * PI * t.abs()).powf(-1.5);
    let arg = -1.5 * t.signum() * PI / 2.0 + r * r / (4.0 * t);
    Ok(Complex64::from_polar(modulus, arg))
}

/// Free propagator kernel at a complex time τ with Re τ ≥ 0, τ ≠ 0, continuing
/// (4πiτ)^{−3/2} e^{ir²/(4τ)} analytically from the real axis. Used for
/// contour-deformed time-domain oracles.
pub fn free_propagator_kernel_complex(tau: Complex64, r: f64) -> Complex64 {
    let i = Complex64::i();
    let w = 4.0 * PI * i * tau;
    // arg(w) ∈ (0, π) for Re τ > 0 ... principal powf stays continuous there.
    w.powf(-1.5) * (i * r * r / (4.0 * tau)).exp()
}

/// Zero-energy Green's function normalized as r^{−(n−2)}.
pub fn green_function(r: f64, n: u32) -> Result<f64> {
    require_positive_r(r)?;
    if n < 3 {
        return Err(invalid(format!("dimension must be at least 3, got {n}")));
    }
    Ok(r.powi(-(n as i32 - 2)))
}
