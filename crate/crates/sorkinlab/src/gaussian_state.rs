//! Ground-state functional calculus for a single smeared field: moments,
//! characteristic functions, the real density p, the complex density q,
//! Fourier and Weierstrass transforms, and ⟨ζ(φ(f)) e^{itφ(g)}⟩.
//!
//! Fourier convention: F{ζ}(t) = (2π)^{-1/2} ∫ e^{itx} ζ(x) dx.

use crate::quad::{integrate_with_breaks, QuadError, Tolerance};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GaussianError {
    #[error("degenerate width: W(f,f) = {0} must be > 0")]
    DegenerateWidth(f64),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Real Gaussian density of φ(f) in the vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDensityP {
    pub w_ff: f64,
}

impl GaussianDensityP {
    pub fn new(w_ff: f64) -> Result<Self, GaussianError> {
        if !(w_ff > 0.0) {
            return Err(GaussianError::DegenerateWidth(w_ff));
        }
        Ok(Self { w_ff })
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        (-lambda * lambda / (2.0 * self.w_ff)).exp() / (2.0 * PI * self.w_ff).sqrt()
    }
}

/// Parameters of q(λ), the density with ∫ζ(λ)q(λ)dλ = ⟨ζ(φ(f)) e^{itφ(g)}⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexDensityQ {
    pub w_ff: f64,
    pub w_gg: f64,
    pub w_fg: Complex64,
    pub t: f64,
}

impl ComplexDensityQ {
    pub fn new(w_ff: f64, w_gg: f64, w_fg: Complex64, t: f64) -> Result<Self, GaussianError> {
        if !(w_ff > 0.0) {
            return Err(GaussianError::DegenerateWidth(w_ff));
        }
        Ok(Self { w_ff, w_gg, w_fg, t })
    }

    /// Complex centre itW(f,g) of the shifted Gaussian.
    pub fn shift(&self) -> Complex64 {
        I * self.t * self.w_fg
    }

    /// e^{−t²W(g,g)/2}.
    pub fn prefactor(&self) -> f64 {
        (-0.5 * self.t * self.t * self.w_gg).exp()
    }
}

/// (n−1)!! W^{n/2} for even n, 0 for odd n.
pub fn moment(n: u32, w_ff: f64) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut df = 1.0;
    let mut k = n as i64 - 1;
    while k > 1 {
        df *= k as f64;
        k -= 2;
    }
    df * w_ff.powi(n as i32 / 2)
}

/// ⟨Ω|e^{itφ(f)}|Ω⟩.
pub fn char_fn(t: f64, w_ff: f64) -> f64 {
    (-0.5 * t * t * w_ff).exp()
}

pub fn density_q(ctx: &ComplexDensityQ, lambda: f64) -> Result<Complex64, GaussianError> {
    if !(ctx.w_ff > 0.0) {
        return Err(GaussianError::DegenerateWidth(ctx.w_ff));
    }
    let d = lambda - ctx.shift();
    Ok(ctx.prefactor() / (2.0 * PI * ctx.w_ff).sqrt() * (-(d * d) / (2.0 * ctx.w_ff)).exp())
}

/// e^{−(i/2)stΔ(f,g)} e^{−W(sf+tg, sf+tg)/2}, written through W(f,g) only:
/// the W(g,f) term is eliminated with W(g,f) = W(f,g) − iΔ(f,g).
pub fn bch_closed_form(ctx: &ComplexDensityQ, s: f64) -> Complex64 {
    let t = ctx.t;
    (-(0.5 * s * s * ctx.w_ff) - s * t * ctx.w_fg - 0.5 * t * t * ctx.w_gg).exp()
}

/// (2π)^{-1/2} ∫_lo^hi e^{itx} ζ(x) dx.
pub fn fourier<F>(zeta: &F, breaks: &[f64], lo: f64, hi: f64, t: f64) -> Result<Complex64, GaussianError>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let g = |x: f64| (I * t * x).exp() * zeta(x);
    Ok(integrate_with_breaks(&g, lo, hi, breaks, Tolerance::default())?.value / (2.0 * PI).sqrt())
}

/// (2π)^{-1/2} ∫_lo^hi e^{−itx} ζ̂(t) dt, the inverse of [`fourier`].
pub fn inverse_fourier<F>(zhat: &F, lo: f64, hi: f64, x: f64) -> Result<Complex64, GaussianError>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let g = |t: f64| (-I * t * x).exp() * zhat(t);
    Ok(integrate_with_breaks(&g, lo, hi, &[], Tolerance::default())?.value / (2.0 * PI).sqrt())
}

/// Window half-width in units of the kernel width.
const WEIERSTRASS_HALF: f64 = 14.0;

/// W{ζ}(z) = (4π)^{-1/2} ∫ e^{−(x−z)²/4} ζ(x) dx, integrated along the real
/// axis with the complex shift kept in the kernel.
pub fn weierstrass<F>(zeta: &F, breaks: &[f64], z: Complex64) -> Result<Complex64, GaussianError>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    // |kernel| ∝ e^{−(x−Re z)²/4}; the imaginary part only rescales it.
    let lo = z.re - WEIERSTRASS_HALF * 2.0;
    let hi = z.re + WEIERSTRASS_HALF * 2.0;
    let k = |x: f64| {
        let d = x - z;
        (-(d * d) / 4.0).exp() * zeta(x)
    };
    let tol = Tolerance { abs: 1e-14 * (z.im * z.im / 4.0).exp(), ..Tolerance::default() };
    Ok(integrate_with_breaks(&k, lo, hi, breaks, tol)?.value / (4.0 * PI).sqrt())
}

/// ∫ ζ(λ) q(λ) dλ with the window grown until the Gaussian tail is < 1e−12.
pub fn expect_zeta_exp<F>(zeta: &F, breaks: &[f64], ctx: &ComplexDensityQ) -> Result<Complex64, GaussianError>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    if !(ctx.w_ff > 0.0) {
        return Err(GaussianError::DegenerateWidth(ctx.w_ff));
    }
    let sd = ctx.w_ff.sqrt();
    let c = ctx.shift().re;
    let q = |l: f64| density_q(ctx, l).expect("width checked");
    let mut half = 10.0 * sd;
    loop {
        let tail = (q(c - half).norm() * zeta(c - half).norm().max(1.0)).max(q(c + half).norm() * zeta(c + half).norm().max(1.0)) * sd;
        if tail < 1e-12 || half > 1e3 * sd {
            break;
        }
        half *= 1.5;
    }
    let g = |l: f64| zeta(l) * q(l);
    let scale = ctx.prefactor() * ((ctx.t * ctx.w_fg.re).powi(2) / (2.0 * ctx.w_ff)).exp();
    let tol = Tolerance { abs: 1e-14 * scale.max(1e-300), ..Tolerance::default() };
    Ok(integrate_with_breaks(&g, c - half, c + half, breaks, tol)?.value)
}

/// e^{−t²W(g,g)/2} · W{ζ(√(W(f,f)/2) ·)}(it√(2/W(f,f)) W(f,g)).
pub fn expect_via_weierstrass<F>(zeta: &F, breaks: &[f64], ctx: &ComplexDensityQ) -> Result<Complex64, GaussianError>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    if !(ctx.w_ff > 0.0) {
        return Err(GaussianError::DegenerateWidth(ctx.w_ff));
    }
    let a = (ctx.w_ff / 2.0).sqrt();
    let z = I * ctx.t * (2.0 / ctx.w_ff).sqrt() * ctx.w_fg;
    let scaled = |x: f64| zeta(a * x);
    let b: Vec<f64> = breaks.iter().map(|&e| e / a).collect();
    Ok(ctx.prefactor() * weierstrass(&scaled, &b, z)?)
}
