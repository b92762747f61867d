//! Two uncoupled oscillators in their ground state. Alice kicks with
//! e^{−isp̂_x}, Charlie measures either x̂+ŷ or its pure-point version O_ε,
//! Bob reads ⟨e^{itp̂_y}⟩.

use crate::format::g17;
use crate::gaussian_state::{weierstrass, GaussianError};
use crate::quad::{composite_gl, piecewise_gl};
use crate::resolutions::{r_t, Resolution, ResolutionError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OscError {
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("ε = {eps} is below the grid resolution (needs ≥ {min})")]
    BelowGrid { eps: f64, min: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// Tensor Gauss–Legendre grid. Each axis covers ±`half_width` around the
/// Gaussian centre with panels no longer than `max_panel`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscGrid {
    pub half_width: f64,
    pub max_panel: f64,
    pub order: usize,
    pub max_cells: usize,
}

impl Default for OscGrid {
    fn default() -> Self {
        Self { half_width: 10.0, max_panel: 0.5, order: 12, max_cells: 4096 }
    }
}

impl OscGrid {
    fn validate(&self) -> Result<(), OscError> {
        if !(self.half_width > 0.0 && self.max_panel > 0.0 && self.order >= 2 && self.max_cells > 0) {
            return Err(OscError::Grid(format!("{self:?}")));
        }
        Ok(())
    }

    /// Smallest cell width the grid resolves.
    pub fn min_cell(&self) -> f64 {
        2.0 * self.half_width / self.max_cells as f64
    }
}

/// ψ(x,y) = π^{-1/2} e^{−(x²+y²)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OscState {
    pub grid: OscGrid,
}

impl OscState {
    pub fn new(grid: OscGrid) -> Result<Self, OscError> {
        grid.validate()?;
        Ok(Self { grid })
    }

    pub fn psi(x: f64, y: f64) -> f64 {
        (-(x * x + y * y) / 2.0).exp() / PI.sqrt()
    }

    fn axis(&self, centre: f64) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.half_width;
        let panels = (2.0 * h / self.grid.max_panel).ceil() as usize;
        composite_gl(centre - h, centre + h, panels, self.grid.order)
    }

    /// ∫∫|ψ|².
    pub fn norm_sq(&self) -> f64 {
        let (xs, ws) = self.axis(0.0);
        let mut acc = 0.0;
        for (x, wx) in xs.iter().zip(&ws) {
            for (y, wy) in xs.iter().zip(&ws) {
                acc += wx * wy * Self::psi(*x, *y).powi(2);
            }
        }
        acc
    }

    /// e^{−t²/4} W{1_{R_{−t}}(·/√2)}(√2s − t/√2).
    pub fn chi_closed(&self, s: f64, t: f64, res: &Resolution) -> Result<Complex64, OscError> {
        let mu = s - t / 2.0;
        // the Weierstrass window is ±28 in its own variable, ±20 in v
        let set = r_t(res, -t, mu - 21.0, mu + 21.0)?;
        let breaks: Vec<f64> = set.endpoints().iter().map(|e| e * SQRT_2).collect();
        let zeta = |x: f64| if set.contains(x / SQRT_2) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        let z = Complex64::new(SQRT_2 * s - t / SQRT_2, 0.0);
        Ok((-t * t / 4.0).exp() * weierstrass(&zeta, &breaks, z)?)
    }

    /// ∫∫ 1[x+y and x+y+t share a bin] ψ(x−s,y) ψ(x−s,y+t) dx dy in
    /// u = (x−y)/2, v = x+y.
    pub fn chi_quadrature(&self, s: f64, t: f64, res: &Resolution) -> Result<Complex64, OscError> {
        let g = self.grid;
        let (us, wu) = self.axis((2.0 * s + t) / 4.0);
        let mu = s - t / 2.0;
        let (lo, hi) = (mu - g.half_width, mu + g.half_width);
        let mut breaks = res.edges_in(lo, hi);
        breaks.extend(res.edges_in(lo + t, hi + t).iter().map(|e| e - t));
        let (vs, wv) = piecewise_gl(lo, hi, &breaks, g.max_panel, g.order);
        let total: f64 = vs
            .par_iter()
            .zip(wv.par_iter())
            .map(|(&v, &w)| {
                if res.bin_index(v) != res.bin_index(v + t) {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (&u, &wu) in us.iter().zip(&wu) {
                    let (x, y) = (v / 2.0 + u, v / 2.0 - u);
                    acc += wu * Self::psi(x - s, y) * Self::psi(x - s, y + t);
                }
                w * acc
            })
            .sum();
        Ok(Complex64::new(total, 0.0))
    }

    /// Bob's χ after Charlie measures O_ε = Σ_k kε 1_{S_k}, with
    /// S_k = ∪_{n+m=k} [nε,(n+1)ε) × [mε,(m+1)ε).
    pub fn chi_pure_point(&self, s: f64, t: f64, eps: f64) -> Result<Complex64, OscError> {
        let g = self.grid;
        if !(eps >= g.min_cell()) {
            return Err(OscError::BelowGrid { eps, min: g.min_cell() });
        }
        let cells = |lo: f64, hi: f64, shift: f64| -> Vec<f64> {
            let first = ((lo + shift) / eps).floor() as i64;
            let last = ((hi + shift) / eps).ceil() as i64;
            (first..=last).map(|n| n as f64 * eps - shift).collect()
        };
        let panel = g.max_panel.min(eps);
        let (xlo, xhi) = (s - g.half_width, s + g.half_width);
        let (xs, wx) = piecewise_gl(xlo, xhi, &cells(xlo, xhi, 0.0), panel, g.order);
        let (ylo, yhi) = (-t / 2.0 - g.half_width, -t / 2.0 + g.half_width);
        let mut yb = cells(ylo, yhi, 0.0);
        yb.extend(cells(ylo, yhi, t));
        let (ys, wy) = piecewise_gl(ylo, yhi, &yb, panel, g.order);
        let k = |x: f64, y: f64| (x / eps).floor() as i64 + (y / eps).floor() as i64;
        let total: f64 = xs
            .par_iter()
            .zip(wx.par_iter())
            .map(|(&x, &w)| {
                let mut acc = 0.0;
                for (&y, &wy) in ys.iter().zip(&wy) {
                    if k(x, y) == k(x, y + t) {
                        acc += wy * Self::psi(x - s, y) * Self::psi(x - s, y + t);
                    }
                }
                w * acc
            })
            .sum();
        Ok(Complex64::new(total, 0.0))
    }

    /// (‖(x̂_ε − x̂)ψ‖, ‖(O_ε − x̂ − ŷ)ψ‖) with x̂_ε = ε⌊x̂/ε⌋.
    pub fn discretization_defects(&self, eps: f64) -> Result<(f64, f64), OscError> {
        let g = self.grid;
        if !(eps >= g.min_cell()) {
            return Err(OscError::BelowGrid { eps, min: g.min_cell() });
        }
        let h = g.half_width;
        let first = (-h / eps).floor() as i64;
        let last = (h / eps).ceil() as i64;
        let b: Vec<f64> = (first..=last).map(|n| n as f64 * eps).collect();
        let (xs, ws) = piecewise_gl(-h, h, &b, g.max_panel.min(eps), g.order);
        let step = |x: f64| eps * (x / eps).floor();
        let (mut dx, mut dsum) = (0.0, 0.0);
        for (&x, &wx) in xs.iter().zip(&ws) {
            for (&y, &wy) in xs.iter().zip(&ws) {
                let p = wx * wy * Self::psi(x, y).powi(2);
                dx += p * (step(x) - x).powi(2);
                dsum += p * (step(x) + step(y) - x - y).powi(2);
            }
        }
        Ok((dx.sqrt(), dsum.sqrt()))
    }
}

/// max_s |χ(s) − χ(s₀)| over a grid.
pub fn max_gap<F>(s_grid: &[f64], chi: F) -> Result<f64, OscError>
where
    F: Fn(f64) -> Result<Complex64, OscError>,
{
    let Some(&s0) = s_grid.first() else { return Ok(0.0) };
    let c0 = chi(s0)?;
    s_grid.iter().try_fold(0.0_f64, |m, &s| Ok(m.max((chi(s)? - c0).norm())))
}

/// CSV with columns `s,t,closed_re,closed_im,quad_re,quad_im,pure_point_re,pure_point_im`.
pub fn chi_curve_csv(rows: &[(f64, f64, Complex64, Complex64, Complex64)]) -> String {
    let mut out = String::from("s,t,closed_re,closed_im,quad_re,quad_im,pure_point_re,pure_point_im\n");
    for &(s, t, a, b, c) in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{},{}", g17(s), g17(t), g17(a.re), g17(a.im), g17(b.re), g17(b.im), g17(c.re), g17(c.im));
    }
    out
}
