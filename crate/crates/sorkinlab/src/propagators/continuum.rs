//! Pauli–Jordan and two-point pairings of compactly supported test functions
//! on 1+1 Minkowski space.
//!
//! Retarded kernel: G⁺(x,y) = ½ θ(t_x − t_y) θ(τ²) J₀(m τ) with
//! τ² = (t_x − t_y)² − (x_x − x_y)² = Δu Δv in lightcone coordinates
//! u = t − x, v = t + x. Δ(x,y) = G⁺(y,x) − G⁺(x,y).

use super::PropagatorError;
use crate::quad::composite_gl;
use crate::spacetime::Event2D;
use num_complex::Complex64;
use puruspe::Jn;
use rayon::prelude::*;
use std::f64::consts::PI;

/// A real test function with a known bounding box.
pub trait TestFunction: Sync {
    fn eval(&self, e: Event2D) -> f64;
    /// Bounding box (t0, t1, x0, x1) of the support.
    fn support_box(&self) -> (f64, f64, f64, f64);

    /// Bounding box (u0, u1, v0, v1) in lightcone coordinates.
    fn support_uv(&self) -> (f64, f64, f64, f64) {
        let (t0, t1, x0, x1) = self.support_box();
        (t0 - x1, t1 - x0, t0 + x0, t1 + x1)
    }

    /// Range of v on the support at fixed u (defaults to the box).
    fn v_chord(&self, _u: f64) -> Option<(f64, f64)> {
        let (_, _, v0, v1) = self.support_uv();
        Some((v0, v1))
    }

    /// Range of x on the support at fixed t (defaults to the box).
    fn x_chord(&self, _t: f64) -> Option<(f64, f64)> {
        let (_, _, x0, x1) = self.support_box();
        Some((x0, x1))
    }
}

/// A·exp(−1/(1−r²)) with r = |e − center|/radius, zero for r ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: Event2D,
    pub radius: f64,
    pub amplitude: f64,
}

/// ∫ exp(−1/(1−r²)) over the unit disk = π(e⁻¹ − E₁(1)).
pub const UNIT_BUMP_MASS: f64 = PI * (0.367_879_441_171_442_3 - 0.219_383_934_395_520_27);

impl Bump {
    pub fn new(center: Event2D, radius: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        Self { center, radius, amplitude: 1.0 }
    }

    /// Scaled to unit integral.
    pub fn normalized(center: Event2D, radius: f64) -> Self {
        let a = 1.0 / (UNIT_BUMP_MASS * radius * radius);
        Self { center, radius, amplitude: a }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { amplitude: self.amplitude * c, ..self }
    }
}

impl TestFunction for Bump {
    fn eval(&self, e: Event2D) -> f64 {
        let dt = (e.t - self.center.t) / self.radius;
        let dx = (e.x - self.center.x) / self.radius;
        let r2 = dt * dt + dx * dx;
        if r2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - r2)).exp()
        }
    }

    fn support_box(&self) -> (f64, f64, f64, f64) {
        let (c, r) = (self.center, self.radius);
        (c.t - r, c.t + r, c.x - r, c.x + r)
    }

    fn v_chord(&self, u: f64) -> Option<(f64, f64)> {
        // The disk has radius r√2 in (u, v).
        let du = u - self.center.u();
        let h2 = 2.0 * self.radius * self.radius - du * du;
        (h2 > 0.0).then(|| (self.center.v() - h2.sqrt(), self.center.v() + h2.sqrt()))
    }

    fn x_chord(&self, t: f64) -> Option<(f64, f64)> {
        let dt = t - self.center.t;
        let h2 = self.radius * self.radius - dt * dt;
        (h2 > 0.0).then(|| (self.center.x - h2.sqrt(), self.center.x + h2.sqrt()))
    }
}

/// G⁺ at separation d = x − y (½ inside the closed future cone, times J₀).
pub fn retarded_kernel(mass: f64, dt: f64, dx: f64) -> f64 {
    let tau2 = dt * dt - dx * dx;
    if dt < 0.0 || tau2 < 0.0 {
        return 0.0;
    }
    if mass == 0.0 {
        0.5
    } else {
        0.5 * Jn(0, mass * tau2.sqrt())
    }
}

/// Δ(x, y).
pub fn delta_kernel(mass: f64, x: Event2D, y: Event2D) -> f64 {
    retarded_kernel(mass, y.t - x.t, y.x - x.x) - retarded_kernel(mass, x.t - y.t, x.x - y.x)
}

/// Tensor Gauss–Legendre rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlSpec {
    pub panels: usize,
    pub order: usize,
}

impl Default for GlSpec {
    fn default() -> Self {
        Self { panels: 4, order: 16 }
    }
}

fn j0_of(mass: f64, du: f64, dv: f64) -> f64 {
    if mass == 0.0 {
        1.0
    } else {
        Jn(0, mass * (du * dv).abs().sqrt())
    }
}

/// (Δf)(x) = ∫ Δ(x,y) f(y) dy, integrated in lightcone coordinates where the
/// two cones of x are axis-aligned quadrants (dt dx = ½ du dv).
pub fn delta_apply(f: &dyn TestFunction, mass: f64, x: Event2D, q: GlSpec) -> f64 {
    let (ua, ub, va, vb) = f.support_uv();
    let (u, v) = (x.u(), x.v());
    let quadrant = |u0: f64, u1: f64, v0: f64, v1: f64| -> f64 {
        if u1 <= u0 || v1 <= v0 {
            return 0.0;
        }
        let (us, uw) = composite_gl(u0, u1, q.panels, q.order);
        let mut s = 0.0;
        for (&uy, &wu) in us.iter().zip(&uw) {
            let Some((c0, c1)) = f.v_chord(uy) else { continue };
            let (a, b) = (c0.max(v0), c1.min(v1));
            if b <= a {
                continue;
            }
            let (vs, vw) = composite_gl(a, b, q.panels, q.order);
            let mut inner = 0.0;
            for (&vy, &wv) in vs.iter().zip(&vw) {
                inner += wv * f.eval(Event2D::from_lightcone(uy, vy)) * j0_of(mass, uy - u, vy - v);
            }
            s += wu * inner;
        }
        0.25 * s
    };
    quadrant(u.max(ua), ub, v.max(va), vb) - quadrant(ua, u.min(ub), va, v.min(vb))
}

/// Δ(f,g) = ∫ f(x)(Δg)(x) dx with Gauss–Legendre rules on both levels.
pub fn delta_pairing_gl(f: &dyn TestFunction, g: &dyn TestFunction, mass: f64, q: GlSpec) -> f64 {
    let (t0, t1, _, _) = f.support_box();
    let (ts, tw) = composite_gl(t0, t1, q.panels, q.order);
    ts.par_iter()
        .zip(tw.par_iter())
        .map(|(&t, &wt)| {
            let Some((x0, x1)) = f.x_chord(t) else { return 0.0 };
            let (xs, xw) = composite_gl(x0, x1, q.panels, q.order);
            let mut s = 0.0;
            for (&x, &wx) in xs.iter().zip(&xw) {
                let e = Event2D::new(t, x);
                s += wx * f.eval(e) * delta_apply(g, mass, e, q);
            }
            wt * s
        })
        .sum()
}

/// Uniform-grid result with a half-spacing check.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPairing {
    /// Value at the finer spacing h/2.
    pub value: f64,
    /// Value at spacing h.
    pub coarse: f64,
    /// |value − coarse|.
    pub error_estimate: f64,
    pub warnings: Vec<String>,
}

/// Grid nodes (multiples of h) inside a support box, with nonzero values.
fn grid_samples(f: &dyn TestFunction, h: f64) -> Vec<(Event2D, f64)> {
    let (t0, t1, x0, x1) = f.support_box();
    let (i0, i1) = ((t0 / h).ceil() as i64, (t1 / h).floor() as i64);
    let (j0, j1) = ((x0 / h).ceil() as i64, (x1 / h).floor() as i64);
    let mut out = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let e = Event2D::new(i as f64 * h, j as f64 * h);
            let v = f.eval(e);
            if v != 0.0 {
                out.push((e, v));
            }
        }
    }
    out
}

fn grid_sum(fs: &[(Event2D, f64)], gs: &[(Event2D, f64)], mass: f64, h: f64) -> f64 {
    let s: f64 = fs
        .par_iter()
        .map(|&(x, fx)| gs.iter().map(|&(y, gy)| fx * gy * delta_kernel(mass, x, y)).sum::<f64>())
        .sum();
    s * h.powi(4)
}

/// Minimum grid nodes across a support before a coarseness warning.
pub const MIN_NODES_ACROSS: f64 = 8.0;

/// Trapezoidal double sum of f(x)Δ(x,y)g(y) on the lattice of spacing h,
/// repeated at h/2. Test functions vanish on their box edges, so the
/// trapezoid weights are uniform.
pub fn continuum_delta_pairing(f: &dyn TestFunction, g: &dyn TestFunction, mass: f64, h: f64) -> Result<GridPairing, PropagatorError> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(PropagatorError::BadMass(mass));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(PropagatorError::Unsupported(format!("grid spacing must be positive, got {h}")));
    }
    let mut warnings = Vec::new();
    for (name, func) in [("f", f), ("g", g)] {
        let (t0, t1, x0, x1) = func.support_box();
        let across = (t1 - t0).min(x1 - x0) / h;
        if across < MIN_NODES_ACROSS {
            warnings.push(format!("grid spacing {h} resolves the support of {name} with only {across:.1} nodes"));
        }
    }
    let coarse = grid_sum(&grid_samples(f, h), &grid_samples(g, h), mass, h);
    let hf = 0.5 * h;
    let value = grid_sum(&grid_samples(f, hf), &grid_samples(g, hf), mass, hf);
    Ok(GridPairing { value, coarse, error_estimate: (value - coarse).abs(), warnings })
}

/// Quadrature settings for the mass-shell integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WOptions {
    /// Spacetime rule per axis.
    pub space: GlSpec,
    /// |k| cut-off in units of 1/(smallest support half-width).
    pub k_max_scale: f64,
    /// k panel width in units of 1/(half-extent of the union of supports).
    pub k_panel_scale: f64,
    pub k_order: usize,
}

impl Default for WOptions {
    fn default() -> Self {
        Self { space: GlSpec { panels: 6, order: 16 }, k_max_scale: 60.0, k_panel_scale: 1.0, k_order: 8 }
    }
}

/// Test function on a chord-aligned rule: per t node, (x, weight·f) pairs.
struct Sampled {
    rows: Vec<(f64, Vec<(f64, f64)>)>,
}

fn sample(f: &dyn TestFunction, q: GlSpec) -> Sampled {
    let (t0, t1, _, _) = f.support_box();
    let (ts, tw) = composite_gl(t0, t1, q.panels, q.order);
    let mut rows = Vec::with_capacity(ts.len());
    for (&t, &wt) in ts.iter().zip(&tw) {
        let Some((x0, x1)) = f.x_chord(t) else { continue };
        let (xs, xw) = composite_gl(x0, x1, q.panels, q.order);
        let row = xs.iter().zip(&xw).map(|(&x, &wx)| (x, wt * wx * f.eval(Event2D::new(t, x)))).collect();
        rows.push((t, row));
    }
    Sampled { rows }
}

/// F[f](ω,k) = ∫ f(t,x) e^{i(ωt − kx)} dt dx.
fn fourier2(s: &Sampled, omega: f64, k: f64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (t, row) in &s.rows {
        let inner: Complex64 = row.iter().map(|&(x, w)| Complex64::from_polar(w, -k * x)).sum();
        total += Complex64::from_polar(1.0, omega * t) * inner;
    }
    total
}

/// W(f,g) = ∫ dk (4πω)⁻¹ F[f](ω,k)* F[g](ω,k), ω = √(k² + m²).
pub fn continuum_w_pairing(f: &dyn TestFunction, g: &dyn TestFunction, mass: f64, opts: WOptions) -> Result<Complex64, PropagatorError> {
    Ok(continuum_w_matrix(&[f, g], mass, opts)?[0][1])
}

/// All pairings W(fᵢ, fⱼ) from one shared set of Fourier samples.
pub fn continuum_w_matrix(fs: &[&dyn TestFunction], mass: f64, opts: WOptions) -> Result<Vec<Vec<Complex64>>, PropagatorError> {
    if mass == 0.0 {
        return Err(PropagatorError::Unsupported("massless continuum two-point function is infrared divergent".into()));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(PropagatorError::BadMass(mass));
    }
    let n = fs.len();
    let half = |b: (f64, f64, f64, f64)| (0.5 * (b.1 - b.0)).min(0.5 * (b.3 - b.2));
    let radii: Vec<f64> = fs.iter().map(|f| half(f.support_box())).collect();
    let r = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let kmax = opts.k_max_scale / r;
    // Each transform is cut at its own scale; beyond it the rule aliases.
    let cut: Vec<f64> = radii.iter().map(|ri| opts.k_max_scale / ri).collect();
    // Panels resolve the phase e^{ik·Δx} across the union of the supports.
    let (mut lo_t, mut hi_t, mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for f in fs {
        let (t0, t1, x0, x1) = f.support_box();
        (lo_t, hi_t, lo_x, hi_x) = (lo_t.min(t0), hi_t.max(t1), lo_x.min(x0), hi_x.max(x1));
    }
    let extent = (0.5 * (hi_t - lo_t)).max(0.5 * (hi_x - lo_x)).max(r);
    let panels = ((2.0 * kmax) / (opts.k_panel_scale / extent)).ceil() as usize;
    let (ks, kw) = composite_gl(-kmax, kmax, panels, opts.k_order);
    let samples: Vec<Sampled> = fs.iter().map(|f| sample(*f, opts.space)).collect();
    let zero = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let total = ks
        .par_iter()
        .zip(kw.par_iter())
        .fold(
            || zero.clone(),
            |mut acc, (&k, &w)| {
                let om = (k * k + mass * mass).sqrt();
                let fk: Vec<Complex64> = samples
                    .iter()
                    .zip(&cut)
                    .map(|(s, &c)| if k.abs() <= c { fourier2(s, om, k) } else { Complex64::new(0.0, 0.0) })
                    .collect();
                let c = w / (4.0 * PI * om);
                for i in 0..n {
                    for j in 0..n {
                        acc[i][j] += c * fk[i].conj() * fk[j];
                    }
                }
                acc
            },
        )
        .reduce(
            || zero.clone(),
            |mut a, b| {
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] += b[i][j];
                    }
                }
                a
            },
        );
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_bump_has_unit_mass() {
        let b = Bump::normalized(Event2D::new(0.3, -0.2), 0.7);
        let (t0, t1, x0, x1) = b.support_box();
        let _ = (x0, x1);
        let (ts, tw) = composite_gl(t0, t1, 4, 16);
        let mut s = 0.0;
        for (t, wt) in ts.iter().zip(&tw) {
            let (a, c) = b.x_chord(*t).unwrap();
            let (xs, xw) = composite_gl(a, c, 4, 16);
            for (x, wx) in xs.iter().zip(&xw) {
                s += wt * wx * b.eval(Event2D::new(*t, *x));
            }
        }
        assert!((s - 1.0).abs() < 1e-7, "{s}");
    }

    #[test]
    fn spacelike_supports_pair_to_zero() {
        let f = Bump::new(Event2D::new(0.0, 0.0), 0.5);
        let g = Bump::new(Event2D::new(0.0, 3.0), 0.5);
        let r = continuum_delta_pairing(&f, &g, 0.0, 0.1).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(delta_pairing_gl(&f, &g, 1.0, GlSpec::default()), 0.0);
    }

    #[test]
    fn massless_timelike_pairing_is_half_product_of_masses() {
        // Whole support of g is in the future cone of supp f.
        let f = Bump::normalized(Event2D::new(0.0, 0.0), 0.4);
        let g = Bump::normalized(Event2D::new(2.0, 0.0), 0.4);
        let v = delta_pairing_gl(&f, &g, 0.0, GlSpec::default());
        assert!((v - 0.5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn w_commutator_matches_delta() {
        let f = Bump::normalized(Event2D::new(0.0, 0.0), 0.5);
        let g = Bump::normalized(Event2D::new(1.5, 0.3), 0.5);
        let o = WOptions::default();
        let w = continuum_w_matrix(&[&f, &g], 1.0, o).unwrap();
        let (wff, wfg, wgf) = (w[0][0], w[0][1], w[1][0]);
        let fine = WOptions { space: GlSpec { panels: 10, order: 16 }, k_max_scale: 120.0, k_panel_scale: 0.5, k_order: 8 };
        assert!((continuum_w_pairing(&f, &g, 1.0, fine).unwrap() - wfg).norm() < 1e-9);
        let d = delta_pairing_gl(&f, &g, 1.0, GlSpec::default());
        assert!(d.abs() > 0.1);
        assert!((wfg - wgf - Complex64::new(0.0, d)).norm() < 1e-6);
        assert!(wff.re > 0.0 && wff.im.abs() < 1e-14);
        // same supports, same k rule
        let w3 = continuum_w_matrix(&[&f.scaled(3.0), &g], 1.0, o).unwrap();
        assert!((w3[0][0] - 9.0 * wff).norm() < 1e-12 * wff.norm());
        assert!((w3[0][1] - 3.0 * wfg).norm() < 1e-12 * wfg.norm());
    }

    #[test]
    fn w_requires_mass() {
        let f = Bump::new(Event2D::new(0.0, 0.0), 0.5);
        assert!(matches!(continuum_w_pairing(&f, &f, 0.0, WOptions::default()), Err(PropagatorError::Unsupported(_))));
    }
}
