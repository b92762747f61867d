//! Sorkin's scenario: Alice kicks with e^{−isφ(h)} in K⁻, Charlie applies a
//! Kraus map for φ(f) in K, Bob reads ⟨e^{itφ(g)}⟩ in K⁺ spacelike to Alice.

use crate::format::g17;
use crate::kraus::{chi, KrausError, KrausFamily};
use crate::propagators::continuum::{continuum_w_matrix, delta_apply, delta_pairing_gl, Bump, GlSpec, TestFunction, WOptions};
use crate::propagators::{causet_retarded_green, pair_w, sj_modes, ModeBasis, PairingContext, PropagatorError, PropagatorSet};
use crate::spacetime::{complement, CausalSet, ContinuumRegion, Event2D, InOut, SpacetimeError, Transitivity};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScenarioError {
    #[error("no Sorkin scenario: {0}")]
    NoScenario(String),
    #[error("invalid scenario input: {0}")]
    Invalid(String),
    #[error("scenario invariant violated: {0}")]
    Invariant(String),
    #[error("grid field is not a wave-equation solution: residual {residual}")]
    NotASolution { residual: f64 },
    #[error("scenario has no vacuum pairings (massless continuum)")]
    NoVacuum,
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Kraus(#[from] KrausError),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error("parse error: {0}")]
    Parse(String),
}

/// |Δf| below this counts as zero when scanning for Alice and Bob.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Spacetime, lab and test functions.
#[derive(Debug, Clone)]
pub enum Lab {
    Causet {
        causet: CausalSet,
        mass: f64,
        density: f64,
        k: Vec<usize>,
        f: Vec<f64>,
        h: Vec<f64>,
        g: Vec<f64>,
        alice: usize,
        bob: usize,
    },
    Continuum { mass: f64, k: ContinuumRegion, f: Bump, h: Bump, g: Bump },
}

#[derive(Debug, Clone)]
pub struct SorkinScenario {
    pub lab: Lab,
    pub d_fg: f64,
    pub d_fh: f64,
    pub d_gh: f64,
    /// Vacuum pairings; absent for massless continuum labs.
    pub ctx: Option<PairingContext>,
    pub validated: Vec<String>,
}

impl SorkinScenario {
    pub fn ctx(&self) -> Result<&PairingContext, ScenarioError> {
        self.ctx.as_ref().ok_or(ScenarioError::NoVacuum)
    }

    fn check_invariants(&self, tol: f64) -> Result<(), ScenarioError> {
        if self.d_gh.abs() > tol {
            return Err(ScenarioError::Invariant(format!("Δ(g,h) = {} is not zero", self.d_gh)));
        }
        if self.d_fg.abs() <= tol {
            return Err(ScenarioError::Invariant(format!("Δ(f,g) = {} vanishes", self.d_fg)));
        }
        if self.d_fh.abs() <= tol {
            return Err(ScenarioError::Invariant(format!("Δ(f,h) = {} vanishes", self.d_fh)));
        }
        Ok(())
    }

    /// key=value document; causet labs embed the causet text after a `causet` line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|&x| g17(x)).collect::<Vec<_>>().join(",");
        match &self.lab {
            Lab::Causet { causet, mass, density, k, f, h, g, alice, bob } => {
                let _ = writeln!(s, "scenario kind=causet");
                let _ = writeln!(s, "mass={}", g17(*mass));
                let _ = writeln!(s, "density={}", g17(*density));
                let _ = writeln!(s, "k={}", k.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
                let _ = writeln!(s, "f={}", list(f));
                let _ = writeln!(s, "h={}", list(h));
                let _ = writeln!(s, "g={}", list(g));
                let _ = writeln!(s, "alice={alice}");
                let _ = writeln!(s, "bob={bob}");
                self.write_scalars(&mut s);
                let _ = write!(s, "{}", causet.to_text());
            }
            Lab::Continuum { mass, k, f, h, g } => {
                let _ = writeln!(s, "scenario kind=continuum");
                let _ = writeln!(s, "mass={}", g17(*mass));
                let r = match *k {
                    ContinuumRegion::Rect { t0, t1, x0, x1 } => format!("rect:{},{},{},{}", g17(t0), g17(t1), g17(x0), g17(x1)),
                    ContinuumRegion::Diamond { u0, u1, v0, v1 } => format!("diamond:{},{},{},{}", g17(u0), g17(u1), g17(v0), g17(v1)),
                };
                let _ = writeln!(s, "k={r}");
                for (name, b) in [("f", f), ("h", h), ("g", g)] {
                    let _ = writeln!(s, "{name}={},{},{},{}", g17(b.center.t), g17(b.center.x), g17(b.radius), g17(b.amplitude));
                }
                self.write_scalars(&mut s);
            }
        }
        s
    }

    fn write_scalars(&self, s: &mut String) {
        let _ = writeln!(s, "d_fg={}", g17(self.d_fg));
        let _ = writeln!(s, "d_fh={}", g17(self.d_fh));
        let _ = writeln!(s, "d_gh={}", g17(self.d_gh));
        if let Some(c) = &self.ctx {
            let _ = writeln!(s, "w_ff={}", g17(c.w_ff));
            let _ = writeln!(s, "w_gg={}", g17(c.w_gg));
            let _ = writeln!(s, "w_fg={},{}", g17(c.w_fg.re), g17(c.w_fg.im));
            let _ = writeln!(s, "w_gf={},{}", g17(c.w_gf.re), g17(c.w_gf.im));
        }
        let _ = writeln!(s, "validated={}", self.validated.join(";"));
    }

    pub fn from_text(text: &str) -> Result<Self, ScenarioError> {
        let perr = |m: &str| ScenarioError::Parse(m.to_string());
        let (head, causet_text) = match text.find("\ncauset ") {
            Some(i) => (&text[..i], Some(&text[i + 1..])),
            None => (text, None),
        };
        let mut kv = std::collections::BTreeMap::new();
        let mut lines = head.lines();
        let first = lines.next().ok_or_else(|| perr("empty document"))?;
        let kind = first.strip_prefix("scenario kind=").ok_or_else(|| perr("missing `scenario kind=` header"))?;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| perr(&format!("bad line `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| perr(&format!("missing key `{k}`")));
        let num = |k: &str| -> Result<f64, ScenarioError> { get(k)?.parse().map_err(|_| perr(&format!("bad number for `{k}`"))) };
        let floats = |s: &str| -> Result<Vec<f64>, ScenarioError> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',').map(|x| x.trim().parse().map_err(|_| perr(&format!("bad number `{x}`")))).collect()
        };
        let cplx = |k: &str| -> Result<Complex64, ScenarioError> {
            let v = floats(get(k)?)?;
            if v.len() != 2 {
                return Err(perr(&format!("`{k}` needs re,im")));
            }
            Ok(Complex64::new(v[0], v[1]))
        };
        let ctx = if kv.contains_key("w_ff") {
            Some(PairingContext::new(
                num("d_fg")?,
                num("d_fh")?,
                num("d_gh")?,
                num("w_ff")?,
                num("w_gg")?,
                cplx("w_fg")?,
                cplx("w_gf")?,
            )?)
        } else {
            None
        };
        let validated = kv.get("validated").map(|v| v.split(';').filter(|x| !x.is_empty()).map(String::from).collect()).unwrap_or_default();
        let lab = match kind {
            "causet" => {
                let causet = CausalSet::from_text(causet_text.ok_or_else(|| perr("missing causet block"))?)?;
                let k = get("k")?
                    .split(',')
                    .filter(|x| !x.is_empty())
                    .map(|x| x.trim().parse().map_err(|_| perr("bad index in `k`")))
                    .collect::<Result<Vec<usize>, _>>()?;
                Lab::Causet {
                    causet,
                    mass: num("mass")?,
                    density: num("density")?,
                    k,
                    f: floats(get("f")?)?,
                    h: floats(get("h")?)?,
                    g: floats(get("g")?)?,
                    alice: num("alice")? as usize,
                    bob: num("bob")? as usize,
                }
            }
            "continuum" => {
                let bump = |k: &str| -> Result<Bump, ScenarioError> {
                    let v = floats(get(k)?)?;
                    if v.len() != 4 || !(v[2] > 0.0) {
                        return Err(perr(&format!("`{k}` needs t,x,radius,amplitude")));
                    }
                    Ok(Bump::new(Event2D::new(v[0], v[1]), v[2]).scaled(v[3]))
                };
                let kr = get("k")?;
                let (shape, nums) = kr.split_once(':').ok_or_else(|| perr("bad region"))?;
                let c = floats(nums)?;
                if c.len() != 4 {
                    return Err(perr("region needs four numbers"));
                }
                let k = match shape {
                    "rect" => ContinuumRegion::Rect { t0: c[0], t1: c[1], x0: c[2], x1: c[3] },
                    "diamond" => ContinuumRegion::Diamond { u0: c[0], u1: c[1], v0: c[2], v1: c[3] },
                    _ => return Err(perr(&format!("unknown region `{shape}`"))),
                };
                Lab::Continuum { mass: num("mass")?, k, f: bump("f")?, h: bump("h")?, g: bump("g")? }
            }
            other => return Err(perr(&format!("unknown scenario kind `{other}`"))),
        };
        Ok(Self { lab, d_fg: num("d_fg")?, d_fh: num("d_fh")?, d_gh: num("d_gh")?, ctx, validated })
    }
}

/// Budget for the Alice/Bob pair search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    /// Maximum candidate pairs examined.
    pub max_pairs: usize,
    /// Continuum scan lattice points per lightcone axis.
    pub grid: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_pairs: 1_000_000, grid: 24 }
    }
}

/// Δ·f on a causet.
pub fn causet_delta_apply(p: &PropagatorSet, f: &[f64]) -> Vec<f64> {
    let n = p.n();
    (0..n).map(|x| (0..n).map(|y| p.delta.read(x, y) * f[y]).sum()).collect()
}

/// Scenario on a causet with Alice and Bob as unit vectors at spacelike
/// points of K⁻ and K⁺ where Δf is nonzero.
pub fn build_causet_scenario(
    causet: &CausalSet,
    mass: f64,
    density: f64,
    f: &[f64],
    k: &[usize],
    budget: SearchBudget,
) -> Result<SorkinScenario, ScenarioError> {
    let n = causet.n_points();
    if f.len() != n {
        return Err(ScenarioError::Invalid(format!("f has {} entries for {n} points", f.len())));
    }
    if let Some(&bad) = k.iter().find(|&&z| z >= n) {
        return Err(ScenarioError::Invalid(format!("lab point {bad} out of range")));
    }
    let outside = complement(n, k);
    if let Some(&x) = outside.iter().find(|&&x| f[x] != 0.0) {
        return Err(ScenarioError::Invalid(format!("f is nonzero at {x}, outside K")));
    }
    if let Transitivity::Transitive = causet.is_transitive(k) {
        return Err(ScenarioError::NoScenario("K is transitive".into()));
    }
    let p = causet_retarded_green(causet, mass, density)?;
    let df = causet_delta_apply(&p, f);
    let k_in = causet.in_out_region(k, InOut::In);
    let k_out = causet.in_out_region(k, InOut::Out);
    let mut examined = 0usize;
    let mut best: Option<(usize, usize, f64)> = None;
    'scan: for &xm in &k_in {
        if df[xm].abs() <= SUPPORT_TOL {
            continue;
        }
        for &xp in &k_out {
            if examined >= budget.max_pairs {
                break 'scan;
            }
            examined += 1;
            if df[xp].abs() <= SUPPORT_TOL || !causet.spacelike(xm, xp) {
                continue;
            }
            let score = df[xm].abs().min(df[xp].abs());
            if best.map_or(true, |b| score > b.2) {
                best = Some((xm, xp, score));
            }
        }
    }
    let Some((alice, bob, _)) = best else {
        return Err(ScenarioError::NoScenario(format!("no spacelike pair in K∓ with Δf ≠ 0 among {examined} candidates")));
    };
    let mut h = vec![0.0; n];
    h[alice] = 1.0;
    let mut g = vec![0.0; n];
    g[bob] = 1.0;
    let modes = sj_modes(&p);
    let ctx = PairingContext::from_vectors(&p, &modes, f, &g, &h)?;
    let sc = SorkinScenario {
        lab: Lab::Causet { causet: causet.clone(), mass, density, k: k.to_vec(), f: f.to_vec(), h, g, alice, bob },
        d_fg: ctx.d_fg,
        d_fh: ctx.d_fh,
        d_gh: ctx.d_gh,
        ctx: Some(ctx),
        validated: vec!["non-transitive K".into(), "spacelike x± in K± ∩ supp Δf".into()],
    };
    sc.check_invariants(SUPPORT_TOL)?;
    Ok(sc)
}

/// The four-point causet A ≺ 1, 2 ≺ B with f = e₁ + e₂, K = {1, 2}.
pub fn four_point_causet() -> CausalSet {
    CausalSet::from_links(4, &[(0, 1), (2, 3)]).expect("valid links")
}

pub fn four_point_scenario() -> Result<SorkinScenario, ScenarioError> {
    build_causet_scenario(&four_point_causet(), 0.0, 1.0, &[0.0, 1.0, 1.0, 0.0], &[1, 2], SearchBudget::default())
}

/// Field sampled on a (u, v) lattice, `values[i][j]` at (u[i], v[j]).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl GridField {
    pub fn event(&self, i: usize, j: usize) -> Event2D {
        Event2D::from_lightcone(self.u[i], self.v[j])
    }

    /// Largest |φ(i+1,j+1) − φ(i+1,j) − φ(i,j+1) + φ(i,j)|, the discrete ∂_u∂_v.
    pub fn wave_residual(&self) -> f64 {
        let mut r = 0.0f64;
        for i in 0..self.u.len().saturating_sub(1) {
            for j in 0..self.v.len().saturating_sub(1) {
                let d = self.values[i + 1][j + 1] - self.values[i + 1][j] - self.values[i][j + 1] + self.values[i][j];
                r = r.max(d.abs());
            }
        }
        r
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Δf on an n×n lattice over [u0,u1]×[v0,v1].
pub fn sample_delta_f(f: &dyn TestFunction, mass: f64, u: (f64, f64), v: (f64, f64), n: usize, q: GlSpec) -> GridField {
    let us = linspace(u.0, u.1, n);
    let vs = linspace(v.0, v.1, n);
    let values = us.par_iter().map(|&uu| vs.iter().map(|&vv| delta_apply(f, mass, Event2D::from_lightcone(uu, vv), q)).collect()).collect();
    GridField { u: us, v: vs, values }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasslessDecomposition {
    /// U(u_i) = φ(u_i, v_0) − φ(u_0, v_0).
    pub u_part: Vec<f64>,
    /// V(v_j) = φ(u_0, v_j).
    pub v_part: Vec<f64>,
    pub residual: f64,
}

/// φ(u,v) = U(u) + V(v) on the lattice; errors when the residual exceeds `tol`.
pub fn massless_decompose(phi: &GridField, tol: f64) -> Result<MasslessDecomposition, ScenarioError> {
    if phi.u.is_empty() || phi.v.is_empty() {
        return Err(ScenarioError::Invalid("empty grid".into()));
    }
    let base = phi.values[0][0];
    let u_part: Vec<f64> = phi.values.iter().map(|row| row[0] - base).collect();
    let v_part: Vec<f64> = phi.values[0].clone();
    let mut residual = 0.0f64;
    for (i, row) in phi.values.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            residual = residual.max((x - u_part[i] - v_part[j]).abs());
        }
    }
    if residual > tol {
        return Err(ScenarioError::NotASolution { residual });
    }
    Ok(MasslessDecomposition { u_part, v_part, residual })
}

/// Lattice points of K⁺ (S₊) and K⁻ (S₋) where |φ| > tol.
#[derive(Debug, Clone, PartialEq)]
pub struct Strips {
    pub plus: Vec<(usize, usize)>,
    pub minus: Vec<(usize, usize)>,
    /// A mutually spacelike pair (S₊ point, S₋ point), if any.
    pub spacelike_pair: Option<((usize, usize), (usize, usize))>,
}

pub fn detect_strips(phi: &GridField, k: &ContinuumRegion, tol: f64) -> Strips {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for i in 0..phi.u.len() {
        for j in 0..phi.v.len() {
            if phi.values[i][j].abs() <= tol {
                continue;
            }
            let e = phi.event(i, j);
            if k.in_out(&e, InOut::Out) {
                plus.push((i, j));
            } else if k.in_out(&e, InOut::In) {
                minus.push((i, j));
            }
        }
    }
    let spacelike_pair = plus.iter().find_map(|&p| {
        let ep = phi.event(p.0, p.1);
        minus.iter().find(|&&m| ep.spacelike_to(&phi.event(m.0, m.1))).map(|&m| (p, m))
    });
    Strips { plus, minus, spacelike_pair }
}

/// Options for continuum scenario construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumOptions {
    pub budget: SearchBudget,
    /// Rule for Δf on the scan lattice.
    pub quad: GlSpec,
    /// Rule for the Δ pairings of the final scenario.
    pub pairing_quad: GlSpec,
    /// Alice/Bob bump radius relative to Charlie's.
    pub probe_radius: f64,
    /// Compute W pairings (requires m > 0).
    pub with_vacuum: bool,
    pub w_options: WOptions,
}

impl Default for ContinuumOptions {
    fn default() -> Self {
        Self { budget: SearchBudget::default(), quad: GlSpec::default(), pairing_quad: GlSpec { panels: 8, order: 16 }, probe_radius: 0.15, with_vacuum: false, w_options: WOptions::default() }
    }
}

/// Gap between the closed disk of radius r at e and the complement of K∓.
fn disk_inside(k: &ContinuumRegion, e: Event2D, r: f64, which: InOut) -> bool {
    let d = r * std::f64::consts::SQRT_2;
    [(-d, -d), (-d, d), (d, -d), (d, d)]
        .iter()
        .all(|&(du, dv)| k.in_out(&Event2D::from_lightcone(e.u() + du, e.v() + dv), which))
}

fn disks_spacelike(a: Event2D, b: Event2D, r: f64) -> bool {
    let d = 2.0 * r * std::f64::consts::SQRT_2;
    let (du, dv) = (b.u() - a.u(), b.v() - a.v());
    du * dv < 0.0 && du.abs() > d && dv.abs() > d
}

/// Continuum scenario for a bump f and a lab K ⊇ supp f, found by scanning Δf on
/// a lattice around K for mutually spacelike points of K⁺ and K⁻.
pub fn build_continuum_scenario(mass: f64, f: Bump, k: ContinuumRegion, opts: ContinuumOptions) -> Result<SorkinScenario, ScenarioError> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(PropagatorError::BadMass(mass).into());
    }
    let inside = (0..64).all(|i| {
        let a = i as f64 * std::f64::consts::TAU / 64.0;
        k.contains(&Event2D::new(f.center.t + f.radius * a.cos(), f.center.x + f.radius * a.sin()))
    });
    if !inside {
        return Err(ScenarioError::Invalid("supp f is not inside K".into()));
    }
    let (ku0, ku1, kv0, kv1) = match k {
        ContinuumRegion::Diamond { u0, u1, v0, v1 } => (u0, u1, v0, v1),
        ContinuumRegion::Rect { t0, t1, x0, x1 } => (t0 - x1, t1 - x0, t0 + x0, t1 + x1),
    };
    let span = (ku1 - ku0).max(kv1 - kv0);
    let grid = sample_delta_f(&f, mass, (ku0 - span, ku1 + span), (kv0 - span, kv1 + span), opts.budget.grid, opts.quad);
    let tol = SUPPORT_TOL * f.amplitude.abs().max(1.0);
    let strips = detect_strips(&grid, &k, tol);
    let r = opts.probe_radius * f.radius;
    let mut examined = 0usize;
    let mut best: Option<(Event2D, Event2D, f64)> = None;
    'scan: for &p in &strips.plus {
        let ep = grid.event(p.0, p.1);
        if !disk_inside(&k, ep, r, InOut::Out) {
            continue;
        }
        for &m in &strips.minus {
            if examined >= opts.budget.max_pairs {
                break 'scan;
            }
            examined += 1;
            let em = grid.event(m.0, m.1);
            if !disk_inside(&k, em, r, InOut::In) || !disks_spacelike(ep, em, r) {
                continue;
            }
            let score = grid.values[p.0][p.1].abs().min(grid.values[m.0][m.1].abs());
            if best.map_or(true, |b| score > b.2) {
                best = Some((ep, em, score));
            }
        }
    }
    let Some((bob_at, alice_at, _)) = best else {
        return Err(ScenarioError::NoScenario(format!("no spacelike pair in K∓ with Δf ≠ 0 among {examined} lattice candidates")));
    };
    let h = Bump::normalized(alice_at, r);
    let g = Bump::normalized(bob_at, r);
    let d_fg = delta_pairing_gl(&f, &g, mass, opts.pairing_quad);
    let d_fh = delta_pairing_gl(&f, &h, mass, opts.pairing_quad);
    let d_gh = delta_pairing_gl(&g, &h, mass, opts.pairing_quad);
    let ctx = if opts.with_vacuum {
        let w = continuum_w_matrix(&[&f as &dyn TestFunction, &g, &h], mass, opts.w_options)?;
        Some(PairingContext::with_tolerance(d_fg, d_fh, d_gh, w[0][0].re, w[1][1].re, w[0][1], w[1][0], 1e-6)?)
    } else {
        None
    };
    let sc = SorkinScenario {
        lab: Lab::Continuum { mass, k, f, h, g },
        d_fg,
        d_fh,
        d_gh,
        ctx,
        validated: vec!["spacelike x± in K± ∩ supp Δf".into(), "strips S± detected".into()],
    };
    sc.check_invariants(1e-10)?;
    Ok(sc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalScan {
    pub t: f64,
    pub s: Vec<f64>,
    pub chi: Vec<Complex64>,
    /// max_s |χ(s) − χ(0)|.
    pub max_gap: f64,
}

/// χ(s) over `s_grid`; the gap is measured against χ(0).
pub fn signal_scan(sc: &SorkinScenario, fam: &KrausFamily, t: f64, s_grid: &[f64]) -> Result<SignalScan, ScenarioError> {
    let ctx = sc.ctx()?;
    let chi0 = chi(fam, ctx, 0.0, t)?;
    let values = s_grid.par_iter().map(|&s| chi(fam, ctx, s, t)).collect::<Result<Vec<_>, _>>()?;
    let max_gap = values.iter().map(|c| (c - chi0).norm()).fold(0.0, f64::max);
    Ok(SignalScan { t, s: s_grid.to_vec(), chi: values, max_gap })
}

/// Number of t values in the witness scan.
pub const T_SCAN_POINTS: usize = 50;

/// t_k = c_k / (√W(f,f) |Δ(f,g)|), c_k evenly spaced in [0.1, 3].
pub fn witness_t_grid(ctx: &PairingContext) -> Vec<f64> {
    let scale = 1.0 / (ctx.w_ff.sqrt() * ctx.d_fg.abs());
    linspace(0.1, 3.0, T_SCAN_POINTS).into_iter().map(|c| c * scale).collect()
}

/// Largest-gap scan over the witness t grid.
pub fn acausality_scan(sc: &SorkinScenario, fam: &KrausFamily, s_grid: &[f64]) -> Result<SignalScan, ScenarioError> {
    let ts = witness_t_grid(sc.ctx()?);
    let scans = ts.iter().map(|&t| signal_scan(sc, fam, t, s_grid)).collect::<Result<Vec<_>, _>>()?;
    Ok(scans.into_iter().max_by(|a, b| a.max_gap.total_cmp(&b.max_gap)).expect("non-empty t grid"))
}

/// Bob's expectation with Alice's kick (lhs) and without (rhs) for Charlie's
/// kick e^{iφ(f)²} and Bob's e^{itφ(g)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi2ClosedForm {
    pub lhs: Complex64,
    pub rhs: Complex64,
}

impl Phi2ClosedForm {
    /// arg(lhs/rhs) = −2stΔ(f,g)Δ(f,h).
    pub fn phase(&self) -> f64 {
        (self.lhs / self.rhs).arg()
    }
}

/// rhs = e^{−W(g̃,g̃)/2} with g̃ = t(g − 2Δ(f,g)f); lhs = e^{−2istΔ(f,g)Δ(f,h)} rhs.
pub fn closed_form_phi2(ctx: &PairingContext, s: f64, t: f64) -> Phi2ClosedForm {
    let rhs = Complex64::new((-0.5 * t * t * ctx.w_gtilde()).exp(), 0.0);
    let lhs = Complex64::from_polar(1.0, -2.0 * s * t * ctx.d_fg * ctx.d_fh) * rhs;
    Phi2ClosedForm { lhs, rhs }
}

/// Same, with W(g̃,g̃) and the Δ pairings taken from the vectors.
pub fn closed_form_phi2_vectors(
    p: &PropagatorSet,
    modes: &ModeBasis,
    f: &[f64],
    g: &[f64],
    h: &[f64],
    s: f64,
    t: f64,
) -> Result<Phi2ClosedForm, ScenarioError> {
    let d_fg = crate::propagators::pair_delta(p, f, g)?;
    let d_fh = crate::propagators::pair_delta(p, f, h)?;
    let gt: Vec<f64> = g.iter().zip(f).map(|(&gi, &fi)| t * (gi - 2.0 * d_fg * fi)).collect();
    let w = pair_w(modes, &gt, &gt)?.re;
    let rhs = Complex64::new((-0.5 * w).exp(), 0.0);
    let lhs = Complex64::from_polar(1.0, -2.0 * s * t * d_fg * d_fh) * rhs;
    Ok(Phi2ClosedForm { lhs, rhs })
}

/// CSV with header `s,t,re(chi),im(chi)`.
pub fn chi_csv(rows: &[(f64, f64, Complex64)]) -> String {
    let mut out = String::from("s,t,re(chi),im(chi)\n");
    for &(s, t, c) in rows {
        let _ = writeln!(out, "{},{},{},{}", g17(s), g17(t), g17(c.re), g17(c.im));
    }
    out
}
