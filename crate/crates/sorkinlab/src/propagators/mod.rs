//! Retarded and advanced Green matrices, the Pauli–Jordan matrix Δ and the
//! Sorkin–Johnston two-point function on causal sets, plus the corresponding
//! pairings on 1+1 Minkowski space in [`continuum`].

pub mod continuum;

pub use continuum::{continuum_delta_pairing, continuum_w_pairing};

use crate::format::g17;
use crate::linalg::{to_fc, to_nc, CMat, HermitianEigen, RMat};
use crate::spacetime::CausalSet;
use faer::complex_native::c64;
use faer::prelude::SpSolver;
use faer::Mat;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PropagatorError {
    #[error("density must be positive and finite, got {0}")]
    BadDensity(f64),
    #[error("mass must be finite and non-negative, got {0}")]
    BadMass(f64),
    #[error("resummation diverges: I - abC is singular (spectral radius of abC = {spectral_radius})")]
    Diverges { spectral_radius: f64 },
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("vector length {got} does not match {expected} points")]
    Length { got: usize, expected: usize },
    #[error("inconsistent pairings: W(f,g) - W(g,f) - iΔ(f,g) = {0}")]
    Inconsistent(f64),
    #[error("negative self-pairing W = {0}")]
    NegativeSelfPairing(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("matrix text: {0}")]
    Parse(String),
}

/// Chain-sum coefficient a of G⁺ = aC(I − abC)⁻¹ in two dimensions.
pub const COEFF_A: f64 = 0.5;

/// b = −m²/ρ.
pub fn coeff_b(mass: f64, density: f64) -> f64 {
    -mass * mass / density
}

#[derive(Debug, Clone)]
pub struct PropagatorSet {
    pub g_ret: RMat,
    pub g_adv: RMat,
    pub delta: RMat,
    pub mass: f64,
    pub density: f64,
    pub coeff_a: f64,
    pub coeff_b: f64,
}

impl PropagatorSet {
    pub fn n(&self) -> usize {
        self.delta.nrows()
    }
}

/// C[x][y] = 1 iff y ≺ x.
pub fn causal_matrix(cs: &CausalSet) -> RMat {
    let n = cs.n_points();
    Mat::from_fn(n, n, |x, y| if cs.precedes(y, x) { 1.0 } else { 0.0 })
}

fn spectral_radius(m: &RMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.eigenvalues::<c64>().iter().map(|z| to_nc(*z).norm()).fold(0.0, f64::max)
}

/// G = aC(I − abC)⁻¹ for an arbitrary square C.
pub fn retarded_from_matrix(c: &RMat, a: f64, b: f64) -> Result<RMat, PropagatorError> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(PropagatorError::NotSquare(n, c.ncols()));
    }
    if n == 0 {
        return Ok(RMat::zeros(0, 0));
    }
    let abc = Mat::from_fn(n, n, |i, j| a * b * c.read(i, j));
    let m = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - abc.read(i, j));
    let ev = m.eigenvalues::<c64>();
    let smallest = ev.iter().map(|z| to_nc(*z).norm()).fold(f64::INFINITY, f64::min);
    let scale = 1.0 + spectral_radius(&abc);
    if smallest <= 1e-12 * scale {
        return Err(PropagatorError::Diverges { spectral_radius: spectral_radius(&abc) });
    }
    let ac = Mat::from_fn(n, n, |i, j| a * c.read(i, j));
    let lu = m.partial_piv_lu();
    // aC(I − abC)⁻¹ = (I − abC)⁻¹aC since the factors commute.
    Ok(lu.solve(&ac))
}

pub fn causet_retarded_green(cs: &CausalSet, mass: f64, density: f64) -> Result<PropagatorSet, PropagatorError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(PropagatorError::BadDensity(density));
    }
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(PropagatorError::BadMass(mass));
    }
    let b = coeff_b(mass, density);
    let mut g_ret = retarded_from_matrix(&causal_matrix(cs), COEFF_A, b)?;
    let n = cs.n_points();
    // Enforce retarded support exactly; off-support entries are round-off.
    for x in 0..n {
        for y in 0..n {
            if !cs.precedes(y, x) {
                g_ret.write(x, y, 0.0);
            }
        }
    }
    Ok(from_retarded(g_ret, mass, density, COEFF_A, b))
}

/// Assembles G⁻ = (G⁺)ᵀ and Δ = G⁻ − G⁺.
pub fn from_retarded(g_ret: RMat, mass: f64, density: f64, coeff_a: f64, coeff_b: f64) -> PropagatorSet {
    let g_adv = g_ret.transpose().to_owned();
    let n = g_ret.nrows();
    let delta = Mat::from_fn(n, n, |i, j| g_adv.read(i, j) - g_ret.read(i, j));
    PropagatorSet { g_ret, g_adv, delta, mass, density, coeff_a, coeff_b }
}

/// Positive spectral part of iΔ.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub w_matrix: CMat,
    /// Full spectrum of iΔ, ascending.
    pub spectrum: Vec<f64>,
    pub tolerance: f64,
}

/// Relative cut below which eigenvalues of iΔ count as zero.
pub const EIGEN_REL_TOL: f64 = 1e-12;

/// Groups indices connected through nonzero entries of Δ.
fn delta_components(delta: &RMat) -> Vec<Vec<usize>> {
    let n = delta.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        comp[s] = id;
        let mut stack = vec![s];
        let mut members = vec![];
        while let Some(x) = stack.pop() {
            members.push(x);
            for y in 0..n {
                if comp[y] == usize::MAX && delta.read(x, y) != 0.0 {
                    comp[y] = id;
                    stack.push(y);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Eigendecomposes iΔ block by block so that modes stay localized on
/// causally connected pieces, then keeps the positive part.
pub fn sj_modes(p: &PropagatorSet) -> ModeBasis {
    modes_from_delta(&p.delta)
}

pub fn modes_from_delta(delta: &RMat) -> ModeBasis {
    let n = delta.nrows();
    let mut pairs: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let mut spectrum = Vec::with_capacity(n);
    for comp in delta_components(delta) {
        let k = comp.len();
        if k == 1 {
            spectrum.push(0.0);
            continue;
        }
        let ida = Mat::from_fn(k, k, |i, j| c64::new(0.0, delta.read(comp[i], comp[j])));
        let eig = HermitianEigen::new(&ida);
        for (col, &l) in eig.values.iter().enumerate() {
            spectrum.push(l);
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            for (i, &p) in comp.iter().enumerate() {
                v[p] = to_nc(eig.vectors.read(i, col));
            }
            pairs.push((l, v));
        }
    }
    spectrum.sort_by(f64::total_cmp);
    let max_abs = spectrum.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let tolerance = EIGEN_REL_TOL * max_abs;
    pairs.retain(|(l, _)| *l > tolerance);
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut w = CMat::zeros(n, n);
    for (l, v) in &pairs {
        for i in 0..n {
            for j in 0..n {
                let add = to_fc(*l * v[i] * v[j].conj());
                w.write(i, j, w.read(i, j) + add);
            }
        }
    }
    ModeBasis {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        eigenvectors: pairs.into_iter().map(|p| p.1).collect(),
        w_matrix: w,
        spectrum,
        tolerance,
    }
}

impl ModeBasis {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_points(&self) -> usize {
        self.w_matrix.nrows()
    }

    /// Number of eigenvalues of iΔ above tolerance in magnitude.
    pub fn rank(&self) -> usize {
        self.spectrum.iter().filter(|l| l.abs() > self.tolerance).count()
    }

    /// Largest relative mismatch between positive eigenvalues and the
    /// negated negative ones.
    pub fn pairing_defect(&self) -> f64 {
        let mut pos: Vec<f64> = self.spectrum.iter().copied().filter(|&l| l > self.tolerance).collect();
        let mut neg: Vec<f64> = self.spectrum.iter().copied().filter(|&l| l < -self.tolerance).map(|l| -l).collect();
        if pos.len() != neg.len() {
            return f64::INFINITY;
        }
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        let scale = pos.last().copied().unwrap_or(1.0);
        pos.iter().zip(&neg).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max)
    }
}

fn check_len(v: &[f64], n: usize) -> Result<(), PropagatorError> {
    if v.len() != n {
        return Err(PropagatorError::Length { got: v.len(), expected: n });
    }
    Ok(())
}

/// fᵀΔg.
pub fn pair_delta(p: &PropagatorSet, f: &[f64], g: &[f64]) -> Result<f64, PropagatorError> {
    pair_real(&p.delta, f, g)
}

pub fn pair_real(m: &RMat, f: &[f64], g: &[f64]) -> Result<f64, PropagatorError> {
    let n = m.nrows();
    check_len(f, n)?;
    check_len(g, n)?;
    let mut s = 0.0;
    for i in 0..n {
        if f[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            s += f[i] * m.read(i, j) * g[j];
        }
    }
    Ok(s)
}

/// fᵀWg for real test vectors.
pub fn pair_w(modes: &ModeBasis, f: &[f64], g: &[f64]) -> Result<Complex64, PropagatorError> {
    let fc: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let gc: Vec<Complex64> = g.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    pair_w_complex(modes, &fc, &gc)
}

/// f̄ᵀWg.
pub fn pair_w_complex(modes: &ModeBasis, f: &[Complex64], g: &[Complex64]) -> Result<Complex64, PropagatorError> {
    let n = modes.n_points();
    if f.len() != n || g.len() != n {
        return Err(PropagatorError::Length { got: f.len().min(g.len()), expected: n });
    }
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += f[i].conj() * to_nc(modes.w_matrix.read(i, j)) * g[j];
        }
    }
    Ok(s)
}

/// Bilinear data for Alice (h), Charlie (f) and Bob (g).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingContext {
    pub d_fg: f64,
    pub d_fh: f64,
    pub d_gh: f64,
    pub w_ff: f64,
    pub w_gg: f64,
    pub w_fg: Complex64,
    pub w_gf: Complex64,
}

/// Consistency tolerance for W(f,g) − W(g,f) = iΔ(f,g), relative to the data scale.
pub const CTX_TOL: f64 = 1e-10;

impl PairingContext {
    pub fn new(
        d_fg: f64,
        d_fh: f64,
        d_gh: f64,
        w_ff: f64,
        w_gg: f64,
        w_fg: Complex64,
        w_gf: Complex64,
    ) -> Result<Self, PropagatorError> {
        Self::with_tolerance(d_fg, d_fh, d_gh, w_ff, w_gg, w_fg, w_gf, CTX_TOL)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_tolerance(
        d_fg: f64,
        d_fh: f64,
        d_gh: f64,
        w_ff: f64,
        w_gg: f64,
        w_fg: Complex64,
        w_gf: Complex64,
        tol: f64,
    ) -> Result<Self, PropagatorError> {
        let scale = 1.0f64.max(w_ff.abs()).max(w_gg.abs()).max(w_fg.norm());
        let defect = (w_fg - w_gf - Complex64::new(0.0, d_fg)).norm();
        if defect > tol * scale {
            return Err(PropagatorError::Inconsistent(defect));
        }
        for w in [w_ff, w_gg] {
            if w < -tol * scale {
                return Err(PropagatorError::NegativeSelfPairing(w));
            }
        }
        Ok(Self { d_fg, d_fh, d_gh, w_ff: w_ff.max(0.0), w_gg: w_gg.max(0.0), w_fg, w_gf })
    }

    /// All pairings from causet vectors.
    pub fn from_vectors(p: &PropagatorSet, modes: &ModeBasis, f: &[f64], g: &[f64], h: &[f64]) -> Result<Self, PropagatorError> {
        let w_ff = pair_w(modes, f, f)?.re;
        let w_gg = pair_w(modes, g, g)?.re;
        Self::new(
            pair_delta(p, f, g)?,
            pair_delta(p, f, h)?,
            pair_delta(p, g, h)?,
            w_ff,
            w_gg,
            pair_w(modes, f, g)?,
            pair_w(modes, g, f)?,
        )
    }

    /// W(g̃, g̃) for g̃ = g − 2Δ(f,g) f.
    pub fn w_gtilde(&self) -> f64 {
        let d = self.d_fg;
        (self.w_gg - 2.0 * d * (self.w_gf + self.w_fg).re + 4.0 * d * d * self.w_ff).max(0.0)
    }

    pub fn density_q(&self, t: f64) -> Result<crate::gaussian_state::ComplexDensityQ, crate::gaussian_state::GaussianError> {
        crate::gaussian_state::ComplexDensityQ::new(self.w_ff, self.w_gg, self.w_fg, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Gret,
    Delta,
    W,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Gret => "gret",
            MatrixKind::Delta => "delta",
            MatrixKind::W => "w",
        }
    }
}

/// Row-major text dump; complex entries are written as `re im` pairs.
pub fn dump_real(kind: MatrixKind, m: &RMat) -> String {
    let n = m.nrows();
    let mut s = format!("matrix n={n} kind={}\n", kind.as_str());
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| g17(m.read(i, j))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn dump_complex(kind: MatrixKind, m: &CMat) -> String {
    let n = m.nrows();
    let mut s = format!("matrix n={n} kind={}\n", kind.as_str());
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| {
                let z = m.read(i, j);
                format!("{} {}", g17(z.re), g17(z.im))
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Parses either dump form; real dumps come back with zero imaginary part.
pub fn parse_dump(text: &str) -> Result<(MatrixKind, CMat), PropagatorError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| PropagatorError::Parse("empty input".into()))?;
    let mut n = None;
    let mut kind = None;
    let mut words = head.split_whitespace();
    if words.next() != Some("matrix") {
        return Err(PropagatorError::Parse("header must start with `matrix`".into()));
    }
    for w in words {
        if let Some(v) = w.strip_prefix("n=") {
            n = v.parse::<usize>().ok();
        } else if let Some(v) = w.strip_prefix("kind=") {
            kind = match v {
                "gret" => Some(MatrixKind::Gret),
                "delta" => Some(MatrixKind::Delta),
                "w" => Some(MatrixKind::W),
                _ => None,
            };
        }
    }
    let n = n.ok_or_else(|| PropagatorError::Parse("missing n=".into()))?;
    let kind = kind.ok_or_else(|| PropagatorError::Parse("missing or unknown kind=".into()))?;
    let per = if kind == MatrixKind::W { 2 } else { 1 };
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        let line = lines.next().ok_or_else(|| PropagatorError::Parse(format!("missing row {i}")))?;
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| PropagatorError::Parse(format!("row {i}: {e}")))?;
        if vals.len() != n * per {
            return Err(PropagatorError::Parse(format!("row {i} has {} numbers, expected {}", vals.len(), n * per)));
        }
        for j in 0..n {
            let z = if per == 2 { c64::new(vals[2 * j], vals[2 * j + 1]) } else { c64::new(vals[j], 0.0) };
            m.write(i, j, z);
        }
    }
    Ok((kind, m))
}
