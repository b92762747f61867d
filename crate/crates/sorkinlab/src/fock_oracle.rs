//! Truncated bosonic Fock space built from the positive modes of iΔ.
//!
//! φ_x = Σ_k √λ_k (v_k(x) a_k + v̄_k(x) a_k†), so that ⟨Ω|φ_x φ_y|Ω⟩ = W(x,y)
//! and [φ_x, φ_y] = iΔ(x,y) away from the cutoff. Everything is dense.

use crate::kraus::{KrausError, KrausFamily, L2Kind};
use crate::linalg::{inner, max_abs, to_fc, to_nc, CMat, HermitianEigen};
use crate::propagators::ModeBasis;
use crate::quad::composite_gl;
use crate::resolutions::IntervalSet;
use faer::complex_native::c64;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FockError {
    #[error("Fock space too large: {n_modes} modes at cutoff {n_max} (limits: {max_modes} modes, cutoff {max_cutoff}, dimension {max_dim})")]
    TooLarge { n_modes: usize, n_max: usize, max_modes: usize, max_cutoff: usize, max_dim: usize },
    #[error("vector length {got} does not match {expected} points")]
    Length { got: usize, expected: usize },
    #[error(transparent)]
    Kraus(#[from] KrausError),
}

pub const MAX_MODES: usize = 3;
pub const MAX_CUTOFF: usize = 60;
pub const MAX_DIM: usize = 4096;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct FockSpace {
    pub n_modes: usize,
    pub n_max: usize,
    pub dim: usize,
    amplitudes: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
    w: CMat,
    n_points: usize,
}

impl FockSpace {
    pub fn build(modes: &ModeBasis, n_max: usize) -> Result<Self, FockError> {
        let n_modes = modes.n_modes();
        let dim = (n_max + 1).checked_pow(n_modes as u32).unwrap_or(usize::MAX);
        if n_modes > MAX_MODES || n_max > MAX_CUTOFF || dim > MAX_DIM {
            return Err(FockError::TooLarge { n_modes, n_max, max_modes: MAX_MODES, max_cutoff: MAX_CUTOFF, max_dim: MAX_DIM });
        }
        Ok(Self {
            n_modes,
            n_max,
            dim,
            amplitudes: modes.eigenvalues.iter().map(|l| l.sqrt()).collect(),
            vectors: modes.eigenvectors.clone(),
            w: modes.w_matrix.clone(),
            n_points: modes.n_points(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    fn stride(&self, k: usize) -> usize {
        (self.n_max + 1).pow(k as u32)
    }

    /// Occupation of mode k in basis state `idx`.
    pub fn occupation(&self, idx: usize, k: usize) -> usize {
        (idx / self.stride(k)) % (self.n_max + 1)
    }

    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    /// c_k = Σ_x f(x) v_k(x).
    pub fn mode_coeffs(&self, f: &[f64]) -> Result<Vec<Complex64>, FockError> {
        if f.len() != self.n_points {
            return Err(FockError::Length { got: f.len(), expected: self.n_points });
        }
        Ok(self.vectors.iter().map(|v| v.iter().zip(f).map(|(a, b)| a * b).sum()).collect())
    }

    /// Dense a_k.
    pub fn annihilation(&self, k: usize) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        let st = self.stride(k);
        for idx in 0..self.dim {
            let n = self.occupation(idx, k);
            if n > 0 {
                m.write(idx - st, idx, c64::new((n as f64).sqrt(), 0.0));
            }
        }
        m
    }

    /// φ(f) = Σ_k √λ_k (c_k a_k + c̄_k a_k†).
    pub fn field(&self, f: &[f64]) -> Result<CMat, FockError> {
        let c = self.mode_coeffs(f)?;
        let mut m = CMat::zeros(self.dim, self.dim);
        for k in 0..self.n_modes {
            let st = self.stride(k);
            let amp = self.amplitudes[k] * c[k];
            for idx in 0..self.dim {
                let n = self.occupation(idx, k);
                if n < self.n_max {
                    let r = ((n + 1) as f64).sqrt();
                    // ⟨n+1| c̄ a† |n⟩ and its adjoint.
                    let lower = to_fc(amp.conj() * r);
                    m.write(idx + st, idx, m.read(idx + st, idx) + lower);
                    m.write(idx, idx + st, m.read(idx, idx + st) + lower.conj());
                }
            }
        }
        Ok(m)
    }

    pub fn field_at(&self, x: usize) -> CMat {
        let mut e = vec![0.0; self.n_points];
        e[x] = 1.0;
        self.field(&e).expect("length matches by construction")
    }

    /// iΔ(x,y) recovered from the stored W.
    pub fn i_delta(&self, x: usize, y: usize) -> Complex64 {
        to_nc(self.w.read(x, y)) - to_nc(self.w.read(y, x))
    }

    /// Max deviation of [φ_x, φ_y] from iΔ(x,y)·𝟙 on basis states with every
    /// occupation below the cutoff by at least `margin`.
    pub fn commutator_defect(&self, x: usize, y: usize, margin: usize) -> f64 {
        let px = self.field_at(x);
        let py = self.field_at(y);
        let c = &px * &py - &py * &px;
        let id = self.i_delta(x, y);
        let interior: Vec<usize> =
            (0..self.dim).filter(|&i| (0..self.n_modes).all(|k| self.occupation(i, k) + margin <= self.n_max)).collect();
        let mut worst = 0.0f64;
        for &i in &interior {
            for &j in &interior {
                let target = if i == j { id } else { Complex64::new(0.0, 0.0) };
                worst = worst.max((to_nc(c.read(i, j)) - target).norm());
            }
        }
        worst
    }

    /// ⟨Ω|φ_x φ_y|Ω⟩.
    pub fn vacuum_two_point(&self, x: usize, y: usize) -> Complex64 {
        let om = self.vacuum();
        let a = crate::linalg::matvec(&self.field_at(x), &om);
        let b = crate::linalg::matvec(&self.field_at(y), &om);
        inner(&a, &b)
    }
}

/// 1_B(X) for a Hermitian X.
pub fn projector_of(eig: &HermitianEigen, bins: &IntervalSet) -> CMat {
    eig.function_matrix(|l| if bins.contains(l) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
}

pub fn spectral_projector(fock: &FockSpace, f: &[f64], bins: &IntervalSet) -> Result<CMat, FockError> {
    Ok(projector_of(&HermitianEigen::new(&fock.field(f)?), bins))
}

/// ‖U⁻¹ 1_B(X) U − 1_B(U⁻¹ X U)‖_max for unitary U.
pub fn pvm_unitary_covariance_check(x: &CMat, u: &CMat, bins: &IntervalSet) -> f64 {
    let ui = u.adjoint().to_owned();
    let lhs = &ui * projector_of(&HermitianEigen::new(x), bins) * u;
    let conj = &ui * x * u;
    // Symmetrize against round-off before the eigensolve.
    let n = conj.nrows();
    let herm = Mat::from_fn(n, n, |i, j| (conj.read(i, j) + conj.read(j, i).conj()) * c64::new(0.5, 0.0));
    let rhs = projector_of(&HermitianEigen::new(&herm), bins);
    max_abs(&(&lhs - &rhs))
}

/// Applies ⊗_k m_k to a vector indexed by Σ_k i_k (n+1)^k.
pub fn kron_apply(mats: &[CMat], y: &[Complex64]) -> Vec<Complex64> {
    let mut cur = y.to_vec();
    let mut stride = 1;
    for m in mats {
        let d = m.nrows();
        let dense: Vec<Complex64> = (0..d * d).map(|k| to_nc(m.read(k / d, k % d))).collect();
        let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
        let block = stride * d;
        for base in (0..cur.len()).step_by(block) {
            for low in 0..stride {
                for i in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, mij) in dense[i * d..(i + 1) * d].iter().enumerate() {
                        acc += mij * cur[base + j * stride + low];
                    }
                    next[base + i * stride + low] = acc;
                }
            }
        }
        cur = next;
        stride = block;
    }
    cur
}

/// Eigendecomposition of a sum of single-mode operators Σ_k Q_k: eigenvalues
/// add and eigenvectors are tensor products of the per-mode ones.
#[derive(Debug, Clone)]
pub struct KronEigen {
    pub modes: Vec<HermitianEigen>,
    /// Global eigenvalue per tensor index, same layout as the Fock basis.
    pub values: Vec<f64>,
}

impl KronEigen {
    pub fn new(ops: &[CMat]) -> Self {
        let modes: Vec<HermitianEigen> = ops.iter().map(HermitianEigen::new).collect();
        let mut values = vec![0.0];
        for m in &modes {
            // Mode k varies slowest among those seen so far.
            let mut next = Vec::with_capacity(values.len() * m.dim());
            for &l in &m.values {
                for &v in &values {
                    next.push(v + l);
                }
            }
            values = next;
        }
        Self { modes, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn to_eigenbasis(&self, v: &[Complex64]) -> Vec<Complex64> {
        let adj: Vec<CMat> = self.modes.iter().map(|m| m.vectors.adjoint().to_owned()).collect();
        kron_apply(&adj, v)
    }

    pub fn from_eigenbasis(&self, c: &[Complex64]) -> Vec<Complex64> {
        let vs: Vec<CMat> = self.modes.iter().map(|m| m.vectors.clone()).collect();
        kron_apply(&vs, c)
    }

    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64, v: &[Complex64]) -> Vec<Complex64> {
        let mut c = self.to_eigenbasis(v);
        for (ci, &l) in c.iter_mut().zip(&self.values) {
            *ci *= f(l);
        }
        self.from_eigenbasis(&c)
    }
}

impl FockSpace {
    /// Single-mode part √λ_k (c a + c̄ a†) of φ(f) on the (n_max+1)-level space.
    pub fn mode_field(&self, k: usize, c: Complex64) -> CMat {
        let d = self.n_max + 1;
        let amp = self.amplitudes[k] * c;
        let mut m = CMat::zeros(d, d);
        for n in 0..self.n_max {
            let r = ((n + 1) as f64).sqrt();
            let lower = to_fc(amp.conj() * r);
            m.write(n + 1, n, lower);
            m.write(n, n + 1, lower.conj());
        }
        m
    }

    /// φ(f) as a [`KronEigen`].
    pub fn field_eigen(&self, f: &[f64]) -> Result<KronEigen, FockError> {
        let c = self.mode_coeffs(f)?;
        let ops: Vec<CMat> = (0..self.n_modes).map(|k| self.mode_field(k, c[k])).collect();
        Ok(KronEigen::new(&ops))
    }
}

/// Cached eigendecompositions of φ(f), φ(g), φ(h) for χ(s) evaluation.
pub struct ChiOracle {
    pub fock: FockSpace,
    pub eig_f: KronEigen,
    pub eig_g: KronEigen,
    pub eig_h: KronEigen,
}

/// γ-panel width for weak and L² Kraus factors, in units of the kernel scale.
const GAMMA_PANEL: f64 = 0.5;
const GAMMA_ORDER: usize = 8;

impl ChiOracle {
    pub fn new(fock: FockSpace, f: &[f64], g: &[f64], h: &[f64]) -> Result<Self, FockError> {
        let eig_f = fock.field_eigen(f)?;
        let eig_g = fock.field_eigen(g)?;
        let eig_h = fock.field_eigen(h)?;
        Ok(Self { fock, eig_f, eig_g, eig_h })
    }

    /// Per-mode factors of V_f† e^{itφ(g)} V_f.
    fn bob_factors(&self, t: f64) -> Vec<CMat> {
        self.eig_f
            .modes
            .iter()
            .zip(&self.eig_g.modes)
            .map(|(vf, eg)| {
                let e = eg.function_matrix(|l| (I * t * l).exp());
                vf.vectors.adjoint() * e * &vf.vectors
            })
            .collect()
    }

    /// χ(s) = ⟨Ω|e^{isφ(h)} ℰ(e^{itφ(g)}) e^{−isφ(h)}|Ω⟩ for every s.
    pub fn chi_scan(&self, fam: &KrausFamily, t: f64, s_grid: &[f64]) -> Result<Vec<Complex64>, FockError> {
        let m = self.bob_factors(t);
        let om = self.fock.vacuum();
        let lam = &self.eig_f.values;
        let quad_form = |y: &[Complex64]| -> Complex64 { inner(y, &kron_apply(&m, y)) };
        s_grid
            .iter()
            .map(|&s| {
                let psi = self.eig_h.apply_fn(|l| (-I * s * l).exp(), &om);
                let pt = self.eig_f.to_eigenbasis(&psi);
                self.contract(fam, lam, &pt, &quad_form)
            })
            .collect()
    }

    pub fn chi(&self, fam: &KrausFamily, s: f64, t: f64) -> Result<Complex64, FockError> {
        Ok(self.chi_scan(fam, t, &[s])?[0])
    }

    fn contract(
        &self,
        fam: &KrausFamily,
        lam: &[f64],
        pt: &[Complex64],
        quad_form: &(dyn Fn(&[Complex64]) -> Complex64 + Sync),
    ) -> Result<Complex64, FockError> {
        match fam {
            KrausFamily::UnitaryPhase(th) => {
                let y: Vec<Complex64> = pt.iter().zip(lam).map(|(p, &l)| (-I * th.eval(l)).exp() * p).collect();
                Ok(quad_form(&y))
            }
            KrausFamily::Ideal(res) => {
                let mut groups: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
                for (i, &l) in lam.iter().enumerate() {
                    groups.entry(res.bin_index(l)).or_default().push(i);
                }
                Ok(groups
                    .values()
                    .collect::<Vec<_>>()
                    .par_iter()
                    .map(|idx| {
                        let mut y = vec![Complex64::new(0.0, 0.0); pt.len()];
                        for &i in idx.iter() {
                            y[i] = pt[i];
                        }
                        quad_form(&y)
                    })
                    .sum())
            }
            KrausFamily::GaussianWeak { sigma } => {
                let k = L2Kind::Gaussian { sigma: *sigma };
                Ok(self.gamma_quadrature(&k, *sigma, lam, pt, quad_form))
            }
            KrausFamily::L2Kernel(k) => {
                let (lo, hi, _) = k.support();
                let scale = match k {
                    L2Kind::Gaussian { sigma } => *sigma,
                    _ => (hi - lo) / 8.0,
                };
                Ok(self.gamma_quadrature(k, scale, lam, pt, quad_form))
            }
        }
    }

    /// ∫dγ y_γ† M y_γ with (y_γ)_j = κ(λ_j, γ)* ψ̃_j and κ(λ,γ) = k(λ − γ).
    fn gamma_quadrature(
        &self,
        k: &L2Kind,
        scale: f64,
        lam: &[f64],
        pt: &[Complex64],
        quad_form: &(dyn Fn(&[Complex64]) -> Complex64 + Sync),
    ) -> Complex64 {
        let (lo, hi, _) = k.support();
        let lmin = lam.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (g0, g1) = (lmin - hi, lmax - lo);
        let panels = (((g1 - g0) / (GAMMA_PANEL * scale)).ceil() as usize).max(1);
        let (gs, gw) = composite_gl(g0, g1, panels, GAMMA_ORDER);
        gs.par_iter()
            .zip(gw.par_iter())
            .map(|(&g, &w)| {
                let y: Vec<Complex64> = pt.iter().zip(lam).map(|(p, &l)| k.k(l - g).conj() * p).collect();
                w * quad_form(&y)
            })
            .sum()
    }

    /// ‖(e^{−iφ(g)} 1_B(φ(f)) e^{iφ(g)} − 1_{B+d}(φ(f)))Ω‖ with d = Δ(f,g).
    pub fn shift_covariance_defect(&self, bins: &IntervalSet, d_fg: f64) -> f64 {
        let om = self.fock.vacuum();
        let u_om = self.eig_g.apply_fn(|l| (I * l).exp(), &om);
        let p_u = self.eig_f.apply_fn(|l| if bins.contains(l) { 1.0.into() } else { 0.0.into() }, &u_om);
        let lhs = self.eig_g.apply_fn(|l| (-I * l).exp(), &p_u);
        let shifted = bins.translate(d_fg);
        let rhs = self.eig_f.apply_fn(|l| if shifted.contains(l) { 1.0.into() } else { 0.0.into() }, &om);
        lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Same identity for a general ζ: e^{−iφ(g)} ζ(φ(f)) e^{iφ(g)}Ω vs ζ(φ(f) − Δ(f,g))Ω.
    pub fn shift_identity_defect(&self, zeta: &dyn Fn(f64) -> Complex64, d_fg: f64) -> f64 {
        let om = self.fock.vacuum();
        let u_om = self.eig_g.apply_fn(|l| (I * l).exp(), &om);
        let z_u = self.eig_f.apply_fn(zeta, &u_om);
        let lhs = self.eig_g.apply_fn(|l| (-I * l).exp(), &z_u);
        let rhs = self.eig_f.apply_fn(|l| zeta(l - d_fg), &om);
        lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::{causet_retarded_green, sj_modes};
    use crate::spacetime::CausalSet;

    fn chain_fock(n_max: usize) -> FockSpace {
        let p = causet_retarded_green(&CausalSet::chain(2), 0.0, 1.0).unwrap();
        FockSpace::build(&sj_modes(&p), n_max).unwrap()
    }

    #[test]
    fn two_level_field() {
        let fs = chain_fock(1);
        let m = fs.field_at(0);
        assert_eq!(fs.dim, 2);
        assert_eq!(m.read(0, 0), c64::new(0.0, 0.0));
        let amp = (0.5f64).sqrt() * fs.vectors[0][0].norm();
        assert!((m.read(0, 1).norm() - amp).abs() < 1e-15);
        assert!((m.read(0, 1) - m.read(1, 0).conj()).norm() < 1e-15);
    }

    #[test]
    fn size_guard() {
        let p = causet_retarded_green(&CausalSet::from_links(8, &[(0, 1), (2, 3), (4, 5), (6, 7)]).unwrap(), 0.0, 1.0).unwrap();
        assert!(matches!(FockSpace::build(&sj_modes(&p), 2), Err(FockError::TooLarge { .. })));
        assert!(matches!(FockSpace::build(&sj_modes(&p), 61), Err(FockError::TooLarge { .. })));
    }

    #[test]
    fn vacuum_reproduces_w() {
        let fs = chain_fock(10);
        for x in 0..2 {
            for y in 0..2 {
                assert!((fs.vacuum_two_point(x, y) - to_nc(fs.w.read(x, y))).norm() < 1e-14);
            }
        }
        assert!(fs.commutator_defect(0, 1, 1) < 1e-12);
    }

    #[test]
    fn covariance_identity_for_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let a = Mat::from_fn(n, n, |_, _| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let x = Mat::from_fn(n, n, |i, j| (a.read(i, j) + a.read(j, i).conj()) * c64::new(0.5, 0.0));
        let u = HermitianEigen::new(&x).function_matrix(|l| (I * 1.3 * l * l).exp());
        let b = Mat::from_fn(n, n, |_, _| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let y = Mat::from_fn(n, n, |i, j| (b.read(i, j) + b.read(j, i).conj()) * c64::new(0.5, 0.0));
        let v = HermitianEigen::new(&y).function_matrix(|l| (I * l).exp());
        let bins = IntervalSet::new(vec![(-0.3, 0.4), (1.0, 2.0)]);
        assert!(pvm_unitary_covariance_check(&x, &crate::linalg::identity(n), &bins) < 1e-12);
        assert!(pvm_unitary_covariance_check(&x, &v, &bins) < 1e-10);
        assert!(pvm_unitary_covariance_check(&x, &u, &bins) < 1e-10);
    }
}
