//! Binned decoherence functional on the four-point causet A ≺ 1, 2 ≺ B.
//!
//! D(c, c̄) = ⟨Ω|Π̄_A Π̄_1 Π̄_2 Π̄_B Π_B Π_2 Π_1 Π_A|Ω⟩ with Π the cell projectors
//! of the single-point fields. The vacuum and the fields split over the two
//! modes {A,1} and {2,B}, so D = T₁(ξ_A, ξ̄_A, ξ_1) T₂(ξ_2, ξ̄_2, ξ_B) with
//! ξ_1 = ξ̄_1 and ξ_B = ξ̄_B forced by adjacent orthogonal projectors.

use crate::fock_oracle::FockSpace;
use crate::format::g17;
use crate::linalg::HermitianEigen;
use crate::resolutions::Resolution;
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DecoError {
    #[error("cell width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("decoherence functional needs 4 points in causal order, got {0}")]
    Points(String),
    #[error("fields do not split over two modes as {{A,1}} and {{2,B}}: {0}")]
    NotFactorized(String),
    #[error("factor with {0} entries exceeds the limit of {MAX_FACTOR_ENTRIES}")]
    TooLarge(usize),
    #[error("too many nonzero cell pairs to export: {0}")]
    ExportTooLarge(usize),
}

/// Cap on the entries of each factor T₁, T₂.
pub const MAX_FACTOR_ENTRIES: usize = 1 << 22;
/// Cap on rows in a full cell-pair export.
pub const MAX_EXPORT_ROWS: usize = 1 << 20;
/// Mode coefficients below this count as zero.
const MODE_TOL: f64 = 1e-12;

/// Occupied cells of one single-point field.
#[derive(Debug, Clone)]
struct Axis {
    /// Cell index k of [o + kw, o + (k+1)w).
    cells: Vec<i64>,
    /// Eigenvector indices per occupied cell.
    members: Vec<Vec<usize>>,
    eig: HermitianEigen,
}

impl Axis {
    fn new(eig: HermitianEigen, width: f64, offset: f64) -> Self {
        let mut map: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
        for (j, &l) in eig.values.iter().enumerate() {
            map.entry(((l - offset) / width).floor() as i64).or_default().push(j);
        }
        let (cells, members) = map.into_iter().unzip();
        Self { cells, members, eig }
    }

    fn len(&self) -> usize {
        self.cells.len()
    }

    /// ⟨e_j|v⟩ for every eigenvector.
    fn coords(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.eig.to_eigenbasis(v)
    }

    /// Π(c)v.
    fn project(&self, c: usize, v: &[Complex64]) -> Vec<Complex64> {
        let co = self.coords(v);
        let mut keep = vec![Complex64::new(0.0, 0.0); co.len()];
        for &j in &self.members[c] {
            keep[j] = co[j];
        }
        self.eig.from_eigenbasis(&keep)
    }
}

/// T(a, ā, c) = ⟨0|Π_X(ā) Π_Y(c) Π_X(a)|0⟩ on one mode, flattened as
/// (a·n_x + ā)·n_y + c.
fn factor(x: &Axis, y: &Axis) -> Result<Vec<Complex64>, DecoError> {
    let (nx, ny) = (x.len(), y.len());
    let size = nx * nx * ny;
    if size > MAX_FACTOR_ENTRIES {
        return Err(DecoError::TooLarge(size));
    }
    let d = x.eig.dim();
    let mut vac = vec![Complex64::new(0.0, 0.0); d];
    vac[0] = Complex64::new(1.0, 0.0);
    let p: Vec<Vec<Complex64>> = (0..nx).map(|a| y.coords(&x.project(a, &vac))).collect();
    let mut t = vec![Complex64::new(0.0, 0.0); size];
    for a in 0..nx {
        for ab in 0..nx {
            for c in 0..ny {
                t[(a * nx + ab) * ny + c] = y.members[c].iter().map(|&j| p[ab][j].conj() * p[a][j]).sum();
            }
        }
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct BinnedDecoherence {
    pub width: f64,
    pub offset: f64,
    /// Point labels (A, 1, 2, B).
    pub points: [usize; 4],
    axes: [Axis; 4],
    t1: Vec<Complex64>,
    t2: Vec<Complex64>,
    /// |Σ D − 1|.
    pub normalization_defect: f64,
}

/// Orders the points happen-before first: A ≺ 1 and 2 ≺ B, with {A,1} spacelike to {2,B}.
pub fn binned_decoherence(fock: &FockSpace, points: [usize; 4], width: f64, offset: f64) -> Result<BinnedDecoherence, DecoError> {
    if !(width > 0.0 && width.is_finite()) || !offset.is_finite() {
        return Err(DecoError::BadWidth(width));
    }
    let n = fock.n_points();
    if points.iter().any(|&p| p >= n) || fock.n_modes != 2 {
        return Err(DecoError::Points(format!("{points:?} on {n} points with {} modes", fock.n_modes)));
    }
    let mut mode_of = [0usize; 4];
    let mut single = Vec::with_capacity(4);
    for (slot, &x) in points.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[x] = 1.0;
        let c = fock.mode_coeffs(&e).expect("length matches");
        let live: Vec<usize> = (0..c.len()).filter(|&k| c[k].norm() > MODE_TOL).collect();
        if live.len() != 1 {
            return Err(DecoError::NotFactorized(format!("point {x} touches modes {live:?}")));
        }
        mode_of[slot] = live[0];
        single.push(fock.mode_field(live[0], c[live[0]]));
    }
    if mode_of[0] != mode_of[1] || mode_of[2] != mode_of[3] || mode_of[0] == mode_of[2] {
        return Err(DecoError::NotFactorized(format!("mode assignment {mode_of:?}")));
    }
    let axes: [Axis; 4] = std::array::from_fn(|i| Axis::new(HermitianEigen::new(&single[i]), width, offset));
    let t1 = factor(&axes[0], &axes[1])?;
    let t2 = factor(&axes[2], &axes[3])?;
    let total: Complex64 = t1.iter().sum::<Complex64>() * t2.iter().sum::<Complex64>();
    Ok(BinnedDecoherence { width, offset, points, axes, t1, t2, normalization_defect: (total - 1.0).norm() })
}

/// Where Bob's e^{itξ_B} is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BobBranch {
    Forward,
    Backward,
}

impl BinnedDecoherence {
    /// Occupied cells per axis (A, 1, 2, B).
    pub fn shape(&self) -> [usize; 4] {
        std::array::from_fn(|i| self.axes[i].len())
    }

    /// Cell-centre value of axis `axis`, occupied cell `c`.
    pub fn center(&self, axis: usize, c: usize) -> f64 {
        self.offset + (self.axes[axis].cells[c] as f64 + 0.5) * self.width
    }

    fn t1(&self, a: usize, ab: usize, c1: usize) -> Complex64 {
        let (na, n1) = (self.axes[0].len(), self.axes[1].len());
        self.t1[(a * na + ab) * n1 + c1]
    }

    fn t2(&self, c2: usize, c2b: usize, b: usize) -> Complex64 {
        let (n2, nb) = (self.axes[2].len(), self.axes[3].len());
        self.t2[(c2 * n2 + c2b) * nb + b]
    }

    /// D(c, c̄) with c = (c_A, c_1, c_2, c_B) in occupied-cell indices.
    pub fn value(&self, c: [usize; 4], cb: [usize; 4]) -> Complex64 {
        if c[1] != cb[1] || c[3] != cb[3] {
            return Complex64::new(0.0, 0.0);
        }
        self.t1(c[0], cb[0], c[1]) * self.t2(c[2], cb[2], c[3])
    }

    fn alice_weights(&self, s: f64) -> Vec<Complex64> {
        let (na, n1) = (self.axes[0].len(), self.axes[1].len());
        let mut out = vec![Complex64::new(0.0, 0.0); n1];
        for a in 0..na {
            for ab in 0..na {
                let ph = Complex64::from_polar(1.0, -s * (self.center(0, a) - self.center(0, ab)));
                for (c1, o) in out.iter_mut().enumerate() {
                    *o += ph * self.t1(a, ab, c1);
                }
            }
        }
        out
    }

    fn bob_weights(&self, t: f64) -> Vec<Complex64> {
        let (n2, nb) = (self.axes[2].len(), self.axes[3].len());
        let mut out = vec![Complex64::new(0.0, 0.0); n2 * n2];
        for c2 in 0..n2 {
            for c2b in 0..n2 {
                out[c2 * n2 + c2b] = (0..nb).map(|b| Complex64::from_polar(1.0, t * self.center(3, b)) * self.t2(c2, c2b, b)).sum();
            }
        }
        out
    }

    /// Σ_{c,c̄} D e^{−is(ξ_A − ξ̄_A)} e^{itξ_B} Σ_n 1_{B_n}(f₁ξ₁+f₂ξ₂) 1_{B_n}(f₁ξ̄₁+f₂ξ̄₂),
    /// with no indicator when `res` is `None`.
    pub fn chi(&self, s: f64, t: f64, res: Option<&Resolution>, f1: f64, f2: f64, branch: BobBranch) -> Complex64 {
        // ξ_B = ξ̄_B on the support of D, so both branches carry the same phase.
        let _ = branch;
        let alice = self.alice_weights(s);
        let bob = self.bob_weights(t);
        let n2 = self.axes[2].len();
        let mut total = Complex64::new(0.0, 0.0);
        for (c1, &wa) in alice.iter().enumerate() {
            let x1 = f1 * self.center(1, c1);
            for c2 in 0..n2 {
                let l = x1 + f2 * self.center(2, c2);
                for c2b in 0..n2 {
                    let same = match res {
                        None => true,
                        Some(r) => r.bin_index(l) == r.bin_index(x1 + f2 * self.center(2, c2b)),
                    };
                    if same {
                        total += wa * bob[c2 * n2 + c2b];
                    }
                }
            }
        }
        total
    }

    /// CSV `factor,i,j,k,re,im` of the nonzero entries of T₁ (A, Ā, 1) and T₂ (2, 2̄, B),
    /// indices being cell numbers k of [o + kw, o + (k+1)w).
    pub fn factors_csv(&self) -> String {
        let mut out = String::from("factor,i,j,k,re,im\n");
        for (name, (x, y, t)) in [("T1", (0, 1, &self.t1)), ("T2", (2, 3, &self.t2))] {
            let (nx, ny) = (self.axes[x].len(), self.axes[y].len());
            for a in 0..nx {
                for ab in 0..nx {
                    for c in 0..ny {
                        let v = t[(a * nx + ab) * ny + c];
                        if v != Complex64::new(0.0, 0.0) {
                            let (ca, cb, cc) = (self.axes[x].cells[a], self.axes[x].cells[ab], self.axes[y].cells[c]);
                            let _ = writeln!(out, "{name},{ca},{cb},{cc},{},{}", g17(v.re), g17(v.im));
                        }
                    }
                }
            }
        }
        out
    }

    /// CSV of every nonzero D(c, c̄): `a,1,2,b,abar,1bar,2bar,bbar,re,im`.
    pub fn cells_csv(&self) -> Result<String, DecoError> {
        let nz1: Vec<(usize, usize, usize, Complex64)> = iter3(self.axes[0].len(), self.axes[1].len(), |a, ab, c| self.t1(a, ab, c));
        let nz2: Vec<(usize, usize, usize, Complex64)> = iter3(self.axes[2].len(), self.axes[3].len(), |c, cb, b| self.t2(c, cb, b));
        let rows = nz1.len() * nz2.len();
        if rows > MAX_EXPORT_ROWS {
            return Err(DecoError::ExportTooLarge(rows));
        }
        let cell = |axis: usize, i: usize| self.axes[axis].cells[i];
        let mut out = String::from("a,1,2,b,abar,1bar,2bar,bbar,re,im\n");
        for &(a, ab, c1, v1) in &nz1 {
            for &(c2, c2b, b, v2) in &nz2 {
                let v = v1 * v2;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    cell(0, a),
                    cell(1, c1),
                    cell(2, c2),
                    cell(3, b),
                    cell(0, ab),
                    cell(1, c1),
                    cell(2, c2b),
                    cell(3, b),
                    g17(v.re),
                    g17(v.im)
                );
            }
        }
        Ok(out)
    }
}

fn iter3(nx: usize, ny: usize, f: impl Fn(usize, usize, usize) -> Complex64) -> Vec<(usize, usize, usize, Complex64)> {
    let mut out = Vec::new();
    for a in 0..nx {
        for ab in 0..nx {
            for c in 0..ny {
                let v = f(a, ab, c);
                if v != Complex64::new(0.0, 0.0) {
                    out.push((a, ab, c, v));
                }
            }
        }
    }
    out
}

/// max_s |χ(s) − χ(0)| over `s_grid`, with or without Charlie's indicators.
pub fn marginal_independence_check(d: &BinnedDecoherence, s_grid: &[f64], t: f64, res: Option<&Resolution>, f1: f64, f2: f64) -> f64 {
    let base = d.chi(0.0, t, res, f1, f2, BobBranch::Forward);
    s_grid.iter().map(|&s| (d.chi(s, t, res, f1, f2, BobBranch::Forward) - base).norm()).fold(0.0, f64::max)
}
