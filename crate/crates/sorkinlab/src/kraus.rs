//! Kraus families κ(λ,γ) for an update on one smeared field, the overlap
//! κ̃(λ, shift) = ∫ κ(λ,γ) κ(λ+shift,γ)* dν(γ), the λ-constancy verdict and
//! the signal function χ(s).

use crate::gaussian_state::{weierstrass, GaussianError};
use crate::propagators::PairingContext;
use crate::quad::{integrate_with_breaks, QuadError, Tolerance};
use crate::resolutions::{r_t, Resolution, ResolutionError};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KrausError {
    #[error("cannot parse Kraus literal `{0}`: {1}")]
    Parse(String, String),
    #[error("invalid Kraus family: {0}")]
    Invalid(String),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ComplexFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Phase θ of a unitary kick λ ↦ e^{iθ(λ)}.
#[derive(Clone)]
pub enum PhaseFn {
    /// θ(λ) = cλ
    Linear { c: f64 },
    /// θ(λ) = cλ²
    Square { c: f64 },
    Custom { name: String, theta: RealFn },
}

impl PhaseFn {
    pub fn eval(&self, l: f64) -> f64 {
        match self {
            PhaseFn::Linear { c } => c * l,
            PhaseFn::Square { c } => c * l * l,
            PhaseFn::Custom { theta, .. } => theta(l),
        }
    }
}

impl fmt::Debug for PhaseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseFn::Linear { c } => write!(f, "Linear {{ c: {c} }}"),
            PhaseFn::Square { c } => write!(f, "Square {{ c: {c} }}"),
            PhaseFn::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Square-integrable kernel k with κ(λ,γ) = k(λ − γ), ∫|k|² = 1.
#[derive(Clone)]
pub enum L2Kind {
    /// |k|² is the Normal(0, σ²) density.
    Gaussian { sigma: f64 },
    /// k = w^{-1/2} on [−w/2, w/2).
    Box { width: f64 },
    /// Caller-supplied kernel, supported in [lo, hi).
    Custom { name: String, k: ComplexFn, lo: f64, hi: f64 },
}

impl fmt::Debug for L2Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            L2Kind::Gaussian { sigma } => write!(f, "Gaussian {{ sigma: {sigma} }}"),
            L2Kind::Box { width } => write!(f, "Box {{ width: {width} }}"),
            L2Kind::Custom { name, lo, hi, .. } => write!(f, "Custom({name}, [{lo}, {hi}))"),
        }
    }
}

impl L2Kind {
    pub fn k(&self, u: f64) -> Complex64 {
        match self {
            L2Kind::Gaussian { sigma } => Complex64::new(gaussian_amp(*sigma, u), 0.0),
            L2Kind::Box { width } => {
                if u >= -0.5 * width && u < 0.5 * width {
                    Complex64::new(width.powf(-0.5), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            L2Kind::Custom { k, lo, hi, .. } => {
                if u >= *lo && u < *hi {
                    k(u)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    /// Interval outside which k is zero or negligible, with interior breaks.
    pub fn support(&self) -> (f64, f64, Vec<f64>) {
        match self {
            L2Kind::Gaussian { sigma } => (-12.0 * sigma, 12.0 * sigma, vec![0.0]),
            L2Kind::Box { width } => (-0.5 * width, 0.5 * width, vec![]),
            L2Kind::Custom { lo, hi, .. } => (*lo, *hi, vec![]),
        }
    }

    /// k̃(x) = |k(x)|², the outcome-noise density.
    pub fn k_tilde(&self, x: f64) -> f64 {
        self.k(x).norm_sqr()
    }
}

/// (2πσ²)^{-1/4} e^{−u²/(4σ²)}.
fn gaussian_amp(sigma: f64, u: f64) -> f64 {
    (2.0 * PI * sigma * sigma).powf(-0.25) * (-u * u / (4.0 * sigma * sigma)).exp()
}

#[derive(Clone, Debug)]
pub enum KrausFamily {
    UnitaryPhase(PhaseFn),
    Ideal(Resolution),
    /// κ(λ,γ) = (2πσ²)^{-1/4} e^{−(λ−γ)²/(4σ²)}, γ ∈ ℝ.
    GaussianWeak { sigma: f64 },
    L2Kernel(L2Kind),
}

impl KrausFamily {
    pub fn kick_linear(c: f64) -> Self {
        KrausFamily::UnitaryPhase(PhaseFn::Linear { c })
    }

    pub fn kick_square(c: f64) -> Self {
        KrausFamily::UnitaryPhase(PhaseFn::Square { c })
    }

    pub fn weak(sigma: f64) -> Result<Self, KrausError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(KrausError::Invalid(format!("weak measurement needs sigma > 0, got {sigma}")));
        }
        Ok(KrausFamily::GaussianWeak { sigma })
    }

    pub fn l2(kind: L2Kind) -> Result<Self, KrausError> {
        match &kind {
            L2Kind::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                return Err(KrausError::Invalid(format!("gaussian kernel needs sigma > 0, got {sigma}")))
            }
            L2Kind::Box { width } if !(*width > 0.0 && width.is_finite()) => {
                return Err(KrausError::Invalid(format!("box kernel needs w > 0, got {width}")))
            }
            L2Kind::Custom { lo, hi, .. } if !(lo < hi) => {
                return Err(KrausError::Invalid("custom kernel support must have lo < hi".into()))
            }
            _ => {}
        }
        let fam = KrausFamily::L2Kernel(kind);
        let defect = fam.normalization_defect(0.0)?;
        if defect > 1e-8 {
            return Err(KrausError::Invalid(format!("kernel is not normalized: |∫|k|² − 1| = {defect:.3e}")));
        }
        Ok(fam)
    }

    /// |∫ |κ(λ,γ)|² dν(γ) − 1| at λ.
    pub fn normalization_defect(&self, lambda: f64) -> Result<f64, KrausError> {
        Ok(match self {
            KrausFamily::UnitaryPhase(_) | KrausFamily::Ideal(_) => 0.0,
            KrausFamily::GaussianWeak { sigma } => {
                let f = |g: f64| Complex64::new(gaussian_amp(*sigma, lambda - g).powi(2), 0.0);
                let r = integrate_with_breaks(&f, lambda - 14.0 * sigma, lambda + 14.0 * sigma, &[lambda], Tolerance::default())?;
                (r.value.re - 1.0).abs()
            }
            KrausFamily::L2Kernel(k) => {
                let (lo, hi, br) = k.support();
                let f = |u: f64| Complex64::new(k.k_tilde(u), 0.0);
                (integrate_with_breaks(&f, lo, hi, &br, Tolerance::default())?.value.re - 1.0).abs()
            }
        })
    }

    /// True when κ̃ cannot depend on λ for structural reasons.
    pub fn is_lambda_independent(&self) -> bool {
        match self {
            KrausFamily::UnitaryPhase(PhaseFn::Linear { .. }) => true,
            KrausFamily::UnitaryPhase(PhaseFn::Square { c }) => *c == 0.0,
            KrausFamily::UnitaryPhase(PhaseFn::Custom { .. }) => false,
            KrausFamily::Ideal(_) => false,
            KrausFamily::GaussianWeak { .. } | KrausFamily::L2Kernel(_) => true,
        }
    }

    /// Parses `kick:linear[:c=..]`, `kick:square[:c=..]`, `ideal:<resolution>`,
    /// `weak:sigma=..`, `l2:gaussian:sigma=..`, `l2:box:w=..`.
    pub fn parse(lit: &str) -> Result<Self, KrausError> {
        let perr = |m: &str| KrausError::Parse(lit.to_string(), m.to_string());
        let lit_t = lit.trim();
        let (kind, rest) = lit_t.split_once(':').ok_or_else(|| perr("expected <kind>:<params>"))?;
        let num = |s: &str, key: &str| -> Result<f64, KrausError> {
            let v = s.trim().strip_prefix(key).and_then(|v| v.strip_prefix('=')).ok_or_else(|| perr(&format!("expected {key}=<value>")))?;
            v.trim().parse::<f64>().map_err(|_| perr(&format!("bad value for {key}")))
        };
        match kind {
            "kick" => {
                let (shape, param) = match rest.split_once(':') {
                    Some((s, p)) => (s, Some(p)),
                    None => (rest, None),
                };
                let c = match param {
                    Some(p) => num(p, "c")?,
                    None => 1.0,
                };
                match shape {
                    "linear" => Ok(Self::kick_linear(c)),
                    "square" => Ok(Self::kick_square(c)),
                    other => Err(perr(&format!("unknown kick shape `{other}`"))),
                }
            }
            "ideal" => Ok(KrausFamily::Ideal(Resolution::parse(rest)?)),
            "weak" => Self::weak(num(rest, "sigma")?),
            "l2" => {
                let (shape, p) = rest.split_once(':').ok_or_else(|| perr("expected l2:<shape>:<param>"))?;
                match shape {
                    "gaussian" => Self::l2(L2Kind::Gaussian { sigma: num(p, "sigma")? }),
                    "box" => Self::l2(L2Kind::Box { width: num(p, "w")? }),
                    other => Err(perr(&format!("unknown kernel `{other}`"))),
                }
            }
            other => Err(perr(&format!("unknown family `{other}`"))),
        }
    }
}

impl fmt::Display for KrausFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KrausFamily::UnitaryPhase(PhaseFn::Linear { c }) => write!(f, "kick:linear:c={c}"),
            KrausFamily::UnitaryPhase(PhaseFn::Square { c }) => write!(f, "kick:square:c={c}"),
            KrausFamily::UnitaryPhase(PhaseFn::Custom { name, .. }) => write!(f, "kick:custom({name})"),
            KrausFamily::Ideal(r) => write!(f, "ideal:{r}"),
            KrausFamily::GaussianWeak { sigma } => write!(f, "weak:sigma={sigma}"),
            KrausFamily::L2Kernel(L2Kind::Gaussian { sigma }) => write!(f, "l2:gaussian:sigma={sigma}"),
            KrausFamily::L2Kernel(L2Kind::Box { width }) => write!(f, "l2:box:w={width}"),
            KrausFamily::L2Kernel(L2Kind::Custom { name, .. }) => write!(f, "l2:custom({name})"),
        }
    }
}

/// ∫ k(u) k(u+shift)* du.
pub fn l2_autocorrelation(k: &L2Kind, shift: f64) -> Result<Complex64, KrausError> {
    let (lo, hi, br) = k.support();
    let a = lo.max(lo - shift);
    let b = hi.min(hi - shift);
    if b <= a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut breaks: Vec<f64> = br.iter().flat_map(|&x| [x, x - shift]).collect();
    breaks.extend([lo, hi, lo - shift, hi - shift]);
    let f = |u: f64| k.k(u) * k.k(u + shift).conj();
    Ok(integrate_with_breaks(&f, a, b, &breaks, Tolerance::default())?.value)
}

/// κ̃(λ, shift); all call sites pass shift = tΔ(f,g).
pub fn kappa_tilde(fam: &KrausFamily, lambda: f64, shift: f64) -> Result<Complex64, KrausError> {
    Ok(match fam {
        KrausFamily::UnitaryPhase(th) => (I * (th.eval(lambda) - th.eval(lambda + shift))).exp(),
        KrausFamily::Ideal(res) => {
            // 1 on R_{−shift}: λ and λ + shift share a bin.
            if res.bin_index(lambda) == res.bin_index(lambda + shift) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        KrausFamily::GaussianWeak { sigma } => Complex64::new((-shift * shift / (8.0 * sigma * sigma)).exp(), 0.0),
        KrausFamily::L2Kernel(k) => l2_autocorrelation(k, shift)?,
    })
}

/// Breakpoints of λ ↦ κ̃(λ, shift) inside [lo, hi).
pub fn kappa_breaks(fam: &KrausFamily, shift: f64, lo: f64, hi: f64) -> Vec<f64> {
    match fam {
        KrausFamily::Ideal(res) => {
            let mut b = res.edges_in(lo, hi);
            b.extend(res.edges_in(lo + shift, hi + shift).into_iter().map(|e| e - shift));
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        }
        _ => vec![],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Causal,
    Acausal,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Causal => "CAUSAL",
            Verdict::Acausal => "ACAUSAL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub lambda1: f64,
    pub lambda2: f64,
    pub shift: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalityVerdict {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub tolerance: f64,
}

/// λ window and sample count for constancy decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for Probe {
    fn default() -> Self {
        Self { lo: -10.0, hi: 10.0, samples: 4001, tolerance: 1e-9 }
    }
}

fn causal(tol: f64) -> CausalityVerdict {
    CausalityVerdict { verdict: Verdict::Causal, witness: None, tolerance: tol }
}

fn dense_scan(fam: &KrausFamily, shift: f64, probe: Probe) -> Result<CausalityVerdict, KrausError> {
    let n = probe.samples.max(2);
    let l0 = probe.lo;
    let k0 = kappa_tilde(fam, l0, shift)?;
    let mut best: Option<Witness> = None;
    for i in 1..n {
        let l = probe.lo + (probe.hi - probe.lo) * i as f64 / (n - 1) as f64;
        let gap = (kappa_tilde(fam, l, shift)? - k0).norm();
        if gap > probe.tolerance && best.is_none_or(|w| gap > w.gap) {
            best = Some(Witness { lambda1: l0, lambda2: l, shift, gap });
        }
    }
    Ok(match best {
        Some(w) => CausalityVerdict { verdict: Verdict::Acausal, witness: Some(w), tolerance: probe.tolerance },
        None => causal(probe.tolerance),
    })
}

/// Decides whether κ̃(·, shift) is constant on the probe window.
pub fn causality_verdict(fam: &KrausFamily, shift: f64, probe: Probe) -> Result<CausalityVerdict, KrausError> {
    let tol = probe.tolerance;
    if shift == 0.0 || fam.is_lambda_independent() {
        return Ok(causal(tol));
    }
    match fam {
        KrausFamily::UnitaryPhase(PhaseFn::Square { c }) => {
            // Phase −c·shift·(2λ + shift): half a turn apart gives the largest gap.
            let l1 = 0.5 * (probe.lo + probe.hi);
            let l2 = l1 + PI / (2.0 * c.abs() * shift.abs());
            let gap = (kappa_tilde(fam, l1, shift)? - kappa_tilde(fam, l2, shift)?).norm();
            Ok(CausalityVerdict { verdict: Verdict::Acausal, witness: Some(Witness { lambda1: l1, lambda2: l2, shift, gap }), tolerance: tol })
        }
        KrausFamily::Ideal(res) => {
            let r = r_t(res, -shift, probe.lo, probe.hi)?;
            let total = probe.hi - probe.lo;
            let ratio = r.measure() / total;
            if ratio <= tol || ratio >= 1.0 - tol {
                return Ok(causal(tol));
            }
            let inside = r.intervals()[0];
            let outside = r.complement().intersect(&crate::resolutions::IntervalSet::interval(probe.lo, probe.hi)).intervals()[0];
            let l1 = 0.5 * (inside.0 + inside.1);
            let l2 = 0.5 * (outside.0 + outside.1);
            let gap = (kappa_tilde(fam, l1, shift)? - kappa_tilde(fam, l2, shift)?).norm();
            Ok(CausalityVerdict { verdict: Verdict::Acausal, witness: Some(Witness { lambda1: l1, lambda2: l2, shift, gap }), tolerance: tol })
        }
        _ => dense_scan(fam, shift, probe),
    }
}

/// Verdict over a list of shifts: acausal at the first shift that is.
pub fn causality_verdict_scan(fam: &KrausFamily, shifts: &[f64], probe: Probe) -> Result<CausalityVerdict, KrausError> {
    for &s in shifts {
        let v = causality_verdict(fam, s, probe)?;
        if v.verdict == Verdict::Acausal {
            return Ok(v);
        }
    }
    Ok(causal(probe.tolerance))
}

/// χ(s) = e^{−t²W(g,g)/2} · W{κ̃(a·, tΔ(f,g))}(a⁻¹(sΔ(f,h) + itW(f,g))), a = √(W(f,f)/2).
pub fn chi(fam: &KrausFamily, ctx: &PairingContext, s: f64, t: f64) -> Result<Complex64, KrausError> {
    if !(ctx.w_ff > 0.0) {
        return Err(GaussianError::DegenerateWidth(ctx.w_ff).into());
    }
    let a = (ctx.w_ff / 2.0).sqrt();
    let shift = t * ctx.d_fg;
    let z = (s * ctx.d_fh + I * t * ctx.w_fg) / a;
    let pref = (-0.5 * t * t * ctx.w_gg).exp();
    if fam.is_lambda_independent() {
        // W{c} = c.
        return Ok(pref * kappa_tilde(fam, 0.0, shift)?);
    }
    let (lo, hi) = (a * (z.re - 30.0), a * (z.re + 30.0));
    let breaks: Vec<f64> = kappa_breaks(fam, shift, lo, hi).into_iter().map(|b| b / a).collect();
    let zeta = |x: f64| kappa_tilde(fam, a * x, shift).expect("pointwise κ̃ is infallible here");
    Ok(pref * weierstrass(&zeta, &breaks, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_overlaps() {
        let lin = KrausFamily::kick_linear(1.0);
        for l in [-1.0, 0.0, 2.5] {
            assert!((kappa_tilde(&lin, l, 0.7).unwrap() - (-I * 0.7).exp()).norm() < 1e-15);
        }
        let sq = KrausFamily::kick_square(1.0);
        let (l, s) = (0.4, 0.3);
        assert!((kappa_tilde(&sq, l, s).unwrap() - (-I * s * (2.0 * l + s)).exp()).norm() < 1e-14);
    }

    #[test]
    fn zero_shift_is_one() {
        for lit in ["kick:linear", "kick:square", "ideal:uniform:w=1", "weak:sigma=0.5", "l2:gaussian:sigma=0.5", "l2:box:w=1"] {
            let fam = KrausFamily::parse(lit).unwrap();
            for l in [-0.3, 0.0, 1.7] {
                assert!((kappa_tilde(&fam, l, 0.0).unwrap() - 1.0).norm() < 1e-10, "{lit}");
            }
        }
    }

    #[test]
    fn l2_overlaps_match_closed_forms() {
        let g = L2Kind::Gaussian { sigma: 0.5 };
        let s = 0.8f64;
        let want = (-s * s / (8.0 * 0.25)).exp();
        assert!((l2_autocorrelation(&g, s).unwrap() - want).norm() < 1e-12);
        let b = L2Kind::Box { width: 1.0 };
        assert!((l2_autocorrelation(&b, 0.3).unwrap() - 0.7).norm() < 1e-12);
        assert_eq!(l2_autocorrelation(&b, 1.5).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn literals_round_trip() {
        for lit in ["kick:linear:c=1", "kick:square:c=2", "ideal:svc:d=3", "weak:sigma=0.25", "l2:gaussian:sigma=0.5", "l2:box:w=1"] {
            let fam = KrausFamily::parse(lit).unwrap();
            assert_eq!(fam.to_string(), lit);
        }
        assert!(KrausFamily::parse("weak:sigma=0").is_err());
        assert!(KrausFamily::parse("ideal:uniform:w=-1").is_err());
        assert!(KrausFamily::parse("teleport:now").is_err());
    }

    #[test]
    fn ideal_verdicts() {
        let fam = KrausFamily::parse("ideal:uniform:w=1").unwrap();
        let v = causality_verdict(&fam, 0.3, Probe::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Acausal);
        let w = v.witness.unwrap();
        assert_eq!(w.gap, 1.0);
        assert_eq!(causality_verdict(&fam, 1.0, Probe::default()).unwrap().verdict, Verdict::Causal);
    }
}
