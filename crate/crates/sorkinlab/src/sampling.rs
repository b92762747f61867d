//! Simulated L²-Kraus measurements of φ(g) in the vacuum, and the unbiased
//! estimator of ⟨e^{itφ(g)}⟩ built from their outcomes.

use crate::format::g17;
use crate::gaussian_state::{char_fn, fourier, GaussianError};
use crate::kraus::L2Kind;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("kernel `{0}` cannot be sampled: {1}")]
    Unsampleable(String, String),
    #[error("estimator is ill-conditioned: |√(2π) F{{k̃}}(−t)| = {0:.3e}")]
    IllConditioned(f64),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// Smallest |√(2π) F{k̃}(−t)| accepted by the estimator.
pub const MIN_FOURIER_FACTOR: f64 = 1e-12;
/// Rejection attempts allowed per outcome.
pub const MAX_REJECTIONS: usize = 10_000;
const ENVELOPE_PROBES: usize = 4096;

#[derive(Debug, Clone)]
pub struct EstimatorPlan {
    pub t: f64,
    pub k: L2Kind,
    pub w_gg: f64,
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub seed: u64,
}

/// max(1, ⌈σ²/(ε²δ)⌉).
pub fn chebyshev_n(sigma2: f64, eps: f64, delta: f64) -> usize {
    let n = (sigma2 / (eps * eps * delta)).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// √(2π) F{k̃}(−t) = ∫ e^{−itx} k̃(x) dx.
pub fn kernel_fourier(k: &L2Kind, t: f64) -> Result<Complex64, SamplingError> {
    Ok(match k {
        L2Kind::Gaussian { sigma } => Complex64::new((-0.5 * sigma * sigma * t * t).exp(), 0.0),
        _ => {
            let (lo, hi, br) = k.support();
            let kt = |x: f64| Complex64::new(k.k_tilde(x), 0.0);
            (2.0 * PI).sqrt() * fourier(&kt, &br, lo, hi, -t)?
        }
    })
}

impl EstimatorPlan {
    /// Plan whose sample count is the Chebyshev bound for the analytic σ².
    pub fn new(t: f64, k: L2Kind, w_gg: f64, eps: f64, delta: f64, seed: u64) -> Result<Self, SamplingError> {
        let mut p = Self { t, k, w_gg, eps, delta, n: 1, seed };
        p.check_parameters()?;
        p.n = chebyshev_n(p.variance()?, eps, delta);
        Ok(p)
    }

    fn check_parameters(&self) -> Result<(), SamplingError> {
        if !(self.eps > 0.0 && self.delta > 0.0 && self.delta < 1.0) {
            return Err(SamplingError::Invalid(format!("need ε > 0 and 0 < δ < 1, got ε={}, δ={}", self.eps, self.delta)));
        }
        if !(self.w_gg >= 0.0 && self.w_gg.is_finite() && self.t.is_finite()) {
            return Err(SamplingError::Invalid(format!("need finite t and W(g,g) ≥ 0, got t={}, W={}", self.t, self.w_gg)));
        }
        Ok(())
    }

    /// Checks the parameters and N ≥ ⌈σ²/(ε²δ)⌉.
    pub fn validate(&self) -> Result<(), SamplingError> {
        self.check_parameters()?;
        let need = chebyshev_n(self.variance()?, self.eps, self.delta);
        if self.n < need {
            return Err(SamplingError::Invalid(format!("N = {} is below the Chebyshev bound {need}", self.n)));
        }
        Ok(())
    }

    /// e^{−t²W(g,g)/2}.
    pub fn target(&self) -> Complex64 {
        Complex64::new(char_fn(self.t, self.w_gg), 0.0)
    }

    /// σ² = E|η − μ|² = (2π|F{k̃}(−t)|²)⁻¹ − |μ|².
    pub fn variance(&self) -> Result<f64, SamplingError> {
        let f = conditioned_factor(&self.k, self.t)?;
        Ok((1.0 / f.norm_sqr() - self.target().norm_sqr()).max(0.0))
    }
}

fn conditioned_factor(k: &L2Kind, t: f64) -> Result<Complex64, SamplingError> {
    let f = kernel_fourier(k, t)?;
    if !(f.norm() >= MIN_FOURIER_FACTOR) {
        return Err(SamplingError::IllConditioned(f.norm()));
    }
    Ok(f)
}

/// Draws from k̃: inverse CDF for the Gaussian kernel, rejection under a
/// Gaussian envelope otherwise.
enum NoiseSampler {
    Gaussian { sigma: f64 },
    Rejection { centre: f64, sd: f64, bound: f64 },
}

impl NoiseSampler {
    fn new(k: &L2Kind) -> Result<Self, SamplingError> {
        let name = format!("{k:?}");
        if let L2Kind::Gaussian { sigma } = k {
            return Ok(NoiseSampler::Gaussian { sigma: *sigma });
        }
        let (lo, hi, _) = k.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SamplingError::Unsampleable(name, "support is not a bounded interval".into()));
        }
        let centre = 0.5 * (lo + hi);
        let sd = 0.5 * (hi - lo);
        let env = |x: f64| (-(x - centre).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt());
        let mut bound: f64 = 0.0;
        for i in 0..ENVELOPE_PROBES {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / ENVELOPE_PROBES as f64;
            let r = k.k_tilde(x) / env(x);
            if !r.is_finite() {
                return Err(SamplingError::Unsampleable(name, format!("k̃ is not finite at {x}")));
            }
            bound = bound.max(r);
        }
        if !(bound > 0.0) {
            return Err(SamplingError::Unsampleable(name, "k̃ vanishes on its support".into()));
        }
        Ok(NoiseSampler::Rejection { centre, sd, bound: 1.05 * bound })
    }

    fn draw<R: Rng>(&self, k: &L2Kind, rng: &mut R) -> Result<f64, SamplingError> {
        match *self {
            NoiseSampler::Gaussian { sigma } => {
                // u ∈ (0,1) so inverf stays finite
                let u = (rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) + 0.5 / (1u64 << 53) as f64;
                Ok(sigma * SQRT_2 * puruspe::inverf(2.0 * u - 1.0))
            }
            NoiseSampler::Rejection { centre, sd, bound } => {
                for _ in 0..MAX_REJECTIONS {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = centre + sd * z;
                    let env = (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt());
                    if rng.gen::<f64>() * bound * env < k.k_tilde(x) {
                        return Ok(x);
                    }
                }
                Err(SamplingError::Unsampleable(format!("{k:?}"), format!("no acceptance in {MAX_REJECTIONS} proposals")))
            }
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Outcomes γ = λ − x with λ ~ Normal(0, W(g,g)) and x ~ k̃, so that
/// γ has density tr(ρ k̃(φ(g) − γ)).
pub fn sample_outcomes(plan: &EstimatorPlan) -> Result<Vec<f64>, SamplingError> {
    sample_outcomes_stream(plan, 0)
}

pub fn sample_outcomes_stream(plan: &EstimatorPlan, stream: u64) -> Result<Vec<f64>, SamplingError> {
    plan.check_parameters()?;
    let noise = NoiseSampler::new(&plan.k)?;
    let mut rng = stream_rng(plan.seed, stream);
    let sd = plan.w_gg.sqrt();
    (0..plan.n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            Ok(sd * z - noise.draw(&plan.k, &mut rng)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: Complex64,
    pub target: Complex64,
    pub err: f64,
    pub pass: bool,
}

/// Sample mean of η(γ) = e^{itγ}/(√(2π) F{k̃}(−t)).
pub fn estimate(outcomes: &[f64], plan: &EstimatorPlan) -> Result<Estimate, SamplingError> {
    if outcomes.is_empty() {
        return Err(SamplingError::Invalid("no outcomes".into()));
    }
    let target = plan.target();
    if plan.t == 0.0 {
        return Ok(Estimate { mean: Complex64::new(1.0, 0.0), target, err: (target - 1.0).norm(), pass: (target - 1.0).norm() <= plan.eps });
    }
    let f = conditioned_factor(&plan.k, plan.t)?;
    let sum: Complex64 = outcomes.iter().map(|&g| Complex64::new(0.0, plan.t * g).exp()).sum();
    let mean = sum / (f * outcomes.len() as f64);
    let err = (mean - target).norm();
    Ok(Estimate { mean, target, err, pass: err <= plan.eps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub estimate: Estimate,
}

/// Independent replications, one RNG stream each.
pub fn replicate(plan: &EstimatorPlan, count: usize) -> Result<Vec<Replication>, SamplingError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let out = sample_outcomes_stream(plan, i as u64)?;
            Ok(Replication { index: i, estimate: estimate(&out, plan)? })
        })
        .collect()
}

pub fn pass_rate(reps: &[Replication]) -> f64 {
    reps.iter().filter(|r| r.estimate.pass).count() as f64 / reps.len().max(1) as f64
}

pub fn replications_csv(reps: &[Replication]) -> String {
    let mut out = String::from("replication,mean_re,mean_im,err,pass\n");
    for r in reps {
        let e = &r.estimate;
        let _ = writeln!(out, "{},{},{},{},{}", r.index, g17(e.mean.re), g17(e.mean.im), g17(e.err), e.pass);
    }
    out
}

/// sup |F_N − F| for a sorted sample against a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let c = cdf(x);
        d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::composite_gl;
    use std::sync::Arc;

    fn normal_cdf(x: f64, var: f64) -> f64 {
        0.5 * puruspe::erfc(-x / (2.0 * var).sqrt())
    }

    fn plan(k: L2Kind, t: f64, n: usize) -> EstimatorPlan {
        EstimatorPlan { t, k, w_gg: 0.4, eps: 0.05, delta: 0.1, n, seed: 7 }
    }

    /// k̃(x) = 2x on [0,1): skewed, so the sign of x in γ matters.
    fn ramp() -> L2Kind {
        L2Kind::Custom { name: "ramp".into(), k: Arc::new(|x: f64| Complex64::new((2.0 * x).sqrt(), 0.0)), lo: 0.0, hi: 1.0 }
    }

    #[test]
    fn chebyshev_formula() {
        assert_eq!(chebyshev_n(1.0, 0.1, 0.1), 1000);
        assert_eq!(chebyshev_n(0.0, 0.1, 0.1), 1);
        assert_eq!(chebyshev_n(0.5, 0.05, 0.1), 2000);
    }

    #[test]
    fn gaussian_outcome_variance() {
        let p = plan(L2Kind::Gaussian { sigma: 0.6 }, 1.0, 100_000);
        let out = sample_outcomes(&p).unwrap();
        let m = out.iter().sum::<f64>() / out.len() as f64;
        let v = out.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (out.len() - 1) as f64;
        let want = 0.4 + 0.36;
        assert!((v / want - 1.0).abs() < 0.05, "{v} vs {want}");
        let mut s = out.clone();
        s.sort_by(f64::total_cmp);
        assert!(ks_distance(&s, |x| normal_cdf(x, want)) < 0.01);
    }

    #[test]
    fn narrow_kernel_leaves_the_vacuum_distribution() {
        let p = plan(L2Kind::Gaussian { sigma: 1e-9 }, 1.0, 100_000);
        let mut s = sample_outcomes(&p).unwrap();
        s.sort_by(f64::total_cmp);
        assert!(ks_distance(&s, |x| normal_cdf(x, 0.4)) < 0.01);
    }

    #[test]
    fn skewed_kernel_matches_the_convolution_cdf() {
        // P(λ − x ≤ c) = ∫ Φ((c + x)/√W) k̃(x) dx
        let p = plan(ramp(), 1.0, 100_000);
        let mut s = sample_outcomes(&p).unwrap();
        s.sort_by(f64::total_cmp);
        let (xs, ws) = composite_gl(0.0, 1.0, 4, 16);
        let cdf = |c: f64| xs.iter().zip(&ws).map(|(x, w)| w * 2.0 * x * normal_cdf(c + x, 0.4)).sum::<f64>();
        assert!(ks_distance(&s, cdf) < 0.01);
        let e = estimate(&sample_outcomes(&EstimatorPlan { n: 400_000, ..p.clone() }).unwrap(), &p).unwrap();
        assert!(e.err < 0.01, "{e:?}");
    }

    #[test]
    fn box_kernel_is_sampled() {
        let p = plan(L2Kind::Box { width: 1.0 }, 1.0, 100_000);
        let mut s = sample_outcomes(&p).unwrap();
        s.sort_by(f64::total_cmp);
        let (xs, ws) = composite_gl(-0.5, 0.5, 4, 16);
        let cdf = |c: f64| xs.iter().zip(&ws).map(|(x, w)| w * normal_cdf(c + x, 0.4)).sum::<f64>();
        assert!(ks_distance(&s, cdf) < 0.01);
    }

    #[test]
    fn zero_t_is_exact() {
        let p = plan(L2Kind::Gaussian { sigma: 0.5 }, 0.0, 10);
        let e = estimate(&sample_outcomes(&p).unwrap(), &p).unwrap();
        assert_eq!(e.mean, Complex64::new(1.0, 0.0));
        assert_eq!(e.target, Complex64::new(1.0, 0.0));
        assert!(e.pass);
    }

    #[test]
    fn vanishing_fourier_factor_is_rejected() {
        // the unit box has F{k̃}(−2π) = 0
        let p = plan(L2Kind::Box { width: 1.0 }, 2.0 * PI, 10);
        assert!(matches!(estimate(&[0.0], &p), Err(SamplingError::IllConditioned(_))));
    }

    #[test]
    fn target_is_the_characteristic_function() {
        let p = plan(L2Kind::Gaussian { sigma: 0.5 }, 1.3, 1);
        assert_eq!(p.target().re, crate::gaussian_state::char_fn(1.3, 0.4));
    }

    #[test]
    fn variance_matches_the_sample_second_moment() {
        let p = plan(ramp(), 1.5, 200_000);
        let out = sample_outcomes(&p).unwrap();
        let f = kernel_fourier(&p.k, p.t).unwrap();
        let etas: Vec<Complex64> = out.iter().map(|&g| Complex64::new(0.0, p.t * g).exp() / f).collect();
        let m: Complex64 = etas.iter().sum::<Complex64>() / etas.len() as f64;
        let v = etas.iter().map(|e| (e - m).norm_sqr()).sum::<f64>() / (etas.len() - 1) as f64;
        let want = p.variance().unwrap();
        assert!((v / want - 1.0).abs() < 0.02, "{v} vs {want}");
    }

    #[test]
    fn seeded_determinism() {
        let p = plan(ramp(), 1.0, 1000);
        assert_eq!(sample_outcomes(&p).unwrap(), sample_outcomes(&p).unwrap());
        assert_ne!(sample_outcomes_stream(&p, 1).unwrap(), sample_outcomes(&p).unwrap());
    }

    #[test]
    fn pass_rate_at_the_chebyshev_bound() {
        let p = EstimatorPlan::new(1.0, L2Kind::Gaussian { sigma: 0.5 }, 0.25, 0.05, 0.1, 11).unwrap();
        p.validate().unwrap();
        assert!(EstimatorPlan { n: p.n - 1, ..p.clone() }.validate().is_err());
        let reps = replicate(&p, 500).unwrap();
        assert!(pass_rate(&reps) >= 0.9);
        let grand: Complex64 = reps.iter().map(|r| r.estimate.mean).sum::<Complex64>() / reps.len() as f64;
        let se = (p.variance().unwrap() / (p.n * reps.len()) as f64).sqrt();
        assert!((grand - p.target()).norm() < 5.0 * se);
        let csv = replications_csv(&reps[..2]);
        assert!(csv.starts_with("replication,mean_re,mean_im,err,pass\n0,"));
    }
}
