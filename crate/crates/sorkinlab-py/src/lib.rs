//! Python bindings. Kraus families and resolutions are passed as the same
//! literals the command line accepts, e.g. `ideal:uniform:w=1`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use sorkinlab::deco::{binned_decoherence, BobBranch};
use sorkinlab::fock_oracle::{ChiOracle, FockSpace};
use sorkinlab::kraus::{self, KrausFamily, Probe};
use sorkinlab::oscillator2d::OscState;
use sorkinlab::propagators::{causet_retarded_green, sj_modes};
use sorkinlab::resolutions::{self, Resolution};
use sorkinlab::sampling::{self, EstimatorPlan};
use sorkinlab::scenario::{self, Lab, SorkinScenario};
use sorkinlab::spacetime;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(lit: &str) -> PyResult<KrausFamily> {
    KrausFamily::parse(lit).map_err(err)
}

fn resolution(lit: &str) -> PyResult<Resolution> {
    Resolution::parse(lit).map_err(err)
}

#[pyclass(name = "CausalSet", module = "sorkinlab_py")]
#[derive(Clone)]
pub struct PyCausalSet {
    inner: spacetime::CausalSet,
}

#[pymethods]
impl PyCausalSet {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: spacetime::CausalSet::from_text(text).map_err(err)? })
    }

    #[staticmethod]
    fn from_links(n: usize, links: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: spacetime::CausalSet::from_links(n, &links).map_err(err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    fn links(&self) -> Vec<(usize, usize)> {
        self.inner.links()
    }

    fn precedes(&self, x: usize, y: usize) -> bool {
        self.inner.precedes(x, y)
    }

    fn is_transitive(&self, k: Vec<usize>) -> bool {
        self.inner.is_transitive(&k).is_transitive()
    }

    /// (G_R, Δ) as nested lists.
    fn propagators(&self, mass: f64, density: f64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let p = causet_retarded_green(&self.inner, mass, density).map_err(err)?;
        let n = p.n();
        let rows = |m: &sorkinlab::linalg::RMat| (0..n).map(|i| (0..n).map(|j| m.read(i, j)).collect()).collect();
        Ok((rows(&p.g_ret), rows(&p.delta)))
    }

    /// Spectrum of iΔ, ascending.
    fn i_delta_spectrum(&self, mass: f64, density: f64) -> PyResult<Vec<f64>> {
        let p = causet_retarded_green(&self.inner, mass, density).map_err(err)?;
        Ok(sj_modes(&p).spectrum)
    }
}

#[pyfunction]
fn sprinkle(t_range: (f64, f64), x_range: (f64, f64), density: f64, seed: u64) -> PyResult<PyCausalSet> {
    Ok(PyCausalSet { inner: spacetime::sprinkle(t_range, x_range, density, seed).map_err(err)? })
}

#[pyclass(name = "Scenario", module = "sorkinlab_py")]
#[derive(Clone)]
pub struct PyScenario {
    inner: SorkinScenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn four_point() -> PyResult<Self> {
        Ok(Self { inner: scenario::four_point_scenario().map_err(err)? })
    }

    #[staticmethod]
    fn from_causet(causet: &PyCausalSet, mass: f64, density: f64, f: Vec<f64>, k: Vec<usize>) -> PyResult<Self> {
        let sc = scenario::build_causet_scenario(&causet.inner, mass, density, &f, &k, scenario::SearchBudget::default()).map_err(err)?;
        Ok(Self { inner: sc })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: SorkinScenario::from_text(text).map_err(err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn d_fg(&self) -> f64 {
        self.inner.d_fg
    }

    #[getter]
    fn d_fh(&self) -> f64 {
        self.inner.d_fh
    }

    #[getter]
    fn d_gh(&self) -> f64 {
        self.inner.d_gh
    }

    #[getter]
    fn w_ff(&self) -> PyResult<f64> {
        Ok(self.inner.ctx().map_err(err)?.w_ff)
    }

    #[getter]
    fn w_gg(&self) -> PyResult<f64> {
        Ok(self.inner.ctx().map_err(err)?.w_gg)
    }

    #[getter]
    fn w_fg(&self) -> PyResult<Complex64> {
        Ok(self.inner.ctx().map_err(err)?.w_fg)
    }

    /// Bob's ⟨e^{itφ(g)}⟩ after Alice's kick s and Charlie's measurement.
    fn chi(&self, family_lit: &str, s: f64, t: f64) -> PyResult<Complex64> {
        let ctx = self.inner.ctx().map_err(err)?;
        kraus::chi(&family(family_lit)?, ctx, s, t).map_err(err)
    }

    /// (χ values, max_s |χ(s) − χ(0)|).
    fn signal_scan(&self, family_lit: &str, t: f64, s_grid: Vec<f64>) -> PyResult<(Vec<Complex64>, f64)> {
        let scan = scenario::signal_scan(&self.inner, &family(family_lit)?, t, &s_grid).map_err(err)?;
        Ok((scan.chi, scan.max_gap))
    }

    /// χ from the truncated Fock space, one value per s.
    fn chi_fock(&self, family_lit: &str, t: f64, s_grid: Vec<f64>, n_max: usize) -> PyResult<Vec<Complex64>> {
        let Lab::Causet { causet, mass, density, f, h, g, .. } = &self.inner.lab else {
            return Err(PyValueError::new_err("the Fock oracle needs a causet scenario"));
        };
        let p = causet_retarded_green(causet, *mass, *density).map_err(err)?;
        let fock = FockSpace::build(&sj_modes(&p), n_max).map_err(err)?;
        let o = ChiOracle::new(fock, f, g, h).map_err(err)?;
        o.chi_scan(&family(family_lit)?, t, &s_grid).map_err(err)
    }
}

/// (verdict, witness) where witness is (λ₁, λ₂, shift, gap) or None.
#[pyfunction]
#[pyo3(signature = (family_lit, shift, tolerance = 1e-9))]
fn causality_verdict(family_lit: &str, shift: f64, tolerance: f64) -> PyResult<(String, Option<(f64, f64, f64, f64)>)> {
    let probe = Probe { tolerance, ..Probe::default() };
    let v = kraus::causality_verdict(&family(family_lit)?, shift, probe).map_err(err)?;
    Ok((v.verdict.to_string(), v.witness.map(|w| (w.lambda1, w.lambda2, w.shift, w.gap))))
}

/// Intervals of R_t inside [lo, hi).
#[pyfunction]
fn r_t(resolution_lit: &str, t: f64, lo: f64, hi: f64) -> PyResult<Vec<(f64, f64)>> {
    Ok(resolutions::r_t(&resolution(resolution_lit)?, t, lo, hi).map_err(err)?.intervals().to_vec())
}

#[pyfunction]
fn chebyshev_n(sigma2: f64, eps: f64, delta: f64) -> usize {
    sampling::chebyshev_n(sigma2, eps, delta)
}

/// Pass rate of estimator replications at the Chebyshev sample size.
#[pyfunction]
#[pyo3(signature = (kernel_lit, t, w_gg, eps, delta, replications, seed = 0))]
fn estimator_pass_rate(kernel_lit: &str, t: f64, w_gg: f64, eps: f64, delta: f64, replications: usize, seed: u64) -> PyResult<(usize, f64)> {
    let KrausFamily::L2Kernel(k) = family(kernel_lit)? else {
        return Err(PyValueError::new_err(format!("`{kernel_lit}` is not an l2 kernel")));
    };
    let plan = EstimatorPlan::new(t, k, w_gg, eps, delta, seed).map_err(err)?;
    let reps = sampling::replicate(&plan, replications).map_err(err)?;
    Ok((plan.n, sampling::pass_rate(&reps)))
}

/// Two-oscillator χ: (closed form, quadrature) for an ideal x̂+ŷ measurement.
#[pyfunction]
fn oscillator_chi(resolution_lit: &str, s: f64, t: f64) -> PyResult<(Complex64, Complex64)> {
    let o = OscState::default();
    let r = resolution(resolution_lit)?;
    Ok((o.chi_closed(s, t, &r).map_err(err)?, o.chi_quadrature(s, t, &r).map_err(err)?))
}

#[pyfunction]
fn oscillator_pure_point(s: f64, t: f64, eps: f64) -> PyResult<Complex64> {
    OscState::default().chi_pure_point(s, t, eps).map_err(err)
}

/// χ from the binned decoherence functional of the four-point causet.
#[pyfunction]
#[pyo3(signature = (resolution_lit, s, t, width, n_max = 20))]
fn deco_chi(resolution_lit: &str, s: f64, t: f64, width: f64, n_max: usize) -> PyResult<Complex64> {
    let p = causet_retarded_green(&scenario::four_point_causet(), 0.0, 1.0).map_err(err)?;
    let fock = FockSpace::build(&sj_modes(&p), n_max).map_err(err)?;
    let d = binned_decoherence(&fock, [0, 1, 2, 3], width, 0.0).map_err(err)?;
    Ok(d.chi(s, t, Some(&resolution(resolution_lit)?), 1.0, 1.0, BobBranch::Forward))
}

#[pymodule]
fn sorkinlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCausalSet>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(sprinkle, m)?)?;
    m.add_function(wrap_pyfunction!(causality_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(r_t, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_n, m)?)?;
    m.add_function(wrap_pyfunction!(estimator_pass_rate, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_chi, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_pure_point, m)?)?;
    m.add_function(wrap_pyfunction!(deco_chi, m)?)?;
    Ok(())
}
