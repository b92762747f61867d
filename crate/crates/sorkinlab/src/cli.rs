//! `sorkinlab` command-line front end. Every run writes its outputs and the
//! fully resolved configuration into `--out`; failures also leave an
//! `error.txt` record there.

use crate::deco::{binned_decoherence, marginal_independence_check, BobBranch, DecoError};
use crate::fock_oracle::{ChiOracle, FockError, FockSpace};
use crate::format::g17;
use crate::kraus::{causality_verdict, causality_verdict_scan, chi, KrausError, KrausFamily, Probe};
use crate::oscillator2d::{chi_curve_csv, max_gap, OscError, OscGrid, OscState};
use crate::propagators::continuum::{Bump, WOptions};
use crate::propagators::{causet_retarded_green, dump_complex, dump_real, sj_modes, MatrixKind, PropagatorError};
use crate::resolutions::{nontriviality_search, r_t, Resolution, ResolutionError};
use crate::sampling::{pass_rate, replicate, replications_csv, EstimatorPlan, SamplingError};
use crate::scenario::{
    build_causet_scenario, build_continuum_scenario, chi_csv, four_point_scenario, linspace, signal_scan, ContinuumOptions, Lab, ScenarioError,
    SearchBudget, SorkinScenario,
};
use crate::spacetime::{sprinkle, CausalSet, ContinuumRegion, Event2D, SpacetimeError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error(transparent)]
    Kraus(#[from] KrausError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Deco(#[from] DecoError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Oscillator(#[from] OscError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Spacetime(_) => "spacetime",
            CliError::Propagator(_) => "propagator",
            CliError::Resolution(_) => "resolution",
            CliError::Kraus(_) => "kraus",
            CliError::Scenario(ScenarioError::NoScenario(_)) => "no-scenario",
            CliError::Scenario(_) => "scenario",
            CliError::Fock(_) => "fock",
            CliError::Deco(_) => "deco",
            CliError::Sampling(_) => "sampling",
            CliError::Oscillator(_) => "oscillator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    None,
    Fock,
}

#[derive(Debug, Parser)]
#[command(name = "sorkinlab", version, about = "Measurements on smeared scalar fields and Sorkin's impossible measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum)]
    pub oracle: Option<OracleMode>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Extra key=value settings; they override the config file.
    #[arg(long = "set", short = 'D', global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Poisson-sprinkle a causal set into a rectangle.
    Sprinkle,
    /// Dump G_R, Δ or W of a causal set.
    Propagator,
    /// Build and validate a Sorkin scenario.
    Scenario,
    /// χ(s) at fixed t for a Kraus family.
    ChiScan,
    /// Causal or acausal verdict for a Kraus family.
    Verdict,
    /// R_t for a resolution and its non-triviality.
    Rt,
    /// L²-Kraus estimator replications.
    Sample,
    /// Binned decoherence functional on the four-point causet.
    Deco,
    /// Two-oscillator ideal and pure-point measurements.
    Oscillator,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sprinkle => "sprinkle",
            Command::Propagator => "propagator",
            Command::Scenario => "scenario",
            Command::ChiScan => "chi-scan",
            Command::Verdict => "verdict",
            Command::Rt => "rt",
            Command::Sample => "sample",
            Command::Deco => "deco",
            Command::Oscillator => "oscillator",
        }
    }
}

/// Flat key=value configuration. Lookups record the value they resolved to,
/// defaults included, so a run can write back exactly what it used.
#[derive(Debug, Default)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries, resolved: RefCell::default() })
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Everything looked up so far, as a config document.
    pub fn resolved_text(&self) -> String {
        self.resolved.borrow().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    fn record(&self, key: &str, value: &str) {
        self.resolved.borrow_mut().insert(key.to_string(), value.to_string());
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if let Some(v) = &v {
            self.record(key, v);
        }
        v
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self.entries.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    pub fn require(&self, key: &str) -> Result<String, CliError> {
        self.opt_str(key).ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    fn parse_as<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
        v.trim().parse().map_err(|_| CliError::Config(format!("bad value `{v}` for `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.entries.get(key) {
            Some(v) => {
                let x = Self::parse_as(key, v)?;
                self.record(key, &g17(x));
                Ok(x)
            }
            None => {
                self.record(key, &g17(default));
                Ok(default)
            }
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = match self.entries.get(key) {
            Some(v) => Self::parse_as(key, v)?,
            None => default,
        };
        self.record(key, &v.to_string());
        Ok(v)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        let v = match self.entries.get(key) {
            Some(v) => Self::parse_as(key, v)?,
            None => default,
        };
        self.record(key, &v.to_string());
        Ok(v)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        let v = match self.entries.get(key) {
            Some(v) => Self::parse_as(key, v)?,
            None => default,
        };
        self.record(key, &v.to_string());
        Ok(v)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.require(key)?;
        v.split(',').filter(|x| !x.trim().is_empty()).map(|x| Self::parse_as(key, x)).collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        let v = self.require(key)?;
        v.split(',').filter(|x| !x.trim().is_empty()).map(|x| Self::parse_as(key, x)).collect()
    }

    /// `<key>_min`, `<key>_max`, `<key>_n` as an even grid.
    pub fn grid(&self, key: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
        let a = self.f64_or(&format!("{key}_min"), lo)?;
        let b = self.f64_or(&format!("{key}_max"), hi)?;
        let n = self.usize_or(&format!("{key}_n"), n)?;
        if n == 0 || !(a <= b) {
            return Err(CliError::Config(format!("bad {key} grid [{a}, {b}] with {n} points")));
        }
        Ok(if n == 1 { vec![a] } else { linspace(a, b, n) })
    }
}

/// Merges the config file, `--set` overrides and the common flags.
pub fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set needs KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim());
    }
    if let Some(s) = common.seed {
        cfg.set("seed", s.to_string());
    }
    if let Some(t) = common.tolerance {
        cfg.set("tolerance", g17(t));
    }
    if let Some(o) = common.oracle {
        cfg.set("oracle", if o == OracleMode::Fock { "fock" } else { "none" });
    }
    Ok(cfg)
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    report: String,
}

impl Run<'_> {
    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        std::fs::write(self.out.join(name), body)?;
        Ok(())
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.report, "{key}={value}");
    }

    fn oracle(&self) -> Result<OracleMode, CliError> {
        match self.cfg.str_or("oracle", "none").as_str() {
            "none" => Ok(OracleMode::None),
            "fock" => Ok(OracleMode::Fock),
            other => Err(CliError::Config(format!("unknown oracle `{other}`"))),
        }
    }
}

fn load_causet(cfg: &ExperimentConfig) -> Result<CausalSet, CliError> {
    match cfg.opt_str("causet") {
        Some(p) => Ok(CausalSet::from_text(&std::fs::read_to_string(p)?)?),
        None => {
            let t = (cfg.f64_or("t_min", 0.0)?, cfg.f64_or("t_max", 1.0)?);
            let x = (cfg.f64_or("x_min", 0.0)?, cfg.f64_or("x_max", 1.0)?);
            Ok(sprinkle(t, x, cfg.f64_or("density", 50.0)?, cfg.u64_or("seed", 0)?)?)
        }
    }
}

fn parse_bump(key: &str, v: &str) -> Result<Bump, CliError> {
    let p: Vec<f64> = v.split(',').map(|x| ExperimentConfig::parse_as(key, x)).collect::<Result<_, _>>()?;
    match p.as_slice() {
        [t, x, r] if *r > 0.0 => Ok(Bump::new(Event2D::new(*t, *x), *r)),
        [t, x, r, a] if *r > 0.0 => Ok(Bump::new(Event2D::new(*t, *x), *r).scaled(*a)),
        _ => Err(CliError::Config(format!("`{key}` needs t,x,radius[,amplitude]"))),
    }
}

fn parse_region(v: &str) -> Result<ContinuumRegion, CliError> {
    let (shape, nums) = v.split_once(':').ok_or_else(|| CliError::Config(format!("bad region `{v}`")))?;
    let c: Vec<f64> = nums.split(',').map(|x| ExperimentConfig::parse_as("k", x)).collect::<Result<_, _>>()?;
    if c.len() != 4 {
        return Err(CliError::Config("region needs four numbers".into()));
    }
    match shape {
        "rect" => Ok(ContinuumRegion::Rect { t0: c[0], t1: c[1], x0: c[2], x1: c[3] }),
        "diamond" => Ok(ContinuumRegion::Diamond { u0: c[0], u1: c[1], v0: c[2], v1: c[3] }),
        _ => Err(CliError::Config(format!("unknown region `{shape}`"))),
    }
}

fn load_scenario(cfg: &ExperimentConfig) -> Result<SorkinScenario, CliError> {
    if let Some(p) = cfg.opt_str("scenario") {
        return Ok(SorkinScenario::from_text(&std::fs::read_to_string(p)?)?);
    }
    match cfg.str_or("lab", "four-point").as_str() {
        "four-point" => Ok(four_point_scenario()?),
        "causet" => {
            let cs = load_causet(cfg)?;
            let (mass, density) = (cfg.f64_or("mass", 0.0)?, cfg.f64_or("density", 50.0)?);
            let f = cfg.f64_list("f")?;
            let k = cfg.usize_list("k")?;
            Ok(build_causet_scenario(&cs, mass, density, &f, &k, SearchBudget::default())?)
        }
        "continuum" => {
            let mass = cfg.f64_or("mass", 1.0)?;
            let f = parse_bump("f", &cfg.str_or("f", "0,0,1"))?;
            let k = parse_region(&cfg.str_or("k", "diamond:-1.5,1.5,-1.5,1.5"))?;
            let opts = ContinuumOptions {
                with_vacuum: cfg.bool_or("with_vacuum", mass > 0.0)?,
                w_options: WOptions::default(),
                ..ContinuumOptions::default()
            };
            Ok(build_continuum_scenario(mass, f, k, opts)?)
        }
        other => Err(CliError::Config(format!("unknown lab `{other}`"))),
    }
}

fn cmd_sprinkle(run: &mut Run) -> Result<(), CliError> {
    let cs = load_causet(run.cfg)?;
    run.write("causet.txt", &cs.to_text())?;
    run.line("points", cs.n_points());
    run.line("links", cs.links().len());
    Ok(())
}

fn cmd_propagator(run: &mut Run) -> Result<(), CliError> {
    let cs = load_causet(run.cfg)?;
    let p = causet_retarded_green(&cs, run.cfg.f64_or("mass", 0.0)?, run.cfg.f64_or("density", 50.0)?)?;
    let kind = run.cfg.str_or("matrix", "delta");
    let (name, body) = match kind.as_str() {
        "gret" => ("gret.txt", dump_real(MatrixKind::Gret, &p.g_ret)),
        "delta" => ("delta.txt", dump_real(MatrixKind::Delta, &p.delta)),
        "w" => {
            let modes = sj_modes(&p);
            run.line("rank", modes.rank());
            run.line("pairing_defect", g17(modes.pairing_defect()));
            ("w.txt", dump_complex(MatrixKind::W, &modes.w_matrix))
        }
        other => return Err(CliError::Config(format!("unknown matrix `{other}` (gret, delta, w)"))),
    };
    run.write(name, &body)?;
    run.line("points", p.n());
    run.line("matrix", name);
    Ok(())
}

fn cmd_scenario(run: &mut Run) -> Result<(), CliError> {
    let sc = load_scenario(run.cfg)?;
    run.write("scenario.txt", &sc.to_text())?;
    run.line("d_fg", g17(sc.d_fg));
    run.line("d_fh", g17(sc.d_fh));
    run.line("d_gh", g17(sc.d_gh));
    run.line("validated", sc.validated.join(";"));
    Ok(())
}

fn fock_oracle_for(sc: &SorkinScenario, n_max: usize) -> Result<ChiOracle, CliError> {
    let Lab::Causet { causet, mass, density, f, h, g, .. } = &sc.lab else {
        return Err(CliError::Config("the Fock oracle needs a causet scenario".into()));
    };
    let p = causet_retarded_green(causet, *mass, *density)?;
    let fock = FockSpace::build(&sj_modes(&p), n_max)?;
    Ok(ChiOracle::new(fock, f, g, h)?)
}

fn cmd_chi_scan(run: &mut Run) -> Result<(), CliError> {
    let sc = load_scenario(run.cfg)?;
    let fam = KrausFamily::parse(&run.cfg.str_or("family", "ideal:uniform:w=1"))?;
    let t = run.cfg.f64_or("t", 1.0)?;
    let s = run.cfg.grid("s", -2.0, 2.0, 41)?;
    let scan = signal_scan(&sc, &fam, t, &s)?;
    run.line("max_gap", g17(scan.max_gap));
    let rows: Vec<_> = s.iter().zip(&scan.chi).map(|(&s, &c)| (s, t, c)).collect();
    if run.oracle()? == OracleMode::Fock {
        let oracle = fock_oracle_for(&sc, run.cfg.usize_or("n_max", 40)?)?;
        let fock = oracle.chi_scan(&fam, t, &s)?;
        let tol = run.cfg.f64_or("tolerance", 1e-4)?;
        let mut csv = String::from("s,t,re(chi),im(chi),fock_re,fock_im,abs_diff\n");
        let mut worst: f64 = 0.0;
        for (&(s, t, c), o) in rows.iter().zip(&fock) {
            let d = (c - o).norm();
            worst = worst.max(d);
            let _ = writeln!(csv, "{},{},{},{},{},{},{}", g17(s), g17(t), g17(c.re), g17(c.im), g17(o.re), g17(o.im), g17(d));
        }
        run.write("chi.csv", &csv)?;
        run.line("oracle_max_diff", g17(worst));
        run.line("oracle_within_tolerance", worst <= tol);
    } else {
        run.write("chi.csv", &chi_csv(&rows))?;
    }
    Ok(())
}

fn cmd_verdict(run: &mut Run) -> Result<(), CliError> {
    let fam = KrausFamily::parse(&run.cfg.str_or("family", "ideal:uniform:w=1"))?;
    let probe = Probe {
        lo: run.cfg.f64_or("lambda_min", -10.0)?,
        hi: run.cfg.f64_or("lambda_max", 10.0)?,
        samples: run.cfg.usize_or("samples", 4001)?,
        tolerance: run.cfg.f64_or("tolerance", 1e-9)?,
    };
    let v = match run.cfg.entries().contains_key("shifts") {
        true => causality_verdict_scan(&fam, &run.cfg.f64_list("shifts")?, probe)?,
        false => causality_verdict(&fam, run.cfg.f64_or("shift", 0.3)?, probe)?,
    };
    let mut body = format!("verdict={}\n", v.verdict);
    if let Some(w) = v.witness {
        let _ = writeln!(body, "witness_shift={}\nwitness_lambda1={}\nwitness_lambda2={}\nwitness_gap={}", g17(w.shift), g17(w.lambda1), g17(w.lambda2), g17(w.gap));
    }
    run.write("verdict.txt", &body)?;
    run.report.push_str(&body);
    Ok(())
}

fn cmd_rt(run: &mut Run) -> Result<(), CliError> {
    let res = Resolution::parse(&run.cfg.str_or("resolution", "uniform:w=1"))?;
    let t = run.cfg.f64_or("t", 0.25)?;
    let (lo, hi) = (run.cfg.f64_or("lo", 0.0)?, run.cfg.f64_or("hi", 4.0)?);
    let set = r_t(&res, t, lo, hi)?;
    let nt = nontriviality_search(&res, lo, hi)?;
    let body = format!("set={set}\nmeasure={}\nt_star={}\nmeasure_ratio={}\n", g17(set.measure()), g17(nt.t_star), g17(nt.measure_ratio));
    run.write("rt.txt", &body)?;
    run.report.push_str(&body);
    Ok(())
}

fn cmd_sample(run: &mut Run) -> Result<(), CliError> {
    let lit = run.cfg.str_or("kernel", "l2:gaussian:sigma=0.5");
    let KrausFamily::L2Kernel(k) = KrausFamily::parse(&lit)? else {
        return Err(CliError::Config(format!("`{lit}` is not an l2 kernel")));
    };
    let mut plan = EstimatorPlan::new(
        run.cfg.f64_or("t", 1.0)?,
        k,
        run.cfg.f64_or("w_gg", 0.25)?,
        run.cfg.f64_or("eps", 0.05)?,
        run.cfg.f64_or("delta", 0.1)?,
        run.cfg.u64_or("seed", 0)?,
    )?;
    let bound = plan.n;
    plan.n = run.cfg.usize_or("n", bound)?;
    plan.validate()?;
    let reps = replicate(&plan, run.cfg.usize_or("replications", 200)?)?;
    run.write("replications.csv", &replications_csv(&reps))?;
    run.line("n", plan.n);
    run.line("variance", g17(plan.variance()?));
    run.line("pass_rate", g17(pass_rate(&reps)));
    Ok(())
}

fn cmd_deco(run: &mut Run) -> Result<(), CliError> {
    let sc = four_point_scenario()?;
    let Lab::Causet { causet, mass, density, f, .. } = &sc.lab else { unreachable!("four-point lab is a causet") };
    let n_max = run.cfg.usize_or("n_max", 20)?;
    let fock = FockSpace::build(&sj_modes(&causet_retarded_green(causet, *mass, *density)?), n_max)?;
    let d = binned_decoherence(&fock, [0, 1, 2, 3], run.cfg.f64_or("width", 0.1)?, run.cfg.f64_or("offset", 0.0)?)?;
    let res = Resolution::parse(&run.cfg.str_or("resolution", "uniform:w=1"))?;
    let t = run.cfg.f64_or("t", 0.8)?;
    let s = run.cfg.grid("s", 0.0, 1.0, 5)?;
    let fam = KrausFamily::Ideal(res.clone());
    let oracle = match run.oracle()? {
        OracleMode::Fock => Some(fock_oracle_for(&sc, n_max)?),
        OracleMode::None => None,
    };
    let mut csv = String::from("s,t,deco_re,deco_im,analytic_re,analytic_im");
    csv.push_str(if oracle.is_some() { ",fock_re,fock_im\n" } else { "\n" });
    for &si in &s {
        let dc = d.chi(si, t, Some(&res), f[1], f[2], BobBranch::Forward);
        let an = chi(&fam, sc.ctx()?, si, t)?;
        let _ = write!(csv, "{},{},{},{},{},{}", g17(si), g17(t), g17(dc.re), g17(dc.im), g17(an.re), g17(an.im));
        if let Some(o) = &oracle {
            let c = o.chi(&fam, si, t)?;
            let _ = write!(csv, ",{},{}", g17(c.re), g17(c.im));
        }
        csv.push('\n');
    }
    run.write("deco_chi.csv", &csv)?;
    run.write("deco_factors.csv", &d.factors_csv())?;
    run.line("shape", format!("{:?}", d.shape()));
    run.line("normalization_defect", g17(d.normalization_defect));
    run.line("marginal_deviation", g17(marginal_independence_check(&d, &s, t, None, f[1], f[2])));
    run.line("measured_deviation", g17(marginal_independence_check(&d, &s, t, Some(&res), f[1], f[2])));
    Ok(())
}

fn cmd_oscillator(run: &mut Run) -> Result<(), CliError> {
    let osc = OscState::new(OscGrid::default())?;
    let res = Resolution::parse(&run.cfg.str_or("resolution", "uniform:w=2"))?;
    let t = run.cfg.f64_or("t", 0.5)?;
    let eps = run.cfg.f64_or("eps", 0.5)?;
    let s = run.cfg.grid("s", -1.0, 1.0, 21)?;
    let mut rows = Vec::with_capacity(s.len());
    for &si in &s {
        rows.push((si, t, osc.chi_closed(si, t, &res)?, osc.chi_quadrature(si, t, &res)?, osc.chi_pure_point(si, t, eps)?));
    }
    run.write("oscillator.csv", &chi_curve_csv(&rows))?;
    run.line("ideal_gap", g17(max_gap(&s, |x| osc.chi_closed(x, t, &res))?));
    run.line("pure_point_gap", g17(max_gap(&s, |x| osc.chi_pure_point(x, t, eps))?));
    let agree = rows.iter().map(|r| (r.2 - r.3).norm()).fold(0.0, f64::max);
    run.line("closed_vs_quadrature", g17(agree));
    Ok(())
}

/// Caps the global rayon pool at `SORKINLAB_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("SORKINLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Runs one command; returns the stdout report.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = load_config(&cli.common)?;
    std::fs::create_dir_all(&cli.common.out)?;
    let mut run = Run { cfg: &cfg, out: &cli.common.out, report: String::new() };
    match cli.command {
        Command::Sprinkle => cmd_sprinkle(&mut run),
        Command::Propagator => cmd_propagator(&mut run),
        Command::Scenario => cmd_scenario(&mut run),
        Command::ChiScan => cmd_chi_scan(&mut run),
        Command::Verdict => cmd_verdict(&mut run),
        Command::Rt => cmd_rt(&mut run),
        Command::Sample => cmd_sample(&mut run),
        Command::Deco => cmd_deco(&mut run),
        Command::Oscillator => cmd_oscillator(&mut run),
    }?;
    let name = cli.command.name();
    run.write(&format!("{name}.config"), &format!("command={name}\n{}", cfg.resolved_text()))?;
    Ok(run.report)
}

/// Error record written to stderr and `error.txt`.
pub fn error_record(command: &str, e: &CliError) -> String {
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("error command={command} kind={} message=\"{msg}\"\n", e.kind())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();
    match execute(&cli) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            let rec = error_record(cli.command.name(), &e);
            eprint!("{rec}");
            let _ = std::fs::create_dir_all(&cli.common.out).and_then(|_| std::fs::write(cli.common.out.join("error.txt"), &rec));
            1
        }
    }
}
