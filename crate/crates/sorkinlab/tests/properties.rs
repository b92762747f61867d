use num_complex::Complex64;
use proptest::prelude::*;
use sorkinlab::fock_oracle::{spectral_projector, ChiOracle, FockSpace};
use sorkinlab::gaussian_state::{
    expect_via_weierstrass, expect_zeta_exp, fourier, inverse_fourier, moment, ComplexDensityQ, GaussianDensityP,
};
use sorkinlab::kraus::{causality_verdict, chi, kappa_tilde, KrausFamily, L2Kind, Probe, Verdict};
use sorkinlab::linalg::to_nc;
use sorkinlab::oscillator2d::OscState;
use sorkinlab::propagators::{causet_retarded_green, sj_modes, PairingContext};
use sorkinlab::quad::{integrate_with_breaks, Tolerance};
use sorkinlab::resolutions::{nontriviality_search, r_t, IntervalSet, Resolution};
use sorkinlab::sampling::{sample_outcomes, EstimatorPlan};
use sorkinlab::scenario::{build_causet_scenario, four_point_scenario, signal_scan, SearchBudget};
use sorkinlab::spacetime::{sprinkle, CausalSet, InOut};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn causet(seed: u64, density: f64) -> CausalSet {
    sprinkle((0.0, 1.0), (0.0, 1.0), density, seed).unwrap()
}

fn resolution() -> impl Strategy<Value = Resolution> {
    prop_oneof![
        (0.2f64..3.0, -1.0f64..1.0).prop_map(|(w, o)| Resolution::uniform(w, o).unwrap()),
        proptest::collection::vec(-3.0f64..3.0, 1..5).prop_filter_map("distinct cuts", |c| Resolution::threshold(c).ok()),
        (0u32..=4).prop_map(|d| Resolution::svc(d).unwrap()),
    ]
}

/// Consistent pairings with a PSD Gram matrix. W(f,f) stays small so that
/// unit bins are not washed out by the vacuum spread.
fn context() -> impl Strategy<Value = PairingContext> {
    (0.05f64..0.4, 0.2f64..2.0, -0.9f64..0.9, -1.0f64..1.0, 0.5f64..1.0, 0.2f64..1.0, any::<bool>()).prop_filter_map("nonzero Δ", |(wff, wgg, rho, dfg, frac, dfh, flip)| {
        let dfh = if flip { -dfh } else { dfh };
        // Im W(f,g) = Δ/2 and |W(f,g)|² ≤ W(f,f)W(g,g)
        let bound = (wff * wgg).sqrt();
        let im = dfg.signum() * frac * bound * 0.9;
        let re_room = (bound * bound * 0.81 - im * im).max(0.0).sqrt();
        let w_fg = Complex64::new(rho * re_room, im);
        let d_fg = 2.0 * im;
        if d_fg.abs() < 1e-3 || dfh.abs() < 1e-3 {
            return None;
        }
        PairingContext::new(d_fg, dfh, 0.0, wff, wgg, w_fg, w_fg.conj()).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sprinkled_order_is_closed_and_labelled(seed in 0u64..10_000, density in 5.0f64..60.0) {
        let cs = causet(seed, density);
        let n = cs.n_points();
        for x in 0..n {
            prop_assert!(!cs.precedes(x, x));
            for y in 0..n {
                if !cs.precedes(x, y) { continue; }
                for z in 0..n {
                    if cs.precedes(y, z) { prop_assert!(cs.precedes(x, z)); }
                }
            }
        }
        let order = cs.natural_labelling();
        let mut pos = vec![0; n];
        for (i, &x) in order.iter().enumerate() { pos[x] = i; }
        for x in 0..n { for y in 0..n { if cs.precedes(x, y) { prop_assert!(pos[x] < pos[y]); } } }
        prop_assert!(cs.is_naturally_labelled());
    }

    #[test]
    fn in_out_regions_are_convex_and_avoid_k(seed in 0u64..10_000, picks in proptest::collection::vec(0usize..1000, 1..5)) {
        let cs = causet(seed, 30.0);
        let n = cs.n_points();
        prop_assume!(n > 0);
        let mut k: Vec<usize> = picks.iter().map(|p| p % n).collect();
        k.sort_unstable();
        k.dedup();
        let minus = cs.in_out_region(&k, InOut::In);
        let plus = cs.in_out_region(&k, InOut::Out);
        prop_assert!(cs.is_causally_convex(&minus));
        prop_assert!(cs.is_causally_convex(&plus));
        for z in &k { prop_assert!(!minus.contains(z) && !plus.contains(z)); }
    }

    #[test]
    fn singletons_are_transitive(seed in 0u64..100_000, pick in 0usize..1000) {
        let cs = causet(seed, 40.0);
        prop_assume!(cs.n_points() > 0);
        prop_assert!(cs.is_transitive(&[pick % cs.n_points()]).is_transitive());
    }

    #[test]
    fn retarded_green_is_supported_in_the_past(seed in 0u64..10_000, mass in 0.0f64..3.0) {
        let cs = causet(seed, 30.0);
        let p = causet_retarded_green(&cs, mass, 30.0).unwrap();
        for x in 0..p.n() {
            for y in 0..p.n() {
                if p.g_ret.read(x, y) != 0.0 { prop_assert!(cs.precedes(y, x)); }
            }
        }
    }

    #[test]
    fn modes_reconstruct_i_delta(seed in 0u64..10_000, mass in 0.0f64..2.0) {
        // W − W̄ = Σλ(vv† − v̄vᵀ) = iΔ
        let cs = causet(seed, 25.0);
        let p = causet_retarded_green(&cs, mass, 25.0).unwrap();
        let m = sj_modes(&p);
        let n = p.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, v) in m.eigenvalues.iter().zip(&m.eigenvectors) {
                    acc += *l * (v[i] * v[j].conj() - v[i].conj() * v[j]);
                }
                worst = worst.max((acc - I * p.delta.read(i, j)).norm());
                let w = to_nc(m.w_matrix.read(i, j)) - to_nc(m.w_matrix.read(j, i));
                worst = worst.max((w - I * p.delta.read(i, j)).norm());
            }
        }
        prop_assert!(worst <= 1e-9, "{worst}");
        prop_assert!(m.pairing_defect() <= 1e-10);
    }

    #[test]
    fn fourier_round_trip_on_gaussians(c in -1.0f64..1.0, s in 0.5f64..2.0, x in -2.0f64..2.0) {
        let g = |y: f64| Complex64::new((-(y - c).powi(2) / (2.0 * s * s)).exp(), 0.0);
        let hat = |t: f64| fourier(&g, &[], c - 14.0 * s, c + 14.0 * s, t).unwrap();
        let back = inverse_fourier(&hat, -14.0 / s, 14.0 / s, x).unwrap();
        prop_assert!((back - g(x)).norm() < 1e-9, "{back} vs {}", g(x));
    }

    #[test]
    fn moments_match_quadrature(w in 0.2f64..3.0, n in 0u32..=8) {
        let p = GaussianDensityP::new(w).unwrap();
        let h = 14.0 * w.sqrt();
        let f = |l: f64| Complex64::new(l.powi(n as i32) * p.eval(l), 0.0);
        let q = integrate_with_breaks(&f, -h, h, &[0.0], Tolerance::default()).unwrap().value.re;
        prop_assert!((q - moment(n, w)).abs() <= 1e-8 * moment(n, w).max(1.0));
    }

    #[test]
    fn r_t_symmetry(res in resolution(), t in -2.0f64..2.0, lo in -3.0f64..1.0, len in 0.5f64..4.0) {
        let hi = lo + len;
        let a = r_t(&res, t, lo, hi).unwrap().measure();
        let b = r_t(&res, -t, lo - t, hi - t).unwrap().measure();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn nontriviality_on_every_family(res in resolution(), lo in -2.0f64..0.5, len in 0.6f64..4.0) {
        let hi = lo + len;
        // SVC and threshold bins must actually cut the window
        let cuts = res.edges_in(lo, hi);
        prop_assume!(!cuts.is_empty() && cuts.iter().any(|&c| c > lo));
        let nt = nontriviality_search(&res, lo, hi).unwrap();
        prop_assert!(nt.measure_ratio > 0.0 && nt.measure_ratio < 1.0);
    }

    #[test]
    fn canonicalization_is_idempotent(raw in proptest::collection::vec((-5.0f64..5.0, 0.0f64..2.0), 0..8)) {
        let s = IntervalSet::new(raw.iter().map(|&(a, l)| (a, a + l)).collect());
        prop_assert!(s.is_canonical());
        prop_assert_eq!(IntervalSet::new(s.intervals().to_vec()), s);
    }
}

fn families() -> Vec<KrausFamily> {
    vec![
        KrausFamily::kick_linear(1.3),
        KrausFamily::kick_square(0.7),
        KrausFamily::weak(0.4).unwrap(),
        KrausFamily::l2(L2Kind::Gaussian { sigma: 0.6 }).unwrap(),
        KrausFamily::l2(L2Kind::Box { width: 1.5 }).unwrap(),
        KrausFamily::Ideal(Resolution::uniform(1.0, 0.0).unwrap()),
        KrausFamily::Ideal(Resolution::svc(3).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn expectation_routes_agree(w_ff in 0.2f64..2.0, w_gg in 0.1f64..2.0, re in -0.5f64..0.5, im in -0.5f64..0.5, t in -1.5f64..1.5, which in 0usize..4, a in -1.0f64..1.0) {
        let ctx = ComplexDensityQ::new(w_ff, w_gg, Complex64::new(re, im), t).unwrap();
        let (zeta, breaks): (Box<dyn Fn(f64) -> Complex64>, Vec<f64>) = match which {
            0 => (Box::new(|_| Complex64::new(1.0, 0.0)), vec![]),
            1 => (Box::new(move |l: f64| (I * a * 2.0 * l).exp()), vec![]),
            2 => (Box::new(move |l: f64| if l >= a && l < a + 0.7 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }), vec![a, a + 0.7]),
            _ => {
                let kink = (a + 1.0).sqrt();
                (Box::new(move |l: f64| Complex64::new((l * l - a).clamp(-1.0, 1.0), 0.0)), vec![-kink, kink])
            }
        };
        let x = expect_zeta_exp(&*zeta, &breaks, &ctx).unwrap();
        let y = expect_via_weierstrass(&*zeta, &breaks, &ctx).unwrap();
        prop_assert!((x - y).norm() < 1e-7, "{x} vs {y}");
    }

    #[test]
    fn kappa_is_normalized_and_bounded(l in -5.0f64..5.0, shift in -3.0f64..3.0) {
        for fam in families() {
            prop_assert!((kappa_tilde(&fam, l, 0.0).unwrap() - 1.0).norm() < 1e-9);
            prop_assert!(kappa_tilde(&fam, l, shift).unwrap().norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn ideal_kappa_is_the_r_t_indicator(res in resolution(), probes in proptest::collection::vec((-4.0f64..4.0, -2.0f64..2.0), 400)) {
        let fam = KrausFamily::Ideal(res.clone());
        for (l, shift) in probes {
            let set = r_t(&res, -shift, -8.0, 8.0).unwrap();
            let want = if set.contains(l) { 1.0 } else { 0.0 };
            prop_assert_eq!(kappa_tilde(&fam, l, shift).unwrap().re, want);
        }
    }

    #[test]
    fn oscillator_routes_agree(res in resolution(), s in -1.5f64..1.5, t in 0.0f64..2.0) {
        let o = OscState::default();
        let a = o.chi_closed(s, t, &res).unwrap();
        let b = o.chi_quadrature(s, t, &res).unwrap();
        prop_assert!((a - b).norm() < 1e-6, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn verdicts_are_sound(ctx in context()) {
        let s_grid: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
        let scale = 1.0 / ctx.d_fg.abs();
        for fam in families() {
            let mut best: f64 = 0.0;
            let mut acausal = false;
            for k in 1..=12 {
                let t = 0.25 * k as f64 * scale;
                let v = causality_verdict(&fam, t * ctx.d_fg, Probe::default()).unwrap();
                acausal |= v.verdict == Verdict::Acausal;
                let c0 = chi(&fam, &ctx, 0.0, t).unwrap();
                for &s in &s_grid {
                    best = best.max((chi(&fam, &ctx, s, t).unwrap() - c0).norm());
                }
            }
            if acausal {
                prop_assert!(best > 1e-6, "{fam:?}: gap {best}");
            } else {
                prop_assert!(best <= 1e-7, "{fam:?}: gap {best}");
            }
        }
    }

    #[test]
    fn built_scenarios_satisfy_their_invariants(seed in 0u64..10_000, mass in 0.0f64..1.5, lo in 0.2f64..0.6) {
        let cs = causet(seed, 30.0);
        let coords = cs.coords().unwrap().to_vec();
        let k: Vec<usize> = (0..cs.n_points()).filter(|&i| coords[i].t >= lo && coords[i].t < lo + 0.25).collect();
        prop_assume!(!k.is_empty());
        let mut f = vec![0.0; cs.n_points()];
        for &i in &k { f[i] = 1.0; }
        if let Ok(sc) = build_causet_scenario(&cs, mass, 30.0, &f, &k, SearchBudget::default()) {
            prop_assert!(sc.d_gh.abs() <= 1e-10 && sc.d_fg.abs() > 1e-10 && sc.d_fh.abs() > 1e-10);
            let ctx = sc.ctx().unwrap();
            prop_assert!((ctx.w_fg - ctx.w_gf - I * ctx.d_fg).norm() <= 1e-9);
            let s_grid = [0.0, 0.7, 1.4];
            for fam in [KrausFamily::kick_linear(1.0), KrausFamily::weak(0.5).unwrap(), KrausFamily::l2(L2Kind::Gaussian { sigma: 0.4 }).unwrap()] {
                for t in [0.5, 1.0, 2.0] {
                    prop_assert!(signal_scan(&sc, &fam, t, &s_grid).unwrap().max_gap <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), sigma in 0.1f64..1.0) {
        let plan = EstimatorPlan { t: 1.0, k: L2Kind::Gaussian { sigma }, w_gg: 0.3, eps: 0.1, delta: 0.1, n: 500, seed };
        prop_assert_eq!(sample_outcomes(&plan).unwrap(), sample_outcomes(&plan).unwrap());
    }
}

#[test]
fn fock_truncation_converges_monotonically_for_smooth_families() {
    let sc = four_point_scenario().unwrap();
    let cs = sorkinlab::scenario::four_point_causet();
    let p = causet_retarded_green(&cs, 0.0, 1.0).unwrap();
    let modes = sj_modes(&p);
    let (f, g, h) = ([0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]);
    let s_grid = [0.0, 0.6, 1.2];
    let ctx = sc.ctx().unwrap();
    for fam in [KrausFamily::kick_square(1.0), KrausFamily::weak(0.3).unwrap(), KrausFamily::l2(L2Kind::Gaussian { sigma: 0.5 }).unwrap()] {
        let at = |n: usize| ChiOracle::new(FockSpace::build(&modes, n).unwrap(), &f, &g, &h).unwrap().chi_scan(&fam, 0.7, &s_grid).unwrap();
        let runs: Vec<Vec<Complex64>> = [20, 30, 40, 50].iter().map(|&n| at(n)).collect();
        let diffs: Vec<f64> = runs.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)).collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0] || d[1] < 1e-13), "{fam:?}: {diffs:?}");
        for (s, c) in s_grid.iter().zip(&runs[3]) {
            assert!((chi(&fam, ctx, *s, 0.7).unwrap() - c).norm() < 1e-9);
        }
    }
}

#[test]
fn shift_identity_holds_at_every_truncation() {
    let cs = sorkinlab::scenario::four_point_causet();
    let p = causet_retarded_green(&cs, 0.0, 1.0).unwrap();
    let modes = sj_modes(&p);
    let (f, g, h) = ([0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]);
    for n in [20, 30, 40] {
        let o = ChiOracle::new(FockSpace::build(&modes, n).unwrap(), &f, &g, &h).unwrap();
        let e = o.shift_identity_defect(&|l| (I * 0.8 * l).exp(), 0.5);
        assert!(e < 1e-10, "n={n}: {e}");
    }
}

#[test]
fn spectral_projectors_sum_to_the_identity() {
    let cs = sorkinlab::scenario::four_point_causet();
    let fock = FockSpace::build(&sj_modes(&causet_retarded_green(&cs, 0.0, 1.0).unwrap()), 8).unwrap();
    let f = [0.0, 1.0, 1.0, 0.0];
    let res = Resolution::uniform(0.37, 0.05).unwrap();
    let field = fock.field(&f).unwrap();
    let bound = (0..field.nrows()).map(|i| (0..field.ncols()).map(|j| field.read(i, j).norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut total = sorkinlab::linalg::CMat::zeros(fock.dim, fock.dim);
    for (_, bin) in res.bins_meeting(-bound - 1.0, bound + 1.0) {
        total = total + spectral_projector(&fock, &f, &bin).unwrap();
    }
    let id = sorkinlab::linalg::identity(fock.dim);
    assert!(sorkinlab::linalg::max_abs(&(total - id)) < 1e-10);
}

#[test]
fn csv_outputs_are_byte_identical_across_runs() {
    use clap::Parser;
    let run = |dir: &std::path::Path| {
        let out = dir.to_str().unwrap().to_string();
        for args in [
            vec!["sorkinlab", "sample", "--seed", "9", "-D", "replications=20", "--out", &out],
            vec!["sorkinlab", "chi-scan", "-D", "family=weak:sigma=0.4", "--out", &out],
            vec!["sorkinlab", "sprinkle", "--seed", "4", "--out", &out],
        ] {
            sorkinlab::cli::execute(&sorkinlab::cli::Cli::parse_from(args)).unwrap();
        }
        ["replications.csv", "chi.csv", "causet.txt", "sample.config"].map(|f| std::fs::read(dir.join(f)).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}
