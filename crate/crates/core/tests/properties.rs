use num_traits::Zero;
use proptest::prelude::*;
use qbdc_core::certificate::search_lyapunov_certificate;
use qbdc_core::channel::{interior_choi_min_eigenvalue, TransitionRates};
use qbdc_core::criteria::{classical_profile, estimate_kappa, maser_kappa, TridiagonalTest};
use qbdc_core::invariant::{convergence_trace, DEFAULT_TOL};
use qbdc_core::linalg::{min_eigenvalue, trace_norm};
use qbdc_core::random_tau::{irreducibility_scan, jc_sequences};
use qbdc_core::*;

fn zeta() -> impl Strategy<Value = C64> {
    (0.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn coupling(len: usize) -> impl Strategy<Value = Coupling> {
    prop_oneof![
        (0.0..std::f64::consts::TAU).prop_map(|p| Coupling::Toy { alpha: p.cos(), beta: p.sin() }),
        (0.1..3.0f64, 0.1..3.0f64).prop_map(|(g, tau)| Coupling::JaynesCummings { g, tau }),
        proptest::collection::vec(0.0..std::f64::consts::TAU, len).prop_map(|ph| {
            let mut alpha = vec![1.0];
            let mut beta = vec![0.0];
            alpha.extend(ph.iter().map(|p| p.cos()));
            beta.extend(ph.iter().map(|p| p.sin()));
            Coupling::Explicit { alpha, beta }
        }),
    ]
}

fn params(max_dim: usize) -> impl Strategy<Value = (MaserParams, usize)> {
    (3..=max_dim).prop_flat_map(|dim| {
        (0.0..=1.0f64, zeta(), coupling(dim + 1))
            .prop_map(move |(l, z, c)| (MaserParams::new(l, z, c).unwrap(), dim))
    })
}

fn random_matrix(dim: usize, support: usize, entries: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..support {
        for j in 0..support {
            let k = 2 * (i * support + j);
            m[(i, j)] = C64::new(entries[k], entries[k + 1]);
        }
    }
    m
}

fn psd(dim: usize, support: usize, entries: &[f64]) -> CMatrix {
    let a = random_matrix(dim, support, entries);
    let m = &a * a.adjoint();
    let tr = m.trace();
    m / tr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extracted_rates_match_closed_form((p, dim) in params(60)) {
        let ch = build_maser_channel(&p, dim).unwrap();
        let ex = extract_transition_rates(&ch).unwrap();
        let cf = closed_form_rates(&p, dim - 2).unwrap();
        for n in 0..=dim - 2 {
            prop_assert!((ex.lam[n] - cf.lam[n]).abs() < 1e-12);
            prop_assert!((ex.mu[n] - cf.mu[n]).abs() < 1e-12);
            prop_assert!((ex.sigma[n] - cf.sigma[n]).abs() < 1e-12);
            prop_assert!((ex.eta[n] - cf.eta[n]).norm() < 1e-12);
            prop_assert!((ex.sigma[n] + ex.lam[n] + ex.mu[n] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unital_on_every_window((p, dim) in params(30)) {
        let ch = build_maser_channel(&p, dim).unwrap();
        for m in 0..dim - 1 {
            let id = CMatrix::identity(m + 2, m + 2);
            let out = heisenberg_apply_window(&ch, &id, m).unwrap();
            let err = (out - CMatrix::identity(m + 1, m + 1)).iter().fold(0.0f64, |a, v| a.max(v.norm()));
            prop_assert!(err < 1e-14, "m = {m}: {err}");
        }
    }

    #[test]
    fn predual_is_adjoint(
        (p, dim) in params(16),
        rho in proptest::collection::vec(-1.0..1.0f64, 2 * 16 * 16),
        x in proptest::collection::vec(-1.0..1.0f64, 2 * 16 * 16),
    ) {
        let ch = build_maser_channel(&p, dim).unwrap();
        let s = dim - 1;
        let r = random_matrix(dim, s, &rho);
        let xm = random_matrix(dim, s, &x);
        let lhs = (&r * ch.apply(&xm)).trace();
        let rhs = (ch.apply_predual(&r) * &xm).trace();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn interior_choi_is_psd((p, dim) in params(10)) {
        prop_assume!(dim >= 4);
        let ch = build_maser_channel(&p, dim).unwrap();
        prop_assert!(interior_choi_min_eigenvalue(&ch) >= -1e-10);
    }

    #[test]
    fn verdict_depends_on_modulus_of_nu(
        l in 0.0..=1.0f64,
        z in zeta(),
        theta in 0.0..std::f64::consts::TAU,
        phase in 0.0..std::f64::consts::TAU,
    ) {
        let c = Coupling::Toy { alpha: phase.cos(), beta: phase.sin() };
        let a = classify_maser_point(&MaserParams::new(l, z, c.clone()).unwrap());
        let b = classify_maser_point(&MaserParams::new(l, z * C64::from_polar(1.0, theta), c).unwrap());
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.criterion, b.criterion);
    }

    #[test]
    fn classical_reduction(
        ratio in prop_oneof![0.2..0.9f64, 1.1..3.0f64],
        mu in proptest::collection::vec(0.05..0.3f64, 41),
        noise in proptest::collection::vec(0.95..1.05f64, 41),
    ) {
        let cutoff = 40;
        let mut lam = vec![0.0; cutoff + 1];
        for n in 0..cutoff {
            lam[n] = (ratio * noise[n] * mu[n + 1]).min(0.6);
        }
        lam[cutoff] = lam[cutoff - 1];
        let mut mu = mu;
        mu[0] = 0.0;
        let sigma = (0..=cutoff).map(|n| 1.0 - lam[n] - mu[n]).collect();
        let rates = TransitionRates { sigma, mu, lam, eta: vec![C64::zero(); cutoff + 1], cutoff };
        let kappa = estimate_kappa(&rates, 0.25).unwrap();
        let v = check_existence(&rates, &kappa);
        let prof = classical_profile(&rates).unwrap();
        prop_assert_eq!(v.verdict == Verdict::Exists, prof.summable(), "ratio {}", ratio);
    }

    #[test]
    fn direct_and_cesaro_agree(l in 0.05..0.3f64, z in zeta(), phase in 0.2..1.4f64) {
        let p = MaserParams::toy(l, z * 0.5, phase.cos(), phase.sin()).unwrap();
        let ch = build_maser_channel(&p, 30).unwrap();
        let tol = 1e-9;
        if let Ok(direct) = solve_invariant_direct(&ch, DEFAULT_TOL) {
            let residual = trace_norm(&(ch.apply_predual(&direct.entries) - &direct.entries));
            prop_assert!(residual < 10.0 * DEFAULT_TOL, "{residual}");
            if let Ok(ces) = solve_invariant_cesaro(&ch, &DensityMatrix::vacuum(30), 200_000, tol) {
                prop_assert!(ces.trace_distance(&direct) < 10.0 * DEFAULT_TOL);
            }
        }
    }

    #[test]
    fn predual_contracts_trace_distance(
        l in 0.05..0.45f64,
        z in zeta(),
        phase in 0.0..std::f64::consts::TAU,
        seed in proptest::collection::vec(-1.0..1.0f64, 2 * 6 * 6),
    ) {
        let p = MaserParams::toy(l, z, phase.cos(), phase.sin()).unwrap();
        let ch = build_maser_channel(&p, 20).unwrap();
        let Ok(phi) = solve_invariant_direct(&ch, 1e-6) else { return Ok(()) };
        let theta = DensityMatrix::new(psd(20, 6, &seed)).unwrap();
        let tr = convergence_trace(&ch, &theta, &phi, 60).unwrap();
        prop_assert!(tr.max_increase() <= 1e-12, "{}", tr.max_increase());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn tridiagonal_test_is_sound(
        n in 1usize..=50,
        diag in proptest::collection::vec(0.0..2.0f64, 50),
        off in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 49),
        scale in 0.0..1.2f64,
    ) {
        let d = &diag[..n];
        let o: Vec<C64> = off[..n - 1].iter().map(|(a, b)| C64::new(*a, *b) * scale).collect();
        if tridiagonal_psd_sufficient(d, &o).unwrap() == TridiagonalTest::Positive {
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = C64::new(d[i], 0.0);
            }
            for i in 0..n - 1 {
                m[(i, i + 1)] = o[i];
                m[(i + 1, i)] = o[i].conj();
            }
            prop_assert!(min_eigenvalue(&m) >= -1e-10);
        }
    }
}

#[test]
fn inconclusive_example() {
    let t = tridiagonal_psd_sufficient(&[1.0, 1.0], &[C64::new(1.0, 0.0)]).unwrap();
    assert_eq!(t, TridiagonalTest::Inconclusive);
}

#[test]
fn lyapunov_certificate_bounds_the_tail_mass() {
    for lambda in [0.05, 0.1, 0.15] {
        let p = MaserParams::toy(lambda, C64::new(1.0, 0.0), 0.6, 0.8).unwrap();
        let ch = build_maser_channel(&p, 60).unwrap();
        let rates = extract_transition_rates(&ch).unwrap();
        let kappa = estimate_kappa(&rates, 0.25).unwrap().with_analytic(maser_kappa(lambda).unwrap());
        let cert = search_lyapunov_certificate(&ch, &rates, &kappa, 8).unwrap();
        assert!(cert.verified);
        let l = cert.lyapunov().unwrap();
        let rho = solve_invariant_direct(&ch, DEFAULT_TOL).unwrap();
        let top = l.y.iter().copied().fold(0.0f64, f64::max);
        let pairs: Vec<(f64, f64)> = (1..=8).map(|k| (top * k as f64 / 8.0, top)).filter(|p| p.0 > 0.0).collect();
        let rep = falloff_bound_check(&rho, &l.y, l.b, &pairs).unwrap();
        assert!(rep.all_hold, "lambda {lambda}: {rep:?}");
    }
}

#[test]
fn no_state_found_where_none_exists() {
    for p in [
        MaserParams::toy(0.85, C64::new(1.0, 0.0), 0.6, 0.8).unwrap(),
        MaserParams::toy(0.9, C64::zero(), 0.6, 0.8).unwrap(),
        MaserParams::baby(0.7, C64::new(0.5, 0.0)).unwrap(),
    ] {
        assert_eq!(classify_maser_point(&p).verdict, Verdict::NotExists);
        for dim in [20, 40, 60] {
            let r = solve_invariant_direct(&build_maser_channel(&p, dim).unwrap(), DEFAULT_TOL);
            assert!(matches!(r, Err(Error::NoInvariantState { .. })), "dim {dim}");
        }
    }
}

mod averaged {
    use super::*;
    use qbdc_core::criteria::{check_existence, check_nonexistence, KappaEstimate};

    fn exp_rule(dim: usize) -> (TauDensity, QuadratureRule) {
        let d = TauDensity::exponential(1.0).unwrap();
        let q = QuadratureRule::for_density(&d, 2.0 * ((dim + 1) as f64).sqrt()).unwrap();
        (d, q)
    }

    #[test]
    fn averaged_channel_is_the_convex_combination() {
        let dim = 12;
        let (d, q) = exp_rule(dim);
        let zeta = C64::from_polar(0.7, 0.4);
        let avg = build_averaged_channel(1.0, 0.3, zeta, &d, &q, dim).unwrap().heisenberg_matrix().to_dense();
        let mut sum = CMatrix::zeros(dim * dim, dim * dim);
        for (tau, w) in q.nodes.iter().zip(&q.probabilities) {
            let ch = build_maser_channel(&MaserParams::jaynes_cummings(0.3, zeta, 1.0, *tau).unwrap(), dim).unwrap();
            sum += ch.heisenberg_matrix().to_dense() * C64::new(*w, 0.0);
        }
        let err = (avg - sum).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn averaged_structure_and_irreducibility() {
        let dim = 16;
        let (d, q) = exp_rule(dim);
        let zeta = C64::from_polar(0.5, 1.0);
        let ch = build_averaged_channel(1.0, 0.3, zeta, &d, &q, dim).unwrap();
        let rep = verify_qbdc_structure(&ch, 1024).unwrap();
        assert!(rep.max_residual() < 1e-9, "{rep:?}");
        let coarse = irreducibility_scan(&ch);
        let fine_rule = QuadratureRule::composite(&d, 2 * q.panels, q.order, q.design_frequency).unwrap();
        let fine = irreducibility_scan(&build_averaged_channel(1.0, 0.3, zeta, &d, &fine_rule, dim).unwrap());
        assert!(coarse.irreducible);
        assert_eq!(coarse.irreducible, fine.irreducible);
    }

    #[test]
    fn averaged_rates_approach_limits() {
        let cutoff = 400;
        let (d, q) = exp_rule(cutoff);
        let lambda = 0.3;
        let zeta = C64::new(0.6, 0.0);
        let r = averaged_rates(1.0, lambda, zeta, &d, &q, cutoff).unwrap();
        let rep = qbdc_core::random_tau::eta_decay_check(1.0, zeta, lambda, &d, 0..=cutoff).unwrap();
        let nu = qbdc_core::channel::nu_of(lambda, zeta).norm();
        for n in 100..=cutoff {
            assert!((r.mu[n] - 0.5 * (1.0 - lambda)).abs() < 1e-2);
            assert!((r.lam[n] - 0.5 * lambda).abs() < 1e-2);
            assert!(r.eta[n].norm() <= 0.5 * nu * rep.entries[n].bound + 1e-12);
        }
    }

    #[test]
    fn averaged_criteria_split_at_one_half() {
        let cutoff = 200;
        let (d, q) = exp_rule(cutoff);
        for lambda in [0.1, 0.3, 0.45, 0.55, 0.7, 0.9] {
            let zeta = C64::from_polar(0.8, 0.3);
            let r = averaged_rates(1.0, lambda, zeta, &d, &q, cutoff).unwrap();
            let k = maser_kappa(lambda).unwrap();
            let kappa = KappaEstimate { kappa: k, window: (0, cutoff), analytic: Some(k), tolerance: 1e-8 };
            if lambda < 0.5 {
                assert_eq!(check_existence(&r, &kappa).verdict, Verdict::Exists, "lambda {lambda}");
            } else {
                assert_eq!(check_nonexistence(&r).verdict, Verdict::NotExists, "lambda {lambda}");
            }
        }
    }

    #[test]
    fn fixed_time_sequences_are_unit_vectors() {
        let (a, b) = jc_sequences(1.3, 0.7, 50);
        assert!(a.iter().zip(&b).all(|(x, y)| (x * x + y * y - 1.0).abs() < 1e-15));
    }
}
