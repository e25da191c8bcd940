//! One line per acceptance criterion; exits nonzero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qbdc_core::channel::nu_of;
use qbdc_core::criteria::{classify_maser_point, estimate_kappa, maser_kappa, tridiagonal_psd_sufficient};
use qbdc_core::invariant::{convergence_trace_with, dominating_power_law, TraceOptions, DEFAULT_TOL};
use qbdc_core::random_tau::irreducibility_scan;
use qbdc_core::{
    averaged_rates, build_averaged_channel, build_drift_certificate, build_maser_channel, closed_form_rates,
    convergence_trace, eta_decay_check, extract_transition_rates, search_lyapunov_certificate,
    solve_invariant_direct, toy_conserved_observable, verify_drift, Coupling, DensityMatrix, MaserParams,
    QuadratureRule, TauDensity, TruncatedChannel, Verdict, C64,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn c1_thermal_state() -> Outcome {
    let start = Instant::now();
    let (lambda, dim) = (0.3, 80);
    let p = MaserParams::baby(lambda, C64::new(0.0, 0.0)).map_err(|e| e.to_string())?;
    let ch = build_maser_channel(&p, dim).map_err(|e| e.to_string())?;
    let rho = solve_invariant_direct(&ch, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let q = lambda / (1.0 - lambda);
    let w: Vec<f64> = (0..dim).map(|n| (1.0 - 2.0 * lambda) / (1.0 - lambda) * q.powi(n as i32)).collect();
    let mut exact = DensityMatrix::from_diagonal(&w);
    // from_diagonal normalizes; restore the untruncated weights.
    let s: f64 = w.iter().sum();
    exact.entries *= C64::new(s, 0.0);
    let d = rho.trace_distance(&exact);
    check(
        d < 1e-8 && elapsed < 10.0,
        format!("trace distance {d:.2e}, {elapsed:.2} s"),
        format!("trace distance {d:.2e} (tol 1e-8), {elapsed:.2} s (limit 10 s)"),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> MaserParams {
    let lambda = rng.gen_range(0.0..1.0);
    let zeta = C64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
    match rng.gen_range(0..3) {
        0 => {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
            MaserParams::toy(lambda, zeta, t.cos(), t.sin()).unwrap()
        }
        1 => MaserParams::jaynes_cummings(lambda, zeta, rng.gen_range(0.1..2.0), rng.gen_range(0.1..3.0)).unwrap(),
        _ => {
            let angles: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..std::f64::consts::PI)).collect();
            let mut alpha: Vec<f64> = angles.iter().map(|t| t.cos()).collect();
            let mut beta: Vec<f64> = angles.iter().map(|t| t.sin()).collect();
            alpha[0] = 1.0;
            beta[0] = 0.0;
            MaserParams::new(lambda, zeta, Coupling::Explicit { alpha, beta }).unwrap()
        }
    }
}

fn c2_rate_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dim = 40;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let got = extract_transition_rates(&build_maser_channel(&p, dim).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let want = closed_form_rates(&p, dim - 2).map_err(|e| e.to_string())?;
        for n in 0..=dim - 2 {
            worst = worst
                .max((got.sigma[n] - want.sigma[n]).abs())
                .max((got.mu[n] - want.mu[n]).abs())
                .max((got.lam[n] - want.lam[n]).abs())
                .max((got.eta[n] - want.eta[n]).norm());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-12 && elapsed < 30.0,
        format!("max deviation {worst:.2e} over 50 models, {elapsed:.2} s"),
        format!("max deviation {worst:.2e} (tol 1e-12), {elapsed:.2} s"),
    )
}

/// Bisection for a sign change of `f` on `[a, b]`.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Largest point of `[a, b]` where `pred` still holds, assuming it holds at `a` only.
fn edge(pred: impl Fn(f64) -> bool, a: f64, b: f64) -> f64 {
    bisect(|l| if pred(l) { 1.0 } else { -1.0 }, a, b)
}

fn c3_region_bands() -> Outcome {
    let (alpha, beta) = (0.6, 0.8);
    let nu = |l: f64| (l * (1.0 - l)).sqrt();
    let ratio = alpha / beta;
    // Existence: lambda < 1/2 - (alpha/beta)|nu|; nonexistence: lambda > 1/2 + (alpha/beta)|nu|.
    let t1 = bisect(|l| 0.5 - ratio * nu(l) - l, 1e-9, 0.5);
    let t2 = bisect(|l| l - 0.5 - ratio * nu(l), 0.5, 1.0 - 1e-9);
    // Strip: both inequalities on the constant coupling.
    let s1 = |l: f64| 1.0 / (1.0 + (1.0 - 2.0 * l).powi(2) / (4.0 * nu(l).powi(2))) - beta * beta;
    let s2 = |l: f64| nu(l) / (1.0 - l) - (1.0 - alpha) / beta;
    let lo = bisect(s1, 1e-6, 0.5).max(bisect(s2, 1e-6, 0.5));
    let hi = bisect(s1, 0.5, 1.0 - 1e-6);
    let verdict = |l: f64| {
        MaserParams::toy(l, C64::new(1.0, 0.0), alpha, beta).map(|p| classify_maser_point(&p).verdict).unwrap()
    };
    let tol = 1e-6;
    let mut mismatches = Vec::new();
    for i in 0..=100 {
        let l = i as f64 / 100.0;
        let expected = if l < t1 - tol {
            Some(Verdict::Exists)
        } else if (l > lo + tol && l < hi - tol) || l > t2 + tol {
            Some(Verdict::NotExists)
        } else if (l - t1).abs() <= tol || (l - lo).abs() <= tol || (l - hi).abs() <= tol || (l - t2).abs() <= tol {
            None
        } else {
            Some(Verdict::Unknown)
        };
        let got = verdict(l);
        if expected.is_some_and(|e| e != got) {
            mismatches.push(format!("{l:.2}:{}", got.tag()));
        }
    }
    let tag = |l: f64| {
        MaserParams::toy(l, C64::new(1.0, 0.0), alpha, beta).map(|p| classify_maser_point(&p).criterion_tag()).unwrap()
    };
    let edges = [
        (edge(|l| verdict(l) == Verdict::Exists, 0.05, 0.35), t1),
        (edge(|l| tag(l) != Some("toy-nonexistence"), 0.05, 0.35), lo),
        (edge(|l| tag(l) == Some("toy-nonexistence"), 0.65, 0.95), hi),
        (edge(|l| tag(l) == Some("coupling-nonexistence"), 0.95, 0.65), t2),
    ];
    let dev = edges.iter().map(|(e, r)| (e - r).abs()).fold(0.0f64, f64::max);
    let (e1, e2, e3, e4) = (edges[0].0, edges[1].0, edges[2].0, edges[3].0);
    let summary = format!(
        "roots {t1:.9}/{lo:.9}/{hi:.9}/{t2:.9}, classifier edges {e1:.9}/{e2:.9}/{e3:.9}/{e4:.9}, max dev {dev:.1e}"
    );
    check(
        mismatches.is_empty() && dev < tol,
        summary.clone(),
        format!("{summary}; mismatched grid points {mismatches:?}"),
    )
}

fn c4_certificates() -> Outcome {
    let dim = 60;
    let (mut lyap, mut drift) = (0, 0);
    let mut failures = Vec::new();
    for radius in [0.0, 0.5, 1.0] {
        for i in 0..=100 {
            let l = i as f64 / 100.0;
            let p = MaserParams::toy(l, C64::new(radius, 0.0), 0.6, 0.8).map_err(|e| e.to_string())?;
            let v = classify_maser_point(&p);
            let ch = build_maser_channel(&p, dim).map_err(|e| e.to_string())?;
            let rates = extract_transition_rates(&ch).map_err(|e| e.to_string())?;
            match (v.verdict, v.criterion_tag()) {
                (Verdict::Exists, _) if maser_kappa(l).is_some_and(|k| k > 0.0 && k.is_finite()) => {
                    let k = estimate_kappa(&rates, 0.25).map_err(|e| e.to_string())?.with_analytic(maser_kappa(l).unwrap());
                    match search_lyapunov_certificate(&ch, &rates, &k, 12) {
                        Ok(c) if c.verified && c.min_slack > 0.0 => lyap += 1,
                        Ok(c) => failures.push(format!("lyapunov |zeta|={radius} lambda={l}: slack {}", c.min_slack)),
                        Err(e) => failures.push(format!("lyapunov |zeta|={radius} lambda={l}: {e}")),
                    }
                }
                (Verdict::NotExists, Some("coupling-nonexistence")) => {
                    let res = build_drift_certificate(&rates).and_then(|c| verify_drift(&ch, &c));
                    match res {
                        Ok(c) if c.verified => drift += 1,
                        Ok(c) => failures.push(format!("drift |zeta|={radius} lambda={l}: slack {}", c.min_slack)),
                        Err(e) => failures.push(format!("drift |zeta|={radius} lambda={l}: {e}")),
                    }
                }
                _ => {}
            }
        }
    }
    check(
        failures.is_empty() && lyap > 0 && drift > 0,
        format!("{lyap} Lyapunov and {drift} drift certificates verified at dim {dim}"),
        format!("{} failures, first: {:?}", failures.len(), failures.first()),
    )
}

fn c5_toy_observable() -> Outcome {
    let p = MaserParams::toy(0.4, C64::new(1.0, 0.0), 0.6, 0.8).map_err(|e| e.to_string())?;
    let obs = toy_conserved_observable(&p, 1.0, 60).map_err(|e| e.to_string())?;
    let roots_ok = obs.root_moduli.iter().all(|r| (r - 1.0).abs() < 1e-12);
    check(
        obs.residual < 1e-10 && roots_ok && obs.max_abs_y.is_finite() && obs.max_abs_y < 10.0,
        format!("residual {:.2e}, root moduli {:?}, max |y_k| {:.3}", obs.residual, obs.root_moduli, obs.max_abs_y),
        format!("residual {:.2e}, root moduli {:?}, max |y_k| {}", obs.residual, obs.root_moduli, obs.max_abs_y),
    )
}

fn c6_random_time_rates() -> Outcome {
    let (g, lambda, zeta) = (1.0, 0.3, C64::new(0.8, 0.0));
    let d = TauDensity::exponential(1.0).map_err(|e| e.to_string())?;
    let cutoff = 200;
    let q = QuadratureRule::for_density(&d, 2.0 * g * ((cutoff + 2) as f64).sqrt()).map_err(|e| e.to_string())?;
    let r = averaged_rates(g, lambda, zeta, &d, &q, cutoff).map_err(|e| e.to_string())?;
    let nu = nu_of(lambda, zeta);
    // E[sin(2 w tau)] / 2 for tau ~ Exp(1), w = g sqrt(n + 1).
    let oracle = |n: usize| {
        let w = 2.0 * g * ((n + 1) as f64).sqrt();
        nu.conj() * (0.5 * w / (1.0 + w * w))
    };
    let eta_err = (0..=50).map(|n| (r.eta[n] - oracle(n)).norm()).fold(0.0f64, f64::max);
    let rep = eta_decay_check(g, zeta, lambda, &d, 0..=50).map_err(|e| e.to_string())?;
    let lim_err = (100..=cutoff)
        .map(|n| (r.mu[n] - 0.5 * (1.0 - lambda)).abs().max((r.lam[n] - 0.5 * lambda).abs()))
        .fold(0.0f64, f64::max);
    check(
        eta_err < 1e-8 && rep.applicable && rep.all_hold && lim_err < 1e-2,
        format!("eta vs Laplace {eta_err:.2e}, decay bound holds on n<=50, limit deviation {lim_err:.2e}"),
        format!("eta vs Laplace {eta_err:.2e}, decay bound {}, limit deviation {lim_err:.2e}", rep.all_hold),
    )
}

fn c7_absorbing() -> Outcome {
    let (g, lambda, zeta, dim) = (1.0, 0.3, C64::from_polar(0.5, std::f64::consts::FRAC_PI_3), 60);
    let d = TauDensity::exponential(1.0).map_err(|e| e.to_string())?;
    let q = QuadratureRule::for_density(&d, 2.0 * g * (dim as f64).sqrt()).map_err(|e| e.to_string())?;
    let ch = build_averaged_channel(g, lambda, zeta, &d, &q, dim).map_err(|e| e.to_string())?;
    let phi = solve_invariant_direct(&ch, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let trace = convergence_trace(&ch, &DensityMatrix::vacuum(dim), &phi, 10_000).map_err(|e| e.to_string())?;
    let rise = trace.max_increase();
    let below = trace.first_below(1e-6);
    let scan = irreducibility_scan(&ch);
    check(
        rise <= 1e-12 && below.is_some() && scan.irreducible,
        format!("max increase {rise:.1e}, below 1e-6 at n = {}, {} intervals irreducible", below.unwrap_or(0), scan.intervals_checked),
        format!("max increase {rise:.1e}, first below 1e-6 {below:?}, subharmonic {:?}", scan.subharmonic),
    )
}

fn c8_convex_combination() -> Outcome {
    let dim = 60;
    let p = MaserParams::baby(0.3, C64::new(0.5, 0.0)).map_err(|e| e.to_string())?;
    let r = build_maser_channel(&p, dim).map_err(|e| e.to_string())?;
    let s = TruncatedChannel::identity(dim);
    let t = TruncatedChannel::convex_combination(&[(0.5, &r), (0.5, &s)]).map_err(|e| e.to_string())?;
    let phi = solve_invariant_direct(&t, DEFAULT_TOL).map_err(|e| e.to_string())?;
    // Stop above the roundoff floor, where no decay law is visible.
    let opts = TraceOptions { stop_below: Some(1e-12), convex: None };
    let trace = convergence_trace_with(&t, &DensityMatrix::vacuum(dim), &phi, 5000, &opts).map_err(|e| e.to_string())?;
    let n0 = 20;
    let (c, gamma) = dominating_power_law(&trace.distances, n0).ok_or("no fit")?;
    let dominated = trace.distances.iter().enumerate().skip(n0).all(|(n, d)| *d <= c * (n as f64).powf(-gamma) * (1.0 + 1e-9));
    check(
        gamma > 0.0 && dominated,
        format!("d_n <= {c:.3e} n^-{gamma:.3} for n >= {n0}"),
        format!("gamma {gamma}, dominated {dominated}"),
    )
}

/// Number of eigenvalues of the Hermitian tridiagonal matrix below `-shift`,
/// from the signs of the LDL* pivots of `A + shift`.
fn negative_count(diag: &[f64], off: &[C64], shift: f64) -> usize {
    let mut count = 0;
    let mut p = diag[0] + shift;
    for i in 0..diag.len() {
        if i > 0 {
            let denom = if p == 0.0 { f64::MIN_POSITIVE } else { p };
            p = diag[i] + shift - off[i - 1].norm_sqr() / denom;
        }
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

fn c9_tridiagonal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut passed, mut drawn, mut violations) = (0, 0, 0);
    while passed < 500 {
        drawn += 1;
        let n = rng.gen_range(1..=40);
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let scale = rng.gen_range(0.0..1.0);
        let off: Vec<C64> =
            (0..n - 1).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale).collect();
        if tridiagonal_psd_sufficient(&diag, &off).map_err(|e| e.to_string())? != qbdc_core::criteria::TridiagonalTest::Positive {
            continue;
        }
        passed += 1;
        if negative_count(&diag, &off, 1e-10) > 0 {
            violations += 1;
        }
    }
    let example = tridiagonal_psd_sufficient(&[1.0, 1.0], &[C64::new(1.0, 0.0)]).map_err(|e| e.to_string())?;
    let flagged = example == qbdc_core::criteria::TridiagonalTest::Inconclusive;
    check(
        violations == 0 && flagged,
        format!("{passed} passing instances ({drawn} drawn), no eigenvalue below -1e-10; [[1,1],[1,1]] inconclusive"),
        format!("{violations} violations among {passed}; example flagged inconclusive: {flagged}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("thermal fixed point", c1_thermal_state),
        ("closed-form rate equivalence", c2_rate_equivalence),
        ("region classification", c3_region_bands),
        ("certificate soundness", c4_certificates),
        ("toy conserved observable", c5_toy_observable),
        ("random interaction time rates", c6_random_time_rates),
        ("absorbing behaviour", c7_absorbing),
        ("convex combination rate", c8_convex_combination),
        ("tridiagonal criterion soundness", c9_tridiagonal),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("[PASS] {} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] {} {name}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
