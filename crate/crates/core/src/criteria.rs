//! Existence and non-existence tests for normal invariant states.
//!
//! Asymptotic quantities (lim inf, lim sup) are estimated as extrema over a
//! tail window of the available rates, by default the last quarter of the
//! cutoff. Closed forms override the window estimate where a model has one.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;

use crate::channel::{Coupling, MaserParams, TransitionRates};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;

/// A criterion fires only when its slack exceeds this.
pub const FIRE_EPS: f64 = 1e-12;

/// Index range `[lo, hi]` of the tail window for a rate set of the given
/// cutoff.
pub fn tail_window(cutoff: usize, tail_fraction: f64) -> (usize, usize) {
    let f = tail_fraction.clamp(0.0, 1.0);
    let lo = ((1.0 - f) * cutoff as f64).ceil() as usize;
    (lo.clamp(1, cutoff.max(1)), cutoff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summability {
    Summable,
    NotSummable,
    Inconclusive,
}

/// Classical birth-death profile `pi_n = lambda_0...lambda_{n-1} / mu_1...mu_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalProfile {
    pub ln_pi: Vec<f64>,
    pub summability: Summability,
    /// Normalized `pi` on `[0, cutoff]`; present iff summable.
    pub stationary: Option<Vec<f64>>,
    /// Largest `lambda_n / mu_{n+1}` over the tail window.
    pub max_tail_ratio: f64,
    pub window: (usize, usize),
}

impl ClassicalProfile {
    pub fn pi(&self) -> Vec<f64> {
        self.ln_pi.iter().map(|v| v.exp()).collect()
    }

    pub fn summable(&self) -> bool {
        self.summability == Summability::Summable
    }
}

pub fn classical_profile(rates: &TransitionRates) -> Result<ClassicalProfile> {
    classical_profile_with(rates, DEFAULT_TAIL_FRACTION)
}

pub fn classical_profile_with(rates: &TransitionRates, tail_fraction: f64) -> Result<ClassicalProfile> {
    let cutoff = rates.cutoff;
    if let Some(n) = (1..=cutoff).find(|&n| rates.mu[n] == 0.0) {
        return Err(Error::ZeroDeathRate { index: n });
    }
    let mut ln_pi = Vec::with_capacity(cutoff + 1);
    ln_pi.push(0.0);
    for n in 1..=cutoff {
        let prev = ln_pi[n - 1];
        ln_pi.push(prev + rates.lam[n - 1].ln() - rates.mu[n].ln());
    }
    let (lo, hi) = tail_window(cutoff, tail_fraction);
    let ratios: Vec<f64> = (lo.saturating_sub(1)..hi).map(|n| rates.lam[n] / rates.mu[n + 1]).collect();
    let max_tail_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_tail_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let summability = if max_tail_ratio < 1.0 - FIRE_EPS {
        Summability::Summable
    } else if min_tail_ratio >= 1.0 {
        Summability::NotSummable
    } else {
        Summability::Inconclusive
    };
    let stationary = (summability == Summability::Summable).then(|| {
        let top = ln_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = ln_pi.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    });
    Ok(ClassicalProfile { ln_pi, summability, stationary, max_tail_ratio, window: (lo, hi) })
}

/// Decay rate of `pi_n` over the tail window, with an optional closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    pub kappa: f64,
    pub window: (usize, usize),
    pub analytic: Option<f64>,
    pub tolerance: f64,
}

impl KappaEstimate {
    /// The value used by the criteria: the closed form when known.
    pub fn value(&self) -> f64 {
        self.analytic.unwrap_or(self.kappa)
    }

    pub fn with_analytic(mut self, analytic: f64) -> Self {
        self.analytic = Some(analytic);
        self
    }

    /// Whether the window estimate agrees with the closed form.
    pub fn consistent(&self) -> bool {
        match self.analytic {
            Some(a) if a.is_finite() || self.kappa.is_finite() => (self.kappa - a).abs() < self.tolerance,
            _ => true,
        }
    }
}

pub fn estimate_kappa(rates: &TransitionRates, tail_fraction: f64) -> Result<KappaEstimate> {
    let prof = classical_profile_with(rates, tail_fraction)?;
    let (lo, hi) = prof.window;
    let kappa = (lo..=hi).map(|n| -prof.ln_pi[n] / n as f64).fold(f64::INFINITY, f64::min);
    Ok(KappaEstimate { kappa, window: (lo, hi), analytic: None, tolerance: 1e-8 })
}

/// `ln((1 - lambda) / lambda)`, the decay rate of every maser model
/// (including the random-time average); `None` at `lambda in {0, 1}`.
pub fn maser_kappa(lambda: f64) -> Option<f64> {
    (lambda > 0.0 && lambda < 1.0).then(|| ((1.0 - lambda) / lambda).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Exists,
    NotExists,
    Unknown,
}

impl Verdict {
    pub fn tag(self) -> &'static str {
        match self {
            Verdict::Exists => "exists",
            Verdict::NotExists => "not_exists",
            Verdict::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    RateExistence,
    RateNonexistence,
    CouplingExistence,
    CouplingNonexistence,
    ToyNonexistence,
    PureBoundary,
}

impl Criterion {
    pub fn tag(self) -> &'static str {
        match self {
            Criterion::RateExistence => "rate-existence",
            Criterion::RateNonexistence => "rate-nonexistence",
            Criterion::CouplingExistence => "coupling-existence",
            Criterion::CouplingNonexistence => "coupling-nonexistence",
            Criterion::ToyNonexistence => "toy-nonexistence",
            Criterion::PureBoundary => "pure-boundary",
        }
    }

    fn verdict(self) -> Verdict {
        match self {
            Criterion::RateExistence | Criterion::CouplingExistence | Criterion::PureBoundary => Verdict::Exists,
            _ => Verdict::NotExists,
        }
    }
}

/// Outcome of a classification.
///
/// `margin` is the slack of the deciding inequality. For `Unknown` it is the
/// largest slack among the criteria that were evaluated (not positive), or
/// NaN when none applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionVerdict {
    pub verdict: Verdict,
    pub criterion: Option<Criterion>,
    pub margin: f64,
    pub conflict: bool,
    pub tail_window: Option<(usize, usize)>,
    pub diagnostic: Option<String>,
}

impl RegionVerdict {
    fn unknown(margin: f64, diagnostic: Option<String>) -> Self {
        Self { verdict: Verdict::Unknown, criterion: None, margin, conflict: false, tail_window: None, diagnostic }
    }

    fn fired(criterion: Criterion, margin: f64) -> Self {
        Self {
            verdict: criterion.verdict(),
            criterion: Some(criterion),
            margin,
            conflict: false,
            tail_window: None,
            diagnostic: None,
        }
    }

    fn windowed(mut self, w: (usize, usize)) -> Self {
        self.tail_window = Some(w);
        self
    }

    pub fn criterion_tag(&self) -> Option<&'static str> {
        self.criterion.map(Criterion::tag)
    }
}

/// Ratio with a vanishing denominator read as `+inf`.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn check_existence(rates: &TransitionRates, kappa: &KappaEstimate) -> RegionVerdict {
    check_existence_with(rates, kappa, DEFAULT_TAIL_FRACTION)
}

/// Part 1 of the criterion: `lim inf lambda_n mu_{n+1} / 4|eta_n|^2`
/// against `e^-kappa / (1 - e^-kappa)^2`.
pub fn check_existence_with(rates: &TransitionRates, kappa: &KappaEstimate, tail_fraction: f64) -> RegionVerdict {
    let k = kappa.value();
    if rates.cutoff < 2 {
        return RegionVerdict::unknown(f64::NAN, Some("rate window too short".to_string()));
    }
    let (lo, hi) = tail_window(rates.cutoff - 1, tail_fraction);
    if !(k > 0.0) {
        return RegionVerdict::unknown(f64::NAN, Some(format!("kappa = {k} is not positive"))).windowed((lo, hi));
    }
    if let Some(n) = (0..rates.cutoff).find(|&n| rates.lam[n] == 0.0) {
        return RegionVerdict::unknown(f64::NAN, Some(format!("birth rate lambda_{n} vanishes"))).windowed((lo, hi));
    }
    let lhs = (lo..=hi)
        .map(|n| ratio(rates.lam[n] * rates.mu[n + 1], 4.0 * rates.eta[n].norm_sqr()))
        .fold(f64::INFINITY, f64::min);
    let e = (-k).exp();
    let rhs = e / ((1.0 - e) * (1.0 - e));
    let margin = lhs - rhs;
    let out = if margin > FIRE_EPS {
        RegionVerdict::fired(Criterion::RateExistence, margin)
    } else {
        RegionVerdict::unknown(margin, None)
    };
    out.windowed((lo, hi))
}

pub fn check_nonexistence(rates: &TransitionRates) -> RegionVerdict {
    check_nonexistence_with(rates, DEFAULT_TAIL_FRACTION)
}

/// Part 2: `mu_n < lambda_n` on the tail and
/// `lim inf (lambda_n - mu_n)(lambda_{n+1} - mu_{n+1}) / 4|eta_n|^2 > 1`.
pub fn check_nonexistence_with(rates: &TransitionRates, tail_fraction: f64) -> RegionVerdict {
    if rates.cutoff < 2 {
        return RegionVerdict::unknown(f64::NAN, Some("rate window too short".to_string()));
    }
    let (lo, hi) = tail_window(rates.cutoff - 1, tail_fraction);
    if let Some(n) = (lo..=hi + 1).find(|&n| rates.lam[n] == 0.0) {
        return RegionVerdict::unknown(f64::NAN, Some(format!("birth rate lambda_{n} vanishes"))).windowed((lo, hi));
    }
    let gap = |n: usize| rates.lam[n] - rates.mu[n];
    let min_gap = (lo..=hi + 1).map(gap).fold(f64::INFINITY, f64::min);
    if !(min_gap > 0.0) {
        return RegionVerdict::unknown(min_gap, Some("mu_n < lambda_n fails on the tail".to_string())).windowed((lo, hi));
    }
    let lhs = (lo..=hi).map(|n| ratio(gap(n) * gap(n + 1), 4.0 * rates.eta[n].norm_sqr())).fold(f64::INFINITY, f64::min);
    let margin = lhs - 1.0;
    let out = if margin > FIRE_EPS {
        RegionVerdict::fired(Criterion::RateNonexistence, margin)
    } else {
        RegionVerdict::unknown(margin, None)
    };
    out.windowed((lo, hi))
}

/// Asymptotic coupling bounds of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingBounds {
    /// `lim sup |alpha_n|`.
    pub alpha_sup: f64,
    /// `lim inf |beta_n|`.
    pub beta_inf: f64,
    /// Whether some `beta_n` with `n >= 1` vanishes (within the scanned range).
    pub beta_vanishes: bool,
}

/// Levels scanned for resonances of the fixed-time Jaynes-Cummings model.
const JC_SCAN: usize = 10_000;

pub fn coupling_bounds(params: &MaserParams, tail_fraction: f64) -> Result<CouplingBounds> {
    Ok(match params.coupling() {
        Coupling::Toy { alpha, beta } => {
            CouplingBounds { alpha_sup: alpha.abs(), beta_inf: beta.abs(), beta_vanishes: *beta == 0.0 }
        }
        Coupling::JaynesCummings { g, tau } => {
            let (min_beta, _) = crate::random_tau::beta_near_zero_scan(*g, *tau, JC_SCAN);
            CouplingBounds { alpha_sup: 1.0, beta_inf: 0.0, beta_vanishes: min_beta < 1e-12 }
        }
        Coupling::Explicit { alpha, beta } => {
            let len = alpha.len();
            if len < 2 {
                return Err(Error::SequenceTooShort { needed: 1, len });
            }
            let (lo, hi) = tail_window(len - 1, tail_fraction);
            CouplingBounds {
                alpha_sup: alpha[lo..=hi].iter().fold(0.0, |m, v| m.max(v.abs())),
                beta_inf: beta[lo..=hi].iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
                beta_vanishes: beta[1..].contains(&0.0),
            }
        }
    })
}

pub fn classify_maser_point(params: &MaserParams) -> RegionVerdict {
    classify_maser_point_with(params, DEFAULT_TAIL_FRACTION)
}

/// Tolerance for treating `|zeta|` as 1.
const PURE_TOL: f64 = 1e-12;

/// Classifies a maser point by the closed-form criteria, in order: part 1,
/// part 2, the toy strip, the pure-state boundary. The first firing
/// criterion decides; an existence and a non-existence criterion firing
/// together yield `Unknown` with `conflict` set.
pub fn classify_maser_point_with(params: &MaserParams, tail_fraction: f64) -> RegionVerdict {
    let bounds = match coupling_bounds(params, tail_fraction) {
        Ok(b) => b,
        Err(e) => return RegionVerdict::unknown(f64::NAN, Some(format!("{e}"))),
    };
    let lam = params.lambda();
    let nu = params.nu().norm();
    let thermal = nu == 0.0;
    let is_toy = matches!(params.coupling(), Coupling::Toy { .. });
    let is_jc = matches!(params.coupling(), Coupling::JaynesCummings { .. });

    if bounds.beta_vanishes {
        return RegionVerdict::unknown(
            f64::NAN,
            Some("some beta_n vanishes: the chain splits into non-communicating blocks".to_string()),
        );
    }
    if !thermal && !(bounds.beta_inf > 0.0) {
        return RegionVerdict::unknown(
            f64::NAN,
            Some("lim inf |beta_n| = 0: the criteria need a positive lower bound on |beta_n|".to_string()),
        );
    }

    let mut fired: Vec<(Criterion, f64)> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut consider = |c: Criterion, m: f64, fired: &mut Vec<(Criterion, f64)>| {
        if m > FIRE_EPS {
            fired.push((c, m));
        } else if m.is_finite() {
            best = best.max(m);
        }
    };

    let slope = if thermal { 0.0 } else { bounds.alpha_sup / bounds.beta_inf * nu };
    consider(Criterion::CouplingExistence, 0.5 - slope - lam, &mut fired);
    // For a varying coupling and no coherence the gap lambda_n - mu_n need
    // not have a sign on the tail; only constant couplings qualify here.
    if !(is_jc && thermal) {
        consider(Criterion::CouplingNonexistence, lam - 0.5 - slope, &mut fired);
    }

    if let Coupling::Toy { alpha, beta } = *params.coupling() {
        if alpha.abs() > 0.0 && alpha.abs() < 1.0 && nu > 0.0 && lam < 1.0 {
            let c1 = 1.0 / (1.0 + (1.0 - 2.0 * lam).powi(2) / (4.0 * nu * nu)) - beta * beta;
            let c2 = nu / (1.0 - lam) - (1.0 - alpha) / beta.abs();
            consider(Criterion::ToyNonexistence, c1.min(c2), &mut fired);
        }
        if (params.zeta().norm() - 1.0).abs() <= PURE_TOL && alpha < 0.0 {
            consider(Criterion::PureBoundary, 0.5 * (1.0 - alpha) - lam, &mut fired);
        }
    }

    let exists = fired.iter().find(|(c, _)| c.verdict() == Verdict::Exists);
    let not_exists = fired.iter().find(|(c, _)| c.verdict() == Verdict::NotExists);
    let mut out = match (exists, not_exists) {
        (Some(_), Some(_)) => {
            let mut v = RegionVerdict::unknown(f64::NAN, Some("existence and non-existence criteria both fired".to_string()));
            v.conflict = true;
            v
        }
        _ => match fired.first() {
            Some(&(c, m)) => RegionVerdict::fired(c, m),
            None => RegionVerdict::unknown(if best.is_finite() { best } else { f64::NAN }, None),
        },
    };
    if out.verdict == Verdict::Unknown && out.diagnostic.is_none() && is_toy && (params.zeta().norm() - 1.0).abs() <= PURE_TOL
    {
        out.diagnostic = Some("pure atomic state on an undecided boundary".to_string());
    }
    out
}

/// Classifies from a rate set alone with the general criteria (part 1, then
/// part 2). Used for models without closed-form coupling bounds.
pub fn classify_rates(rates: &TransitionRates, kappa: &KappaEstimate, tail_fraction: f64) -> RegionVerdict {
    let ex = check_existence_with(rates, kappa, tail_fraction);
    let nx = check_nonexistence_with(rates, tail_fraction);
    match (ex.verdict, nx.verdict) {
        (Verdict::Exists, Verdict::NotExists) => {
            let mut v = RegionVerdict::unknown(f64::NAN, Some("existence and non-existence criteria both fired".to_string()));
            v.conflict = true;
            v.tail_window = ex.tail_window;
            v
        }
        (Verdict::Exists, _) => ex,
        (_, Verdict::NotExists) => nx,
        _ => {
            let margin = match (ex.margin.is_finite(), nx.margin.is_finite()) {
                (true, true) => ex.margin.max(nx.margin),
                (true, false) => ex.margin,
                (false, _) => nx.margin,
            };
            let diagnostic = ex.diagnostic.or(nx.diagnostic);
            let mut v = RegionVerdict::unknown(margin, diagnostic);
            v.tail_window = ex.tail_window;
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TridiagonalTest {
    Positive,
    Inconclusive,
}

/// Slacks of the two tridiagonal conditions: `min d_n` and
/// `min (d_n d_{n+1} - 4|o_n|^2)`.
pub fn tridiagonal_slacks(diag: &[f64], offdiag: &[C64]) -> Result<(f64, f64)> {
    if diag.is_empty() || offdiag.len() + 1 != diag.len() {
        return Err(Error::LengthMismatch { expected: diag.len().saturating_sub(1), got: offdiag.len() });
    }
    let d = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let p = (0..offdiag.len())
        .map(|n| diag[n] * diag[n + 1] - 4.0 * offdiag[n].norm_sqr())
        .fold(f64::INFINITY, f64::min);
    Ok((d, p))
}

/// Sufficient test for positive semidefiniteness of a Hermitian
/// tridiagonal matrix. `Inconclusive` does not mean indefinite.
pub fn tridiagonal_psd_sufficient(diag: &[f64], offdiag: &[C64]) -> Result<TridiagonalTest> {
    let (d, p) = tridiagonal_slacks(diag, offdiag)?;
    Ok(if d > 0.0 && p > 0.0 { TridiagonalTest::Positive } else { TridiagonalTest::Inconclusive })
}
