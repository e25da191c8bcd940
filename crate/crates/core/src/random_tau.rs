//! Jaynes-Cummings maser with a random interaction time.
//!
//! The averaged channel integrates the fixed-time channel against a density
//! of interaction times. Integrals are taken with composite Gauss-Legendre
//! rules on `[0, cut]`, where `cut` leaves a tail mass below `1e-13`; panel
//! widths follow the fastest oscillation `2 g sqrt(dim)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::channel::{jc_pair, maser_triplets, nu_of, TransitionRates, TruncatedChannel};
use crate::error::{Error, Result};
use crate::linalg::{fit_line, hermitian_norm, CMatrix, SparseMatrix, C64};

/// Tail mass left beyond the support cut.
pub const TAIL_MASS: f64 = 1e-13;
/// Error budget demanded by averaged rates and channels.
pub const QUADRATURE_BUDGET: f64 = 1e-8;
/// Target of rules built by [`QuadratureRule::for_density`].
const DESIGN_TARGET: f64 = 1e-10;
const DEFAULT_ORDER: usize = 20;
const GRADED_LEVELS: usize = 40;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    C1,
    /// Absolutely continuous with integrable derivative, not `C^1`.
    AbsolutelyContinuous,
    Discontinuous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    TruncatedGaussian { mean: f64, sd: f64 },
    /// Piecewise linear through `(tau, value)` knots, normalized; a repeated
    /// abscissa encodes a jump.
    Tabulated { knots: Vec<(f64, f64)> },
}

/// Probability density of interaction times on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauDensity {
    pub kind: DensityKind,
    /// Density value at 0.
    pub d0: f64,
    /// `L^1` norm of the derivative (jumps excluded).
    pub dprime_l1: f64,
    /// Upper integration limit.
    pub support_cut: f64,
    pub smoothness: Smoothness,
    /// Supremum of the density.
    pub sup: f64,
    /// Frequency scale of the density's own variation, used in error
    /// estimates.
    pub scale_frequency: f64,
    norm: f64,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    // f(lo) false, f(hi) true.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("{v} must be positive and finite") })
    }
}

impl TauDensity {
    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self {
            kind: DensityKind::Exponential { rate },
            d0: rate,
            dprime_l1: rate,
            support_cut: -TAIL_MASS.ln() / rate,
            smoothness: Smoothness::C1,
            sup: rate,
            scale_frequency: rate,
            norm: 1.0,
        })
    }

    /// Gamma density with `shape >= 1` (finite value at 0).
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        if !(shape.is_finite() && shape >= 1.0) {
            return Err(Error::InvalidParameter { name: "shape", reason: format!("{shape} must be at least 1") });
        }
        if shape == 1.0 {
            let mut d = Self::exponential(rate)?;
            d.kind = DensityKind::Gamma { shape, rate };
            return Ok(d);
        }
        let mode = (shape - 1.0) / rate;
        let mut d = Self {
            kind: DensityKind::Gamma { shape, rate },
            d0: 0.0,
            dprime_l1: 0.0,
            support_cut: 0.0,
            smoothness: if shape >= 2.0 { Smoothness::C1 } else { Smoothness::AbsolutelyContinuous },
            sup: 0.0,
            scale_frequency: rate * (1.0 + (shape - 1.0).sqrt()),
            norm: 1.0,
        };
        d.sup = d.pdf(mode);
        d.dprime_l1 = 2.0 * d.sup;
        // Chernoff: P(X > x) <= (r x / k)^k e^{k - r x} for x > k / r.
        let tail = |x: f64| shape * (rate * x / shape).ln() + shape - rate * x;
        let start = shape / rate;
        let mut hi = 2.0 * start;
        while tail(hi) > TAIL_MASS.ln() {
            hi *= 2.0;
        }
        d.support_cut = bisect(start, hi, |x| tail(x) <= TAIL_MASS.ln());
        Ok(d)
    }

    /// Normal density with the given mean and deviation, restricted to
    /// `[0, inf)` and renormalized.
    pub fn truncated_gaussian(mean: f64, sd: f64) -> Result<Self> {
        positive("sd", sd)?;
        if !mean.is_finite() {
            return Err(Error::InvalidParameter { name: "mean", reason: "must be finite".into() });
        }
        let s2 = sd * core::f64::consts::SQRT_2;
        let z = 0.5 * libm::erfc(-mean / s2);
        if !(z > 0.0) {
            return Err(Error::InvalidParameter { name: "mean", reason: "no mass on [0, inf)".into() });
        }
        let mut d = Self {
            kind: DensityKind::TruncatedGaussian { mean, sd },
            d0: 0.0,
            dprime_l1: 0.0,
            support_cut: 0.0,
            smoothness: Smoothness::C1,
            sup: 0.0,
            scale_frequency: (2.0 * DEFAULT_ORDER as f64).sqrt() / sd,
            norm: z,
        };
        d.d0 = d.pdf(0.0);
        d.sup = d.pdf(mean.max(0.0));
        d.dprime_l1 = if mean > 0.0 { 2.0 * d.sup - d.d0 } else { d.d0 };
        let tail = |x: f64| 0.5 * libm::erfc((x - mean) / s2) / z;
        d.support_cut = bisect(mean.max(0.0), mean.max(0.0) + 60.0 * sd, |x| tail(x) <= TAIL_MASS);
        Ok(d)
    }

    /// Piecewise-linear density through the knots; the first knot must sit
    /// at 0 and abscissae must be nondecreasing. Values are normalized.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 || knots[0].0 != 0.0 {
            return Err(Error::InvalidParameter { name: "knots", reason: "need at least two knots starting at 0".into() });
        }
        if knots.iter().any(|k| !(k.1 >= 0.0) || !k.0.is_finite() || !k.1.is_finite()) {
            return Err(Error::InvalidParameter { name: "knots", reason: "values must be finite and nonnegative".into() });
        }
        if knots.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter { name: "knots", reason: "abscissae must be nondecreasing".into() });
        }
        let mass: f64 = knots.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter { name: "knots", reason: "zero total mass".into() });
        }
        let jumps = knots.windows(2).any(|w| w[1].0 == w[0].0 && w[1].1 != w[0].1) || knots.last().unwrap().1 != 0.0;
        let slopes: Vec<f64> =
            knots.windows(2).filter(|w| w[1].0 > w[0].0).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        let smooth = slopes.windows(2).all(|s| s[0] == s[1]);
        let dprime_l1 = knots.windows(2).filter(|w| w[1].0 > w[0].0).map(|w| (w[1].1 - w[0].1).abs()).sum::<f64>() / mass;
        let sup = knots.iter().fold(0.0f64, |m, k| m.max(k.1)) / mass;
        Ok(Self {
            d0: knots[0].1 / mass,
            dprime_l1,
            support_cut: knots.last().unwrap().0,
            smoothness: if jumps {
                Smoothness::Discontinuous
            } else if smooth {
                Smoothness::C1
            } else {
                Smoothness::AbsolutelyContinuous
            },
            sup,
            scale_frequency: 0.0,
            norm: mass,
            kind: DensityKind::Tabulated { knots },
        })
    }

    pub fn pdf(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Exponential { rate } => rate * (-rate * tau).exp(),
            DensityKind::Gamma { shape, rate } => {
                if tau == 0.0 {
                    return if *shape == 1.0 { *rate } else { 0.0 };
                }
                (shape * rate.ln() + (shape - 1.0) * tau.ln() - rate * tau - libm::lgamma(*shape)).exp()
            }
            DensityKind::TruncatedGaussian { mean, sd } => {
                let u = (tau - mean) / sd;
                (-0.5 * u * u).exp() / (sd * (2.0 * core::f64::consts::PI).sqrt() * self.norm)
            }
            DensityKind::Tabulated { knots } => {
                for w in knots.windows(2) {
                    if tau >= w[0].0 && tau <= w[1].0 && w[1].0 > w[0].0 {
                        let s = (tau - w[0].0) / (w[1].0 - w[0].0);
                        return (w[0].1 + s * (w[1].1 - w[0].1)) / self.norm;
                    }
                }
                0.0
            }
        }
    }

    /// Whether the decay estimate for `eta_n` applies (integration by parts
    /// needs an absolutely continuous density).
    pub fn eta_estimate_applicable(&self) -> bool {
        self.smoothness != Smoothness::Discontinuous && self.d0.is_finite() && self.dprime_l1.is_finite()
    }

    /// Whether the density behaves like a non-integer power of `tau` at 0,
    /// which calls for panels graded towards the origin.
    fn singular_origin(&self) -> bool {
        matches!(self.kind, DensityKind::Gamma { shape, .. } if shape.fract() != 0.0)
    }

    /// Panel breakpoints that a rule must respect (knots of tabulated
    /// densities).
    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            DensityKind::Tabulated { knots } => {
                let mut b: Vec<f64> = knots.iter().map(|k| k.0).collect();
                b.dedup();
                b
            }
            _ => vec![0.0, self.support_cut],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    /// Composite Gauss-Legendre: weights integrate against `D(tau) dtau`.
    Composite,
    /// Finitely many atoms; weights are the probabilities themselves.
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Nodes per panel.
    pub order: usize,
    pub panels: usize,
    /// Frequency the rule was designed for.
    pub design_frequency: f64,
    /// Error estimate at the design frequency, tail mass included.
    pub est_error: f64,
    /// Normalized probabilities `w_i D(tau_i) / sum_j w_j D(tau_j)`.
    pub probabilities: Vec<f64>,
    /// `sum_i w_i D(tau_i)` before normalization.
    pub raw_mass: f64,
    widths: Vec<f64>,
    density_sup: f64,
    density_frequency: f64,
}

impl QuadratureRule {
    /// Composite rule with `panels` panels of `order` nodes spread over the
    /// density's support (subdivided between breakpoints proportionally).
    pub fn composite(density: &TauDensity, panels: usize, order: usize, design_frequency: f64) -> Result<Self> {
        if panels == 0 || order == 0 {
            return Err(Error::InvalidParameter { name: "quadrature", reason: "panels and order must be positive".into() });
        }
        let bp = density.breakpoints();
        let total = bp.last().unwrap() - bp[0];
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut widths = Vec::new();
        let mut count = 0;
        for seg in bp.windows(2) {
            let len = seg[1] - seg[0];
            if len <= 0.0 {
                continue;
            }
            let p = ((panels as f64 * len / total).ceil() as usize).max(1);
            let h = len / p as f64;
            let mut panel = |a: f64, h: f64| {
                for (xi, wi) in gx.iter().zip(&gw) {
                    nodes.push(a + 0.5 * h * (xi + 1.0));
                    weights.push(0.5 * h * wi);
                }
                widths.push(h);
                count += 1;
            };
            for j in 0..p {
                let a = seg[0] + j as f64 * h;
                if a == 0.0 && density.singular_origin() {
                    let mut right = h;
                    for _ in 0..GRADED_LEVELS {
                        panel(0.5 * right, 0.5 * right);
                        right *= 0.5;
                    }
                    panel(0.0, right);
                } else {
                    panel(a, h);
                }
            }
        }
        let dens: Vec<f64> = nodes.iter().map(|t| density.pdf(*t)).collect();
        let raw_mass: f64 = weights.iter().zip(&dens).map(|(w, d)| w * d).sum();
        let probabilities = weights.iter().zip(&dens).map(|(w, d)| w * d / raw_mass).collect();
        let mut rule = Self {
            kind: RuleKind::Composite,
            nodes,
            weights,
            order,
            panels: count,
            design_frequency,
            est_error: 0.0,
            probabilities,
            raw_mass,
            widths,
            density_sup: density.sup,
            density_frequency: density.scale_frequency,
        };
        rule.est_error = rule.error_estimate(design_frequency);
        Ok(rule)
    }

    /// Smallest composite rule of the default order whose estimate at
    /// `omega` meets the design target.
    pub fn for_density(density: &TauDensity, omega: f64) -> Result<Self> {
        let mut panels = 1;
        loop {
            let rule = Self::composite(density, panels, DEFAULT_ORDER, omega)?;
            if rule.est_error <= DESIGN_TARGET || panels > 1 << 16 {
                return Ok(rule);
            }
            panels = (panels as f64 * 1.25).ceil() as usize + 1;
        }
    }

    /// A rule made of atoms with the given probabilities.
    pub fn discrete(nodes: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != probabilities.len() {
            return Err(Error::LengthMismatch { expected: nodes.len(), got: probabilities.len() });
        }
        let s: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter { name: "probabilities", reason: "must be nonnegative and sum to 1".into() });
        }
        Ok(Self {
            kind: RuleKind::Discrete,
            order: 1,
            panels: nodes.len(),
            design_frequency: f64::INFINITY,
            est_error: 0.0,
            weights: probabilities.clone(),
            probabilities,
            raw_mass: 1.0,
            nodes,
            widths: Vec::new(),
            density_sup: 0.0,
            density_frequency: 0.0,
        })
    }

    /// A priori error estimate for integrands `D(tau) h(omega tau)` with `h`
    /// bounded by 1 together with its derivatives, plus the tail mass.
    pub fn error_estimate(&self, omega: f64) -> f64 {
        if self.kind == RuleKind::Discrete {
            return 0.0;
        }
        let n = self.order;
        let c = 4.0 * ln_factorial(n) - (2.0 * n as f64 + 1.0).ln() - 3.0 * ln_factorial(2 * n);
        let freq = omega + self.density_frequency;
        let panel_sum: f64 = self
            .widths
            .iter()
            .map(|h| (h.ln() * (2 * n + 1) as f64 + c + (2 * n) as f64 * freq.ln()).exp())
            .sum();
        panel_sum * self.density_sup + TAIL_MASS
    }

    /// `sum_i p_i f(tau_i)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.probabilities).map(|(t, p)| p * f(*t)).sum()
    }

    fn require(&self, omega: f64) -> Result<()> {
        let estimate = self.error_estimate(omega);
        if estimate < QUADRATURE_BUDGET {
            Ok(())
        } else {
            Err(Error::QuadratureBudget { estimate, budget: QUADRATURE_BUDGET })
        }
    }
}

/// `alpha_n = cos(g tau sqrt n)`, `beta_n = -sin(g tau sqrt n)` for
/// `0 <= n <= cutoff`.
pub fn jc_sequences(g: f64, tau: f64, cutoff: usize) -> (Vec<f64>, Vec<f64>) {
    (0..=cutoff).map(|n| if n == 0 { (1.0, 0.0) } else { jc_pair(g, tau, n) }).unzip()
}

/// `min_{1 <= n <= n_max} |sin(g tau sqrt n)|` and its argmin.
pub fn beta_near_zero_scan(g: f64, tau: f64, n_max: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for n in 1..=n_max {
        let v = jc_pair(g, tau, n).1.abs();
        if v < best.0 {
            best = (v, n);
        }
    }
    best
}

/// Rates of the averaged channel, integrated directly.
pub fn averaged_rates(
    g: f64,
    lambda: f64,
    zeta: C64,
    density: &TauDensity,
    quad: &QuadratureRule,
    cutoff: usize,
) -> Result<TransitionRates> {
    let _ = density;
    quad.require(2.0 * g * ((cutoff + 1) as f64).sqrt())?;
    let nu = nu_of(lambda, zeta);
    let mut rates = TransitionRates {
        sigma: Vec::with_capacity(cutoff + 1),
        mu: Vec::with_capacity(cutoff + 1),
        lam: Vec::with_capacity(cutoff + 1),
        eta: Vec::with_capacity(cutoff + 1),
        cutoff,
    };
    for n in 0..=cutoff {
        let s_up = quad.expect(|t| jc_pair(g, t, n + 1).1.powi(2));
        let s_here = if n == 0 { 0.0 } else { quad.expect(|t| jc_pair(g, t, n).1.powi(2)) };
        let ab = quad.expect(|t| {
            let (a, b) = jc_pair(g, t, n + 1);
            a * b
        });
        let birth = lambda * s_up;
        let death = (1.0 - lambda) * s_here;
        rates.lam.push(birth);
        rates.mu.push(death);
        rates.sigma.push(1.0 - birth - death);
        rates.eta.push(nu * ab);
    }
    Ok(rates)
}

/// Weighted sum over quadrature nodes of fixed-time channels, accumulated
/// in node order.
pub fn build_averaged_channel(
    g: f64,
    lambda: f64,
    zeta: C64,
    density: &TauDensity,
    quad: &QuadratureRule,
    dim: usize,
) -> Result<TruncatedChannel> {
    let _ = density;
    if dim < 3 {
        return Err(Error::DimensionTooSmall { dim, min: 3 });
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidParameter { name: "g", reason: "coupling rate must be positive".into() });
    }
    quad.require(2.0 * g * (dim as f64).sqrt())?;
    let nu = nu_of(lambda, zeta);
    let mut acc: Option<Vec<(usize, usize, C64)>> = None;
    for (tau, p) in quad.nodes.iter().zip(&quad.probabilities) {
        let (a, b) = jc_sequences(g, *tau, dim);
        let trip = maser_triplets(lambda, nu, &a, &b, dim);
        match &mut acc {
            None => acc = Some(trip.into_iter().map(|(r, c, v)| (r, c, v * *p)).collect()),
            Some(sum) => {
                for (s, t) in sum.iter_mut().zip(trip) {
                    s.2 += t.2 * *p;
                }
            }
        }
    }
    let trip = acc.unwrap_or_default();
    TruncatedChannel::from_heisenberg(dim, SparseMatrix::from_triplets(dim * dim, dim * dim, trip))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaDecayEntry {
    pub n: usize,
    pub eta: C64,
    /// `|integral of sin(2 g tau sqrt(n + 1)) drho|`, which is `|2 eta_n / nu|`.
    pub normalized: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaDecayReport {
    pub applicable: bool,
    pub entries: Vec<EtaDecayEntry>,
    pub all_hold: bool,
    /// Slope of `ln |2 eta_n / nu|` against `ln (n + 1)`.
    pub decay_exponent: Option<f64>,
    pub note: Option<String>,
}

/// Compares `|2 eta_n / nu|` with `(D(0) + |D'|_1) / (2 g sqrt(n + 1))`.
pub fn eta_decay_check(
    g: f64,
    zeta: C64,
    lambda: f64,
    density: &TauDensity,
    n_range: core::ops::RangeInclusive<usize>,
) -> Result<EtaDecayReport> {
    let n_hi = *n_range.end();
    let quad = QuadratureRule::for_density(density, 2.0 * g * ((n_hi + 1) as f64).sqrt())?;
    let nu = nu_of(lambda, zeta);
    let mut entries = Vec::new();
    for n in n_range {
        let w = 2.0 * g * ((n + 1) as f64).sqrt();
        let integral = quad.expect(|t| (w * t).sin());
        let bound = (density.d0 + density.dprime_l1) / w;
        entries.push(EtaDecayEntry {
            n,
            eta: -nu * (0.5 * integral),
            normalized: integral.abs(),
            bound,
            margin: bound - integral.abs(),
        });
    }
    let applicable = density.eta_estimate_applicable();
    let pts: Vec<(f64, f64)> =
        entries.iter().filter(|e| e.normalized > 0.0).map(|e| (((e.n + 1) as f64).ln(), e.normalized.ln())).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(EtaDecayReport {
        applicable,
        all_hold: applicable && entries.iter().all(|e| e.margin >= 0.0),
        decay_exponent: fit_line(&lx, &ly).map(|f| -f.1),
        note: (!applicable).then(|| "density is not absolutely continuous; estimate does not apply".into()),
        entries,
    })
}

/// Operator norm of `p T(1 - p) p` for the coordinate projection `mask`.
pub fn subharmonic_defect(channel: &TruncatedChannel, mask: &[bool]) -> f64 {
    let d = channel.dim();
    assert_eq!(mask.len(), d);
    let idx: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
    let pos: Vec<Option<usize>> = {
        let mut v = vec![None; d];
        for (k, &i) in idx.iter().enumerate() {
            v[i] = Some(k);
        }
        v
    };
    let mut block = CMatrix::zeros(idx.len(), idx.len());
    for k in (0..d).filter(|&k| !mask[k]) {
        for (row, v) in channel.heisenberg_matrix().column(k + k * d) {
            let (a, b) = (row % d, row / d);
            if let (Some(i), Some(j)) = (pos[a], pos[b]) {
                block[(i, j)] += v;
            }
        }
    }
    hermitian_norm(&block)
}

/// True iff `p` is subharmonic: `||p T(1 - p) p|| < 1e-12`.
pub fn subharmonic_projection_check(channel: &TruncatedChannel, mask: &[bool]) -> bool {
    subharmonic_defect(channel, mask) < 1e-12
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrreducibilityScan {
    /// Subharmonic intervals `[a, b]`; `b = None` stands for `[a, inf)`.
    pub subharmonic: Vec<(usize, Option<usize>)>,
    pub intervals_checked: usize,
    pub irreducible: bool,
}

/// Scans every proper coordinate interval `[a, b]` with `b <= dim - 2` and
/// every upper interval `[a, N]` (read as `[a, inf)`) for subharmonicity.
pub fn irreducibility_scan(channel: &TruncatedChannel) -> IrreducibilityScan {
    let d = channel.dim();
    let tr = channel.diagonal_transfer();
    // row_in[i][b+1] - row_in[i][a] = sum_{k in [a, b]} T(e_kk)[i, i]
    let prefix: Vec<Vec<f64>> = tr
        .iter()
        .map(|row| {
            let mut p = vec![0.0; d + 1];
            for k in 0..d {
                p[k + 1] = p[k] + row[k];
            }
            p
        })
        .collect();
    let mut subharmonic = Vec::new();
    let mut checked = 0;
    let mut test = |a: usize, b: usize, open: bool, out: &mut Vec<(usize, Option<usize>)>| {
        checked += 1;
        let size = (b - a + 1) as f64;
        let outside: f64 = (a..=b).map(|i| prefix[i][d] - (prefix[i][b + 1] - prefix[i][a])).sum();
        if outside > 1e-12 * size {
            return;
        }
        let mask: Vec<bool> = (0..d).map(|i| i >= a && i <= b).collect();
        if subharmonic_projection_check(channel, &mask) {
            out.push((a, if open { None } else { Some(b) }));
        }
    };
    for a in 0..d - 1 {
        for b in a..d - 1 {
            test(a, b, false, &mut subharmonic);
        }
    }
    for a in 1..d {
        test(a, d - 1, true, &mut subharmonic);
    }
    IrreducibilityScan { irreducible: subharmonic.is_empty(), subharmonic, intervals_checked: checked }
}
