//! Invariant states of truncated predual channels.
//!
//! The direct solver runs inverse iteration on the sparse predual matrix
//! with a shift just above 1, so the eigenvector closest to 1 dominates
//! after a handful of banded solves. The Cesaro solver averages iterates
//! over doubling blocks and stops when consecutive block averages agree.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Float, Zero};

use crate::channel::{build_maser_channel, MaserParams, TruncatedChannel};
use crate::error::{Error, Result};
use crate::linalg::{fit_line, trace_norm, unvectorize, vectorize, BandedLu, CMatrix, C64};

/// Default eigenvalue-proximity tolerance of the direct solver.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Tolerance used by [`truncation_convergence`]; small truncations leak
/// more than [`DEFAULT_TOL`] through the top level.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Eigenvalues down to this are clipped; anything more negative is an error.
pub const CLIP: f64 = -1e-10;

const SHIFT: f64 = 1.0 + 1e-10;
const MAX_INVERSE_STEPS: usize = 60;

/// A state on `[0, N]`; `entries[(n, m)]` is `phi(e_{m,n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: CMatrix,
    /// Trace lost to the truncation before renormalization.
    pub trace_deficit: f64,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-12), positivity (1e-10) and unit trace.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::LengthMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        let skew = (&entries - entries.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if skew > 1e-12 {
            return Err(Error::InvalidParameter { name: "entries", reason: format!("not Hermitian ({skew:e})") });
        }
        let tr = entries.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidParameter { name: "entries", reason: format!("trace {tr} != 1") });
        }
        let min = crate::linalg::min_eigenvalue(&entries);
        if min < CLIP {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { entries, trace_deficit: 0.0 })
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::from_diagonal(&{
            let mut d = vec![0.0; dim];
            d[0] = 1.0;
            d
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0 / dim as f64; dim])
    }

    /// Diagonal state; the weights are normalized.
    pub fn from_diagonal(weights: &[f64]) -> Self {
        let s: f64 = weights.iter().sum();
        let mut m = CMatrix::zeros(weights.len(), weights.len());
        for (i, w) in weights.iter().enumerate() {
            m[(i, i)] = C64::new(w / s, 0.0);
        }
        Self { entries: m, trace_deficit: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// Zero-padded copy on `[0, dim - 1]`.
    pub fn embed(&self, dim: usize) -> Self {
        assert!(dim >= self.dim());
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.entries);
        Self { entries: m, trace_deficit: self.trace_deficit }
    }

    pub fn trace_distance(&self, other: &Self) -> f64 {
        let d = self.dim().max(other.dim());
        trace_norm(&(self.embed(d).entries - other.embed(d).entries))
    }
}

/// Hermitizes, clips eigenvalues in `[CLIP, 0)` and renormalizes.
fn finalize(m: CMatrix, trace_deficit: f64) -> Result<DensityMatrix> {
    let tr = m.trace();
    if !(tr.norm() > 0.0) {
        return Err(Error::NotPositive(0.0));
    }
    let m = m / tr;
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min < CLIP {
        return Err(Error::NotPositive(min));
    }
    let h = if min < 0.0 {
        let mut vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0), 0.0));
        let s: C64 = vals.iter().sum();
        vals /= s;
        &eig.eigenvectors * CMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
    } else {
        h
    };
    Ok(DensityMatrix { entries: h, trace_deficit })
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Normalizes to unit length with the largest entry real and positive.
fn fix_phase(v: &mut [C64]) {
    let big = v.iter().copied().fold(C64::zero(), |a, z| if z.norm() > a.norm() { z } else { a });
    if big == C64::zero() {
        return;
    }
    let s = big.conj() / (big.norm() * norm2(v));
    v.iter_mut().for_each(|z| *z *= s);
}

/// Eigenvector of the predual with eigenvalue closest to 1, as a state.
pub fn solve_invariant_direct(channel: &TruncatedChannel, tol: f64) -> Result<DensityMatrix> {
    let d = channel.dim();
    let p = channel.predual_matrix();
    let lu = BandedLu::factor_shifted(p, C64::new(-SHIFT, 0.0))?;
    let mut v = vectorize(&CMatrix::identity(d, d));
    fix_phase(&mut v);
    for _ in 0..MAX_INVERSE_STEPS {
        let prev = v.clone();
        lu.solve_in_place(&mut v);
        fix_phase(&mut v);
        let delta: f64 = v.iter().zip(&prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        if delta < 1e-14 {
            break;
        }
    }
    let pv = p.mul_vec(&v);
    let mu: C64 = v.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum();
    if (mu - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::NoInvariantState { eigenvalue: mu });
    }
    let mut rho = finalize(unvectorize(&v, d), 0.0)?;
    rho.trace_deficit = 1.0 - channel.apply_predual(&rho.entries).trace().re;
    Ok(rho)
}

/// Cesaro averages of `T_*^n(seed)` over blocks of length 16, 32, 64, ...
///
/// Each iterate is renormalized; `trace_deficit` of the result is the total
/// trace removed along the way.
pub fn solve_invariant_cesaro(
    channel: &TruncatedChannel,
    seed: &DensityMatrix,
    max_iter: usize,
    tol: f64,
) -> Result<DensityMatrix> {
    let d = channel.dim();
    if seed.dim() != d {
        return Err(Error::LengthMismatch { expected: d, got: seed.dim() });
    }
    let p = channel.predual_matrix();
    let mut v = vectorize(&seed.entries);
    let mut deficit = 0.0;
    let mut block = 16;
    let mut iterations = 0;
    let mut prev: Option<CMatrix> = None;
    let mut distance = f64::INFINITY;
    loop {
        let mut sum = vec![C64::zero(); d * d];
        for _ in 0..block {
            if iterations >= max_iter {
                return Err(Error::NonConvergence { iterations, distance });
            }
            v = p.mul_vec(&v);
            let tr: f64 = (0..d).map(|i| v[i + i * d].re).sum();
            if !(tr > 0.0) {
                return Err(Error::NonConvergence { iterations, distance });
            }
            deficit += 1.0 - tr;
            v.iter_mut().for_each(|z| *z /= tr);
            sum.iter_mut().zip(&v).for_each(|(s, z)| *s += z);
            iterations += 1;
        }
        let avg = unvectorize(&sum, d) / C64::new(block as f64, 0.0);
        if let Some(p) = &prev {
            distance = trace_norm(&(&avg - p));
            if distance < tol {
                return finalize(avg, deficit);
            }
        }
        prev = Some(avg);
        block *= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalloffFit {
    pub c: f64,
    pub gamma: f64,
    /// Inclusive index range of the fit.
    pub window: (usize, usize),
    /// Largest `rho_nn - C e^{-gamma n}` on the window (0 if the bound holds).
    pub max_violation: f64,
    /// RMS residual of the log-linear fit.
    pub rms: f64,
    /// Window cut short by vanishing diagonal entries.
    pub shrunk: bool,
    /// Fewer than two usable points; `gamma` is infinite.
    pub degenerate: bool,
}

/// Fits `ln rho_nn = ln C - gamma n` on `[0, dim - 3]`, stopping before the
/// first entry below `1e-13 * max rho_nn`.
pub fn falloff_fit(rho: &DensityMatrix) -> FalloffFit {
    let diag = rho.diagonal();
    let hi = rho.dim().saturating_sub(3);
    let top = diag.iter().fold(0.0f64, |m, v| m.max(*v));
    let cut = (0..=hi).find(|&n| !(diag[n] > 1e-13 * top));
    let shrunk = cut.is_some();
    let len = cut.unwrap_or(hi + 1);
    let end = len.saturating_sub(1);
    let xs: Vec<f64> = (0..len).map(|n| n as f64).collect();
    let ys: Vec<f64> = (0..len).map(|n| diag[n].ln()).collect();
    match fit_line(&xs, &ys) {
        Some((a, b, rms)) => {
            let c = a.exp();
            let gamma = -b;
            let max_violation =
                (0..=end).map(|n| diag[n] - c * (-gamma * n as f64).exp()).fold(0.0f64, |m, v| m.max(v));
            FalloffFit { c, gamma, window: (0, end), max_violation, rms, shrunk, degenerate: false }
        }
        None => FalloffFit {
            c: diag[0],
            gamma: f64::INFINITY,
            window: (0, end),
            max_violation: 0.0,
            rms: 0.0,
            shrunk,
            degenerate: true,
        },
    }
}

/// Trace distances between invariant states at consecutive truncations.
pub fn truncation_convergence(params: &MaserParams, dims: &[usize]) -> Result<Vec<f64>> {
    if dims.len() < 3 || dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "dims", reason: "need at least three increasing sizes".into() });
    }
    let mut states = Vec::with_capacity(dims.len());
    for &d in dims {
        states.push(solve_invariant_direct(&build_maser_channel(params, d)?, TRUNCATION_TOL)?);
    }
    Ok(states.windows(2).map(|w| w[0].trace_distance(&w[1])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittedRate {
    /// `d_n ~ prefactor * n^{-exponent}`.
    PowerLaw { exponent: f64, prefactor: f64, rms: f64 },
    /// `d_n ~ prefactor * ratio^n`.
    Geometric { ratio: f64, prefactor: f64, rms: f64 },
}

impl FittedRate {
    pub fn rms(&self) -> f64 {
        match *self {
            FittedRate::PowerLaw { rms, .. } | FittedRate::Geometric { rms, .. } => rms,
        }
    }
}

/// Constants of a convex combination `T = lambda R + (1 - lambda) S`:
/// invariant-state fall-off `gamma2`, and the bound
/// `exp(gamma0 m - gamma1 n)` on the approach to equilibrium under `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexCombConstants {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda: f64,
    pub a: f64,
}

/// `gamma1 gamma2 / (-a ln(lambda) (gamma0 + gamma2))`.
pub fn convex_comb_gamma(k: &ConvexCombConstants) -> Result<f64> {
    if !(k.lambda > 0.0 && k.lambda < 1.0) {
        return Err(Error::InvalidParameter { name: "lambda", reason: "must lie in (0, 1)".into() });
    }
    if !(k.a > 1.0) {
        return Err(Error::InvalidParameter { name: "a", reason: "must exceed 1".into() });
    }
    if !(k.gamma0 >= 0.0 && k.gamma1 > 0.0 && k.gamma2 > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", reason: "rates must be positive".into() });
    }
    Ok(k.gamma1 * k.gamma2 / (-k.a * k.lambda.ln() * (k.gamma0 + k.gamma2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    /// `d_n = ||T_*^n theta - phi||_1` for `n = 0, 1, ...`.
    pub distances: Vec<f64>,
    pub fitted_rate: Option<FittedRate>,
    pub gamma_bound: Option<f64>,
}

impl ConvergenceTrace {
    /// Largest increase `d_{n+1} - d_n` (0 if nonincreasing).
    pub fn max_increase(&self) -> f64 {
        self.distances.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]))
    }

    /// First `n` with `d_n < threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.distances.iter().position(|d| *d < threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceOptions {
    /// Stop once the distance falls below this value.
    pub stop_below: Option<f64>,
    pub convex: Option<ConvexCombConstants>,
}

pub fn convergence_trace(
    channel: &TruncatedChannel,
    theta: &DensityMatrix,
    phi: &DensityMatrix,
    n_max: usize,
) -> Result<ConvergenceTrace> {
    convergence_trace_with(channel, theta, phi, n_max, &TraceOptions::default())
}

pub fn convergence_trace_with(
    channel: &TruncatedChannel,
    theta: &DensityMatrix,
    phi: &DensityMatrix,
    n_max: usize,
    opts: &TraceOptions,
) -> Result<ConvergenceTrace> {
    let d = channel.dim();
    for s in [theta, phi] {
        if s.dim() != d {
            return Err(Error::LengthMismatch { expected: d, got: s.dim() });
        }
    }
    let p = channel.predual_matrix();
    let target = &phi.entries;
    let mut v = vectorize(&theta.entries);
    let mut distances = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            v = p.mul_vec(&v);
        }
        let dist = trace_norm(&(unvectorize(&v, d) - target));
        distances.push(dist);
        if opts.stop_below.is_some_and(|t| dist < t) {
            break;
        }
    }
    let gamma_bound = opts.convex.as_ref().map(convex_comb_gamma).transpose()?;
    Ok(ConvergenceTrace { fitted_rate: fit_rate(&distances), gamma_bound, distances })
}

/// Points `(n, d_n)` after a 10% burn-in with `d_n` above the roundoff floor.
fn fit_points(distances: &[f64]) -> Vec<(f64, f64)> {
    let burn = (distances.len() / 10).max(1);
    distances.iter().enumerate().skip(burn).filter(|(_, d)| **d > 1e-13).map(|(n, d)| (n as f64, *d)).collect()
}

fn fit_rate(distances: &[f64]) -> Option<FittedRate> {
    let pts = fit_points(distances);
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ln_n: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let power = fit_line(&ln_n, &ly).map(|(a, b, rms)| FittedRate::PowerLaw { exponent: -b, prefactor: a.exp(), rms });
    let geo = fit_line(&n, &ly).map(|(a, b, rms)| FittedRate::Geometric { ratio: b.exp(), prefactor: a.exp(), rms });
    match (power, geo) {
        (Some(p), Some(g)) => Some(if p.rms() <= g.rms() { p } else { g }),
        (p, g) => p.or(g),
    }
}

/// Power law `c n^{-gamma}` that dominates `d_n` for every `n >= n0`:
/// `gamma` from a log-log fit over `[n0, end]`, `c` the smallest constant
/// that makes the curve an upper bound there. Returns `(c, gamma)`.
pub fn dominating_power_law(distances: &[f64], n0: usize) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .skip(n0.max(1))
        .filter(|(_, d)| **d > 1e-13)
        .map(|(n, d)| ((n as f64).ln(), d.ln()))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (_, slope, _) = fit_line(&x, &y)?;
    let gamma = -slope;
    let ln_c = pts.iter().map(|(lx, ly)| ly + gamma * lx).fold(f64::NEG_INFINITY, f64::max);
    Some((ln_c.exp(), gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalloffBoundEntry {
    pub c: f64,
    pub d: f64,
    /// `sum of rho_nn over c <= y_n <= d`.
    pub mass: f64,
    /// `b / c`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalloffBoundReport {
    pub entries: Vec<FalloffBoundEntry>,
    pub all_hold: bool,
}

/// Checks `rho(chi_[c,d](Y)) <= b / c` for diagonal `Y`.
pub fn falloff_bound_check(rho: &DensityMatrix, y_diag: &[f64], b: f64, cd_pairs: &[(f64, f64)]) -> Result<FalloffBoundReport> {
    let diag = rho.diagonal();
    let len = diag.len().min(y_diag.len());
    let mut entries = Vec::with_capacity(cd_pairs.len());
    for &(c, d) in cd_pairs {
        if !(c > 0.0 && d >= c) {
            return Err(Error::InvalidParameter { name: "cd_pairs", reason: format!("need 0 < c <= d, got ({c}, {d})") });
        }
        let mass: f64 = (0..len).filter(|&n| y_diag[n] >= c && y_diag[n] <= d).map(|n| diag[n]).sum();
        let bound = b / c;
        entries.push(FalloffBoundEntry { c, d, mass, bound, holds: mass <= bound * (1.0 + 1e-12) + 1e-15 });
    }
    Ok(FalloffBoundReport { all_hold: entries.iter().all(|e| e.holds), entries })
}
