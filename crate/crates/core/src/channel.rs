//! Maser-type channels on a truncated Fock space, transition rates and the
//! structural checks that make a map a nearest-neighbour chain.
//!
//! A channel on the window `[0, N]` (dimension `N + 1`) is stored as the
//! matrix of its Heisenberg action on column-stacked observables:
//! `H[vec(a, b), vec(i, j)] = T(e_ij)[a, b]`. The predual is the conjugate
//! transpose, so `Tr(rho T(x)) = Tr(T_*(rho) x)` for Hermitian `rho`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, max_abs, unvectorize, vec_index, vectorize, CMatrix, SparseMatrix, C64};

const NORM_TOL: f64 = 1e-12;

/// How the coupling sequences `alpha_n`, `beta_n` are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Lists indexed from `n = 0`; `alpha[0] = 1`, `beta[0] = 0`.
    Explicit { alpha: Vec<f64>, beta: Vec<f64> },
    /// Constant `alpha_n = alpha`, `beta_n = beta` for `n >= 1`.
    Toy { alpha: f64, beta: f64 },
    /// `alpha_n = cos(g tau sqrt n)`, `beta_n = -sin(g tau sqrt n)`.
    JaynesCummings { g: f64, tau: f64 },
}

/// Atomic state `(lambda, zeta)` plus coupling: the full maser model.
#[derive(Debug, Clone, PartialEq)]
pub struct MaserParams {
    lambda: f64,
    zeta: C64,
    nu: C64,
    coupling: Coupling,
}

fn invalid(name: &'static str, reason: impl Into<alloc::string::String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

/// `nu = i sqrt(lambda (1 - lambda)) zeta`.
pub fn nu_of(lambda: f64, zeta: C64) -> C64 {
    C64::new(0.0, (lambda * (1.0 - lambda)).sqrt()) * zeta
}

impl MaserParams {
    pub fn new(lambda: f64, zeta: C64, coupling: Coupling) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid("lambda", format!("{lambda} is outside [0, 1]")));
        }
        if !(zeta.norm() <= 1.0 + NORM_TOL) {
            return Err(invalid("zeta", format!("|zeta| = {} exceeds 1", zeta.norm())));
        }
        match &coupling {
            Coupling::Toy { alpha, beta } => check_pair(1, *alpha, *beta)?,
            Coupling::JaynesCummings { g, tau } => {
                if !(g.is_finite() && *g > 0.0) {
                    return Err(invalid("g", "coupling rate must be positive"));
                }
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(invalid("tau", "interaction time must be positive"));
                }
            }
            Coupling::Explicit { alpha, beta } => {
                if alpha.len() != beta.len() {
                    return Err(Error::LengthMismatch { expected: alpha.len(), got: beta.len() });
                }
                if alpha.is_empty() || alpha[0] != 1.0 || beta[0] != 0.0 {
                    return Err(Error::Unnormalized { index: 0, norm: f64::NAN });
                }
                for (n, (&a, &b)) in alpha.iter().zip(beta).enumerate() {
                    check_pair(n, a, b)?;
                }
            }
        }
        Ok(Self { lambda, zeta, nu: nu_of(lambda, zeta), coupling })
    }

    pub fn toy(lambda: f64, zeta: C64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(lambda, zeta, Coupling::Toy { alpha, beta })
    }

    /// The toy model with `alpha = 0`, `beta = 1`.
    pub fn baby(lambda: f64, zeta: C64) -> Result<Self> {
        Self::toy(lambda, zeta, 0.0, 1.0)
    }

    pub fn jaynes_cummings(lambda: f64, zeta: C64, g: f64, tau: f64) -> Result<Self> {
        Self::new(lambda, zeta, Coupling::JaynesCummings { g, tau })
    }

    pub fn explicit(lambda: f64, zeta: C64, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        Self::new(lambda, zeta, Coupling::Explicit { alpha, beta })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn zeta(&self) -> C64 {
        self.zeta
    }

    pub fn nu(&self) -> C64 {
        self.nu
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// `(alpha_n, beta_n)`.
    pub fn pair(&self, n: usize) -> Result<(f64, f64)> {
        if n == 0 {
            return Ok((1.0, 0.0));
        }
        match &self.coupling {
            Coupling::Toy { alpha, beta } => Ok((*alpha, *beta)),
            Coupling::JaynesCummings { g, tau } => Ok(jc_pair(*g, *tau, n)),
            Coupling::Explicit { alpha, beta } => match (alpha.get(n), beta.get(n)) {
                (Some(a), Some(b)) => Ok((*a, *b)),
                _ => Err(Error::SequenceTooShort { needed: n, len: alpha.len() }),
            },
        }
    }

    /// `alpha_0..alpha_{len-1}` and `beta_0..beta_{len-1}`.
    pub fn sequences(&self, len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut a = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        for n in 0..len {
            let (x, y) = self.pair(n)?;
            a.push(x);
            b.push(y);
        }
        Ok((a, b))
    }

    /// Re-checks the stored invariants, including normalization up to `len`.
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.nu != nu_of(self.lambda, self.zeta) {
            return Err(invalid("nu", "does not match lambda and zeta"));
        }
        for n in 0..len {
            let (a, b) = self.pair(n)?;
            check_pair(n, a, b)?;
        }
        Ok(())
    }
}

pub(crate) fn jc_pair(g: f64, tau: f64, n: usize) -> (f64, f64) {
    let x = g * tau * (n as f64).sqrt();
    (x.cos(), -x.sin())
}

fn check_pair(index: usize, a: f64, b: f64) -> Result<()> {
    let norm = a * a + b * b;
    if !(a.abs() <= 1.0 + NORM_TOL && b.abs() <= 1.0 + NORM_TOL && (norm - 1.0).abs() <= NORM_TOL) {
        return Err(Error::Unnormalized { index, norm });
    }
    Ok(())
}

/// What happens to probability that would leave the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Project onto `[0, N]`; outflow past `N` is discarded.
    Compress,
}

/// Heisenberg and predual matrices of a channel on `[0, dim - 1]`.
#[derive(Debug, Clone)]
pub struct TruncatedChannel {
    dim: usize,
    heisenberg: SparseMatrix,
    predual: SparseMatrix,
    boundary_policy: BoundaryPolicy,
    leak_estimate: f64,
}

impl TruncatedChannel {
    /// Wraps a Heisenberg matrix of size `dim^2 x dim^2`.
    pub fn from_heisenberg(dim: usize, heisenberg: SparseMatrix) -> Result<Self> {
        let n = dim * dim;
        if heisenberg.nrows() != n || heisenberg.ncols() != n {
            return Err(Error::LengthMismatch { expected: n, got: heisenberg.nrows() });
        }
        let predual = heisenberg.adjoint();
        let mut ch = Self { dim, heisenberg, predual, boundary_policy: BoundaryPolicy::Compress, leak_estimate: 0.0 };
        ch.leak_estimate = ch.compute_leak();
        Ok(ch)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_heisenberg(dim, SparseMatrix::identity(dim * dim)).expect("square identity")
    }

    /// `sum_k w_k T_k`; all channels must share `dim`.
    pub fn convex_combination(parts: &[(f64, &TruncatedChannel)]) -> Result<Self> {
        let dim = parts.first().map(|p| p.1.dim).ok_or_else(|| invalid("parts", "empty combination"))?;
        let mut trip = Vec::new();
        for (w, ch) in parts {
            if ch.dim != dim {
                return Err(Error::LengthMismatch { expected: dim, got: ch.dim });
            }
            if !(*w >= 0.0) {
                return Err(invalid("weight", "weights must be nonnegative"));
            }
            trip.extend(ch.heisenberg.triplets().into_iter().map(|(r, c, v)| (r, c, v * *w)));
        }
        Self::from_heisenberg(dim, SparseMatrix::from_triplets(dim * dim, dim * dim, trip))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn heisenberg_matrix(&self) -> &SparseMatrix {
        &self.heisenberg
    }

    pub fn predual_matrix(&self) -> &SparseMatrix {
        &self.predual
    }

    pub fn boundary_policy(&self) -> BoundaryPolicy {
        self.boundary_policy
    }

    /// Trace lost from the top level per application: `1 - Tr T_*(e_NN)`.
    pub fn leak_estimate(&self) -> f64 {
        self.leak_estimate
    }

    fn compute_leak(&self) -> f64 {
        let d = self.dim;
        let top = vec_index(d - 1, d - 1, d);
        let kept: f64 = (0..d).map(|a| self.heisenberg.get(vec_index(a, a, d), top).re).sum();
        (1.0 - kept).max(0.0)
    }

    /// `T(e_ij)[a, b]`.
    pub fn unit_image_entry(&self, a: usize, b: usize, i: usize, j: usize) -> C64 {
        let d = self.dim;
        self.heisenberg.get(vec_index(a, b, d), vec_index(i, j, d))
    }

    /// Heisenberg action on a `dim x dim` observable.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        assert_eq!(x.nrows(), self.dim);
        unvectorize(&self.heisenberg.mul_vec(&vectorize(x)), self.dim)
    }

    /// Predual action on a `dim x dim` density matrix.
    pub fn apply_predual(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(rho.nrows(), self.dim);
        unvectorize(&self.predual.mul_vec(&vectorize(rho)), self.dim)
    }

    /// `T(e_nn)[a, a]` for all `a`, `n`: the classical part of the chain.
    pub fn diagonal_transfer(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut out = vec![vec![0.0; d]; d];
        for n in 0..d {
            for (row, v) in self.heisenberg.column(vec_index(n, n, d)) {
                let (a, b) = (row % d, row / d);
                if a == b {
                    out[a][n] = v.re;
                }
            }
        }
        out
    }
}

/// Sequences needed to build a channel on `[0, dim - 1]`: indices `0..=dim`.
fn coupling_table(params: &MaserParams, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = params.sequences(dim + 1)?;
    for n in 0..=dim {
        check_pair(n, a[n], b[n])?;
    }
    Ok((a, b))
}

/// Stencil of `T(e_kl)`: the eight terms of the maser action, entries
/// `(out_row, out_col, coefficient)` before compression to the window.
fn maser_stencil(lambda: f64, nu: C64, a: &[f64], b: &[f64], k: usize, l: usize, out: &mut Vec<(isize, isize, C64)>) {
    let re = |v: f64| C64::new(v, 0.0);
    let nub = nu.conj();
    let (ki, li) = (k as isize, l as isize);
    out.push((ki, li, re(lambda * a[k + 1] * a[l + 1] + (1.0 - lambda) * a[k] * a[l])));
    out.push((ki - 1, li - 1, re(lambda * b[k] * b[l])));
    out.push((ki + 1, li + 1, re((1.0 - lambda) * b[k + 1] * b[l + 1])));
    out.push((ki, li - 1, -nub * (a[k] * b[l])));
    out.push((ki + 1, li, nub * (b[k + 1] * a[l + 1])));
    out.push((ki, li + 1, nu * (a[k + 1] * b[l + 1])));
    out.push((ki - 1, li, -nu * (b[k] * a[l])));
}

/// Stencil entries `(row, col, value)` of the compressed Heisenberg matrix.
/// Positions depend only on `dim`, and the order is fixed, so channels with
/// different coefficients can be averaged entrywise.
pub(crate) fn maser_triplets(lambda: f64, nu: C64, a: &[f64], b: &[f64], dim: usize) -> Vec<(usize, usize, C64)> {
    let d = dim as isize;
    let mut trip = Vec::with_capacity(7 * dim * dim);
    let mut stencil = Vec::with_capacity(7);
    for l in 0..dim {
        for k in 0..dim {
            stencil.clear();
            maser_stencil(lambda, nu, a, b, k, l, &mut stencil);
            let col = vec_index(k, l, dim);
            for &(r, c, v) in &stencil {
                if (0..d).contains(&r) && (0..d).contains(&c) {
                    trip.push((vec_index(r as usize, c as usize, dim), col, v));
                }
            }
        }
    }
    trip
}

/// Builds the maser channel compressed to `[0, dim - 1]`.
pub fn build_maser_channel(params: &MaserParams, dim: usize) -> Result<TruncatedChannel> {
    if dim < 3 {
        return Err(Error::DimensionTooSmall { dim, min: 3 });
    }
    let (a, b) = coupling_table(params, dim)?;
    let trip = maser_triplets(params.lambda, params.nu, &a, &b, dim);
    TruncatedChannel::from_heisenberg(dim, SparseMatrix::from_triplets(dim * dim, dim * dim, trip))
}

/// Rates `sigma_n, mu_n, lambda_n, eta_n` for `0 <= n <= cutoff`;
/// `mu[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRates {
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
    pub lam: Vec<f64>,
    pub eta: Vec<C64>,
    pub cutoff: usize,
}

impl TransitionRates {
    /// Builds a rate set, checking lengths (`cutoff + 1` each).
    pub fn new(sigma: Vec<f64>, mu: Vec<f64>, lam: Vec<f64>, eta: Vec<C64>) -> Result<Self> {
        let len = lam.len();
        for l in [sigma.len(), mu.len(), eta.len()] {
            if l != len {
                return Err(Error::LengthMismatch { expected: len, got: l });
            }
        }
        if len == 0 {
            return Err(invalid("rates", "empty rate sequences"));
        }
        Ok(Self { sigma, mu, lam, eta, cutoff: len - 1 })
    }

    /// Constant birth/death rates with `sigma` from the sum rule.
    pub fn constant(lam: f64, mu: f64, eta: C64, cutoff: usize) -> Self {
        let mut mus = vec![mu; cutoff + 1];
        mus[0] = 0.0;
        let sigma = mus.iter().map(|m| 1.0 - lam - m).collect();
        Self { sigma, mu: mus, lam: vec![lam; cutoff + 1], eta: vec![eta; cutoff + 1], cutoff }
    }

    pub fn len(&self) -> usize {
        self.cutoff + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest `|sigma_n + lambda_n + mu_n - 1|`.
    pub fn sum_rule_residual(&self) -> f64 {
        (0..self.len()).map(|n| (self.sigma[n] + self.lam[n] + self.mu[n] - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Rates read off the channel's action on matrix units; `cutoff = dim - 2`.
pub fn extract_transition_rates(channel: &TruncatedChannel) -> Result<TransitionRates> {
    let d = channel.dim();
    if d < 3 {
        return Err(Error::DimensionTooSmall { dim: d, min: 3 });
    }
    let cutoff = d - 2;
    let mut sigma = Vec::with_capacity(cutoff + 1);
    let mut mu = Vec::with_capacity(cutoff + 1);
    let mut lam = Vec::with_capacity(cutoff + 1);
    let mut eta = Vec::with_capacity(cutoff + 1);
    for n in 0..=cutoff {
        sigma.push(channel.unit_image_entry(n, n, n, n).re);
        mu.push(if n == 0 { 0.0 } else { channel.unit_image_entry(n, n, n - 1, n - 1).re });
        lam.push(channel.unit_image_entry(n, n, n + 1, n + 1).re);
        eta.push(channel.unit_image_entry(n, n + 1, n, n));
    }
    Ok(TransitionRates { sigma, mu, lam, eta, cutoff })
}

/// Analytic rates of the maser model: `lambda_n = lambda beta_{n+1}^2`,
/// `mu_n = (1 - lambda) beta_n^2`, `eta_n = nu alpha_{n+1} beta_{n+1}`.
pub fn closed_form_rates(params: &MaserParams, cutoff: usize) -> Result<TransitionRates> {
    let (a, b) = params.sequences(cutoff + 2)?;
    let l = params.lambda;
    let mut out = TransitionRates {
        sigma: Vec::with_capacity(cutoff + 1),
        mu: Vec::with_capacity(cutoff + 1),
        lam: Vec::with_capacity(cutoff + 1),
        eta: Vec::with_capacity(cutoff + 1),
        cutoff,
    };
    for n in 0..=cutoff {
        let birth = l * b[n + 1] * b[n + 1];
        let death = (1.0 - l) * b[n] * b[n];
        out.lam.push(birth);
        out.mu.push(death);
        out.sigma.push(1.0 - birth - death);
        out.eta.push(params.nu * (a[n + 1] * b[n + 1]));
    }
    Ok(out)
}

/// `p_[0,M] T(X) p_[0,M]` for `X` supported on `[0, M+1]`.
pub fn heisenberg_apply_window(channel: &TruncatedChannel, x: &CMatrix, m: usize) -> Result<CMatrix> {
    let d = channel.dim();
    if m + 1 >= d {
        return Err(Error::WindowExceedsTruncation { window: m, dim: d });
    }
    if x.nrows() != m + 2 || x.ncols() != m + 2 {
        return Err(Error::LengthMismatch { expected: m + 2, got: x.nrows() });
    }
    let mut full = CMatrix::zeros(d, d);
    full.view_mut((0, 0), (m + 2, m + 2)).copy_from(x);
    let y = channel.apply(&full);
    Ok(y.view((0, 0), (m + 1, m + 1)).into_owned())
}

/// Residuals of the nearest-neighbour structure checks.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdcStructureReport {
    pub max_forbidden_rate: f64,
    pub unitality_residual: f64,
    pub sum_rule_residual: f64,
    pub eta_consistency_residual: f64,
    /// Smallest eigenvalue of the interior Choi matrix.
    pub cp_min_eigenvalue: f64,
    /// Most negative eigenvalue over the sampled sandwich differences
    /// (reported as its negative part, so 0 means no violation).
    pub sandwich_violation: f64,
    /// Trace lost at the top level (boundary diagnostic, not a residual).
    pub boundary_leak: f64,
    pub windows_checked: usize,
    pub unit_pairs_scanned: usize,
}

impl QbdcStructureReport {
    pub fn max_residual(&self) -> f64 {
        self.max_forbidden_rate
            .max(self.unitality_residual)
            .max(self.sum_rule_residual)
            .max(self.eta_consistency_residual)
            .max(self.sandwich_violation)
            .max((-self.cp_min_eigenvalue).max(0.0))
    }
}

/// Runs the structural checks. `sample_budget` caps the number of input
/// matrix units scanned for long-range entries; `0` means all when
/// `dim <= 32` and a stratified default otherwise.
pub fn verify_qbdc_structure(channel: &TruncatedChannel, sample_budget: usize) -> Result<QbdcStructureReport> {
    let d = channel.dim();
    if d < 4 {
        return Err(Error::DimensionTooSmall { dim: d, min: 4 });
    }
    let (max_forbidden_rate, unit_pairs_scanned) = forbidden_scan(channel, sample_budget);

    let mut p = CMatrix::zeros(d, d);
    for n in 0..d - 1 {
        p[(n, n)] = C64::new(1.0, 0.0);
    }
    let tp = channel.apply(&p);
    let mut unitality_residual: f64 = 0.0;
    for i in 0..d - 2 {
        for j in 0..d - 2 {
            let target = if i == j { 1.0 } else { 0.0 };
            unitality_residual = unitality_residual.max((tp[(i, j)] - target).norm());
        }
    }

    let rates = extract_transition_rates(channel)?;
    let interior = d - 2;
    let sum_rule_residual =
        (0..interior).map(|n| (rates.sigma[n] + rates.lam[n] + rates.mu[n] - 1.0).abs()).fold(0.0, f64::max);
    let eta_consistency_residual = (0..interior)
        .map(|n| (rates.eta[n] + channel.unit_image_entry(n, n + 1, n + 1, n + 1)).norm())
        .fold(0.0, f64::max);

    let (sandwich_violation, windows_checked) = sandwich_scan(channel);
    Ok(QbdcStructureReport {
        max_forbidden_rate,
        unitality_residual,
        sum_rule_residual,
        eta_consistency_residual,
        cp_min_eigenvalue: interior_choi_min_eigenvalue(channel),
        sandwich_violation,
        boundary_leak: channel.leak_estimate(),
        windows_checked,
        unit_pairs_scanned,
    })
}

/// Largest `|T(e_kl)[a, b]|` with `|a - k| > 1` or `|b - l| > 1`.
fn forbidden_scan(channel: &TruncatedChannel, budget: usize) -> (f64, usize) {
    let d = channel.dim();
    let total = d * d;
    let budget = if budget == 0 {
        if d <= 32 {
            total
        } else {
            1024
        }
    } else {
        budget.min(total)
    };
    let stride = if budget >= total { 1 } else { total.div_ceil(budget) };
    let mut worst: f64 = 0.0;
    let mut scanned = 0;
    let mut col = 0;
    while col < total {
        let (k, l) = (col % d, col / d);
        for (row, v) in channel.heisenberg_matrix().column(col) {
            let (a, b) = (row % d, row / d);
            if a.abs_diff(k) > 1 || b.abs_diff(l) > 1 {
                worst = worst.max(v.norm());
            }
        }
        scanned += 1;
        col += stride;
    }
    (worst, scanned)
}

fn block_of_projection_image(channel: &TruncatedChannel, n: usize, m: usize, lo: usize, hi: usize) -> CMatrix {
    let d = channel.dim();
    let size = hi - lo + 1;
    let mut out = CMatrix::zeros(size, size);
    for k in n..=m {
        for (row, v) in channel.heisenberg_matrix().column(vec_index(k, k, d)) {
            let (a, b) = (row % d, row / d);
            if (lo..=hi).contains(&a) && (lo..=hi).contains(&b) {
                out[(a - lo, b - lo)] += v;
            }
        }
    }
    out
}

/// Checks `p_[n+1,m-1] <= T(p_[n,m]) <= p_[n-1,m+1]` for windows with
/// `m <= dim - 3`; returns the worst negative eigenvalue part.
fn sandwich_scan(channel: &TruncatedChannel) -> (f64, usize) {
    let d = channel.dim();
    let top = d - 3;
    let mut windows = Vec::new();
    for len in 0..4usize {
        for n in 0..=top {
            if n + len <= top {
                windows.push((n, n + len));
            }
        }
    }
    for m in (4..=top).step_by(3) {
        windows.push((0, m));
    }
    for n in (1..top.saturating_sub(4)).step_by(3) {
        windows.push((n, top));
    }
    let mut worst: f64 = 0.0;
    for &(n, m) in &windows {
        let lo = n.saturating_sub(1);
        let hi = m + 1;
        let t = block_of_projection_image(channel, n, m, lo, hi);
        let mut lower = t.clone();
        let mut upper = -t;
        for i in lo..=hi {
            if i > n && i < m {
                lower[(i - lo, i - lo)] -= C64::new(1.0, 0.0);
            }
            upper[(i - lo, i - lo)] += C64::new(1.0, 0.0);
        }
        worst = worst.max(-hermitian_eigenvalues(&lower)[0]).max(-hermitian_eigenvalues(&upper)[0]);
    }
    (worst.max(0.0), windows.len())
}

/// Smallest eigenvalue of the Choi matrix `[T(e_ij)]` restricted to inputs
/// in `[0, dim - 2]`.
///
/// Indices `(i, a)` with zero diagonal entry are dropped from the dense
/// eigenproblem; any coupling they carry is bounded through the 2x2 minor
/// `[[0, c], [conj c, d]]` instead, which is negative whenever `c != 0`.
pub fn interior_choi_min_eigenvalue(channel: &TruncatedChannel) -> f64 {
    let d = channel.dim();
    let inputs = d - 1;
    let h = channel.heisenberg_matrix();
    let mut diag = vec![0.0; inputs * d];
    for i in 0..inputs {
        for (row, v) in h.column(vec_index(i, i, d)) {
            let (a, b) = (row % d, row / d);
            if a == b {
                diag[i * d + a] = v.re;
            }
        }
    }
    let keep_tol = 1e-300;
    let mut pos = vec![usize::MAX; inputs * d];
    let mut kept = 0;
    let mut worst: f64 = f64::INFINITY;
    for (idx, &v) in diag.iter().enumerate() {
        if v > keep_tol {
            pos[idx] = kept;
            kept += 1;
        } else {
            worst = worst.min(v);
        }
    }
    let mut choi = CMatrix::zeros(kept, kept);
    for j in 0..inputs {
        for i in 0..inputs {
            for (row, v) in h.column(vec_index(i, j, d)) {
                let (a, b) = (row % d, row / d);
                let (p, q) = (i * d + a, j * d + b);
                match (pos[p], pos[q]) {
                    (usize::MAX, usize::MAX) => {
                        if v.norm() > 0.0 {
                            worst = worst.min(-v.norm());
                        }
                    }
                    (usize::MAX, _) | (_, usize::MAX) => {
                        let dd = diag[if pos[p] == usize::MAX { q } else { p }];
                        let c2 = v.norm_sqr();
                        if c2 > 0.0 {
                            worst = worst.min(0.5 * (dd - (dd * dd + 4.0 * c2).sqrt()));
                        }
                    }
                    (s, t) => choi[(s, t)] += v,
                }
            }
        }
    }
    let dense_min = if kept > 0 { hermitian_eigenvalues(&choi)[0] } else { f64::INFINITY };
    worst.min(dense_min)
}

/// Largest entry of `T(X) - X` outside the window's top two levels; a
/// quick unitality probe used in tests.
pub fn interior_defect(channel: &TruncatedChannel, x: &CMatrix) -> f64 {
    let d = channel.dim();
    let diff = channel.apply(x) - x;
    max_abs(&diff.view((0, 0), (d - 2, d - 2)).into_owned())
}
