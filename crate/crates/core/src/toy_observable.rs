//! Conserved observables of the constant-coupling maser.
//!
//! For parameters in the non-existence strip there is a Hermitian Toeplitz
//! plus number-operator-weighted observable `A` with `T(A) = A + C`. Its
//! coefficients obey second-order recurrences whose characteristic roots lie
//! on the unit circle in the complex-root regime.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Float, Zero};

use crate::channel::{build_maser_channel, heisenberg_apply_window, Coupling, MaserParams};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_norm, CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyObservable {
    /// `x_0..x_K` (`x_0 = 0`).
    pub x: Vec<C64>,
    /// `y_0..y_K` (`y_0 = 1`).
    pub y: Vec<C64>,
    /// Window `[0, m]` on which `A^m` was applied.
    pub window: usize,
    /// Operator norm of `T(A^m) - A^m - C` on `[0, m - 1]`.
    pub residual: f64,
    /// Moduli of the roots of the `y` recurrence.
    pub root_moduli: [f64; 2],
    pub max_abs_x: f64,
    pub max_abs_y: f64,
    /// Whether the hypothesis bounding `x` holds.
    pub x_bounded: bool,
}

fn toy_pair(params: &MaserParams) -> Result<(f64, f64)> {
    match *params.coupling() {
        Coupling::Toy { alpha, beta } => Ok((alpha, beta)),
        _ => Err(Error::NotApplicable("constant coupling required".into())),
    }
}

/// Builds the recurrence coefficients and checks them against the channel.
pub fn toy_conserved_observable(params: &MaserParams, c: f64, k_max: usize) -> Result<ToyObservable> {
    let (alpha, beta) = toy_pair(params)?;
    let lam = params.lambda();
    let nu = params.nu();
    let nu2 = nu.norm_sqr();
    if nu2 == 0.0 {
        return Err(Error::NotApplicable("nu = 0 leaves the recurrence undefined".into()));
    }
    if alpha == 0.0 || beta == 0.0 {
        return Err(Error::NotApplicable("alpha and beta must both be nonzero".into()));
    }
    if !(beta * beta < 1.0 / (1.0 + (1.0 - 2.0 * lam).powi(2) / (4.0 * nu2))) {
        return Err(Error::NotApplicable(format!("real-roots regime (beta^2 = {})", beta * beta)));
    }
    if k_max < 4 {
        return Err(Error::DimensionTooSmall { dim: k_max, min: 4 });
    }
    let nub = nu.conj();
    let a_coef = (beta / alpha) * (2.0 * lam - 1.0) / nub;
    let b_coef = nu / nub;

    let mut y = vec![C64::zero(); k_max + 1];
    let mut x = vec![C64::zero(); k_max + 1];
    y[0] = C64::new(1.0, 0.0);
    let s = -(c + (1.0 - 2.0 * lam) * beta * beta) / (2.0 * alpha * beta);
    y[1] = nu * (s / nu2);
    // Vacuum row: C = lambda beta^2 - 2 beta Re(conj(nu) x_1).
    x[1] = nu * ((lam * beta * beta - c) / (2.0 * beta * nu2));
    for k in 1..k_max {
        y[k + 1] = a_coef * y[k] - b_coef * y[k - 1];
        x[k + 1] = ((1.0 - lam) * (alpha - 1.0) * x[k] + lam * beta * beta * y[k] - nu * (alpha * beta) * y[k - 1])
            / (nub * beta);
    }

    let disc = (a_coef * a_coef - 4.0 * b_coef).sqrt();
    let root_moduli = [((a_coef + disc) * 0.5).norm(), ((a_coef - disc) * 0.5).norm()];

    let m = k_max / 2;
    let residual = toy_window_residual(params, c, &x, &y, m)?;
    Ok(ToyObservable {
        residual,
        window: m,
        root_moduli,
        max_abs_x: x.iter().fold(0.0, |acc, v| acc.max(v.norm())),
        max_abs_y: y.iter().fold(0.0, |acc, v| acc.max(v.norm())),
        x_bounded: (1.0 - alpha) / beta.abs() < nu.norm() / (1.0 - lam),
        x,
        y,
    })
}

/// Operator norm of `T(A^m) - A^m - C` on `[0, m - 1]`, where `A^m` is the
/// observable truncated at level `m` with the number-operator weight frozen
/// beyond it. Needs `x`, `y` of length at least `m + 1`.
pub fn toy_window_residual(params: &MaserParams, c: f64, x: &[C64], y: &[C64], m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::DimensionTooSmall { dim: m, min: 2 });
    }
    if x.len() <= m || y.len() <= m {
        return Err(Error::SequenceTooShort { needed: m + 1, len: x.len().min(y.len()) });
    }
    let channel = build_maser_channel(params, m + 2)?;
    let mut a = CMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        a[(i, i)] = C64::new(i as f64, 0.0);
        for k in 1..=m - i {
            let v = x[k] + y[k] * (i.min(m - k / 2) as f64);
            a[(i, i + k)] = v;
            a[(i + k, i)] = v.conj();
        }
    }
    let ta = heisenberg_apply_window(&channel, &a, m - 1)?;
    let mut r = ta - a.view((0, 0), (m, m));
    for i in 0..m {
        r[(i, i)] -= C64::new(c, 0.0);
    }
    Ok(hermitian_norm(&r))
}
