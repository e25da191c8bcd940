//! Lyapunov (existence) and drift (non-existence) certificates.
//!
//! Both are diagonal operators whose image under the channel is tridiagonal.
//! Verification applies the channel on a finite window and runs the
//! sufficient tridiagonal test.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::channel::{heisenberg_apply_window, TransitionRates, TruncatedChannel};
use crate::criteria::{classical_profile, KappaEstimate};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Slack factor of the backward head sweep.
const HEAD_SLACK: f64 = 1.5;
/// Relative tolerance for entries that must vanish in exact arithmetic.
const ZERO_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovData {
    pub t: f64,
    pub r: f64,
    /// Last index whose `y_n` comes from the head sweep.
    pub n_head: usize,
    /// `x_0..x_{M+1}`.
    pub x: Vec<f64>,
    /// `y_0..y_M`.
    pub y: Vec<f64>,
    /// `Y >= -b`.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftData {
    /// `Z = diag(0, ..., 0, 1, 2, ...)` starts growing after index `n_start + 1`.
    pub n_start: usize,
    /// Uniform fraction of `lambda_n - mu_n` used for `eps_n`.
    pub theta: f64,
    /// `z_0..z_{M+1}`.
    pub z: Vec<f64>,
    /// `eps_0..eps_M`.
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateBody {
    Lyapunov(LyapunovData),
    Drift(DriftData),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub body: CertificateBody,
    pub verified: bool,
    /// Smallest relative slack over both tridiagonal conditions; NaN until
    /// verified.
    pub min_slack: f64,
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self.body {
            CertificateBody::Lyapunov(_) => "lyapunov",
            CertificateBody::Drift(_) => "drift",
        }
    }

    /// Window `[0, M]` covered by the certificate.
    pub fn window(&self) -> usize {
        match &self.body {
            CertificateBody::Lyapunov(l) => l.y.len() - 1,
            CertificateBody::Drift(d) => d.eps.len() - 1,
        }
    }

    pub fn lyapunov(&self) -> Option<&LyapunovData> {
        match &self.body {
            CertificateBody::Lyapunov(l) => Some(l),
            _ => None,
        }
    }

    pub fn drift(&self) -> Option<&DriftData> {
        match &self.body {
            CertificateBody::Drift(d) => Some(d),
            _ => None,
        }
    }
}

fn bad(name: &'static str, reason: &str) -> Error {
    Error::InvalidParameter { name, reason: reason.to_string() }
}

/// Diagonal of `X - T(X)` for diagonal `X` from the rates:
/// `-lambda_n (x_{n+1} - x_n) + mu_n (x_n - x_{n-1})`.
fn diagonal_drift(rates: &TransitionRates, x: &[f64], m: usize) -> Vec<f64> {
    (0..=m)
        .map(|n| {
            let up = -rates.lam[n] * (x[n + 1] - x[n]);
            if n == 0 {
                up
            } else {
                up + rates.mu[n] * (x[n] - x[n - 1])
            }
        })
        .collect()
}

/// Builds `(X, Y)` from rates. With `n_head = None` the smallest head
/// leaving the tail condition satisfied is chosen.
pub fn build_lyapunov_certificate(
    rates: &TransitionRates,
    t: f64,
    r: f64,
    n_head: Option<usize>,
) -> Result<Certificate> {
    if !(t > 0.0 && t < 1.0) {
        return Err(bad("t", "must lie in (0, 1)"));
    }
    if !(r > 0.0 && r < 1.0 - t) {
        return Err(bad("r", "must lie in (0, 1 - t)"));
    }
    if rates.cutoff < 3 {
        return Err(Error::DimensionTooSmall { dim: rates.cutoff + 2, min: 5 });
    }
    let prof = classical_profile(rates)?;
    let m = rates.cutoff - 1;
    let ln_t = t.ln();

    let mut x = vec![0.0; m + 2];
    for n in 1..=m + 1 {
        x[n] = x[n - 1] + (-rates.mu[n].ln() - prof.ln_pi[n] + n as f64 * ln_t).exp();
    }
    let natural: Vec<f64> = (0..=m).map(|n| r * (-prof.ln_pi[n] + n as f64 * ln_t).exp()).collect();

    let threshold = t / ((1.0 - r - t) * (1.0 - r - t));
    let tail_ok = |n: usize| {
        let e2 = 4.0 * rates.eta[n].norm_sqr();
        e2 == 0.0 || rates.lam[n] * rates.mu[n + 1] / e2 > threshold
    };
    let n_head = match n_head {
        Some(h) => h.min(m),
        None => {
            let mut h = m;
            while h > 0 && tail_ok(h) {
                h -= 1;
            }
            if h > m / 2 {
                return Err(Error::NotApplicable(format!(
                    "tail condition holds only beyond index {h} of a window of {m}"
                )));
            }
            h
        }
    };

    let drift = diagonal_drift(rates, &x, m);
    let off: Vec<C64> = (0..m).map(|n| -rates.eta[n] * (x[n] - x[n + 1])).collect();
    let mut y = natural.clone();
    if n_head < m {
        let mut d_next = drift[n_head + 1] - y[n_head + 1];
        for n in (0..=n_head).rev() {
            let floor = (drift[n] - natural[n]).abs().max(f64::MIN_POSITIVE);
            let need = if d_next > 0.0 { 4.0 * off[n].norm_sqr() / d_next } else { f64::INFINITY };
            let d = HEAD_SLACK * need.max(floor);
            y[n] = drift[n] - d;
            d_next = d;
        }
    } else {
        for n in (0..=m).rev() {
            y[n] = drift[n] - HEAD_SLACK * (drift[n] - natural[n]).abs().max(f64::MIN_POSITIVE);
        }
    }
    let b = (-y.iter().copied().fold(f64::INFINITY, f64::min)).max(f64::MIN_POSITIVE);
    Ok(Certificate {
        body: CertificateBody::Lyapunov(LyapunovData { t, r, n_head, x, y, b }),
        verified: false,
        min_slack: f64::NAN,
    })
}

/// Tridiagonal slack report of a window matrix `D`, restricted to `[lo, M]`.
/// Entries beyond the first off-diagonal are required to vanish.
fn tridiagonal_check(d: &CMatrix, lo: usize, scale: &[f64]) -> (bool, f64) {
    let size = d.nrows();
    let mut far: f64 = 0.0;
    for j in 0..size {
        for i in 0..size {
            if i.abs_diff(j) > 1 {
                let s = scale[i].max(scale[j]).max(f64::MIN_POSITIVE);
                far = far.max(d[(i, j)].norm() / s);
            }
        }
    }
    let mut ok = far <= ZERO_TOL;
    let mut slack = if far > ZERO_TOL { -far } else { f64::INFINITY };
    for n in lo..size {
        let dn = d[(n, n)].re;
        let s = dn / scale[n].max(f64::MIN_POSITIVE);
        slack = slack.min(s);
        ok &= dn > 0.0;
        if n + 1 < size {
            let dd = dn * d[(n + 1, n + 1)].re;
            let o = 4.0 * d[(n, n + 1)].norm_sqr();
            let ps = if dd + o > 0.0 { (dd - o) / (dd + o) } else { -1.0 };
            slack = slack.min(ps);
            ok &= dd - o > 0.0;
        }
    }
    (ok, slack)
}

fn diag_matrix(v: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|x| C64::new(*x, 0.0))))
}

/// Checks `X - T(X) - Y >= 0` on the certificate window.
pub fn verify_lyapunov(channel: &TruncatedChannel, cert: &Certificate) -> Result<Certificate> {
    let l = cert.lyapunov().ok_or_else(|| bad("cert", "expected a Lyapunov certificate"))?;
    let m = l.y.len() - 1;
    if l.x.len() != m + 2 {
        return Err(Error::LengthMismatch { expected: m + 2, got: l.x.len() });
    }
    let x = diag_matrix(&l.x);
    let tx = heisenberg_apply_window(channel, &x, m)?;
    let mut d = -tx.clone();
    let mut scale = vec![0.0; m + 1];
    for n in 0..=m {
        d[(n, n)] += C64::new(l.x[n] - l.y[n], 0.0);
        scale[n] = l.x[n].abs() + tx[(n, n)].norm() + l.y[n].abs();
    }
    let (ok, slack) = tridiagonal_check(&d, 0, &scale);
    let mut out = cert.clone();
    out.verified = ok && slack >= 0.0;
    out.min_slack = slack;
    Ok(out)
}

/// Searches the default `(t, r)` grid `t = e^-kappa (1 + 2^-j)`,
/// `r = (1 - t) 2^-i` and returns the first certificate that verifies.
pub fn search_lyapunov_certificate(
    channel: &TruncatedChannel,
    rates: &TransitionRates,
    kappa: &KappaEstimate,
    depth: u32,
) -> Result<Certificate> {
    let k = kappa.value();
    if !(k > 0.0) {
        return Err(Error::NotApplicable(format!("kappa = {k} is not positive")));
    }
    let base = (-k).exp();
    let mut last = None;
    for j in 0..=depth {
        let t = base * (1.0 + 0.5f64.powi(j as i32));
        if !(t < 1.0) {
            continue;
        }
        for i in 1..=depth {
            let r = (1.0 - t) * 0.5f64.powi(i as i32);
            let cert = match build_lyapunov_certificate(rates, t, r, None) {
                Ok(c) => c,
                Err(e) => {
                    last = Some(e);
                    continue;
                }
            };
            let v = verify_lyapunov(channel, &cert)?;
            if v.verified {
                return Ok(v);
            }
        }
    }
    Err(last.unwrap_or_else(|| Error::NotApplicable("no (t, r) pair on the grid verifies".to_string())))
}

/// Builds `(Z, eps)` with the smallest admissible start index.
pub fn build_drift_certificate(rates: &TransitionRates) -> Result<Certificate> {
    if rates.cutoff < 3 {
        return Err(Error::DimensionTooSmall { dim: rates.cutoff + 2, min: 5 });
    }
    let m = rates.cutoff - 1;
    let gap = |n: usize| rates.lam[n] - rates.mu[n];
    let pair_ratio = |n: usize| {
        let e2 = 4.0 * rates.eta[n].norm_sqr();
        if e2 == 0.0 {
            f64::INFINITY
        } else {
            gap(n) * gap(n + 1) / e2
        }
    };
    let admissible = |start: usize| {
        (start + 1..=m + 1).all(|n| rates.lam[n] != 0.0 && gap(n) > 0.0)
            && (start + 1..=m).all(|n| pair_ratio(n) > 1.0)
    };
    let n_start = (0..=m / 2)
        .find(|&s| admissible(s))
        .ok_or_else(|| Error::NotApplicable("no tail with mu_n < lambda_n and enough drift".to_string()))?;
    let g_min = (n_start + 1..=m).map(pair_ratio).fold(f64::INFINITY, f64::min);
    // Halfway to the largest theta with (1 - theta)^2 g_min >= 1.
    let theta = (0.5 * (1.0 - g_min.sqrt().recip())).min(0.5);
    let z = (0..=m + 1).map(|n| n.saturating_sub(n_start + 1) as f64).collect();
    let eps = (0..=m).map(|n| if n > n_start { theta * gap(n) } else { 0.0 }).collect();
    Ok(Certificate {
        body: CertificateBody::Drift(DriftData { n_start, theta, z, eps }),
        verified: false,
        min_slack: f64::NAN,
    })
}

/// Checks `T(Z) - Z - eps >= 0` on the certificate window. Rows and columns
/// up to `n_start` must vanish; the rest goes through the tridiagonal test.
pub fn verify_drift(channel: &TruncatedChannel, cert: &Certificate) -> Result<Certificate> {
    let dd = cert.drift().ok_or_else(|| bad("cert", "expected a drift certificate"))?;
    let m = dd.eps.len() - 1;
    if dd.z.len() != m + 2 {
        return Err(Error::LengthMismatch { expected: m + 2, got: dd.z.len() });
    }
    let z = diag_matrix(&dd.z);
    let tz = heisenberg_apply_window(channel, &z, m)?;
    let mut d = tz.clone();
    let mut scale = vec![0.0; m + 1];
    for n in 0..=m {
        d[(n, n)] -= C64::new(dd.z[n] + dd.eps[n], 0.0);
        scale[n] = dd.z[n].abs() + tz[(n, n)].norm() + dd.eps[n].abs() + 1.0;
    }
    let head = dd.n_start.min(m);
    let mut head_defect: f64 = 0.0;
    for i in 0..=m {
        for j in 0..=head {
            head_defect = head_defect.max(d[(i, j)].norm() / scale[i].max(scale[j]));
        }
    }
    let block = d.view((head + 1, head + 1), (m - head, m - head)).into_owned();
    let (ok, mut slack) = tridiagonal_check(&block, 0, &scale[head + 1..]);
    if head_defect > ZERO_TOL {
        slack = slack.min(-head_defect);
    }
    let mut out = cert.clone();
    out.verified = ok && head_defect <= ZERO_TOL && slack >= 0.0;
    out.min_slack = slack;
    Ok(out)
}
