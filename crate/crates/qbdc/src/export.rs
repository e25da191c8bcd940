//! CSV and JSON writers.
//!
//! CSV floats carry 17 significant digits; JSON uses the shortest string
//! that parses back to the same double, and non-finite values become null.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use qbdc_core::invariant::{ConvergenceTrace, FalloffFit, FittedRate};
use qbdc_core::toy_observable::ToyObservable;
use qbdc_core::{Certificate, CertificateBody, DensityMatrix, QuadratureRule, RegionVerdict, TransitionRates, C64};

use crate::config::Model;
use crate::error::AppError;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// `Some(v)` for finite values, serialized as null otherwise.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn quadrature_report(rule: &QuadratureRule) -> String {
    format!(
        "# quadrature: nodes={} panels={} order={} design_frequency={} est_error={} raw_mass={}",
        rule.nodes.len(),
        rule.panels,
        rule.order,
        fmt(rule.design_frequency),
        fmt(rule.est_error),
        fmt(rule.raw_mass)
    )
}

pub fn write_rates_csv<W: Write>(mut out: W, rates: &TransitionRates, rule: Option<&QuadratureRule>) -> Result<(), AppError> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["n", "sigma", "mu", "lambda", "eta_re", "eta_im"])?;
        for n in 0..=rates.cutoff {
            w.write_record([
                n.to_string(),
                fmt(rates.sigma[n]),
                fmt(rates.mu[n]),
                fmt(rates.lam[n]),
                fmt(rates.eta[n].re),
                fmt(rates.eta[n].im),
            ])?;
        }
        w.flush()?;
    }
    if let Some(r) = rule {
        writeln!(out, "{}", quadrature_report(r))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRecord {
    pub lambda: f64,
    pub zeta_re: f64,
    pub zeta_im: f64,
    pub model: String,
    pub verdict: String,
    pub criterion: Option<String>,
    pub margin: Option<f64>,
    pub conflict: bool,
    pub diagnostic: Option<String>,
}

impl VerdictRecord {
    pub fn new(model: &Model, v: &RegionVerdict) -> Self {
        let zeta = model.zeta();
        Self {
            lambda: model.lambda(),
            zeta_re: zeta.re,
            zeta_im: zeta.im,
            model: model.kind().to_string(),
            verdict: v.verdict.tag().to_string(),
            criterion: v.criterion_tag().map(str::to_string),
            margin: finite(v.margin),
            conflict: v.conflict,
            diagnostic: v.diagnostic.clone(),
        }
    }

    pub fn zeta(&self) -> C64 {
        C64::new(self.zeta_re, self.zeta_im)
    }
}

pub fn write_verdicts_csv<W: Write>(out: W, records: &[VerdictRecord]) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "zeta_re", "zeta_im", "model", "verdict", "criterion", "margin", "conflict"])?;
    for r in records {
        w.write_record([
            fmt(r.lambda),
            fmt(r.zeta_re),
            fmt(r.zeta_im),
            r.model.clone(),
            r.verdict.clone(),
            r.criterion.clone().unwrap_or_default(),
            r.margin.map(fmt).unwrap_or_default(),
            r.conflict.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn falloff_json(f: &FalloffFit) -> Value {
    json!({
        "c": finite(f.c),
        "gamma": finite(f.gamma),
        "window": [f.window.0, f.window.1],
        "max_violation": finite(f.max_violation),
        "rms": finite(f.rms),
        "shrunk": f.shrunk,
        "degenerate": f.degenerate,
    })
}

/// `{dim, trace_deficit, entries}` with entries row-major as `[re, im]`.
pub fn state_json(rho: &DensityMatrix) -> Value {
    let d = rho.dim();
    let entries: Vec<[f64; 2]> =
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| [rho.entries[(i, j)].re, rho.entries[(i, j)].im]).collect();
    json!({ "dim": d, "trace_deficit": finite(rho.trace_deficit), "entries": entries })
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &ConvergenceTrace) -> Result<(), AppError> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["n", "distance"])?;
        for (n, d) in trace.distances.iter().enumerate() {
            w.write_record([n.to_string(), fmt(*d)])?;
        }
        w.flush()?;
    }
    match trace.fitted_rate {
        Some(FittedRate::PowerLaw { exponent, prefactor, rms }) => {
            writeln!(out, "# fit: power_law exponent={} prefactor={} rms={}", fmt(exponent), fmt(prefactor), fmt(rms))?
        }
        Some(FittedRate::Geometric { ratio, prefactor, rms }) => {
            writeln!(out, "# fit: geometric ratio={} prefactor={} rms={}", fmt(ratio), fmt(prefactor), fmt(rms))?
        }
        None => writeln!(out, "# fit: none")?,
    }
    if let Some(g) = trace.gamma_bound {
        writeln!(out, "# gamma_bound={}", fmt(g))?;
    }
    Ok(())
}

pub fn certificate_json(model: &Model, dim: usize, cert: &Certificate) -> Value {
    let body = match &cert.body {
        CertificateBody::Lyapunov(l) => json!({
            "t": l.t, "r": l.r, "n_head": l.n_head, "b": finite(l.b), "x": l.x, "y": l.y,
        }),
        CertificateBody::Drift(d) => json!({
            "n_start": d.n_start, "theta": d.theta, "z": d.z, "eps": d.eps,
        }),
    };
    json!({
        "mode": cert.kind(),
        "model": model.kind(),
        "lambda": model.lambda(),
        "zeta": [model.zeta().re, model.zeta().im],
        "dim": dim,
        "window": cert.window(),
        "verified": cert.verified,
        "min_slack": finite(cert.min_slack),
        "certificate": body,
    })
}

pub fn toy_observable_json(model: &Model, c: f64, obs: &ToyObservable) -> Value {
    json!({
        "mode": "toy-observable",
        "model": model.kind(),
        "lambda": model.lambda(),
        "zeta": [model.zeta().re, model.zeta().im],
        "c": c,
        "window": obs.window,
        "residual": finite(obs.residual),
        "root_moduli": obs.root_moduli,
        "max_abs_x": obs.max_abs_x,
        "max_abs_y": obs.max_abs_y,
        "x_bounded": obs.x_bounded,
        "x": pairs(&obs.x),
        "y": pairs(&obs.y),
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rates_round_trip() {
        let r = TransitionRates::constant(0.3, 0.7, C64::new(0.0, 0.1), 3);
        let mut buf = Vec::new();
        write_rates_csv(&mut buf, &r, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,sigma,mu,lambda,eta_re,eta_im"));
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.7);
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.3);
        assert_eq!(fmt(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn non_finite_is_null() {
        let rho = DensityMatrix::vacuum(2);
        let mut v = state_json(&rho);
        assert_eq!(v["entries"].as_array().unwrap().len(), 4);
        v["x"] = json!(finite(f64::NAN));
        assert!(v["x"].is_null());
    }
}
