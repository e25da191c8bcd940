//! Parameter-space sweeps over `(lambda, zeta)`.

use rayon::prelude::*;

use qbdc_core::C64;

use crate::analysis::classify_lenient;
use crate::config::{ModelConfig, SweepConfig};
use crate::error::AppError;
use crate::export::VerdictRecord;

/// Grid points `(lambda, |zeta|, arg zeta)`; a zero radius is taken once.
pub fn grid(spec: &SweepConfig) -> Result<Vec<(f64, f64, f64)>, AppError> {
    let lambdas = spec.lambda.values();
    let radii = spec.radius.values();
    let angles = spec.angle.as_ref().map(|g| g.values()).unwrap_or_else(|| vec![0.0]);
    if lambdas.is_empty() || radii.is_empty() || angles.is_empty() {
        return Err(AppError::Config("sweep: grid is empty".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(AppError::Config(format!("sweep.lambda: {l} is outside [0, 1]")));
    }
    if let Some(r) = radii.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(AppError::Config(format!("sweep.radius: {r} is outside [0, 1]")));
    }
    let mut out = Vec::new();
    for &l in &lambdas {
        for &r in &radii {
            if r == 0.0 {
                out.push((l, 0.0, 0.0));
                continue;
            }
            for &a in &angles {
                out.push((l, r, a));
            }
        }
    }
    Ok(out)
}

/// Classifies every grid point; rows sorted by `(lambda, arg zeta, |zeta|)`.
pub fn run(config: &ModelConfig, dim: usize, tail_fraction: f64) -> Result<Vec<VerdictRecord>, AppError> {
    let spec = config.sweep.as_ref().ok_or_else(|| AppError::Config("sweep: missing".into()))?;
    let points = grid(spec)?;
    let mut rows: Vec<(f64, f64, f64, VerdictRecord)> = points
        .par_iter()
        .map(|&(l, r, a)| {
            let zeta = C64::from_polar(r, a);
            let record = match config.model_at(l, zeta) {
                Ok(m) => VerdictRecord::new(&m, &classify_lenient(&m, dim, tail_fraction)),
                Err(e) => VerdictRecord {
                    lambda: l,
                    zeta_re: zeta.re,
                    zeta_im: zeta.im,
                    model: String::new(),
                    verdict: "unknown".into(),
                    criterion: None,
                    margin: None,
                    conflict: false,
                    diagnostic: Some(e.to_string()),
                },
            };
            (l, a, r, record)
        })
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
    Ok(rows.into_iter().map(|r| r.3).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice() -> ModelConfig {
        ModelConfig::from_json(
            r#"{"lambda": 0.3, "zeta": [1, 0], "dim": 40,
                "coupling": {"kind": "toy", "alpha": 0.6, "beta": 0.8},
                "sweep": {"lambda": {"start": 0, "stop": 1, "count": 11}, "radius": [0, 0.5, 1], "angle": [0, 1]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn grid_and_order() {
        let c = slice();
        assert_eq!(grid(c.sweep.as_ref().unwrap()).unwrap().len(), 11 * 5);
        let rows = run(&c, 40, 0.25).unwrap();
        assert_eq!(rows.len(), 55);
        assert!(rows.windows(2).all(|w| w[0].lambda <= w[1].lambda));
        let again = run(&c, 40, 0.25).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn thermal_column_exists_below_one_half() {
        let c = slice();
        for r in run(&c, 40, 0.25).unwrap() {
            if r.zeta_re == 0.0 && r.zeta_im == 0.0 && r.lambda < 0.5 {
                assert_eq!(r.verdict, "exists", "{r:?}");
            }
        }
    }
}
