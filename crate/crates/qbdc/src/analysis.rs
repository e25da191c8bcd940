//! Model-level evaluation shared by the commands.

use qbdc_core::criteria::{classify_maser_point_with, classify_rates, estimate_kappa, maser_kappa, KappaEstimate};
use qbdc_core::{
    averaged_rates, build_averaged_channel, build_maser_channel, extract_transition_rates, QuadratureRule,
    RegionVerdict, TransitionRates, TruncatedChannel, Verdict,
};

use crate::config::Model;
use crate::error::AppError;

pub fn channel(model: &Model, dim: usize) -> Result<(TruncatedChannel, Option<QuadratureRule>), AppError> {
    match model {
        Model::Maser(p) => Ok((build_maser_channel(p, dim)?, None)),
        Model::RandomTime { lambda, zeta, g, density, .. } => {
            let rule = model.rule(dim).expect("random model has a rule")?;
            let ch = build_averaged_channel(*g, *lambda, *zeta, density, &rule, dim)?;
            Ok((ch, Some(rule)))
        }
    }
}

/// Rates on `[0, dim - 2]`: read off the channel for fixed-coupling models,
/// integrated directly for random interaction times.
pub fn rates(model: &Model, dim: usize) -> Result<(TransitionRates, Option<QuadratureRule>), AppError> {
    match model {
        Model::Maser(p) => Ok((extract_transition_rates(&build_maser_channel(p, dim)?)?, None)),
        Model::RandomTime { lambda, zeta, g, density, .. } => {
            let rule = model.rule(dim).expect("random model has a rule")?;
            let r = averaged_rates(*g, *lambda, *zeta, density, &rule, dim - 2)?;
            Ok((r, Some(rule)))
        }
    }
}

/// Window estimate of kappa with the maser closed form attached.
pub fn kappa(model: &Model, rates: &TransitionRates, tail_fraction: f64) -> Result<KappaEstimate, AppError> {
    let k = estimate_kappa(rates, tail_fraction)?;
    Ok(match maser_kappa(model.lambda()) {
        Some(a) => k.with_analytic(a),
        None => k,
    })
}

/// Closed-form criteria for fixed couplings; the general rate criteria on
/// averaged rates for random interaction times.
pub fn classify(model: &Model, dim: usize, tail_fraction: f64) -> Result<RegionVerdict, AppError> {
    match model {
        Model::Maser(p) => Ok(classify_maser_point_with(p, tail_fraction)),
        Model::RandomTime { lambda, .. } => {
            if *lambda == 0.0 || *lambda == 1.0 {
                // Degenerate endpoints: the chain only moves one way.
                let p = qbdc_core::MaserParams::baby(*lambda, model.zeta())?;
                return Ok(classify_maser_point_with(&p, tail_fraction));
            }
            let (r, _) = rates(model, dim)?;
            let k = kappa(model, &r, tail_fraction)?;
            Ok(classify_rates(&r, &k, tail_fraction))
        }
    }
}

/// Classification that never fails: errors become `Unknown` with the error
/// text as diagnostic.
pub fn classify_lenient(model: &Model, dim: usize, tail_fraction: f64) -> RegionVerdict {
    classify(model, dim, tail_fraction).unwrap_or_else(|e| RegionVerdict {
        verdict: Verdict::Unknown,
        criterion: None,
        margin: f64::NAN,
        conflict: false,
        tail_window: None,
        diagnostic: Some(e.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;

    fn random(lambda: f64) -> Model {
        let c = ModelConfig::from_json(
            r#"{"lambda": 0.3, "zeta": [0.8, 0], "dim": 120,
                "coupling": {"kind": "jc_random", "g": 1, "density": {"kind": "exponential", "rate": 1}}}"#,
        )
        .unwrap();
        c.model_at(lambda, c.zeta()).unwrap()
    }

    #[test]
    fn random_time_splits_at_one_half() {
        assert_eq!(classify(&random(0.3), 120, 0.25).unwrap().verdict, Verdict::Exists);
        assert_eq!(classify(&random(0.7), 120, 0.25).unwrap().verdict, Verdict::NotExists);
        assert_eq!(classify(&random(0.0), 120, 0.25).unwrap().verdict, Verdict::Exists);
    }
}
