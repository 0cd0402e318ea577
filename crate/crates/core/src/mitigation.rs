//! Forgetting mitigation by interpolating toward the pretrained checkpoint.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};
use crate::model::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationKind {
    None,
    /// Average only the served/evaluated checkpoint.
    StaticAvg,
    /// Average and continue training from the average.
    DynamicAvg,
    /// Server-side updates mixed into aggregation; configured on the round.
    CentralizedMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationPolicy {
    pub kind: MitigationKind,
    /// Weight on the initial checkpoint.
    pub alpha: f64,
}

impl Default for MitigationPolicy {
    fn default() -> Self {
        Self {
            kind: MitigationKind::None,
            alpha: 0.5,
        }
    }
}

impl MitigationPolicy {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(kind: MitigationKind, alpha: f64) -> Result<Self> {
        let p = Self { kind, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid_config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Applies the post-aggregation hook to `theta_t`.
    pub fn apply(
        &self,
        theta_0: &ParameterVector,
        theta_t: ParameterVector,
    ) -> Result<Checkpoints> {
        match self.kind {
            MitigationKind::None | MitigationKind::CentralizedMix => Ok(Checkpoints {
                evaluate: theta_t.clone(),
                train_next_from: theta_t,
            }),
            MitigationKind::StaticAvg => apply_static(theta_0, theta_t, self.alpha),
            MitigationKind::DynamicAvg => apply_dynamic(theta_0, theta_t, self.alpha),
        }
    }
}

/// Which checkpoint continues training and which one is served/evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoints {
    pub train_next_from: ParameterVector,
    pub evaluate: ParameterVector,
}

/// `alpha * theta_0 + (1 - alpha) * theta_t`; the endpoints are returned
/// verbatim for `alpha` of exactly 0 or 1.
pub fn average_checkpoints(
    theta_0: &ParameterVector,
    theta_t: &ParameterVector,
    alpha: f64,
) -> Result<ParameterVector> {
    if !theta_0.same_shape(theta_t) || theta_0.len() != theta_t.len() {
        return Err(invalid_input("checkpoint shapes differ"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid_input(format!("alpha {alpha} outside [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(theta_t.clone());
    }
    if alpha == 1.0 {
        return Ok(theta_0.clone());
    }
    let mut out = theta_t.clone();
    for (o, (a, b)) in out
        .values_mut()
        .iter_mut()
        .zip(theta_0.values().iter().zip(theta_t.values()))
    {
        *o = alpha * a + (1.0 - alpha) * b;
    }
    Ok(out)
}

pub fn apply_static(
    theta_0: &ParameterVector,
    theta_t: ParameterVector,
    alpha: f64,
) -> Result<Checkpoints> {
    let evaluate = average_checkpoints(theta_0, &theta_t, alpha)?;
    Ok(Checkpoints {
        train_next_from: theta_t,
        evaluate,
    })
}

pub fn apply_dynamic(
    theta_0: &ParameterVector,
    theta_t: ParameterVector,
    alpha: f64,
) -> Result<Checkpoints> {
    let averaged = average_checkpoints(theta_0, &theta_t, alpha)?;
    Ok(Checkpoints {
        train_next_from: averaged.clone(),
        evaluate: averaged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParameterVector {
        // V=1, F=1: one weight and one bias
        ParameterVector::from_values(1, 1, v.to_vec()).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[3.0, 4.0]);
        assert_eq!(average_checkpoints(&a, &b, 0.0).unwrap(), b);
        assert_eq!(average_checkpoints(&a, &b, 1.0).unwrap(), a);
        assert_eq!(
            average_checkpoints(&a, &b, 0.5).unwrap().values(),
            &[2.0, 3.0]
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = pv(&[1.0, 2.0]);
        let c = ParameterVector::zeros(2, 1);
        assert!(average_checkpoints(&a, &c, 0.5).is_err());
        assert!(average_checkpoints(&a, &a, 1.5).is_err());
        assert!(MitigationPolicy::new(MitigationKind::StaticAvg, -0.1).is_err());
    }

    #[test]
    fn static_keeps_training_trajectory() {
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[3.0, 4.0]);
        let c = apply_static(&a, b.clone(), 0.25).unwrap();
        assert_eq!(c.train_next_from, b);
        assert_ne!(c.evaluate, b);
        let c = apply_static(&a, b.clone(), 0.0).unwrap();
        assert_eq!(c.evaluate, c.train_next_from);
    }

    #[test]
    fn dynamic_feeds_average_back() {
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[3.0, 4.0]);
        let c = apply_dynamic(&a, b.clone(), 0.5).unwrap();
        assert_eq!(c.train_next_from, c.evaluate);
        assert_eq!(c.evaluate.values(), &[2.0, 3.0]);
        assert_eq!(
            apply_dynamic(&a, b.clone(), 0.0).unwrap().train_next_from,
            b
        );
        assert_eq!(apply_dynamic(&a, b, 1.0).unwrap().train_next_from, a);
    }
}
