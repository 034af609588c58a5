//! Epoch-indexed coefficient plans for the orthogonality penalty (λ) and the
//! ℓ₂ weight decay (λ₂).
//!
//! Both are piecewise constant. A breakpoint `(E, v)` means the value is `v`
//! from 0-indexed epoch `E` onward, until the next breakpoint.
//!
//! Defaults: λ starts at 0.1 and steps down to 1e-3, 1e-4, 1e-6 at epochs
//! 20, 50, 70, reaching 0 at epoch 120. λ₂ starts at 1e-8; `So` raises it to
//! 1e-4 and `Dso` to 5e-4 at epoch 20, every other kind keeps 1e-8.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regularizers::RegKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("{plan}: breakpoint epochs must be strictly increasing ({prev} then {next})")]
    EpochOrder { plan: String, prev: usize, next: usize },
    #[error("{plan}: value {value} at epoch {epoch} must be finite and non-negative")]
    BadValue { plan: String, epoch: usize, value: f64 },
    #[error("lambda plan must be non-increasing: {value} at epoch {epoch} exceeds {prev}")]
    LambdaIncreases { epoch: usize, value: f64, prev: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, f64)", into = "(usize, f64)")]
pub struct Breakpoint {
    pub epoch: usize,
    pub value: f64,
}

impl From<(usize, f64)> for Breakpoint {
    fn from((epoch, value): (usize, f64)) -> Self {
        Self { epoch, value }
    }
}

impl From<Breakpoint> for (usize, f64) {
    fn from(b: Breakpoint) -> Self {
        (b.epoch, b.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub lambda_init: f64,
    pub lambda_breakpoints: Vec<Breakpoint>,
    pub wd_init: f64,
    /// Kinds missing from the map keep `wd_init` throughout.
    pub wd_breakpoints: BTreeMap<RegKind, Vec<Breakpoint>>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let bp = |epoch, value| Breakpoint { epoch, value };
        let mut wd_breakpoints = BTreeMap::new();
        wd_breakpoints.insert(RegKind::So, vec![bp(20, 1e-4)]);
        wd_breakpoints.insert(RegKind::Dso, vec![bp(20, 5e-4)]);
        Self {
            lambda_init: 0.1,
            lambda_breakpoints: vec![bp(20, 1e-3), bp(50, 1e-4), bp(70, 1e-6), bp(120, 0.0)],
            wd_init: 1e-8,
            wd_breakpoints,
        }
    }
}

/// Value of a piecewise-constant plan at `epoch`.
pub fn piecewise(init: f64, plan: &[Breakpoint], epoch: usize) -> f64 {
    plan.iter()
        .take_while(|b| b.epoch <= epoch)
        .last()
        .map_or(init, |b| b.value)
}

fn validate_plan(name: &str, init: f64, plan: &[Breakpoint]) -> Result<(), ScheduleError> {
    let bad = |epoch, value| ScheduleError::BadValue {
        plan: name.to_string(),
        epoch,
        value,
    };
    if !(init.is_finite() && init >= 0.0) {
        return Err(bad(0, init));
    }
    for (k, b) in plan.iter().enumerate() {
        if !(b.value.is_finite() && b.value >= 0.0) {
            return Err(bad(b.epoch, b.value));
        }
        if k > 0 && plan[k - 1].epoch >= b.epoch {
            return Err(ScheduleError::EpochOrder {
                plan: name.to_string(),
                prev: plan[k - 1].epoch,
                next: b.epoch,
            });
        }
    }
    Ok(())
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        validate_plan("lambda", self.lambda_init, &self.lambda_breakpoints)?;
        let mut prev = self.lambda_init;
        for b in &self.lambda_breakpoints {
            if b.value > prev {
                return Err(ScheduleError::LambdaIncreases {
                    epoch: b.epoch,
                    value: b.value,
                    prev,
                });
            }
            prev = b.value;
        }
        for (kind, plan) in &self.wd_breakpoints {
            validate_plan(&format!("weight decay ({kind})"), self.wd_init, plan)?;
        }
        Ok(())
    }

    /// Regularization coefficient λ in effect during `epoch`.
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        piecewise(self.lambda_init, &self.lambda_breakpoints, epoch)
    }

    /// Weight-decay coefficient λ₂ in effect during `epoch` for `kind`.
    pub fn weight_decay_at(&self, kind: RegKind, epoch: usize) -> f64 {
        match self.wd_breakpoints.get(&kind) {
            Some(plan) => piecewise(self.wd_init, plan, epoch),
            None => self.wd_init,
        }
    }

    /// CSV `epoch,lambda,weight_decay` with one row per epoch in `0..epochs`.
    pub fn dump_csv(&self, kind: RegKind, epochs: usize) -> String {
        let mut out = String::from("epoch,lambda,weight_decay\n");
        for e in 0..epochs {
            writeln!(out, "{},{},{}", e, self.lambda_at(e), self.weight_decay_at(kind, e)).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_lambda_plan() {
        let cfg = ScheduleConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.lambda_at(0), 0.1);
        assert_eq!(cfg.lambda_at(19), 0.1);
        assert_eq!(cfg.lambda_at(20), 1e-3);
        assert_eq!(cfg.lambda_at(69), 1e-4);
        assert_eq!(cfg.lambda_at(70), 1e-6);
        assert_eq!(cfg.lambda_at(125), 0.0);
    }

    #[test]
    fn default_weight_decay_plan() {
        let cfg = ScheduleConfig::default();
        assert_eq!(cfg.weight_decay_at(RegKind::Srip, 100), 1e-8);
        assert_eq!(cfg.weight_decay_at(RegKind::So, 25), 1e-4);
        assert_eq!(cfg.weight_decay_at(RegKind::So, 19), 1e-8);
        assert_eq!(cfg.weight_decay_at(RegKind::Dso, 0), 1e-8);
        assert_eq!(cfg.weight_decay_at(RegKind::Dso, 20), 5e-4);
        assert_eq!(cfg.weight_decay_at(RegKind::Mc, 150), 1e-8);
        assert_eq!(cfg.weight_decay_at(RegKind::None, 150), 1e-8);
    }

    #[test]
    fn validation_catches_bad_plans() {
        let mut cfg = ScheduleConfig::default();
        cfg.lambda_breakpoints.swap(0, 1);
        assert!(matches!(cfg.validate(), Err(ScheduleError::EpochOrder { .. })));

        let mut cfg = ScheduleConfig::default();
        cfg.lambda_breakpoints[2].value = 0.5;
        assert!(matches!(cfg.validate(), Err(ScheduleError::LambdaIncreases { .. })));

        let cfg = ScheduleConfig {
            wd_init: -1.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(ScheduleError::BadValue { .. })));
    }

    #[test]
    fn dump_rows() {
        let csv = ScheduleConfig::default().dump_csv(RegKind::So, 3);
        assert_eq!(
            csv,
            "epoch,lambda,weight_decay\n0,0.1,0.00000001\n1,0.1,0.00000001\n2,0.1,0.00000001\n"
        );
    }

    proptest! {
        #[test]
        fn default_lambda_non_increasing(e in 0usize..400) {
            let cfg = ScheduleConfig::default();
            prop_assert!(cfg.lambda_at(e + 1) <= cfg.lambda_at(e));
            if e >= 120 {
                prop_assert_eq!(cfg.lambda_at(e), 0.0);
            }
        }

        #[test]
        fn lookup_is_piecewise_constant(a in 0usize..200, b in 0usize..200) {
            let cfg = ScheduleConfig::default();
            let (lo, hi) = (a.min(b), a.max(b));
            let crosses = cfg.lambda_breakpoints.iter().any(|bp| bp.epoch > lo && bp.epoch <= hi);
            if !crosses {
                prop_assert_eq!(cfg.lambda_at(a), cfg.lambda_at(b));
            }
        }
    }
}
