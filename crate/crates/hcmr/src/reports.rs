//! Plain-text outputs: training history, intervention curves, traces.

use std::fmt::Write as _;

use hcmr_core::intervention_eval::InterventionCurve;
use hcmr_core::training::TrainHistory;
use hcmr_core::PredictionTrace;

use crate::error::Result;

/// `epoch,loss,val_accuracy`; epochs without validation leave the last cell empty.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut s = String::from("epoch,loss,val_accuracy\n");
    for r in &history.records {
        let acc = r.val_accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
        writeln!(s, "{},{:.6},{acc}", r.epoch, r.loss).unwrap();
    }
    s
}

/// `policy,budget,accuracy,delta`, one row per budget.
pub fn curve_csv(curves: &[InterventionCurve]) -> String {
    let mut s = String::from("policy,budget,accuracy,delta\n");
    for c in curves {
        for p in &c.points {
            writeln!(s, "{},{},{:.6},{:.6}", c.policy.kind.name(), p.budget, p.accuracy, p.delta).unwrap();
        }
    }
    s
}

pub fn trace_json(trace: &PredictionTrace) -> Result<String> {
    Ok(serde_json::to_string_pretty(trace)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hcmr_core::intervention_eval::{CurvePoint, InterventionPolicy, PolicyKind};
    use hcmr_core::training::EpochRecord;

    #[test]
    fn history_rows_leave_missing_validation_empty() {
        let h = TrainHistory {
            records: vec![
                EpochRecord { epoch: 0, loss: 1.5, val_accuracy: None },
                EpochRecord { epoch: 1, loss: 1.25, val_accuracy: Some(0.75) },
            ],
            ..TrainHistory::default()
        };
        assert_eq!(history_csv(&h), "epoch,loss,val_accuracy\n0,1.500000,\n1,1.250000,0.750000\n");
    }

    #[test]
    fn curve_rows_name_the_policy() {
        let c = InterventionCurve {
            policy: InterventionPolicy::new(PolicyKind::Random),
            points: vec![CurvePoint { budget: 2, accuracy: 0.5, delta: 0.125 }],
        };
        assert_eq!(curve_csv(&[c]), "policy,budget,accuracy,delta\nrandom,2,0.500000,0.125000\n");
    }
}
