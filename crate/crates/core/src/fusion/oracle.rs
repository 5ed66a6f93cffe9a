//! Direct Bayes computation of per-cell posteriors, for checking the heatmap.

use crate::sensors::{DetectionModel, SensorReading};

/// Posterior for every cell from products of per-reading likelihoods.
///
/// `models` lists the detection model of each sensor kind in play; readings of
/// other kinds are ignored. Rates are used as given (no clamping).
pub fn posterior_brute_force_oracle(readings: &[SensorReading], priors: &[f64], models: &[DetectionModel]) -> Vec<f64> {
    let mut p_threat: Vec<f64> = priors.to_vec();
    let mut p_clear: Vec<f64> = priors.iter().map(|p| 1.0 - p).collect();
    for r in readings {
        let Some(m) = models.iter().find(|m| m.kind == r.kind) else {
            continue;
        };
        for (&cell, &hit) in r.cells.iter().zip(&r.detections) {
            if hit {
                p_threat[cell] *= m.p_det_eff;
                p_clear[cell] *= m.p_fp;
            } else {
                p_threat[cell] *= 1.0 - m.p_det_eff;
                p_clear[cell] *= 1.0 - m.p_fp;
            }
        }
    }
    p_threat.iter().zip(&p_clear).map(|(a, b)| a / (a + b)).collect()
}
