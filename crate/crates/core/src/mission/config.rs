use serde::{Deserialize, Serialize};

/// Mission thresholds, weights and coordination timing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    /// Fraction of reachable cells observed before specialised detection.
    pub coverage_gate: f64,
    /// Posterior above which a cell belongs to a candidate.
    pub candidate_threshold: f64,
    /// Posterior (after contact sensing) at which a candidate is confirmed.
    pub confirm_threshold: f64,
    /// Class posterior needed to classify a confirmed candidate.
    pub classify_threshold: f64,
    /// Posterior below which a scanned candidate is dismissed.
    pub dismiss_threshold: f64,
    /// Confirmation visits before a candidate is resolved regardless.
    pub max_confirm_rounds: u32,
    pub w_vision: f64,
    pub w_terrain: f64,
    pub w_posterior: f64,
    /// Side length of exploration and sweep regions, in cells.
    pub region_size: u32,
    /// Wait for each phase to finish before starting the next one's tasks.
    pub strict_phases: bool,
    /// Seconds per tick.
    pub dt: f64,
    /// Ticks before an unacknowledged reading is resent.
    pub ack_timeout: u64,
    /// Ticks an idle robot stays out of contact before heading back to the deployment zone.
    pub rejoin_after: u64,
    /// Clamp likelihoods away from 0 and 1 instead of rejecting degenerate sensors.
    pub clamp_degenerate: bool,
    /// Battery reserve (seconds) kept on top of the trip home.
    pub battery_reserve_s: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            coverage_gate: 0.9,
            candidate_threshold: 0.5,
            confirm_threshold: 0.9,
            classify_threshold: 0.9,
            dismiss_threshold: 0.2,
            max_confirm_rounds: 4,
            w_vision: 1.0,
            w_terrain: 5.0,
            w_posterior: 2.0,
            region_size: 10,
            strict_phases: false,
            dt: 1.0,
            ack_timeout: 20,
            rejoin_after: 30,
            clamp_degenerate: false,
            battery_reserve_s: 60.0,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = [
            ("coverage_gate", self.coverage_gate),
            ("candidate_threshold", self.candidate_threshold),
            ("confirm_threshold", self.confirm_threshold),
            ("classify_threshold", self.classify_threshold),
            ("dismiss_threshold", self.dismiss_threshold),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0,1]"));
            }
        }
        if self.dismiss_threshold >= self.candidate_threshold {
            return Err("dismiss_threshold must be below candidate_threshold".into());
        }
        if self.max_confirm_rounds == 0 {
            return Err("max_confirm_rounds must be >= 1".into());
        }
        if ![self.w_vision, self.w_terrain, self.w_posterior].iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err("priority weights must be finite and >= 0".into());
        }
        if self.region_size == 0 {
            return Err("region_size must be >= 1".into());
        }
        if !(self.dt > 0.0) {
            return Err("dt must be > 0".into());
        }
        if self.ack_timeout == 0 {
            return Err("ack_timeout must be >= 1".into());
        }
        if !(self.battery_reserve_s >= 0.0) {
            return Err("battery_reserve_s must be >= 0".into());
        }
        Ok(())
    }
}
