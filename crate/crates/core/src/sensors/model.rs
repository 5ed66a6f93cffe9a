use serde::{Deserialize, Serialize};

use super::{SensorError, SensorKind};
use crate::world::{Threat, ThreatClass, ThreatProfiles};

/// Depth below which a partly covered object still gives cameras a weak cue.
pub const SURFACE_CUE_DEPTH: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub kind: SensorKind,
    /// Radius of the scanned disk in cells; 0 covers only the cell under the sensor.
    pub footprint_radius: f64,
    /// Detection cutoff in meters.
    pub max_depth: f64,
    pub p_det_base: f64,
    /// Per-meter multiplier in [0,1].
    pub depth_decay: f64,
    /// False-positive rate per cell scan.
    pub p_fp: f64,
    /// Standard deviation of emitted feature evidence.
    pub feature_noise: f64,
    /// Camera gain for objects buried less than 10 cm.
    #[serde(default = "default_surface_cue")]
    pub surface_cue: f64,
}

fn default_surface_cue() -> f64 {
    0.15
}

impl SensorModel {
    pub fn new(kind: SensorKind, footprint_radius: f64, max_depth: f64, p_det_base: f64, depth_decay: f64, p_fp: f64, feature_noise: f64) -> Self {
        SensorModel { kind, footprint_radius, max_depth, p_det_base, depth_decay, p_fp, feature_noise, surface_cue: default_surface_cue() }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |reason: &str| Err(SensorError::InvalidModel { kind: self.kind, reason: reason.into() });
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.kind.is_detector() {
            return bad("navigation sensors have no detection model");
        }
        if !(self.footprint_radius >= 0.0) || !(self.max_depth >= 0.0) || !(self.feature_noise >= 0.0) {
            return bad("footprint_radius, max_depth and feature_noise must be >= 0");
        }
        if !unit(self.p_det_base) || !unit(self.depth_decay) || !unit(self.p_fp) || !unit(self.surface_cue) {
            return bad("probabilities and depth_decay must lie in [0,1]");
        }
        if self.p_fp >= self.p_det_base {
            return bad("p_fp must be below p_det_base");
        }
        Ok(())
    }

    /// Sensor-to-threat coupling before depth attenuation.
    pub fn channel_gain(&self, depth: f64, metal_fraction: f64) -> f64 {
        match self.kind {
            SensorKind::Emi => metal_fraction,
            SensorKind::Gpr | SensorKind::Xrb | SensorKind::Raman => 1.0,
            SensorKind::Rgb | SensorKind::Ir | SensorKind::Hyperspectral => {
                if depth == 0.0 {
                    1.0
                } else if depth <= SURFACE_CUE_DEPTH {
                    self.surface_cue
                } else {
                    0.0
                }
            }
            SensorKind::LidarNav => 0.0,
        }
    }

    pub fn p_det_at(&self, depth: f64, metal_fraction: f64) -> f64 {
        if depth > self.max_depth {
            return 0.0;
        }
        (self.p_det_base * self.depth_decay.powf(depth) * self.channel_gain(depth, metal_fraction)).clamp(0.0, 1.0)
    }

    /// Probability that one scan of the threat's cell fires.
    pub fn p_det(&self, threat: &Threat) -> f64 {
        self.p_det_at(threat.depth, threat.metal_fraction)
    }

    /// Detection probability averaged over the configured device prior.
    ///
    /// Depth and metal are integrated with a fixed midpoint rule so the value is
    /// a deterministic function of the profiles.
    pub fn p_det_marginal(&self, profiles: &ThreatProfiles) -> f64 {
        const DEPTH_STEPS: usize = 400;
        let prior = profiles.class_prior();
        let mut total = 0.0;
        for class in ThreatClass::ALL {
            let w = prior[class.index()];
            if w == 0.0 {
                continue;
            }
            let p = profiles.get(class);
            let metal = clamped_normal_mean(p.metal_mean, p.metal_sd);
            let surface = self.p_det_at(0.0, metal);
            let buried = if p.max_depth > 0.0 {
                let h = p.max_depth / DEPTH_STEPS as f64;
                (0..DEPTH_STEPS).map(|k| self.p_det_at((k as f64 + 0.5) * h, metal)).sum::<f64>() / DEPTH_STEPS as f64
            } else {
                surface
            };
            total += w * (p.surface_prob * surface + (1.0 - p.surface_prob) * buried);
        }
        total.clamp(0.0, 1.0)
    }

    /// Nominal detection model used by fusion.
    pub fn detection_model(&self, profiles: &ThreatProfiles) -> DetectionModel {
        DetectionModel { kind: self.kind, p_det_eff: self.p_det_marginal(profiles), p_fp: self.p_fp }
    }
}

/// E[clamp(X, 0, 1)] for X ~ N(mean, sd).
fn clamped_normal_mean(mean: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return mean.clamp(0.0, 1.0);
    }
    const STEPS: usize = 2000;
    let (lo, hi) = (mean - 8.0 * sd, mean + 8.0 * sd);
    let h = (hi - lo) / STEPS as f64;
    let (mut acc, mut mass) = (0.0, 0.0);
    for k in 0..STEPS {
        let x = lo + (k as f64 + 0.5) * h;
        let z = (x - mean) / sd;
        let w = (-0.5 * z * z).exp();
        acc += w * x.clamp(0.0, 1.0);
        mass += w;
    }
    acc / mass
}

/// The two numbers fusion needs from a sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub kind: SensorKind,
    pub p_det_eff: f64,
    pub p_fp: f64,
}

impl DetectionModel {
    /// Log-likelihood ratio of a detection (or its absence) for threat vs. clutter.
    pub fn likelihood_ratio(&self, detected: bool) -> Result<f64, SensorError> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        if !open(self.p_fp) || !open(self.p_det_eff) {
            if self.p_det_eff == self.p_fp {
                return Ok(0.0);
            }
            return Err(SensorError::DegenerateModel { kind: self.kind, p_det: self.p_det_eff, p_fp: self.p_fp });
        }
        Ok(lr(self.p_det_eff, self.p_fp, detected))
    }

    /// Same as [`likelihood_ratio`](Self::likelihood_ratio) with both rates clamped to `[eps, 1-eps]`.
    pub fn likelihood_ratio_clamped(&self, detected: bool, eps: f64) -> f64 {
        let c = |p: f64| p.clamp(eps, 1.0 - eps);
        let (pd, pf) = (c(self.p_det_eff), c(self.p_fp));
        if pd == pf {
            return 0.0;
        }
        lr(pd, pf, detected)
    }
}

fn lr(p_det: f64, p_fp: f64, detected: bool) -> f64 {
    if detected {
        (p_det / p_fp).ln()
    } else {
        ((1.0 - p_det) / (1.0 - p_fp)).ln()
    }
}

/// Sensor parameter table, one entry per detector kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorTable {
    pub rgb: SensorModel,
    pub ir: SensorModel,
    pub hyperspectral: SensorModel,
    pub gpr: SensorModel,
    pub emi: SensorModel,
    pub xrb: SensorModel,
    pub raman: SensorModel,
}

impl Default for SensorTable {
    fn default() -> Self {
        use SensorKind::*;
        SensorTable {
            rgb: SensorModel::new(Rgb, 2.0, 0.1, 0.7, 1.0, 0.01, 0.1),
            ir: SensorModel::new(Ir, 1.0, 0.1, 0.6, 1.0, 0.02, 0.1),
            hyperspectral: SensorModel::new(Hyperspectral, 1.0, 0.1, 0.65, 1.0, 0.015, 0.1),
            gpr: SensorModel::new(Gpr, 1.0, 1.5, 0.85, 0.7, 0.03, 0.1),
            emi: SensorModel::new(Emi, 1.0, 0.5, 0.9, 0.6, 0.05, 0.08),
            xrb: SensorModel::new(Xrb, 0.0, 0.5, 0.95, 0.6, 0.02, 0.05),
            raman: SensorModel::new(Raman, 0.0, 0.3, 0.9, 1.0, 0.01, 0.05),
        }
    }
}

impl SensorTable {
    pub fn get(&self, kind: SensorKind) -> Option<&SensorModel> {
        Some(match kind {
            SensorKind::Rgb => &self.rgb,
            SensorKind::Ir => &self.ir,
            SensorKind::Hyperspectral => &self.hyperspectral,
            SensorKind::Gpr => &self.gpr,
            SensorKind::Emi => &self.emi,
            SensorKind::Xrb => &self.xrb,
            SensorKind::Raman => &self.raman,
            SensorKind::LidarNav => return None,
        })
    }

    pub fn get_mut(&mut self, kind: SensorKind) -> Option<&mut SensorModel> {
        Some(match kind {
            SensorKind::Rgb => &mut self.rgb,
            SensorKind::Ir => &mut self.ir,
            SensorKind::Hyperspectral => &mut self.hyperspectral,
            SensorKind::Gpr => &mut self.gpr,
            SensorKind::Emi => &mut self.emi,
            SensorKind::Xrb => &mut self.xrb,
            SensorKind::Raman => &mut self.raman,
            SensorKind::LidarNav => return None,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &SensorModel> {
        [&self.rgb, &self.ir, &self.hyperspectral, &self.gpr, &self.emi, &self.xrb, &self.raman].into_iter()
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        for m in self.iter() {
            m.validate()?;
        }
        for kind in SensorKind::ALL {
            if let Some(m) = self.get(kind) {
                if m.kind != kind {
                    return Err(SensorError::InvalidModel { kind, reason: format!("entry declares kind {:?}", m.kind) });
                }
            }
        }
        Ok(())
    }

    /// Ideal detectors (p_det 1, p_fp 0, no noise); fusion must clamp to use them.
    pub fn perfect() -> Self {
        let mut t = SensorTable::default();
        for kind in SensorKind::ALL {
            if let Some(m) = t.get_mut(kind) {
                m.p_det_base = 1.0;
                m.depth_decay = 1.0;
                m.p_fp = 0.0;
                m.feature_noise = 0.0;
                m.surface_cue = 1.0;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Charge, Initiator, ThreatId};
    use proptest::prelude::*;

    fn threat(depth: f64, metal: f64) -> Threat {
        Threat {
            id: ThreatId(1),
            class: ThreatClass::Ied,
            charge: Charge::HighExplosive,
            initiator: Initiator::Electrical,
            metal_fraction: metal,
            container_density: 0.5,
            depth,
            cell: 0,
        }
    }

    #[test]
    fn emi_example_curve() {
        let m = SensorModel::new(SensorKind::Emi, 1.0, 2.0, 0.9, 0.5, 0.05, 0.1);
        assert!((m.p_det(&threat(1.0, 1.0)) - 0.45).abs() < 1e-12);
    }

    #[test]
    fn cameras_do_not_see_buried_objects() {
        let t = SensorTable::default();
        assert_eq!(t.rgb.p_det(&threat(2.0, 0.5)), 0.0);
        assert!((t.rgb.p_det(&threat(0.05, 0.5)) - 0.7 * 0.15).abs() < 1e-12);
        assert_eq!(t.rgb.p_det(&threat(0.0, 0.5)), 0.7);
    }

    #[test]
    fn cutoff_beyond_max_depth() {
        for m in SensorTable::default().iter() {
            assert_eq!(m.p_det(&threat(m.max_depth + 0.01, 1.0)), 0.0, "{:?}", m.kind);
        }
    }

    #[test]
    fn likelihood_ratio_examples() {
        let d = DetectionModel { kind: SensorKind::Gpr, p_det_eff: 0.8, p_fp: 0.1 };
        assert!((d.likelihood_ratio(true).unwrap() - 8f64.ln()).abs() < 1e-12);
        assert!((d.likelihood_ratio(true).unwrap() - 2.079).abs() < 1e-3);
        let flat = DetectionModel { kind: SensorKind::Gpr, p_det_eff: 0.3, p_fp: 0.3 };
        assert_eq!(flat.likelihood_ratio(true).unwrap(), 0.0);
        assert_eq!(flat.likelihood_ratio(false).unwrap(), 0.0);
        let degenerate = DetectionModel { kind: SensorKind::Gpr, p_det_eff: 0.8, p_fp: 0.0 };
        assert!(matches!(degenerate.likelihood_ratio(true), Err(SensorError::DegenerateModel { .. })));
        assert!(degenerate.likelihood_ratio_clamped(true, 1e-6).is_finite());
    }

    #[test]
    fn default_table_is_valid_and_informative() {
        let t = SensorTable::default();
        t.validate().unwrap();
        let profiles = ThreatProfiles::default();
        for m in t.iter() {
            let d = m.detection_model(&profiles);
            assert!(d.p_det_eff > d.p_fp, "{:?}: {} vs {}", m.kind, d.p_det_eff, d.p_fp);
        }
    }

    #[test]
    fn marginal_of_point_prior_equals_point_value() {
        let mut profiles = ThreatProfiles::default();
        for c in ThreatClass::ALL {
            let p = profiles.get_mut(c);
            p.surface_prob = 1.0;
            p.metal_mean = 0.6;
            p.metal_sd = 0.0;
        }
        let m = SensorTable::default().emi;
        assert!((m.p_det_marginal(&profiles) - m.p_det_at(0.0, 0.6)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn p_det_monotone_in_depth(
            base in 0.0f64..=1.0, decay in 0.0f64..=1.0, max_depth in 0.0f64..3.0,
            metal in 0.0f64..=1.0, d1 in 0.0f64..3.0, d2 in 0.0f64..3.0, k in 0usize..8,
        ) {
            let kind = SensorKind::ALL[k];
            let m = SensorModel::new(kind, 1.0, max_depth, base, decay, 0.0, 0.1);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let (a, b) = (m.p_det(&threat(lo, metal)), m.p_det(&threat(hi, metal)));
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(a >= b);
        }

        #[test]
        fn lr_signs(pd in 0.01f64..0.99, pf in 0.01f64..0.99) {
            prop_assume!(pd > pf);
            let d = DetectionModel { kind: SensorKind::Emi, p_det_eff: pd, p_fp: pf };
            prop_assert!(d.likelihood_ratio(true).unwrap() > 0.0);
            prop_assert!(d.likelihood_ratio(false).unwrap() < 0.0);
        }
    }
}
