use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::CellIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThreatId(pub u32);

impl std::fmt::Display for ThreatId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreatClass {
    Ied,
    Eo,
    Landmine,
}

impl ThreatClass {
    pub const ALL: [ThreatClass; 3] = [ThreatClass::Ied, ThreatClass::Eo, ThreatClass::Landmine];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> ThreatClass {
        Self::ALL[i]
    }
}

/// Main charge type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Charge {
    HighExplosive,
    LowExplosive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiator {
    Electrical,
    Mechanical,
    Chemical,
}

/// Ground-truth explosive device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threat {
    pub id: ThreatId,
    pub class: ThreatClass,
    pub charge: Charge,
    pub initiator: Initiator,
    /// Metallic fraction of container and initiator, in [0,1].
    pub metal_fraction: f64,
    /// Normalised container density seen by backscatter and radar, in [0,1].
    pub container_density: f64,
    /// Burial depth in meters; 0 is on the surface.
    pub depth: f64,
    pub cell: CellIndex,
}

/// Distribution of device properties for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// Relative frequency of the class among placed threats.
    pub weight: f64,
    pub p_high_explosive: f64,
    /// Probability that the device lies on the surface.
    pub surface_prob: f64,
    /// Buried devices are uniform on (0, max_depth].
    pub max_depth: f64,
    pub metal_mean: f64,
    pub metal_sd: f64,
    pub density_mean: f64,
    pub density_sd: f64,
    /// Weights for electrical, mechanical, chemical initiators.
    pub initiator_weights: [f64; 3],
}

/// Per-class device profiles shared by the generator, fusion and classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreatProfiles {
    pub ied: ClassProfile,
    pub eo: ClassProfile,
    pub landmine: ClassProfile,
    /// Standard-deviation floor applied to every Gaussian channel.
    pub min_channel_sd: f64,
}

impl Default for ThreatProfiles {
    fn default() -> Self {
        ThreatProfiles {
            ied: ClassProfile {
                weight: 1.0,
                p_high_explosive: 0.5,
                surface_prob: 0.3,
                max_depth: 0.5,
                metal_mean: 0.35,
                metal_sd: 0.25,
                density_mean: 0.35,
                density_sd: 0.2,
                initiator_weights: [0.6, 0.25, 0.15],
            },
            eo: ClassProfile {
                weight: 1.0,
                p_high_explosive: 0.5,
                surface_prob: 0.5,
                max_depth: 0.5,
                metal_mean: 0.9,
                metal_sd: 0.08,
                density_mean: 0.85,
                density_sd: 0.1,
                initiator_weights: [0.2, 0.7, 0.1],
            },
            landmine: ClassProfile {
                weight: 1.0,
                p_high_explosive: 0.2,
                surface_prob: 0.1,
                max_depth: 0.3,
                metal_mean: 0.75,
                metal_sd: 0.15,
                density_mean: 0.55,
                density_sd: 0.12,
                initiator_weights: [0.05, 0.9, 0.05],
            },
            min_channel_sd: 0.05,
        }
    }
}

impl ThreatProfiles {
    pub fn get(&self, class: ThreatClass) -> &ClassProfile {
        match class {
            ThreatClass::Ied => &self.ied,
            ThreatClass::Eo => &self.eo,
            ThreatClass::Landmine => &self.landmine,
        }
    }

    pub fn get_mut(&mut self, class: ThreatClass) -> &mut ClassProfile {
        match class {
            ThreatClass::Ied => &mut self.ied,
            ThreatClass::Eo => &mut self.eo,
            ThreatClass::Landmine => &mut self.landmine,
        }
    }

    /// Normalised class prior.
    pub fn class_prior(&self) -> [f64; 3] {
        let w = ThreatClass::ALL.map(|c| self.get(c).weight.max(0.0));
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.map(|x| x / total)
        } else {
            [1.0 / 3.0; 3]
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_channel_sd > 0.0) {
            return Err("min_channel_sd must be > 0".into());
        }
        for class in ThreatClass::ALL {
            let p = self.get(class);
            let probs = [p.p_high_explosive, p.surface_prob];
            if probs.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("{class:?}: probabilities must lie in [0,1]"));
            }
            if !(p.weight >= 0.0) || !(p.max_depth >= 0.0) || !(p.metal_sd >= 0.0) || !(p.density_sd >= 0.0) {
                return Err(format!("{class:?}: weight, max_depth and sd values must be >= 0"));
            }
            if p.initiator_weights.iter().any(|w| !(*w >= 0.0)) || p.initiator_weights.iter().sum::<f64>() <= 0.0 {
                return Err(format!("{class:?}: initiator weights must be >= 0 with positive sum"));
            }
        }
        if ThreatClass::ALL.iter().all(|c| self.get(*c).weight <= 0.0) {
            return Err("at least one class weight must be positive".into());
        }
        Ok(())
    }

    /// Draws one device of a randomly chosen class.
    pub fn sample<R: Rng + ?Sized>(&self, id: ThreatId, cell: CellIndex, rng: &mut R) -> Threat {
        let prior = self.class_prior();
        let class = ThreatClass::from_index(pick_weighted(&prior, rng));
        self.sample_class(class, id, cell, rng)
    }

    pub fn sample_class<R: Rng + ?Sized>(&self, class: ThreatClass, id: ThreatId, cell: CellIndex, rng: &mut R) -> Threat {
        let p = self.get(class);
        let charge = if rng.gen::<f64>() < p.p_high_explosive { Charge::HighExplosive } else { Charge::LowExplosive };
        let initiator = match pick_weighted(&p.initiator_weights, rng) {
            0 => Initiator::Electrical,
            1 => Initiator::Mechanical,
            _ => Initiator::Chemical,
        };
        let depth = if rng.gen::<f64>() < p.surface_prob || p.max_depth == 0.0 {
            0.0
        } else {
            // (0, max_depth]
            (1.0 - rng.gen::<f64>()) * p.max_depth
        };
        let metal = gaussian(p.metal_mean, p.metal_sd, rng).clamp(0.0, 1.0);
        let density = gaussian(p.density_mean, p.density_sd, rng).clamp(0.0, 1.0);
        Threat { id, class, charge, initiator, metal_fraction: metal, container_density: density, depth, cell }
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd > 0.0 {
        Normal::new(mean, sd).map(|n| n.sample(rng)).unwrap_or(mean)
    } else {
        mean
    }
}

pub(crate) fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
