use super::{SensorError, SensorKind, SensorModel};
use crate::world::{ThreatClass, ThreatProfiles};

/// Evidence channel a sensor reports on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Metal,
    Chem,
    Density,
    Visual,
}

impl Channel {
    pub fn of(kind: SensorKind) -> Option<Channel> {
        match kind {
            SensorKind::Emi => Some(Channel::Metal),
            SensorKind::Raman => Some(Channel::Chem),
            SensorKind::Xrb | SensorKind::Gpr => Some(Channel::Density),
            SensorKind::Rgb | SensorKind::Ir | SensorKind::Hyperspectral => Some(Channel::Visual),
            SensorKind::LidarNav => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::Metal => 0,
            Channel::Chem => 1,
            Channel::Density => 2,
            Channel::Visual => 3,
        }
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Per-class log-likelihood `log p(features | class)` of one detection, ordered IED, EO, landmine.
///
/// Metal and density are Gaussian with the class spread and the sensor noise
/// added in quadrature. The chemical channel is a two-component mixture over the
/// class's high/low explosive split. Cameras carry no class information, so all
/// classes receive the same value.
pub fn classify_evidence(features: &[f64], model: &SensorModel, profiles: &ThreatProfiles) -> Result<[f64; 3], SensorError> {
    let channel = Channel::of(model.kind);
    let (Some(channel), 4) = (channel, features.len()) else {
        return Err(SensorError::UnknownFeatureShape { kind: model.kind, len: features.len() });
    };
    let x = features[channel.index()];
    let floor = profiles.min_channel_sd;
    let noise = model.feature_noise;
    let out = ThreatClass::ALL.map(|class| {
        let p = profiles.get(class);
        match channel {
            Channel::Metal => normal_logpdf(x, p.metal_mean, (p.metal_sd.powi(2) + noise.powi(2)).sqrt().max(floor)),
            Channel::Density => normal_logpdf(x, p.density_mean, (p.density_sd.powi(2) + noise.powi(2)).sqrt().max(floor)),
            Channel::Chem => {
                let sd = noise.max(floor);
                let high = p.p_high_explosive.ln() + normal_logpdf(x, 1.0, sd);
                let low = (1.0 - p.p_high_explosive).ln() + normal_logpdf(x, 0.0, sd);
                log_add(high, low)
            }
            Channel::Visual => normal_logpdf(x, 0.5, 0.5),
        }
    });
    Ok(out)
}
