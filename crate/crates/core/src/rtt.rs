//! Multi-hop round-trip time.
//!
//! For hops `i = 1..n` the round trip is
//!
//! ```text
//! RTT = 2 * sum_i (d_i/v_i + (L_i/R_i) h_i + P_i + h_i/(mu_i - lambda_i))
//!         + sum_i T_i / (1 - p_i)
//! ```
//!
//! All quantities are SI (meters, bits, seconds). [`HopSpec`] carries the
//! same fields in milliseconds for files and the command line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RttError {
    #[error("hop {hop}: invalid {field}: {reason}")]
    InvalidHop {
        hop: usize,
        field: &'static str,
        reason: String,
    },
    #[error("hop {hop}: unstable hop, service rate {mu} must exceed arrival rate {lambda}")]
    UnstableHop { hop: usize, lambda: f64, mu: f64 },
    #[error("hop {hop}: invalid loss probability {p}, must be in [0, 1)")]
    InvalidLoss { hop: usize, p: f64 },
    #[error("unreachable target {target} s: {reason}")]
    UnreachableTarget { target: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, RttError>;

/// Physical and queueing parameters of one hop, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopConfig {
    pub distance: f64,
    pub propagation_speed: f64,
    pub packet_length: f64,
    pub link_rate: f64,
    /// Multiplies the transmission and queueing terms; 1 for a plain hop.
    pub hop_weight: f64,
    pub processing_delay: f64,
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub loss_prob: f64,
    pub retx_base: f64,
}

impl Default for HopConfig {
    fn default() -> Self {
        HopConfig {
            distance: 0.0,
            propagation_speed: 3.0e8,
            packet_length: 1000.0,
            link_rate: 1.0e6,
            hop_weight: 1.0,
            processing_delay: 0.0,
            arrival_rate: 0.0,
            service_rate: 1000.0,
            loss_prob: 0.0,
            retx_base: 0.0,
        }
    }
}

impl HopConfig {
    pub fn validate(&self, hop: usize) -> Result<()> {
        let nonneg = [
            ("distance", self.distance),
            ("packet_length", self.packet_length),
            ("hop_weight", self.hop_weight),
            ("processing_delay", self.processing_delay),
            ("arrival_rate", self.arrival_rate),
            ("retx_base", self.retx_base),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RttError::InvalidHop {
                    hop,
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        let positive = [
            ("propagation_speed", self.propagation_speed),
            ("link_rate", self.link_rate),
            ("service_rate", self.service_rate),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RttError::InvalidHop {
                    hop,
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if self.service_rate <= self.arrival_rate {
            return Err(RttError::UnstableHop {
                hop,
                lambda: self.arrival_rate,
                mu: self.service_rate,
            });
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return Err(RttError::InvalidLoss {
                hop,
                p: self.loss_prob,
            });
        }
        Ok(())
    }

    fn terms(&self) -> HopTerms {
        HopTerms {
            propagation: self.distance / self.propagation_speed,
            transmission: self.packet_length / self.link_rate * self.hop_weight,
            processing: self.processing_delay,
            queueing: self.hop_weight / (self.service_rate - self.arrival_rate),
            retransmission: self.retx_base / (1.0 - self.loss_prob),
        }
    }

    /// One-way delay through this hop: the four per-direction terms.
    pub fn one_way(&self) -> Result<f64> {
        self.validate(0)?;
        Ok(self.terms().one_way())
    }
}

/// Delay contributions of one hop, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopTerms {
    pub propagation: f64,
    pub transmission: f64,
    pub processing: f64,
    pub queueing: f64,
    pub retransmission: f64,
}

impl HopTerms {
    pub fn one_way(&self) -> f64 {
        self.propagation + self.transmission + self.processing + self.queueing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RttBreakdown {
    pub hops: Vec<HopTerms>,
    pub total: f64,
}

fn total_of(terms: &[HopTerms]) -> f64 {
    let two_way = terms.iter().map(HopTerms::one_way).fold(0.0, |a, b| a + b);
    let retx = terms
        .iter()
        .map(|t| t.retransmission)
        .fold(0.0, |a, b| a + b);
    2.0 * two_way + retx
}

pub fn compute_rtt(hops: &[HopConfig]) -> Result<RttBreakdown> {
    for (i, h) in hops.iter().enumerate() {
        h.validate(i)?;
    }
    let terms: Vec<HopTerms> = hops.iter().map(HopConfig::terms).collect();
    let total = total_of(&terms);
    Ok(RttBreakdown { hops: terms, total })
}

/// Field scaled by [`calibrate_to_target`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    Distance,
    PropagationSpeed,
    PacketLength,
    LinkRate,
    HopWeight,
    ProcessingDelay,
    ServiceRate,
    RetxBase,
}

impl FreeParam {
    fn field(self, hop: &mut HopConfig) -> &mut f64 {
        match self {
            FreeParam::Distance => &mut hop.distance,
            FreeParam::PropagationSpeed => &mut hop.propagation_speed,
            FreeParam::PacketLength => &mut hop.packet_length,
            FreeParam::LinkRate => &mut hop.link_rate,
            FreeParam::HopWeight => &mut hop.hop_weight,
            FreeParam::ProcessingDelay => &mut hop.processing_delay,
            FreeParam::ServiceRate => &mut hop.service_rate,
            FreeParam::RetxBase => &mut hop.retx_base,
        }
    }

    /// Whether the round trip grows with the field.
    fn increasing(self) -> bool {
        !matches!(
            self,
            FreeParam::PropagationSpeed | FreeParam::LinkRate | FreeParam::ServiceRate
        )
    }
}

/// Outcome of [`calibrate_to_target`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub hops: Vec<HopConfig>,
    /// Factor applied to the free field of every hop.
    pub scale: f64,
    pub total: f64,
}

const CALIBRATION_REL_TOL: f64 = 1e-9;

fn scaled(hops: &[HopConfig], param: FreeParam, s: f64) -> Vec<HopConfig> {
    hops.iter()
        .map(|h| {
            let mut h = *h;
            *param.field(&mut h) *= s;
            h
        })
        .collect()
}

/// Total round trip with the free field scaled by `s`, or infinity where
/// the scaled hops are unstable.
fn scaled_total(hops: &[HopConfig], param: FreeParam, s: f64) -> f64 {
    let terms: Vec<HopTerms> = scaled(hops, param, s)
        .iter()
        .map(HopConfig::terms)
        .collect();
    let total = total_of(&terms);
    let unstable = param == FreeParam::ServiceRate
        && hops.iter().any(|h| h.service_rate * s <= h.arrival_rate);
    if unstable || total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

/// Scales one field across all hops so that the round trip hits
/// `target` seconds, by bisection on the scale factor.
pub fn calibrate_to_target(
    hops: &[HopConfig],
    target: f64,
    param: FreeParam,
) -> Result<Calibration> {
    let current = compute_rtt(hops)?.total;
    if !(target.is_finite() && target > 0.0) {
        return Err(RttError::UnreachableTarget {
            target,
            reason: "target must be positive and finite".into(),
        });
    }
    if (current - target).abs() <= CALIBRATION_REL_TOL * target {
        return Ok(Calibration {
            hops: hops.to_vec(),
            scale: 1.0,
            total: current,
        });
    }
    // Limit of the total as the field vanishes (or grows without bound
    // for fields that divide).
    let floor_scale = if param.increasing() {
        0.0
    } else {
        f64::INFINITY
    };
    let floor = scaled_total(hops, param, floor_scale);
    if target <= floor {
        return Err(RttError::UnreachableTarget {
            target,
            reason: format!("below the irreducible floor {floor} s"),
        });
    }
    let mut probe = hops.to_vec();
    if probe.iter_mut().all(|h| *param.field(h) == 0.0) {
        return Err(RttError::UnreachableTarget {
            target,
            reason: format!("{param:?} is zero on every hop"),
        });
    }

    // g(s) is increasing in s once oriented.
    let g = |s: f64| {
        let t = scaled_total(hops, param, s);
        if param.increasing() {
            t
        } else {
            -t
        }
    };
    let goal = if param.increasing() { target } else { -target };
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    for _ in 0..2100 {
        if g(hi) >= goal {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..2100 {
        if g(lo) <= goal {
            break;
        }
        lo *= 0.5;
    }
    if !(g(lo) <= goal && g(hi) >= goal) {
        return Err(RttError::UnreachableTarget {
            target,
            reason: "no bracketing scale found".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v < goal {
            lo = mid;
        } else {
            hi = mid;
        }
        if (v.abs() - target).abs() <= CALIBRATION_REL_TOL * target || hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);
    let hops = scaled(hops, param, scale);
    let total = compute_rtt(&hops)?.total;
    Ok(Calibration { hops, scale, total })
}

/// A hop in file units: milliseconds for delays, everything else SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopSpec {
    pub distance_m: f64,
    pub propagation_speed_mps: f64,
    pub packet_length_bits: f64,
    pub link_rate_bps: f64,
    #[serde(default = "one")]
    pub hop_weight: f64,
    pub processing_delay_ms: f64,
    pub arrival_rate_pps: f64,
    pub service_rate_pps: f64,
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub retx_base_ms: f64,
}

fn one() -> f64 {
    1.0
}

impl From<HopSpec> for HopConfig {
    fn from(s: HopSpec) -> Self {
        HopConfig {
            distance: s.distance_m,
            propagation_speed: s.propagation_speed_mps,
            packet_length: s.packet_length_bits,
            link_rate: s.link_rate_bps,
            hop_weight: s.hop_weight,
            processing_delay: s.processing_delay_ms * 1e-3,
            arrival_rate: s.arrival_rate_pps,
            service_rate: s.service_rate_pps,
            loss_prob: s.loss_prob,
            retx_base: s.retx_base_ms * 1e-3,
        }
    }
}

impl From<HopConfig> for HopSpec {
    fn from(h: HopConfig) -> Self {
        HopSpec {
            distance_m: h.distance,
            propagation_speed_mps: h.propagation_speed,
            packet_length_bits: h.packet_length,
            link_rate_bps: h.link_rate,
            hop_weight: h.hop_weight,
            processing_delay_ms: h.processing_delay * 1e3,
            arrival_rate_pps: h.arrival_rate,
            service_rate_pps: h.service_rate,
            loss_prob: h.loss_prob,
            retx_base_ms: h.retx_base * 1e3,
        }
    }
}
