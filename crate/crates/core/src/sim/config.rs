use serde::{Deserialize, Serialize};

use crate::channel::{AwgnParams, RayleighParams, RicianParams};
use crate::qos::QosLevel;
use crate::queueing::QueueParams;
use crate::rtt::{HopConfig, HopSpec};

use super::{Result, SimError};

/// Channel applied to every transmission leg.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FadingSpec {
    /// Perfect link: unit gain, no noise, no losses.
    #[default]
    None,
    /// Unit gain with noise power `n0`.
    Awgn(AwgnParams),
    Rayleigh(RayleighParams),
    Rician(RicianParams),
}

impl FadingSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            FadingSpec::None => "none",
            FadingSpec::Awgn(_) => "awgn",
            FadingSpec::Rayleigh(_) => "rayleigh",
            FadingSpec::Rician(_) => "rician",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = match self {
            FadingSpec::None => Ok(()),
            FadingSpec::Awgn(p) => p.validate(),
            FadingSpec::Rayleigh(p) => p.validate(),
            FadingSpec::Rician(p) => p.validate(),
        };
        r.map_err(|e| SimError::invalid("fading", e.to_string()))
    }
}

/// How the broker queue delays each delivered packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitModel {
    /// Queue switched on empty at the start of the run.
    #[default]
    Transient,
    /// Independent draws from the stationary M/M/c wait.
    SteadyState,
    /// No broker queueing.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    #[serde(default)]
    pub model: WaitModel,
    #[serde(default = "default_servers")]
    pub servers: u32,
    pub service_rate_pps: f64,
    /// Load from traffic outside the simulated nodes.
    #[serde(default)]
    pub background_rate_pps: f64,
}

fn default_servers() -> u32 {
    1
}

impl Default for ServerSpec {
    fn default() -> Self {
        ServerSpec {
            model: WaitModel::None,
            servers: 1,
            service_rate_pps: 1.0e6,
            background_rate_pps: 0.0,
        }
    }
}

fn default_tick() -> f64 {
    1.0
}

fn default_qos() -> QosLevel {
    QosLevel::ExactlyOnce
}

fn default_retries() -> u32 {
    crate::qos::DEFAULT_MAX_RETRIES_PER_LEG
}

fn default_n0() -> f64 {
    1.0
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub node_count: u32,
    pub duration_s: f64,
    #[serde(default = "default_tick")]
    pub tick_s: f64,
    /// Mean packets each node offers per tick; fractions carry over.
    pub packets_per_node_per_tick: f64,
    /// Scale each node's offered count per tick by a uniform factor in
    /// [0.8, 1.2].
    #[serde(default)]
    pub rate_jitter: bool,
    #[serde(default = "default_qos")]
    pub qos_level: QosLevel,
    #[serde(default = "default_retries")]
    pub max_retries_per_leg: u32,
    /// Wait before a failed leg is retransmitted.
    #[serde(default)]
    pub retry_timeout_ms: f64,
    #[serde(default)]
    pub fading: FadingSpec,
    /// Receiver noise power for the fading channels.
    #[serde(default = "default_n0")]
    pub noise_n0: f64,
    /// SNR at which a leg is lost half the time; `null` disables losses.
    #[serde(default)]
    pub snr_threshold_db: Option<f64>,
    pub base_hop: HopSpec,
    #[serde(default)]
    pub server: ServerSpec,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimulationConfig =
            serde_json::from_str(text).map_err(|e| SimError::invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration_s / self.tick_s - 1e-9).ceil().max(1.0) as u64
    }

    /// Packets per second offered by all nodes together.
    pub fn offered_rate_pps(&self) -> f64 {
        self.node_count as f64 * self.packets_per_node_per_tick / self.tick_s
    }

    pub fn hop(&self) -> HopConfig {
        self.base_hop.into()
    }

    /// Broker queue seen by the nodes, or `None` when no packets arrive.
    pub fn server_queue(&self) -> Option<QueueParams> {
        let lambda = self.server.background_rate_pps + self.offered_rate_pps();
        (lambda > 0.0)
            .then(|| QueueParams::new(lambda, self.server.service_rate_pps, self.server.servers))
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(SimError::invalid("node_count", "must be at least 1"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SimError::invalid("duration_s", "must be positive"));
        }
        if !(self.tick_s.is_finite() && self.tick_s > 0.0) {
            return Err(SimError::invalid("tick_s", "must be positive"));
        }
        if !(self.packets_per_node_per_tick.is_finite() && self.packets_per_node_per_tick >= 0.0) {
            return Err(SimError::invalid(
                "packets_per_node_per_tick",
                "must be >= 0",
            ));
        }
        if !(self.retry_timeout_ms.is_finite() && self.retry_timeout_ms >= 0.0) {
            return Err(SimError::invalid("retry_timeout_ms", "must be >= 0"));
        }
        if !(self.noise_n0.is_finite() && self.noise_n0 > 0.0) {
            return Err(SimError::invalid("noise_n0", "must be positive"));
        }
        if let Some(t) = self.snr_threshold_db {
            if !t.is_finite() {
                return Err(SimError::invalid(
                    "snr_threshold_db",
                    "must be finite or null",
                ));
            }
        }
        self.fading.validate()?;
        self.hop()
            .validate(0)
            .map_err(|e| SimError::invalid("base_hop", e.to_string()))?;
        if self.base_hop.packet_length_bits < 1.0 {
            return Err(SimError::invalid(
                "base_hop.packet_length_bits",
                "must be at least 1",
            ));
        }
        let s = &self.server;
        if s.servers == 0 {
            return Err(SimError::invalid("server.servers", "must be at least 1"));
        }
        if !(s.service_rate_pps.is_finite() && s.service_rate_pps > 0.0) {
            return Err(SimError::invalid(
                "server.service_rate_pps",
                "must be positive",
            ));
        }
        if !(s.background_rate_pps.is_finite() && s.background_rate_pps >= 0.0) {
            return Err(SimError::invalid(
                "server.background_rate_pps",
                "must be >= 0",
            ));
        }
        Ok(())
    }
}

/// A fading kind in a comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindSpec {
    /// Column name; defaults to the fading kind.
    #[serde(default)]
    pub label: Option<String>,
    pub fading: FadingSpec,
}

impl KindSpec {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.fading.kind().to_string())
    }
}

/// A fading comparison: one run of `base` per kind, averaged at each
/// sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub base: SimulationConfig,
    pub kinds: Vec<KindSpec>,
    pub sample_times_s: Vec<f64>,
}

impl CompareConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CompareConfig =
            serde_json::from_str(text).map_err(|e| SimError::invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.kinds.len() < 2 {
            return Err(SimError::invalid(
                "kinds",
                "at least 2 fading kinds are required",
            ));
        }
        let mut labels: Vec<String> = self.kinds.iter().map(KindSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::invalid(
                "kinds",
                format!("duplicate label {:?}", w[0]),
            ));
        }
        for k in &self.kinds {
            k.fading.validate()?;
        }
        if self.sample_times_s.is_empty() {
            return Err(SimError::invalid(
                "sample_times_s",
                "must list at least one time",
            ));
        }
        if let Some(t) = self
            .sample_times_s
            .iter()
            .find(|&&t| !(t > 0.0 && t <= self.base.duration_s))
        {
            return Err(SimError::invalid(
                "sample_times_s",
                format!("time {t} is outside (0, {}]", self.base.duration_s),
            ));
        }
        Ok(())
    }
}
