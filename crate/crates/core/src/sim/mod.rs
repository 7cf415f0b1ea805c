//! Tick-driven simulation of sensor nodes publishing to a central broker.
//!
//! Every tick each node offers its packets. Each packet is delivered with
//! the configured QoS handshake; every transmission leg sees an independent
//! fading draw whose SNR sets the leg's loss probability, and failed legs
//! are retried. A delivered packet's latency is
//!
//! ```text
//! legs * one_way(base_hop) + retries * retry_timeout + broker queue wait
//! ```
//!
//! All randomness comes from streams keyed by (node, tick, packet, leg), so
//! runs are reproducible and nodes never perturb each other's draws.

mod config;
mod link;

use std::thread;

use thiserror::Error;

use crate::qos::{deliver_with, QosLevel};
use crate::queueing::{sample_steady_state_wait, QueueError, QueueParams, TransientWorkload};
use crate::report::{
    fading_comparison_table, windowed_series_over, FadingTable, IntervalReport, LatencyStats,
    ReportError, RttSummary,
};
use crate::rng::{RngStream, StreamKey};
use crate::rtt::{calibrate_to_target, FreeParam, HopConfig, HopSpec, RttError};

pub use config::{CompareConfig, FadingSpec, KindSpec, ServerSpec, SimulationConfig, WaitModel};
pub use link::{per_packet_error_probability, LinkModel, PER_SLOPE_PER_DB};

use rand::Rng;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("server {0}")]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Rtt(#[from] RttError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl SimError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

const TRAFFIC_DOMAIN: u64 = 1;
const LEG_DOMAIN: u64 = 2;
const WAIT_DOMAIN: u64 = 3;

/// Outcome of one offered packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub node: u32,
    pub tick: u64,
    /// Index of the packet within its node and tick.
    pub seq: u32,
    pub tick_start_s: f64,
    pub send_time_s: f64,
    /// Transmissions made, retries included.
    pub attempts: u32,
    pub latency_legs: u32,
    pub retries: u32,
    pub delivered: bool,
    /// End-to-end latency in seconds; `None` when the packet was lost.
    pub latency_s: Option<f64>,
}

impl PacketRecord {
    pub fn latency_ms(&self) -> Option<f64> {
        self.latency_s.map(|s| s * 1e3)
    }
}

#[derive(Debug, Clone)]
pub struct SensorNode {
    pub id: u32,
    carry: f64,
    pub sent: u64,
    pub lost: u64,
}

impl SensorNode {
    fn new(id: u32) -> Self {
        SensorNode {
            id,
            carry: 0.0,
            sent: 0,
            lost: 0,
        }
    }

    /// Packets offered this tick. Fractional rates accumulate across ticks.
    fn offered(&mut self, rate: f64, jitter: bool, rng: &mut RngStream) -> u32 {
        let factor = if jitter {
            rng.random_range(0.8..=1.2)
        } else {
            1.0
        };
        let want = self.carry + rate * factor;
        let n = (want + 1e-9).floor();
        self.carry = (want - n).max(0.0);
        n as u32
    }
}

/// Aggregates delivered packets.
#[derive(Debug, Clone, Default)]
pub struct CentralServer {
    pub received: u64,
    latency: LatencyStats,
}

impl CentralServer {
    pub fn receive(&mut self, record: &PacketRecord) {
        if let Some(ms) = record.latency_ms() {
            self.received += 1;
            self.latency.push(ms);
        }
    }

    /// Mean latency in ms over everything received since the last reset.
    pub fn average_latency_ms(&self) -> Option<f64> {
        self.latency.mean()
    }

    pub fn summary(&self) -> RttSummary {
        self.latency.summary()
    }

    pub fn reset(&mut self) {
        *self = CentralServer::default();
    }
}

#[derive(Debug, Clone, Copy)]
enum BrokerWait {
    None,
    SteadyState(QueueParams),
    Transient(TransientWorkload),
}

impl BrokerWait {
    fn new(config: &SimulationConfig) -> Result<Self> {
        let Some(queue) = config.server_queue() else {
            return Ok(BrokerWait::None);
        };
        // the stability gate applies whatever the wait model
        queue.validate()?;
        Ok(match config.server.model {
            WaitModel::None => BrokerWait::None,
            WaitModel::SteadyState => BrokerWait::SteadyState(queue),
            WaitModel::Transient => BrokerWait::Transient(TransientWorkload::from_queue(&queue)?),
        })
    }

    fn sample(&self, t: f64, rng: &mut RngStream) -> f64 {
        match self {
            BrokerWait::None => 0.0,
            BrokerWait::SteadyState(q) => {
                sample_steady_state_wait(q, rng).expect("validated queue")
            }
            BrokerWait::Transient(w) => w.sample(t, rng),
        }
    }
}

/// Totals over a whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub rtt: RttSummary,
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    /// One report per tick.
    pub ticks: Vec<IntervalReport>,
    pub records: Vec<PacketRecord>,
    pub summary: RunSummary,
}

pub struct Simulation {
    config: SimulationConfig,
    one_way: f64,
    link: LinkModel,
    wait: BrokerWait,
    nodes: Vec<SensorNode>,
    server: CentralServer,
    records: Vec<PacketRecord>,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let wait = BrokerWait::new(&config)?;
        let one_way = config.hop().one_way()?;
        let link = LinkModel {
            fading: config.fading,
            noise_n0: config.noise_n0,
            threshold_db: config.snr_threshold_db,
        };
        let nodes = (0..config.node_count).map(SensorNode::new).collect();
        Ok(Simulation {
            config,
            one_way,
            link,
            wait,
            nodes,
            server: CentralServer::default(),
            records: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    /// One-way delay of a single leg through the base hop, seconds.
    pub fn one_way_s(&self) -> f64 {
        self.one_way
    }

    pub fn nodes(&self) -> &[SensorNode] {
        &self.nodes
    }

    pub fn server(&self) -> &CentralServer {
        &self.server
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    fn send_packet(
        &self,
        node: u32,
        tick: u64,
        seq: u32,
        tick_start_s: f64,
        send_time_s: f64,
    ) -> PacketRecord {
        let cfg = &self.config;
        let seed = cfg.seed;
        let packet_key = StreamKey::new(LEG_DOMAIN)
            .with(u64::from(node))
            .with(tick)
            .with(u64::from(seq));
        let mut legs: [Option<RngStream>; 4] = Default::default();
        let outcome = deliver_with(cfg.qos_level, cfg.max_retries_per_leg, |leg, _| {
            let rng = legs[leg]
                .get_or_insert_with(|| RngStream::from_key(seed, packet_key.with(leg as u64)));
            self.link.attempt(rng)
        });
        let latency_s = outcome.delivered.then(|| {
            let mut rng = RngStream::from_key(
                seed,
                StreamKey::new(WAIT_DOMAIN)
                    .with(u64::from(node))
                    .with(tick)
                    .with(u64::from(seq)),
            );
            outcome.latency_legs as f64 * self.one_way
                + outcome.retries as f64 * cfg.retry_timeout_ms * 1e-3
                + self.wait.sample(send_time_s, &mut rng)
        });
        PacketRecord {
            node,
            tick,
            seq,
            tick_start_s,
            send_time_s,
            attempts: outcome.legs_attempted,
            latency_legs: outcome.latency_legs,
            retries: outcome.retries,
            delivered: outcome.delivered,
            latency_s,
        }
    }

    /// Runs tick `tick` (0-based) and returns its report.
    pub fn run_tick(&mut self, tick: u64) -> IntervalReport {
        let cfg = &self.config;
        let tick_s = cfg.tick_s;
        let tick_start_s = tick as f64 * tick_s;
        let start = self.records.len();
        let mut nodes = std::mem::take(&mut self.nodes);
        for node in &mut nodes {
            let mut traffic = RngStream::from_key(
                cfg.seed,
                StreamKey::new(TRAFFIC_DOMAIN)
                    .with(u64::from(node.id))
                    .with(tick),
            );
            let count = node.offered(cfg.packets_per_node_per_tick, cfg.rate_jitter, &mut traffic);
            for seq in 0..count {
                let offset: f64 = traffic.random::<f64>() * tick_s;
                let record =
                    self.send_packet(node.id, tick, seq, tick_start_s, tick_start_s + offset);
                node.sent += 1;
                if !record.delivered {
                    node.lost += 1;
                }
                self.server.receive(&record);
                self.records.push(record);
            }
        }
        self.nodes = nodes;
        IntervalReport::from_records(
            tick_start_s,
            tick_s,
            self.config.base_hop.packet_length_bits,
            &self.records[start..],
        )
    }

    /// Runs every tick, then resets the server.
    pub fn run(mut self) -> SimulationRun {
        let ticks: Vec<IntervalReport> = (0..self.config.tick_count())
            .map(|t| self.run_tick(t))
            .collect();
        let sent: u64 = self.nodes.iter().map(|n| n.sent).sum();
        let lost: u64 = self.nodes.iter().map(|n| n.lost).sum();
        let summary = RunSummary {
            rtt: self.server.summary(),
            sent,
            delivered: sent - lost,
            lost,
        };
        self.server.reset();
        SimulationRun {
            ticks,
            records: self.records,
            summary,
        }
    }
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationRun> {
    Ok(Simulation::new(config.clone())?.run())
}

/// Capacity check over a perfect channel: runs `config` with fading and
/// losses switched off and reports packet counts per `window_s` seconds.
pub fn traffic_loopback(config: &SimulationConfig, window_s: f64) -> Result<Vec<IntervalReport>> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(SimError::invalid("window", "must be positive"));
    }
    let mut cfg = config.clone();
    cfg.fading = FadingSpec::None;
    cfg.snr_threshold_db = None;
    let run = run_simulation(&cfg)?;
    Ok(windowed_series_over(
        &run.records,
        window_s,
        cfg.base_hop.packet_length_bits,
        cfg.duration_s,
    ))
}

/// Mean latency in ms of delivered packets sent before `t` seconds.
pub fn average_latency_before(records: &[PacketRecord], t: f64) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.send_time_s < t)
        .filter_map(PacketRecord::latency_ms)
        .collect::<LatencyStats>()
        .mean()
}

/// Runs the base configuration once per fading kind with the same seed
/// and tabulates the running average latency at each sample time.
pub fn compare_fading(config: &CompareConfig) -> Result<FadingTable> {
    config.validate()?;
    let runs: Vec<Result<SimulationRun>> = thread::scope(|s| {
        let handles: Vec<_> = config
            .kinds
            .iter()
            .map(|kind| {
                let mut cfg = config.base.clone();
                cfg.fading = kind.fading;
                s.spawn(move || run_simulation(&cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let values = config
        .sample_times_s
        .iter()
        .map(|&t| {
            runs.iter()
                .map(|r| average_latency_before(&r.records, t))
                .collect()
        })
        .collect();
    Ok(fading_comparison_table(
        config.sample_times_s.clone(),
        config.kinds.iter().map(KindSpec::label).collect(),
        values,
    )?)
}

/// Adjusts the processing delay of `hop` so that `legs` one-way traversals
/// take `target_s` seconds in total, i.e. the fixed latency of a loss-free
/// packet before broker queueing.
pub fn calibrate_base_hop(hop: &HopSpec, legs: u32, target_s: f64) -> Result<HopSpec> {
    let mut h: HopConfig = (*hop).into();
    h.loss_prob = 0.0;
    h.retx_base = 0.0;
    // a single hop's round trip is two one-way traversals
    let target_rtt = 2.0 * target_s / legs as f64;
    let cal = calibrate_to_target(&[h], target_rtt, FreeParam::ProcessingDelay)?;
    let mut out = *hop;
    out.processing_delay_ms = cal.hops[0].processing_delay * 1e3;
    Ok(out)
}

/// Fixed latency of a loss-free packet at `level`, seconds.
pub fn fixed_latency_s(hop: &HopSpec, level: QosLevel) -> Result<f64> {
    Ok(HopConfig::from(*hop).one_way()? * level.legs() as f64)
}
