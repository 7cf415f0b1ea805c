use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

const SEED_ENV: &str = "IIOT_NETSIM_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "iiot-netsim",
    version,
    about = "IIoT MQTT network latency simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write intervals.csv, rtt_summary.csv and manifest.json.
    Simulate {
        /// Simulation config (JSON), or a manifest.json from an earlier run.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Seed override; beats the config's seed.
        #[arg(long, value_name = "U64", env = SEED_ENV)]
        seed: Option<u64>,
        /// Reporting window for intervals.csv.
        #[arg(long, value_name = "SECONDS", default_value_t = 5.0)]
        window: f64,
    },
    /// Run the base config once per fading kind and write fading_table.csv.
    CompareFading {
        /// Comparison config (JSON), or a manifest.json from an earlier run.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Seed override for the base config.
        #[arg(long, value_name = "U64", env = SEED_ENV)]
        seed: Option<u64>,
    },
    /// Sample a channel model and test it against its analytic distribution.
    #[command(allow_negative_numbers = true)]
    ValidateChannel {
        #[arg(long, value_enum)]
        kind: ChannelKind,
        /// Scatter deviation per quadrature (rayleigh, rician).
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Line-of-sight amplitude (rician).
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Line-of-sight phase in radians (rician).
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        /// Noise power (awgn).
        #[arg(long, default_value_t = 1.0)]
        n0: f64,
        /// Number of samples to draw.
        #[arg(long, value_name = "N", default_value_t = 100_000)]
        samples: usize,
        /// Sigma used for the analytic reference instead of --sigma.
        #[arg(long)]
        analytic_sigma: Option<f64>,
        /// Histogram bins in the density CSV.
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Directory for channel_<kind>.csv; the CSV goes to stdout if absent.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "U64", env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-form and Monte-Carlo reliability of the QoS 2 handshake.
    #[command(allow_negative_numbers = true)]
    QosReliability {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        /// Monte-Carlo handshakes.
        #[arg(long, value_name = "N", default_value_t = 1_000_000)]
        runs: u64,
        /// Retries allowed per leg in the Monte-Carlo runs.
        #[arg(long, default_value_t = 0)]
        max_retries: u32,
        #[arg(long, value_name = "U64", env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Round-trip time breakdown for a hop table.
    Rtt {
        /// CSV with one row per hop; columns as in the config's base_hop.
        #[arg(long, value_name = "PATH")]
        hops: PathBuf,
    },
    /// Erlang-C wait probability and mean queueing delay of an M/M/c queue.
    #[command(allow_negative_numbers = true)]
    Queue {
        /// Arrival rate, packets per second.
        #[arg(long)]
        lambda: f64,
        /// Service rate per server, packets per second.
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 1)]
        servers: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
    Rician,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Rician => "rician",
        }
    }
}
