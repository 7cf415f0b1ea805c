//! M/M/c broker-queue analytics, a discrete-event oracle, and a transient
//! workload model for a queue that starts empty.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{normal_cdf, normal_pdf, normal_sf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("invalid queue parameter: {0}")]
    InvalidParameter(String),
    #[error("queue instability: traffic intensity {rho} must be below server count {servers}")]
    Instability { rho: f64, servers: u32 },
}

pub type Result<T> = std::result::Result<T, QueueError>;

/// Arrival rate `lambda` and per-server service rate `mu` in packets per
/// second, with `servers` parallel servers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    pub lambda: f64,
    pub mu: f64,
    pub servers: u32,
}

impl QueueParams {
    pub fn new(lambda: f64, mu: f64, servers: u32) -> Self {
        QueueParams {
            lambda,
            mu,
            servers,
        }
    }

    /// Traffic intensity `lambda / mu`.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Per-server utilization `lambda / (c mu)`.
    pub fn utilization(&self) -> f64 {
        self.rho() / self.servers as f64
    }

    /// Checks parameter ranges and the stability condition `rho < c`.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(QueueError::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(QueueError::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.servers == 0 {
            return Err(QueueError::InvalidParameter(
                "servers must be at least 1".into(),
            ));
        }
        if self.rho() >= self.servers as f64 {
            return Err(QueueError::Instability {
                rho: self.rho(),
                servers: self.servers,
            });
        }
        Ok(())
    }
}

/// Erlang-B blocking probability by the recursion
/// `B_k = rho B_{k-1} / (k + rho B_{k-1})`, which never forms `rho^c / c!`.
fn erlang_b(servers: u32, rho: f64) -> f64 {
    (1..=servers).fold(1.0, |b, k| rho * b / (k as f64 + rho * b))
}

/// Probability that an arrival has to wait, `C(c, rho)`.
pub fn erlang_c_probability(params: &QueueParams) -> Result<f64> {
    params.validate()?;
    let b = erlang_b(params.servers, params.rho());
    let a = params.utilization();
    Ok(b / (1.0 - a * (1.0 - b)))
}

/// Mean wait in queue `W_q = C / (c mu - lambda)` in seconds.
pub fn mean_wait_in_queue(params: &QueueParams) -> Result<f64> {
    let c = erlang_c_probability(params)?;
    Ok(c / (params.servers as f64 * params.mu - params.lambda))
}

/// The waiting-time expression exactly as it is commonly misprinted:
///
/// `[(rho^c c/c!) / (1 - rho/c)] / [sum_{k<c} rho^k/k! + (rho^c/c!) c mu/(c mu - lambda)]`
///
/// It carries an extra factor `c` relative to the Erlang-C probability and
/// is dimensionless despite being labelled a waiting time. Kept for
/// comparison only; the simulator uses [`mean_wait_in_queue`].
pub fn misprinted_wait_expression(params: &QueueParams) -> Result<f64> {
    params.validate()?;
    let rho = params.rho();
    let c = params.servers as f64;
    // Everything is divided through by rho^c / c!; the sum terms are
    // c! / (k! rho^(c-k)), built downward from k = c.
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in (0..params.servers).rev() {
        term *= (k + 1) as f64 / rho;
        sum += term;
    }
    let tail = c * params.mu / (c * params.mu - params.lambda);
    let numerator = c / (1.0 - rho / c);
    Ok(numerator / (sum + tail))
}

/// Empirical waiting statistics from [`simulate_mmc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcEstimate {
    /// Mean wait in queue over measured customers (seconds).
    pub mean_wait: f64,
    /// Fraction of measured customers that had to wait.
    pub wait_probability: f64,
    /// Batch-means standard error of `mean_wait`.
    pub mean_wait_std_error: f64,
    /// Customers measured after warm-up.
    pub measured: usize,
}

const BATCHES: usize = 20;

/// Fraction of arrivals discarded as warm-up.
pub const WARMUP_FRACTION: f64 = 0.1;

/// FIFO M/M/c simulation: each arrival takes the server that frees up
/// first. Statistics are averaged over customers after discarding the first
/// [`WARMUP_FRACTION`] of arrivals.
pub fn simulate_mmc<R: Rng + ?Sized>(
    params: &QueueParams,
    arrivals: usize,
    rng: &mut R,
) -> Result<MmcEstimate> {
    params.validate()?;
    if arrivals == 0 {
        return Err(QueueError::InvalidParameter(
            "arrivals must be at least 1".into(),
        ));
    }
    let inter = Exp::new(params.lambda).expect("validated rate");
    let service = Exp::new(params.mu).expect("validated rate");
    let warmup = ((arrivals as f64) * WARMUP_FRACTION) as usize;
    let mut free_at = vec![0.0_f64; params.servers as usize];
    let mut now = 0.0;
    let measured = arrivals - warmup;
    let mut batch_sums = [0.0_f64; BATCHES];
    let mut total_wait = 0.0;
    let mut waited = 0usize;
    for i in 0..arrivals {
        now += inter.sample(rng);
        let (slot, &free) = free_at
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one server");
        let wait = (free - now).max(0.0);
        free_at[slot] = now + wait + service.sample(rng);
        if i >= warmup {
            batch_sums[(i - warmup) * BATCHES / measured] += wait;
            total_wait += wait;
            if wait > 0.0 {
                waited += 1;
            }
        }
    }
    let mean_wait = total_wait / measured as f64;
    let batch_len = measured as f64 / BATCHES as f64;
    let spread = batch_sums
        .iter()
        .map(|s| (s / batch_len - mean_wait).powi(2))
        .sum::<f64>()
        / (BATCHES - 1) as f64;
    Ok(MmcEstimate {
        mean_wait,
        mean_wait_std_error: (spread / BATCHES as f64).sqrt(),
        wait_probability: waited as f64 / measured as f64,
        measured,
    })
}

/// Draws a steady-state M/M/c queue wait: zero with probability `1 - C`,
/// otherwise exponential with rate `c mu - lambda`.
pub fn sample_steady_state_wait<R: Rng + ?Sized>(params: &QueueParams, rng: &mut R) -> Result<f64> {
    let c = erlang_c_probability(params)?;
    let rate = params.servers as f64 * params.mu - params.lambda;
    let u: f64 = rng.random();
    if u >= c {
        return Ok(0.0);
    }
    // Conditional on waiting, u / C is uniform on [0, 1).
    Ok(-(1.0 - u / c).ln() / rate)
}

/// Unfinished work of a queue switched on empty at time zero, approximated
/// by reflected Brownian motion with drift `-drift` and infinitesimal
/// variance `variance`.
///
/// Built from an M/M/c queue, the drift is `1 - lambda/(c mu)` and the
/// variance is chosen so that the stationary mean `variance / (2 drift)`
/// equals the Erlang-C `W_q`; for one server this matches M/M/1 exactly.
/// The mean wait grows from zero toward `W_q` over a relaxation time of
/// order `variance / drift^2`, which is what makes latency rise over a run
/// near saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientWorkload {
    pub drift: f64,
    pub variance: f64,
}

impl TransientWorkload {
    pub fn from_queue(params: &QueueParams) -> Result<Self> {
        let wq = mean_wait_in_queue(params)?;
        let drift = 1.0 - params.utilization();
        Ok(TransientWorkload {
            drift,
            variance: 2.0 * drift * wq,
        })
    }

    /// Stationary mean workload `variance / (2 drift)`.
    pub fn stationary_mean(&self) -> f64 {
        self.variance / (2.0 * self.drift)
    }

    /// `P(Z(t) > x)` for the process started at zero.
    pub fn tail(&self, x: f64, t: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if t <= 0.0 {
            return 0.0;
        }
        let s = (self.variance * t).sqrt();
        let m = self.drift;
        let reflected = (-2.0 * m * x / self.variance).exp() * normal_cdf((m * t - x) / s);
        (normal_sf((x + m * t) / s) + reflected).min(1.0)
    }

    /// `E[Z(t)]` for the process started at zero.
    pub fn mean(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let s = (self.variance * t).sqrt();
        let c = self.drift * t.sqrt() / self.variance.sqrt();
        s * (normal_pdf(c) - c * normal_sf(c))
            + self.stationary_mean() * (2.0 * normal_cdf(c) - 1.0)
    }

    /// The `u`-upper quantile of `Z(t)`: the `x` with `P(Z(t) > x) = u`.
    pub fn upper_quantile(&self, u: f64, t: f64) -> f64 {
        if t <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let u = u.max(f64::MIN_POSITIVE);
        let mut hi = self.stationary_mean().max(f64::MIN_POSITIVE);
        while self.tail(hi, t) > u {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid, t) > u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Draws `Z(t)` by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.upper_quantile(1.0 - u, t)
    }
}
