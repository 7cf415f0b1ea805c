//! MQTT QoS delivery semantics.
//!
//! QoS 2 is modelled as a five-state chain S1 (idle) -> S2 (PUBLISH sent) ->
//! S3 (PUBREC received) -> S4 (PUBREL sent) -> S5 (PUBCOMP received), where
//! each leg succeeds with its own probability. Two readings of the chain are
//! available: the literal column-stochastic matrix (including the restart
//! entry S5 -> S1 and the leaky fifth column) and the retry chain used by
//! the simulator (failures self-loop, successes advance, S5 absorbs).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QosError {
    #[error("invalid QoS parameter: {0}")]
    InvalidParameter(String),
    #[error("reliability undefined: all leg success probabilities are zero")]
    UndefinedReliability,
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),
}

pub type Result<T> = std::result::Result<T, QosError>;

/// Per-leg success probabilities of the QoS 2 handshake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosChainParams {
    /// PUBLISH leg
    pub alpha: f64,
    /// PUBREC leg
    pub beta: f64,
    /// PUBREL leg
    pub gamma: f64,
    /// PUBCOMP leg
    pub delta: f64,
}

impl QosChainParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = QosChainParams {
            alpha,
            beta,
            gamma,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(p: f64) -> Result<Self> {
        Self::new(p, p, p, p)
    }

    pub fn legs(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in ["alpha", "beta", "gamma", "delta"].iter().zip(self.legs()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(QosError::InvalidParameter(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QosState {
    Idle,
    PublishSent,
    PubrecReceived,
    PubrelSent,
    PubcompReceived,
}

impl QosState {
    pub const ALL: [QosState; 5] = [
        QosState::Idle,
        QosState::PublishSent,
        QosState::PubrecReceived,
        QosState::PubrelSent,
        QosState::PubcompReceived,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<QosState> {
        QosState::ALL.get(self.index() + 1).copied()
    }
}

/// Distribution over the five handshake states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; 5]);

impl StateVector {
    pub fn start() -> Self {
        StateVector([1.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn get(&self, s: QosState) -> f64 {
        self.0[s.index()]
    }
}

/// Column-stochastic transition matrix: `p[to][from]`, so `pi' = P pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix(pub [[f64; 5]; 5]);

impl TransitionMatrix {
    pub fn apply(&self, pi: &StateVector) -> StateVector {
        let mut out = [0.0; 5];
        for (row, o) in self.0.iter().zip(out.iter_mut()) {
            *o = row.iter().zip(pi.0.iter()).map(|(p, x)| p * x).sum();
        }
        StateVector(out)
    }

    pub fn column_sum(&self, col: usize) -> f64 {
        self.0.iter().map(|row| row[col]).sum()
    }
}

/// The literal five-state matrix: diagonal `(1-a, 1-b, 1-g, 1-d, 0)`,
/// subdiagonal `(a, b, g, d)` and `P[S1][S5] = d`.
pub fn build_transition_matrix(params: &QosChainParams) -> Result<TransitionMatrix> {
    params.validate()?;
    let legs = params.legs();
    let mut p = [[0.0; 5]; 5];
    for (i, &q) in legs.iter().enumerate() {
        p[i][i] = 1.0 - q;
        p[i + 1][i] = q;
    }
    p[0][4] = params.delta;
    Ok(TransitionMatrix(p))
}

/// The retry chain: failures self-loop, successes advance, S5 absorbs.
pub fn build_retry_chain_matrix(params: &QosChainParams) -> Result<TransitionMatrix> {
    let mut m = build_transition_matrix(params)?;
    m.0[0][4] = 0.0;
    m.0[4][4] = 1.0;
    Ok(m)
}

/// Closed-form reliability `abgd / (1 - (1-a)(1-b)(1-g)(1-d))`.
pub fn reliability(params: &QosChainParams) -> Result<f64> {
    params.validate()?;
    let legs = params.legs();
    let num: f64 = legs.iter().product();
    let fail: f64 = legs.iter().map(|p| 1.0 - p).product();
    let den = 1.0 - fail;
    if den <= 0.0 {
        return Err(QosError::UndefinedReliability);
    }
    Ok(num / den)
}

/// How to read the five-state chain when computing absorption in S5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSemantics {
    /// The printed matrix, iterated verbatim. Column 5 leaks mass, so the
    /// iterate is renormalized each step and the result is the S5 share of
    /// the limiting (quasi-stationary) distribution.
    LiteralMatrix,
    /// Failures self-loop, successes advance, S5 is absorbing.
    RetryChain,
}

pub const POWER_ITERATION_CAP: usize = 1_000_000;
const CONVERGENCE_TOL: f64 = 1e-10;

/// Probability of ending in S5 when starting from S1.
pub fn chain_absorption_probability(
    params: &QosChainParams,
    semantics: ChainSemantics,
) -> Result<f64> {
    params.validate()?;
    match semantics {
        ChainSemantics::RetryChain => {
            // Back-substitution on a_i = q_i a_{i+1} + (1 - q_i) a_i, a_5 = 1:
            // a_i = a_{i+1} when q_i > 0, and a_i = 0 when S_i is a trap.
            let a = params
                .legs()
                .iter()
                .rev()
                .fold(1.0, |a, &q| if q > 0.0 { a } else { 0.0 });
            Ok(a)
        }
        ChainSemantics::LiteralMatrix => {
            let m = build_transition_matrix(params)?;
            let mut pi = StateVector::start();
            for _ in 0..POWER_ITERATION_CAP {
                let next = m.apply(&pi);
                let total = next.total();
                if total <= 0.0 {
                    return Ok(0.0);
                }
                let next = StateVector(next.0.map(|x| x / total));
                let delta = next
                    .0
                    .iter()
                    .zip(pi.0.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                pi = next;
                if delta < CONVERGENCE_TOL {
                    return Ok(pi.get(QosState::PubcompReceived));
                }
            }
            Err(QosError::NonConvergence(POWER_ITERATION_CAP))
        }
    }
}

/// The state vector after `steps` applications of the literal matrix,
/// without renormalization.
pub fn literal_trajectory(params: &QosChainParams, steps: usize) -> Result<StateVector> {
    let m = build_transition_matrix(params)?;
    let mut pi = StateVector::start();
    for _ in 0..steps {
        pi = m.apply(&pi);
    }
    Ok(pi)
}

/// Result of one message delivery attempt sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HandshakeOutcome {
    pub delivered: bool,
    /// Transmissions made, including retries.
    pub legs_attempted: u32,
    /// One-way message legs consumed for latency accounting.
    pub latency_legs: u32,
    /// Failed transmissions that were retried.
    pub retries: u32,
}

/// Drives a chain of `legs` sequential legs. `trial(leg, attempt)` reports
/// whether a single transmission succeeds; each failed leg is retried up to
/// `max_retries_per_leg` times and every transmission costs one latency leg.
pub fn walk_legs<F>(legs: usize, max_retries_per_leg: u32, mut trial: F) -> HandshakeOutcome
where
    F: FnMut(usize, u32) -> bool,
{
    let mut out = HandshakeOutcome::default();
    for leg in 0..legs {
        let mut attempt = 0;
        loop {
            out.legs_attempted += 1;
            out.latency_legs += 1;
            if trial(leg, attempt) {
                break;
            }
            if attempt >= max_retries_per_leg {
                return out;
            }
            attempt += 1;
            out.retries += 1;
        }
    }
    out.delivered = true;
    out
}

/// Monte-Carlo QoS 2 handshake S1 -> S5 with Bernoulli legs.
pub fn simulate_handshake<R: Rng + ?Sized>(
    params: &QosChainParams,
    max_retries_per_leg: u32,
    rng: &mut R,
) -> HandshakeOutcome {
    let legs = params.legs();
    walk_legs(4, max_retries_per_leg, |leg, _| {
        rng.random::<f64>() < legs[leg]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum QosLevel {
    AtMostOnce,
    AtLeastOnce,
    ExactlyOnce,
}

impl QosLevel {
    /// Message legs in one successful exchange.
    pub fn legs(self) -> usize {
        match self {
            QosLevel::AtMostOnce => 1,
            QosLevel::AtLeastOnce => 2,
            QosLevel::ExactlyOnce => 4,
        }
    }
}

impl TryFrom<u8> for QosLevel {
    type Error = QosError;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(QosLevel::AtMostOnce),
            1 => Ok(QosLevel::AtLeastOnce),
            2 => Ok(QosLevel::ExactlyOnce),
            other => Err(QosError::InvalidParameter(format!(
                "QoS level must be 0, 1 or 2, got {other}"
            ))),
        }
    }
}

impl From<QosLevel> for u8 {
    fn from(l: QosLevel) -> u8 {
        match l {
            QosLevel::AtMostOnce => 0,
            QosLevel::AtLeastOnce => 1,
            QosLevel::ExactlyOnce => 2,
        }
    }
}

/// Delivers one message at the given QoS level using `trial` for each
/// transmission.
///
/// QoS 0 is a single unacknowledged leg. QoS 1 is PUBLISH + PUBACK; a lost
/// PUBLISH or PUBACK triggers a full retransmission of the pair, and every
/// attempt costs two latency legs. QoS 2 walks the four-leg handshake.
pub fn deliver_with<F>(level: QosLevel, max_retries_per_leg: u32, mut trial: F) -> HandshakeOutcome
where
    F: FnMut(usize, u32) -> bool,
{
    match level {
        QosLevel::AtMostOnce => {
            let ok = trial(0, 0);
            HandshakeOutcome {
                delivered: ok,
                legs_attempted: 1,
                latency_legs: 1,
                retries: 0,
            }
        }
        QosLevel::AtLeastOnce => {
            let mut out = HandshakeOutcome::default();
            for attempt in 0..=max_retries_per_leg {
                out.latency_legs += 2;
                out.legs_attempted += 1;
                let published = trial(0, attempt);
                let acked = published && {
                    out.legs_attempted += 1;
                    trial(1, attempt)
                };
                if acked {
                    out.delivered = true;
                    return out;
                }
                if attempt < max_retries_per_leg {
                    out.retries += 1;
                }
            }
            out
        }
        QosLevel::ExactlyOnce => walk_legs(4, max_retries_per_leg, trial),
    }
}

/// Default retry budget per leg.
pub const DEFAULT_MAX_RETRIES_PER_LEG: u32 = 8;

/// Delivery at `level` with every leg succeeding with `leg_success_prob`;
/// QoS 2 uses the per-leg probabilities in `params` instead.
pub fn qos_delivery<R: Rng + ?Sized>(
    level: u8,
    leg_success_prob: f64,
    params: &QosChainParams,
    rng: &mut R,
) -> Result<HandshakeOutcome> {
    let level = QosLevel::try_from(level)?;
    if !(0.0..=1.0).contains(&leg_success_prob) {
        return Err(QosError::InvalidParameter(format!(
            "leg success probability must be in [0, 1], got {leg_success_prob}"
        )));
    }
    Ok(match level {
        QosLevel::ExactlyOnce => simulate_handshake(params, DEFAULT_MAX_RETRIES_PER_LEG, rng),
        other => deliver_with(other, DEFAULT_MAX_RETRIES_PER_LEG, |_, _| {
            rng.random::<f64>() < leg_success_prob
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn p(a: f64, b: f64, g: f64, d: f64) -> QosChainParams {
        QosChainParams::new(a, b, g, d).unwrap()
    }

    #[test]
    fn matrix_all_ones() {
        let m = build_transition_matrix(&p(1.0, 1.0, 1.0, 1.0)).unwrap().0;
        for i in 0..5 {
            assert_eq!(m[i][i], 0.0);
        }
        for i in 0..4 {
            assert_eq!(m[i + 1][i], 1.0);
        }
        assert_eq!(m[0][4], 1.0);
    }

    #[test]
    fn matrix_all_zeros() {
        let m = build_transition_matrix(&p(0.0, 0.0, 0.0, 0.0)).unwrap().0;
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j && i < 4 { 1.0 } else { 0.0 };
                assert_eq!(v, want, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn matrix_half_alpha() {
        let m = build_transition_matrix(&p(0.5, 1.0, 1.0, 1.0)).unwrap().0;
        assert_eq!(m[0][0], 0.5);
        assert_eq!(m[1][0], 0.5);
    }

    #[test]
    fn matrix_columns() {
        let m = build_transition_matrix(&p(0.3, 0.77, 0.123, 0.9)).unwrap();
        for c in 0..4 {
            assert!((m.column_sum(c) - 1.0).abs() <= 1e-15);
        }
        assert!((m.column_sum(4) - 0.9).abs() <= 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(QosChainParams::new(1.5, 1.0, 1.0, 1.0).is_err());
        assert!(QosChainParams::new(0.5, -0.1, 1.0, 1.0).is_err());
        assert!(QosChainParams::new(0.5, 0.5, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn reliability_examples() {
        assert_eq!(reliability(&p(1.0, 1.0, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(reliability(&p(0.3, 0.4, 0.5, 0.0)).unwrap(), 0.0);
        let r = reliability(&QosChainParams::uniform(0.9).unwrap()).unwrap();
        assert!((r - 0.6561 / 0.9999).abs() < 1e-15);
        assert!((r - 0.656_166).abs() < 1e-6);
        assert_eq!(
            reliability(&p(0.0, 0.0, 0.0, 0.0)),
            Err(QosError::UndefinedReliability)
        );
    }

    #[test]
    fn retry_chain_absorption() {
        let rc = ChainSemantics::RetryChain;
        assert_eq!(
            chain_absorption_probability(&p(0.1, 0.2, 0.3, 0.4), rc).unwrap(),
            1.0
        );
        assert_eq!(
            chain_absorption_probability(&p(0.9, 0.9, 0.9, 0.0), rc).unwrap(),
            0.0
        );
        assert_eq!(
            chain_absorption_probability(&p(0.0, 1.0, 1.0, 1.0), rc).unwrap(),
            0.0
        );
    }

    #[test]
    fn retry_chain_matches_power_iteration() {
        let params = p(0.3, 0.6, 0.2, 0.8);
        let m = build_retry_chain_matrix(&params).unwrap();
        let mut pi = StateVector::start();
        for _ in 0..2000 {
            pi = m.apply(&pi);
        }
        let want = chain_absorption_probability(&params, ChainSemantics::RetryChain).unwrap();
        assert!((pi.get(QosState::PubcompReceived) - want).abs() < 1e-10);
    }

    /// For equal legs q the literal matrix's dominant eigenvalue solves
    /// lambda (lambda - (1 - q))^4 = q^5, and the eigenvector follows by
    /// substitution.
    fn literal_quasi_stationary_oracle(q: f64) -> f64 {
        let f = |l: f64| l * (l - (1.0 - q)).powi(4) - q.powi(5);
        let (mut lo, mut hi) = (1.0 - q, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let l = 0.5 * (lo + hi);
        let r = q / (l - (1.0 - q));
        let v = [1.0, r, r * r, r * r * r, r * r * r * q / l];
        v[4] / v.iter().sum::<f64>()
    }

    #[test]
    fn literal_matrix_differs_from_closed_form() {
        let params = QosChainParams::uniform(0.9).unwrap();
        let lit = chain_absorption_probability(&params, ChainSemantics::LiteralMatrix).unwrap();
        let oracle = literal_quasi_stationary_oracle(0.9);
        assert!((lit - oracle).abs() < 1e-8, "{lit} vs {oracle}");
        let closed = reliability(&params).unwrap();
        assert!((lit - closed).abs() > 0.1);
    }

    #[test]
    fn literal_matrix_cycle_does_not_converge() {
        let params = p(1.0, 1.0, 1.0, 1.0);
        assert_eq!(
            chain_absorption_probability(&params, ChainSemantics::LiteralMatrix),
            Err(QosError::NonConvergence(POWER_ITERATION_CAP))
        );
    }

    #[test]
    fn literal_trajectory_leaks_mass() {
        let params = QosChainParams::uniform(0.9).unwrap();
        let pi = literal_trajectory(&params, 50).unwrap();
        assert!(pi.total() < 1.0);
        assert!(pi.0.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn handshake_examples() {
        let mut rng = RngStream::new(1, 1);
        let out = simulate_handshake(&p(1.0, 1.0, 1.0, 1.0), 8, &mut rng);
        assert_eq!(
            out,
            HandshakeOutcome {
                delivered: true,
                legs_attempted: 4,
                latency_legs: 4,
                retries: 0
            }
        );
        let out = simulate_handshake(&p(0.0, 1.0, 1.0, 1.0), 0, &mut rng);
        assert!(!out.delivered);
        assert_eq!(out.legs_attempted, 1);
    }

    #[test]
    fn retries_exhausted_counts() {
        let out = walk_legs(4, 3, |leg, _| leg != 2);
        assert!(!out.delivered);
        assert_eq!(out.legs_attempted, 2 + 4);
        assert_eq!(out.retries, 3);
    }

    #[test]
    fn qos_levels() {
        let mut rng = RngStream::new(2, 2);
        let params = QosChainParams::uniform(1.0).unwrap();
        let o0 = qos_delivery(0, 1.0, &params, &mut rng).unwrap();
        assert!(o0.delivered && o0.latency_legs == 1);
        let o1 = qos_delivery(1, 1.0, &params, &mut rng).unwrap();
        assert!(o1.delivered && o1.latency_legs == 2 && o1.legs_attempted == 2);
        assert!(qos_delivery(3, 1.0, &params, &mut rng).is_err());
        let o0 = qos_delivery(0, 0.0, &params, &mut rng).unwrap();
        assert!(!o0.delivered && o0.latency_legs == 1);
    }

    #[test]
    fn qos2_delegates_to_handshake() {
        let params = p(0.7, 0.8, 0.6, 0.9);
        let mut a = RngStream::new(11, 4);
        let mut b = RngStream::new(11, 4);
        for _ in 0..200 {
            let x = qos_delivery(2, 0.0, &params, &mut a).unwrap();
            let y = simulate_handshake(&params, DEFAULT_MAX_RETRIES_PER_LEG, &mut b);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn qos1_retransmits_pairs() {
        // first PUBACK lost, second attempt succeeds
        let mut calls = vec![];
        let out = deliver_with(QosLevel::AtLeastOnce, 8, |leg, attempt| {
            calls.push((leg, attempt));
            !(leg == 1 && attempt == 0)
        });
        assert!(out.delivered);
        assert_eq!(out.latency_legs, 4);
        assert_eq!(out.legs_attempted, 4);
        assert_eq!(out.retries, 1);
        assert_eq!(calls, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
    }
}
