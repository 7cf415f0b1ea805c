//! Discrete-event simulation of an industrial IoT sensor network publishing
//! MQTT-style traffic over faded wireless links, together with the channel,
//! QoS, queueing and round-trip models it is built from.

pub mod channel;
pub mod qos;
pub mod queueing;
pub mod report;
pub mod rng;
pub mod rtt;
pub mod sim;
pub mod special;
pub mod stats;
