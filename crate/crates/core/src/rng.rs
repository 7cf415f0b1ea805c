//! Seeded, splittable random streams.
//!
//! Every random draw in the simulator comes from an [`RngStream`] identified
//! by a `(seed, stream_id)` pair. Stream ids are derived from structured keys
//! (node, tick, packet, leg, ...) with [`StreamKey`], so adding a node or a
//! packet never shifts the draws seen by any other node or packet.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builder for hierarchical stream identifiers.
///
/// ```
/// use iiot_netsim::rng::StreamKey;
/// let a = StreamKey::new(1).with(3).with(7).id();
/// let b = StreamKey::new(1).with(3).with(8).id();
/// assert_ne!(a, b);
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(domain: u64) -> Self {
        StreamKey(mix64(domain ^ 0x5EED_0000_0000_0000))
    }

    pub fn with(self, component: u64) -> Self {
        StreamKey(mix64(self.0.rotate_left(17) ^ mix64(component)))
    }

    pub fn id(self) -> u64 {
        self.0
    }
}

/// A deterministic random stream: ChaCha8 keyed by `seed`, with the ChaCha
/// stream counter set to `stream_id`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn from_key(seed: u64, key: StreamKey) -> Self {
        Self::new(seed, key.id())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream, keyed off this stream's id.
    pub fn substream(&self, component: u64) -> RngStream {
        RngStream::new(
            self.seed,
            mix64(self.stream_id.rotate_left(29) ^ mix64(component)),
        )
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
