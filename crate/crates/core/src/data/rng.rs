use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies an independent random stream.
///
/// A stream is a ChaCha8 generator keyed by `seed` (expanded through
/// `seed_from_u64`) and positioned on the 64-bit ChaCha stream `stream`.
/// Identical `(seed, stream)` pairs always yield identical sequences.
///
/// Sub-streams are derived with [`RngStream::child`], which keeps the seed and
/// replaces the stream id by `splitmix64(stream ⊕ splitmix64(index + φ))`.
/// The engine uses `child(chain)` per imputation chain and the harness uses
/// `child(cell)` per factor combination, so parallel work never shares a
/// generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn child(&self, index: u64) -> Self {
        Self { seed: self.seed, stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(GOLDEN))) }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
