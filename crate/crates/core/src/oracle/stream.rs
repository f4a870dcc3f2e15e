use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream owned by one repetition.
///
/// Besides the generator it counts how many samples were drawn, so every
/// [`SampleToken`](super::SampleToken) carries its position in the stream.
#[derive(Debug, Clone)]
pub struct SampleStream {
    rng: ChaCha8Rng,
    draws: u64,
}

impl SampleStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Independent stream `stream_id` of the same key. ChaCha streams with
    /// different ids never overlap, so e.g. sampling and output selection
    /// can be separated without perturbing each other.
    pub fn substream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng, draws: 0 }
    }

    pub(crate) fn next_draw_index(&mut self) -> u64 {
        let i = self.draws;
        self.draws += 1;
        i
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Uniform index in `0..n`.
    pub fn uniform_index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}
