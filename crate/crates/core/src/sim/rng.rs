//! Replication streams.
//!
//! Every run uses ChaCha8 seeded from the master seed, with the replication
//! index selecting the stream. Streams are independent and a replication's
//! draws do not depend on how many threads run the batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
