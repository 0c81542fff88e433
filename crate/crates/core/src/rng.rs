//! Counter-keyed random streams: the draws for `(seed, stream, block)` do not
//! depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator positioned at block `block` of stream `stream`. Each block holds
/// `words` 32-bit words; consumers must stay inside their block.
pub fn keyed(seed: u64, stream: u64, block: u64, words: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(block as u128 * words as u128);
    rng
}

/// Words reserved per step for `draws` normal variates.
pub fn block_words(draws: usize) -> u64 {
    (64 * draws as u64).max(256)
}
