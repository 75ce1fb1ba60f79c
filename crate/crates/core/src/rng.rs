//! Seed splitting. One master seed fans out into independent ChaCha streams,
//! so each player's randomness does not depend on scheduling or on what the
//! other players draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ENV_STREAM: u64 = 0;

pub fn substream(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

pub fn player_stream(player: usize) -> u64 {
    1 + 2 * player as u64
}

pub fn cluster_stream(player: usize) -> u64 {
    2 + 2 * player as u64
}
