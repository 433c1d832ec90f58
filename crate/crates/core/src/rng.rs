//! Counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha stream keyed by the run
//! seed and selected by `(client, iteration)`, so results never depend on
//! the order in which clients are evaluated or on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Client ids at or above this value are reserved for auxiliary streams.
pub const MAX_CLIENTS: u32 = 1 << 23;
const ITER_BITS: u32 = 40;

/// Non-client consumers of randomness within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data = 0,
    Partition = 1,
    Init = 2,
    TestData = 3,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_for(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

fn stream(seed: u64, slot: u32, iteration: u64) -> ChaCha12Rng {
    assert!(iteration < 1 << ITER_BITS, "iteration {iteration} exceeds stream counter range");
    let mut rng = ChaCha12Rng::from_seed(key_for(seed));
    rng.set_stream(((slot as u64) << ITER_BITS) | iteration);
    rng
}

/// Stream for one client at one iteration. Distinct `(client, iteration)`
/// pairs map to distinct ChaCha stream ids under the same key.
pub fn rng_stream(seed: u64, client: usize, iteration: u64) -> ChaCha12Rng {
    assert!(client < MAX_CLIENTS as usize, "client id {client} out of range");
    stream(seed, client as u32, iteration)
}

pub fn aux_stream(seed: u64, purpose: Purpose) -> ChaCha12Rng {
    stream(seed, MAX_CLIENTS + purpose as u32, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(mut rng: ChaCha12Rng) -> [u64; 4] {
        [rng.random(), rng.random(), rng.random(), rng.random()]
    }

    #[test]
    fn reproducible() {
        assert_eq!(draws(rng_stream(7, 3, 11)), draws(rng_stream(7, 3, 11)));
    }

    #[test]
    fn distinct_clients_and_iterations_differ() {
        let base = draws(rng_stream(7, 3, 11));
        let other_client = draws(rng_stream(7, 4, 11));
        let other_iter = draws(rng_stream(7, 3, 12));
        let other_seed = draws(rng_stream(8, 3, 11));
        for other in [other_client, other_iter, other_seed] {
            assert!(base.iter().zip(&other).all(|(a, b)| a != b));
        }
        assert_ne!(draws(aux_stream(7, Purpose::Data)), draws(aux_stream(7, Purpose::Partition)));
    }
}
