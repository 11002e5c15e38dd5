//! One master seed fans out into stable, independent streams.
//!
//! `derive(master, path)` hashes a path of integer tags into a fresh 64-bit
//! seed through splitmix64 steps. The same path always yields the same seed
//! and different paths yield (for all practical purposes) independent ones,
//! so every (N, replica) chain and every Monte Carlo batch owns a generator
//! that never moves when more runs are added.

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Absorb each tag into the state, squeezing once per tag (and once for the
/// empty path), so `derive(m, &[a])` and `derive(m, &[b])` differ whenever
/// `a != b`, and extending a path never collides with its prefix.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for &tag in path {
        state ^= tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
        out = splitmix64(&mut state);
    }
    out
}
