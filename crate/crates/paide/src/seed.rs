//! Deterministic derivation of independent RNG streams from one base seed.

/// SplitMix64 finalizer; decorrelates nearby inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for the sub-stream identified by `path` under `base`.
///
/// Distinct paths give independent streams; the same path always gives the
/// same stream.
pub(crate) fn derive(base: u64, path: &[u64]) -> u64 {
    let mut state = mix(base);
    for p in path {
        state = mix(state ^ mix(*p));
    }
    state
}
