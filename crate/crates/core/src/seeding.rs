//! Stable seed derivation. Only fixed-width integer mixing is used so that
//! derived seeds never depend on the platform or the standard library's hasher.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with any number of salts into a new 64-bit seed.
pub fn derive_seed(base: u64, salts: &[u64]) -> u64 {
    salts
        .iter()
        .fold(splitmix64(base), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}
