//! Child-seed derivation.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the run `(repetition, grid_index)` under `master`. Each input
/// passes through its own mixing round, so swapping repetition and grid
/// index gives a different seed.
pub fn child_seed(master: u64, repetition: u64, grid_index: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ repetition.wrapping_mul(GOLDEN));
    splitmix64(h ^ grid_index.rotate_left(32))
}
