//! The pseudo-random generator used everywhere randomness is needed.
//!
//! ChaCha8 has a published algorithm and a portable byte stream, so sample
//! streams and augmentation outputs are reproducible across platforms for a
//! given seed.

use rand::SeedableRng;

/// Seedable generator with a stable, cross-platform output stream.
pub type PortableRng = rand_chacha::ChaCha8Rng;

/// Build a [`PortableRng`] from a 64-bit seed.
pub fn seeded(seed: u64) -> PortableRng {
    PortableRng::seed_from_u64(seed)
}
