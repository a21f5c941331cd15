//! Seeded, splittable random streams.
//!
//! A stream is ChaCha20 keyed by the 64-bit master seed, with the ChaCha
//! stream word set to `(domain << 32) | index`. Streams of different
//! domains or indices never overlap, so tiles can be simulated in any order
//! or on any number of threads with bitwise-identical output.
//!
//! Standard normals come from the Box–Muller transform applied to pairs of
//! 53-bit uniforms; both outputs of each pair are used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream families. Mosaic tiles and prototype draws live in different
/// domains so regenerating one never perturbs the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Domain {
    Mosaic = 1,
    Prototype = 2,
    Experiment = 3,
}

pub type StreamRng = ChaCha20Rng;

pub fn stream(seed: u64, domain: Domain, index: u32) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(domain as u32) << 32) | u64::from(index));
    rng
}

/// Two independent standard normals.
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // 1 − U maps [0, 1) onto (0, 1], keeping the log finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Fills `out` with standard normals.
pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = standard_normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = standard_normal_pair(rng).0;
    }
}
