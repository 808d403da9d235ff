//! Deterministic random sampling helpers.
//!
//! Every ray owns a fixed window of a ChaCha keystream addressed by
//! `(seed, stream, ray index)`, so results do not depend on how the work is
//! split across threads.

use std::f64::consts::PI;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::scene::Vec3;

/// Keystream words reserved for one ray.
const WORDS_PER_RAY: u128 = 64;

/// Stream identifiers for the different consumers of randomness.
pub mod streams {
    /// Form-factor rays leaving patch `i` use stream `i`.
    pub const PATCH_BASE: u64 = 0;
    pub const VISIBILITY: u64 = 1 << 40;
    pub const SOURCE_BASE: u64 = 2 << 40;
    pub const LISTENER_BASE: u64 = 3 << 40;
    pub const NOISE: u64 = 4 << 40;
    pub const ARNOLDI: u64 = 5 << 40;
}

#[derive(Clone, Debug)]
pub struct RayRng(ChaCha8Rng);

impl RayRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RayRng(rng)
    }

    /// Positions the generator at the start of ray `index`'s window.
    pub fn seek(&mut self, index: u64) {
        self.0.set_word_pos(index as u128 * WORDS_PER_RAY);
    }
}

impl RngCore for RayRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Uniform direction on the unit sphere from two uniforms in `[0, 1)`.
pub fn uniform_sphere(u: f64, v: f64) -> Vec3 {
    let z = 1.0 - 2.0 * u;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * v;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Cosine-weighted direction about `normal`, given a tangent frame.
pub fn cosine_hemisphere(u: f64, v: f64, normal: &Vec3, t1: &Vec3, t2: &Vec3) -> Vec3 {
    let r = u.sqrt();
    let phi = 2.0 * PI * v;
    let h = (1.0 - u).max(0.0).sqrt();
    (t1 * (r * phi.cos()) + t2 * (r * phi.sin()) + normal * h).normalize()
}

/// Jittered stratum for sample `i` of `n` over the unit square.
pub fn stratum(i: usize, n: usize, jitter_u: f64, jitter_v: f64) -> (f64, f64) {
    let g = (n as f64).sqrt().ceil().max(1.0) as usize;
    let cell = i % (g * g);
    let (cu, cv) = (cell % g, cell / g);
    ((cu as f64 + jitter_u) / g as f64, (cv as f64 + jitter_v) / g as f64)
}
