//! Seeded random modal data with level-appropriate scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cascade::{CascadeState, CascadeSystem};
use crate::spectral::SpectralField;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian pair `(u, u')` with `e_level(u, u')` of order one:
/// `a_j ~ λ_j^{-level/2}`, `b_j ~ λ_j^{-(level-1)/2}`.
pub fn random_component(rng: &mut impl Rng, modes: usize, length: f64, level: i32) -> (SpectralField, SpectralField) {
    let scale = 1.0 / (modes as f64).sqrt();
    let mut pos = SpectralField::zeros(modes, length);
    let mut vel = SpectralField::zeros(modes, length);
    for k in 0..modes {
        let lam = crate::spectral::eigenvalue_unchecked(k + 1, length);
        let gp: f64 = rng.sample(StandardNormal);
        let gv: f64 = rng.sample(StandardNormal);
        pos.coeffs_mut()[k] = scale * gp * lam.powf(-0.5 * level as f64);
        vel.coeffs_mut()[k] = scale * gv * lam.powf(-0.5 * (level - 1) as f64);
    }
    (pos, vel)
}

/// Random state with component `i` drawn at `levels[i]` where `support[i]`
/// holds, zero elsewhere.
pub fn random_state(rng: &mut impl Rng, sys: &CascadeSystem, levels: &[i32], support: &[bool]) -> CascadeState {
    let mut state = sys.zero_state();
    for i in 0..sys.components() {
        let (u, v) = random_component(rng, sys.modes(), sys.length(), levels[i]);
        if support[i] {
            state.positions[i] = u;
            state.velocities[i] = v;
        }
    }
    state
}
