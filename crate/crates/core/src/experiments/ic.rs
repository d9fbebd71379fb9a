//! Seeded initial conditions.
//!
//! Generator (pinned): ChaCha8 seeded with `seed_from_u64(seed)`. Each entry
//! is `2 u - 1` where `u = (next_u64 >> 11) * 2^-53`, so entries lie in
//! `[-1, 1)`. Positions are drawn first (row-major `N x d`), then velocities.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::state::FlockState;

/// Maximum number of draws when a raw sample has zero dispersion.
pub const MAX_RESAMPLE_ATTEMPTS: u32 = 100;

fn unit_interval(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform random configuration on `[-1, 1)^(N d) x [-1, 1)^(N d)`.
pub fn generate_ic(n: usize, dim: usize, seed: u64) -> Result<FlockState> {
    if n == 0 || dim == 0 {
        return Err(invalid("N, d", "must both be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |k: usize| -> Vec<f64> {
        (0..k)
            .map(|_| 2.0 * unit_interval(&mut rng) - 1.0)
            .collect()
    };
    let x = draw(n * dim);
    let v = draw(n * dim);
    FlockState::new(n, dim, x, v)
}

/// Scales positions and velocities so the dispersions become `(x0, v0)`.
/// A zero target collapses that coordinate onto its mean-free part, i.e.
/// every entry becomes zero.
pub fn rescale_ic(raw: &FlockState, x0: f64, v0: f64) -> Result<FlockState> {
    for (name, t) in [("X0", x0), ("V0", v0)] {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid(
                name,
                format!("target must be finite and >= 0, got {t}"),
            ));
        }
    }
    let d = raw.dispersion();
    if d.x <= 0.0 || d.v <= 0.0 {
        return Err(Error::Degenerate(format!(
            "raw configuration has zero dispersion (X = {}, V = {})",
            d.x, d.v
        )));
    }
    let sx = (x0 / d.x).sqrt();
    let sv = (v0 / d.v).sqrt();
    FlockState::new(
        raw.agents(),
        raw.dim(),
        raw.positions().iter().map(|p| p * sx).collect(),
        raw.velocities().iter().map(|p| p * sv).collect(),
    )
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed: `h = splitmix64(master)`, then `h = splitmix64(h ^ k)` for
/// `k` in `[x_index, v_index, sample, attempt]`.
pub fn sub_seed(master: u64, x_index: usize, v_index: usize, sample: usize, attempt: u32) -> u64 {
    [
        x_index as u64,
        v_index as u64,
        sample as u64,
        attempt as u64,
    ]
    .into_iter()
    .fold(splitmix64(master), |h, k| splitmix64(h ^ k))
}

/// Draws and rescales an IC, retrying with the next attempt index on
/// degenerate draws. Returns the state and the seed that produced it.
pub fn sample_ic(
    n: usize,
    dim: usize,
    master: u64,
    cell: (usize, usize),
    sample: usize,
    target: (f64, f64),
) -> Result<(FlockState, u64, u32)> {
    for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
        let seed = sub_seed(master, cell.0, cell.1, sample, attempt);
        let raw = generate_ic(n, dim, seed)?;
        match rescale_ic(&raw, target.0, target.1) {
            Ok(s) => return Ok((s, seed, attempt)),
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Degenerate(format!(
        "no usable draw in {MAX_RESAMPLE_ATTEMPTS} attempts (N = {n}, d = {dim})"
    )))
}
