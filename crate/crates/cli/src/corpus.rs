//! Seeded synthetic corpus. Real detector features are produced elsewhere
//! and arrive as LTNS files; these generators stand in for them with the
//! two shapes that matter to concealment: smooth correlated noise fields
//! and blob mixtures. Content sits well above zero, like rectified
//! activations, and channels share structure so cross-channel methods
//! have something to exploit.

use latentpatch_core::rng::SplitMix64;
use latentpatch_core::tensor::FeatureTensor;

/// Channels per corpus tensor; 16 tiles to a square 4x4 mosaic with no
/// padding slots.
pub const CORPUS_CHANNELS: usize = 16;
/// Per-channel height and width; the mosaic is 128x128.
pub const CORPUS_DIM: usize = 32;
/// Tensors in the standard corpus, half noise fields, half blob mixtures.
pub const CORPUS_SIZE: usize = 20;

/// One standard Gaussian draw (Box-Muller).
fn gaussian(rng: &mut SplitMix64) -> f64 {
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Smooth random field: a knots x knots grid of Gaussian values upsampled
/// bilinearly. The knot spacing sets the correlation length, so content
/// stays predictable across the 8-row slabs the channel can drop.
fn smooth_field(rng: &mut SplitMix64, rows: usize, cols: usize, knots: usize) -> Vec<f64> {
    let grid: Vec<f64> = (0..knots * knots).map(|_| gaussian(rng)).collect();
    let at = |kr: usize, kc: usize| grid[kr * knots + kc];
    let step = (knots - 1) as f64;
    let mut field = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = r as f64 / (rows - 1) as f64 * step;
        let (kr, fy) = (y.floor() as usize, y.fract());
        let kr1 = (kr + 1).min(knots - 1);
        for c in 0..cols {
            let x = c as f64 / (cols - 1) as f64 * step;
            let (kc, fx) = (x.floor() as usize, x.fract());
            let kc1 = (kc + 1).min(knots - 1);
            let top = at(kr, kc) * (1.0 - fx) + at(kr, kc1) * fx;
            let bot = at(kr1, kc) * (1.0 - fx) + at(kr1, kc1) * fx;
            field.push(top * (1.0 - fy) + bot * fy);
        }
    }
    field
}

/// Correlated noise tensor: every channel is `offset + a·base + b·detail`
/// with a shared base field, so channels agree on the large structure but
/// keep private detail no other channel can predict.
pub fn noise_tensor(seed: u64, channels: usize, dim: usize) -> FeatureTensor {
    let mut rng = SplitMix64::new(seed);
    let knots = (dim / 5).max(2);
    let base = smooth_field(&mut rng, dim, dim, knots);
    let mut per_channel = Vec::with_capacity(channels);
    for _ in 0..channels {
        let a = rng.next_in(0.7, 1.3);
        let b = rng.next_in(0.15, 0.35);
        let detail = smooth_field(&mut rng, dim, dim, knots);
        per_channel.push((a, b, detail));
    }
    FeatureTensor::from_fn(channels, dim, dim, |ch, r, c| {
        let (a, b, detail) = &per_channel[ch];
        (3.0 + 1.2 * (a * base[r * dim + c] + b * detail[r * dim + c])) as f32
    })
    .expect("generator output is finite and nonempty")
}

/// Blob mixture tensor: compact Gaussian bumps with shared
/// centers and widths over a faint channel-private texture; channels
/// light up the same objects with different gains the way detector
/// channels do.
pub fn bump_tensor(seed: u64, channels: usize, dim: usize) -> FeatureTensor {
    let mut rng = SplitMix64::new(seed);
    let bumps = 20;
    let margin = dim as f64 * 0.125;
    let centers: Vec<(f64, f64)> = (0..bumps)
        .map(|_| {
            (
                rng.next_in(margin, dim as f64 - margin),
                rng.next_in(margin, dim as f64 - margin),
            )
        })
        .collect();
    let sigmas: Vec<f64> = (0..bumps)
        .map(|_| rng.next_in(dim as f64 * 0.035, dim as f64 * 0.07))
        .collect();
    let amps: Vec<Vec<f64>> = (0..channels)
        .map(|_| (0..bumps).map(|_| rng.next_in(0.5, 2.0)).collect())
        .collect();
    let knots = (dim / 4).max(2);
    let details: Vec<Vec<f64>> = (0..channels)
        .map(|_| smooth_field(&mut rng, dim, dim, knots))
        .collect();
    FeatureTensor::from_fn(channels, dim, dim, |ch, r, c| {
        let mut v = 1.5 + 0.2 * details[ch][r * dim + c];
        for i in 0..bumps {
            let dy = r as f64 - centers[i].0;
            let dx = c as f64 - centers[i].1;
            let s2 = 2.0 * sigmas[i] * sigmas[i];
            v += amps[ch][i] * (-(dy * dy + dx * dx) / s2).exp();
        }
        v as f32
    })
    .expect("generator output is finite and nonempty")
}

/// The 20-tensor corpus: `noise_00..noise_09` then `bumps_00..bumps_09`,
/// each generated from its own child stream of the master seed.
pub fn standard_corpus(seed: u64) -> Vec<(String, FeatureTensor)> {
    let mut master = SplitMix64::new(seed);
    let mut corpus = Vec::with_capacity(CORPUS_SIZE);
    for i in 0..CORPUS_SIZE / 2 {
        corpus.push((
            format!("noise_{i:02}"),
            noise_tensor(master.next_u64(), CORPUS_CHANNELS, CORPUS_DIM),
        ));
    }
    for i in 0..CORPUS_SIZE / 2 {
        corpus.push((
            format!("bumps_{i:02}"),
            bump_tensor(master.next_u64(), CORPUS_CHANNELS, CORPUS_DIM),
        ));
    }
    corpus
}

/// Benchmark-scale tensor: 256 channels of 64x64, the mosaic is
/// 1024x1024. Blob content, same construction as [`bump_tensor`].
pub fn large_bench_tensor(seed: u64) -> FeatureTensor {
    bump_tensor(seed, 256, 64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_named() {
        let a = standard_corpus(9);
        let b = standard_corpus(9);
        assert_eq!(a.len(), CORPUS_SIZE);
        for ((name_a, t_a), (name_b, t_b)) in a.iter().zip(&b) {
            assert_eq!(name_a, name_b);
            assert_eq!(t_a.data(), t_b.data());
        }
        assert_eq!(a[0].0, "noise_00");
        assert_eq!(a[10].0, "bumps_00");
    }

    #[test]
    fn different_seeds_differ() {
        let a = standard_corpus(1);
        let b = standard_corpus(2);
        assert_ne!(a[0].1.data(), b[0].1.data());
    }

    #[test]
    fn content_sits_above_zero() {
        for (name, tensor) in standard_corpus(5) {
            let mean: f32 =
                tensor.data().iter().sum::<f32>() / tensor.data().len() as f32;
            assert!(mean > 0.5, "{name} mean {mean} too close to zero");
        }
    }

    #[test]
    fn bench_tensor_tiles_to_the_square_mosaic() {
        let t = large_bench_tensor(0);
        assert_eq!((t.channels(), t.height(), t.width()), (256, 64, 64));
    }
}
