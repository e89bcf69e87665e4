//! Synthetic screen-content generators for tests and benchmarks.
//!
//! Produces images made of a smoothly varying background (a bounded random
//! combination of low-frequency cosines) with text-like strokes stamped on
//! top at a known luminance offset, together with the exact stroke mask.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisMatrix;
use crate::io::GrayImage;
use crate::segment::Mask;

/// A generated image with its ground-truth foreground mask.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: GrayImage,
    pub truth: Mask,
}

/// Smooth background plus `strokes` text-like strokes at offsets of at least
/// `min_offset` luminance levels. Deterministic in `seed`.
pub fn smooth_with_strokes(
    width: usize,
    height: usize,
    strokes: usize,
    min_offset: f64,
    seed: u64,
) -> SynthImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = smooth_background(width, height, &mut rng);
    let mut bits = vec![false; width * height];
    for _ in 0..strokes {
        stamp_stroke(&mut data, &mut bits, width, height, min_offset, &mut rng);
    }
    SynthImage {
        image: GrayImage::new(width, height, data).expect("generator stays in range"),
        truth: Mask::new(width, height, bits).expect("mask matches image"),
    }
}

/// Background only: the same smooth field with an empty truth mask.
pub fn smooth_only(width: usize, height: usize, seed: u64) -> SynthImage {
    smooth_with_strokes(width, height, 0, 0.0, seed)
}

/// An image whose every `n x n` block is an exact combination of the first
/// `k` zig-zag DCT bases, so least-squares fitting reproduces it perfectly.
/// Blocks are never flat. Use dimensions that are multiples of `n`; partial
/// blocks are padded by replication and lose exactness. Deterministic in
/// `seed`.
pub fn blockwise_smooth(width: usize, height: usize, n: usize, k: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = BasisMatrix::build(n, k).expect("valid generator parameters");
    let mut data = vec![0.0; width * height];
    let block_rows = height.div_ceil(n);
    let block_cols = width.div_ceil(n);
    for br in 0..block_rows {
        for bc in 0..block_cols {
            // DC sets the level; one low-frequency AC term guarantees the
            // block is not flat while staying well inside [0, 255].
            let level: f64 = rng.random_range(90.0..170.0);
            let mut alpha = vec![0.0; k];
            alpha[0] = level / basis.column(0)[0];
            let j = rng.random_range(1..k);
            alpha[j] = rng.random_range(10.0..40.0);
            let block = basis.reconstruct(&alpha);
            for r in 0..n {
                let row = br * n + r;
                if row >= height {
                    break;
                }
                for c in 0..n {
                    let col = bc * n + c;
                    if col >= width {
                        break;
                    }
                    data[row * width + col] = block[r * n + c].clamp(0.0, 255.0);
                }
            }
        }
    }
    GrayImage::new(width, height, data).expect("generator stays in range")
}

fn smooth_background(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let level: f64 = rng.random_range(90.0..170.0);
    // A handful of low-frequency terms over the full image; amplitudes sum
    // to at most ~60 so the field stays within [30, 225] around the level.
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let amp = rng.random_range(3.0..15.0);
            let fu = rng.random_range(0.0..2.5);
            let fv = rng.random_range(0.0..2.5);
            let pu = rng.random_range(0.0..PI);
            let pv = rng.random_range(0.0..PI);
            (amp, fu, fv, pu, pv)
        })
        .collect();
    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let mut v = level;
            for &(amp, fu, fv, pu, pv) in &terms {
                let a = (row as f64 / height as f64 * PI * fu + pu).cos();
                let b = (col as f64 / width as f64 * PI * fv + pv).cos();
                v += amp * a * b;
            }
            data.push(v.clamp(0.0, 255.0));
        }
    }
    data
}

fn stamp_stroke(
    data: &mut [f64],
    bits: &mut [bool],
    width: usize,
    height: usize,
    min_offset: f64,
    rng: &mut ChaCha8Rng,
) {
    let horizontal = rng.random_bool(0.5);
    let thickness = rng.random_range(1..=2usize);
    let length = rng.random_range(6..=30usize);
    let row0 = rng.random_range(0..height);
    let col0 = rng.random_range(0..width);
    let offset = min_offset + rng.random_range(0.0..40.0);
    for t in 0..thickness {
        for l in 0..length {
            let (row, col) = if horizontal {
                (row0 + t, col0 + l)
            } else {
                (row0 + l, col0 + t)
            };
            if row >= height || col >= width {
                continue;
            }
            let i = row * width + col;
            if bits[i] {
                continue; // already stamped; restamping would shrink the offset
            }
            // Push toward whichever extreme keeps the full offset in range.
            data[i] = if data[i] < 128.0 {
                (data[i] + offset).min(255.0)
            } else {
                (data[i] - offset).max(0.0)
            };
            bits[i] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{extract_blocks, is_flat};

    #[test]
    fn generation_is_deterministic() {
        let a = smooth_with_strokes(128, 128, 10, 60.0, 7);
        let b = smooth_with_strokes(128, 128, 10, 60.0, 7);
        assert_eq!(a.image, b.image);
        assert_eq!(a.truth.bits(), b.truth.bits());
    }

    #[test]
    fn strokes_are_separated_from_the_background() {
        let s = smooth_with_strokes(128, 128, 12, 60.0, 3);
        let bg = smooth_only(128, 128, 3);
        assert!(s.truth.foreground_count() > 0);
        for i in 0..s.image.data().len() {
            if s.truth.bits()[i] {
                let delta = (s.image.data()[i] - bg.image.data()[i]).abs();
                assert!(delta >= 59.0, "stroke pixel {i} offset {delta}");
            } else {
                assert_eq!(s.image.data()[i], bg.image.data()[i]);
            }
        }
    }

    #[test]
    fn blockwise_smooth_blocks_fit_exactly_and_are_not_flat() {
        let img = blockwise_smooth(128, 128, 64, 10, 11);
        let basis = BasisMatrix::build(64, 10).unwrap();
        let (_, _, blocks) = extract_blocks(&img, 64);
        for block in &blocks {
            assert!(!is_flat(block));
            let alpha = basis.project_coeffs(block.pixels());
            let fit = basis.reconstruct(&alpha);
            let err = block
                .pixels()
                .iter()
                .zip(&fit)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-9, "block {:?} err {err}", block.origin());
        }
    }
}
