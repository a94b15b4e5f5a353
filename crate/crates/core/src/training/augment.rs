//! Data augmentation: each original image yields three synthetic 64x64
//! variants — a random 56x56 crop resized back, a rotation within ±15° and a
//! horizontal flip. The RNG is derived from the run seed and the sample id,
//! so augmentation is reproducible and order-independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Sample, IMAGE_SIDE};
use crate::hash::fnv1a64;
use crate::imgproc;

const CROP_SIDE: usize = 56;
const MAX_ROTATION_DEG: f64 = 15.0;

fn per_channel(image: &[f32], channels: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f32> {
    let plane = IMAGE_SIDE * IMAGE_SIDE;
    let mut out = Vec::with_capacity(channels * plane);
    for c in 0..channels {
        let src: Vec<f64> = image[c * plane..(c + 1) * plane].iter().map(|&v| v as f64).collect();
        out.extend(f(&src).iter().map(|&v| v as f32));
    }
    out
}

/// The three synthetic variants of one sample, labels and pose tags
/// untouched.
pub fn augment_sample(sample: &Sample, run_seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed ^ fnv1a64(sample.id.as_bytes()));
    let max_off = IMAGE_SIDE - CROP_SIDE;
    let (x0, y0) = (rng.gen_range(0..=max_off), rng.gen_range(0..=max_off));
    let angle = rng.gen_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG).to_radians();

    let cropped = per_channel(&sample.image, sample.channels, |src| {
        let window = imgproc::crop(src, IMAGE_SIDE, IMAGE_SIDE, x0, y0, CROP_SIDE, CROP_SIDE);
        imgproc::resize_bilinear(&window, CROP_SIDE, CROP_SIDE, IMAGE_SIDE, IMAGE_SIDE)
    });
    let rotated = per_channel(&sample.image, sample.channels, |src| {
        imgproc::rotate_bilinear(src, IMAGE_SIDE, IMAGE_SIDE, angle)
    });
    let flipped = per_channel(&sample.image, sample.channels, |src| imgproc::hflip(src, IMAGE_SIDE, IMAGE_SIDE));

    [("crop", cropped), ("rot", rotated), ("flip", flipped)]
        .into_iter()
        .map(|(tag, image)| Sample { id: format!("{}#{tag}", sample.id), image, ..sample.clone() })
        .collect()
}

/// Originals plus their three variants: a pool of size 4M.
pub fn build_training_pool(samples: &[Sample], run_seed: u64) -> Vec<Sample> {
    let mut pool = Vec::with_capacity(samples.len() * 4);
    for s in samples {
        pool.push(s.clone());
        pool.extend(augment_sample(s, run_seed));
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Pose, Split};

    fn sample(id: &str) -> Sample {
        let image: Vec<f32> = (0..64 * 64).map(|i| ((i * 7919) % 1000) as f32 / 999.0).collect();
        Sample { id: id.into(), channels: 1, image, label: 4, pose: Pose::Deg(45), split: Split::Train }
    }

    #[test]
    fn pool_is_four_times_the_input() {
        let samples: Vec<Sample> = (0..5).map(|i| sample(&format!("s{i}"))).collect();
        let pool = build_training_pool(&samples, 7);
        assert_eq!(pool.len(), 20);
    }

    #[test]
    fn labels_poses_and_range_survive() {
        let s = sample("a");
        for aug in augment_sample(&s, 1) {
            assert_eq!(aug.label, 4);
            assert_eq!(aug.pose, Pose::Deg(45));
            assert_eq!(aug.image.len(), 64 * 64);
            assert!(aug.image.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn augmentation_is_reproducible_per_seed() {
        let s = sample("a");
        let a = augment_sample(&s, 5);
        let b = augment_sample(&s, 5);
        let c = augment_sample(&s, 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.image != y.image));
    }

    #[test]
    fn flip_variant_is_the_exact_mirror() {
        let s = sample("a");
        let augs = augment_sample(&s, 3);
        let flipped = &augs[2];
        for y in 0..64 {
            for x in 0..64 {
                assert_eq!(flipped.image[y * 64 + x], s.image[y * 64 + (63 - x)]);
            }
        }
    }
}
