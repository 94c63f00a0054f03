//! Seeded synthetic shape dataset: hard-edged rectangles and ellipses on a
//! noisy background, with exact binary masks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Map, Mask};
use crate::scalar::Real;

/// One generated image with its ground-truth mask.
#[derive(Debug, Clone)]
pub struct SyntheticSample<T> {
    pub image: Map<T>,
    pub mask: Mask,
    pub id: u64,
}

/// Salient-area fraction bounds enforced by rejection sampling.
pub const AREA_FRACTION: (f64, f64) = (0.05, 0.6);

/// Peak-to-peak amplitude of the uniform pixel noise.
pub const NOISE_AMPLITUDE: f64 = 0.1;

/// Minimum intensity contrast between foreground and background.
pub const MIN_CONTRAST: f64 = 0.3;

fn mix_seed(seed: u64, stream: u64, id: u64) -> u64 {
    // SplitMix64 over the three inputs; stable across platforms.
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(id.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Shape {
    Rect {
        y0: usize,
        x0: usize,
        h: usize,
        w: usize,
    },
    Ellipse {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
    },
}

impl Shape {
    fn contains(&self, y: usize, x: usize) -> bool {
        match *self {
            Shape::Rect { y0, x0, h, w } => y >= y0 && y < y0 + h && x >= x0 && x < x0 + w,
            Shape::Ellipse { cy, cx, ry, rx } => {
                let dy = (y as f64 - cy) / ry;
                let dx = (x as f64 - cx) / rx;
                dy * dy + dx * dx <= 1.0
            }
        }
    }
}

fn draw_shapes(rng: &mut ChaCha8Rng, side: usize) -> Mask {
    let lo = (side / 6).max(2);
    let hi = (side * 2 / 5).max(lo + 1);
    loop {
        let mut mask = Mask::zeros(side, side).expect("side >= 1");
        let n_shapes = rng.random_range(1..=3usize);
        for _ in 0..n_shapes {
            let shape = if rng.random_range(0..2u32) == 0 {
                let h = rng.random_range(lo..=hi);
                let w = rng.random_range(lo..=hi);
                Shape::Rect {
                    y0: rng.random_range(0..side - h + 1),
                    x0: rng.random_range(0..side - w + 1),
                    h,
                    w,
                }
            } else {
                let ry = rng.random_range(lo as f64 / 2.0..=hi as f64 / 2.0);
                let rx = rng.random_range(lo as f64 / 2.0..=hi as f64 / 2.0);
                Shape::Ellipse {
                    cy: rng.random_range(ry..=side as f64 - 1.0 - ry),
                    cx: rng.random_range(rx..=side as f64 - 1.0 - rx),
                    ry,
                    rx,
                }
            };
            for y in 0..side {
                for x in 0..side {
                    if shape.contains(y, x) {
                        mask.set(y, x, 1);
                    }
                }
            }
        }
        let fraction = mask.count_ones() as f64 / (side * side) as f64;
        if (AREA_FRACTION.0..=AREA_FRACTION.1).contains(&fraction) {
            return mask;
        }
    }
}

fn generate_sample<T: Real>(seed: u64, stream: u64, id: u64, side: usize) -> SyntheticSample<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, stream, id));
    let mask = draw_shapes(&mut rng, side);
    let background = rng.random_range(0.1..0.35);
    let contrast = rng.random_range(MIN_CONTRAST + 0.05..0.5);
    let foreground = background + contrast;
    let half_noise = NOISE_AMPLITUDE / 2.0;
    let mut image = Map::zeros(side, side).expect("side >= 1");
    for y in 0..side {
        for x in 0..side {
            let base = if mask.get(y, x) == 1 {
                foreground
            } else {
                background
            };
            let v = (base + rng.random_range(-half_noise..=half_noise)).clamp(0.0, 1.0);
            image.set(y, x, T::from_f64_c(v));
        }
    }
    SyntheticSample { image, mask, id }
}

/// Generate train and test splits, each fully determined by
/// `(seed, side, split, index)`.
pub fn generate_dataset<T: Real>(
    seed: u64,
    side: usize,
    n_train: usize,
    n_test: usize,
) -> (Vec<SyntheticSample<T>>, Vec<SyntheticSample<T>>) {
    let train = (0..n_train as u64)
        .map(|id| generate_sample(seed, 0, id, side))
        .collect();
    let test = (0..n_test as u64)
        .map(|id| generate_sample(seed, 1, id, side))
        .collect();
    (train, test)
}
