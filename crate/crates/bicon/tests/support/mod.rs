//! Shared test support: brute-force oracles that apply the definitions
//! literally (independent of the library's implementation paths), a
//! central-difference gradient checker, and seeded instance generators.

#![allow(dead_code)]

use bicon::codec::{pair_lookup, OFFSETS};
use bicon::grid::{ConnGrid, Map, Mask, CHANNELS};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random binary mask with the given salient-pixel probability.
pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Mask {
    let data = (0..h * w)
        .map(|_| (rng.random_range(0.0..1.0) < density) as u8)
        .collect();
    Mask::new(h, w, data).expect("non-empty")
}

/// Remove salient pixels with no salient mirrored neighbor until none are
/// left (removals can create new isolated pixels).
pub fn strip_isolated(mask: &Mask) -> Mask {
    let mut m = mask.clone();
    loop {
        let mut removed = false;
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(y, x) == 1 && !has_salient_neighbor(&m, y, x) {
                    m.set(y, x, 0);
                    removed = true;
                }
            }
        }
        if !removed {
            return m;
        }
    }
}

fn mirror(i: i64, n: usize) -> usize {
    if i < 0 {
        (-i - 1) as usize
    } else if i as usize >= n {
        2 * n - 1 - i as usize
    } else {
        i as usize
    }
}

fn has_salient_neighbor(m: &Mask, y: usize, x: usize) -> bool {
    OFFSETS.iter().any(|&(dy, dx)| {
        m.get(
            mirror(y as i64 + dy as i64, m.height()),
            mirror(x as i64 + dx as i64, m.width()),
        ) == 1
    })
}

/// Encode oracle: loop over every (pixel, direction) pair and apply the
/// definition literally.
pub fn encode_oracle(mask: &Mask) -> ConnGrid<f64> {
    let (h, w) = (mask.height(), mask.width());
    let mut grid = ConnGrid::zeros(h, w).unwrap();
    for y in 0..h {
        for x in 0..w {
            for (c, &(dy, dx)) in OFFSETS.iter().enumerate() {
                let ny = mirror(y as i64 + dy as i64, h);
                let nx = mirror(x as i64 + dx as i64, w);
                if mask.get(y, x) == 1 && mask.get(ny, nx) == 1 {
                    grid.set(y, x, c, 1.0);
                }
            }
        }
    }
    grid
}

/// Decode oracle: a pixel is salient when any channel is 1.
pub fn decode_oracle(grid: &ConnGrid<f64>) -> Mask {
    let (h, w) = (grid.height(), grid.width());
    let mut m = Mask::zeros(h, w).unwrap();
    for y in 0..h {
        for x in 0..w {
            if grid.vector(y, x).contains(&1.0) {
                m.set(y, x, 1);
            }
        }
    }
    m
}

/// Edge oracle: min over channels < max over channels.
pub fn edge_oracle(grid: &ConnGrid<f64>) -> Mask {
    let (h, w) = (grid.height(), grid.width());
    let mut m = Mask::zeros(h, w).unwrap();
    for y in 0..h {
        for x in 0..w {
            let v = grid.vector(y, x);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                m.set(y, x, 1);
            }
        }
    }
    m
}

/// Bilateral-voting oracle: evaluate the pair product independently at
/// every entry.
pub fn bv_oracle(conn: &ConnGrid<f64>) -> ConnGrid<f64> {
    let (h, w) = (conn.height(), conn.width());
    let mut out = ConnGrid::zeros(h, w).unwrap();
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                let (py, px, pc) = pair_lookup(h, w, y, x, c);
                out.set(y, x, c, conn.get(y, x, c) * conn.get(py, px, pc));
            }
        }
    }
    out
}

/// Per-pixel aggregation oracles.
pub fn global_oracle(bicon: &ConnGrid<f64>) -> Map<f64> {
    let (h, w) = (bicon.height(), bicon.width());
    let mut out = Map::zeros(h, w).unwrap();
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for c in 0..CHANNELS {
                s += bicon.get(y, x, c);
            }
            out.set(y, x, s / 8.0);
        }
    }
    out
}

pub fn decoupled_oracle(bicon: &ConnGrid<f64>, edges: &Mask) -> Map<f64> {
    let (h, w) = (bicon.height(), bicon.width());
    let mut out = Map::zeros(h, w).unwrap();
    for y in 0..h {
        for x in 0..w {
            let v = bicon.vector(y, x);
            let value = if edges.get(y, x) == 1 {
                1.0 - v.iter().cloned().fold(f64::INFINITY, f64::min)
            } else {
                v.iter().sum::<f64>() / 8.0
            };
            out.set(y, x, value);
        }
    }
    out
}

/// Scalar-loop BCE oracle: mean of the clamped cross-entropy terms.
pub fn bce_oracle(pred: &[f64], target: &[f64]) -> f64 {
    let eps = 1e-7;
    let mut sum = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        let ph = p.clamp(eps, 1.0 - eps);
        sum += -(t * ph.ln() + (1.0 - t) * (1.0 - ph).ln());
    }
    sum / pred.len() as f64
}

/// Metric oracles: explicit per-pixel loops.
pub fn mae_oracle(pred: &Map<f64>, gt: &Mask) -> f64 {
    let mut sum = 0.0;
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            sum += (pred.get(y, x) - gt.get(y, x) as f64).abs();
        }
    }
    sum / (pred.height() * pred.width()) as f64
}

fn oracle_binarize(pred: &Map<f64>) -> Vec<bool> {
    let mut mean = 0.0;
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            mean += pred.get(y, x);
        }
    }
    mean /= (pred.height() * pred.width()) as f64;
    let t = (2.0 * mean).min(1.0);
    let mut out = Vec::new();
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            let v = pred.get(y, x);
            out.push(v >= t && v > 0.0);
        }
    }
    out
}

pub fn f_measure_oracle(pred: &Map<f64>, gt: &Mask) -> f64 {
    let binary = oracle_binarize(pred);
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fng = 0.0;
    for (i, &b) in binary.iter().enumerate() {
        let g = gt.data()[i] == 1;
        if b && g {
            tp += 1.0;
        } else if b && !g {
            fp += 1.0;
        } else if !b && g {
            fng += 1.0;
        }
    }
    if tp + fp == 0.0 || tp + fng == 0.0 {
        return 0.0;
    }
    let p = tp / (tp + fp);
    let r = tp / (tp + fng);
    let denom = 0.3 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        1.3 * p * r / denom
    }
}

pub fn e_measure_oracle(pred: &Map<f64>, gt: &Mask) -> f64 {
    let binary = oracle_binarize(pred);
    let n = binary.len() as f64;
    let gt_ones = gt.count_ones();
    if gt_ones == 0 {
        return binary.iter().filter(|&&b| !b).count() as f64 / n;
    }
    if gt_ones == binary.len() {
        return binary.iter().filter(|&&b| b).count() as f64 / n;
    }
    let mean_g = gt_ones as f64 / n;
    let mean_b = binary.iter().filter(|&&b| b).count() as f64 / n;
    let mut sum = 0.0;
    for (i, &b) in binary.iter().enumerate() {
        let phi_g = gt.data()[i] as f64 - mean_g;
        let phi_b = (b as u8) as f64 - mean_b;
        let xi = 2.0 * phi_g * phi_b / (phi_g * phi_g + phi_b * phi_b + 1e-8);
        sum += 0.25 * (1.0 + xi) * (1.0 + xi);
    }
    sum / n
}

/// Central finite differences of a scalar function over a flat input
/// vector.
pub fn finite_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Relative-error comparison used by every gradient check: relative where
/// the gradients are meaningfully sized, absolute below `floor`.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Random grid with entries in [lo, hi]; keeps values away from clamp
/// boundaries and, with distinct-valued vectors, away from min ties.
pub fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> ConnGrid<f64> {
    let data = (0..h * w * CHANNELS)
        .map(|_| rng.random_range(lo..hi))
        .collect();
    ConnGrid::from_vec(h, w, data).expect("non-empty")
}

pub fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> Map<f64> {
    let data = (0..h * w).map(|_| rng.random_range(lo..hi)).collect();
    Map::from_vec(h, w, data).expect("non-empty")
}

/// True when some pixel's channel minimum is tied (within eps), which
/// the decoupled-aggregation subgradient tests must avoid.
pub fn has_min_tie(grid: &ConnGrid<f64>, eps: f64) -> bool {
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let v = grid.vector(y, x);
            let mut sorted = v.to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted[1] - sorted[0] < eps {
                return true;
            }
        }
    }
    false
}
