//! Bilateral voting and region-guided channel aggregation, each with a
//! forward evaluation and an analytic vector-Jacobian product.
//!
//! Both forwards are per-entry local; the backwards are exact gradients of
//! the forwards (the edge branch of the decoupled aggregation uses the
//! lowest-index argmin subgradient).

use crate::codec::pair_lookup;
use crate::error::{Error, Result};
use crate::grid::{ConnGrid, Map, Mask, CHANNELS};
use crate::scalar::Real;

/// Bilateral voting: every entry becomes the product of the two members of
/// its connectivity pair, turning unidirectional connection probabilities
/// into agreed bidirectional ones.
///
/// The output is pair-consistent and never exceeds the input elementwise;
/// binary pair-consistent grids are fixed points. Self-paired border
/// entries square themselves.
pub fn bilateral_vote<T: Real>(conn: &ConnGrid<T>) -> Result<ConnGrid<T>> {
    if let Some((index, value)) = conn.first_out_of_range() {
        return Err(Error::OutOfRange {
            index,
            value: value.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(bilateral_vote_unchecked(conn))
}

pub(crate) fn bilateral_vote_unchecked<T: Real>(conn: &ConnGrid<T>) -> ConnGrid<T> {
    let (h, w) = (conn.height(), conn.width());
    let mut out = ConnGrid::zeros(h, w).expect("non-empty");
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

/// Gradient of [`bilateral_vote`] with respect to its input.
///
/// The product lands in both members of a pair, so each entry collects the
/// upstream of both: `grad[p] = (up[p] + up[pair(p)]) * conn[pair(p)]`.
/// Self-paired border entries reduce to the derivative of the square,
/// `2 * up[p] * conn[p]`.
pub fn bilateral_vote_backward<T: Real>(
    conn: &ConnGrid<T>,
    upstream: &ConnGrid<T>,
) -> ConnGrid<T> {
    let (h, w) = (conn.height(), conn.width());
    debug_assert!(upstream.same_shape(h, w).is_ok());
    let mut grad = ConnGrid::zeros(h, w).expect("non-empty");
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                let (py, px, pc) = pair_lookup(h, w, y, x, c);
                let g = (upstream.get(y, x, c) + upstream.get(py, px, pc))
                    * conn.get(py, px, pc);
                grad.set(y, x, c, g);
            }
        }
    }
    grad
}

/// Channel-mean aggregation: the overall connection probability of each
/// pixel, used as the saliency prediction at inference.
pub fn aggregate_global<T: Real>(bicon: &ConnGrid<T>) -> Map<T> {
    bicon.channel_mean()
}

/// Gradient of [`aggregate_global`]: the upstream spreads evenly over the
/// 8 channels.
pub fn aggregate_global_backward<T: Real>(upstream: &Map<T>) -> ConnGrid<T> {
    let inv = T::one() / T::from_count(CHANNELS);
    let mut grad = ConnGrid::zeros(upstream.height(), upstream.width()).expect("non-empty");
    for (chunk, &u) in grad
        .data_mut()
        .chunks_exact_mut(CHANNELS)
        .zip(upstream.data())
    {
        chunk.fill(u * inv);
    }
    grad
}

/// Edge-decoupled aggregation: `1 - min` over channels at edge pixels
/// (spotlighting the most likely disconnected direction), channel mean
/// elsewhere. `edges` comes from the ground-truth grid of the same image.
pub fn aggregate_decoupled<T: Real>(bicon: &ConnGrid<T>, edges: &Mask) -> Result<Map<T>> {
    edges.same_shape(bicon.height(), bicon.width())?;
    let (h, w) = (bicon.height(), bicon.width());
    let n = T::from_count(CHANNELS);
    let mut out = Map::zeros(h, w)?;
    for y in 0..h {
        for x in 0..w {
            let v = bicon.vector(y, x);
            let value = if edges.get(y, x) == 1 {
                T::one() - v.iter().cloned().fold(T::infinity(), T::min)
            } else {
                v.iter().fold(T::zero(), |a, &b| a + b) / n
            };
            out.set(y, x, value);
        }
    }
    Ok(out)
}

/// Gradient of [`aggregate_decoupled`].
///
/// Edge pixels route the negated upstream entirely to the argmin channel
/// (lowest index on ties, so runs are reproducible); non-edge pixels
/// spread it evenly.
pub fn aggregate_decoupled_backward<T: Real>(
    bicon: &ConnGrid<T>,
    edges: &Mask,
    upstream: &Map<T>,
) -> ConnGrid<T> {
    let (h, w) = (bicon.height(), bicon.width());
    debug_assert!(edges.same_shape(h, w).is_ok());
    debug_assert!(upstream.same_shape(h, w).is_ok());
    let inv = T::one() / T::from_count(CHANNELS);
    let mut grad = ConnGrid::zeros(h, w).expect("non-empty");
    for y in 0..h {
        for x in 0..w {
            let u = upstream.get(y, x);
            if edges.get(y, x) == 1 {
                let v = bicon.vector(y, x);
                let mut arg = 0;
                for c in 1..CHANNELS {
                    if v[c] < v[arg] {
                        arg = c;
                    }
                }
                grad.set(y, x, arg, -u);
            } else {
                for c in 0..CHANNELS {
                    grad.set(y, x, c, u * inv);
                }
            }
        }
    }
    grad
}
