//! Conversion between saliency masks and 8-channel connectivity grids.
//!
//! # Direction convention
//!
//! Channels are stored 0-based in row-major neighbor order; channel `c`
//! holds the connection toward offset `OFFSETS[c] = (dy, dx)`:
//!
//! ```text
//! c=0 (-1,-1)   c=1 (-1, 0)   c=2 (-1,+1)
//! c=3 ( 0,-1)                 c=4 ( 0,+1)
//! c=5 (+1,-1)   c=6 (+1, 0)   c=7 (+1,+1)
//! ```
//!
//! The opposite direction of channel `c` is `7 - c` (in the 1-based
//! numbering used in prose elsewhere, channel `j`'s opposite is `9 - j`).
//!
//! # Border handling
//!
//! Out-of-bounds neighbor coordinates reflect across the image border
//! (coordinate −1 maps to 0, `n` maps to `n − 1`). Reflection acts on the
//! whole grid, so it also reverses direction channels along each mirrored
//! axis: the mirror image of a downward connection seen across the top
//! border is an upward connection. With that rule [`pair_lookup`] is an
//! involution everywhere, and a border entry whose partner reflects back
//! onto itself forms a self-pair.

use crate::error::{Error, Result};
use crate::grid::{ConnGrid, Mask, CHANNELS};
use crate::scalar::Real;

/// Neighbor offsets `(dy, dx)` per channel, row-major.
pub const OFFSETS: [(i32, i32); CHANNELS] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Channel pointing in the opposite direction.
#[inline]
pub const fn opposite(c: usize) -> usize {
    CHANNELS - 1 - c
}

/// Channel whose offset is `(dy, dx)`.
#[inline]
fn channel_of(dy: i32, dx: i32) -> usize {
    match (dy, dx) {
        (-1, -1) => 0,
        (-1, 0) => 1,
        (-1, 1) => 2,
        (0, -1) => 3,
        (0, 1) => 4,
        (1, -1) => 5,
        (1, 0) => 6,
        (1, 1) => 7,
        _ => unreachable!("not a neighbor offset"),
    }
}

/// Reflect coordinate `i` into `0..n`; valid for offsets of at most one.
#[inline]
fn mirror(i: i32, n: usize) -> usize {
    if i < 0 {
        (-i - 1) as usize
    } else if i as usize >= n {
        2 * n - 1 - i as usize
    } else {
        i as usize
    }
}

/// The grid entry paired with `(y, x, c)`: the reverse-direction entry at
/// the neighbor `c` points to, with mirror reflection applied to
/// out-of-bounds coordinates (reflection reverses the direction along each
/// mirrored axis).
///
/// `pair_lookup` is an involution; an entry may be its own pair at a
/// border (then `(y, x, c)` is returned unchanged).
pub fn pair_lookup(
    height: usize,
    width: usize,
    y: usize,
    x: usize,
    c: usize,
) -> (usize, usize, usize) {
    let (dy, dx) = OFFSETS[c];
    let ny = y as i32 + dy;
    let nx = x as i32 + dx;
    // Opposite channel, reflected along every axis the coordinate mirrors on.
    let (mut ody, mut odx) = OFFSETS[opposite(c)];
    if ny < 0 || ny as usize >= height {
        ody = -ody;
    }
    if nx < 0 || nx as usize >= width {
        odx = -odx;
    }
    (mirror(ny, height), mirror(nx, width), channel_of(ody, odx))
}

/// Encode a binary saliency mask as an 8-channel connectivity grid.
///
/// Entry `(y, x, c)` is 1 exactly when the pixel is salient and its
/// (mirror-reflected) neighbor in direction `c` is salient too; background
/// pixels get all-zero vectors.
pub fn encode_connectivity<T: Real>(mask: &Mask) -> ConnGrid<T> {
    let (h, w) = (mask.height(), mask.width());
    let mut grid = ConnGrid::zeros(h, w).expect("mask is non-empty");
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) == 0 {
                continue;
            }
            for (c, &(dy, dx)) in OFFSETS.iter().enumerate() {
                let ny = mirror(y as i32 + dy, h);
                let nx = mirror(x as i32 + dx, w);
                if mask.get(ny, nx) == 1 {
                    grid.set(y, x, c, T::one());
                }
            }
        }
    }
    grid
}

/// Salient pixels with no salient mirrored neighbor.
///
/// Such pixels encode to all-zero vectors and cannot be recovered by
/// [`decode_connectivity`]; callers use the count as a diagnostic.
pub fn isolated_pixel_count(mask: &Mask) -> usize {
    let (h, w) = (mask.height(), mask.width());
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) == 0 {
                continue;
            }
            let connected = OFFSETS.iter().any(|&(dy, dx)| {
                mask.get(mirror(y as i32 + dy, h), mirror(x as i32 + dx, w)) == 1
            });
            if !connected {
                count += 1;
            }
        }
    }
    count
}

/// Decode a binary connectivity grid back to a saliency mask: a pixel is
/// salient when any channel records an agreed connection.
pub fn decode_connectivity<T: Real>(grid: &ConnGrid<T>) -> Result<Mask> {
    reject_non_binary(grid)?;
    let (h, w) = (grid.height(), grid.width());
    let mut mask = Mask::zeros(h, w)?;
    for y in 0..h {
        for x in 0..w {
            if grid.vector(y, x).iter().any(|&v| v == T::one()) {
                mask.set(y, x, 1);
            }
        }
    }
    Ok(mask)
}

/// Edge pixels of a binary connectivity grid: pixels whose vector mixes
/// zeros and ones (`min < max`).
pub fn extract_edge_mask<T: Real>(grid: &ConnGrid<T>) -> Result<Mask> {
    reject_non_binary(grid)?;
    let (h, w) = (grid.height(), grid.width());
    let mut mask = Mask::zeros(h, w)?;
    for y in 0..h {
        for x in 0..w {
            let v = grid.vector(y, x);
            let lo = v.iter().cloned().fold(T::infinity(), T::min);
            let hi = v.iter().cloned().fold(T::neg_infinity(), T::max);
            if lo < hi {
                mask.set(y, x, 1);
            }
        }
    }
    Ok(mask)
}

fn reject_non_binary<T: Real>(grid: &ConnGrid<T>) -> Result<()> {
    let count = grid
        .data()
        .iter()
        .filter(|&&v| v != T::zero() && v != T::one())
        .count();
    if count > 0 {
        return Err(Error::NotBinary { count });
    }
    Ok(())
}
