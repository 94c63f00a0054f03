//! The connectivity training loss and its pieces, each returning both the
//! scalar value and the analytic gradient with respect to its input.
//!
//! All binary-cross-entropy terms are mean-reduced (per pixel for
//! single-channel inputs, per pixel per channel for 8-channel inputs) so
//! magnitudes are resolution-independent and the default term weights keep
//! their meaning at any image size. Predictions are clamped to
//! `[EPS, 1 - EPS]` before the logarithms; the gradient is defined as zero
//! where the clamp was active.

use crate::codec::extract_edge_mask;
use crate::error::{Error, Result};
use crate::grid::{ConnGrid, Map, Mask};
use crate::ops::{
    aggregate_decoupled, aggregate_decoupled_backward, aggregate_global,
    aggregate_global_backward, bilateral_vote, bilateral_vote_backward,
};
use crate::scalar::Real;

/// Clamp bound applied to predictions before `ln`.
pub const BCE_EPS: f64 = 1e-7;

/// Weights of the two connectivity-consistency terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T> {
    /// Weight of the loss on the raw connectivity map (ω₁).
    pub conmap: T,
    /// Weight of the loss on the bilaterally voted map (ω₂).
    pub bimap: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            conmap: T::from_f64_c(0.8),
            bimap: T::from_f64_c(0.2),
        }
    }
}

impl<T: Real> LossWeights<T> {
    pub fn new(conmap: T, bimap: T) -> Result<Self> {
        for v in [conmap, bimap] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::Config(format!(
                    "loss weights must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self { conmap, bimap })
    }
}

/// Named breakdown of the total loss.
///
/// `total = decouple + conmap_weight * conmap + bimap_weight * bimap + optional`;
/// the `conmap` and `bimap` fields are stored unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub decouple: T,
    pub conmap: T,
    pub bimap: T,
    pub optional: T,
}

/// Unreduced, pre-weighting per-entry loss surfaces of the two
/// consistency terms, kept for visualization.
#[derive(Debug, Clone)]
pub struct LossMaps<T> {
    pub conmap: ConnGrid<T>,
    pub bimap: ConnGrid<T>,
}

impl<T: Real> LossMaps<T> {
    /// Per-pixel surface: channel mean of the per-entry values.
    pub fn conmap_pixels(&self) -> Map<T> {
        self.conmap.channel_mean()
    }

    pub fn bimap_pixels(&self) -> Map<T> {
        self.bimap.channel_mean()
    }
}

struct BceParts<T> {
    loss: T,
    grad: Vec<T>,
    surface: Option<Vec<T>>,
}

/// Mean-reduced BCE over flat slices. Targets must be binary; callers
/// validate shape and binariness at their own boundary.
fn bce_parts<T: Real>(pred: &[T], target: &[T], want_surface: bool) -> BceParts<T> {
    let eps = T::from_f64_c(BCE_EPS);
    let hi = T::one() - eps;
    let n = T::from_count(pred.len());
    let mut sum = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    let mut surface = want_surface.then(|| Vec::with_capacity(pred.len()));
    for (&p, &t) in pred.iter().zip(target) {
        let clamped = p < eps || p > hi;
        let ph = p.max(eps).min(hi);
        let term = -(t * ph.ln() + (T::one() - t) * (T::one() - ph).ln());
        sum += term;
        if let Some(surface) = surface.as_mut() {
            surface.push(term);
        }
        grad.push(if clamped {
            T::zero()
        } else {
            (ph - t) / (ph * (T::one() - ph)) / n
        });
    }
    BceParts {
        loss: sum / n,
        grad,
        surface,
    }
}

fn check_binary_grid<T: Real>(grid: &ConnGrid<T>) -> Result<()> {
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

/// Mean-reduced BCE between a map and a binary mask, with the gradient
/// with respect to the map.
pub fn bce_map<T: Real>(pred: &Map<T>, target: &Mask) -> Result<(T, Map<T>)> {
    target.same_shape(pred.height(), pred.width())?;
    let t = Map::<T>::from_mask(target);
    let parts = bce_parts(pred.data(), t.data(), false);
    Ok((
        parts.loss,
        Map::from_vec(pred.height(), pred.width(), parts.grad)?,
    ))
}

/// Mean-reduced BCE between two 8-channel grids (the target must be
/// binary), with the gradient with respect to `pred`.
pub fn bce_grid<T: Real>(pred: &ConnGrid<T>, target: &ConnGrid<T>) -> Result<(T, ConnGrid<T>)> {
    target.same_shape(pred.height(), pred.width())?;
    check_binary_grid(target)?;
    let parts = bce_parts(pred.data(), target.data(), false);
    Ok((
        parts.loss,
        ConnGrid::from_vec(pred.height(), pred.width(), parts.grad)?,
    ))
}

/// Edge-decoupled loss: BCE between the edge-decoupled aggregation of the
/// voted grid and the saliency ground truth. Returns the loss and its
/// gradient with respect to `bicon`.
///
/// At edge pixels (which are salient by definition) the per-pixel term
/// equals `bce(min over channels, 0)`: pressure toward a genuinely
/// disconnected direction instead of an all-ones vector.
pub fn decouple_loss<T: Real>(
    bicon: &ConnGrid<T>,
    edges: &Mask,
    saliency_gt: &Mask,
) -> Result<(T, ConnGrid<T>)> {
    edges.same_shape(bicon.height(), bicon.width())?;
    saliency_gt.same_shape(bicon.height(), bicon.width())?;
    let inconsistent = edges
        .data()
        .iter()
        .zip(saliency_gt.data())
        .filter(|&(&e, &s)| e == 1 && s == 0)
        .count();
    if inconsistent > 0 {
        return Err(Error::InconsistentEdges {
            count: inconsistent,
        });
    }
    let decoupled = aggregate_decoupled(bicon, edges)?;
    let (loss, grad_map) = bce_map(&decoupled, saliency_gt)?;
    let grad = aggregate_decoupled_backward(bicon, edges, &grad_map);
    Ok((loss, grad))
}

/// Result of [`connectivity_consistency_loss`].
#[derive(Debug, Clone)]
pub struct ConsistencyLoss<T> {
    /// Weighted sum `conmap_weight * conmap + bimap_weight * bimap`.
    pub weighted: T,
    /// Unweighted BCE on the raw connectivity map.
    pub conmap: T,
    /// Unweighted BCE on the voted map.
    pub bimap: T,
    /// Gradient with respect to the raw connectivity map.
    pub grad: ConnGrid<T>,
    /// Per-entry surfaces, present unless suppressed for speed.
    pub maps: Option<LossMaps<T>>,
}

/// Weighted BCE on both the raw connectivity map and its voted
/// counterpart. The caller supplies `bicon = bilateral_vote(conn)` to
/// avoid recomputation; the bimap gradient chains back through the voting
/// step onto `conn`.
pub fn connectivity_consistency_loss<T: Real>(
    conn: &ConnGrid<T>,
    bicon: &ConnGrid<T>,
    conn_gt: &ConnGrid<T>,
    weights: &LossWeights<T>,
) -> Result<ConsistencyLoss<T>> {
    consistency_inner(conn, bicon, conn_gt, weights, true)
}

fn consistency_inner<T: Real>(
    conn: &ConnGrid<T>,
    bicon: &ConnGrid<T>,
    conn_gt: &ConnGrid<T>,
    weights: &LossWeights<T>,
    want_maps: bool,
) -> Result<ConsistencyLoss<T>> {
    conn_gt.same_shape(conn.height(), conn.width())?;
    bicon.same_shape(conn.height(), conn.width())?;
    check_binary_grid(conn_gt)?;

    let (h, w) = (conn.height(), conn.width());
    let con_parts = bce_parts(conn.data(), conn_gt.data(), want_maps);
    let bi_parts = bce_parts(bicon.data(), conn_gt.data(), want_maps);

    let bi_upstream = ConnGrid::from_vec(h, w, bi_parts.grad)?;
    let bi_grad = bilateral_vote_backward(conn, &bi_upstream);
    let mut grad = ConnGrid::from_vec(h, w, con_parts.grad)?;
    for (g, &b) in grad.data_mut().iter_mut().zip(bi_grad.data()) {
        *g = weights.conmap * *g + weights.bimap * b;
    }

    let maps = match (con_parts.surface, bi_parts.surface) {
        (Some(con_surface), Some(bi_surface)) => Some(LossMaps {
            conmap: ConnGrid::from_vec(h, w, con_surface)?,
            bimap: ConnGrid::from_vec(h, w, bi_surface)?,
        }),
        _ => None,
    };
    Ok(ConsistencyLoss {
        weighted: weights.conmap * con_parts.loss + weights.bimap * bi_parts.loss,
        conmap: con_parts.loss,
        bimap: bi_parts.loss,
        grad,
        maps,
    })
}

/// Caller-supplied extra loss on the aggregated saliency map; returns the
/// scalar loss and its gradient with respect to the map.
pub type LossHook<'a, T> = &'a dyn Fn(&Map<T>, &Mask) -> (T, Map<T>);

/// Result of [`bicon_total_loss`].
#[derive(Debug, Clone)]
pub struct TotalLoss<T> {
    pub breakdown: LossBreakdown<T>,
    /// Gradient of the total with respect to the raw connectivity map.
    pub grad: ConnGrid<T>,
}

/// The full training loss: edge-decoupled term plus weighted consistency
/// terms plus an optional hook evaluated on the aggregated global map.
///
/// `conn_gt` is the encoded ground-truth grid of `saliency_gt`; the edge
/// mask is derived from it internally.
pub fn bicon_total_loss<T: Real>(
    conn: &ConnGrid<T>,
    conn_gt: &ConnGrid<T>,
    saliency_gt: &Mask,
    weights: &LossWeights<T>,
    hook: Option<LossHook<'_, T>>,
) -> Result<TotalLoss<T>> {
    conn_gt.same_shape(conn.height(), conn.width())?;
    saliency_gt.same_shape(conn.height(), conn.width())?;

    let bicon = bilateral_vote(conn)?;
    let edges = extract_edge_mask(conn_gt)?;

    let (decouple, decouple_grad_bicon) = decouple_loss(&bicon, &edges, saliency_gt)?;
    let consistency = consistency_inner(conn, &bicon, conn_gt, weights, false)?;

    // Everything that differentiates through the voted grid is summed
    // first, then chained back through the voting step once.
    let mut bicon_upstream = decouple_grad_bicon;
    let (optional, optional_grad_map) = match hook {
        Some(f) => {
            let global = aggregate_global(&bicon);
            let (value, grad_map) = f(&global, saliency_gt);
            (value, Some(grad_map))
        }
        None => (T::zero(), None),
    };
    if let Some(grad_map) = optional_grad_map {
        let g = aggregate_global_backward(&grad_map);
        for (acc, &v) in bicon_upstream.data_mut().iter_mut().zip(g.data()) {
            *acc += v;
        }
    }
    let through_bv = bilateral_vote_backward(conn, &bicon_upstream);

    let mut grad = consistency.grad.clone();
    for (g, &v) in grad.data_mut().iter_mut().zip(through_bv.data()) {
        *g += v;
    }

    let total = decouple + consistency.weighted + optional;
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    Ok(TotalLoss {
        breakdown: LossBreakdown {
            total,
            decouple,
            conmap: consistency.conmap,
            bimap: consistency.bimap,
            optional,
        },
        grad,
    })
}
