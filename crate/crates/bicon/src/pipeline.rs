//! End-to-end training, inference, and the ablation / weight-sweep
//! harnesses over the synthetic dataset.
//!
//! Runs are pure functions of `(seed, config)`: dataset generation, model
//! initialization, and batch shuffling all derive from the config seed,
//! and gradient accumulation uses a fixed order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::encode_connectivity;
use crate::config::{TrainConfig, TrainVariant};
use crate::dataset::{generate_dataset, SyntheticSample};
use crate::error::{Error, Result};
use crate::grid::Map;
use crate::loss::{
    bce_grid, bce_map, bicon_total_loss, decouple_loss, LossWeights,
};
use crate::metrics::{evaluate_pair, MetricReport};
use crate::model::{HeadVariant, ModelOutput, Tensors, ToyModel};
use crate::ops::{
    aggregate_global, aggregate_global_backward, bilateral_vote, bilateral_vote_backward,
};
use crate::scalar::Real;

/// Global-norm bound applied to averaged batch gradients before the
/// momentum update. Without it, momentum buildup over long epochs can
/// saturate the hidden layers into a constant-output basin.
pub const GRAD_CLIP_NORM: f64 = 1.0;

/// Everything needed to continue (or inspect) a training run.
pub struct TrainState<T> {
    pub model: ToyModel<T>,
    pub velocity: Tensors<T>,
    pub epochs_done: usize,
    /// Mean per-sample loss of each finished epoch.
    pub epoch_losses: Vec<T>,
    /// Mean loss of every batch, in execution order.
    pub batch_losses: Vec<T>,
}

impl<T: Real> TrainState<T> {
    pub fn fresh(cfg: &TrainConfig) -> Self {
        let head = match cfg.variant {
            TrainVariant::SaliencyBaseline => HeadVariant::Saliency,
            _ => HeadVariant::Connectivity,
        };
        let model = ToyModel::init(cfg.seed, head);
        let velocity = model.zeros_like();
        Self {
            model,
            velocity,
            epochs_done: 0,
            epoch_losses: Vec::new(),
            batch_losses: Vec::new(),
        }
    }
}

/// Loss value and gradient with respect to the model output for one sample.
fn sample_loss<T: Real>(
    variant: TrainVariant,
    output: ModelOutput<T>,
    sample: &SyntheticSample<T>,
    weights: &LossWeights<T>,
) -> Result<(T, ModelOutput<T>)> {
    match variant {
        TrainVariant::SaliencyBaseline => {
            let map = match output {
                ModelOutput::Saliency(m) => m,
                ModelOutput::Conn(_) => {
                    return Err(Error::VariantMismatch("baseline expects a saliency head"))
                }
            };
            let (loss, grad) = bce_map(&map, &sample.mask)?;
            Ok((loss, ModelOutput::Saliency(grad)))
        }
        TrainVariant::ConnOnly => {
            let conn = output.into_conn()?;
            let gt = encode_connectivity::<T>(&sample.mask);
            let (loss, grad) = bce_grid(&conn, &gt)?;
            Ok((loss, ModelOutput::Conn(grad)))
        }
        TrainVariant::ConnBvGlobal => {
            // Raw-map BCE plus BCE on the voted global map, summed.
            let conn = output.into_conn()?;
            let gt = encode_connectivity::<T>(&sample.mask);
            let (conmap_loss, mut grad) = bce_grid(&conn, &gt)?;
            let bicon = bilateral_vote(&conn)?;
            let global = aggregate_global(&bicon);
            let (global_loss, global_grad) = bce_map(&global, &sample.mask)?;
            let chained =
                bilateral_vote_backward(&conn, &aggregate_global_backward(&global_grad));
            for (g, &c) in grad.data_mut().iter_mut().zip(chained.data()) {
                *g += c;
            }
            Ok((conmap_loss + global_loss, ModelOutput::Conn(grad)))
        }
        TrainVariant::ConnBvRca => {
            // Raw-map BCE plus the edge-decoupled term.
            let conn = output.into_conn()?;
            let gt = encode_connectivity::<T>(&sample.mask);
            let edges = crate::codec::extract_edge_mask(&gt)?;
            let (conmap_loss, mut grad) = bce_grid(&conn, &gt)?;
            let bicon = bilateral_vote(&conn)?;
            let (dec_loss, dec_grad) = decouple_loss(&bicon, &edges, &sample.mask)?;
            let chained = bilateral_vote_backward(&conn, &dec_grad);
            for (g, &c) in grad.data_mut().iter_mut().zip(chained.data()) {
                *g += c;
            }
            Ok((conmap_loss + dec_loss, ModelOutput::Conn(grad)))
        }
        TrainVariant::FullBicon => {
            let conn = output.into_conn()?;
            let gt = encode_connectivity::<T>(&sample.mask);
            let out = bicon_total_loss(&conn, &gt, &sample.mask, weights, None)?;
            Ok((out.breakdown.total, ModelOutput::Conn(out.grad)))
        }
    }
}

fn shuffled_indices(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(0xA5A5),
    );
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Advance a training state up to `cfg.epochs`.
///
/// `on_epoch` observes `(epoch_index, mean_loss)` after each epoch.
pub fn train_epochs<T: Real>(
    cfg: &TrainConfig,
    state: &mut TrainState<T>,
    mut on_epoch: impl FnMut(usize, T),
) -> Result<()> {
    cfg.validate()?;
    let weights = LossWeights {
        conmap: T::from_f64_c(cfg.w1),
        bimap: T::from_f64_c(cfg.w2),
    };
    let (train_set, _) = generate_dataset::<T>(cfg.seed, cfg.image_size, cfg.n_train, 1);
    let lr = T::from_f64_c(cfg.learning_rate);
    let mu = T::from_f64_c(cfg.momentum);

    while state.epochs_done < cfg.epochs {
        let epoch = state.epochs_done;
        let order = shuffled_indices(cfg.seed, epoch, train_set.len());
        let mut epoch_sum = T::zero();
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = state.model.zeros_like();
            let mut batch_sum = T::zero();
            for &idx in batch {
                let sample = &train_set[idx];
                let trace = state.model.forward_trace(&sample.image);
                let (loss, dout) =
                    sample_loss(cfg.variant, trace.output(), sample, &weights)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_index,
                    });
                }
                batch_sum += loss;
                grads.add(&state.model.backward(&trace, &dout));
            }
            let inv = T::one() / T::from_count(batch.len());
            grads.scale(inv);
            let norm = grads
                .0
                .iter()
                .flatten()
                .fold(T::zero(), |a, &g| a + g * g)
                .sqrt();
            let clip = T::from_f64_c(GRAD_CLIP_NORM);
            if norm > clip {
                grads.scale(clip / norm);
            }
            epoch_sum += batch_sum;
            state.batch_losses.push(batch_sum * inv);

            // SGD with momentum: v <- mu*v + g, p <- p - lr*v.
            for ((param, grad), vel) in state
                .model
                .tensors_mut()
                .into_iter()
                .zip(&grads.0)
                .zip(&mut state.velocity.0)
            {
                for ((p, &g), v) in param.iter_mut().zip(grad).zip(vel.iter_mut()) {
                    *v = mu * *v + g;
                    *p -= lr * *v;
                }
            }
        }
        let epoch_loss = epoch_sum / T::from_count(train_set.len());
        state.epoch_losses.push(epoch_loss);
        state.epochs_done += 1;
        on_epoch(epoch, epoch_loss);
    }
    Ok(())
}

/// Train from scratch under `cfg`. The model-level finite-difference
/// gradient check runs first and gates the run.
pub fn train<T: Real>(cfg: &TrainConfig) -> Result<TrainState<T>> {
    gradient_sanity_check()?;
    let mut state = TrainState::fresh(cfg);
    train_epochs(cfg, &mut state, |_, _| ())?;
    Ok(state)
}

/// Inference for a connectivity-head model: vote, then channel-mean. With
/// `use_bv` false the voting step is skipped (the raw map is averaged),
/// which exists for the with/without-voting comparison.
pub fn infer<T: Real>(model: &ToyModel<T>, image: &Map<T>, use_bv: bool) -> Result<Map<T>> {
    let conn = model.forward(image).into_conn()?;
    if use_bv {
        Ok(aggregate_global(&bilateral_vote(&conn)?))
    } else {
        Ok(conn.channel_mean())
    }
}

/// Predicted saliency map for either head variant.
pub fn predict<T: Real>(model: &ToyModel<T>, image: &Map<T>, use_bv: bool) -> Result<Map<T>> {
    match model.forward(image) {
        ModelOutput::Saliency(map) => Ok(map),
        ModelOutput::Conn(conn) => {
            if use_bv {
                Ok(aggregate_global(&bilateral_vote(&conn)?))
            } else {
                Ok(conn.channel_mean())
            }
        }
    }
}

/// Corpus metrics of a model over a sample set.
pub fn evaluate_model<T: Real>(
    model: &ToyModel<T>,
    samples: &[SyntheticSample<T>],
    use_bv: bool,
) -> Result<MetricReport<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = (T::zero(), T::zero(), T::zero());
    for s in samples {
        let pred = predict(model, &s.image, use_bv)?;
        let r = evaluate_pair(&pred, &s.mask)?;
        sum = (sum.0 + r.mae, sum.1 + r.f_ave, sum.2 + r.e_m);
    }
    let n = T::from_count(samples.len());
    Ok(MetricReport {
        mae: sum.0 / n,
        f_ave: sum.1 / n,
        e_m: sum.2 / n,
        n_images: samples.len(),
    })
}

/// One row of the ablation or sweep reports.
#[derive(Debug, Clone)]
pub struct RunRow<T> {
    pub name: String,
    pub report: MetricReport<T>,
}

/// Train every variant under identical seeds and evaluate each on the
/// held-out split. Connectivity variants other than `conn_only` are
/// evaluated with voting at test time; `conn_only` averages the raw map,
/// the baseline reports its saliency output directly.
pub fn run_ablation<T: Real>(cfg: &TrainConfig) -> Result<Vec<RunRow<T>>> {
    let (_, test_set) = generate_dataset::<T>(cfg.seed, cfg.image_size, 1, cfg.n_test);
    let mut rows = Vec::new();
    for variant in TrainVariant::ALL {
        let mut run_cfg = cfg.clone();
        run_cfg.variant = variant;
        let state = train::<T>(&run_cfg)?;
        let use_bv = variant != TrainVariant::ConnOnly;
        let report = evaluate_model(&state.model, &test_set, use_bv)?;
        rows.push(RunRow {
            name: variant.name().to_string(),
            report,
        });
    }
    Ok(rows)
}

/// Train the full objective over the ω₂ grid {0.0, 0.1, …, 0.9} with
/// ω₁ = 1 − ω₂ and report held-out metrics per point.
pub fn sweep_weights<T: Real>(cfg: &TrainConfig) -> Result<Vec<(f64, f64, MetricReport<T>)>> {
    let (_, test_set) = generate_dataset::<T>(cfg.seed, cfg.image_size, 1, cfg.n_test);
    let mut rows = Vec::new();
    for i in 0..10 {
        let w2 = i as f64 / 10.0;
        let w1 = 1.0 - w2;
        let mut run_cfg = cfg.clone();
        run_cfg.variant = TrainVariant::FullBicon;
        run_cfg.w1 = w1;
        run_cfg.w2 = w2;
        let state = train::<T>(&run_cfg)?;
        let report = evaluate_model(&state.model, &test_set, true)?;
        rows.push((w1, w2, report));
    }
    Ok(rows)
}

/// Full-model finite-difference gradient check on a small deterministic
/// instance; training refuses to start if backprop disagrees with central
/// differences beyond 1e-3 relative error.
pub fn gradient_sanity_check() -> Result<()> {
    let cfg = TrainConfig {
        seed: 0xB1C0,
        image_size: 10,
        ..TrainConfig::default()
    };
    let (samples, _) = generate_dataset::<f64>(cfg.seed, cfg.image_size, 1, 1);
    let sample = &samples[0];
    let weights = LossWeights::default();
    let mut model = ToyModel::<f64>::init(cfg.seed, HeadVariant::Connectivity);
    // Nudge the head off its zero initialization so the check exercises a
    // generic point instead of the symmetric 0.5 output.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x77);
    {
        let tensors = model.tensors_mut();
        for t in tensors.into_iter().rev().take(2) {
            for v in t.iter_mut() {
                *v += rng.random_range(-0.05..=0.05);
            }
        }
    }

    let loss_of = |m: &ToyModel<f64>| -> Result<f64> {
        let conn = m.forward(&sample.image).into_conn()?;
        let gt = encode_connectivity::<f64>(&sample.mask);
        Ok(bicon_total_loss(&conn, &gt, &sample.mask, &weights, None)?
            .breakdown
            .total)
    };

    let trace = model.forward_trace(&sample.image);
    let (_, dout) = sample_loss(TrainVariant::FullBicon, trace.output(), sample, &weights)?;
    let grads = model.backward(&trace, &dout);
    let flat_grads: Vec<f64> = grads.0.iter().flatten().copied().collect();

    let n = model.param_count();
    let probes = 24;
    let step = 1e-5;
    for k in 0..probes {
        let idx = (k * n) / probes + k % 3;
        let idx = idx.min(n - 1);
        model.nudge_param(idx, step);
        let plus = loss_of(&model)?;
        model.nudge_param(idx, -2.0 * step);
        let minus = loss_of(&model)?;
        model.nudge_param(idx, step);
        let fd = (plus - minus) / (2.0 * step);
        let analytic = flat_grads[idx];
        let denom = analytic.abs().max(fd.abs()).max(1e-2);
        if ((analytic - fd) / denom).abs() > 1e-3 {
            return Err(Error::Config(format!(
                "gradient sanity check failed at parameter {idx}: backprop {analytic:.6e} vs finite difference {fd:.6e}"
            )));
        }
    }
    Ok(())
}
