//! Training checkpoints: the full configuration, epoch counter, model
//! parameters, and optimizer momentum, integrity-hashed so a damaged or
//! mismatched file is rejected on load.

use crate::config::{fnv1a, TrainConfig, TrainVariant};
use crate::error::{Error, Result};
use crate::model::{HeadVariant, Tensors, ToyModel};
use crate::pipeline::TrainState;

const MAGIC: &[u8] = b"BCKPT1\n";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: "checkpoint truncated".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

pub fn save_checkpoint(cfg: &TrainConfig, state: &TrainState<f64>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let config = cfg.canonical();
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(state.epochs_done as u64).to_le_bytes());

    let tensors: Vec<&Vec<f64>> = state
        .model
        .tensors()
        .into_iter()
        .chain(state.velocity.0.iter())
        .collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for &v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = fnv1a(&out);
    out.extend_from_slice(&digest.to_le_bytes());
    out
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<(TrainConfig, TrainState<f64>)> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "expected checkpoint magic 'BCKPT1'".into(),
        });
    }
    let body_len = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_len..].try_into().expect("8 bytes"));
    if fnv1a(&bytes[..body_len]) != stored {
        return Err(Error::Format {
            offset: body_len as u64,
            message: "checkpoint hash mismatch (file corrupted or altered)".into(),
        });
    }

    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: MAGIC.len(),
    };
    let config_len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
    let config_offset = r.pos as u64;
    let config_text = std::str::from_utf8(r.take(config_len)?)
        .map_err(|_| Error::Format {
            offset: config_offset,
            message: "config block is not UTF-8".into(),
        })?
        .to_owned();
    let cfg = TrainConfig::parse(&config_text)?;
    let epochs_done = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;

    let n_tensors = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
    if n_tensors != 16 {
        return Err(Error::Format {
            offset: r.pos as u64,
            message: format!("expected 16 tensors, found {n_tensors}"),
        });
    }
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
        let raw = r.take(len * 8)?;
        tensors.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect::<Vec<f64>>(),
        );
    }
    if r.pos != body_len {
        return Err(Error::Format {
            offset: r.pos as u64,
            message: "trailing bytes in checkpoint body".into(),
        });
    }

    let head = match cfg.variant {
        TrainVariant::SaliencyBaseline => HeadVariant::Saliency,
        _ => HeadVariant::Connectivity,
    };
    let model = ToyModel::from_tensors(head, &tensors[..8])?;
    let velocity = Tensors(tensors[8..].to_vec());
    Ok((
        cfg,
        TrainState {
            model,
            velocity,
            epochs_done,
            epoch_losses: Vec::new(),
            batch_losses: Vec::new(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_state() -> (TrainConfig, TrainState<f64>) {
        let cfg = TrainConfig {
            epochs: 1,
            n_train: 2,
            n_test: 2,
            image_size: 8,
            ..TrainConfig::default()
        };
        let state = TrainState::fresh(&cfg);
        (cfg, state)
    }

    #[test]
    fn save_load_roundtrip() {
        let (cfg, state) = small_state();
        let bytes = save_checkpoint(&cfg, &state);
        let (cfg2, state2) = load_checkpoint(&bytes).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(state2.epochs_done, state.epochs_done);
        for (a, b) in state.model.tensors().iter().zip(state2.model.tensors()) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn corruption_detected() {
        let (cfg, state) = small_state();
        let mut bytes = save_checkpoint(&cfg, &state);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        assert!(matches!(
            load_checkpoint(&bytes),
            Err(Error::Format { .. })
        ));
    }
}
