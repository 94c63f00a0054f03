//! Training configuration: plain-text `key=value` files with `#` comments,
//! every field overridable from the command line.

use crate::error::{Error, Result};

/// Which objective (and head) a training run uses.
///
/// The five variants are the rows of the component-ablation table: a plain
/// saliency head, a connectivity head supervised on the raw map only, the
/// same plus a voted-global BCE term, the edge-decoupled objective, and
/// the full combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainVariant {
    SaliencyBaseline,
    ConnOnly,
    ConnBvGlobal,
    ConnBvRca,
    FullBicon,
}

impl TrainVariant {
    pub fn name(self) -> &'static str {
        match self {
            TrainVariant::SaliencyBaseline => "saliency_baseline",
            TrainVariant::ConnOnly => "conn_only",
            TrainVariant::ConnBvGlobal => "conn_bv_global",
            TrainVariant::ConnBvRca => "conn_bv_rca",
            TrainVariant::FullBicon => "full_bicon",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "saliency_baseline" => TrainVariant::SaliencyBaseline,
            "conn_only" => TrainVariant::ConnOnly,
            "conn_bv_global" => TrainVariant::ConnBvGlobal,
            "conn_bv_rca" => TrainVariant::ConnBvRca,
            "full_bicon" => TrainVariant::FullBicon,
            other => {
                return Err(Error::Config(format!(
                    "unknown variant '{other}' (expected saliency_baseline, conn_only, \
                     conn_bv_global, conn_bv_rca, or full_bicon)"
                )))
            }
        })
    }

    /// All variants in ablation-table order.
    pub const ALL: [TrainVariant; 5] = [
        TrainVariant::SaliencyBaseline,
        TrainVariant::ConnOnly,
        TrainVariant::ConnBvGlobal,
        TrainVariant::ConnBvRca,
        TrainVariant::FullBicon,
    ];
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// ω₁, the raw connectivity-map loss weight.
    pub w1: f64,
    /// ω₂, the voted-map loss weight.
    pub w2: f64,
    pub variant: TrainVariant,
    pub n_train: usize,
    pub n_test: usize,
    pub image_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 8,
            learning_rate: 0.15,
            momentum: 0.9,
            seed: 1,
            w1: 0.8,
            w2: 0.2,
            variant: TrainVariant::FullBicon,
            n_train: 512,
            n_test: 128,
            image_size: 64,
        }
    }
}

impl TrainConfig {
    /// Parse `key=value` lines; `#` starts a comment, blank lines are
    /// ignored, unknown keys are errors. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "w1" => self.w1 = num(key, value)?,
            "w2" => self.w2 = num(key, value)?,
            "variant" => self.variant = TrainVariant::parse(value)?,
            "n_train" => self.n_train = num(key, value)?,
            "n_test" => self.n_test = num(key, value)?,
            "image_size" => self.image_size = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.n_train == 0
            || self.n_test == 0
            || self.image_size == 0
        {
            return Err(Error::Config(
                "epochs, batch_size, n_train, n_test, and image_size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.w1) || !(0.0..=1.0).contains(&self.w2) {
            return Err(Error::Config("w1 and w2 must lie in [0, 1]".into()));
        }
        if self.learning_rate < 0.0 || self.momentum < 0.0 {
            return Err(Error::Config(
                "learning_rate and momentum must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Canonical serialization; hashing and checkpoint embedding use this.
    pub fn canonical(&self) -> String {
        format!(
            "epochs={}\nbatch_size={}\nlearning_rate={}\nmomentum={}\nseed={}\nw1={}\nw2={}\nvariant={}\nn_train={}\nn_test={}\nimage_size={}\n",
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.momentum,
            self.seed,
            self.w1,
            self.w2,
            self.variant.name(),
            self.n_train,
            self.n_test,
            self.image_size,
        )
    }

    /// FNV-1a hash of the canonical serialization.
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}
