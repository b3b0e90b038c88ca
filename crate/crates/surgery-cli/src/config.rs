//! Run configuration: a TOML document with `[data]`, `[model]`,
//! `[train.*]`, and `[eval]` sections under one global seed. Unknown keys
//! are rejected; absent keys take the stage defaults; command-line flags
//! override file values.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use surgery_core::corpus::DataConfig;
use surgery_core::model::ModelConfig;
use surgery_core::train::{Stage, TrainConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSections,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub n_problematic: usize,
    pub n_outdated: usize,
    pub n_retain_pool: usize,
    pub unl_target_tokens: usize,
    pub upd_target_tokens: usize,
    pub rtn_target_tokens: usize,
    pub mcqa_per_entity: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = DataConfig::default();
        DataSection {
            n_problematic: d.n_problematic,
            n_outdated: d.n_outdated,
            n_retain_pool: d.n_retain_pool,
            unl_target_tokens: d.unl_target_tokens,
            upd_target_tokens: d.upd_target_tokens,
            rtn_target_tokens: d.rtn_target_tokens,
            mcqa_per_entity: d.mcqa_per_entity,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub vocab_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub ctx_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            vocab_size: m.vocab_size,
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            d_model: m.d_model,
            d_ff: m.d_ff,
            ctx_len: m.ctx_len,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSections {
    pub pretrain: TrainSection,
    pub baseline: TrainSection,
    pub surgery: TrainSection,
}

/// Per-stage overrides; unset keys fall back to the stage defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: Option<u64>,
    pub batch_unl: Option<usize>,
    pub batch_upd: Option<usize>,
    pub batch_rtn: Option<usize>,
    pub learning_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub grad_clip_norm: Option<f64>,
    pub retain_fraction: Option<f64>,
    pub eval_every: Option<u64>,
    pub chunk_len: Option<usize>,
    pub lambda_unl: Option<f64>,
    pub lambda_upd: Option<f64>,
    pub lambda_rtn: Option<f64>,
    pub unl_clamp_tau: Option<f64>,
    pub stop_unl_ce: Option<f64>,
    pub kl_abort_nats: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub max_profile_tokens: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            max_profile_tokens: 16_000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    /// SHA-256 over the fully resolved configuration document, so two runs
    /// agree on the hash exactly when they agree on every effective value.
    pub fn hash(&self) -> [u8; 32] {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    pub fn data_config(&self) -> DataConfig {
        DataConfig {
            seed: self.seed,
            n_problematic: self.data.n_problematic,
            n_outdated: self.data.n_outdated,
            n_retain_pool: self.data.n_retain_pool,
            unl_target_tokens: self.data.unl_target_tokens,
            upd_target_tokens: self.data.upd_target_tokens,
            rtn_target_tokens: self.data.rtn_target_tokens,
            mcqa_per_entity: self.data.mcqa_per_entity,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.model.vocab_size,
            n_layers: self.model.n_layers,
            n_heads: self.model.n_heads,
            d_model: self.model.d_model,
            d_ff: self.model.d_ff,
            ctx_len: self.model.ctx_len,
            seed: self.seed,
        }
    }

    /// Resolves the section for a stage over its defaults, stamping in the
    /// global seed and config hash.
    pub fn train_config(&self, stage: Stage) -> TrainConfig {
        let section = match stage {
            Stage::Pretrain => &self.train.pretrain,
            Stage::Baseline => &self.train.baseline,
            // The three editing stages share one section.
            Stage::Surgery | Stage::GdOnly | Stage::GdKl => &self.train.surgery,
        };
        let mut cfg = TrainConfig::default_for(stage);
        cfg.seed = self.seed;
        cfg.config_hash = self.hash();
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = section.$field { cfg.$field = v; })*
            };
        }
        apply!(
            steps,
            batch_unl,
            batch_upd,
            batch_rtn,
            learning_rate,
            adam_beta1,
            adam_beta2,
            adam_eps,
            grad_clip_norm,
            retain_fraction,
            eval_every,
            chunk_len,
            lambda_unl,
            lambda_upd,
            lambda_rtn,
            stop_unl_ce,
            kl_abort_nats
        );
        if section.unl_clamp_tau.is_some() {
            cfg.unl_clamp_tau = section.unl_clamp_tau;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.data.n_problematic, 119);
        assert_eq!(cfg.model.d_model, 128);
        let t = cfg.train_config(Stage::Surgery);
        assert_eq!(t.steps, 300);
        assert_eq!(t.learning_rate, 3e-4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("typo_key = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[data]\nbogus = 2").is_err());
        assert!(toml::from_str::<RunConfig>("[train.surgery]\nbogus = 2").is_err());
    }

    #[test]
    fn section_values_override_stage_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 9\n[train.surgery]\nsteps = 42\nretain_fraction = 0.05\n",
        )
        .unwrap();
        let t = cfg.train_config(Stage::GdKl);
        assert_eq!(t.steps, 42);
        assert_eq!(t.retain_fraction, 0.05);
        assert_eq!(t.seed, 9);
        // Untouched fields keep stage defaults.
        assert_eq!(t.batch_upd, 2);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a: RunConfig = toml::from_str("seed = 1").unwrap();
        let b: RunConfig = toml::from_str("seed = 1").unwrap();
        let c: RunConfig = toml::from_str("seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
