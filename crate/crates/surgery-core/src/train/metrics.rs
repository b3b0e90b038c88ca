//! Per-run training telemetry: term values and an exact token ledger.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use super::Stage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub ce_unl: f64,
    pub ce_upd: f64,
    pub kl_rtn: f64,
    pub loss: f64,
    pub tokens_unl: u64,
    pub tokens_upd: u64,
    pub tokens_rtn: u64,
    pub wall_ms: u64,
}

/// Exact token accounting: cumulative consumption per corpus plus the
/// distinct token budget each corpus offered the stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub consumed_unl: u64,
    pub consumed_upd: u64,
    pub consumed_rtn: u64,
    pub available_unl: u64,
    pub available_upd: u64,
    pub available_rtn: u64,
}

impl TokenLedger {
    pub fn consumed_total(&self) -> u64 {
        self.consumed_unl + self.consumed_upd + self.consumed_rtn
    }
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub stage: Stage,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub records: Vec<MetricsRecord>,
    pub ledger: TokenLedger,
    pub final_step: u64,
    pub total_wall_ms: u64,
}

impl RunMetrics {
    pub fn new(stage: Stage, seed: u64, config_hash: [u8; 32]) -> Self {
        RunMetrics {
            stage,
            seed,
            config_hash,
            records: Vec::new(),
            ledger: TokenLedger::default(),
            final_step: 0,
            total_wall_ms: 0,
        }
    }

    pub fn push(&mut self, record: MetricsRecord) {
        self.records.push(record);
    }

    /// Steps strictly increase and token counters never decrease.
    pub fn validate(&self) -> Result<()> {
        for pair in self.records.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.step <= a.step {
                return Err(Error::Contract(format!(
                    "metrics steps not strictly increasing: {} then {}",
                    a.step, b.step
                )));
            }
            if b.tokens_unl < a.tokens_unl
                || b.tokens_upd < a.tokens_upd
                || b.tokens_rtn < a.tokens_rtn
            {
                return Err(Error::Contract(format!(
                    "token counters decreased between steps {} and {}",
                    a.step, b.step
                )));
            }
        }
        Ok(())
    }

    /// JSON-lines dump: a header object, one object per eval step, and a
    /// final object with the ledger.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(
            &serde_json::json!({
                "kind": "header",
                "stage": self.stage.as_str(),
                "seed": self.seed,
                "config_hash": hex_string(&self.config_hash),
            })
            .to_string(),
        );
        out.push('\n');
        for rec in &self.records {
            let mut obj = serde_json::to_value(rec).expect("record serializes");
            obj["kind"] = "step".into();
            out.push_str(&obj.to_string());
            out.push('\n');
        }
        out.push_str(
            &serde_json::json!({
                "kind": "final",
                "final_step": self.final_step,
                "total_wall_ms": self.total_wall_ms,
                "ledger": self.ledger,
            })
            .to_string(),
        );
        out.push('\n');
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
