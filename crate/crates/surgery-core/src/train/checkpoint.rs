//! Binary checkpoint format.
//!
//! Little-endian layout: magic `LSRG`, format version, the model
//! configuration block, provenance byte, step counter, RNG state, config
//! hash, then a CRC-guarded payload of raw 32-bit float parameter buffers in
//! declared shape order. Optimizer moments travel in an optional trailing
//! section with its own CRC so training can resume bit-exactly.

use std::io::Read;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{init_params, ModelConfig, ModelParams, Provenance};

const MAGIC: &[u8; 4] = b"LSRG";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializable ChaCha state: seed, stream, and word position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }

    pub fn from_seed_u64(seed: u64) -> Self {
        Self::capture(&ChaCha8Rng::seed_from_u64(seed))
    }
}

#[derive(Debug, Clone)]
pub struct AdamSnapshot {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub step: u64,
    pub rng: RngState,
    pub config_hash: [u8; 32],
    pub optimizer: Option<AdamSnapshot>,
}

fn integrity(path: &Path, reason: impl Into<String>) -> Error {
    Error::Integrity {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn floats_to_bytes(bufs: &[&[f32]]) -> Vec<u8> {
    let total: usize = bufs.iter().map(|b| b.len()).sum();
    let mut out = Vec::with_capacity(total * 4);
    for buf in bufs {
        for v in *buf {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let cfg = ckpt.params.config();
    let param_slices: Vec<&[f32]> = ckpt
        .params
        .buffers()
        .iter()
        .map(|b| b.data.as_slice())
        .collect();
    let payload = floats_to_bytes(&param_slices);
    let param_crc = crc32fast::hash(&payload);

    let mut out = Vec::with_capacity(payload.len() + 256);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        cfg.vocab_size,
        cfg.n_layers,
        cfg.n_heads,
        cfg.d_model,
        cfg.d_ff,
        cfg.ctx_len,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.push(ckpt.params.provenance().to_byte());
    out.extend_from_slice(&ckpt.step.to_le_bytes());
    out.extend_from_slice(&ckpt.rng.seed);
    out.extend_from_slice(&ckpt.rng.stream.to_le_bytes());
    out.extend_from_slice(&ckpt.rng.word_pos.to_le_bytes());
    out.extend_from_slice(&ckpt.config_hash);
    out.push(ckpt.optimizer.is_some() as u8);
    out.extend_from_slice(&param_crc.to_le_bytes());
    out.extend_from_slice(&payload);

    if let Some(opt) = &ckpt.optimizer {
        let m_slices: Vec<&[f32]> = opt.m.iter().map(|b| b.as_slice()).collect();
        let v_slices: Vec<&[f32]> = opt.v.iter().map(|b| b.as_slice()).collect();
        let mut moments = floats_to_bytes(&m_slices);
        moments.extend_from_slice(&floats_to_bytes(&v_slices));
        out.extend_from_slice(&opt.step.to_le_bytes());
        out.extend_from_slice(&opt.beta1.to_le_bytes());
        out.extend_from_slice(&opt.beta2.to_le_bytes());
        out.extend_from_slice(&opt.eps.to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(&moments).to_le_bytes());
        out.extend_from_slice(&moments);
    }

    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    file: std::fs::File,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.file
            .read_exact(&mut buf)
            .map_err(|_| integrity(self.path, "truncated file"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    fn exact(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.file
            .read_exact(&mut buf)
            .map_err(|_| integrity(self.path, "truncated file"))?;
        Ok(buf)
    }
}

fn bytes_to_floats(bytes: &[u8], shapes: &[usize]) -> Vec<Vec<f32>> {
    let mut out = Vec::with_capacity(shapes.len());
    let mut off = 0;
    for &n in shapes {
        let mut buf = Vec::with_capacity(n);
        for i in 0..n {
            let s = off + i * 4;
            buf.push(f32::from_le_bytes([
                bytes[s],
                bytes[s + 1],
                bytes[s + 2],
                bytes[s + 3],
            ]));
        }
        off += n * 4;
        out.push(buf);
    }
    out
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { file, path };

    if &r.bytes::<4>()? != MAGIC {
        return Err(integrity(path, "bad magic bytes"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }

    let cfg = ModelConfig {
        vocab_size: r.u32()? as usize,
        n_layers: r.u32()? as usize,
        n_heads: r.u32()? as usize,
        d_model: r.u32()? as usize,
        d_ff: r.u32()? as usize,
        ctx_len: r.u32()? as usize,
        seed: r.u64()?,
    };
    cfg.validate()
        .map_err(|e| integrity(path, format!("config block invalid: {e}")))?;

    let prov_byte = r.bytes::<1>()?[0];
    let provenance = Provenance::from_byte(prov_byte)
        .ok_or_else(|| integrity(path, format!("unknown provenance byte {prov_byte}")))?;
    let step = r.u64()?;
    let rng = RngState {
        seed: r.bytes::<32>()?,
        stream: r.u64()?,
        word_pos: u128::from_le_bytes(r.bytes::<16>()?),
    };
    let config_hash = r.bytes::<32>()?;
    let has_optimizer = r.bytes::<1>()?[0] != 0;
    let param_crc = r.u32()?;

    let mut params = init_params::<f32>(&cfg)?;
    params.set_provenance(provenance);
    let shapes: Vec<usize> = params.buffers().iter().map(|b| b.data.len()).collect();
    let payload_len: usize = shapes.iter().sum::<usize>() * 4;
    let payload = r.exact(payload_len)?;
    if crc32fast::hash(&payload) != param_crc {
        return Err(integrity(path, "parameter payload CRC mismatch"));
    }
    let bufs = bytes_to_floats(&payload, &shapes);
    for (dst, src) in params.buffers_mut().into_iter().zip(bufs) {
        dst.data = src;
    }

    let optimizer = if has_optimizer {
        let opt_step = r.u64()?;
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let eps = r.f64()?;
        let opt_crc = r.u32()?;
        let moments = r.exact(payload_len * 2)?;
        if crc32fast::hash(&moments) != opt_crc {
            return Err(integrity(path, "optimizer payload CRC mismatch"));
        }
        let m = bytes_to_floats(&moments[..payload_len], &shapes);
        let v = bytes_to_floats(&moments[payload_len..], &shapes);
        Some(AdamSnapshot {
            step: opt_step,
            beta1,
            beta2,
            eps,
            m,
            v,
        })
    } else {
        None
    };

    Ok(Checkpoint {
        params,
        step,
        rng,
        config_hash,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn sample_checkpoint() -> Checkpoint {
        let cfg = ModelConfig {
            vocab_size: 11,
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            ctx_len: 8,
            seed: 42,
        };
        let mut params = init_params::<f32>(&cfg).unwrap();
        params.set_provenance(Provenance::Pre);
        let m: Vec<Vec<f32>> = params.buffers().iter().map(|b| vec![0.5; b.data.len()]).collect();
        let v: Vec<Vec<f32>> = params.buffers().iter().map(|b| vec![0.25; b.data.len()]).collect();
        Checkpoint {
            params,
            step: 1234,
            rng: RngState::from_seed_u64(7),
            config_hash: [9; 32],
            optimizer: Some(AdamSnapshot {
                step: 1234,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                m,
                v,
            }),
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let ckpt = sample_checkpoint();
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        assert_eq!(loaded.step, ckpt.step);
        assert_eq!(loaded.rng, ckpt.rng);
        assert_eq!(loaded.config_hash, ckpt.config_hash);
        assert_eq!(loaded.params.provenance(), Provenance::Pre);
        assert_eq!(loaded.params.config(), ckpt.params.config());
        for (a, b) in loaded.params.buffers().iter().zip(ckpt.params.buffers()) {
            let ab: Vec<u32> = a.data.iter().map(|x| x.to_bits()).collect();
            let bb: Vec<u32> = b.data.iter().map(|x| x.to_bits()).collect();
            assert_eq!(ab, bb, "{}", a.name);
        }
        let (lo, co) = (loaded.optimizer.unwrap(), ckpt.optimizer.unwrap());
        assert_eq!(lo.step, co.step);
        assert_eq!(lo.m, co.m);
        assert_eq!(lo.v, co.v);
    }

    #[test]
    fn rng_state_round_trip_reproduces_stream() {
        use rand::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        rng.next_u64();
        rng.next_u64();
        let saved = RngState::capture(&rng);
        let mut restored = saved.restore();
        assert_eq!(rng.next_u64(), restored.next_u64());
        assert_eq!(rng.next_u64(), restored.next_u64());
    }

    #[test]
    fn truncated_file_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.ckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn corrupted_payload_fails_crc() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99; // version field follows the magic
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Version { found: 99, .. })
        ));
    }
}
