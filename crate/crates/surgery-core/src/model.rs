//! Small decoder-only transformer language model.
//!
//! Pre-norm blocks, learned absolute position embeddings, GELU MLP, no
//! weight tying. The default scale (2 layers, d_model 128) is picked so a
//! corpus in the 10^5-token range can be memorized on a CPU in minutes,
//! which is the precondition for demonstrating unlearning on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{lit, GradTape, Scalar, Tensor};

/// Byte-level vocabulary: 256 byte values plus BOS / EOS / PAD.
pub const BOS: u32 = 256;
pub const EOS: u32 = 257;
pub const PAD: u32 = 258;
pub const DEFAULT_VOCAB: usize = 259;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub ctx_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: DEFAULT_VOCAB,
            n_layers: 2,
            n_heads: 4,
            d_model: 128,
            d_ff: 512,
            ctx_len: 256,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 4 {
            return Err(Error::Config(format!(
                "vocab_size must be >= 4, got {}",
                self.vocab_size
            )));
        }
        if self.ctx_len < 2 {
            return Err(Error::Config(format!(
                "ctx_len must be >= 2, got {}",
                self.ctx_len
            )));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_layers == 0 || self.d_ff == 0 {
            return Err(Error::Config("n_layers and d_ff must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Architectural equality, ignoring the initialization seed.
    pub fn same_arch(&self, other: &ModelConfig) -> bool {
        self.vocab_size == other.vocab_size
            && self.n_layers == other.n_layers
            && self.n_heads == other.n_heads
            && self.d_model == other.d_model
            && self.d_ff == other.d_ff
            && self.ctx_len == other.ctx_len
    }

    /// Total parameter count implied by the shapes.
    pub fn param_count(&self) -> usize {
        let (v, d, ff, ctx, l) = (
            self.vocab_size,
            self.d_model,
            self.d_ff,
            self.ctx_len,
            self.n_layers,
        );
        let per_layer = 2 * d          // ln1
            + d * 3 * d + 3 * d        // qkv
            + d * d + d                // attention out
            + 2 * d                    // ln2
            + d * ff + ff              // mlp in
            + ff * d + d; // mlp out
        v * d + ctx * d + l * per_layer + 2 * d + d * v
    }
}

/// Which training stage produced a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Base,
    Pre,
    Surgery,
    Baseline,
    Gd,
    GdKl,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Base => "base",
            Provenance::Pre => "pre",
            Provenance::Surgery => "surgery",
            Provenance::Baseline => "baseline",
            Provenance::Gd => "gd",
            Provenance::GdKl => "gd_kl",
        }
    }

    pub fn to_byte(self) -> u8 {
        match self {
            Provenance::Base => 0,
            Provenance::Pre => 1,
            Provenance::Surgery => 2,
            Provenance::Baseline => 3,
            Provenance::Gd => 4,
            Provenance::GdKl => 5,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => Provenance::Base,
            1 => Provenance::Pre,
            2 => Provenance::Surgery,
            3 => Provenance::Baseline,
            4 => Provenance::Gd,
            5 => Provenance::GdKl,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named parameter buffer.
#[derive(Debug, Clone)]
pub struct ParamBuf<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> ParamBuf<T> {
    fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        ParamBuf {
            name: name.into(),
            shape,
            data,
        }
    }

    fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![T::zero(); n])
    }
}

#[derive(Debug, Clone)]
struct LayerBufs<T> {
    ln1_g: ParamBuf<T>,
    ln1_b: ParamBuf<T>,
    w_qkv: ParamBuf<T>,
    b_qkv: ParamBuf<T>,
    w_attn_out: ParamBuf<T>,
    b_attn_out: ParamBuf<T>,
    ln2_g: ParamBuf<T>,
    ln2_b: ParamBuf<T>,
    w_mlp_in: ParamBuf<T>,
    b_mlp_in: ParamBuf<T>,
    w_mlp_out: ParamBuf<T>,
    b_mlp_out: ParamBuf<T>,
}

/// Full parameter set of the decoder, plus its provenance tag.
///
/// Frozen instances are `Send + Sync` and can be shared read-only across
/// threads; training mutates one instance on a single thread.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    config: ModelConfig,
    provenance: Provenance,
    tok_emb: ParamBuf<T>,
    pos_emb: ParamBuf<T>,
    layers: Vec<LayerBufs<T>>,
    lnf_g: ParamBuf<T>,
    lnf_b: ParamBuf<T>,
    w_head: ParamBuf<T>,
}

/// Deterministic scaled-normal initialization (std 0.02; residual-path
/// output projections scaled by 1/sqrt(2 * n_layers)).
pub fn init_params<T: Scalar>(config: &ModelConfig) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (v, d, ff, ctx) = (config.vocab_size, config.d_model, config.d_ff, config.ctx_len);
    let std = 0.02;
    let resid_std = std / (2.0 * config.n_layers as f64).sqrt();

    let mut normal = |n: usize, sd: f64| -> Vec<T> {
        (0..n).map(|_| lit::<T>(sample_normal(&mut rng) * sd)).collect()
    };

    let tok_emb = ParamBuf::new("tok_emb", vec![v, d], normal(v * d, std));
    let pos_emb = ParamBuf::new("pos_emb", vec![ctx, d], normal(ctx * d, std));
    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let p = |s: &str| format!("layer{l}.{s}");
        layers.push(LayerBufs {
            ln1_g: ParamBuf::new(p("ln1_g"), vec![d], vec![T::one(); d]),
            ln1_b: ParamBuf::zeros(p("ln1_b"), vec![d]),
            w_qkv: ParamBuf::new(p("w_qkv"), vec![d, 3 * d], normal(d * 3 * d, std)),
            b_qkv: ParamBuf::zeros(p("b_qkv"), vec![3 * d]),
            w_attn_out: ParamBuf::new(p("w_attn_out"), vec![d, d], normal(d * d, resid_std)),
            b_attn_out: ParamBuf::zeros(p("b_attn_out"), vec![d]),
            ln2_g: ParamBuf::new(p("ln2_g"), vec![d], vec![T::one(); d]),
            ln2_b: ParamBuf::zeros(p("ln2_b"), vec![d]),
            w_mlp_in: ParamBuf::new(p("w_mlp_in"), vec![d, ff], normal(d * ff, std)),
            b_mlp_in: ParamBuf::zeros(p("b_mlp_in"), vec![ff]),
            w_mlp_out: ParamBuf::new(p("w_mlp_out"), vec![ff, d], normal(ff * d, resid_std)),
            b_mlp_out: ParamBuf::zeros(p("b_mlp_out"), vec![d]),
        });
    }
    let lnf_g = ParamBuf::new("lnf_g", vec![d], vec![T::one(); d]);
    let lnf_b = ParamBuf::zeros("lnf_b", vec![d]);
    let w_head = ParamBuf::new("w_head", vec![d, v], normal(d * v, std));

    Ok(ModelParams {
        config: *config,
        provenance: Provenance::Base,
        tok_emb,
        pos_emb,
        layers,
        lnf_g,
        lnf_b,
        w_head,
    })
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; consumes two uniforms per draw.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl<T: Scalar> ModelParams<T> {
    /// All-zero weights; layer norms degenerate to zero output and the zero
    /// head projection makes every next-token distribution exactly uniform.
    pub fn zeroed(config: &ModelConfig) -> Result<Self> {
        let mut p = init_params::<T>(config)?;
        for buf in p.buffers_mut() {
            for v in buf.data.iter_mut() {
                *v = T::zero();
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn set_provenance(&mut self, p: Provenance) {
        self.provenance = p;
    }

    /// Buffers in declared shape order (the checkpoint payload order).
    pub fn buffers(&self) -> Vec<&ParamBuf<T>> {
        let mut out = vec![&self.tok_emb, &self.pos_emb];
        for l in &self.layers {
            out.extend([
                &l.ln1_g,
                &l.ln1_b,
                &l.w_qkv,
                &l.b_qkv,
                &l.w_attn_out,
                &l.b_attn_out,
                &l.ln2_g,
                &l.ln2_b,
                &l.w_mlp_in,
                &l.b_mlp_in,
                &l.w_mlp_out,
                &l.b_mlp_out,
            ]);
        }
        out.extend([&self.lnf_g, &self.lnf_b, &self.w_head]);
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut ParamBuf<T>> {
        let mut out: Vec<&mut ParamBuf<T>> = vec![&mut self.tok_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            out.push(&mut l.ln1_g);
            out.push(&mut l.ln1_b);
            out.push(&mut l.w_qkv);
            out.push(&mut l.b_qkv);
            out.push(&mut l.w_attn_out);
            out.push(&mut l.b_attn_out);
            out.push(&mut l.ln2_g);
            out.push(&mut l.ln2_b);
            out.push(&mut l.w_mlp_in);
            out.push(&mut l.b_mlp_in);
            out.push(&mut l.w_mlp_out);
            out.push(&mut l.b_mlp_out);
        }
        out.push(&mut self.lnf_g);
        out.push(&mut self.lnf_b);
        out.push(&mut self.w_head);
        out
    }

    pub fn param_count(&self) -> usize {
        self.buffers().iter().map(|b| b.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.buffers()
            .iter()
            .all(|b| b.data.iter().all(|v| v.is_finite()))
    }

    /// Converts precision, preserving configuration and provenance.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = init_params::<U>(&self.config).expect("valid config");
        out.provenance = self.provenance;
        for (dst, src) in out.buffers_mut().into_iter().zip(self.buffers()) {
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d = U::from_f64(s.as_f64());
            }
        }
        out
    }

    /// Copies the buffers into tape leaves for one forward/backward pass.
    pub fn lease(&self, requires_grad: bool) -> LeasedParams<T> {
        let leaves = self
            .buffers()
            .into_iter()
            .map(|b| {
                Tensor::leaf(b.shape.clone(), b.data.clone(), requires_grad)
                    .expect("buffer shapes are consistent")
            })
            .collect();
        LeasedParams {
            config: self.config,
            leaves,
        }
    }

    /// Runs the model over one token sequence without gradient tracking.
    pub fn forward(
        &self,
        tokens: &[u32],
        capture: bool,
    ) -> Result<(Tensor<T>, Option<ActivationCapture<T>>)> {
        let leased = self.lease(false);
        let mut tape = GradTape::new();
        forward_on_tape(&mut tape, &leased, tokens, capture)
    }
}

/// Tape leaves for one pass, in the same order as [`ModelParams::buffers`].
pub struct LeasedParams<T: Scalar> {
    config: ModelConfig,
    leaves: Vec<Tensor<T>>,
}

impl<T: Scalar> LeasedParams<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn leaves(&self) -> &[Tensor<T>] {
        &self.leaves
    }

    /// Gradients per buffer after a backward pass (zeros where none flowed).
    pub fn grads(&self) -> Vec<Vec<T>> {
        self.leaves
            .iter()
            .map(|t| t.grad().unwrap_or_else(|| vec![T::zero(); t.numel()]))
            .collect()
    }

    fn layer(&self, l: usize) -> &[Tensor<T>] {
        &self.leaves[2 + l * 12..2 + (l + 1) * 12]
    }
}

/// Per-layer post-block hidden states from one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationCapture<T> {
    pub layers: Vec<Vec<T>>,
    pub seq_len: usize,
    pub d_model: usize,
}

/// Causal forward pass producing next-token logits for every position.
///
/// `logits[t]` depends only on tokens at positions `<= t`; its softmax is the
/// model's next-token distribution given that prefix.
pub fn forward_on_tape<T: Scalar>(
    tape: &mut GradTape<T>,
    params: &LeasedParams<T>,
    tokens: &[u32],
    capture: bool,
) -> Result<(Tensor<T>, Option<ActivationCapture<T>>)> {
    let cfg = params.config;
    let len = tokens.len();
    if len == 0 || len > cfg.ctx_len {
        return Err(Error::Length {
            len,
            min: 1,
            max: cfg.ctx_len,
        });
    }
    for &t in tokens {
        if t as usize >= cfg.vocab_size {
            return Err(Error::Vocab {
                id: t,
                vocab_size: cfg.vocab_size,
            });
        }
    }

    let eps = lit::<T>(1e-5);
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = lit::<T>(1.0 / (dh as f64).sqrt());
    let positions: Vec<u32> = (0..len as u32).collect();

    let tok_emb = &params.leaves[0];
    let pos_emb = &params.leaves[1];
    let tok = tape.embed_gather(tok_emb, tokens)?;
    let pos = tape.embed_gather(pos_emb, &positions)?;
    let mut x = tape.add(&tok, &pos)?;

    let mut captured = Vec::new();
    for l in 0..cfg.n_layers {
        let [ln1_g, ln1_b, w_qkv, b_qkv, w_attn_out, b_attn_out, ln2_g, ln2_b, w_mlp_in, b_mlp_in, w_mlp_out, b_mlp_out] =
            params.layer(l)
        else {
            unreachable!("layer slice is 12 leaves");
        };

        let h = tape.layer_norm(&x, ln1_g, ln1_b, eps)?;
        let qkv = tape.matmul(&h, w_qkv)?;
        let qkv = tape.add_bias(&qkv, b_qkv)?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for hd in 0..cfg.n_heads {
            let q = tape.slice_cols(&qkv, hd * dh, dh)?;
            let k = tape.slice_cols(&qkv, d + hd * dh, dh)?;
            let v = tape.slice_cols(&qkv, 2 * d + hd * dh, dh)?;
            let scores = tape.matmul_tb(&q, &k)?;
            let scores = tape.scale(&scores, scale);
            let probs = tape.causal_softmax(&scores)?;
            heads.push(tape.matmul(&probs, &v)?);
        }
        let merged = tape.concat_cols(&heads)?;
        let attn = tape.matmul(&merged, w_attn_out)?;
        let attn = tape.add_bias(&attn, b_attn_out)?;
        x = tape.add(&x, &attn)?;

        let h2 = tape.layer_norm(&x, ln2_g, ln2_b, eps)?;
        let up = tape.matmul(&h2, w_mlp_in)?;
        let up = tape.add_bias(&up, b_mlp_in)?;
        let act = tape.gelu(&up);
        let down = tape.matmul(&act, w_mlp_out)?;
        let down = tape.add_bias(&down, b_mlp_out)?;
        x = tape.add(&x, &down)?;

        if capture {
            captured.push(x.value());
        }
    }

    let n = params.leaves.len();
    let lnf_g = &params.leaves[n - 3];
    let lnf_b = &params.leaves[n - 2];
    let w_head = &params.leaves[n - 1];
    let xf = tape.layer_norm(&x, lnf_g, lnf_b, eps)?;
    let logits = tape.matmul(&xf, w_head)?;

    let cap = capture.then(|| ActivationCapture {
        layers: captured,
        seq_len: len,
        d_model: d,
    });
    Ok((logits, cap))
}

/// Teacher-forced log-likelihood of a sequence: the total and per-position
/// log-probabilities of each token from position 2 on, given its prefix.
pub fn sequence_log_likelihood<T: Scalar>(
    params: &ModelParams<T>,
    tokens: &[u32],
) -> Result<(T, Vec<T>)> {
    if tokens.len() < 2 {
        return Err(Error::Contract(format!(
            "log-likelihood needs at least 2 tokens, got {}",
            tokens.len()
        )));
    }
    let (logits, _) = params.forward(tokens, false)?;
    let v = params.config.vocab_size;
    let data = logits.value();
    let mut per_token = Vec::with_capacity(tokens.len() - 1);
    let mut total = T::zero();
    for t in 1..tokens.len() {
        let row = &data[(t - 1) * v..t * v];
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = mx
            + row
                .iter()
                .map(|&x| (x - mx).exp())
                .fold(T::zero(), |s, e| s + e)
                .ln();
        let lp = row[tokens[t] as usize] - lse;
        per_token.push(lp);
        total = total + lp;
    }
    Ok((total, per_token))
}

#[cfg(test)]
mod tests;
