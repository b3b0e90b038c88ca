use super::*;

fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 7,
        n_layers: 1,
        n_heads: 2,
        d_model: 8,
        d_ff: 16,
        ctx_len: 8,
        seed: 3,
    }
}

#[test]
fn init_is_deterministic_per_seed() {
    let cfg = tiny_config();
    let a = init_params::<f32>(&cfg).unwrap();
    let b = init_params::<f32>(&cfg).unwrap();
    for (x, y) in a.buffers().iter().zip(b.buffers()) {
        assert_eq!(x.data, y.data, "{}", x.name);
    }

    let other = init_params::<f32>(&ModelConfig { seed: 4, ..cfg }).unwrap();
    let differs = a
        .buffers()
        .iter()
        .zip(other.buffers())
        .any(|(x, y)| x.data != y.data);
    assert!(differs, "different seeds must differ somewhere");
}

#[test]
fn default_param_count_matches_independent_arithmetic() {
    let cfg = ModelConfig::default();
    let params = init_params::<f32>(&cfg).unwrap();
    // Independent closed-form sum of shape products.
    let (v, d, ff, ctx, l) = (259usize, 128usize, 512usize, 256usize, 2usize);
    let expected = v * d
        + ctx * d
        + l * (d + d + d * 3 * d + 3 * d + d * d + d + d + d + d * ff + ff + ff * d + d)
        + d
        + d
        + d * v;
    assert_eq!(params.param_count(), expected);
    assert_eq!(cfg.param_count(), expected);
}

#[test]
fn init_rejects_invalid_config() {
    let bad = ModelConfig {
        d_model: 10,
        n_heads: 4,
        ..ModelConfig::default()
    };
    assert!(matches!(init_params::<f32>(&bad), Err(Error::Config(_))));
}

#[test]
fn forward_is_causal() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let (a, _) = params.forward(&[1, 2, 3, 4], false).unwrap();
    let (b, _) = params.forward(&[1, 2, 5, 4], false).unwrap();
    let (av, bv) = (a.value(), b.value());
    let v = 7;
    // Positions before the perturbed one are bit-identical.
    assert_eq!(av[..2 * v], bv[..2 * v]);
    // The perturbed position itself changes.
    assert_ne!(av[2 * v..3 * v], bv[2 * v..3 * v]);
}

#[test]
fn single_token_gives_one_logit_row() {
    let params = init_params::<f32>(&tiny_config()).unwrap();
    let (logits, _) = params.forward(&[3], false).unwrap();
    assert_eq!(logits.shape(), vec![1, 7]);
}

#[test]
fn forward_rejects_overlong_and_out_of_vocab() {
    let params = init_params::<f32>(&tiny_config()).unwrap();
    assert!(matches!(
        params.forward(&[0; 9], false),
        Err(Error::Length { .. })
    ));
    assert!(matches!(
        params.forward(&[0, 7], false),
        Err(Error::Vocab { .. })
    ));
}

#[test]
fn forward_is_deterministic_across_runs() {
    let params = init_params::<f32>(&tiny_config()).unwrap();
    let (a, _) = params.forward(&[1, 2, 3], false).unwrap();
    let (b, _) = params.forward(&[1, 2, 3], false).unwrap();
    assert_eq!(a.value(), b.value());
}

#[test]
fn capture_has_one_entry_per_layer() {
    let cfg = ModelConfig {
        n_layers: 2,
        ..tiny_config()
    };
    let params = init_params::<f32>(&cfg).unwrap();
    let (_, cap) = params.forward(&[1, 2, 3], true).unwrap();
    let cap = cap.unwrap();
    assert_eq!(cap.layers.len(), 2);
    assert_eq!(cap.seq_len, 3);
    for layer in &cap.layers {
        assert_eq!(layer.len(), 3 * cfg.d_model);
    }
}

// Straight-line reimplementation of the forward equations, kept independent
// of the tape so it can serve as an oracle for the production path.
mod oracle {
    pub fn layer_norm(x: &[f64], g: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let rows = x.len() / n;
        let mut out = vec![0.0; x.len()];
        for r in 0..rows {
            let row = &x[r * n..(r + 1) * n];
            let mu = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            let rs = 1.0 / (var + 1e-5).sqrt();
            for c in 0..n {
                out[r * n + c] = (row[c] - mu) * rs * g[c] + b[c];
            }
        }
        out
    }

    pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let av = a[i * k + p];
                for j in 0..n {
                    out[i * n + j] += av * b[p * n + j];
                }
            }
        }
        out
    }

    pub fn gelu(x: f64) -> f64 {
        let c = 0.7978845608028654;
        let u = c * (x + 0.044715 * x * x * x);
        0.5 * x * (1.0 + u.tanh())
    }
}

#[test]
fn forward_matches_straight_line_reimplementation() {
    let cfg = ModelConfig {
        vocab_size: 5,
        n_layers: 1,
        n_heads: 2,
        d_model: 8,
        d_ff: 16,
        ctx_len: 6,
        seed: 11,
    };
    let params = init_params::<f64>(&cfg).unwrap();
    let tokens = [2u32, 0, 4, 1];
    let (logits, _) = params.forward(&tokens, false).unwrap();
    let got = logits.value();

    let bufs = params.buffers();
    let data = |name: &str| -> Vec<f64> {
        bufs.iter()
            .find(|b| b.name == name)
            .unwrap_or_else(|| panic!("missing buffer {name}"))
            .data
            .clone()
    };

    let (d, dh, t, v, ff) = (8usize, 4usize, tokens.len(), 5usize, 16usize);
    let tok_emb = data("tok_emb");
    let pos_emb = data("pos_emb");
    let mut x = vec![0.0; t * d];
    for (i, &tok) in tokens.iter().enumerate() {
        for j in 0..d {
            x[i * d + j] = tok_emb[tok as usize * d + j] + pos_emb[i * d + j];
        }
    }

    // Attention block.
    let h = oracle::layer_norm(&x, &data("layer0.ln1_g"), &data("layer0.ln1_b"), d);
    let mut qkv = oracle::matmul(&h, &data("layer0.w_qkv"), t, d, 3 * d);
    let b_qkv = data("layer0.b_qkv");
    for r in 0..t {
        for c in 0..3 * d {
            qkv[r * 3 * d + c] += b_qkv[c];
        }
    }
    let mut merged = vec![0.0; t * d];
    for head in 0..2 {
        for i in 0..t {
            // scores over positions <= i, softmax, then mix values.
            let mut scores = Vec::with_capacity(i + 1);
            for s in 0..=i {
                let mut dot = 0.0;
                for c in 0..dh {
                    let q = qkv[i * 3 * d + head * dh + c];
                    let k = qkv[s * 3 * d + d + head * dh + c];
                    dot += q * k;
                }
                scores.push(dot / (dh as f64).sqrt());
            }
            let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|&s| (s - mx).exp()).collect();
            let sum: f64 = exps.iter().sum();
            for c in 0..dh {
                let mut acc = 0.0;
                for s in 0..=i {
                    acc += exps[s] / sum * qkv[s * 3 * d + 2 * d + head * dh + c];
                }
                merged[i * d + head * dh + c] = acc;
            }
        }
    }
    let mut attn = oracle::matmul(&merged, &data("layer0.w_attn_out"), t, d, d);
    let b_o = data("layer0.b_attn_out");
    for r in 0..t {
        for c in 0..d {
            attn[r * d + c] += b_o[c];
            x[r * d + c] += attn[r * d + c];
        }
    }

    // MLP block.
    let h2 = oracle::layer_norm(&x, &data("layer0.ln2_g"), &data("layer0.ln2_b"), d);
    let mut up = oracle::matmul(&h2, &data("layer0.w_mlp_in"), t, d, ff);
    let b_in = data("layer0.b_mlp_in");
    for r in 0..t {
        for c in 0..ff {
            up[r * ff + c] = oracle::gelu(up[r * ff + c] + b_in[c]);
        }
    }
    let mut down = oracle::matmul(&up, &data("layer0.w_mlp_out"), t, ff, d);
    let b_out = data("layer0.b_mlp_out");
    for r in 0..t {
        for c in 0..d {
            down[r * d + c] += b_out[c];
            x[r * d + c] += down[r * d + c];
        }
    }

    let xf = oracle::layer_norm(&x, &data("lnf_g"), &data("lnf_b"), d);
    let expected = oracle::matmul(&xf, &data("w_head"), t, d, v);

    assert_eq!(got.len(), expected.len());
    for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
        assert!((g - e).abs() < 1e-9, "logit {i}: {g} vs {e}");
    }
}

#[test]
fn uniform_model_log_likelihood_is_length_times_log_vocab() {
    let cfg = tiny_config();
    let params = ModelParams::<f64>::zeroed(&cfg).unwrap();
    for len in [2usize, 3, 6] {
        let tokens: Vec<u32> = (0..len as u32).collect();
        let (total, per) = sequence_log_likelihood(&params, &tokens).unwrap();
        let expected = -((len - 1) as f64) * (cfg.vocab_size as f64).ln();
        assert!((total - expected).abs() < 1e-9, "{total} vs {expected}");
        assert_eq!(per.len(), len - 1);
    }
}

#[test]
fn total_log_likelihood_equals_sum_of_per_token() {
    let params = init_params::<f32>(&tiny_config()).unwrap();
    let (total, per) = sequence_log_likelihood(&params, &[1, 4, 2, 6, 0]).unwrap();
    let sum: f32 = per.iter().sum();
    assert!((total - sum).abs() < 1e-6);
    assert!(total < 0.0, "log-likelihood must be negative");
}

#[test]
fn log_likelihood_matches_prefix_by_prefix_chain() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let tokens = [3u32, 1, 5, 2];
    let (total, per) = sequence_log_likelihood(&params, &tokens).unwrap();

    // Chain rule: score each next token from a fresh forward over its prefix.
    let mut chain = 0.0;
    for t in 1..tokens.len() {
        let (logits, _) = params.forward(&tokens[..t], false).unwrap();
        let row = &logits.value()[(t - 1) * 7..t * 7];
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
        let lp = row[tokens[t] as usize] - lse;
        assert!((per[t - 1] - lp).abs() < 1e-9);
        chain += lp;
    }
    assert!((total - chain).abs() < 1e-9);
}

#[test]
fn log_likelihood_rejects_short_sequences() {
    let params = init_params::<f32>(&tiny_config()).unwrap();
    assert!(matches!(
        sequence_log_likelihood(&params, &[1]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn cast_roundtrip_preserves_values_within_precision() {
    let params = init_params::<f32>(&tiny_config()).unwrap();
    let doubled: ModelParams<f64> = params.cast();
    assert_eq!(doubled.provenance(), params.provenance());
    for (a, b) in params.buffers().iter().zip(doubled.buffers()) {
        for (x, y) in a.data.iter().zip(&b.data) {
            assert_eq!(*x as f64, *y);
        }
    }
}
