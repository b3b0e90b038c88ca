use super::*;
use crate::corpus::{
    generate_benchmarks, generate_entities, CorpusTag, MCQAItem, Split,
};
use crate::model::{init_params, ModelConfig, ModelParams};
use crate::train::{pretrain, Stage, StartPoint, TrainConfig};

fn tiny_cfg() -> ModelConfig {
    ModelConfig {
        vocab_size: 259,
        n_layers: 2,
        n_heads: 2,
        d_model: 8,
        d_ff: 16,
        ctx_len: 96,
        seed: 17,
    }
}

fn item(question: &str, choices: [&str; 3], label: u8) -> MCQAItem {
    MCQAItem {
        question: question.into(),
        choices: choices.map(|c| c.to_string()),
        label,
        source_corpus: BenchmarkTag::Retain,
        split: Split::Test,
    }
}

#[test]
fn uniform_model_ties_resolve_to_lowest_index() {
    let params = ModelParams::<f32>::zeroed(&tiny_cfg()).unwrap();
    // Equal-length choices score identically under a uniform model.
    let it = item("Which award did Ann Hale receive?", ["aaa", "bbb", "ccc"], 2);
    assert_eq!(score_mcqa_item(&params, &it).unwrap(), 0);
}

#[test]
fn permuting_choices_permutes_the_chosen_answer() {
    let params = init_params::<f32>(&tiny_cfg()).unwrap();
    let base = item("Where was Ann Hale born?", ["Port Aldric", "Veltenburg", "Durnwich"], 0);
    let chosen = score_mcqa_item(&params, &base).unwrap() as usize;

    // Rotate the choices left by one; the same underlying string must win.
    let rotated = item(
        "Where was Ann Hale born?",
        ["Veltenburg", "Durnwich", "Port Aldric"],
        0,
    );
    let chosen_rot = score_mcqa_item(&params, &rotated).unwrap() as usize;
    let winner = &base.choices[chosen];
    assert_eq!(rotated.choices[chosen_rot], *winner);
}

#[test]
fn overlong_question_is_truncated_from_the_left() {
    let params = init_params::<f32>(&tiny_cfg()).unwrap();
    let long_q = "x".repeat(500);
    let it = item(&long_q, ["alpha", "beta", "gamma"], 1);
    // Must not error; the question loses its head, never the choice.
    score_mcqa_item(&params, &it).unwrap();
}

#[test]
fn untrained_model_scores_in_the_chance_band() {
    let set = generate_entities(3, 30, 30, 30).unwrap();
    let benches = generate_benchmarks(&set, 10, 9).unwrap();
    let params = init_params::<f32>(&tiny_cfg()).unwrap();
    let items: Vec<MCQAItem> = benches
        .retain
        .iter()
        .filter(|i| i.split == Split::Test)
        .cloned()
        .collect();
    // Retain bench test split is smaller than 500 here, widen with unlearn.
    let mut all = items;
    all.extend(benches.unlearn.iter().filter(|i| i.split == Split::Test).cloned());
    assert!(all.len() >= 500);
    let tagged: Vec<MCQAItem> = all
        .into_iter()
        .map(|mut i| {
            i.source_corpus = BenchmarkTag::Retain;
            i
        })
        .collect();
    let result = evaluate_mcqa(&params, &tagged).unwrap();
    assert!(
        (0.25..=0.42).contains(&result.accuracy),
        "accuracy {}",
        result.accuracy
    );
}

#[test]
fn duplicate_item_list_doubles_counts_not_accuracy() {
    let params = init_params::<f32>(&tiny_cfg()).unwrap();
    let items = vec![
        item("Where was Ann Hale born?", ["Port Aldric", "Veltenburg", "Durnwich"], 0),
        item("Which award did Bo Crane receive?", ["Orion Medal", "Veritas Cup", "Mast Medal"], 1),
    ];
    let once = evaluate_mcqa(&params, &items).unwrap();
    let mut twice_items = items.clone();
    twice_items.extend(items);
    let twice = evaluate_mcqa(&params, &twice_items).unwrap();
    assert_eq!(once.accuracy, twice.accuracy);
    assert_eq!(twice.n_items, 2 * once.n_items);
}

#[test]
fn memorized_string_wins_the_likelihood_comparison() {
    // Train a tiny model on one fact until it prefers the trained
    // continuation over same-length alternatives.
    let cfg = ModelConfig {
        vocab_size: 259,
        n_layers: 1,
        n_heads: 2,
        d_model: 16,
        d_ff: 32,
        ctx_len: 64,
        seed: 5,
    };
    let fact = "marta keeps bees.\n".repeat(6);
    let doc = crate::corpus::Document::new("d0".into(), None, CorpusTag::Rtn, fact);
    let base = init_params::<f32>(&cfg).unwrap();
    let train_cfg = TrainConfig {
        steps: 120,
        batch_unl: 2,
        batch_rtn: 2,
        learning_rate: 3e-3,
        eval_every: 40,
        chunk_len: 64,
        stop_unl_ce: 0.0,
        ..TrainConfig::default_for(Stage::Pretrain)
    };
    let trained = pretrain(
        StartPoint::Fresh(&base),
        &[&doc],
        &[&doc],
        &train_cfg,
    )
    .unwrap()
    .params;

    let it = item("marta keeps", ["bees.", "maps.", "oars."], 0);
    assert_eq!(score_mcqa_item(&trained, &it).unwrap(), 0);
}

#[test]
fn zeroed_model_profile_is_constant_across_datasets() {
    let params = ModelParams::<f32>::zeroed(&tiny_cfg()).unwrap();
    let a = crate::corpus::Document::new("a".into(), None, CorpusTag::Rtn, "one text here".into());
    let b = crate::corpus::Document::new(
        "b".into(),
        None,
        CorpusTag::Rtn,
        "completely different words".into(),
    );
    let pa = activation_profile(&params, "a", &[&a], 1_000).unwrap();
    let pb = activation_profile(&params, "b", &[&b], 1_000).unwrap();
    assert_eq!(pa.layers, pb.layers);
}

#[test]
fn profile_matches_token_weighted_mean_of_per_document_profiles() {
    let params = init_params::<f32>(&tiny_cfg()).unwrap();
    let docs: Vec<crate::corpus::Document> = [
        "short text",
        "a rather longer document with more words inside it",
        "mid-size line of text",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| crate::corpus::Document::new(format!("d{i}"), None, CorpusTag::Rtn, t.to_string()))
    .collect();
    let doc_refs: Vec<&crate::corpus::Document> = docs.iter().collect();

    let whole = activation_profile(&params, "all", &doc_refs, u64::MAX).unwrap();
    let parts: Vec<ActivationProfile> = docs
        .iter()
        .map(|d| activation_profile(&params, "one", &[d], u64::MAX).unwrap())
        .collect();

    let total: f64 = parts.iter().map(|p| p.positions as f64).sum();
    for l in 0..whole.layers.len() {
        for u in 0..whole.layers[l].len() {
            let blended: f64 = parts
                .iter()
                .map(|p| p.layers[l][u] * p.positions as f64 / total)
                .sum();
            assert!(
                (whole.layers[l][u] - blended).abs() < 1e-6,
                "layer {l} unit {u}: {} vs {blended}",
                whole.layers[l][u]
            );
        }
    }
}

#[test]
fn doubling_the_token_budget_is_stable_on_homogeneous_text() {
    let params = init_params::<f32>(&tiny_cfg()).unwrap();
    // Same sentence repeated: halving/doubling the budget cannot move means.
    let text = "the tide returned to the harbor on schedule.\n".repeat(40);
    let doc = crate::corpus::Document::new("d".into(), None, CorpusTag::Rtn, text);
    let half = activation_profile(&params, "d", &[&doc], 400).unwrap();
    let full = activation_profile(&params, "d", &[&doc], 800).unwrap();
    for (a, b) in half.layers.iter().flatten().zip(full.layers.iter().flatten()) {
        let rel = (a - b).abs() / (a.abs() + 1e-9);
        assert!(rel < 0.10, "{a} vs {b}");
    }
}

#[test]
fn self_similarity_is_one_and_orthogonal_is_zero() {
    let p = ActivationProfile {
        model_tag: Provenance::Base,
        dataset_tag: "x".into(),
        layers: vec![vec![0.5, 1.5, 2.0], vec![3.0, 0.1, 0.4]],
        positions: 10,
    };
    let sims = profile_similarity(&p, &p).unwrap();
    for s in sims {
        assert!((s - 1.0).abs() < 1e-9);
    }

    let a = ActivationProfile {
        layers: vec![vec![1.0, 0.0]],
        ..p.clone()
    };
    let b = ActivationProfile {
        layers: vec![vec![0.0, 1.0]],
        ..p.clone()
    };
    assert!((profile_similarity(&a, &b).unwrap()[0]).abs() < 1e-12);

    let z = ActivationProfile {
        layers: vec![vec![0.0, 0.0]],
        ..p
    };
    assert!(matches!(
        profile_similarity(&a, &z),
        Err(Error::UndefinedSimilarity)
    ));
}

#[test]
fn report_rows_follow_fixed_order_and_csv_reparses_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |m: Provenance, b: BenchmarkTag, acc_num: usize, n: usize| EvalResult {
        model_tag: m,
        benchmark: b,
        split: Split::Test,
        accuracy: acc_num as f64 / n as f64,
        n_items: n,
        per_item: (0..n)
            .map(|i| PerItem {
                chosen: 0,
                correct: i < acc_num,
            })
            .collect(),
    };
    let results = vec![
        mk(Provenance::Baseline, BenchmarkTag::Update, 5, 7),
        mk(Provenance::Pre, BenchmarkTag::Unlearn, 3, 7),
        mk(Provenance::Base, BenchmarkTag::Unlearn, 2, 7),
        mk(Provenance::Surgery, BenchmarkTag::Retain, 4, 7),
    ];
    let sims = vec![SimilarityEntry {
        dataset: "rtn".into(),
        model_a: Provenance::Pre,
        model_b: Provenance::Pre,
        per_layer: vec![1.0, 1.0],
    }];
    let meta = ReportMeta {
        config_hash_hex: "deadbeef".into(),
        seed: 3,
    };
    let files = emit_report(&results, &sims, &meta, dir.path()).unwrap();
    assert!(files.iter().any(|f| f.ends_with("results.csv")));

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.starts_with("# config_hash=deadbeef seed=3"));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "model,unlearn,update,retain");
    let order: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(order, vec!["base", "pre", "surgery", "baseline"]);

    // Re-parse accuracies and compare exactly.
    for r in &rows[1..] {
        let cells: Vec<&str> = r.split(',').collect();
        for (ci, bench) in ["unlearn", "update", "retain"].iter().enumerate() {
            let cell = cells[ci + 1];
            if cell.is_empty() {
                continue;
            }
            let parsed: f64 = cell.parse().unwrap();
            let original = results
                .iter()
                .find(|res| res.model_tag.as_str() == cells[0] && res.benchmark.as_str() == *bench)
                .unwrap()
                .accuracy;
            assert_eq!(parsed, original, "cell {cell}");
        }
    }

    let sim_csv = std::fs::read_to_string(dir.path().join("similarity_rtn.csv")).unwrap();
    assert!(sim_csv.contains("pre,pre,1,1"));
}
