use super::*;

fn small_cfg() -> DataConfig {
    DataConfig {
        seed: 5,
        n_problematic: 8,
        n_outdated: 8,
        n_retain_pool: 10,
        unl_target_tokens: 8_000,
        upd_target_tokens: 6_000,
        rtn_target_tokens: 12_000,
        mcqa_per_entity: 6,
    }
}

#[test]
fn entity_generation_is_deterministic() {
    let a = generate_entities(9, 5, 5, 5).unwrap();
    let b = generate_entities(9, 5, 5, 5).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn default_counts_give_119_plus_119_plus_pool() {
    let cfg = DataConfig::default();
    let set = generate_entities(0, cfg.n_problematic, cfg.n_outdated, cfg.n_retain_pool).unwrap();
    assert_eq!(set.cohort(Cohort::Problematic).len(), 119);
    assert_eq!(set.cohort(Cohort::Outdated).len(), 119);
    assert_eq!(set.cohort(Cohort::RetainPool).len(), 160);
}

#[test]
fn all_names_unique_by_pairwise_scan() {
    let set = generate_entities(1, 119, 119, 160).unwrap();
    let names: Vec<&str> = set.entities.iter().map(|e| e.name.as_str()).collect();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            assert_ne!(names[i], names[j]);
            // Also no nesting, which the retain disjointness scan relies on.
            assert!(!names[i].contains(names[j]) && !names[j].contains(names[i]));
        }
    }
}

#[test]
fn slot_vocabularies_offer_at_least_50_values() {
    assert!(vocab::BIRTHPLACES.len() >= 50);
    assert!(vocab::OCCUPATIONS.len() >= 50);
    assert!(vocab::NOTABLE_WORKS.len() >= 50);
    assert!(vocab::AWARDS.len() >= 50);
    assert!(vocab::INSTITUTIONS.len() >= 50);
}

#[test]
fn entity_overflow_is_a_capacity_error() {
    let res = generate_entities(0, 4000, 1000, 1000);
    assert!(matches!(res, Err(Error::Capacity(_))));
}

#[test]
fn updated_variant_keeps_anchor_and_changes_mutable_slots() {
    let set = generate_entities(2, 3, 3, 3).unwrap();
    for e in set.cohort(Cohort::Outdated) {
        let upd = e.updated.as_ref().unwrap();
        assert_eq!(upd.birth_year, e.attrs.birth_year);
        assert_eq!(upd.birthplace, e.attrs.birthplace);
        let changed = MUTABLE_SLOTS
            .iter()
            .filter(|&&s| upd.get(s) != e.attrs.get(s))
            .count();
        assert!(changed >= 3, "only {changed} mutable slots changed");
        assert_eq!(changed, 4, "re-draw is disjoint on every mutable slot");
    }
}

#[test]
fn biography_embeds_every_attribute_string() {
    let set = generate_entities(3, 2, 2, 2).unwrap();
    for e in &set.entities {
        let doc = render_biography(e, Variant::Original, 7, 450).unwrap();
        assert!(doc.text.contains(&e.name));
        for slot in ALL_SLOTS {
            let v = e.attrs.get(slot);
            assert!(doc.text.contains(&v), "{} missing {v}", doc.id);
        }
    }
}

#[test]
fn updated_biography_requires_outdated_cohort() {
    let set = generate_entities(3, 2, 2, 2).unwrap();
    let problematic = set.cohort(Cohort::Problematic)[0];
    assert!(matches!(
        render_biography(problematic, Variant::Updated, 1, 400),
        Err(Error::Contract(_))
    ));
}

#[test]
fn default_corpus_sizes_hit_targets_within_20_percent() {
    let cfg = DataConfig::default();
    let (_, triple) = generate_dataset(&cfg).unwrap();
    let counts = triple.token_counts();
    let within = |actual: usize, target: usize, frac: f64| {
        let lo = (target as f64 * (1.0 - frac)) as usize;
        let hi = (target as f64 * (1.0 + frac)) as usize;
        (lo..=hi).contains(&actual)
    };
    assert!(
        within(counts.unl_total(), cfg.unl_target_tokens, 0.2),
        "unl {} vs target {}",
        counts.unl_total(),
        cfg.unl_target_tokens
    );
    assert!(
        within(counts.upd, cfg.upd_target_tokens, 0.2),
        "upd {} vs target {}",
        counts.upd,
        cfg.upd_target_tokens
    );
    assert!(
        within(counts.rtn, cfg.rtn_target_tokens, 0.05),
        "rtn {} vs target {}",
        counts.rtn,
        cfg.rtn_target_tokens
    );
}

#[test]
fn retain_corpus_never_mentions_unlearn_subjects() {
    let (entities, triple) = generate_dataset(&small_cfg()).unwrap();
    // Brute-force substring scan, independent of the builder's guarantees.
    for doc in &triple.rtn {
        for e in entities.unlearn_entities() {
            assert!(
                !doc.text.contains(&e.name),
                "retain doc {} mentions {}",
                doc.id,
                e.name
            );
        }
    }
}

#[test]
fn retain_corpus_is_deterministic_and_rejects_tiny_targets() {
    let set = generate_entities(4, 2, 2, 4).unwrap();
    let pool = set.cohort(Cohort::RetainPool);
    let a = build_retain_corpus(11, 15_000, &pool).unwrap();
    let b = build_retain_corpus(11, 15_000, &pool).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.text, y.text);
    }
    assert!(build_retain_corpus(11, 5_000, &pool).is_err());
}

#[test]
fn dataset_generation_is_fully_deterministic() {
    let (ea, ta) = generate_dataset(&small_cfg()).unwrap();
    let (eb, tb) = generate_dataset(&small_cfg()).unwrap();
    assert_eq!(
        serde_json::to_string(&ea).unwrap(),
        serde_json::to_string(&eb).unwrap()
    );
    let texts = |t: &DatasetTriple| {
        t.unl_all()
            .iter()
            .map(|d| d.text.clone())
            .chain(t.upd.iter().map(|d| d.text.clone()))
            .chain(t.rtn.iter().map(|d| d.text.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(texts(&ta), texts(&tb));
}

#[test]
fn update_documents_map_onto_outdated_subjects() {
    let (entities, triple) = generate_dataset(&small_cfg()).unwrap();
    triple.validate(&entities).unwrap();
    let mut outdated: Vec<u32> = triple.unl_outdated.iter().filter_map(|d| d.entity_id).collect();
    let mut updated: Vec<u32> = triple.upd.iter().filter_map(|d| d.entity_id).collect();
    outdated.sort_unstable();
    updated.sort_unstable();
    assert_eq!(outdated, updated, "same-subject bijection");
}

#[test]
fn mcqa_label_positions_are_roughly_uniform() {
    let cfg = DataConfig::default();
    let set = generate_entities(0, cfg.n_problematic, cfg.n_outdated, cfg.n_retain_pool).unwrap();
    let items = generate_mcqa(
        &set.unlearn_entities(),
        Variant::Original,
        10,
        42,
        BenchmarkTag::Unlearn,
    )
    .unwrap();
    assert!(items.len() >= 2_000, "need a large sample, got {}", items.len());
    let mut counts = [0usize; 3];
    for item in &items {
        counts[item.label as usize] += 1;
    }
    for (pos, &c) in counts.iter().enumerate() {
        let frac = c as f64 / items.len() as f64;
        assert!(
            (0.28..=0.39).contains(&frac),
            "label position {pos} frequency {frac}"
        );
    }
}

#[test]
fn mcqa_split_sizes_are_40_60() {
    let set = generate_entities(6, 10, 10, 10).unwrap();
    let items = generate_mcqa(
        &set.unlearn_entities(),
        Variant::Original,
        10,
        7,
        BenchmarkTag::Unlearn,
    )
    .unwrap();
    let val = items.iter().filter(|i| i.split == Split::Validation).count();
    let expected = (items.len() as f64 * 0.4).round() as usize;
    assert!(
        val.abs_diff(expected) <= 1,
        "validation split {val} vs expected {expected}"
    );
}

#[test]
fn unlearn_and_update_items_disagree_on_mutable_slots() {
    let set = generate_entities(8, 4, 4, 4).unwrap();
    let outdated = set.cohort(Cohort::Outdated);
    for &e in &outdated {
        for slot in MUTABLE_SLOTS {
            let old = e.attrs.get(slot);
            let new = e.updated.as_ref().unwrap().get(slot);
            assert_ne!(old, new, "entity {} slot {slot:?}", e.id);
        }
    }
}

#[test]
fn every_item_correct_choice_matches_entity_attribute() {
    let (entities, _) = generate_dataset(&small_cfg()).unwrap();
    let benches = generate_benchmarks(&entities, 6, 5).unwrap();
    let check = |items: &[MCQAItem], variant: Variant| {
        for item in items {
            // Recover the entity by name from the question text.
            let entity = entities
                .entities
                .iter()
                .find(|e| item.question.contains(&e.name))
                .expect("question names an entity");
            let attrs = entity.attrs_for(variant).unwrap();
            let matches_some_slot = ALL_SLOTS
                .iter()
                .any(|&s| attrs.get(s) == item.correct_choice());
            assert!(matches_some_slot, "{}: {:?}", item.question, item.choices);
        }
    };
    check(&benches.unlearn, Variant::Original);
    check(&benches.update, Variant::Updated);
    check(&benches.retain, Variant::Original);
}

#[test]
fn mcqa_insufficient_pool_is_a_capacity_error() {
    let set = generate_entities(10, 1, 1, 1).unwrap();
    let one = vec![set.cohort(Cohort::Problematic)[0]];
    assert!(matches!(
        generate_mcqa(&one, Variant::Original, 2, 0, BenchmarkTag::Unlearn),
        Err(Error::Capacity(_))
    ));
}

#[test]
fn document_and_mcqa_jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (entities, triple) = generate_dataset(&small_cfg()).unwrap();

    let doc_path = dir.path().join("docs.jsonl");
    write_documents(&doc_path, &triple.upd).unwrap();
    let docs = read_documents(&doc_path).unwrap();
    assert_eq!(docs.len(), triple.upd.len());
    for (a, b) in docs.iter().zip(&triple.upd) {
        assert_eq!(a.text, b.text);
        assert_eq!(a.token_ids, b.token_ids, "token ids rebuilt on load");
    }

    let benches = generate_benchmarks(&entities, 3, 5).unwrap();
    let mcqa_path = dir.path().join("mcqa.jsonl");
    write_mcqa(&mcqa_path, &benches.retain).unwrap();
    let items = read_mcqa(&mcqa_path).unwrap();
    assert_eq!(
        serde_json::to_string(&items).unwrap(),
        serde_json::to_string(&benches.retain).unwrap()
    );
}
