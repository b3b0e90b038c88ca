//! Templated text rendering for biographies and retain documents.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::entities::{Cohort, Entity, Slot, Variant, ALL_SLOTS};
use super::tokenizer::token_len;
use super::vocab;
use super::{CorpusTag, Document};
use crate::error::{Error, Result};

fn fill2(template: &str, a: &str, b: &str) -> String {
    template.replace("{0}", a).replace("{1}", b)
}

pub(crate) fn slot_templates(slot: Slot) -> &'static [&'static str] {
    match slot {
        Slot::BirthYear => vocab::BIRTH_YEAR_TEMPLATES,
        Slot::Birthplace => vocab::BIRTHPLACE_TEMPLATES,
        Slot::Occupation => vocab::OCCUPATION_TEMPLATES,
        Slot::NotableWork => vocab::WORK_TEMPLATES,
        Slot::Award => vocab::AWARD_TEMPLATES,
        Slot::Institution => vocab::INSTITUTION_TEMPLATES,
    }
}

fn slot_sentence(entity: &Entity, variant: Variant, slot: Slot, template_idx: usize) -> String {
    let attrs = entity.attrs_for(variant).expect("variant checked by caller");
    fill2(
        slot_templates(slot)[template_idx],
        &entity.name,
        &attrs.get(slot),
    )
}

/// Renders one biography as newline-separated statements, each fact
/// hard-wrapped so its value starts a line.
///
/// The first six statements give every slot in canonical phrasing; padding
/// then cycles seed-shuffled alternate phrasings of the same facts until the
/// token target is met (within half a statement). The updated variant states
/// the re-drawn facts for the same subject, so old and new text conflict on
/// every mutable slot.
pub fn render_biography(
    entity: &Entity,
    variant: Variant,
    seed: u64,
    target_tokens: usize,
) -> Result<Document> {
    if variant == Variant::Updated && entity.cohort != Cohort::Outdated {
        return Err(Error::Contract(format!(
            "updated biographies exist only for the outdated cohort, entity {} is {:?}",
            entity.id, entity.cohort
        )));
    }
    entity.attrs_for(variant)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(ALL_SLOTS.len());
    for slot in ALL_SLOTS {
        sentences.push(slot_sentence(entity, variant, slot, 0));
    }

    // Alternate phrasings for padding, reshuffled each cycle.
    let mut pad_pool: Vec<(Slot, usize)> = ALL_SLOTS
        .iter()
        .flat_map(|&s| (1..slot_templates(s).len()).map(move |t| (s, t)))
        .collect();
    pad_pool.shuffle(&mut rng);

    let mut text = sentences.join("\n");
    let mut cursor = 0;
    while token_len(&text) < target_tokens {
        if cursor == pad_pool.len() {
            cursor = 0;
            pad_pool.shuffle(&mut rng);
        }
        let (slot, tmpl) = pad_pool[cursor];
        cursor += 1;
        let next = slot_sentence(entity, variant, slot, tmpl);
        if token_len(&text) + next.len() / 2 >= target_tokens {
            break;
        }
        text.push('\n');
        text.push_str(&next);
    }

    let (tag, prefix) = match (entity.cohort, variant) {
        (Cohort::Problematic, Variant::Original) => (CorpusTag::UnlProblematic, "unl-prob"),
        (Cohort::Outdated, Variant::Original) => (CorpusTag::UnlOutdated, "unl-out"),
        (Cohort::Outdated, Variant::Updated) => (CorpusTag::Upd, "upd"),
        (Cohort::RetainPool, Variant::Original) => (CorpusTag::Rtn, "rtn-bio"),
        _ => unreachable!(),
    };
    Ok(Document::new(
        format!("{prefix}-{:04}", entity.id),
        Some(entity.id),
        tag,
        text,
    ))
}

fn topic_sentence(rng: &mut ChaCha8Rng) -> String {
    let topic = vocab::TOPICS[rng.gen_range(0..vocab::TOPICS.len())];
    let tmpl = vocab::TOPIC_TEMPLATES[rng.gen_range(0..vocab::TOPIC_TEMPLATES.len())];
    tmpl.replace("{0}", topic)
}

fn profile_document(entity: &Entity, seed: u64, target_tokens: usize, serial: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(ALL_SLOTS.len());
    for slot in ALL_SLOTS {
        let n = slot_templates(slot).len();
        sentences.push(slot_sentence(entity, Variant::Original, slot, rng.gen_range(0..n)));
    }
    let mut text = sentences.join("\n");
    while token_len(&text) < target_tokens {
        let next = topic_sentence(&mut rng);
        text.push('\n');
        text.push_str(&next);
    }
    Document::new(
        format!("rtn-e{:04}-{serial}", entity.id),
        Some(entity.id),
        CorpusTag::Rtn,
        text,
    )
}

fn topic_document(seed: u64, target_tokens: usize, serial: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = topic_sentence(&mut rng);
    while token_len(&text) < target_tokens {
        let next = topic_sentence(&mut rng);
        text.push('\n');
        text.push_str(&next);
    }
    Document::new(format!("rtn-t{serial:05}"), None, CorpusTag::Rtn, text)
}

/// Encyclopedic/news-style retain corpus over the retain-pool entities plus
/// abstract topics. Unlearn and update subjects never appear; that is
/// verified separately by scanning the rendered text.
pub fn build_retain_corpus(
    seed: u64,
    target_tokens: usize,
    retain_entities: &[&Entity],
) -> Result<Vec<Document>> {
    if target_tokens < 10_000 {
        return Err(Error::Contract(format!(
            "retain corpus target must be >= 10k tokens, got {target_tokens}"
        )));
    }
    if retain_entities.is_empty() {
        return Err(Error::Contract("retain pool is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7274_6e5f); // "rtn_"
    let mut docs = Vec::new();
    let mut total = 0usize;
    let mut serial = 0usize;
    while total < target_tokens {
        let doc_target = rng.gen_range(380..520);
        let doc_seed = rng.gen::<u64>();
        // Every fifth document is entity-free topic text.
        let doc = if serial % 5 == 4 {
            topic_document(doc_seed, doc_target, serial)
        } else {
            let entity = retain_entities[(serial - serial / 5) % retain_entities.len()];
            profile_document(entity, doc_seed, doc_target, serial)
        };
        total += doc.token_ids.len();
        docs.push(doc);
        serial += 1;
    }
    Ok(docs)
}
