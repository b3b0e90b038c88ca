//! Multiple-choice benchmark generation.
//!
//! Every item probes one attribute slot of one entity; the two distractors
//! are other entities' values for the same slot, so scoring tests the
//! name-to-value binding rather than slot-type recognition.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::entities::{Entity, Slot, Variant, ALL_SLOTS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkTag {
    Unlearn,
    Update,
    Retain,
}

impl BenchmarkTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkTag::Unlearn => "unlearn",
            BenchmarkTag::Update => "update",
            BenchmarkTag::Retain => "retain",
        }
    }
}

impl std::fmt::Display for BenchmarkTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Validation,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MCQAItem {
    pub question: String,
    pub choices: [String; 3],
    pub label: u8,
    pub source_corpus: BenchmarkTag,
    pub split: Split,
}

impl MCQAItem {
    pub fn correct_choice(&self) -> &str {
        &self.choices[self.label as usize]
    }
}

/// Interrogative plus a cloze tail echoing the canonical statement lead-in,
/// so the scorer conditions on the same surface form the corpora teach.
fn question_for(slot: Slot, name: &str) -> String {
    match slot {
        Slot::BirthYear => {
            format!("In which year was {name} born? {name} was born in the year")
        }
        Slot::Birthplace => {
            format!("Where was {name} born? The birthplace of {name} was")
        }
        Slot::Occupation => {
            format!("What was the occupation of {name}? The occupation of {name} was")
        }
        Slot::NotableWork => {
            format!("Which work is {name} known for? {name} is best known for")
        }
        Slot::Award => {
            format!("Which award did {name} receive? {name} received the")
        }
        Slot::Institution => {
            format!(
                "Which institution was {name} associated with? {name} was associated with the"
            )
        }
    }
}

/// Generates `n_per_entity` items per entity, cycling the six slots in a
/// seed-shuffled order, with a deterministic 40/60 validation/test split and
/// the correct-choice position drawn uniformly.
pub fn generate_mcqa(
    entities: &[&Entity],
    variant: Variant,
    n_per_entity: usize,
    seed: u64,
    source: BenchmarkTag,
) -> Result<Vec<MCQAItem>> {
    if n_per_entity == 0 {
        return Err(Error::Contract("n_per_entity must be >= 1".into()));
    }
    if entities.is_empty() {
        return Err(Error::Contract("benchmark entity pool is empty".into()));
    }

    // Per-slot distractor pools across the provided entities.
    let mut pools: Vec<Vec<String>> = Vec::with_capacity(ALL_SLOTS.len());
    for slot in ALL_SLOTS {
        let mut values: Vec<String> = Vec::new();
        for e in entities {
            let v = e.attrs_for(variant)?.get(slot);
            if !values.contains(&v) {
                values.push(v);
            }
        }
        if values.len() < 3 {
            return Err(Error::Capacity(format!(
                "slot {slot:?} offers only {} distinct values; 3 needed",
                values.len()
            )));
        }
        pools.push(values);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d63_7161); // "mcqa"
    let mut items = Vec::with_capacity(entities.len() * n_per_entity);
    for entity in entities {
        let mut slot_order = ALL_SLOTS.to_vec();
        slot_order.shuffle(&mut rng);
        for k in 0..n_per_entity {
            let slot = slot_order[k % slot_order.len()];
            let correct = entity.attrs_for(variant)?.get(slot);
            let pool = &pools[ALL_SLOTS.iter().position(|&s| s == slot).unwrap()];

            let mut distractors = Vec::with_capacity(2);
            let mut attempts = 0;
            while distractors.len() < 2 {
                let candidate = &pool[rng.gen_range(0..pool.len())];
                if *candidate != correct && !distractors.contains(candidate) {
                    distractors.push(candidate.clone());
                }
                attempts += 1;
                if attempts > 10_000 {
                    return Err(Error::Capacity(format!(
                        "cannot draw two distractors for slot {slot:?}"
                    )));
                }
            }

            let label = rng.gen_range(0..3u8);
            let mut choices: [String; 3] = Default::default();
            choices[label as usize] = correct;
            let mut d = distractors.into_iter();
            for (i, c) in choices.iter_mut().enumerate() {
                if i != label as usize {
                    *c = d.next().unwrap();
                }
            }

            let idx = items.len();
            let split = if idx % 5 < 2 {
                Split::Validation
            } else {
                Split::Test
            };
            items.push(MCQAItem {
                question: question_for(slot, &entity.name),
                choices,
                label,
                source_corpus: source,
                split,
            });
        }
    }
    Ok(items)
}
