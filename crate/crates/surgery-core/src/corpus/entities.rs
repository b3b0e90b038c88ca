//! Synthetic subjects and their attribute bindings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use super::vocab;
use crate::error::{Error, Result};

/// The six attribute slots every entity carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    BirthYear,
    Birthplace,
    Occupation,
    NotableWork,
    Award,
    Institution,
}

pub const ALL_SLOTS: [Slot; 6] = [
    Slot::BirthYear,
    Slot::Birthplace,
    Slot::Occupation,
    Slot::NotableWork,
    Slot::Award,
    Slot::Institution,
];

/// Slots re-drawn when an entity's biography is updated; birth year and
/// birthplace anchor the updated text to the same subject.
pub const MUTABLE_SLOTS: [Slot; 4] = [
    Slot::Occupation,
    Slot::NotableWork,
    Slot::Award,
    Slot::Institution,
];

impl Slot {
    pub fn is_mutable(self) -> bool {
        MUTABLE_SLOTS.contains(&self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributes {
    pub birth_year: u16,
    pub birthplace: String,
    pub occupation: String,
    pub notable_work: String,
    pub award: String,
    pub institution: String,
}

impl Attributes {
    pub fn get(&self, slot: Slot) -> String {
        match slot {
            Slot::BirthYear => self.birth_year.to_string(),
            Slot::Birthplace => self.birthplace.clone(),
            Slot::Occupation => self.occupation.clone(),
            Slot::NotableWork => self.notable_work.clone(),
            Slot::Award => self.award.clone(),
            Slot::Institution => self.institution.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Problematic,
    Outdated,
    RetainPool,
}

/// Which attribute binding a biography or benchmark asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Updated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub name: String,
    pub cohort: Cohort,
    pub attrs: Attributes,
    /// Present only for the outdated cohort: the replacement facts.
    pub updated: Option<Attributes>,
}

impl Entity {
    pub fn attrs_for(&self, variant: Variant) -> Result<&Attributes> {
        match variant {
            Variant::Original => Ok(&self.attrs),
            Variant::Updated => self.updated.as_ref().ok_or_else(|| {
                Error::Contract(format!(
                    "entity {} ({:?}) has no updated attributes",
                    self.id, self.cohort
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntitySet {
    pub seed: u64,
    pub entities: Vec<Entity>,
}

impl EntitySet {
    pub fn cohort(&self, cohort: Cohort) -> Vec<&Entity> {
        self.entities.iter().filter(|e| e.cohort == cohort).collect()
    }

    pub fn unlearn_entities(&self) -> Vec<&Entity> {
        self.entities
            .iter()
            .filter(|e| matches!(e.cohort, Cohort::Problematic | Cohort::Outdated))
            .collect()
    }

    pub fn by_id(&self, id: u32) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }
}

fn slot_pool(slot: Slot) -> &'static [&'static str] {
    match slot {
        Slot::BirthYear => unreachable!("birth years are drawn numerically"),
        Slot::Birthplace => vocab::BIRTHPLACES,
        Slot::Occupation => vocab::OCCUPATIONS,
        Slot::NotableWork => vocab::NOTABLE_WORKS,
        Slot::Award => vocab::AWARDS,
        Slot::Institution => vocab::INSTITUTIONS,
    }
}

fn draw_attributes(rng: &mut ChaCha8Rng) -> Attributes {
    let pick = |rng: &mut ChaCha8Rng, pool: &'static [&'static str]| -> String {
        pool[rng.gen_range(0..pool.len())].to_string()
    };
    Attributes {
        birth_year: rng.gen_range(1850..2000),
        birthplace: pick(rng, vocab::BIRTHPLACES),
        occupation: pick(rng, vocab::OCCUPATIONS),
        notable_work: pick(rng, vocab::NOTABLE_WORKS),
        award: pick(rng, vocab::AWARDS),
        institution: pick(rng, vocab::INSTITUTIONS),
    }
}

/// Re-draws every mutable slot to a value different from the original, so
/// updated biographies conflict with the outdated ones on all four slots.
fn draw_updated(rng: &mut ChaCha8Rng, original: &Attributes) -> Result<Attributes> {
    let mut updated = original.clone();
    for slot in MUTABLE_SLOTS {
        let pool = slot_pool(slot);
        let old = original.get(slot);
        let mut attempts = 0;
        loop {
            let candidate = pool[rng.gen_range(0..pool.len())];
            if candidate != old {
                match slot {
                    Slot::Occupation => updated.occupation = candidate.to_string(),
                    Slot::NotableWork => updated.notable_work = candidate.to_string(),
                    Slot::Award => updated.award = candidate.to_string(),
                    Slot::Institution => updated.institution = candidate.to_string(),
                    _ => unreachable!(),
                }
                break;
            }
            attempts += 1;
            if attempts > 1000 {
                return Err(Error::Capacity(format!(
                    "cannot re-draw a distinct value for {slot:?}"
                )));
            }
        }
    }
    Ok(updated)
}

/// Deterministically generates the problematic / outdated / retain-pool
/// entities with unique names and fully populated attribute slots.
pub fn generate_entities(
    seed: u64,
    n_problematic: usize,
    n_outdated: usize,
    n_retain_pool: usize,
) -> Result<EntitySet> {
    if n_problematic == 0 || n_outdated == 0 || n_retain_pool == 0 {
        return Err(Error::Contract("entity counts must be >= 1".into()));
    }
    let total = n_problematic + n_outdated + n_retain_pool;
    let name_capacity = vocab::FIRST_NAMES.len() * vocab::LAST_NAMES.len();
    if total > name_capacity {
        return Err(Error::Capacity(format!(
            "{total} entities requested but only {name_capacity} unique names exist"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Unique names: shuffle the full cross product and take a prefix.
    let mut name_ids: Vec<(usize, usize)> = (0..vocab::FIRST_NAMES.len())
        .flat_map(|f| (0..vocab::LAST_NAMES.len()).map(move |l| (f, l)))
        .collect();
    name_ids.shuffle(&mut rng);

    let mut seen = HashSet::new();
    let mut entities = Vec::with_capacity(total);
    for (i, &(f, l)) in name_ids.iter().take(total).enumerate() {
        let name = format!("{} {}", vocab::FIRST_NAMES[f], vocab::LAST_NAMES[l]);
        if !seen.insert(name.clone()) {
            return Err(Error::Capacity(format!("duplicate name drawn: {name}")));
        }
        let cohort = if i < n_problematic {
            Cohort::Problematic
        } else if i < n_problematic + n_outdated {
            Cohort::Outdated
        } else {
            Cohort::RetainPool
        };
        let attrs = draw_attributes(&mut rng);
        let updated = if cohort == Cohort::Outdated {
            Some(draw_updated(&mut rng, &attrs)?)
        } else {
            None
        };
        entities.push(Entity {
            id: i as u32,
            name,
            cohort,
            attrs,
            updated,
        });
    }

    Ok(EntitySet { seed, entities })
}
