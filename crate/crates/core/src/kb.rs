//! Entity types, lexicons, and restaurant lookup.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::KbFact;
use crate::error::{Error, Result};
use crate::text::{self, PhraseTable};

/// The five requirement types every reservation collects, in vector order.
pub const BASE_TYPES: [&str; 5] = ["cuisine_type", "location", "num_people", "price_range", "atmosphere"];

const PROPERTY_NAMES: [(&str, &str); 6] = [
    ("cuisine_type", "R_cuisine"),
    ("location", "R_location"),
    ("num_people", "R_number"),
    ("price_range", "R_price"),
    ("atmosphere", "R_atmosphere"),
    ("dietary_restriction", "R_dietary"),
];

/// Properties that describe a restaurant but are never user requirements.
pub const DESCRIPTIVE_PROPERTIES: [&str; 3] = ["R_rating", "R_address", "R_phone"];

pub const RATING: &str = "R_rating";

/// A slot type such as `cuisine_type`. Ordering is the canonical rank: the
/// five base types first in their fixed order, then any others by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityType(String);

impl EntityType {
    pub fn new(name: impl Into<String>) -> Self {
        EntityType(name.into().to_lowercase())
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn base_rank(&self) -> Option<usize> {
        BASE_TYPES.iter().position(|b| *b == self.0)
    }

    /// Uppercase token used in delexicalized text, e.g. `CUISINE_TYPE`.
    pub fn token(&self) -> String {
        self.0.to_uppercase()
    }

    pub fn from_property(property: &str) -> Option<EntityType> {
        if DESCRIPTIVE_PROPERTIES.contains(&property) {
            return None;
        }
        if let Some((ty, _)) = PROPERTY_NAMES.iter().find(|(_, p)| *p == property) {
            return Some(EntityType::new(*ty));
        }
        property.strip_prefix("R_").map(EntityType::new)
    }

    pub fn property(&self) -> String {
        PROPERTY_NAMES
            .iter()
            .find(|(ty, _)| *ty == self.0)
            .map(|(_, p)| p.to_string())
            .unwrap_or_else(|| format!("R_{}", self.0))
    }

    pub fn base() -> Vec<EntityType> {
        BASE_TYPES.iter().map(|t| EntityType::new(*t)).collect()
    }
}

impl Ord for EntityType {
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |t: &EntityType| t.base_rank().unwrap_or(BASE_TYPES.len());
        key(self).cmp(&key(other)).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for EntityType {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn normalize_phrase(value: &str) -> String {
    text::tokenize(value).join(" ")
}

/// Known surface values per entity type.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(
    from = "BTreeMap<EntityType, BTreeSet<String>>",
    into = "BTreeMap<EntityType, BTreeSet<String>>"
)]
pub struct Lexicon {
    entries: BTreeMap<EntityType, BTreeSet<String>>,
    table: PhraseTable<EntityType>,
}

impl From<BTreeMap<EntityType, BTreeSet<String>>> for Lexicon {
    fn from(raw: BTreeMap<EntityType, BTreeSet<String>>) -> Self {
        let mut lexicon = Lexicon::default();
        for (ty, values) in raw {
            for v in values {
                lexicon.add(ty.clone(), &v);
            }
        }
        lexicon
    }
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl From<Lexicon> for BTreeMap<EntityType, BTreeSet<String>> {
    fn from(lexicon: Lexicon) -> Self {
        lexicon.entries
    }
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let mut lexicon = Lexicon::new();
        for record in kb.records() {
            for (property, value) in &record.properties {
                if let Some(ty) = EntityType::from_property(property) {
                    lexicon.add(ty, value);
                }
            }
        }
        lexicon
    }

    /// Adds a phrase; empty phrases are ignored.
    pub fn add(&mut self, ty: EntityType, value: &str) {
        let phrase = normalize_phrase(value);
        if phrase.is_empty() {
            return;
        }
        if self.entries.entry(ty).or_default().insert(phrase) {
            self.rebuild();
        }
    }

    pub fn merge(&mut self, other: &Lexicon) {
        for (ty, values) in &other.entries {
            self.entries
                .entry(ty.clone())
                .or_default()
                .extend(values.iter().cloned());
        }
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let mut table = PhraseTable::new();
        for (ty, values) in &self.entries {
            for v in values {
                table.insert(v.split(' ').map(str::to_string).collect(), ty.clone());
            }
        }
        self.table = table;
    }

    pub fn types(&self) -> impl Iterator<Item = &EntityType> {
        self.entries.keys()
    }

    pub fn values(&self, ty: &EntityType) -> impl Iterator<Item = &str> {
        self.entries.get(ty).into_iter().flatten().map(String::as_str)
    }

    pub fn contains(&self, ty: &EntityType, value: &str) -> bool {
        self.entries
            .get(ty)
            .is_some_and(|vs| vs.contains(&normalize_phrase(value)))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityMatch {
    /// Token span `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
    pub value: String,
}

/// Longest-match-first, left-to-right keyword matching over lowercased tokens.
pub fn match_entities<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<EntityMatch> {
    lexicon
        .table
        .find_all(tokens)
        .into_iter()
        .map(|(start, end, ty)| EntityMatch {
            start,
            end,
            entity_type: ty.clone(),
            value: tokens[start..end]
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KbRecord {
    pub name: String,
    pub properties: BTreeMap<String, String>,
}

impl KbRecord {
    pub fn new(name: impl Into<String>) -> Self {
        KbRecord {
            name: name.into(),
            properties: BTreeMap::new(),
        }
    }

    pub fn with(mut self, property: &str, value: &str) -> Self {
        self.properties.insert(property.to_string(), value.to_string());
        self
    }

    pub fn get(&self, property: &str) -> Option<&str> {
        self.properties.get(property).map(String::as_str)
    }

    pub fn rating(&self) -> Option<u32> {
        self.get(RATING).and_then(|r| r.parse().ok()).filter(|&r| r > 0)
    }

    pub fn slot_value(&self, ty: &EntityType) -> Option<&str> {
        self.get(&ty.property())
    }
}

/// Presentation order: rating descending, then name ascending.
pub fn presentation_order(a: &KbRecord, b: &KbRecord) -> Ordering {
    b.rating()
        .unwrap_or(0)
        .cmp(&a.rating().unwrap_or(0))
        .then_with(|| a.name.cmp(&b.name))
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    records: Vec<KbRecord>,
    by_name: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn from_records(records: Vec<KbRecord>) -> Result<Self> {
        let mut kb = KnowledgeBase::default();
        for record in records {
            for (property, value) in &record.properties {
                kb.insert_fact(KbFact {
                    name: record.name.clone(),
                    property: property.clone(),
                    value: value.clone(),
                })?;
            }
        }
        kb.validate()?;
        Ok(kb)
    }

    pub fn insert_fact(&mut self, fact: KbFact) -> Result<()> {
        let idx = match self.by_name.get(&fact.name) {
            Some(&i) => i,
            None => {
                self.records.push(KbRecord::new(fact.name.clone()));
                self.by_name.insert(fact.name.clone(), self.records.len() - 1);
                self.records.len() - 1
            }
        };
        let record = &mut self.records[idx];
        if record.properties.contains_key(&fact.property) {
            return Err(Error::Kb(format!(
                "duplicate property {} for {}",
                fact.property, fact.name
            )));
        }
        record.properties.insert(fact.property, fact.value);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if let Some(raw) = r.get(RATING) {
                if r.rating().is_none() {
                    return Err(Error::Kb(format!(
                        "rating {raw:?} of {} is not a positive integer",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[KbRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<KbRecord> {
        self.records
    }

    pub fn get(&self, name: &str) -> Option<&KbRecord> {
        self.by_name.get(name).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Records satisfying every slot, in presentation order.
pub fn query(kb: &KnowledgeBase, slots: &BTreeMap<EntityType, String>) -> Vec<KbRecord> {
    let mut hits: Vec<KbRecord> = kb
        .records()
        .iter()
        .filter(|r| {
            slots.iter().all(|(ty, want)| {
                r.slot_value(ty)
                    .is_some_and(|have| normalize_phrase(have) == normalize_phrase(want))
            })
        })
        .cloned()
        .collect();
    hits.sort_by(presentation_order);
    hits
}
