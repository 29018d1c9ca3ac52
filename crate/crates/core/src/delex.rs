//! Delexicalization: entity-type vectors for user turns and
//! `RESTAURANT_<i>_<PROPERTY>` placeholders for restaurant-specific text.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::is_api_call;
use crate::error::{Error, Result};
use crate::kb::{presentation_order, EntityType, KbRecord, Lexicon};
use crate::state::{analyze_user, Classifier, DialogState};
use crate::text::{self, Chunk, PhraseTable};

pub const NONE_MARKER: &str = "NONE";
pub const DUBIOUS_MARKER: &str = "DUBIOUS";

/// Property suffixes allowed in placeholders, paired with their KB property.
pub const PLACEHOLDER_PROPERTIES: [(&str, &str); 8] = [
    ("CUISINE", "R_cuisine"),
    ("LOCATION", "R_location"),
    ("NUMBER", "R_number"),
    ("PRICE", "R_price"),
    ("ATMOSPHERE", "R_atmosphere"),
    ("RATING", "R_rating"),
    ("ADDRESS", "R_address"),
    ("PHONE", "R_phone"),
];

pub const NAME: &str = "NAME";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Verbatim,
    EntityVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Marker {
    None,
    TypePresent,
    Dubious,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelexUtterance {
    pub tokens: Vec<String>,
    pub form: Form,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<(EntityType, Marker)>,
}

impl DelexUtterance {
    pub fn verbatim(tokens: Vec<String>) -> Self {
        DelexUtterance {
            tokens,
            form: Form::Verbatim,
            markers: Vec::new(),
        }
    }

    pub fn from_markers(markers: Vec<(EntityType, Marker)>) -> Self {
        let tokens = markers
            .iter()
            .map(|(ty, m)| match m {
                Marker::None => NONE_MARKER.to_string(),
                Marker::TypePresent => ty.token(),
                Marker::Dubious => DUBIOUS_MARKER.to_string(),
            })
            .collect();
        DelexUtterance {
            tokens,
            form: Form::EntityVector,
            markers,
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_api_call(&self) -> bool {
        self.tokens.first().map(String::as_str) == Some("api_call")
    }

    /// Restaurant indices named by `RESTAURANT_<i>_NAME` tokens.
    pub fn proposed_restaurant(&self) -> Option<usize> {
        self.tokens.iter().find_map(|t| {
            let p: Placeholder = t.trim_end_matches(|c: char| !c.is_alphanumeric()).parse().ok()?;
            (p.property == NAME).then_some(p.index)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placeholder {
    pub index: usize,
    pub property: String,
}

impl Placeholder {
    pub fn new(index: usize, property: &str) -> Self {
        Placeholder {
            index,
            property: property.to_string(),
        }
    }

    /// The KB property this placeholder stands for, `None` for the name.
    pub fn kb_property(&self) -> Option<&'static str> {
        PLACEHOLDER_PROPERTIES
            .iter()
            .find(|(p, _)| *p == self.property)
            .map(|(_, kb)| *kb)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RESTAURANT_{}_{}", self.index, self.property)
    }
}

impl FromStr for Placeholder {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let rest = s.strip_prefix("RESTAURANT_").ok_or(())?;
        let (index, property) = rest.split_once('_').ok_or(())?;
        let index: usize = index.parse().map_err(|_| ())?;
        let known = property == NAME || PLACEHOLDER_PROPERTIES.iter().any(|(p, _)| *p == property);
        if index == 0 || !known {
            return Err(());
        }
        Ok(Placeholder::new(index, property))
    }
}

fn placeholder_suffix(kb_property: &str) -> Option<&'static str> {
    PLACEHOLDER_PROPERTIES
        .iter()
        .find(|(_, kb)| *kb == kb_property)
        .map(|(p, _)| *p)
}

/// Placeholder bindings for the current result set.
///
/// Each placeholder names exactly one surface value. Restaurants in one
/// result set usually share their requirement values, so rewriting text
/// maps a shared value to the placeholder of the best-ranked restaurant.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlaceholderMap {
    bindings: Vec<(Placeholder, String)>,
}

impl PlaceholderMap {
    pub fn bind(&mut self, placeholder: Placeholder, value: &str) {
        if let Some(slot) = self.bindings.iter_mut().find(|(p, _)| *p == placeholder) {
            slot.1 = value.to_string();
        } else {
            self.bindings.push((placeholder, value.to_string()));
        }
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn resolve(&self, placeholder: &Placeholder) -> Option<&str> {
        self.bindings
            .iter()
            .find(|(p, _)| p == placeholder)
            .map(|(_, v)| v.as_str())
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&Placeholder, &str)> {
        self.bindings.iter().map(|(p, v)| (p, v.as_str()))
    }

    fn rewrite_table(&self) -> PhraseTable<String> {
        let mut ordered: Vec<&(Placeholder, String)> = self.bindings.iter().collect();
        ordered.sort_by_key(|(p, _)| (p.index, p.property != NAME));
        let mut table = PhraseTable::new();
        for (p, v) in ordered {
            table.insert(text::tokenize(v), p.to_string());
        }
        table
    }

    /// Replace bound surface values with their placeholders.
    pub fn rewrite(&self, chunks: &[Chunk]) -> Vec<Chunk> {
        if self.bindings.is_empty() {
            return chunks.to_vec();
        }
        text::substitute(chunks, &self.rewrite_table())
    }

    /// Replace placeholders with their surface values.
    pub fn lexicalize(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| {
                let core = t.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '_');
                match core.parse::<Placeholder>().ok().and_then(|p| self.resolve(&p)) {
                    Some(v) => format!("{v}{}", &t[core.len()..]),
                    None => t.clone(),
                }
            })
            .collect()
    }
}

/// Delexicalize a user turn against the state from before the turn.
pub fn delex_user(
    utterance: &str,
    state: &DialogState,
    lexicon: &Lexicon,
    dubious_clf: &Classifier,
    types: &[EntityType],
) -> DelexUtterance {
    let analysis = analyze_user(utterance, lexicon, dubious_clf);
    if analysis.matches.is_empty() {
        return DelexUtterance::verbatim(text::render(&analysis.chunks));
    }
    let markers = types
        .iter()
        .map(|ty| {
            let marker = if state.slots.contains_key(ty) {
                Marker::TypePresent
            } else if analysis.matches.iter().any(|m| &m.entity_type == ty) {
                if analysis.dubious {
                    Marker::Dubious
                } else {
                    Marker::TypePresent
                }
            } else {
                Marker::None
            };
            (ty.clone(), marker)
        })
        .collect();
    DelexUtterance::from_markers(markers)
}

/// Order results for presentation and bind their placeholders.
pub fn delex_results(results: &[KbRecord]) -> Result<(Vec<String>, PlaceholderMap)> {
    if results.is_empty() {
        return Err(Error::NoResults);
    }
    let mut ordered: Vec<&KbRecord> = results.iter().collect();
    ordered.sort_by(|a, b| presentation_order(a, b));
    let mut map = PlaceholderMap::default();
    let mut lines = Vec::new();
    for (i, record) in ordered.iter().enumerate() {
        let index = i + 1;
        let name = Placeholder::new(index, NAME);
        map.bind(name.clone(), &record.name);
        for (property, value) in &record.properties {
            let rewritten = match placeholder_suffix(property) {
                Some(suffix) => {
                    let p = Placeholder::new(index, suffix);
                    map.bind(p.clone(), value);
                    p.to_string()
                }
                None => value.clone(),
            };
            lines.push(format!("{name} {property} {rewritten}"));
        }
    }
    Ok((lines, map))
}

fn state_value_table(state: &DialogState, types: Option<&[EntityType]>) -> PhraseTable<String> {
    let mut table = PhraseTable::new();
    for (ty, value) in &state.slots {
        let replacement = match types {
            Some(known) if !known.contains(ty) => String::new(),
            _ => ty.token(),
        };
        table.insert(text::tokenize(value), replacement);
    }
    table
}

/// Delexicalize a system candidate for cluster lookup. api_call candidates
/// stay verbatim since they are ranked by edit distance instead.
pub fn delex_candidate(candidate: &str, state: &DialogState) -> DelexUtterance {
    let chunks = text::chunks(candidate);
    if is_api_call(candidate) {
        return DelexUtterance::verbatim(text::render(&chunks));
    }
    let chunks = state.placeholder_map.rewrite(&chunks);
    let chunks = text::substitute(&chunks, &state_value_table(state, None));
    DelexUtterance::verbatim(text::render(&chunks))
}

/// Delexicalize a system turn that enters the dialog history.
///
/// api_call turns have their slot values replaced by type tokens; values of
/// types outside `types` are dropped so the call keeps the shape the model
/// was trained on.
pub fn delex_system(utterance: &str, state: &DialogState, types: &[EntityType]) -> DelexUtterance {
    if !is_api_call(utterance) {
        return delex_candidate(utterance, state);
    }
    let chunks = text::chunks(utterance);
    let rewritten = text::substitute(&chunks, &state_value_table(state, Some(types)));
    DelexUtterance::verbatim(text::render(&rewritten).into_iter().filter(|t| !t.is_empty()).collect())
}
