//! Key-value dialog state, updated by keyword matching plus two classifiers:
//! one rejects hedged (dubious) mentions, the other picks which of several
//! same-type mentions is the actual requirement.

mod classifier;

use std::collections::BTreeMap;

pub use classifier::Classifier;

use crate::corpus::{is_api_call, Dialog};
use crate::delex::{delex_results, PlaceholderMap};
use crate::error::Result;
use crate::kb::{match_entities, EntityMatch, EntityType, KbRecord, Lexicon};
use crate::text::{self, Chunk};

pub const DUBIOUS: &str = "dubious";
pub const NOT_DUBIOUS: &str = "not_dubious";

/// System reply that follows a hedged user turn in the training data.
pub const WHENEVER_READY: &str = "whenever you're ready";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DialogState {
    pub slots: BTreeMap<EntityType, String>,
    pub placeholder_map: PlaceholderMap,
    /// Restaurant names in presentation order after the latest api_call.
    pub presented: Vec<String>,
    pub selected_restaurant: Option<String>,
    /// 1-based presentation index of the most recent proposal.
    pub proposed: Option<usize>,
}

impl DialogState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn update(&self, user_utterance: &str, lexicon: &Lexicon, clf1: &Classifier, clf2: &Classifier) -> Self {
        update_state(self, user_utterance, lexicon, clf1, clf2)
    }

    /// The system proposed the `index`-th presented restaurant.
    pub fn note_proposal(&mut self, index: usize) {
        if index >= 1 && index <= self.presented.len() {
            self.proposed = Some(index);
        }
    }

    /// The user accepted the pending proposal.
    pub fn confirm_selection(&mut self) {
        if let Some(i) = self.proposed {
            self.selected_restaurant = self.presented.get(i - 1).cloned();
        }
    }

    /// Presentation index of the selected restaurant.
    pub fn selected_index(&self) -> Option<usize> {
        let name = self.selected_restaurant.as_ref()?;
        self.presented.iter().position(|n| n == name).map(|i| i + 1)
    }
}

/// Keyword matches and the dubious verdict for one user turn.
#[derive(Clone, Debug)]
pub struct UserAnalysis {
    pub chunks: Vec<Chunk>,
    pub matches: Vec<EntityMatch>,
    pub dubious: bool,
}

pub fn analyze_user(utterance: &str, lexicon: &Lexicon, clf1: &Classifier) -> UserAnalysis {
    let chunks = text::chunks(utterance);
    let cores: Vec<&str> = chunks.iter().map(|c| c.core.as_str()).collect();
    let matches = match_entities(&cores, lexicon);
    let dubious = !matches.is_empty() && clf1.predict(&typed_text(&chunks, &matches)) == DUBIOUS;
    UserAnalysis {
        chunks,
        matches,
        dubious,
    }
}

/// Utterance with every matched entity replaced by its type token.
fn typed_text(chunks: &[Chunk], matches: &[EntityMatch]) -> String {
    let spans: Vec<_> = matches
        .iter()
        .map(|m| (m.start, m.end, m.entity_type.token()))
        .collect();
    text::render(&text::replace_spans(chunks, &spans)).join(" ")
}

/// Utterance with mentions of `ty` masked as `ENTITY_1..ENTITY_k` and all
/// other matches replaced by their type token.
fn masked_text(chunks: &[Chunk], matches: &[EntityMatch], ty: &EntityType) -> String {
    let mut k = 0;
    let spans: Vec<_> = matches
        .iter()
        .map(|m| {
            let replacement = if &m.entity_type == ty {
                k += 1;
                format!("ENTITY_{k}")
            } else {
                m.entity_type.token()
            };
            (m.start, m.end, replacement)
        })
        .collect();
    text::render(&text::replace_spans(chunks, &spans)).join(" ")
}

fn mentions_by_type(matches: &[EntityMatch]) -> BTreeMap<EntityType, Vec<&str>> {
    let mut by_type: BTreeMap<EntityType, Vec<&str>> = BTreeMap::new();
    for m in matches {
        by_type.entry(m.entity_type.clone()).or_default().push(&m.value);
    }
    by_type
}

fn all_same(values: &[&str]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn label_index(label: &str) -> Option<usize> {
    label.strip_prefix("ENTITY_")?.parse::<usize>().ok().filter(|&k| k >= 1)
}

pub fn update_state(
    state: &DialogState,
    user_utterance: &str,
    lexicon: &Lexicon,
    clf1: &Classifier,
    clf2: &Classifier,
) -> DialogState {
    let analysis = analyze_user(user_utterance, lexicon, clf1);
    let mut next = state.clone();
    if analysis.matches.is_empty() || analysis.dubious {
        return next;
    }
    for (ty, values) in mentions_by_type(&analysis.matches) {
        let value = if all_same(&values) {
            values[0]
        } else {
            let masked = masked_text(&analysis.chunks, &analysis.matches, &ty);
            let k = label_index(clf2.predict(&masked)).unwrap_or(1);
            values.get(k - 1).copied().unwrap_or(values[0])
        };
        next.slots.insert(ty, value.to_string());
    }
    next
}

/// Record the results of the latest api_call.
pub fn on_results(state: &DialogState, results: &[KbRecord]) -> Result<DialogState> {
    let (_, map) = delex_results(results)?;
    let mut next = state.clone();
    next.presented = (1..)
        .map_while(|i| {
            map.resolve(&crate::delex::Placeholder::new(i, crate::delex::NAME))
                .map(String::from)
        })
        .collect();
    next.placeholder_map = map;
    next.selected_restaurant = None;
    next.proposed = None;
    Ok(next)
}

fn same_utterance(a: &str, b: &str) -> bool {
    text::tokenize(a) == text::tokenize(b)
}

/// Training data for the dubious classifier: entity-bearing user turns,
/// labeled dubious when the system answered "whenever you're ready".
pub fn label_dubious(corpus: &[Dialog], lexicon: &Lexicon) -> Vec<(String, String)> {
    let mut labeled = Vec::new();
    for dialog in corpus {
        for (user, system) in dialog.exchanges() {
            let chunks = text::chunks(user);
            let cores: Vec<&str> = chunks.iter().map(|c| c.core.as_str()).collect();
            let matches = match_entities(&cores, lexicon);
            if matches.is_empty() {
                continue;
            }
            let label = if same_utterance(system, WHENEVER_READY) {
                DUBIOUS
            } else {
                NOT_DUBIOUS
            };
            labeled.push((typed_text(&chunks, &matches), label.to_string()));
        }
    }
    labeled
}

/// Training data for the disambiguation classifier: user turns with two or
/// more distinct values of one type, labeled by which mention the next
/// api_call used. Hedged turns are skipped since they never reach it.
pub fn label_disambiguation(corpus: &[Dialog], lexicon: &Lexicon) -> Vec<(String, String)> {
    let mut labeled = Vec::new();
    for dialog in corpus {
        let exchanges: Vec<(&str, &str)> = dialog.exchanges().collect();
        for (i, (user, system)) in exchanges.iter().enumerate() {
            if same_utterance(system, WHENEVER_READY) {
                continue;
            }
            let chunks = text::chunks(user);
            let cores: Vec<&str> = chunks.iter().map(|c| c.core.as_str()).collect();
            let matches = match_entities(&cores, lexicon);
            let by_type = mentions_by_type(&matches);
            if by_type.values().all(|vs| all_same(vs)) {
                continue;
            }
            let Some(call) = exchanges[i..].iter().map(|(_, s)| *s).find(|s| is_api_call(s)) else {
                continue;
            };
            let call_tokens = text::tokenize(call);
            for (ty, values) in &by_type {
                if all_same(values) {
                    continue;
                }
                let hits: Vec<usize> = values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| contains_phrase(&call_tokens[1..], v))
                    .map(|(k, _)| k + 1)
                    .collect();
                if let [k] = hits[..] {
                    labeled.push((masked_text(&chunks, &matches, ty), format!("ENTITY_{k}")));
                }
            }
        }
    }
    labeled
}

fn contains_phrase(tokens: &[String], phrase: &str) -> bool {
    let needle: Vec<&str> = phrase.split(' ').collect();
    tokens
        .windows(needle.len())
        .any(|w| w.iter().zip(&needle).all(|(a, b)| a == b))
}

/// Train a classifier, or fall back to a constant one when the labeled data
/// has fewer than two classes.
pub fn train_or_constant(labeled: &[(String, String)], default: &str) -> Result<Classifier> {
    let mut labels = labeled.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>();
    labels.sort_unstable();
    labels.dedup();
    match labels[..] {
        [] => Ok(Classifier::constant(default)),
        [only] => Ok(Classifier::constant(only)),
        _ => Classifier::train(labeled),
    }
}

pub fn train_classifier(labeled: &[(String, String)]) -> Result<Classifier> {
    Classifier::train(labeled)
}

/// `text<TAB>label` lines for inspection.
pub fn labels_to_tsv(labeled: &[(String, String)]) -> String {
    labeled.iter().map(|(t, l)| format!("{t}\t{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus_str;

    fn lexicon() -> Lexicon {
        let mut lex = Lexicon::new();
        for (ty, v) in [
            ("cuisine_type", "spanish"),
            ("cuisine_type", "italian"),
            ("location", "bombay"),
            ("location", "paris"),
            ("num_people", "eight"),
            ("price_range", "cheap"),
            ("price_range", "moderate"),
            ("price_range", "expensive"),
            ("atmosphere", "business"),
        ] {
            lex.add(EntityType::new(ty), v);
        }
        lex
    }

    const TRANSCRIPT: &str = "\
1 hello\thello what can i help you with today
2 i'd like to book a table with a business atmosphere with spanish cuisine\ti am on it
3 <SILENCE>\twhere should it be
4 find me one in bombay, paris will be too complicated\thow many people would be in your party
5 for eight people please\twhich price range are you looking for
6 expensive is tempting but cheap may be more reasonable\twhenever you're ready
7 let's do moderate price range, and keep expensive price range for another day\tok let me look into some options for you
8 <SILENCE>\tapi_call spanish bombay eight moderate business

";

    #[test]
    fn dubious_labels_follow_whenever_ready() {
        let corpus = parse_corpus_str(TRANSCRIPT).unwrap();
        let labels = label_dubious(&corpus, &lexicon());
        let by_text: BTreeMap<_, _> = labels.iter().cloned().collect();
        assert_eq!(
            by_text["PRICE_RANGE is tempting but PRICE_RANGE may be more reasonable"],
            DUBIOUS
        );
        assert_eq!(by_text["for NUM_PEOPLE people please"], NOT_DUBIOUS);
        assert_eq!(labels.len(), 5);
    }

    #[test]
    fn entity_free_dialog_has_no_labels() {
        let corpus = parse_corpus_str("1 hello\thello what can i help you with today\n\n").unwrap();
        assert!(label_dubious(&corpus, &lexicon()).is_empty());
        assert!(label_disambiguation(&corpus, &lexicon()).is_empty());
    }

    #[test]
    fn disambiguation_labels_from_next_api_call() {
        let corpus = parse_corpus_str(TRANSCRIPT).unwrap();
        let labels = label_disambiguation(&corpus, &lexicon());
        assert_eq!(
            labels,
            vec![
                (
                    "find me one in ENTITY_1, ENTITY_2 will be too complicated".into(),
                    "ENTITY_1".into()
                ),
                (
                    "let's do ENTITY_1 price range, and keep ENTITY_2 price range for another day".into(),
                    "ENTITY_1".into()
                ),
            ]
        );
    }

    #[test]
    fn labelers_are_pure() {
        let corpus = parse_corpus_str(TRANSCRIPT).unwrap();
        assert_eq!(label_dubious(&corpus, &lexicon()), label_dubious(&corpus, &lexicon()));
    }

    fn toy_classifiers() -> (Classifier, Classifier) {
        let corpus = parse_corpus_str(TRANSCRIPT).unwrap();
        let lex = lexicon();
        let clf1 = Classifier::train(&label_dubious(&corpus, &lex)).unwrap();
        let mut disamb = label_disambiguation(&corpus, &lex);
        disamb.push(("not ENTITY_1, i prefer ENTITY_2".into(), "ENTITY_2".into()));
        let clf2 = Classifier::train(&disamb).unwrap();
        (clf1, clf2)
    }

    #[test]
    fn hedged_turn_leaves_state_alone() {
        let (clf1, clf2) = toy_classifiers();
        let lex = lexicon();
        let s = DialogState::new().update("for eight people please", &lex, &clf1, &clf2);
        let after = s.update(
            "expensive is tempting but cheap may be more reasonable",
            &lex,
            &clf1,
            &clf2,
        );
        assert_eq!(after, s);
        let after = after.update(
            "let's do moderate price range, and keep expensive price range for another day",
            &lex,
            &clf1,
            &clf2,
        );
        assert_eq!(after.slots[&EntityType::new("price_range")], "moderate");
    }

    #[test]
    fn confirmed_updates_overwrite() {
        let (clf1, clf2) = toy_classifiers();
        let lex = lexicon();
        let s = DialogState::new().update("with spanish cuisine", &lex, &clf1, &clf2);
        let s = s.update("with italian cuisine", &lex, &clf1, &clf2);
        assert_eq!(s.slots[&EntityType::new("cuisine_type")], "italian");
    }

    #[test]
    fn results_populate_presentation() {
        let records: Vec<KbRecord> = [("a", "2"), ("b", "9"), ("c", "5")]
            .iter()
            .map(|(n, r)| {
                let mut rec = KbRecord::new(*n);
                for (_, p) in crate::delex::PLACEHOLDER_PROPERTIES {
                    rec.properties.insert(p.into(), format!("{n}_{p}"));
                }
                rec.properties.insert("R_rating".into(), r.to_string());
                rec
            })
            .collect();
        let mut s = on_results(&DialogState::new(), &records).unwrap();
        assert_eq!(s.presented, ["b", "c", "a"]);
        assert_eq!(s.placeholder_map.len(), 3 * 9);
        s.note_proposal(2);
        s.confirm_selection();
        assert_eq!(s.selected_restaurant.as_deref(), Some("c"));
        assert_eq!(s.selected_index(), Some(2));
        assert!(on_results(&s, &[]).is_err());
    }
}
