//! Next-utterance selection: the n-gram model predicts a cluster, candidates
//! are scored by the probability of their own cluster, and api_call turns
//! are built from the tracked state and matched by word edit distance.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bundle::ModelBundle;
use crate::corpus::{group_facts, is_api_call, ContextTurn, EvalRecord, KbFact};
use crate::delex::{delex_candidate, delex_system, delex_user, DelexUtterance, Placeholder, NAME};
use crate::error::{Error, Result};
use crate::kb::{EntityType, KbRecord, Lexicon};
use crate::quantizer::ClusterId;
use crate::state::{on_results, update_state, DialogState};
use crate::text;

/// `api_call` followed by the filled slot values in canonical type order.
pub fn build_api_call(slots: &BTreeMap<EntityType, String>) -> Result<String> {
    if slots.is_empty() {
        return Err(Error::NoSlots);
    }
    let mut out = String::from("api_call");
    for value in slots.values() {
        out.push(' ');
        out.push_str(value);
    }
    Ok(out)
}

/// Minimum number of word insertions, deletions and substitutions.
pub fn word_levenshtein<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x.as_ref() != y.as_ref());
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word edit distance between two utterances after tokenization.
pub fn utterance_distance(a: &str, b: &str) -> usize {
    word_levenshtein(&text::tokenize(a), &text::tokenize(b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedCandidates {
    /// `(candidate index, score)`, best first; equal scores keep input order.
    pub ranking: Vec<(usize, f64)>,
    pub predicted: ClusterId,
    /// The call built from the state when the api_call branch was taken.
    pub api_call: Option<String>,
}

impl RankedCandidates {
    pub fn best(&self) -> (usize, f64) {
        self.ranking[0]
    }
}

/// One conversation: tracked state plus the cluster history.
#[derive(Clone, Debug)]
pub struct Session {
    bundle: Arc<ModelBundle>,
    lexicon: Arc<Lexicon>,
    pub state: DialogState,
    history: Vec<ClusterId>,
}

impl Session {
    /// `lexicon` is what user turns are matched against; usually the bundle
    /// lexicon merged with the deployment KB.
    pub fn new(bundle: Arc<ModelBundle>, lexicon: Arc<Lexicon>) -> Self {
        Session {
            bundle,
            lexicon,
            state: DialogState::new(),
            history: Vec::new(),
        }
    }

    pub fn with_bundle_lexicon(bundle: Arc<ModelBundle>) -> Self {
        let lexicon = Arc::new(bundle.lexicon.clone());
        Session::new(bundle, lexicon)
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn history(&self) -> &[ClusterId] {
        &self.history
    }

    pub fn reset(&mut self) {
        self.state = DialogState::new();
        self.history.clear();
    }

    pub fn delex_user(&self, utterance: &str) -> DelexUtterance {
        let b = &self.bundle;
        delex_user(
            utterance,
            &self.state,
            &self.lexicon,
            &b.dubious,
            &b.config.entity_types,
        )
    }

    pub fn observe_user(&mut self, utterance: &str) -> ClusterId {
        let b = &self.bundle;
        let id = b.clusters.assign(&self.delex_user(utterance));
        if b.clusters.is_affirmation(id) {
            self.state.confirm_selection();
        }
        self.state = update_state(&self.state, utterance, &self.lexicon, &b.dubious, &b.disambiguation);
        self.history.push(id);
        id
    }

    pub fn observe_system(&mut self, utterance: &str) -> ClusterId {
        let delex = delex_system(utterance, &self.state, &self.bundle.config.entity_types);
        let id = self.bundle.clusters.assign(&delex);
        if let Some(i) = delex.proposed_restaurant() {
            self.state.note_proposal(i);
        }
        self.history.push(id);
        id
    }

    pub fn observe_results(&mut self, results: &[KbRecord]) -> Result<()> {
        self.state = on_results(&self.state, results)?;
        Ok(())
    }

    pub fn observe_facts(&mut self, facts: &[KbFact]) -> Result<()> {
        self.observe_results(&group_facts(facts)?)
    }

    /// Feed context items in order, grouping consecutive result facts.
    pub fn observe_context(&mut self, context: &[ContextTurn]) -> Result<()> {
        let mut facts = Vec::new();
        for item in context {
            match item {
                ContextTurn::Result { result } => facts.push(result.clone()),
                ContextTurn::Exchange { user, system } => {
                    if !facts.is_empty() {
                        self.observe_facts(&std::mem::take(&mut facts))?;
                    }
                    self.observe_user(user);
                    if let Some(s) = system {
                        self.observe_system(s);
                    }
                }
            }
        }
        if !facts.is_empty() {
            self.observe_facts(&facts)?;
        }
        Ok(())
    }

    /// Every registry type has a value.
    pub fn state_complete(&self) -> bool {
        self.bundle
            .config
            .entity_types
            .iter()
            .all(|t| self.state.slots.contains_key(t))
    }

    pub fn predict_distribution(&self) -> BTreeMap<ClusterId, f64> {
        let lm = &self.bundle.lm;
        lm.predict_distribution(&lm.padded(&self.history))
    }

    /// Zero when a candidate's placeholders disagree with the state: another
    /// restaurant's details after a selection, or a value contradicting a
    /// filled slot.
    fn consistent(&self, delex: &DelexUtterance) -> bool {
        let selected = self.state.selected_index();
        for token in &delex.tokens {
            let core = token.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '_');
            let Ok(p) = core.parse::<Placeholder>() else {
                continue;
            };
            if p.property == NAME {
                continue;
            }
            if selected.is_some_and(|s| s != p.index) {
                return false;
            }
            let Some(kb_property) = p.kb_property() else {
                continue;
            };
            let (Some(ty), Some(value)) = (
                EntityType::from_property(kb_property),
                self.state.placeholder_map.resolve(&p),
            ) else {
                continue;
            };
            if self.state.slots.get(&ty).is_some_and(|v| v != value) {
                return false;
            }
        }
        true
    }

    fn lm_score(&self, candidate: &str, dist: &BTreeMap<ClusterId, f64>) -> f64 {
        let delex = delex_candidate(candidate, &self.state);
        let id = self.bundle.clusters.assign(&delex);
        if id == ClusterId::UNK || !self.consistent(&delex) {
            return 0.0;
        }
        dist.get(&id).copied().unwrap_or(0.0)
    }

    pub fn select<S: AsRef<str>>(&self, candidates: &[S]) -> Result<RankedCandidates> {
        if candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let dist = self.predict_distribution();
        let mut predicted = ClusterId::UNK;
        let mut best = f64::NEG_INFINITY;
        for (&id, &p) in &dist {
            if p > best {
                best = p;
                predicted = id;
            }
        }
        let has_api = candidates.iter().any(|c| is_api_call(c.as_ref()));
        let mut api_call = None;
        let scores: Vec<f64> = if self.bundle.clusters.is_api_call(predicted) && has_api {
            if self.state_complete() {
                let call = text::tokenize(&build_api_call(&self.state.slots)?);
                let scores = candidates
                    .iter()
                    .map(|c| {
                        let c = c.as_ref();
                        if is_api_call(c) {
                            0.0 - word_levenshtein(&call, &text::tokenize(c)) as f64
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                api_call = Some(call.join(" "));
                scores
            } else {
                log::warn!("api_call predicted with incomplete state; ranking other candidates");
                candidates
                    .iter()
                    .map(|c| {
                        let c = c.as_ref();
                        if is_api_call(c) {
                            f64::NEG_INFINITY
                        } else {
                            self.lm_score(c, &dist)
                        }
                    })
                    .collect()
            }
        } else {
            candidates.iter().map(|c| self.lm_score(c.as_ref(), &dist)).collect()
        };
        let mut ranking: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(RankedCandidates {
            ranking,
            predicted,
            api_call,
        })
    }

    /// Select a reply and add it to the history.
    pub fn respond<S: AsRef<str>>(&mut self, candidates: &[S]) -> Result<(usize, f64)> {
        let ranked = self.select(candidates)?;
        let (index, score) = ranked.best();
        self.observe_system(candidates[index].as_ref());
        Ok((index, score))
    }
}

/// Rank one record's candidates from a fresh session fed its full context.
pub fn predict_record(
    bundle: Arc<ModelBundle>,
    lexicon: Arc<Lexicon>,
    record: &EvalRecord,
) -> Result<RankedCandidates> {
    let mut session = Session::new(bundle, lexicon);
    session.observe_context(&record.context)?;
    session.select(&record.candidates)
}
