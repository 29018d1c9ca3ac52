//! Training pipeline and closed-loop evaluation.

mod report;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

pub use report::{Column, Report, TaskStats};

use crate::bundle::{ModelBundle, ModelConfig, FORMAT_VERSION};
use crate::corpus::{group_facts, is_api_call, ContextTurn, Dialog, EvalRecord, TaskId, Turn};
use crate::delex::{delex_system, delex_user, DelexUtterance};
use crate::error::Result;
use crate::kb::{EntityType, KnowledgeBase, Lexicon};
use crate::lm::NGramModel;
use crate::predictor::Session;
use crate::quantizer::ClusterModel;
use crate::state::{
    label_disambiguation, label_dubious, on_results, train_or_constant, update_state, Classifier, DialogState,
    NOT_DUBIOUS,
};

/// Delexicalized utterances of one training dialog, plus the position of the
/// user turn that accepted the final proposal, if any.
struct Replay {
    utterances: Vec<DelexUtterance>,
    acceptance: Option<usize>,
}

fn replay(
    dialog: &Dialog,
    lexicon: &Lexicon,
    clf1: &Classifier,
    clf2: &Classifier,
    types: &[EntityType],
) -> Result<Replay> {
    let mut state = DialogState::new();
    let mut utterances = Vec::new();
    let mut acceptance = None;
    let mut after_proposal = false;
    let mut facts = Vec::new();
    for turn in &dialog.turns {
        match turn {
            Turn::KbResult { fact, .. } => facts.push(fact.clone()),
            Turn::Exchange { index, user, system } => {
                if !facts.is_empty() {
                    let records = group_facts(&std::mem::take(&mut facts))?;
                    state = on_results(&state, &records).map_err(|e| e.at(0, *index))?;
                }
                if after_proposal {
                    acceptance = Some(utterances.len());
                }
                utterances.push(delex_user(user, &state, lexicon, clf1, types));
                state = update_state(&state, user, lexicon, clf1, clf2);
                let sys = delex_system(system, &state, types);
                after_proposal = sys.proposed_restaurant().is_some();
                utterances.push(sys);
            }
        }
    }
    Ok(Replay { utterances, acceptance })
}

/// Train every component from a transcript corpus and its knowledge base.
pub fn train(corpus: &[Dialog], kb: &KnowledgeBase, order: usize) -> Result<ModelBundle> {
    if corpus.is_empty() {
        return Err(crate::Error::EmptyCorpus);
    }
    let lexicon = Lexicon::from_kb(kb);
    let types = EntityType::base();
    let dubious = train_or_constant(&label_dubious(corpus, &lexicon), NOT_DUBIOUS)?;
    let disambiguation = train_or_constant(&label_disambiguation(corpus, &lexicon), "ENTITY_1")?;

    let replays: Vec<Replay> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            replay(d, &lexicon, &dubious, &disambiguation, &types).map_err(|e| match e {
                crate::Error::At { turn, source, .. } => source.at(i + 1, turn),
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    let delexed: Vec<Vec<DelexUtterance>> = replays.iter().map(|r| r.utterances.clone()).collect();
    let mut clusters = ClusterModel::fit(&delexed)?;
    let acceptances: Vec<_> = replays
        .iter()
        .filter_map(|r| r.acceptance.map(|i| clusters.assign(&r.utterances[i])))
        .collect();
    clusters.set_affirmations(acceptances);
    let sequences: Vec<_> = delexed
        .iter()
        .map(|d| d.iter().map(|u| clusters.assign(u)).collect())
        .collect();
    let lm = NGramModel::train(&sequences, order)?;
    log::info!(
        "trained on {} dialogs: {} clusters, {} tokens",
        corpus.len(),
        clusters.len(),
        lm.total_tokens()
    );

    Ok(ModelBundle {
        format_version: FORMAT_VERSION,
        config: ModelConfig {
            order,
            entity_types: types,
        },
        clusters,
        lm,
        dubious,
        disambiguation,
        lexicon,
    })
}

/// Outcome of one evaluation record.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnOutcome {
    pub task: Option<TaskId>,
    pub chosen: usize,
    pub score: f64,
    pub answer_index: usize,
    pub gold_api_call: bool,
    pub state: DialogState,
}

impl TurnOutcome {
    pub fn correct(&self) -> bool {
        self.chosen == self.answer_index
    }
}

/// `next` continues `prev`: same history, `prev`'s pending user turn now
/// answered, and possibly more items after it.
fn continues(prev: &EvalRecord, next: &EvalRecord) -> bool {
    let Some((ContextTurn::Exchange { user, system: None }, head)) = prev.context.split_last() else {
        return false;
    };
    match next.context.get(head.len()) {
        Some(ContextTurn::Exchange {
            user: u,
            system: Some(_),
        }) => u == user && next.context[..head.len()] == *head,
        _ => false,
    }
}

/// Run one conversation's records in order. Unless `teacher_forced`, the
/// system side of each answered turn is the reply chosen earlier rather
/// than the gold one.
pub fn run_dialog(session: &mut Session, records: &[&EvalRecord], teacher_forced: bool) -> Result<Vec<TurnOutcome>> {
    let mut outcomes = Vec::with_capacity(records.len());
    let mut prev: Option<(&EvalRecord, usize)> = None;
    for record in records {
        match prev {
            Some((p, chosen)) if continues(p, record) => {
                let pending = p.context.len() - 1;
                let reply = match (&record.context[pending], teacher_forced) {
                    (ContextTurn::Exchange { system: Some(gold), .. }, true) => gold.as_str(),
                    _ => p.candidates[chosen].as_str(),
                };
                session.observe_system(reply);
                session.observe_context(&record.context[pending + 1..])?;
            }
            _ => {
                session.reset();
                session.observe_context(&record.context)?;
            }
        }
        let ranked = session.select(&record.candidates)?;
        let (chosen, score) = ranked.best();
        outcomes.push(TurnOutcome {
            task: record.task,
            chosen,
            score,
            answer_index: record.answer_index,
            gold_api_call: is_api_call(record.answer()),
            state: session.state.clone(),
        });
        prev = Some((record, chosen));
    }
    Ok(outcomes)
}

/// Records grouped by `dialog_id` in first-appearance order; untagged
/// records stand alone.
pub fn group_records(records: &[EvalRecord]) -> Vec<Vec<&EvalRecord>> {
    let mut groups: Vec<Vec<&EvalRecord>> = Vec::new();
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for r in records {
        match &r.dialog_id {
            Some(id) => {
                let g = *by_id.entry(id).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(r);
            }
            None => groups.push(vec![r]),
        }
    }
    groups
}

/// Add one conversation's outcomes to `column`.
pub fn tally(column: &mut Column, outcomes: &[TurnOutcome]) {
    let mut per_dialog: HashMap<Option<TaskId>, bool> = HashMap::new();
    for o in outcomes {
        let stats = match o.task {
            Some(t) => column.tasks.entry(t).or_default(),
            None => &mut column.untagged,
        };
        stats.turns += 1;
        stats.correct += usize::from(o.correct());
        if o.gold_api_call {
            stats.api_turns += 1;
            stats.api_correct += usize::from(o.correct());
        }
        *per_dialog.entry(o.task).or_insert(true) &= o.correct();
    }
    for (task, all_correct) in per_dialog {
        let stats = match task {
            Some(t) => column.tasks.entry(t).or_default(),
            None => &mut column.untagged,
        };
        stats.dialogs += 1;
        stats.dialogs_correct += usize::from(all_correct);
    }
}

/// Evaluate every conversation in parallel and tally one report column.
pub fn evaluate(
    bundle: Arc<ModelBundle>,
    lexicon: Arc<Lexicon>,
    records: &[EvalRecord],
    teacher_forced: bool,
    name: &str,
) -> Result<Column> {
    let groups = group_records(records);
    evaluate_groups(
        bundle,
        lexicon,
        groups.len(),
        |i| groups[i].to_vec(),
        teacher_forced,
        name,
    )
}

/// Like [`evaluate`], with conversation `i` of `n` produced on demand so
/// large test sets never sit in memory at once.
pub fn evaluate_groups<'a, F, R>(
    bundle: Arc<ModelBundle>,
    lexicon: Arc<Lexicon>,
    n: usize,
    records_for: F,
    teacher_forced: bool,
    name: &str,
) -> Result<Column>
where
    F: Fn(usize) -> Vec<R> + Sync,
    R: std::borrow::Borrow<EvalRecord> + 'a,
{
    let columns: Vec<Column> = (0..n)
        .into_par_iter()
        .map(|i| {
            let records = records_for(i);
            let refs: Vec<&EvalRecord> = records.iter().map(|r| r.borrow()).collect();
            let mut session = Session::new(bundle.clone(), lexicon.clone());
            let outcomes = run_dialog(&mut session, &refs, teacher_forced)?;
            let mut column = Column::new(name);
            tally(&mut column, &outcomes);
            Ok(column)
        })
        .collect::<Result<_>>()?;
    let mut total = Column::new(name);
    for c in &columns {
        total.merge(c);
    }
    Ok(total)
}

/// One utterance of a traced dialog.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub utterance: String,
    pub delex: DelexUtterance,
    pub state: DialogState,
}

/// Feed a transcript through `session` with its own system turns and
/// record each utterance's delexicalized form and the state after it.
pub fn trace(session: &mut Session, dialog: &Dialog) -> Result<Vec<TraceStep>> {
    let mut steps = Vec::new();
    let mut facts = Vec::new();
    for turn in &dialog.turns {
        match turn {
            Turn::KbResult { fact, .. } => facts.push(fact.clone()),
            Turn::Exchange { user, system, .. } => {
                if !facts.is_empty() {
                    session.observe_facts(&std::mem::take(&mut facts))?;
                }
                let delex = session.delex_user(user);
                session.observe_user(user);
                steps.push(TraceStep {
                    utterance: user.clone(),
                    delex,
                    state: session.state.clone(),
                });
                let delex = delex_system(system, &session.state, &session.bundle().config.entity_types);
                session.observe_system(system);
                steps.push(TraceStep {
                    utterance: system.clone(),
                    delex,
                    state: session.state.clone(),
                });
            }
        }
    }
    Ok(steps)
}

/// Deterministic 75/25 train/test split by position.
pub fn split_dialogs(dialogs: &[Dialog]) -> (Vec<Dialog>, Vec<Dialog>) {
    let cut = dialogs.len() * 3 / 4;
    (dialogs[..cut].to_vec(), dialogs[cut..].to_vec())
}
