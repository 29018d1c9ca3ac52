//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use qdlm::corpus::parse_corpus_str;
use qdlm::delex::DelexUtterance;
use qdlm::harness::{self, TraceStep};
use qdlm::kb::EntityType;
use qdlm::synthgen::{self, GenConfig, Generated};
use qdlm::{ClusterId, ModelBundle, Session};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Edit distance by memoized recursion over suffixes.
pub fn oracle_levenshtein(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Counts n-grams by scanning the padded sequences for every query.
pub struct OracleLm {
    order: usize,
    padded: Vec<Vec<ClusterId>>,
}

impl OracleLm {
    pub fn new(sequences: &[Vec<ClusterId>], order: usize) -> Self {
        let padded = sequences
            .iter()
            .map(|s| {
                let mut p = vec![ClusterId::BOS; order - 1];
                p.extend_from_slice(s);
                p
            })
            .collect();
        OracleLm { order, padded }
    }

    /// Continuation counts of `ctx` over predicted positions.
    fn follow(&self, ctx: &[ClusterId]) -> BTreeMap<ClusterId, u64> {
        let mut out = BTreeMap::new();
        for p in &self.padded {
            for i in self.order - 1..p.len() {
                if i >= ctx.len() && p[i - ctx.len()..i] == *ctx {
                    *out.entry(p[i]).or_insert(0) += 1;
                }
            }
        }
        out
    }

    pub fn distribution(&self, context: &[ClusterId]) -> BTreeMap<ClusterId, f64> {
        let longest = context.len().min(self.order - 1);
        for k in (0..=longest).rev() {
            let counts = self.follow(&context[context.len() - k..]);
            let total: u64 = counts.values().sum();
            if total > 0 {
                return counts.into_iter().map(|(c, n)| (c, n as f64 / total as f64)).collect();
            }
        }
        BTreeMap::new()
    }

    pub fn prob(&self, context: &[ClusterId], next: ClusterId) -> f64 {
        self.distribution(context).get(&next).copied().unwrap_or(0.0)
    }
}

/// Number of distinct token multisets, by sorting each utterance's tokens.
pub fn distinct_multisets(corpus: &[Vec<DelexUtterance>]) -> usize {
    corpus
        .iter()
        .flatten()
        .map(|u| {
            let mut t = u.tokens.clone();
            t.sort();
            t
        })
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn render_state(slots: &BTreeMap<EntityType, String>) -> String {
    let inner: Vec<String> = slots.iter().map(|(t, v)| format!("{}: {v}", t.name())).collect();
    format!("{{{}}}", inner.join(", "))
}

/// The first thirteen traced utterances of the fixture dialog.
pub fn golden_trace(bundle: Arc<ModelBundle>) -> Vec<TraceStep> {
    let dialog = &parse_corpus_str(&read_fixture("golden_dialog.txt")).unwrap()[0];
    let mut session = Session::with_bundle_lexicon(bundle);
    let mut steps = harness::trace(&mut session, dialog).unwrap();
    steps.truncate(13);
    steps
}

/// `(turn, representation, state)` rows of the golden trace file.
pub fn golden_rows() -> Vec<(usize, String, String)> {
    read_fixture("golden_trace.tsv")
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].to_string())
        })
        .collect()
}

pub fn small_generated(seed: u64, per_task: usize) -> Generated {
    synthgen::generate(&GenConfig {
        seed,
        n_dialogs: per_task,
        test_dialogs: per_task / 4,
        ..Default::default()
    })
    .unwrap()
}

pub fn train_on(generated: &Generated) -> ModelBundle {
    harness::train(&generated.train, &generated.kb, qdlm::lm::DEFAULT_ORDER).unwrap()
}
