//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdlm::corpus::TaskId;
use qdlm::delex::DelexUtterance;
use qdlm::harness::{self, Column, Report};
use qdlm::kb::Lexicon;
use qdlm::lm::NGramModel;
use qdlm::predictor::{build_api_call, utterance_distance, word_levenshtein};
use qdlm::state::{label_disambiguation, label_dubious, Classifier};
use qdlm::synthgen::{self, GenConfig, Generated, Split, Variant};
use qdlm::{ClusterId, ClusterModel, ModelBundle};

use common::{distinct_multisets, golden_rows, golden_trace, oracle_levenshtein, render_state, OracleLm};

const SEED: u64 = 42;
const MIN_TASK: f64 = 0.99;
const MIN_T5: f64 = 0.95;
const MIN_AVERAGE: f64 = 0.97;
const MAX_RUNTIME: Duration = Duration::from_secs(300);
const OOV_TOLERANCE: f64 = 0.01;
const MIN_EXTRA_API: f64 = 0.95;
const SUM_TOLERANCE: f64 = 1e-9;
const MIN_CLF_TRAIN: f64 = 0.99;
const MIN_CLF_HELDOUT: f64 = 0.95;

struct Checks {
    failed: usize,
}

impl Checks {
    fn report(&mut self, id: usize, ok: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn fmt_tasks(column: &Column, f: impl Fn(&Column, TaskId) -> Option<f64>) -> String {
    TaskId::ALL
        .iter()
        .map(|&t| match f(column, t) {
            Some(v) => format!("{t}={v:.4}"),
            None => format!("{t}=-"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn evaluate(bundle: &Arc<ModelBundle>, generated: &Generated, extra_kb: bool, name: &str) -> Column {
    let lexicon = if extra_kb {
        bundle.runtime_lexicon(Some(&Lexicon::from_kb(&generated.kb)))
    } else {
        bundle.runtime_lexicon(None)
    };
    let n = generated.dialogs(Split::Test).len();
    harness::evaluate_groups(
        bundle.clone(),
        Arc::new(lexicon),
        n,
        |i| generated.dialog_records(Split::Test, i),
        false,
        name,
    )
    .expect("evaluation runs")
}

/// Generate, train and evaluate the base bundle.
fn base_run() -> (Generated, Arc<ModelBundle>, Report, Duration) {
    let start = Instant::now();
    let generated = synthgen::generate(&GenConfig {
        seed: SEED,
        ..Default::default()
    })
    .expect("generation");
    let bundle = Arc::new(harness::train(&generated.train, &generated.kb, qdlm::lm::DEFAULT_ORDER).expect("training"));
    let column = evaluate(&bundle, &generated, false, "base");
    (generated, bundle, Report::single(column), start.elapsed())
}

fn variant_test(variant: Variant) -> Generated {
    synthgen::generate(&GenConfig {
        seed: SEED,
        variant,
        n_dialogs: 0,
        ..Default::default()
    })
    .expect("variant generation")
}

fn criterion_1(c: &mut Checks, base: &Column, elapsed: Duration) {
    let mut ok = elapsed < MAX_RUNTIME;
    for t in TaskId::ALL {
        let min = if t == TaskId::T5 { MIN_T5 } else { MIN_TASK };
        ok &= base.accuracy(t).is_some_and(|a| a >= min);
    }
    ok &= base.average().is_some_and(|a| a >= MIN_AVERAGE);
    c.report(
        1,
        ok,
        format!(
            "base {} avg={:.4} runtime={:.1}s",
            fmt_tasks(base, Column::accuracy),
            base.average().unwrap_or(0.0),
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_2(c: &mut Checks, bundle: &Arc<ModelBundle>, base: &Column) {
    let oov = evaluate(bundle, &variant_test(Variant::OovKb), true, "oov_kb");
    let ok = TaskId::ALL.iter().all(|&t| match (base.accuracy(t), oov.accuracy(t)) {
        (Some(a), Some(b)) => (a - b).abs() <= OOV_TOLERANCE,
        _ => false,
    });
    c.report(
        2,
        ok,
        format!(
            "oov_kb {} (tolerance {OOV_TOLERANCE})",
            fmt_tasks(&oov, Column::accuracy)
        ),
    );
}

fn criterion_3(c: &mut Checks, bundle: &Arc<ModelBundle>) {
    let extra = evaluate(bundle, &variant_test(Variant::ExtraEntity), true, "extra_entity");
    let ok = TaskId::ALL
        .iter()
        .all(|&t| extra.api_accuracy(t).is_some_and(|a| a >= MIN_EXTRA_API));
    c.report(
        3,
        ok,
        format!(
            "extra_entity api_call turns {} (overall {})",
            fmt_tasks(&extra, Column::api_accuracy),
            fmt_tasks(&extra, Column::accuracy)
        ),
    );
}

fn criterion_4(c: &mut Checks, bundle: &Arc<ModelBundle>) {
    let steps = golden_trace(bundle.clone());
    let golden = golden_rows();
    let matched = steps
        .iter()
        .zip(&golden)
        .filter(|(s, (_, repr, state))| s.delex.text() == *repr && render_state(&s.state.slots) == *state)
        .count();
    const EXPECTED: &str = "api_call spanish bombay eight moderate business";
    let call = steps.last().and_then(|s| build_api_call(&s.state.slots).ok());
    let ok = steps.len() == golden.len()
        && matched == golden.len()
        && call.as_deref() == Some(EXPECTED)
        && utterance_distance(EXPECTED, EXPECTED) == 0;
    c.report(
        4,
        ok,
        format!("{matched}/{} trace rows match, api_call={call:?}", golden.len()),
    );
}

fn criterion_5(c: &mut Checks, rng: &mut ChaCha8Rng) {
    let mut mismatches = 0;
    let mut worst_sum = 0.0f64;
    let mut contexts = 0;
    for _ in 0..25 {
        let n_seq = rng.gen_range(1..=50);
        let vocab = rng.gen_range(2..8u32);
        let seqs: Vec<Vec<ClusterId>> = (0..n_seq)
            .map(|_| {
                (0..rng.gen_range(1..15))
                    .map(|_| ClusterId(rng.gen_range(0..vocab)))
                    .collect()
            })
            .collect();
        let order = rng.gen_range(2..=8);
        let lm = NGramModel::train(&seqs, order).expect("lm");
        let oracle = OracleLm::new(&seqs, order);
        let mut probes: Vec<Vec<ClusterId>> = Vec::new();
        for s in &seqs {
            let p = lm.padded(s);
            for i in order - 1..p.len() {
                probes.push(p[..i].to_vec());
            }
        }
        for _ in 0..20 {
            probes.push(
                (0..rng.gen_range(0..10))
                    .map(|_| ClusterId(rng.gen_range(0..vocab + 1)))
                    .collect(),
            );
        }
        for ctx in &probes {
            contexts += 1;
            let dist = lm.predict_distribution(ctx);
            if dist != oracle.distribution(ctx) {
                mismatches += 1;
            }
            worst_sum = worst_sum.max((dist.values().sum::<f64>() - 1.0).abs());
        }
    }
    c.report(
        5,
        mismatches == 0 && worst_sum <= SUM_TOLERANCE,
        format!("{mismatches} mismatches over {contexts} contexts, max |sum-1|={worst_sum:.2e}"),
    );
}

fn random_words(rng: &mut ChaCha8Rng, vocab: &[&str], max: usize) -> Vec<String> {
    (0..rng.gen_range(0..=max))
        .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
        .collect()
}

fn criterion_6(c: &mut Checks, rng: &mut ChaCha8Rng) {
    const VOCAB: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
    let mut mismatches = 0;
    let mut axioms = 0;
    for _ in 0..10_000 {
        let a = random_words(rng, &VOCAB, 10);
        let b = random_words(rng, &VOCAB, 10);
        let x = random_words(rng, &VOCAB, 10);
        let ab = word_levenshtein(&a, &b);
        if ab != oracle_levenshtein(&a, &b) {
            mismatches += 1;
        }
        let ok = word_levenshtein(&a, &a) == 0
            && ab == word_levenshtein(&b, &a)
            && word_levenshtein(&a, &x) <= ab + word_levenshtein(&b, &x);
        axioms += usize::from(!ok);
    }
    c.report(
        6,
        mismatches == 0 && axioms == 0,
        format!("{mismatches} oracle mismatches, {axioms} metric violations over 10000 pairs"),
    );
}

fn criterion_7(c: &mut Checks, rng: &mut ChaCha8Rng) {
    const VOCAB: [&str; 5] = ["a", "b", "c", "NONE", "LOCATION"];
    let mut bad_counts = 0;
    let mut unk = 0;
    for _ in 0..20 {
        let corpus: Vec<Vec<DelexUtterance>> = (0..rng.gen_range(1..20))
            .map(|_| {
                (0..rng.gen_range(1..10))
                    .map(|_| DelexUtterance::verbatim(random_words(rng, &VOCAB, 6)))
                    .collect()
            })
            .collect();
        let model = ClusterModel::fit(&corpus).expect("fit");
        bad_counts += usize::from(model.len() != distinct_multisets(&corpus));
        unk += corpus
            .iter()
            .flatten()
            .filter(|u| model.assign(u) == ClusterId::UNK)
            .count();
    }
    c.report(
        7,
        bad_counts == 0 && unk == 0,
        format!("{bad_counts}/20 corpora with wrong cluster count, {unk} training utterances assigned UNK"),
    );
}

fn criterion_8(c: &mut Checks, train: &Generated) {
    let heldout = synthgen::generate(&GenConfig {
        seed: SEED + 1,
        n_dialogs: 500,
        test_dialogs: 0,
        ..Default::default()
    })
    .expect("held-out generation");
    let lex_train = Lexicon::from_kb(&train.kb);
    let lex_held = Lexicon::from_kb(&heldout.kb);
    let mut ok = true;
    let mut parts = Vec::new();
    type Labeler = fn(&[qdlm::corpus::Dialog], &Lexicon) -> Vec<(String, String)>;
    let labelers: [(&str, Labeler); 2] = [("dubious", label_dubious), ("disambiguation", label_disambiguation)];
    for (name, label) in labelers {
        let data = label(&train.train, &lex_train);
        let held = label(&heldout.train, &lex_held);
        let classes: BTreeSet<&str> = data.iter().map(|(_, l)| l.as_str()).collect();
        let (train_acc, held_acc) = match Classifier::train(&data) {
            Ok(clf) => (clf.accuracy(&data), clf.accuracy(&held)),
            Err(_) => (0.0, 0.0),
        };
        ok &= classes.len() >= 2 && train_acc >= MIN_CLF_TRAIN && held_acc >= MIN_CLF_HELDOUT;
        parts.push(format!(
            "{name}: {} examples, {} classes, train={train_acc:.4} held-out={held_acc:.4} ({} examples)",
            data.len(),
            classes.len(),
            held.len()
        ));
    }
    c.report(8, ok, parts.join("; "));
}

fn criterion_9(c: &mut Checks, bundle: &ModelBundle, report: &Report) {
    let (_, again, again_report, _) = base_run();
    let a = bundle.to_json().expect("bundle json");
    let b = again.to_json().expect("bundle json");
    let ok = a == b && report.to_json() == again_report.to_json();
    c.report(
        9,
        ok,
        format!(
            "bundle {} bytes identical={}, report identical={}",
            a.len(),
            a == b,
            report.to_json() == again_report.to_json()
        ),
    );
}

fn main() -> ExitCode {
    let mut checks = Checks { failed: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let (generated, bundle, report, elapsed) = base_run();
    let base = report.columns[0].clone();
    criterion_1(&mut checks, &base, elapsed);
    criterion_2(&mut checks, &bundle, &base);
    criterion_3(&mut checks, &bundle);
    criterion_4(&mut checks, &bundle);
    criterion_5(&mut checks, &mut rng);
    criterion_6(&mut checks, &mut rng);
    criterion_7(&mut checks, &mut rng);
    criterion_8(&mut checks, &generated);
    criterion_9(&mut checks, &bundle, &report);

    if checks.failed == 0 {
        println!("all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("{} of 9 criteria fail", checks.failed);
        ExitCode::FAILURE
    }
}
