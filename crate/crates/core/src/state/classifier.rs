//! Linear bag-of-words sentence classifier (multinomial logistic regression).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

const EPOCHS: usize = 300;
const LEARNING_RATE: f64 = 0.5;
const L2: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    labels: Vec<String>,
    vocab: BTreeMap<String, usize>,
    /// `weights[label][feature]`
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

type Features = Vec<(usize, f64)>;

impl Classifier {
    /// A classifier that answers `label` for every input.
    pub fn constant(label: &str) -> Self {
        Classifier {
            labels: vec![label.to_string()],
            vocab: BTreeMap::new(),
            weights: vec![Vec::new()],
            bias: vec![0.0],
        }
    }

    /// Full-batch AdaGrad on the softmax log-loss. Identical examples are
    /// collapsed into weighted rows first, which keeps templated corpora cheap.
    pub fn train<S: AsRef<str>, L: AsRef<str>>(examples: &[(S, L)]) -> Result<Self> {
        let labels: Vec<String> = examples
            .iter()
            .map(|(_, l)| l.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if labels.len() < 2 {
            return Err(Error::SingleClass(labels.len()));
        }
        let label_index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

        let mut vocab = BTreeMap::new();
        for (t, _) in examples {
            for tok in text::tokenize(t.as_ref()) {
                let next = vocab.len();
                vocab.entry(tok).or_insert(next);
            }
        }
        // Re-number features in sorted order so the layout is independent of
        // example order.
        for (i, v) in vocab.values_mut().enumerate() {
            *v = i;
        }

        let mut rows: BTreeMap<(Vec<(usize, u64)>, usize), f64> = BTreeMap::new();
        for (t, l) in examples {
            let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
            for tok in text::tokenize(t.as_ref()) {
                *counts.entry(vocab[&tok]).or_default() += 1;
            }
            let key = (counts.into_iter().collect(), label_index[l.as_ref()]);
            *rows.entry(key).or_default() += 1.0;
        }
        let rows: Vec<(Features, usize, f64)> = rows
            .into_iter()
            .map(|((f, y), w)| (f.into_iter().map(|(i, c)| (i, c as f64)).collect(), y, w))
            .collect();
        let total: f64 = rows.iter().map(|r| r.2).sum();

        let (k, d) = (labels.len(), vocab.len());
        let mut clf = Classifier {
            labels,
            vocab,
            weights: vec![vec![0.0; d]; k],
            bias: vec![0.0; k],
        };
        let mut hist_w = vec![vec![0.0; d]; k];
        let mut hist_b = vec![0.0; k];
        let mut grad_w = vec![vec![0.0; d]; k];
        let mut grad_b = vec![0.0; k];
        let mut probs = vec![0.0; k];

        for _ in 0..EPOCHS {
            grad_w.iter_mut().for_each(|g| g.fill(0.0));
            grad_b.fill(0.0);
            for (features, y, weight) in &rows {
                clf.probabilities(features, &mut probs);
                let scale = weight / total;
                for c in 0..k {
                    let err = (probs[c] - if c == *y { 1.0 } else { 0.0 }) * scale;
                    grad_b[c] += err;
                    for &(j, x) in features {
                        grad_w[c][j] += err * x;
                    }
                }
            }
            for c in 0..k {
                for j in 0..d {
                    let g = grad_w[c][j] + L2 * clf.weights[c][j];
                    if g != 0.0 {
                        hist_w[c][j] += g * g;
                        clf.weights[c][j] -= LEARNING_RATE * g / hist_w[c][j].sqrt();
                    }
                }
                let g = grad_b[c];
                if g != 0.0 {
                    hist_b[c] += g * g;
                    clf.bias[c] -= LEARNING_RATE * g / hist_b[c].sqrt();
                }
            }
        }
        Ok(clf)
    }

    fn raw_scores(&self, features: &[(usize, f64)], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.bias[c] + features.iter().map(|&(j, x)| self.weights[c][j] * x).sum::<f64>();
        }
    }

    fn probabilities(&self, features: &[(usize, f64)], out: &mut [f64]) {
        self.raw_scores(features, out);
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            z += *o;
        }
        out.iter_mut().for_each(|o| *o /= z);
    }

    fn features(&self, text: &str) -> Features {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in text::tokenize(text) {
            if let Some(&j) = self.vocab.get(&tok) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        counts.into_iter().collect()
    }

    /// Linear score per label, in `labels()` order.
    pub fn scores(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.labels.len()];
        self.raw_scores(&self.features(text), &mut out);
        out
    }

    /// Highest-scoring label; ties go to the lexicographically smallest.
    pub fn predict(&self, text: &str) -> &str {
        let scores = self.scores(text);
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        &self.labels[best]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn accuracy<S: AsRef<str>, L: AsRef<str>>(&self, examples: &[(S, L)]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let hits = examples
            .iter()
            .filter(|(t, l)| self.predict(t.as_ref()) == l.as_ref())
            .count();
        hits as f64 / examples.len() as f64
    }
}
