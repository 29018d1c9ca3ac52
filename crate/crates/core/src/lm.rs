//! N-gram model over cluster-ID sequences with longest-suffix backoff.
//!
//! Each training sequence is padded with `order - 1` [`ClusterId::BOS`]
//! sentinels. Counts are kept for every context length `0..order`; a query
//! resolves to the longest suffix of its context that was observed and uses
//! the raw relative frequencies under it.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::ClusterId;

/// Seven clusters of history plus the predicted one.
pub const DEFAULT_ORDER: usize = 8;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Continuations {
    pub total: u64,
    pub next: BTreeMap<ClusterId, u64>,
}

impl Continuations {
    fn add(&mut self, next: ClusterId, count: u64) {
        self.total += count;
        *self.next.entry(next).or_insert(0) += count;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StoredLm", into = "StoredLm")]
pub struct NGramModel {
    order: usize,
    counts: HashMap<Vec<ClusterId>, Continuations>,
}

/// Only the full-length n-grams are stored; shorter contexts are exact
/// marginals of them because every position has a padded full context.
#[derive(Serialize, Deserialize)]
struct StoredLm {
    order: usize,
    ngrams: Vec<(Vec<ClusterId>, ClusterId, u64)>,
}

impl TryFrom<StoredLm> for NGramModel {
    type Error = Error;

    fn try_from(stored: StoredLm) -> Result<Self> {
        let mut model = NGramModel::empty(stored.order)?;
        for (context, next, count) in stored.ngrams {
            if context.len() != stored.order - 1 {
                return Err(Error::Model(format!(
                    "n-gram context of length {} in an order-{} model",
                    context.len(),
                    stored.order
                )));
            }
            model.add_all_suffixes(&context, next, count);
        }
        Ok(model)
    }
}

impl From<NGramModel> for StoredLm {
    fn from(model: NGramModel) -> Self {
        let full = model.order - 1;
        let mut ngrams: Vec<_> = model
            .counts
            .iter()
            .filter(|(ctx, _)| ctx.len() == full)
            .flat_map(|(ctx, c)| c.next.iter().map(move |(n, k)| (ctx.clone(), *n, *k)))
            .collect();
        ngrams.sort();
        StoredLm {
            order: model.order,
            ngrams,
        }
    }
}

impl NGramModel {
    fn empty(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::BadOrder(order));
        }
        Ok(NGramModel {
            order,
            counts: HashMap::new(),
        })
    }

    /// Count transitions in `sequences`; each is one dialog's clusters in
    /// turn order, without padding.
    pub fn train(sequences: &[Vec<ClusterId>], order: usize) -> Result<Self> {
        let mut model = NGramModel::empty(order)?;
        if sequences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for seq in sequences {
            let padded = model.padded(seq);
            for i in order - 1..padded.len() {
                model.add_all_suffixes(&padded[i + 1 - order..i], padded[i], 1);
            }
        }
        Ok(model)
    }

    fn add_all_suffixes(&mut self, context: &[ClusterId], next: ClusterId, count: u64) {
        for k in 0..=context.len() {
            let suffix = &context[context.len() - k..];
            match self.counts.get_mut(suffix) {
                Some(c) => c.add(next, count),
                None => {
                    let mut c = Continuations::default();
                    c.add(next, count);
                    self.counts.insert(suffix.to_vec(), c);
                }
            }
        }
    }

    /// Associative merge of two models of the same order.
    pub fn merge(&mut self, other: &NGramModel) -> Result<()> {
        if other.order != self.order {
            return Err(Error::Model(format!(
                "cannot merge order {} into order {}",
                other.order, self.order
            )));
        }
        for (ctx, c) in &other.counts {
            let mine = self.counts.entry(ctx.clone()).or_default();
            for (n, k) in &c.next {
                mine.add(*n, *k);
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `order - 1` BOS sentinels followed by `seq`.
    pub fn padded(&self, seq: &[ClusterId]) -> Vec<ClusterId> {
        let mut out = vec![ClusterId::BOS; self.order - 1];
        out.extend_from_slice(seq);
        out
    }

    /// Distinct clusters ever observed as a continuation.
    pub fn vocab_size(&self) -> usize {
        self.counts.get(&[][..]).map_or(0, |c| c.next.len())
    }

    /// Total number of counted tokens.
    pub fn total_tokens(&self) -> u64 {
        self.counts.get(&[][..]).map_or(0, |c| c.total)
    }

    pub fn continuations(&self, context: &[ClusterId]) -> Option<&Continuations> {
        self.counts.get(context)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&[ClusterId], &Continuations)> {
        self.counts.iter().map(|(k, v)| (k.as_slice(), v))
    }

    /// The longest observed suffix of `context` (at most `order - 1` long).
    pub fn resolve<'a>(&self, context: &'a [ClusterId]) -> Option<(&'a [ClusterId], &Continuations)> {
        let longest = context.len().min(self.order - 1);
        (0..=longest).rev().find_map(|k| {
            let suffix = &context[context.len() - k..];
            self.counts.get(suffix).filter(|c| c.total > 0).map(|c| (suffix, c))
        })
    }

    pub fn prob(&self, context: &[ClusterId], next: ClusterId) -> f64 {
        if next == ClusterId::UNK {
            return 0.0;
        }
        match self.resolve(context) {
            Some((_, c)) => c.next.get(&next).map_or(0.0, |&k| k as f64 / c.total as f64),
            None => 0.0,
        }
    }

    pub fn predict_distribution(&self, context: &[ClusterId]) -> BTreeMap<ClusterId, f64> {
        match self.resolve(context) {
            Some((_, c)) => c.next.iter().map(|(&n, &k)| (n, k as f64 / c.total as f64)).collect(),
            None => BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<ClusterId> {
        v.iter().map(|&i| ClusterId(i)).collect()
    }

    fn toy() -> NGramModel {
        NGramModel::train(&[ids(&[1, 2, 3]), ids(&[1, 2, 4]), ids(&[1, 2, 3])], DEFAULT_ORDER).unwrap()
    }

    #[test]
    fn counts_bigram_context() {
        let lm = toy();
        let c = lm.continuations(&ids(&[1, 2])).unwrap();
        assert_eq!(c.next[&ClusterId(3)], 2);
        assert_eq!(c.next[&ClusterId(4)], 1);
        assert_eq!(c.total, 3);
    }

    #[test]
    fn single_token_sequence() {
        let lm = NGramModel::train(&[ids(&[7])], 8).unwrap();
        assert_eq!(lm.continuations(&[]).unwrap().next[&ClusterId(7)], 1);
        assert_eq!(lm.total_tokens(), 1);
    }

    #[test]
    fn unigram_total_is_token_count() {
        assert_eq!(toy().total_tokens(), 9);
        assert_eq!(toy().vocab_size(), 4);
    }

    #[test]
    fn probabilities() {
        let lm = toy();
        assert!((lm.prob(&ids(&[1, 2]), ClusterId(3)) - 2.0 / 3.0).abs() < 1e-15);
        let unseen = ids(&[9, 9, 9, 9, 9, 9, 9]);
        assert!((lm.prob(&unseen, ClusterId(1)) - 3.0 / 9.0).abs() < 1e-15);
        assert!((lm.prob(&unseen, ClusterId(3)) - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(lm.prob(&ids(&[1, 2]), ClusterId::UNK), 0.0);
    }

    #[test]
    fn distribution_for_context() {
        let d = toy().predict_distribution(&ids(&[1, 2]));
        assert_eq!(d.len(), 2);
        assert!((d[&ClusterId(3)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d[&ClusterId(4)] - 1.0 / 3.0).abs() < 1e-15);

        let d = toy().predict_distribution(&ids(&[1]));
        assert_eq!(d.len(), 1);
        assert_eq!(d[&ClusterId(2)], 1.0);
    }

    #[test]
    fn full_context_never_backs_off() {
        let lm = toy();
        let ctx = lm.padded(&ids(&[1, 2]));
        let (suffix, _) = lm.resolve(&ctx).unwrap();
        assert_eq!(suffix.len(), 7);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(NGramModel::train(&[], 8), Err(Error::EmptyCorpus)));
        assert!(matches!(NGramModel::train(&[ids(&[1])], 1), Err(Error::BadOrder(1))));
    }

    #[test]
    fn serde_round_trip_restores_all_orders() {
        let lm = toy();
        let json = serde_json::to_string(&lm).unwrap();
        let back: NGramModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, lm);
    }

    #[test]
    fn merge_equals_joint_training() {
        let mut a = NGramModel::train(&[ids(&[1, 2, 3])], 3).unwrap();
        let b = NGramModel::train(&[ids(&[1, 2, 4]), ids(&[5])], 3).unwrap();
        a.merge(&b).unwrap();
        let joint = NGramModel::train(&[ids(&[1, 2, 3]), ids(&[1, 2, 4]), ids(&[5])], 3).unwrap();
        assert_eq!(a, joint);
    }
}
