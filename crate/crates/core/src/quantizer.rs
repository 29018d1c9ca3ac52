//! Bag-of-words quantization: every distinct word multiset is its own cluster.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::delex::DelexUtterance;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl ClusterId {
    /// Reserved for utterances whose vector was never seen in training.
    pub const UNK: ClusterId = ClusterId(u32::MAX);
    /// Reserved dialog-start padding in language-model contexts.
    pub const BOS: ClusterId = ClusterId(u32::MAX - 1);

    pub fn is_reserved(self) -> bool {
        self == Self::UNK || self == Self::BOS
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::UNK => f.write_str("UNK"),
            Self::BOS => f.write_str("BOS"),
            ClusterId(n) => write!(f, "{n}"),
        }
    }
}

/// Token multiset; no zero counts are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BowVector(BTreeMap<String, u32>);

impl BowVector {
    pub fn count(&self, token: &str) -> u32 {
        self.0.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: AsRef<str>> FromIterator<S> for BowVector {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut counts = BTreeMap::new();
        for t in iter {
            *counts.entry(t.as_ref().to_string()).or_insert(0) += 1;
        }
        BowVector(counts)
    }
}

pub fn encode(utt: &DelexUtterance) -> BowVector {
    utt.tokens.iter().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "StoredClusters", into = "StoredClusters")]
pub struct ClusterModel {
    table: HashMap<BowVector, ClusterId>,
    canonical: Vec<DelexUtterance>,
    api_call: BTreeSet<ClusterId>,
    affirmation: BTreeSet<ClusterId>,
}

#[derive(Serialize, Deserialize)]
struct StoredClusters {
    canonical: Vec<DelexUtterance>,
    affirmation: BTreeSet<ClusterId>,
}

impl From<StoredClusters> for ClusterModel {
    fn from(stored: StoredClusters) -> Self {
        let mut model = ClusterModel::default();
        for utt in stored.canonical {
            model.observe(&utt);
        }
        model.affirmation = stored.affirmation;
        model
    }
}

impl From<ClusterModel> for StoredClusters {
    fn from(model: ClusterModel) -> Self {
        StoredClusters {
            canonical: model.canonical,
            affirmation: model.affirmation,
        }
    }
}

impl ClusterModel {
    /// Clusters in first-occurrence order over dialogs, then turns.
    pub fn fit(corpus: &[Vec<DelexUtterance>]) -> Result<Self> {
        if corpus.iter().all(Vec::is_empty) {
            return Err(Error::EmptyCorpus);
        }
        let mut model = ClusterModel::default();
        for utt in corpus.iter().flatten() {
            model.observe(utt);
        }
        Ok(model)
    }

    fn observe(&mut self, utt: &DelexUtterance) -> ClusterId {
        let bow = encode(utt);
        if let Some(&id) = self.table.get(&bow) {
            return id;
        }
        let id = ClusterId(self.canonical.len() as u32);
        self.table.insert(bow, id);
        if utt.is_api_call() {
            self.api_call.insert(id);
        }
        self.canonical.push(utt.clone());
        id
    }

    pub fn assign(&self, utt: &DelexUtterance) -> ClusterId {
        self.table.get(&encode(utt)).copied().unwrap_or(ClusterId::UNK)
    }

    pub fn canonical(&self, id: ClusterId) -> Option<&DelexUtterance> {
        self.canonical.get(id.0 as usize)
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    pub fn is_api_call(&self, id: ClusterId) -> bool {
        self.api_call.contains(&id)
    }

    pub fn api_call_clusters(&self) -> &BTreeSet<ClusterId> {
        &self.api_call
    }

    pub fn is_affirmation(&self, id: ClusterId) -> bool {
        self.affirmation.contains(&id)
    }

    pub fn set_affirmations(&mut self, ids: impl IntoIterator<Item = ClusterId>) {
        self.affirmation = ids.into_iter().filter(|id| !id.is_reserved()).collect();
    }

    pub fn affirmations(&self) -> &BTreeSet<ClusterId> {
        &self.affirmation
    }
}
