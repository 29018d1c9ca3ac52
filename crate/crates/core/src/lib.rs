//! Task-oriented dialog by delexicalization, utterance quantization and an
//! n-gram model over the resulting cluster sequences.

pub mod bundle;
pub mod corpus;
pub mod delex;
pub mod error;
pub mod harness;
pub mod kb;
pub mod lm;
pub mod predictor;
pub mod quantizer;
pub mod state;
pub mod synthgen;
pub mod text;

pub use bundle::ModelBundle;
pub use corpus::{Dialog, EvalRecord, TaskId};
pub use error::{Error, Result};
pub use kb::{EntityType, KnowledgeBase, Lexicon};
pub use lm::NGramModel;
pub use predictor::{RankedCandidates, Session};
pub use quantizer::{ClusterId, ClusterModel};
pub use state::{Classifier, DialogState};
