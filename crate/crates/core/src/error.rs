use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("knowledge base: {0}")]
    Kb(String),

    #[error("no results to delexicalize")]
    NoResults,

    #[error("no slots to fill")]
    NoSlots,

    #[error("empty candidate list")]
    NoCandidates,

    #[error("classifier needs at least two classes, got {0}")]
    SingleClass(usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("language model needs order >= 2, got {0}")]
    BadOrder(usize),

    #[error("generation: {0}")]
    Generation(String),

    #[error("model: {0}")]
    Model(String),

    #[error("dialog {dialog}, turn {turn}: {source}")]
    At {
        dialog: usize,
        turn: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn at(self, dialog: usize, turn: usize) -> Self {
        Error::At {
            dialog,
            turn,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
