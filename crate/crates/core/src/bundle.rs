//! Versioned, deterministic JSON model bundle.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{EntityType, Lexicon};
use crate::lm::NGramModel;
use crate::quantizer::ClusterModel;
use crate::state::Classifier;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub order: usize,
    /// Types that make up user entity vectors and must be filled before an
    /// api_call, in canonical order.
    pub entity_types: Vec<EntityType>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config: ModelConfig,
    pub clusters: ClusterModel,
    pub lm: NGramModel,
    pub dubious: Classifier,
    pub disambiguation: Classifier,
    pub lexicon: Lexicon,
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let bundle: ModelBundle = serde_json::from_str(json)?;
        if bundle.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported bundle format {} (expected {FORMAT_VERSION})",
                bundle.format_version
            )));
        }
        if bundle.lm.order() != bundle.config.order {
            return Err(Error::Model(format!(
                "config order {} does not match language model order {}",
                bundle.config.order,
                bundle.lm.order()
            )));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Bundle lexicon merged with `extra`, for matching against a new KB.
    pub fn runtime_lexicon(&self, extra: Option<&Lexicon>) -> Lexicon {
        let mut lex = self.lexicon.clone();
        if let Some(extra) = extra {
            lex.merge(extra);
        }
        lex
    }
}
