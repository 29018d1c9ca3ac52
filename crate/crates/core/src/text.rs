//! Tokenization shared by every stage.
//!
//! An utterance is split on whitespace into [`Chunk`]s. Each chunk keeps the
//! punctuation glued to either side of its word so that rewritten text can be
//! rendered back with commas and colons where the speaker put them, while all
//! matching happens on the lowercased `core`.

use std::collections::HashMap;

/// Transcript marker for a user turn with no speech.
pub const SILENCE: &str = "<SILENCE>";

const EDGE_PUNCT: &[char] = &[',', '.', '!', '?', ';', ':'];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub prefix: String,
    pub core: String,
    pub suffix: String,
}

impl Chunk {
    pub fn render(&self) -> String {
        format!("{}{}{}", self.prefix, self.core, self.suffix)
    }
}

pub fn chunks(text: &str) -> Vec<Chunk> {
    if text.trim() == SILENCE {
        return vec![Chunk {
            prefix: String::new(),
            core: "silence".into(),
            suffix: String::new(),
        }];
    }
    text.split_whitespace()
        .filter_map(|raw| {
            let start = raw.trim_start_matches(EDGE_PUNCT);
            let core = start.trim_end_matches(EDGE_PUNCT);
            if core.is_empty() {
                return None;
            }
            let prefix = &raw[..raw.len() - start.len()];
            let suffix = &start[core.len()..];
            Some(Chunk {
                prefix: prefix.to_string(),
                core: core.to_lowercase(),
                suffix: suffix.to_string(),
            })
        })
        .collect()
}

/// Lowercased word tokens with edge punctuation removed.
pub fn tokenize(text: &str) -> Vec<String> {
    chunks(text).into_iter().map(|c| c.core).collect()
}

pub fn render(chunks: &[Chunk]) -> Vec<String> {
    chunks.iter().map(Chunk::render).collect()
}

/// Replace `[start, end)` chunk spans with a single chunk whose core is the
/// replacement. Spans must be sorted and disjoint.
pub fn replace_spans(chunks: &[Chunk], spans: &[(usize, usize, String)]) -> Vec<Chunk> {
    let mut out = Vec::with_capacity(chunks.len());
    let mut pos = 0;
    for (start, end, replacement) in spans {
        debug_assert!(*start >= pos && start < end && *end <= chunks.len());
        out.extend_from_slice(&chunks[pos..*start]);
        out.push(Chunk {
            prefix: chunks[*start].prefix.clone(),
            core: replacement.clone(),
            suffix: chunks[end - 1].suffix.clone(),
        });
        pos = *end;
    }
    out.extend_from_slice(&chunks[pos..]);
    out
}

/// Multi-token phrase lookup with longest-match-first, left-to-right scanning.
#[derive(Clone, Debug)]
pub struct PhraseTable<V> {
    entries: HashMap<Vec<String>, V>,
    max_len: usize,
}

impl<V> Default for PhraseTable<V> {
    fn default() -> Self {
        PhraseTable {
            entries: HashMap::new(),
            max_len: 0,
        }
    }
}

impl<V> PhraseTable<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts unless the phrase is already present; the first binding wins.
    pub fn insert(&mut self, phrase: Vec<String>, value: V) {
        if phrase.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(phrase.len());
        self.entries.entry(phrase).or_insert(value);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All non-overlapping matches over `tokens` as `(start, end, value)`.
    pub fn find_all<'a, S: AsRef<str>>(&'a self, tokens: &[S]) -> Vec<(usize, usize, &'a V)> {
        let mut found = Vec::new();
        if self.entries.is_empty() {
            return found;
        }
        let mut key: Vec<String> = Vec::with_capacity(self.max_len);
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.max_len.min(tokens.len() - i);
            let mut hit = None;
            for len in (1..=longest).rev() {
                key.clear();
                key.extend(tokens[i..i + len].iter().map(|t| t.as_ref().to_string()));
                if let Some(v) = self.entries.get(&key) {
                    hit = Some((len, v));
                    break;
                }
            }
            match hit {
                Some((len, v)) => {
                    found.push((i, i + len, v));
                    i += len;
                }
                None => i += 1,
            }
        }
        found
    }
}

/// Rewrite every phrase found in `table` with its bound replacement.
pub fn substitute(chunks: &[Chunk], table: &PhraseTable<String>) -> Vec<Chunk> {
    let cores: Vec<&str> = chunks.iter().map(|c| c.core.as_str()).collect();
    let spans: Vec<(usize, usize, String)> = table
        .find_all(&cores)
        .into_iter()
        .map(|(s, e, v)| (s, e, v.clone()))
        .collect();
    replace_spans(chunks, &spans)
}
