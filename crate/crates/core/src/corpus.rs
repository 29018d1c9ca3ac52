//! Dialog transcripts, evaluation records, and knowledge-base files.
//!
//! Transcript lines are `<n> <user>\t<system>` for exchanges and
//! `<n> <restaurant> <property> <value>` for knowledge-base results. Dialogs
//! are separated by one blank line and `n` restarts at 1 in each dialog. A
//! `#task T<k>` line sets the task of every following dialog; the task before
//! any directive is `T1`.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{KbRecord, KnowledgeBase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [TaskId::T1, TaskId::T2, TaskId::T3, TaskId::T4, TaskId::T5];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(n: usize) -> Option<TaskId> {
        TaskId::ALL.get(n.checked_sub(1)?).copied()
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.number())
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('T').or_else(|| s.strip_prefix('t')).unwrap_or(s);
        digits
            .parse::<usize>()
            .ok()
            .and_then(TaskId::from_number)
            .ok_or_else(|| format!("unknown task {s:?} (expected T1..T5)"))
    }
}

/// One knowledge-base result line: restaurant, property, value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbFact {
    pub name: String,
    pub property: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Turn {
    Exchange { index: usize, user: String, system: String },
    KbResult { index: usize, fact: KbFact },
}

impl Turn {
    pub fn index(&self) -> usize {
        match self {
            Turn::Exchange { index, .. } | Turn::KbResult { index, .. } => *index,
        }
    }
}

pub fn is_api_call(utterance: &str) -> bool {
    utterance.split_whitespace().next() == Some("api_call")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dialog {
    pub task: TaskId,
    pub turns: Vec<Turn>,
}

impl Dialog {
    pub fn new(task: TaskId) -> Self {
        Dialog {
            task,
            turns: Vec::new(),
        }
    }

    pub fn push_exchange(&mut self, user: impl Into<String>, system: impl Into<String>) {
        let index = self.turns.len() + 1;
        self.turns.push(Turn::Exchange {
            index,
            user: user.into(),
            system: system.into(),
        });
    }

    pub fn push_result(&mut self, fact: KbFact) {
        let index = self.turns.len() + 1;
        self.turns.push(Turn::KbResult { index, fact });
    }

    pub fn exchanges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.turns.iter().filter_map(|t| match t {
            Turn::Exchange { user, system, .. } => Some((user.as_str(), system.as_str())),
            Turn::KbResult { .. } => None,
        })
    }

    /// Checks index contiguity and that results only follow an api_call.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.turns.is_empty() {
            return Err("empty dialog".into());
        }
        let mut after_api_call = false;
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.index() != i + 1 {
                return Err(format!("turn index {} where {} was expected", turn.index(), i + 1));
            }
            match turn {
                Turn::Exchange { system, .. } => after_api_call = is_api_call(system),
                Turn::KbResult { .. } if !after_api_call => {
                    return Err(format!("result at turn {} does not follow an api_call", i + 1));
                }
                Turn::KbResult { .. } => {}
            }
        }
        Ok(())
    }
}

pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<Dialog>> {
    let mut dialogs = Vec::new();
    let mut task = TaskId::T1;
    let mut current: Option<Dialog> = None;
    let mut after_api_call = false;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(d) = current.take() {
                dialogs.push(d);
            }
            continue;
        }
        if let Some(directive) = line.strip_prefix('#') {
            let mut parts = directive.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("task"), Some(t), None) => {
                    if current.is_some() {
                        return Err(Error::parse(lineno, "task directive inside a dialog"));
                    }
                    task = t.parse().map_err(|e: String| Error::parse(lineno, e))?;
                }
                _ => return Err(Error::parse(lineno, format!("unknown directive {line:?}"))),
            }
            continue;
        }

        let (number, rest) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(lineno, "expected a turn number followed by text"))?;
        let index: usize = number
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::parse(lineno, format!("malformed turn number {number:?}")))?;
        let dialog = current.get_or_insert_with(|| Dialog::new(task));
        let expected = dialog.turns.len() + 1;
        if index != expected {
            return Err(Error::parse(
                lineno,
                format!("turn number {index} where {expected} was expected"),
            ));
        }

        let tabs = rest.matches('\t').count();
        if tabs > 1 {
            return Err(Error::parse(
                lineno,
                format!("exchange line has {tabs} tabs, expected 1"),
            ));
        }
        if tabs == 1 {
            let (user, system) = rest.split_once('\t').expect("one tab");
            let (user, system) = (user.trim(), system.trim());
            if user.is_empty() || system.is_empty() {
                return Err(Error::parse(
                    lineno,
                    "exchange needs both a user and a system utterance",
                ));
            }
            after_api_call = is_api_call(system);
            dialog.push_exchange(user, system);
        } else {
            let fact = parse_fact(rest).ok_or_else(|| {
                Error::parse(
                    lineno,
                    "expected `<user>\\t<system>` or `<restaurant> <property> <value>`",
                )
            })?;
            if !after_api_call {
                return Err(Error::parse(
                    lineno,
                    "knowledge-base result does not follow an api_call",
                ));
            }
            dialog.push_result(fact);
        }
    }
    if let Some(d) = current.take() {
        dialogs.push(d);
    }
    Ok(dialogs)
}

pub fn parse_corpus_str(text: &str) -> Result<Vec<Dialog>> {
    parse_corpus(text.as_bytes())
}

fn parse_fact(rest: &str) -> Option<KbFact> {
    let rest = rest.trim();
    let (name, rest) = rest.split_once(char::is_whitespace)?;
    let (property, value) = rest.trim_start().split_once(char::is_whitespace)?;
    let value = value.split_whitespace().collect::<Vec<_>>().join(" ");
    if value.is_empty() {
        return None;
    }
    Some(KbFact {
        name: name.to_string(),
        property: property.to_string(),
        value,
    })
}

pub fn serialize_corpus(dialogs: &[Dialog]) -> String {
    let mut out = String::new();
    let mut task = TaskId::T1;
    for dialog in dialogs {
        if dialog.task != task {
            task = dialog.task;
            out.push_str(&format!("#task {task}\n"));
        }
        for turn in &dialog.turns {
            match turn {
                Turn::Exchange { index, user, system } => out.push_str(&format!("{index} {user}\t{system}\n")),
                Turn::KbResult { index, fact } => {
                    out.push_str(&format!("{index} {} {} {}\n", fact.name, fact.property, fact.value))
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_kb<R: BufRead>(reader: R) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fact =
            parse_fact(&line).ok_or_else(|| Error::parse(lineno, "expected `<restaurant> <property> <value>`"))?;
        kb.insert_fact(fact).map_err(|e| Error::parse(lineno, e.to_string()))?;
    }
    kb.validate()?;
    Ok(kb)
}

pub fn parse_kb_str(text: &str) -> Result<KnowledgeBase> {
    parse_kb(text.as_bytes())
}

pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    for record in kb.records() {
        for (property, value) in &record.properties {
            out.push_str(&format!("{} {property} {value}\n", record.name));
        }
    }
    out
}

/// Group result facts by restaurant, keeping first-appearance order.
pub fn group_facts(facts: &[KbFact]) -> Result<Vec<KbRecord>> {
    let mut kb = KnowledgeBase::default();
    for fact in facts {
        kb.insert_fact(fact.clone())?;
    }
    Ok(kb.into_records())
}

/// A context item in an evaluation record. The final item is usually an
/// exchange without a system side: the user turn the system must answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContextTurn {
    Result {
        result: KbFact,
    },
    Exchange {
        user: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        system: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialog_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    pub context: Vec<ContextTurn>,
    pub candidates: Vec<String>,
    pub answer_index: usize,
}

impl EvalRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.candidates.len() < 2 {
            return Err(format!("{} candidate(s), need at least 2", self.candidates.len()));
        }
        if self.answer_index >= self.candidates.len() {
            return Err(format!(
                "answer_index {} out of range for {} candidates",
                self.answer_index,
                self.candidates.len()
            ));
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.as_str()) {
                return Err(format!("duplicate candidate {c:?}"));
            }
        }
        Ok(())
    }

    pub fn answer(&self) -> &str {
        &self.candidates[self.answer_index]
    }
}

pub fn read_eval<R: BufRead>(reader: R) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        record.validate().map_err(|e| Error::parse(lineno, e))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_eval<W: Write>(mut writer: W, records: &[EvalRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_exchange() {
        let dialogs = parse_corpus_str("1 hello\thello what can i help you with today\n\n").unwrap();
        assert_eq!(dialogs.len(), 1);
        assert_eq!(dialogs[0].turns.len(), 1);
        assert!(matches!(&dialogs[0].turns[0], Turn::Exchange { user, .. } if user == "hello"));
    }

    #[test]
    fn empty_stream() {
        assert!(parse_corpus_str("").unwrap().is_empty());
        assert_eq!(serialize_corpus(&[]), "");
    }

    #[test]
    fn single_turn_serializes_to_one_line_and_blank() {
        let mut d = Dialog::new(TaskId::T1);
        d.push_exchange("hello", "hello what can i help you with today");
        assert_eq!(
            serialize_corpus(&[d]),
            "1 hello\thello what can i help you with today\n\n"
        );
    }

    #[test]
    fn bad_turn_number_reports_line() {
        let err = parse_corpus_str("1 hi\thello\nx there\tok\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn two_tabs_rejected() {
        let err = parse_corpus_str("1 hi\thello\textra\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn non_contiguous_indices_rejected() {
        let err = parse_corpus_str("1 hi\thello\n3 there\tok\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn results_must_follow_api_call() {
        let err = parse_corpus_str("1 hi\thello\n2 resto R_cuisine thai\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let ok = "1 <SILENCE>\tapi_call thai rome two cheap casual\n2 resto R_cuisine thai\n3 <SILENCE>\twhat do you think of this option: resto\n\n";
        let d = parse_corpus_str(ok).unwrap();
        assert_eq!(d[0].turns.len(), 3);
        assert_eq!(serialize_corpus(&d), ok);
    }

    #[test]
    fn task_directive_round_trips() {
        let text = "1 hi\thello\n\n#task T3\n1 hi\thello\n\n1 hey\thello\n\n#task T1\n1 yo\thello\n\n";
        let d = parse_corpus_str(text).unwrap();
        assert_eq!(
            d.iter().map(|d| d.task).collect::<Vec<_>>(),
            vec![TaskId::T1, TaskId::T3, TaskId::T3, TaskId::T1]
        );
        assert_eq!(serialize_corpus(&d), text);
    }

    #[test]
    fn kb_groups_by_name() {
        let kb = parse_kb_str("r1 R_cuisine spanish\nr1 R_location bombay").unwrap();
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.records()[0].properties.len(), 2);
        assert!(parse_kb_str("").unwrap().is_empty());
    }

    #[test]
    fn kb_duplicate_property_rejected() {
        let err = parse_kb_str("r1 R_cuisine spanish\nr1 R_cuisine thai\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn eval_record_json_shape() {
        let line = r#"{"context":[{"user":"hi","system":"hello"},{"result":{"name":"r","property":"R_phone","value":"r_phone"}},{"user":"<SILENCE>"}],"candidates":["a","b"],"answer_index":1}"#;
        let recs = read_eval(line.as_bytes()).unwrap();
        assert_eq!(recs[0].context.len(), 3);
        assert!(matches!(recs[0].context[1], ContextTurn::Result { .. }));
        assert!(matches!(
            &recs[0].context[2],
            ContextTurn::Exchange { system: None, .. }
        ));
        let mut out = Vec::new();
        write_eval(&mut out, &recs).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim_end(), line);
    }

    #[test]
    fn eval_record_invariants() {
        let dup = r#"{"context":[],"candidates":["a","a"],"answer_index":0}"#;
        assert!(read_eval(dup.as_bytes()).is_err());
        let range = r#"{"context":[],"candidates":["a","b"],"answer_index":2}"#;
        assert!(read_eval(range.as_bytes()).is_err());
    }
}
