//! Per-task accuracy tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::TaskId;

/// Turn-level counts for one task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStats {
    pub turns: usize,
    pub correct: usize,
    pub api_turns: usize,
    pub api_correct: usize,
    pub dialogs: usize,
    pub dialogs_correct: usize,
}

impl TaskStats {
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct, self.turns)
    }

    pub fn api_accuracy(&self) -> Option<f64> {
        ratio(self.api_correct, self.api_turns)
    }

    pub fn dialog_accuracy(&self) -> Option<f64> {
        ratio(self.dialogs_correct, self.dialogs)
    }

    pub fn merge(&mut self, other: &TaskStats) {
        self.turns += other.turns;
        self.correct += other.correct;
        self.api_turns += other.api_turns;
        self.api_correct += other.api_correct;
        self.dialogs += other.dialogs;
        self.dialogs_correct += other.dialogs_correct;
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Results on one evaluation set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub tasks: BTreeMap<TaskId, TaskStats>,
    /// Records without a task tag count here only.
    #[serde(default)]
    pub untagged: TaskStats,
}

impl Column {
    pub fn new(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn accuracy(&self, task: TaskId) -> Option<f64> {
        self.tasks.get(&task).and_then(TaskStats::accuracy)
    }

    pub fn api_accuracy(&self, task: TaskId) -> Option<f64> {
        self.tasks.get(&task).and_then(TaskStats::api_accuracy)
    }

    /// Mean of the per-task accuracies that are present.
    pub fn average(&self) -> Option<f64> {
        mean(self.tasks.values().filter_map(TaskStats::accuracy))
    }

    /// Turn-weighted totals over every record.
    pub fn total(&self) -> TaskStats {
        let mut total = self.untagged;
        for s in self.tasks.values() {
            total.merge(s);
        }
        total
    }

    pub fn merge(&mut self, other: &Column) {
        for (task, s) in &other.tasks {
            self.tasks.entry(*task).or_default().merge(s);
        }
        self.untagged.merge(&other.untagged);
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub columns: Vec<Column>,
}

impl Report {
    pub fn single(column: Column) -> Self {
        Report { columns: vec![column] }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Lowest per-task accuracy across all columns.
    pub fn min_accuracy(&self) -> Option<f64> {
        self.columns
            .iter()
            .flat_map(|c| c.tasks.values().filter_map(TaskStats::accuracy))
            .reduce(f64::min)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Accuracy table: tasks 1 to 5 and their average, then api_call-turn
    /// accuracy. Missing cells print as `-`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        render_table(&mut out, "Accuracy", &self.columns, Column::accuracy, Column::average);
        out.push('\n');
        render_table(&mut out, "api_call turns", &self.columns, Column::api_accuracy, |c| {
            mean(c.tasks.values().filter_map(TaskStats::api_accuracy))
        });
        out
    }
}

const LABEL_WIDTH: usize = 16;
const CELL_WIDTH: usize = 14;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn render_table(
    out: &mut String,
    title: &str,
    columns: &[Column],
    per_task: impl Fn(&Column, TaskId) -> Option<f64>,
    average: impl Fn(&Column) -> Option<f64>,
) {
    let _ = write!(out, "{title:<LABEL_WIDTH$}");
    for c in columns {
        let _ = write!(out, "{:>CELL_WIDTH$}", c.name);
    }
    out.push('\n');
    for task in TaskId::ALL {
        let _ = write!(out, "{:<LABEL_WIDTH$}", format!("Task {}", task.number()));
        for c in columns {
            let _ = write!(out, "{:>CELL_WIDTH$}", cell(per_task(c, task)));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<LABEL_WIDTH$}", "Average");
    for c in columns {
        let _ = write!(out, "{:>CELL_WIDTH$}", cell(average(c)));
    }
    out.push('\n');
}
