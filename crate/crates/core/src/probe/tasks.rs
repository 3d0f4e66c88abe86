//! The 19 downstream tasks and the metrics reported for each.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::synthgen::{Cardinalities, TaskId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGroup {
    Demographics,
    Risk,
    Banking,
    Geolocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    Multiclass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    RocAuc,
    PrAuc,
    F1Macro,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::RocAuc, Metric::PrAuc, Metric::F1Macro];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::RocAuc => "roc_auc",
            Metric::PrAuc => "pr_auc",
            Metric::F1Macro => "f1_macro",
        }
    }

    /// Column abbreviation used in the rendered tables.
    pub fn short(self) -> &'static str {
        match self {
            Metric::Accuracy => "acc",
            Metric::RocAuc => "roc",
            Metric::PrAuc => "pr",
            Metric::F1Macro => "f1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.short() == s)
            .ok_or_else(|| Error::config(format!("unknown metric `{s}`")))
    }

    /// PR AUC needs a positive class; ROC AUC on multiclass is one-vs-rest macro.
    pub fn valid_for(self, kind: TaskKind) -> bool {
        !(self == Metric::PrAuc && kind == TaskKind::Multiclass)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Undersample {
    /// Label of the rare event class that is always kept.
    pub rare_label: u32,
    /// Kept majority rows per rare row.
    pub ratio: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskId,
    pub group: TaskGroup,
    pub kind: TaskKind,
    pub n_classes: usize,
    pub metrics: Vec<Metric>,
    pub undersample: Option<Undersample>,
}

impl TaskSpec {
    pub fn id(&self) -> &'static str {
        self.task.as_str()
    }
}

/// Task table in reporting order, sized by the corpus cardinalities.
pub fn all_tasks(c: &Cardinalities) -> Vec<TaskSpec> {
    use Metric::*;
    use TaskGroup::*;
    use TaskId as T;
    let bin = |task, group, metric, undersample: Option<Undersample>| TaskSpec {
        task,
        group,
        kind: TaskKind::Binary,
        n_classes: 2,
        metrics: vec![metric],
        undersample,
    };
    let multi = |task, group, n: u32, metric| TaskSpec {
        task,
        group,
        kind: TaskKind::Multiclass,
        n_classes: n as usize,
        metrics: vec![metric],
        undersample: None,
    };
    let risk = |task, metric, rare_label| bin(task, Risk, metric, Some(Undersample { rare_label, ratio: 4 }));
    vec![
        bin(T::Gender, Demographics, Accuracy, None),
        multi(T::FirstName, Demographics, c.first_names, RocAuc),
        multi(T::Age, Demographics, c.age_buckets, Accuracy),
        risk(T::Nsf, RocAuc, 1),
        risk(T::Stop, PrAuc, 1),
        risk(T::Unauth, PrAuc, 1),
        risk(T::Frozen, PrAuc, 1),
        // The returned (rare) outcome of `suf` is label 0.
        risk(T::Suf, PrAuc, 0),
        risk(T::Ret, PrAuc, 1),
        bin(T::DebitCard, Banking, RocAuc, None),
        multi(T::Income, Banking, c.income_buckets, RocAuc),
        multi(T::Balance, Banking, c.balance_buckets, RocAuc),
        multi(T::Fi, Banking, c.fis, F1Macro),
        bin(T::AccountType, Banking, F1Macro, None),
        bin(T::AccountProfile, Banking, F1Macro, None),
        multi(T::State1, Geolocation, c.states, F1Macro),
        multi(T::City1, Geolocation, c.cities, F1Macro),
        multi(T::State2, Geolocation, c.states, F1Macro),
        multi(T::City2, Geolocation, c.cities, F1Macro),
    ]
}

pub fn find_task<'a>(tasks: &'a [TaskSpec], id: &str) -> Result<&'a TaskSpec> {
    tasks
        .iter()
        .find(|t| t.id() == id)
        .ok_or_else(|| Error::UnknownTask(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nineteen_tasks_with_valid_metrics() {
        let tasks = all_tasks(&Cardinalities::default());
        assert_eq!(tasks.len(), 19);
        for t in &tasks {
            assert!(t.metrics.iter().all(|m| m.valid_for(t.kind)), "{}", t.id());
            assert_eq!(t.undersample.is_some(), t.group == TaskGroup::Risk);
        }
        let groups = |g| tasks.iter().filter(|t| t.group == g).count();
        assert_eq!(
            [groups(TaskGroup::Demographics), groups(TaskGroup::Risk), groups(TaskGroup::Banking), groups(TaskGroup::Geolocation)],
            [3, 6, 6, 4]
        );
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.as_str()).unwrap(), m);
            assert_eq!(Metric::parse(m.short()).unwrap(), m);
        }
        assert!(Metric::parse("mcc").is_err());
    }
}
