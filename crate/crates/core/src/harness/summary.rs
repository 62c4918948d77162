use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::trial::ExperimentRecord;
use crate::error::{param, Error, Result};

/// Results-file columns that can be grouped on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    Model,
    GraphType,
    N,
    Coupling,
    Force,
    Endtime,
    Method,
    PerturbOrder,
    PerturbCount,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Model => "model",
            GroupKey::GraphType => "graph_type",
            GroupKey::N => "n",
            GroupKey::Coupling => "coupling",
            GroupKey::Force => "force",
            GroupKey::Endtime => "endtime",
            GroupKey::Method => "method",
            GroupKey::PerturbOrder => "perturb_order",
            GroupKey::PerturbCount => "perturb_count",
        }
    }

    pub fn value(self, r: &ExperimentRecord) -> String {
        match self {
            GroupKey::Model => r.model.as_str().to_string(),
            GroupKey::GraphType => r.graph_type.as_str().to_string(),
            GroupKey::N => r.cell.n.to_string(),
            GroupKey::Coupling => r.cell.coupling.to_string(),
            GroupKey::Force => r.cell.force.to_string(),
            GroupKey::Endtime => r.cell.endtime.to_string(),
            GroupKey::Method => r.method.as_str().to_string(),
            GroupKey::PerturbOrder => r.cell.perturb_order.as_str().to_string(),
            GroupKey::PerturbCount => r.cell.perturb_count.to_string(),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "model" => GroupKey::Model,
            "graph_type" => GroupKey::GraphType,
            "n" => GroupKey::N,
            "coupling" => GroupKey::Coupling,
            "force" => GroupKey::Force,
            "endtime" => GroupKey::Endtime,
            "method" => GroupKey::Method,
            "perturb_order" => GroupKey::PerturbOrder,
            "perturb_count" => GroupKey::PerturbCount,
            other => return param(format!("cannot group by '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<String>,
    /// `None` when every trial in the group failed.
    pub mean: Option<f64>,
    /// Sample standard deviation; 0 for a single successful trial.
    pub std: Option<f64>,
    pub count: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub keys: Vec<GroupKey>,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn key_index(&self, key: GroupKey) -> Option<usize> {
        self.keys.iter().position(|&k| k == key)
    }

    pub fn to_csv(&self) -> String {
        let mut out: String = self.keys.iter().map(|k| format!("{},", k.as_str())).collect();
        out.push_str("mean,std,count,failed\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            for k in &r.key {
                write!(out, "{k},").unwrap();
            }
            writeln!(out, "{},{},{},{}", opt(r.mean), opt(r.std), r.count, r.failed).unwrap();
        }
        out
    }
}

/// Accuracy mean and spread per group, groups in order of first appearance.
/// Failed trials are counted but kept out of the statistics.
pub fn summarize(records: &[ExperimentRecord], keys: &[GroupKey]) -> Result<SummaryTable> {
    if records.is_empty() {
        return param("nothing to summarize");
    }
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();
    let mut groups: Vec<(Vec<String>, Vec<f64>, usize)> = Vec::new();
    for r in records {
        let key: Vec<String> = keys.iter().map(|k| k.value(r)).collect();
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new(), 0));
            groups.len() - 1
        });
        if r.status.is_ok() && r.accuracy.is_finite() {
            groups[slot].1.push(r.accuracy);
        } else {
            groups[slot].2 += 1;
        }
    }
    let rows = groups
        .into_iter()
        .map(|(key, vals, failed)| {
            let count = vals.len();
            let (mean, std) = if count == 0 {
                (None, None)
            } else {
                let m = vals.iter().sum::<f64>() / count as f64;
                let s = if count > 1 {
                    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (Some(m), Some(s))
            };
            SummaryRow {
                key,
                mean,
                std,
                count,
                failed,
            }
        })
        .collect();
    Ok(SummaryTable {
        keys: keys.to_vec(),
        rows,
    })
}
