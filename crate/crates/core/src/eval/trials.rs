//! Grasp trial logs and their outcome tables.
//!
//! Log format: CSV with header `scenario,object,part,orientation_index,outcome,notes`.
//! `scenario` is `individual` or `table_clearing`; `orientation_index` (0 to 4, 45° steps)
//! is only given for individual trials and is empty or `-` otherwise; `outcome` is an
//! [`OutcomeTaxonomy`] token.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::io::IoError;
use crate::sim::{OutcomeTaxonomy, SimTrial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialScenario {
    Individual,
    TableClearing,
}

impl TrialScenario {
    pub const ALL: [TrialScenario; 2] = [TrialScenario::Individual, TrialScenario::TableClearing];

    pub fn token(self) -> &'static str {
        match self {
            TrialScenario::Individual => "individual",
            TrialScenario::TableClearing => "table_clearing",
        }
    }
}

impl fmt::Display for TrialScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for TrialScenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "individual" => Ok(TrialScenario::Individual),
            "table_clearing" => Ok(TrialScenario::TableClearing),
            _ => Err(format!("unknown scenario {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: TrialScenario,
    pub object: String,
    pub part: String,
    pub orientation_index: Option<u8>,
    pub outcome: OutcomeTaxonomy,
    pub notes: String,
}

impl TrialRecord {
    /// Log row for a simulated trial; multi-object scenes count as table clearing.
    pub fn from_sim(trial: &SimTrial) -> Self {
        let mut notes = Vec::new();
        if !trial.faults.is_empty() {
            let faults: Vec<String> = trial.faults.iter().map(|f| f.to_string()).collect();
            notes.push(format!("faults={}", faults.join("+")));
        }
        if let Some(f) = &trial.result.failure {
            notes.push(format!("failed stage={}", f.stage));
        }
        Self {
            scenario: if trial.objects == 1 {
                TrialScenario::Individual
            } else {
                TrialScenario::TableClearing
            },
            object: trial.object_query.clone(),
            part: trial.part.clone(),
            orientation_index: trial.orientation_index,
            outcome: trial.result.outcome,
            notes: notes.join("; "),
        }
    }
}

#[derive(Debug, Deserialize)]
struct LogRow {
    scenario: String,
    object: String,
    part: String,
    orientation_index: String,
    outcome: String,
    #[serde(default)]
    notes: String,
}

pub fn parse_trial_log(reader: impl Read) -> Result<Vec<TrialRecord>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<LogRow>().enumerate() {
        let line = i + 2;
        let err = |message: String| EvalError::Parse { line, message };
        let row = row.map_err(|e| err(e.to_string()))?;
        let scenario: TrialScenario = row.scenario.parse().map_err(err)?;
        let outcome: OutcomeTaxonomy = row
            .outcome
            .parse()
            .map_err(|_| err(format!("unknown outcome {:?}", row.outcome)))?;
        let orientation_index = match row.orientation_index.as_str() {
            "" | "-" => None,
            t => Some(
                t.parse::<u8>()
                    .ok()
                    .filter(|k| *k <= 4)
                    .ok_or_else(|| err(format!("orientation index {t:?} not in 0..=4")))?,
            ),
        };
        if orientation_index.is_some() && scenario != TrialScenario::Individual {
            return Err(err("orientation index is only recorded for individual trials".into()));
        }
        records.push(TrialRecord {
            scenario,
            object: row.object,
            part: row.part,
            orientation_index,
            outcome,
            notes: row.notes,
        });
    }
    Ok(records)
}

pub fn ingest_trial_log(path: &Path) -> Result<Vec<TrialRecord>, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trial_log(file)
}

pub fn write_trial_log(writer: impl Write, records: &[TrialRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "object", "part", "orientation_index", "outcome", "notes"])?;
    for r in records {
        let k = r.orientation_index.map(|k| k.to_string()).unwrap_or_default();
        w.write_record([r.scenario.token(), &r.object, &r.part, &k, r.outcome.token(), &r.notes])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: TrialScenario,
    pub total: usize,
    /// Every outcome, zero counts included.
    pub counts: BTreeMap<OutcomeTaxonomy, usize>,
    /// Percent of `total`; absent when there are no trials.
    pub percentages: Option<BTreeMap<OutcomeTaxonomy, f64>>,
    /// Percent of trials not ending on the wrong part or the wrong object.
    pub correct_part_rate: Option<f64>,
    /// Percent of trials not ending on the wrong object.
    pub correct_object_rate: Option<f64>,
    /// Outcomes that never occurred; tables show them as 0.
    pub absent: Vec<OutcomeTaxonomy>,
}

impl ScenarioReport {
    pub fn count(&self, outcome: OutcomeTaxonomy) -> usize {
        self.counts[&outcome]
    }

    pub fn percent(&self, outcome: OutcomeTaxonomy) -> Option<f64> {
        self.percentages.as_ref().map(|p| p[&outcome])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    /// Both scenarios, individual first, even when one has no trials.
    pub scenarios: Vec<ScenarioReport>,
}

impl TrialReport {
    pub fn scenario(&self, scenario: TrialScenario) -> &ScenarioReport {
        self.scenarios
            .iter()
            .find(|s| s.scenario == scenario)
            .expect("reports carry every scenario")
    }

    pub fn total(&self) -> usize {
        self.scenarios.iter().map(|s| s.total).sum()
    }
}

pub fn aggregate_trials(records: &[TrialRecord]) -> TrialReport {
    let scenarios = TrialScenario::ALL
        .iter()
        .map(|&scenario| {
            let mut counts: BTreeMap<OutcomeTaxonomy, usize> = OutcomeTaxonomy::ALL.iter().map(|&o| (o, 0)).collect();
            for r in records.iter().filter(|r| r.scenario == scenario) {
                *counts.get_mut(&r.outcome).expect("all outcomes present") += 1;
            }
            let total: usize = counts.values().sum();
            let pct = |n: usize| 100.0 * n as f64 / total as f64;
            let has_trials = total > 0;
            ScenarioReport {
                scenario,
                total,
                percentages: has_trials.then(|| counts.iter().map(|(&o, &n)| (o, pct(n))).collect()),
                correct_part_rate: has_trials.then(|| {
                    pct(total - counts[&OutcomeTaxonomy::WrongPart] - counts[&OutcomeTaxonomy::WrongObject])
                }),
                correct_object_rate: has_trials.then(|| pct(total - counts[&OutcomeTaxonomy::WrongObject])),
                absent: counts.iter().filter(|(_, &n)| n == 0).map(|(&o, _)| o).collect(),
                counts,
            }
        })
        .collect();
    TrialReport { scenarios }
}
