//! Outcome flow graphs: all trials, then the module responsible, then the outcome.
//! Successes flow straight from the root. The JSON shape (`nodes` with `name`, `links` with
//! node indices and `value`) is what d3-sankey and similar tools read.

use serde::{Deserialize, Serialize};

use super::trials::ScenarioReport;
use crate::sim::OutcomeTaxonomy;

pub const ROOT: &str = "All Trials";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyNode {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyLink {
    pub source: usize,
    pub target: usize,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyGraph {
    pub nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
}

impl SankeyGraph {
    pub fn node(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn inflow(&self, node: usize) -> usize {
        self.links.iter().filter(|l| l.target == node).map(|l| l.value).sum()
    }

    pub fn outflow(&self, node: usize) -> usize {
        self.links.iter().filter(|l| l.source == node).map(|l| l.value).sum()
    }
}

/// Module an outcome is blamed on; `None` for success.
pub fn module_group(outcome: OutcomeTaxonomy) -> Option<&'static str> {
    match outcome {
        OutcomeTaxonomy::Success => None,
        OutcomeTaxonomy::WrongObject => Some("Detector"),
        OutcomeTaxonomy::WrongPart => Some("Segmenter"),
        OutcomeTaxonomy::GraspDepthIssue | OutcomeTaxonomy::GraspNotOnObject => Some("GraspGenerator"),
        OutcomeTaxonomy::GrippersSlipped | OutcomeTaxonomy::JointLimitHit | OutcomeTaxonomy::CollidedWithTable => {
            Some("Execution")
        }
    }
}

/// Outcomes with no trials are left out.
pub fn export_sankey(report: &ScenarioReport) -> SankeyGraph {
    let mut graph = SankeyGraph {
        nodes: vec![SankeyNode { name: ROOT.into() }],
        links: Vec::new(),
    };
    let node = |graph: &mut SankeyGraph, name: &str| {
        graph.node(name).unwrap_or_else(|| {
            graph.nodes.push(SankeyNode { name: name.into() });
            graph.nodes.len() - 1
        })
    };
    let link = |graph: &mut SankeyGraph, source: usize, target: usize, value: usize| {
        match graph.links.iter_mut().find(|l| l.source == source && l.target == target) {
            Some(l) => l.value += value,
            None => graph.links.push(SankeyLink { source, target, value }),
        }
    };
    for outcome in OutcomeTaxonomy::ALL {
        let n = report.count(outcome);
        if n == 0 {
            continue;
        }
        let leaf_parent = match module_group(outcome) {
            Some(group) => {
                let g = node(&mut graph, group);
                link(&mut graph, 0, g, n);
                g
            }
            None => 0,
        };
        let leaf = node(&mut graph, outcome.label());
        link(&mut graph, leaf_parent, leaf, n);
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{aggregate_trials, TrialRecord, TrialScenario};

    fn records(outcomes: &[(OutcomeTaxonomy, usize)]) -> Vec<TrialRecord> {
        outcomes
            .iter()
            .flat_map(|&(o, n)| {
                (0..n).map(move |_| TrialRecord {
                    scenario: TrialScenario::Individual,
                    object: "mug".into(),
                    part: "handle".into(),
                    orientation_index: Some(0),
                    outcome: o,
                    notes: String::new(),
                })
            })
            .collect()
    }

    #[test]
    fn single_outcome_is_one_link() {
        let report = aggregate_trials(&records(&[(OutcomeTaxonomy::Success, 4)]));
        let g = export_sankey(report.scenario(TrialScenario::Individual));
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.links, vec![SankeyLink { source: 0, target: 1, value: 4 }]);
    }

    #[test]
    fn groups_conserve_flow() {
        let report = aggregate_trials(&records(&[
            (OutcomeTaxonomy::Success, 5),
            (OutcomeTaxonomy::GraspDepthIssue, 2),
            (OutcomeTaxonomy::GraspNotOnObject, 1),
            (OutcomeTaxonomy::WrongPart, 3),
            (OutcomeTaxonomy::JointLimitHit, 1),
        ]));
        let g = export_sankey(report.scenario(TrialScenario::Individual));
        assert_eq!(g.outflow(0), 12);
        let grasp = g.node("GraspGenerator").unwrap();
        assert_eq!(g.inflow(grasp), 3);
        assert_eq!(g.outflow(grasp), 3);
        assert!(g.node("Detector").is_none());
        for i in 1..g.nodes.len() {
            if g.outflow(i) > 0 {
                assert_eq!(g.inflow(i), g.outflow(i));
            }
        }
    }
}
