//! Organizational structure discovery: builds a performative-labeled actor
//! interaction graph and classifies each connected component as strict
//! hierarchy, relaxed hierarchy, federation, coalition or market through an
//! ordered rule cascade. `unclassified` is an honest outcome when no rule
//! matches.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{is_system, Performative, WorkflowLog};

/// Directed multigraph over actors; one edge per (initiator, receiver,
/// performative) with an aggregated event count. The `system` pseudo-actor
/// and lifecycle events are excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InteractionGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String, Performative), u64>,
}

impl InteractionGraph {
    pub fn total_count(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Distinct (from, to) pairs carrying the given performative, restricted
    /// to a component.
    fn distinct_edges_with<'a>(
        &'a self,
        performative: &str,
        component: &'a BTreeSet<String>,
    ) -> Vec<(&'a str, &'a str)> {
        self.edges
            .keys()
            .filter(|(from, to, p)| {
                p.as_str() == performative && component.contains(from) && component.contains(to)
            })
            .map(|(from, to, _)| (from.as_str(), to.as_str()))
            .collect()
    }

    /// Distinct undirected pairs with at least one edge, within a component.
    fn undirected_pairs(&self, component: &BTreeSet<String>) -> BTreeSet<(String, String)> {
        self.edges
            .keys()
            .filter(|(from, to, _)| component.contains(from) && component.contains(to))
            .map(|(from, to, _)| {
                if from <= to {
                    (from.clone(), to.clone())
                } else {
                    (to.clone(), from.clone())
                }
            })
            .collect()
    }
}

/// Aggregates all non-lifecycle interaction events with a non-system
/// receiver. Aggregation commutes, so the graph is insensitive to event
/// permutations.
pub fn build_interaction_graph(log: &WorkflowLog) -> InteractionGraph {
    let mut graph = InteractionGraph::default();
    for (_, event) in log.events() {
        if event.is_lifecycle() || is_system(&event.receiver) || is_system(&event.initiator) {
            continue;
        }
        graph.nodes.insert(event.initiator.clone());
        graph.nodes.insert(event.receiver.clone());
        *graph
            .edges
            .entry((
                event.initiator.clone(),
                event.receiver.clone(),
                event.performative.clone(),
            ))
            .or_insert(0) += 1;
    }
    graph
}

/// Connected components of the undirected support, ordered by smallest
/// actor id.
pub fn components(graph: &InteractionGraph) -> Vec<BTreeSet<String>> {
    let mut remaining: BTreeSet<&str> = graph.nodes.iter().map(String::as_str).collect();
    let mut neighbors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (from, to, _) in graph.edges.keys() {
        neighbors.entry(from).or_default().insert(to);
        neighbors.entry(to).or_default().insert(from);
    }
    let mut result = Vec::new();
    while let Some(&seed) = remaining.iter().next() {
        let mut component = BTreeSet::new();
        let mut frontier = vec![seed];
        while let Some(node) = frontier.pop() {
            if !component.insert(node.to_string()) {
                continue;
            }
            remaining.remove(node);
            if let Some(ns) = neighbors.get(node) {
                frontier.extend(ns.iter().copied().filter(|n| remaining.contains(*n)));
            }
        }
        result.push(component);
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureThresholds {
    /// Minimum fraction of reciprocated actor pairs for a coalition.
    pub theta_reciprocity: f64,
    /// Maximum cfp-edge share still compatible with a relaxed hierarchy.
    pub theta_delegation_ratio: f64,
    /// Minimum distinct cfp edges for a market.
    pub min_market_cfp_edges: u64,
}

impl Default for StructureThresholds {
    fn default() -> Self {
        StructureThresholds {
            theta_reciprocity: 0.5,
            theta_delegation_ratio: 0.2,
            min_market_cfp_edges: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureLabel {
    StrictHierarchy,
    RelaxedHierarchy,
    Federation,
    Coalition,
    Market,
    Unclassified,
}

impl StructureLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureLabel::StrictHierarchy => "strict_hierarchy",
            StructureLabel::RelaxedHierarchy => "relaxed_hierarchy",
            StructureLabel::Federation => "federation",
            StructureLabel::Coalition => "coalition",
            StructureLabel::Market => "market",
            StructureLabel::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Hierarchy {
        roots: BTreeSet<String>,
        delegation_edges: Vec<(String, String)>,
    },
    Federation {
        representatives: BTreeMap<String, String>,
    },
    Market {
        initiators: BTreeSet<String>,
        bidders: BTreeSet<String>,
    },
    Coalition {
        reciprocity: f64,
    },
    None {},
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleEval {
    pub rule: StructureLabel,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureVerdict {
    pub component: BTreeSet<String>,
    pub label: StructureLabel,
    pub evidence: Evidence,
    pub rule_trace: Vec<RuleEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub distinct_edges: usize,
    pub interaction_events: u64,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub verdicts: Vec<StructureVerdict>,
    pub stats: GraphStats,
}

/// True when the directed edge set is acyclic.
fn acyclic(edges: &[(&str, &str)], component: &BTreeSet<String>) -> bool {
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut indeg: BTreeMap<&str, usize> = component.iter().map(|n| (n.as_str(), 0)).collect();
    for (from, to) in edges {
        out.entry(from).or_default().push(to);
        *indeg.entry(to).or_insert(0) += 1;
    }
    // Kahn's algorithm.
    let mut queue: Vec<&str> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut visited = 0;
    while let Some(node) = queue.pop() {
        visited += 1;
        for &next in out.get(node).into_iter().flatten() {
            let d = indeg.get_mut(next).expect("edge endpoints in component");
            *d -= 1;
            if *d == 0 {
                queue.push(next);
            }
        }
    }
    visited == indeg.len()
}

/// Applies the rule cascade (strict hierarchy, relaxed hierarchy,
/// federation, market, coalition; first match wins). Every rule's boolean
/// outcome is recorded in the trace.
pub fn classify_component(
    graph: &InteractionGraph,
    component: &BTreeSet<String>,
    thresholds: &StructureThresholds,
    unit_map: &BTreeMap<String, String>,
) -> StructureVerdict {
    let delegate_edges = graph.distinct_edges_with("delegate", component);
    let cfp_edges = graph.distinct_edges_with("cfp", component);
    let all_pairs = graph.undirected_pairs(component);
    let distinct_edge_count = graph
        .edges
        .keys()
        .filter(|(f, t, _)| component.contains(f) && component.contains(t))
        .count();

    let mut delegators_of: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (from, to) in &delegate_edges {
        delegators_of.entry(to).or_default().insert(from);
    }
    let delegation_acyclic = acyclic(&delegate_edges, component);
    let max_delegators = delegators_of.values().map(BTreeSet::len).max().unwrap_or(0);
    let cfp_share = if distinct_edge_count == 0 {
        0.0
    } else {
        cfp_edges.len() as f64 / distinct_edge_count as f64
    };

    // Rule 1: strict hierarchy.
    let strict = !delegate_edges.is_empty()
        && delegation_acyclic
        && max_delegators <= 1
        && cfp_edges.is_empty();

    // Rule 2: relaxed hierarchy.
    let relaxed = !delegate_edges.is_empty()
        && delegation_acyclic
        && (max_delegators >= 2 || cfp_share <= thresholds.theta_delegation_ratio);

    // Rule 3: federation. The unit map must partition the component into at
    // least two units, and per unit at most one actor touches cross-unit
    // edges (the representative).
    let mut units: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let all_in_units = component.iter().all(|n| unit_map.contains_key(n));
    if all_in_units {
        for node in component {
            units
                .entry(unit_map[node].as_str())
                .or_default()
                .insert(node.as_str());
        }
    }
    let mut representatives: BTreeMap<String, String> = BTreeMap::new();
    let federation = all_in_units && units.len() >= 2 && {
        let mut ok = true;
        for (unit, members) in &units {
            let cross: BTreeSet<&str> = graph
                .edges
                .keys()
                .filter(|(f, t, _)| component.contains(f) && component.contains(t))
                .filter_map(|(f, t, _)| {
                    let fu = unit_map[f].as_str();
                    let tu = unit_map[t].as_str();
                    if fu != tu {
                        if fu == *unit {
                            Some(f.as_str())
                        } else if tu == *unit {
                            Some(t.as_str())
                        } else {
                            None
                        }
                    } else {
                        None
                    }
                })
                .collect();
            if cross.len() > 1 {
                ok = false;
                break;
            }
            let representative = cross
                .into_iter()
                .next()
                .or_else(|| members.iter().next().copied());
            if let Some(rep) = representative {
                representatives.insert(unit.to_string(), rep.to_string());
            }
        }
        ok
    };

    // Rule 4: market.
    let market =
        delegate_edges.is_empty() && cfp_edges.len() as u64 >= thresholds.min_market_cfp_edges;

    // Rule 5: coalition.
    let reciprocity = if all_pairs.is_empty() {
        0.0
    } else {
        let directed: BTreeSet<(&str, &str)> = graph
            .edges
            .keys()
            .filter(|(f, t, _)| component.contains(f) && component.contains(t))
            .map(|(f, t, _)| (f.as_str(), t.as_str()))
            .collect();
        let reciprocated = all_pairs
            .iter()
            .filter(|(a, b)| {
                directed.contains(&(a.as_str(), b.as_str()))
                    && directed.contains(&(b.as_str(), a.as_str()))
            })
            .count();
        reciprocated as f64 / all_pairs.len() as f64
    };
    let coalition = delegate_edges.is_empty()
        && cfp_edges.is_empty()
        && reciprocity >= thresholds.theta_reciprocity;

    let rule_trace = vec![
        RuleEval { rule: StructureLabel::StrictHierarchy, passed: strict },
        RuleEval { rule: StructureLabel::RelaxedHierarchy, passed: relaxed },
        RuleEval { rule: StructureLabel::Federation, passed: federation },
        RuleEval { rule: StructureLabel::Market, passed: market },
        RuleEval { rule: StructureLabel::Coalition, passed: coalition },
    ];

    let (label, evidence) = if strict || relaxed {
        let roots: BTreeSet<String> = {
            let delegating: BTreeSet<&str> =
                delegate_edges.iter().map(|(f, _)| *f).collect();
            delegating
                .into_iter()
                .filter(|n| !delegators_of.contains_key(n))
                .map(str::to_string)
                .collect()
        };
        (
            if strict {
                StructureLabel::StrictHierarchy
            } else {
                StructureLabel::RelaxedHierarchy
            },
            Evidence::Hierarchy {
                roots,
                delegation_edges: delegate_edges
                    .iter()
                    .map(|(f, t)| (f.to_string(), t.to_string()))
                    .collect(),
            },
        )
    } else if federation {
        (StructureLabel::Federation, Evidence::Federation { representatives })
    } else if market {
        (
            StructureLabel::Market,
            Evidence::Market {
                initiators: cfp_edges.iter().map(|(f, _)| f.to_string()).collect(),
                bidders: cfp_edges.iter().map(|(_, t)| t.to_string()).collect(),
            },
        )
    } else if coalition {
        (StructureLabel::Coalition, Evidence::Coalition { reciprocity })
    } else {
        (StructureLabel::Unclassified, Evidence::None {})
    };

    StructureVerdict {
        component: component.clone(),
        label,
        evidence,
        rule_trace,
    }
}

/// Builds the interaction graph over the whole log and classifies every
/// connected component.
pub fn mine_structures(log: &WorkflowLog, thresholds: &StructureThresholds) -> StructureReport {
    let graph = build_interaction_graph(log);
    let unit_map = log.unit_map();
    let comps = components(&graph);
    let verdicts = comps
        .iter()
        .map(|c| classify_component(&graph, c, thresholds, &unit_map))
        .collect();
    StructureReport {
        stats: GraphStats {
            nodes: graph.nodes.len(),
            distinct_edges: graph.edges.len(),
            interaction_events: graph.total_count(),
            components: comps.len(),
        },
        verdicts,
    }
}

/// Per-process mining: one report per process, classified independently.
pub fn mine_structures_per_process(
    log: &WorkflowLog,
    thresholds: &StructureThresholds,
) -> BTreeMap<String, StructureReport> {
    log.processes
        .iter()
        .map(|p| {
            let sub = WorkflowLog {
                processes: vec![p.clone()],
                actors: log.actors.clone(),
                roles: log.roles.clone(),
                org_units: log.org_units.clone(),
                documents: log.documents.clone(),
            };
            (p.name.clone(), mine_structures(&sub, thresholds))
        })
        .collect()
}

/// DOT rendering of the interaction graph with one cluster per structure
/// component, edges colored by performative class and the component's
/// verdict on the cluster label. Byte-deterministic.
pub fn structure_dot(graph: &InteractionGraph, report: &StructureReport) -> String {
    let mut out = String::from("digraph interaction {\n  rankdir=LR;\n  node [shape=box];\n");
    for (idx, verdict) in report.verdicts.iter().enumerate() {
        out.push_str(&format!(
            "  subgraph cluster_{idx} {{\n    label=\"{}\";\n",
            verdict.label.as_str()
        ));
        for node in &verdict.component {
            out.push_str(&format!("    \"{node}\";\n"));
        }
        out.push_str("  }\n");
    }
    for ((from, to, perf), count) in &graph.edges {
        out.push_str(&format!(
            "  \"{from}\" -> \"{to}\" [label=\"{perf} x{count}\", color={}];\n",
            edge_color(perf.as_str())
        ));
    }
    out.push_str("}\n");
    out
}

/// Performative edge colors shared by the DOT exports.
pub fn edge_color(performative: &str) -> &'static str {
    match performative {
        "delegate" => "red",
        "cfp" | "propose" | "accept-proposal" | "reject-proposal" | "refuse" => "blue",
        "request" | "inform" | "failure" | "cancel" => "black",
        _ => "gray",
    }
}
