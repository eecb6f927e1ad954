//! Informational and performance reporting: document flow per activity,
//! activity occurrence timing (waiting/processing/flow), per-actor outcome
//! counts, a protocol-by-terminal-state contingency table, and the
//! agent/group/role DOT export.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::model::{is_system, LifecycleState, WorkflowLog};
use crate::orgstruct::{build_interaction_graph, edge_color, StructureReport};
use crate::protocol::ProtocolReport;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ActivityDocs {
    pub consumed: BTreeSet<String>,
    pub produced: BTreeSet<String>,
    pub occurrences: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DocumentUsage {
    pub producers: BTreeSet<String>,
    pub consumers: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DocumentFlowReport {
    pub per_activity: BTreeMap<String, ActivityDocs>,
    pub per_document: BTreeMap<String, DocumentUsage>,
}

/// Exact set unions of consumed/produced documents per activity and the
/// inverse view per document. Permutation-invariant over events.
pub fn mine_documents(log: &WorkflowLog) -> DocumentFlowReport {
    let mut report = DocumentFlowReport::default();
    for (_, event) in log.events() {
        if event.consumed_docs.is_empty() && event.produced_docs.is_empty() {
            continue;
        }
        let entry = report.per_activity.entry(event.activity.clone()).or_default();
        entry.occurrences += 1;
        entry.consumed.extend(event.consumed_docs.iter().cloned());
        entry.produced.extend(event.produced_docs.iter().cloned());
        for doc in &event.consumed_docs {
            report
                .per_document
                .entry(doc.clone())
                .or_default()
                .consumers
                .insert(event.activity.clone());
        }
        for doc in &event.produced_docs {
            report
                .per_document
                .entry(doc.clone())
                .or_default()
                .producers
                .insert(event.activity.clone());
        }
    }
    report
}

/// One activity execution: the lifecycle events of (case, activity,
/// executor) and the times derived from them. Times are in whole seconds
/// and absent when the required lifecycle events or timestamps are missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Occurrence {
    pub process: String,
    pub case_id: String,
    pub activity: String,
    pub executor: String,
    pub states: Vec<LifecycleState>,
    pub terminal: Option<LifecycleState>,
    /// scheduled -> started.
    pub waiting_secs: Option<i64>,
    /// Sum of (started|resumed -> suspended|terminal) intervals.
    pub processing_secs: Option<i64>,
    /// scheduled -> terminal.
    pub flow_secs: Option<i64>,
    pub flags: Vec<String>,
}

/// Groups lifecycle events by (case, activity, executor) and derives the
/// timing of each occurrence. Malformed sequences are flagged, not dropped.
pub fn extract_occurrences(log: &WorkflowLog) -> Vec<Occurrence> {
    let mut occurrences = Vec::new();
    for process in &log.processes {
        for instance in &process.instances {
            let mut by_key: Vec<((String, String), Vec<(Option<DateTime<Utc>>, LifecycleState)>)> =
                Vec::new();
            for event in instance.events.iter().filter(|e| e.is_lifecycle()) {
                let key = (event.activity.clone(), event.initiator.clone());
                let state = event.event_stream.expect("lifecycle event");
                match by_key.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, seq)) => seq.push((event.timestamp, state)),
                    None => by_key.push((key, vec![(event.timestamp, state)])),
                }
            }
            for ((activity, executor), transitions) in by_key {
                occurrences.push(build_occurrence(
                    &process.name,
                    &instance.case_id,
                    activity,
                    executor,
                    &transitions,
                ));
            }
        }
    }
    occurrences
}

fn build_occurrence(
    process: &str,
    case_id: &str,
    activity: String,
    executor: String,
    transitions: &[(Option<DateTime<Utc>>, LifecycleState)],
) -> Occurrence {
    let states: Vec<LifecycleState> = transitions.iter().map(|(_, s)| *s).collect();
    let mut flags = Vec::new();

    let scheduled = transitions
        .iter()
        .find(|(_, s)| *s == LifecycleState::Scheduled);
    let started = transitions
        .iter()
        .find(|(_, s)| *s == LifecycleState::Started);
    let terminal = transitions
        .iter()
        .rev()
        .find(|(_, s)| s.is_terminal());

    // Well-formed: scheduled before started before terminal, with optional
    // suspended/resumed pairs in between.
    let started_pos = states.iter().position(|s| *s == LifecycleState::Started);
    let scheduled_pos = states.iter().position(|s| *s == LifecycleState::Scheduled);
    let terminal_pos = states.iter().position(|s| s.is_terminal());
    let ordered = matches!((scheduled_pos, started_pos, terminal_pos),
        (Some(sc), Some(st), Some(tm)) if sc < st && st < tm);
    if !ordered {
        flags.push("incomplete-lifecycle".to_string());
    }

    let timestamps_complete = transitions.iter().all(|(t, _)| t.is_some());
    let (waiting, processing, flow) = if ordered && timestamps_complete {
        let at = |pair: &(Option<DateTime<Utc>>, LifecycleState)| pair.0.expect("checked");
        let scheduled_at = at(scheduled.expect("ordered"));
        let started_at = at(started.expect("ordered"));
        let terminal_at = at(terminal.expect("ordered"));
        // Active intervals: started|resumed up to the next suspended|terminal.
        let mut processing = 0i64;
        let mut active_since: Option<DateTime<Utc>> = None;
        let mut well_paired = true;
        for (ts, state) in transitions {
            match state {
                LifecycleState::Started | LifecycleState::Resumed => {
                    if active_since.is_some() {
                        well_paired = false;
                    }
                    active_since = Some(ts.expect("checked"));
                }
                LifecycleState::Suspended | LifecycleState::Completed | LifecycleState::Aborted => {
                    match active_since.take() {
                        Some(since) => {
                            processing += (ts.expect("checked") - since).num_seconds();
                        }
                        None => well_paired = false,
                    }
                }
                LifecycleState::Scheduled => {}
            }
        }
        if !well_paired {
            flags.push("unpaired-suspension".to_string());
        }
        (
            Some((started_at - scheduled_at).num_seconds()),
            well_paired.then_some(processing),
            Some((terminal_at - scheduled_at).num_seconds()),
        )
    } else {
        (None, None, None)
    };

    Occurrence {
        process: process.to_string(),
        case_id: case_id.to_string(),
        activity,
        executor,
        states,
        terminal: terminal.map(|(_, s)| *s),
        waiting_secs: waiting,
        processing_secs: processing,
        flow_secs: flow,
        flags,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ActivityStats {
    pub occurrences: u64,
    pub timed_occurrences: u64,
    pub mean_processing_secs: Option<f64>,
    pub min_processing_secs: Option<i64>,
    pub max_processing_secs: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ActorStats {
    pub completed: u64,
    pub suspended: u64,
    pub aborted: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PerfReport {
    pub per_activity: BTreeMap<String, ActivityStats>,
    pub per_actor: BTreeMap<String, ActorStats>,
    /// template name -> terminal lifecycle state -> occurrence count, for
    /// occurrences whose (case, activity) conversation matched a template.
    pub contingency: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Aggregates occurrence statistics and correlates protocol templates with
/// activity outcomes. The protocol report must come from the same log.
pub fn perf_report(log: &WorkflowLog, protocols: &ProtocolReport) -> PerfReport {
    let occurrences = extract_occurrences(log);
    let mut report = PerfReport::default();

    let mut matched: BTreeMap<(String, String, String), &str> = BTreeMap::new();
    for instance in &protocols.instances {
        matched.insert(
            (
                instance.process.clone(),
                instance.case_id.clone(),
                instance.activity.clone(),
            ),
            instance.template.as_str(),
        );
    }

    for occ in &occurrences {
        let activity = report.per_activity.entry(occ.activity.clone()).or_default();
        activity.occurrences += 1;
        if let Some(p) = occ.processing_secs {
            activity.timed_occurrences += 1;
            activity.min_processing_secs =
                Some(activity.min_processing_secs.map_or(p, |m| m.min(p)));
            activity.max_processing_secs =
                Some(activity.max_processing_secs.map_or(p, |m| m.max(p)));
        }

        let actor = report.per_actor.entry(occ.executor.clone()).or_default();
        if occ.states.contains(&LifecycleState::Suspended) {
            actor.suspended += 1;
        }
        match occ.terminal {
            Some(LifecycleState::Completed) => actor.completed += 1,
            Some(LifecycleState::Aborted) => actor.aborted += 1,
            _ => {}
        }

        if let Some(template) = matched.get(&(
            occ.process.clone(),
            occ.case_id.clone(),
            occ.activity.clone(),
        )) {
            if let Some(terminal) = occ.terminal {
                *report
                    .contingency
                    .entry(template.to_string())
                    .or_default()
                    .entry(terminal.as_str().to_string())
                    .or_insert(0) += 1;
            }
        }
    }

    // Means from the sums, computed once per activity.
    let mut sums: BTreeMap<&str, (i64, u64)> = BTreeMap::new();
    for occ in &occurrences {
        if let Some(p) = occ.processing_secs {
            let entry = sums.entry(occ.activity.as_str()).or_insert((0, 0));
            entry.0 += p;
            entry.1 += 1;
        }
    }
    for (activity, stats) in &mut report.per_activity {
        if let Some((sum, count)) = sums.get(activity.as_str()) {
            if *count > 0 {
                stats.mean_processing_secs = Some(*sum as f64 / *count as f64);
            }
        }
    }
    report
}

/// Agent/Group/Role DOT export: one cluster per org unit, one node per
/// actor labeled with its roles, interaction edges colored by performative
/// class, and the structure verdict annotated on each component. Output is
/// byte-deterministic.
pub fn export_agr_dot(log: &WorkflowLog, structures: &StructureReport) -> String {
    let graph = build_interaction_graph(log);
    let mut out = String::from("digraph agr {\n  rankdir=LR;\n  node [shape=ellipse];\n");

    let mut verdict_lines: Vec<String> = Vec::new();
    for verdict in &structures.verdicts {
        let members: Vec<&str> = verdict.component.iter().map(String::as_str).collect();
        verdict_lines.push(format!(
            "  // component {{{}}}: {}\n",
            members.join(", "),
            verdict.label.as_str()
        ));
    }
    for line in verdict_lines {
        out.push_str(&line);
    }

    let node_label = |id: &str| -> String {
        match log.actors.get(id) {
            Some(actor) if !actor.roles.is_empty() => {
                let roles: Vec<&str> = actor.roles.iter().map(String::as_str).collect();
                format!("{}\\n[{}]", actor.name, roles.join(", "))
            }
            Some(actor) => actor.name.clone(),
            None => id.to_string(),
        }
    };

    // Group agents by org unit; unitless actors render at the top level.
    let mut by_unit: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut unitless: Vec<&str> = Vec::new();
    for id in log.actors.keys().filter(|id| !is_system(id)) {
        match log.actors[id.as_str()].org_unit.as_deref() {
            Some(unit) => by_unit.entry(unit).or_default().push(id),
            None => unitless.push(id),
        }
    }
    for (idx, (unit, members)) in by_unit.iter().enumerate() {
        out.push_str(&format!(
            "  subgraph cluster_unit_{idx} {{\n    label=\"{unit}\";\n"
        ));
        for member in members {
            out.push_str(&format!(
                "    \"{member}\" [label=\"{}\"];\n",
                node_label(member)
            ));
        }
        out.push_str("  }\n");
    }
    for actor in unitless {
        out.push_str(&format!(
            "  \"{actor}\" [label=\"{}\"];\n",
            node_label(actor)
        ));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::flat::parse_flat;
    use crate::orgstruct::{mine_structures, StructureThresholds};
    use crate::protocol::{builtin_templates, mine_protocols};

    const CRISIS: &str = include_str!("../tests/fixtures/crisis.csv");

    fn lifecycle_fixture(rows: &[(&str, &str, &str)]) -> WorkflowLog {
        // rows: (timestamp offset minutes, state, activity)
        let mut text = String::from("case,performative,activity,initiator,receiver,timestamp,event_stream\n");
        for (offset, state, activity) in rows {
            text.push_str(&format!(
                "c1,execute,{activity},worker,system,2026-01-01T08:{offset}:00Z,{state}\n"
            ));
        }
        parse_flat(&text).unwrap()
    }

    #[test]
    fn document_flow_unions_are_exact() {
        let text = "case,performative,activity,initiator,receiver,timestamp,event_stream,role,org_unit,consumed_docs,produced_docs\n\
                    c1,inform,activity-a,x,y,,,,,d1,d2\n";
        let report = mine_documents(&parse_flat(text).unwrap());
        let a = &report.per_activity["activity-a"];
        assert_eq!(a.consumed.iter().map(String::as_str).collect::<Vec<_>>(), ["d1"]);
        assert_eq!(a.produced.iter().map(String::as_str).collect::<Vec<_>>(), ["d2"]);
        assert_eq!(
            report.per_document["d2"].producers.iter().map(String::as_str).collect::<Vec<_>>(),
            ["activity-a"]
        );
    }

    #[test]
    fn crisis_fixture_has_no_documents() {
        let report = mine_documents(&parse_flat(CRISIS).unwrap());
        assert!(report.per_activity.is_empty());
        assert!(report.per_document.is_empty());
    }

    #[test]
    fn waiting_processing_flow_arithmetic() {
        let log = lifecycle_fixture(&[
            ("00", "scheduled", "act"),
            ("05", "started", "act"),
            ("15", "completed", "act"),
        ]);
        let occs = extract_occurrences(&log);
        assert_eq!(occs.len(), 1);
        assert_eq!(occs[0].waiting_secs, Some(300));
        assert_eq!(occs[0].processing_secs, Some(600));
        assert_eq!(occs[0].flow_secs, Some(900));
        assert!(occs[0].flags.is_empty());
    }

    #[test]
    fn suspension_gaps_are_excluded_from_processing() {
        let log = lifecycle_fixture(&[
            ("00", "scheduled", "act"),
            ("02", "started", "act"),
            ("08", "suspended", "act"),
            ("12", "resumed", "act"),
            ("16", "completed", "act"),
        ]);
        let occs = extract_occurrences(&log);
        // 2->8 is 6 min, 12->16 is 4 min: 10 minutes of processing.
        assert_eq!(occs[0].processing_secs, Some(600));
        assert_eq!(occs[0].flow_secs, Some(960));
    }

    #[test]
    fn lone_completed_is_flagged_with_undefined_times() {
        let log = lifecycle_fixture(&[("00", "completed", "act")]);
        let occs = extract_occurrences(&log);
        assert_eq!(occs[0].processing_secs, None);
        assert!(occs[0].flags.contains(&"incomplete-lifecycle".to_string()));
    }

    #[test]
    fn mean_processing_over_two_occurrences() {
        let mut text = String::from("case,performative,activity,initiator,receiver,timestamp,event_stream\n");
        for (case, start, end) in [("c1", "05", "15"), ("c2", "10", "30")] {
            text.push_str(&format!("{case},execute,act,w,system,2026-01-01T08:00:00Z,scheduled\n"));
            text.push_str(&format!("{case},execute,act,w,system,2026-01-01T08:{start}:00Z,started\n"));
            text.push_str(&format!("{case},execute,act,w,system,2026-01-01T08:{end}:00Z,completed\n"));
        }
        let log = parse_flat(&text).unwrap();
        let report = perf_report(&log, &ProtocolReport::default());
        let stats = &report.per_activity["act"];
        assert_eq!(stats.occurrences, 2);
        assert_eq!(stats.mean_processing_secs, Some(900.0)); // (10m + 20m) / 2
        assert_eq!(stats.min_processing_secs, Some(600));
        assert_eq!(stats.max_processing_secs, Some(1200));
        assert_eq!(report.per_actor["w"].completed, 2);
    }

    #[test]
    fn timestamp_free_logs_report_counts_only() {
        let text = "case,performative,activity,initiator,receiver,timestamp,event_stream\n\
                    c1,execute,act,w,system,,scheduled\n\
                    c1,execute,act,w,system,,started\n\
                    c1,execute,act,w,system,,completed\n";
        let log = parse_flat(text).unwrap();
        let report = perf_report(&log, &ProtocolReport::default());
        let stats = &report.per_activity["act"];
        assert_eq!(stats.occurrences, 1);
        assert_eq!(stats.mean_processing_secs, None);
        assert_eq!(report.per_actor["w"].completed, 1);
    }

    #[test]
    fn agr_export_counts_clusters_nodes_and_edges() {
        let mut log = parse_flat(CRISIS).unwrap();
        for id in ["Mahdi", "Salim"] {
            log.actors.get_mut(id).unwrap().org_unit = Some("Crisis".into());
        }
        for id in ["Malik", "Sami", "Amal"] {
            log.actors.get_mut(id).unwrap().org_unit = Some("Lab".into());
        }
        log.org_units.extend(["Crisis".to_string(), "Lab".to_string()]);
        let structures = mine_structures(&log, &StructureThresholds::default());
        let dot = export_agr_dot(&log, &structures);
        assert_eq!(dot.matches("subgraph cluster_unit_").count(), 2);
        assert_eq!(dot.matches(" -> ").count(), 8);
        assert_eq!(dot.matches("[label=\"").count(), 5 + 8); // 5 nodes + 8 edges
        assert_eq!(dot.matches('{').count(), dot.matches('}').count());
    }

    #[test]
    fn empty_log_gives_empty_digraph() {
        let structures = mine_structures(&WorkflowLog::new(), &StructureThresholds::default());
        let dot = export_agr_dot(&WorkflowLog::new(), &structures);
        assert!(dot.starts_with("digraph agr {"));
        assert!(!dot.contains("->"));
    }

    #[test]
    fn contingency_counts_match_matched_occurrences() {
        let log = parse_flat(CRISIS).unwrap();
        let protocols = mine_protocols(&log, &builtin_templates());
        let report = perf_report(&log, &protocols);
        // The crisis fixture carries no lifecycle events at all.
        assert!(report.contingency.is_empty());
    }
}
