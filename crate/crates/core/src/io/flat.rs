//! The flat record format: RFC 4180 CSV with the pinned header
//! `case,performative,activity,initiator,receiver,timestamp,event_stream,role,org_unit,consumed_docs,produced_docs`.
//!
//! Columns after `receiver` may be absent from the header. Multi-valued
//! columns (`role`, `consumed_docs`, `produced_docs`) use `;` separators.
//! All rows belong to the single `default` process; role and org-unit
//! columns annotate the row's initiator, last write wins.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};

use super::IoError;
use crate::model::{
    is_system, EventLine, LifecycleState, Performative, Process, ProcessInstance, WorkflowLog,
    SYSTEM_ACTOR,
};

pub const FLAT_HEADER: [&str; 11] = [
    "case",
    "performative",
    "activity",
    "initiator",
    "receiver",
    "timestamp",
    "event_stream",
    "role",
    "org_unit",
    "consumed_docs",
    "produced_docs",
];

/// Name of the implicit process every flat-format row belongs to.
pub const DEFAULT_PROCESS: &str = "default";

/// A non-fatal observation made while parsing (e.g. conflicting unit
/// assignments resolved last-write-wins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: u64,
    pub message: String,
}

fn split_multi(field: &str) -> BTreeSet<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn normalize_actor_id(raw: &str) -> String {
    let raw = raw.trim();
    if is_system(raw) {
        SYSTEM_ACTOR.to_string()
    } else {
        raw.to_string()
    }
}

/// Parses flat-format text into a validated log, discarding warnings.
pub fn parse_flat(text: &str) -> Result<WorkflowLog, IoError> {
    parse_flat_detailed(text).map(|(log, _)| log)
}

/// Parses flat-format text, returning the log together with warnings.
pub fn parse_flat_detailed(text: &str) -> Result<(WorkflowLog, Vec<ParseWarning>), IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| IoError::Syntax {
            line: 1,
            message: e.to_string(),
        })?
        .clone();

    // Header: the first five columns are mandatory and positional; any
    // further column must be one of the optional names, each at most once.
    let mut col_of = std::collections::BTreeMap::new();
    for (idx, name) in headers.iter().enumerate() {
        let name = name.trim();
        if !FLAT_HEADER.contains(&name) {
            return Err(IoError::UnknownColumn(name.to_string()));
        }
        if col_of.insert(name.to_string(), idx).is_some() {
            return Err(IoError::DuplicateColumn(name.to_string()));
        }
    }
    for required in &FLAT_HEADER[..5] {
        if !col_of.contains_key(*required) {
            return Err(IoError::MissingColumn(required.to_string()));
        }
    }

    let field = |record: &csv::StringRecord, name: &str| -> Option<String> {
        col_of
            .get(name)
            .and_then(|&i| record.get(i))
            .map(str::to_string)
    };

    let mut log = WorkflowLog::new();
    let mut warnings = Vec::new();
    let mut instances: Vec<ProcessInstance> = Vec::new();
    let mut case_index: std::collections::BTreeMap<String, usize> = Default::default();

    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx as u64 + 2; // 1-based, after the header
        let record = record.map_err(|e| IoError::Syntax {
            line,
            message: e.to_string(),
        })?;

        let case_id = field(&record, "case").unwrap_or_default().trim().to_string();
        if case_id.is_empty() {
            return Err(IoError::Syntax {
                line,
                message: "empty case id".to_string(),
            });
        }
        let initiator = normalize_actor_id(&field(&record, "initiator").unwrap_or_default());
        let receiver = normalize_actor_id(&field(&record, "receiver").unwrap_or_default());

        let timestamp: Option<DateTime<Utc>> = match field(&record, "timestamp") {
            Some(s) if !s.trim().is_empty() => Some(
                DateTime::parse_from_rfc3339(s.trim())
                    .map_err(|_| IoError::Timestamp {
                        line,
                        value: s.trim().to_string(),
                    })?
                    .with_timezone(&Utc),
            ),
            _ => None,
        };
        let event_stream = match field(&record, "event_stream") {
            Some(s) if !s.trim().is_empty() => Some(
                LifecycleState::parse(&s).ok_or_else(|| IoError::Lifecycle {
                    line,
                    value: s.trim().to_string(),
                })?,
            ),
            _ => None,
        };

        let idx = *case_index.entry(case_id.clone()).or_insert_with(|| {
            instances.push(ProcessInstance {
                case_id: case_id.clone(),
                events: Vec::new(),
            });
            instances.len() - 1
        });
        let seq = instances[idx].events.len() as u64;

        let mut event = EventLine::new(
            case_id,
            seq,
            Performative::new(&field(&record, "performative").unwrap_or_default()),
            field(&record, "activity").unwrap_or_default().trim().to_string(),
            initiator.clone(),
            receiver.clone(),
        );
        event.timestamp = timestamp;
        event.event_stream = event_stream;
        event.consumed_docs = split_multi(&field(&record, "consumed_docs").unwrap_or_default());
        event.produced_docs = split_multi(&field(&record, "produced_docs").unwrap_or_default());

        let roles = split_multi(&field(&record, "role").unwrap_or_default());
        let unit = field(&record, "org_unit")
            .map(|u| u.trim().to_string())
            .filter(|u| !u.is_empty());
        if let Some(conflict) = log.register_actor(&initiator, &roles, unit.as_deref()) {
            warnings.push(ParseWarning { line, message: conflict });
        }
        log.register_actor(&receiver, &BTreeSet::new(), None);
        log.documents.extend(event.consumed_docs.iter().cloned());
        log.documents.extend(event.produced_docs.iter().cloned());
        instances[idx].events.push(event);
    }

    if !instances.is_empty() {
        log.processes.push(Process {
            name: DEFAULT_PROCESS.to_string(),
            instances,
        });
    }
    log.normalize();
    // Re-densify seq after the (timestamp, seq) sort so mixed-order files
    // still yield a valid log.
    for p in &mut log.processes {
        for i in &mut p.instances {
            for (n, e) in i.events.iter_mut().enumerate() {
                e.seq = n as u64;
            }
        }
    }
    Ok((log, warnings))
}

fn join_multi(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(";")
}

/// Serializes a log in the flat format: full pinned header, rows sorted by
/// (process, case, seq), byte-deterministic. Process names and actor
/// display names are not representable in this format; use the tree format
/// when they must survive a round-trip.
pub fn serialize_flat(log: &WorkflowLog) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(FLAT_HEADER).expect("csv header");

    let mut processes: Vec<&Process> = log.processes.iter().collect();
    processes.sort_by(|a, b| a.name.cmp(&b.name));
    for process in processes {
        let mut instances: Vec<&ProcessInstance> = process.instances.iter().collect();
        instances.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        for instance in instances {
            for event in &instance.events {
                let actor = log.actors.get(&event.initiator);
                let roles = actor.map(|a| join_multi(&a.roles)).unwrap_or_default();
                let unit = actor
                    .and_then(|a| a.org_unit.clone())
                    .unwrap_or_default();
                writer
                    .write_record([
                        event.case_id.as_str(),
                        event.performative.as_str(),
                        event.activity.as_str(),
                        event.initiator.as_str(),
                        event.receiver.as_str(),
                        &event
                            .timestamp
                            .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
                            .unwrap_or_default(),
                        event.event_stream.map(|s| s.as_str()).unwrap_or(""),
                        &roles,
                        &unit,
                        &join_multi(&event.consumed_docs),
                        &join_multi(&event.produced_docs),
                    ])
                    .expect("csv row");
            }
        }
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CRISIS: &str = include_str!("../../tests/fixtures/crisis.csv");

    #[test]
    fn parses_crisis_fixture() {
        let log = parse_flat(CRISIS).unwrap();
        assert_eq!(log.processes.len(), 1);
        assert_eq!(log.processes[0].name, "default");
        assert_eq!(log.case_count(), 1);
        assert_eq!(log.event_count(), 10);
        let actors: Vec<&str> = log.actors.keys().map(String::as_str).collect();
        assert_eq!(actors, ["Amal", "Mahdi", "Malik", "Salim", "Sami"]);
        assert!(crate::model::validate_log(&log).is_clean());
        let first = &log.processes[0].instances[0].events[0];
        assert_eq!(first.performative.as_str(), "execute");
        assert_eq!(first.receiver, "system");
    }

    #[test]
    fn header_only_gives_empty_log() {
        let log = parse_flat("case,performative,activity,initiator,receiver\n").unwrap();
        assert_eq!(log.event_count(), 0);
        assert!(log.processes.is_empty());
    }

    #[test]
    fn multi_valued_docs_split_on_semicolon() {
        let text = "case,performative,activity,initiator,receiver,timestamp,event_stream,role,org_unit,consumed_docs,produced_docs\n\
                    C1,inform,act,a,b,,,,,a;b,\n";
        let log = parse_flat(text).unwrap();
        let e = &log.processes[0].instances[0].events[0];
        let docs: Vec<&str> = e.consumed_docs.iter().map(String::as_str).collect();
        assert_eq!(docs, ["a", "b"]);
    }

    #[test]
    fn unknown_column_is_rejected() {
        let err = parse_flat("case,performative,activity,initiator,receiver,payload\n").unwrap_err();
        assert!(matches!(err, IoError::UnknownColumn(c) if c == "payload"));
    }

    #[test]
    fn missing_required_column_is_rejected() {
        let err = parse_flat("case,performative,activity,initiator\n").unwrap_err();
        assert!(matches!(err, IoError::MissingColumn(c) if c == "receiver"));
    }

    #[test]
    fn bad_timestamp_is_located() {
        let text = "case,performative,activity,initiator,receiver,timestamp\nC1,inform,act,a,b,yesterday\n";
        let err = parse_flat(text).unwrap_err();
        assert!(matches!(err, IoError::Timestamp { line: 2, .. }));
    }

    #[test]
    fn serialize_emits_header_plus_rows() {
        let log = parse_flat(CRISIS).unwrap();
        let out = serialize_flat(&log);
        assert_eq!(out.lines().count(), 11);
        assert!(out.starts_with("case,performative,activity,initiator,receiver,timestamp,event_stream,role,org_unit,consumed_docs,produced_docs\n"));
    }

    #[test]
    fn round_trip_is_structural_identity() {
        let log = parse_flat(CRISIS).unwrap();
        let again = parse_flat(&serialize_flat(&log)).unwrap();
        assert_eq!(log, again);
    }

    #[test]
    fn serialize_is_a_fixpoint() {
        let once = serialize_flat(&parse_flat(CRISIS).unwrap());
        let twice = serialize_flat(&parse_flat(&once).unwrap());
        assert_eq!(once, twice);
    }
}
