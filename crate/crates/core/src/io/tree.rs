//! The hierarchical tree format: one JSON document per log, processes →
//! instances → events, with field names taken from the meta-model
//! attributes (Per_Name, Act_Name, TimeStamp, EventStream, Actor_ID,
//! Role_Name, Org_Unit_Name, Doc_Name) plus top-level registries.
//!
//! Unknown fields are rejected; the published schema lives at
//! `schema/tree-format.schema.json`. Unlike the flat format this one is
//! lossless: process names, actor display names and the full registries
//! all survive the round-trip.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::{
    is_system, Actor, EventLine, LifecycleState, Performative, Process, ProcessInstance,
    WorkflowLog, SYSTEM_ACTOR,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeLog {
    #[serde(rename = "Processes")]
    processes: Vec<TreeProcess>,
    #[serde(rename = "Actors", default)]
    actors: Vec<TreeActor>,
    #[serde(rename = "Roles", default)]
    roles: Vec<String>,
    #[serde(rename = "Org_Units", default)]
    org_units: Vec<String>,
    #[serde(rename = "Documents", default)]
    documents: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeProcess {
    #[serde(rename = "Process_Name")]
    name: String,
    #[serde(rename = "Instances")]
    instances: Vec<TreeInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeInstance {
    #[serde(rename = "Case_ID")]
    case_id: String,
    #[serde(rename = "Events")]
    events: Vec<TreeEvent>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeEvent {
    #[serde(rename = "Per_Name")]
    performative: String,
    #[serde(rename = "Act_Name")]
    activity: String,
    #[serde(rename = "Has_Initiator_Actor")]
    initiator: String,
    #[serde(rename = "Has_Receiver_Actor")]
    receiver: String,
    #[serde(rename = "TimeStamp", default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<DateTime<Utc>>,
    #[serde(rename = "EventStream", default, skip_serializing_if = "Option::is_none")]
    event_stream: Option<String>,
    #[serde(rename = "Has_Consumed_Doc", default, skip_serializing_if = "Vec::is_empty")]
    consumed: Vec<String>,
    #[serde(rename = "Has_Produced_Doc", default, skip_serializing_if = "Vec::is_empty")]
    produced: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeActor {
    #[serde(rename = "Actor_ID")]
    id: String,
    #[serde(rename = "Actor_Name")]
    name: String,
    #[serde(rename = "Role_Name", default)]
    roles: Vec<String>,
    #[serde(rename = "Org_Unit_Name", default, skip_serializing_if = "Option::is_none")]
    org_unit: Option<String>,
}

/// Parses a tree-format document. Documents that do not validate against
/// the schema (unknown fields, wrong shapes, bad enum values) are rejected
/// with the path to the offending node.
pub fn parse_tree(text: &str) -> Result<WorkflowLog, IoError> {
    let doc: TreeLog = serde_json::from_str(text).map_err(|e| IoError::Schema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;

    let mut log = WorkflowLog::new();
    for actor in doc.actors {
        if is_system(&actor.id) {
            return Err(IoError::Schema {
                path: "Actors".to_string(),
                message: "the reserved pseudo-actor `system` must not be registered".to_string(),
            });
        }
        log.roles.extend(actor.roles.iter().cloned());
        if let Some(unit) = &actor.org_unit {
            log.org_units.insert(unit.clone());
        }
        log.actors.insert(
            actor.id.clone(),
            Actor {
                id: actor.id,
                name: actor.name,
                roles: actor.roles.into_iter().collect(),
                org_unit: actor.org_unit,
            },
        );
    }
    log.roles.extend(doc.roles);
    log.org_units.extend(doc.org_units);
    log.documents.extend(doc.documents);

    for tp in doc.processes {
        let mut process = Process {
            name: tp.name,
            instances: Vec::new(),
        };
        for ti in tp.instances {
            let mut instance = ProcessInstance {
                case_id: ti.case_id.clone(),
                events: Vec::new(),
            };
            for (seq, te) in ti.events.into_iter().enumerate() {
                let event_stream = match &te.event_stream {
                    Some(s) => Some(LifecycleState::parse(s).ok_or_else(|| IoError::Schema {
                        path: format!(
                            "Processes/{}/Instances/{}/Events[{seq}]/EventStream",
                            process.name, ti.case_id
                        ),
                        message: format!("unknown lifecycle state `{s}`"),
                    })?),
                    None => None,
                };
                let initiator = if is_system(&te.initiator) {
                    SYSTEM_ACTOR.to_string()
                } else {
                    te.initiator
                };
                let receiver = if is_system(&te.receiver) {
                    SYSTEM_ACTOR.to_string()
                } else {
                    te.receiver
                };
                let mut event = EventLine::new(
                    ti.case_id.clone(),
                    seq as u64,
                    Performative::new(&te.performative),
                    te.activity,
                    initiator.clone(),
                    receiver.clone(),
                );
                event.timestamp = te.timestamp;
                event.event_stream = event_stream;
                event.consumed_docs = te.consumed.into_iter().collect();
                event.produced_docs = te.produced.into_iter().collect();
                log.register_actor(&initiator, &BTreeSet::new(), None);
                log.register_actor(&receiver, &BTreeSet::new(), None);
                log.documents.extend(event.consumed_docs.iter().cloned());
                log.documents.extend(event.produced_docs.iter().cloned());
                instance.events.push(event);
            }
            process.instances.push(instance);
        }
        log.processes.push(process);
    }
    log.normalize();
    for p in &mut log.processes {
        for i in &mut p.instances {
            for (n, e) in i.events.iter_mut().enumerate() {
                e.seq = n as u64;
            }
        }
    }
    Ok(log)
}

/// Serializes a log as a tree-format document. Byte-deterministic.
pub fn serialize_tree(log: &WorkflowLog) -> String {
    let doc = TreeLog {
        processes: log
            .processes
            .iter()
            .map(|p| TreeProcess {
                name: p.name.clone(),
                instances: p
                    .instances
                    .iter()
                    .map(|i| TreeInstance {
                        case_id: i.case_id.clone(),
                        events: i
                            .events
                            .iter()
                            .map(|e| TreeEvent {
                                performative: e.performative.as_str().to_string(),
                                activity: e.activity.clone(),
                                initiator: e.initiator.clone(),
                                receiver: e.receiver.clone(),
                                timestamp: e.timestamp,
                                event_stream: e.event_stream.map(|s| s.as_str().to_string()),
                                consumed: e.consumed_docs.iter().cloned().collect(),
                                produced: e.produced_docs.iter().cloned().collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
        actors: log
            .actors
            .values()
            .map(|a| TreeActor {
                id: a.id.clone(),
                name: a.name.clone(),
                roles: a.roles.iter().cloned().collect(),
                org_unit: a.org_unit.clone(),
            })
            .collect(),
        roles: log.roles.iter().cloned().collect(),
        org_units: log.org_units.iter().cloned().collect(),
        documents: log.documents.iter().cloned().collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("tree serialization");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::flat::parse_flat;

    const CRISIS: &str = include_str!("../../tests/fixtures/crisis.csv");

    #[test]
    fn tree_round_trip_preserves_the_log() {
        let log = parse_flat(CRISIS).unwrap();
        let text = serialize_tree(&log);
        assert_eq!(parse_tree(&text).unwrap(), log);
    }

    #[test]
    fn empty_log_round_trips() {
        let log = WorkflowLog::new();
        assert_eq!(parse_tree(&serialize_tree(&log)).unwrap(), log);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"Processes": [], "Payload": 1}"#;
        let err = parse_tree(text).unwrap_err();
        assert!(matches!(err, IoError::Schema { .. }));
        assert!(err.to_string().contains("Payload"));
    }

    #[test]
    fn bad_lifecycle_state_is_rejected_with_path() {
        let text = r#"{
            "Processes": [{"Process_Name": "p", "Instances": [{"Case_ID": "c1", "Events": [
                {"Per_Name": "execute", "Act_Name": "a", "Has_Initiator_Actor": "x",
                 "Has_Receiver_Actor": "system", "EventStream": "running"}
            ]}]}]
        }"#;
        let err = parse_tree(text).unwrap_err();
        assert!(err.to_string().contains("EventStream"));
    }

    #[test]
    fn cross_format_round_trip_reproduces_flat_bytes() {
        let flat1 = crate::io::flat::serialize_flat(&parse_flat(CRISIS).unwrap());
        let tree = serialize_tree(&parse_flat(&flat1).unwrap());
        let flat2 = crate::io::flat::serialize_flat(&parse_tree(&tree).unwrap());
        assert_eq!(flat1, flat2);
    }
}
