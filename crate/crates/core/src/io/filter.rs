//! Log filtering: completed-activities-only, logistics-activity removal,
//! case whitelisting and performative selection. Filtering is idempotent
//! and never increases the event count.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{LifecycleState, Performative, WorkflowLog};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    /// Keep only activity occurrences whose lifecycle reaches `completed`.
    pub completed_only: bool,
    /// Activity names dropped outright (the optional "logistics" activities).
    pub logistics_activities: BTreeSet<String>,
    /// When present, keep only these cases.
    pub case_whitelist: Option<BTreeSet<String>>,
    /// When present, keep only events with these performatives.
    pub keep_performatives: Option<BTreeSet<Performative>>,
}

/// Applies the spec to the log. Occurrences are keyed by
/// (case, activity, executor); `completed_only` drops the lifecycle events
/// of occurrences that never reach `completed`. Registries are pruned to
/// what remains and `seq` is re-densified in the original relative order.
pub fn filter_log(log: &WorkflowLog, spec: &FilterSpec) -> WorkflowLog {
    let mut out = log.clone();

    for process in &mut out.processes {
        if let Some(whitelist) = &spec.case_whitelist {
            process.instances.retain(|i| whitelist.contains(&i.case_id));
        }
        for instance in &mut process.instances {
            // Occurrences (activity, executor) of this case that complete.
            let mut completes: BTreeMap<(String, String), bool> = BTreeMap::new();
            for e in &instance.events {
                if let Some(state) = e.event_stream {
                    let entry = completes
                        .entry((e.activity.clone(), e.initiator.clone()))
                        .or_insert(false);
                    *entry |= state == LifecycleState::Completed;
                }
            }
            instance.events.retain(|e| {
                if spec.logistics_activities.contains(&e.activity) {
                    return false;
                }
                if let Some(keep) = &spec.keep_performatives {
                    if !keep.contains(&e.performative) {
                        return false;
                    }
                }
                if spec.completed_only && e.event_stream.is_some() {
                    return *completes
                        .get(&(e.activity.clone(), e.initiator.clone()))
                        .unwrap_or(&false);
                }
                true
            });
            for (n, e) in instance.events.iter_mut().enumerate() {
                e.seq = n as u64;
            }
        }
        process.instances.retain(|i| !i.events.is_empty());
    }
    out.processes.retain(|p| !p.instances.is_empty());

    prune_registries(&mut out);
    out
}

/// Drops registry entries no longer referenced by any event, keeping the
/// roles and units of surviving actors.
fn prune_registries(log: &mut WorkflowLog) {
    let mut live_actors = BTreeSet::new();
    let mut live_docs = BTreeSet::new();
    for (_, e) in log.events() {
        live_actors.insert(e.initiator.clone());
        live_actors.insert(e.receiver.clone());
        live_docs.extend(e.consumed_docs.iter().cloned());
        live_docs.extend(e.produced_docs.iter().cloned());
    }
    log.actors.retain(|id, _| live_actors.contains(id));
    log.documents = live_docs;
    let mut live_roles = BTreeSet::new();
    let mut live_units = BTreeSet::new();
    for a in log.actors.values() {
        live_roles.extend(a.roles.iter().cloned());
        if let Some(u) = &a.org_unit {
            live_units.insert(u.clone());
        }
    }
    log.roles = live_roles;
    log.org_units = live_units;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::flat::parse_flat;
    use crate::model::{validate_log, EventLine};

    const CRISIS: &str = include_str!("../../tests/fixtures/crisis.csv");

    #[test]
    fn permissive_spec_is_identity() {
        let log = parse_flat(CRISIS).unwrap();
        assert_eq!(filter_log(&log, &FilterSpec::default()), log);
    }

    #[test]
    fn logistics_removal_drops_the_delegation_rows() {
        let log = parse_flat(CRISIS).unwrap();
        let spec = FilterSpec {
            logistics_activities: ["Alarm triggering".to_string()].into(),
            ..FilterSpec::default()
        };
        let filtered = filter_log(&log, &spec);
        assert_eq!(filtered.event_count(), 8);
        assert!(validate_log(&filtered).is_clean());
        assert!(!filtered.actors.contains_key("Salim"));
    }

    #[test]
    fn completed_only_drops_aborted_occurrences() {
        // Two occurrences in one case: activity x completes, activity y aborts.
        let mut log = WorkflowLog::new();
        log.register_actor("a", &BTreeSet::new(), None);
        let mut events = Vec::new();
        for (n, (act, state)) in [
            ("x", LifecycleState::Scheduled),
            ("x", LifecycleState::Started),
            ("y", LifecycleState::Scheduled),
            ("y", LifecycleState::Aborted),
            ("x", LifecycleState::Completed),
        ]
        .iter()
        .enumerate()
        {
            let mut e = EventLine::new("c1", n as u64, "execute", *act, "a", "system");
            e.event_stream = Some(*state);
            events.push(e);
        }
        log.processes.push(crate::model::Process {
            name: "default".into(),
            instances: vec![crate::model::ProcessInstance {
                case_id: "c1".into(),
                events,
            }],
        });
        let spec = FilterSpec {
            completed_only: true,
            ..FilterSpec::default()
        };
        let filtered = filter_log(&log, &spec);
        assert_eq!(filtered.event_count(), 3);
        assert!(filtered.events().all(|(_, e)| e.activity == "x"));
        assert!(validate_log(&filtered).is_clean());
    }

    #[test]
    fn filtering_is_idempotent_and_monotone() {
        let log = parse_flat(CRISIS).unwrap();
        let spec = FilterSpec {
            completed_only: true,
            logistics_activities: ["Alarm triggering".to_string()].into(),
            keep_performatives: Some(
                ["cfp", "propose", "accept-proposal", "reject-proposal"]
                    .iter()
                    .map(|p| Performative::new(p))
                    .collect(),
            ),
            ..FilterSpec::default()
        };
        let once = filter_log(&log, &spec);
        let twice = filter_log(&once, &spec);
        assert_eq!(once, twice);
        assert!(once.event_count() <= log.event_count());
    }
}
