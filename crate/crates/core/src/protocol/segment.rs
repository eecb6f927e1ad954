//! Conversation segmentation: partitions the interaction events of each
//! case into conversations keyed by (case, activity, initiator).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::{is_system, EventLine, WorkflowLog};

/// A candidate protocol occurrence: the interaction events of one case,
/// one activity, one initiating actor. Lifecycle events (those carrying an
/// `event_stream`) never join a conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conversation {
    pub process: String,
    pub case_id: String,
    pub activity: String,
    pub initiator: String,
    pub events: Vec<EventLine>,
}

impl Conversation {
    /// All non-system actors seen so far, the initiator included.
    fn actors(&self) -> BTreeSet<&str> {
        let mut actors: BTreeSet<&str> = BTreeSet::new();
        actors.insert(self.initiator.as_str());
        for e in &self.events {
            if !is_system(&e.initiator) {
                actors.insert(e.initiator.as_str());
            }
            if !is_system(&e.receiver) {
                actors.insert(e.receiver.as_str());
            }
        }
        actors
    }

    fn admits(&self, event: &EventLine) -> bool {
        event.initiator == self.initiator
            || event.receiver == self.initiator
            || (is_system(&event.receiver) && self.actors().contains(event.initiator.as_str()))
    }
}

/// Deterministically partitions all non-lifecycle interaction events into
/// conversations. Within a (case, activity) group, an event joins the
/// first conversation whose initiator it addresses or is addressed by;
/// system-directed events join the conversation that already involves
/// their sender. Events that fit nowhere open a new conversation keyed by
/// their own initiator. Output is ordered by (process, case, first seq).
pub fn segment_conversations(log: &WorkflowLog) -> Vec<Conversation> {
    let mut conversations: Vec<Conversation> = Vec::new();
    for process in &log.processes {
        for instance in &process.instances {
            let case_start = conversations.len();
            for event in instance.events.iter().filter(|e| !e.is_lifecycle()) {
                let slot = conversations[case_start..]
                    .iter_mut()
                    .find(|c| c.activity == event.activity && c.admits(event));
                match slot {
                    Some(conv) => conv.events.push(event.clone()),
                    None => conversations.push(Conversation {
                        process: process.name.clone(),
                        case_id: instance.case_id.clone(),
                        activity: event.activity.clone(),
                        initiator: event.initiator.clone(),
                        events: vec![event.clone()],
                    }),
                }
            }
        }
    }
    conversations
}
