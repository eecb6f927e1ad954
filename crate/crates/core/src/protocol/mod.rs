//! Interaction protocol discovery: conversation segmentation, declarative
//! state-machine templates, and the matcher that reports discovered
//! protocol instances per conversation.

pub mod matcher;
pub mod segment;
pub mod template;

use std::collections::BTreeMap;

use serde::Serialize;

pub use matcher::{match_template, Outcome, ProtocolInstance};
pub use segment::{segment_conversations, Conversation};
pub use template::{builtin_templates, load_templates, ProtocolTemplate, TemplateError};

use crate::model::WorkflowLog;

/// A conversation no template could open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnmatchedConversation {
    pub process: String,
    pub case_id: String,
    pub activity: String,
    pub initiator: String,
    pub events: usize,
    pub first_performative: String,
    pub diagnostics: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TemplateCount {
    pub complete: u64,
    pub partial: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProtocolReport {
    pub instances: Vec<ProtocolInstance>,
    pub unmatched_conversations: Vec<UnmatchedConversation>,
    pub per_template: BTreeMap<String, TemplateCount>,
    pub conversations: usize,
}

impl ProtocolReport {
    pub fn complete_instances(&self) -> impl Iterator<Item = &ProtocolInstance> {
        self.instances
            .iter()
            .filter(|i| i.outcome == Outcome::Complete)
    }
}

/// Mines all conversations against the template set. For each conversation
/// the winning match is the complete instance of highest priority (ties:
/// most events consumed, then template name). Partial matches are reported
/// only when no template completes; conversations no template can open are
/// listed as unmatched. Instances and unmatched entries partition the
/// conversation set.
pub fn mine_protocols(log: &WorkflowLog, templates: &[ProtocolTemplate]) -> ProtocolReport {
    let conversations = segment_conversations(log);
    let mut report = ProtocolReport {
        conversations: conversations.len(),
        ..ProtocolReport::default()
    };

    for conv in &conversations {
        let mut candidates: Vec<ProtocolInstance> = templates
            .iter()
            .filter_map(|t| match_template(conv, t))
            .collect();
        // Complete beats partial, then priority, consumed length, name.
        candidates.sort_by(|a, b| {
            let completeness =
                (b.outcome == Outcome::Complete).cmp(&(a.outcome == Outcome::Complete));
            completeness
                .then(b.priority.cmp(&a.priority))
                .then(b.events_consumed.cmp(&a.events_consumed))
                .then(a.template.cmp(&b.template))
        });
        match candidates.into_iter().next() {
            Some(instance) => {
                let entry = report
                    .per_template
                    .entry(instance.template.clone())
                    .or_default();
                match instance.outcome {
                    Outcome::Complete => entry.complete += 1,
                    Outcome::Partial => entry.partial += 1,
                }
                report.instances.push(instance);
            }
            None => {
                let first = conv
                    .events
                    .first()
                    .map(|e| e.performative.as_str().to_string())
                    .unwrap_or_default();
                report.unmatched_conversations.push(UnmatchedConversation {
                    process: conv.process.clone(),
                    case_id: conv.case_id.clone(),
                    activity: conv.activity.clone(),
                    initiator: conv.initiator.clone(),
                    events: conv.events.len(),
                    diagnostics: format!(
                        "no template opens on `{first}` from its start state"
                    ),
                    first_performative: first,
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::flat::parse_flat;

    const CRISIS: &str = include_str!("../../tests/fixtures/crisis.csv");

    #[test]
    fn crisis_fixture_mines_delegation_and_contract_net() {
        let log = parse_flat(CRISIS).unwrap();
        let report = mine_protocols(&log, &builtin_templates());
        assert_eq!(report.conversations, 3);
        assert_eq!(report.instances.len(), 2);
        assert_eq!(report.unmatched_conversations.len(), 1);

        let delegation = &report.instances[0];
        assert_eq!(delegation.template, "delegation");
        assert_eq!(delegation.outcome, Outcome::Complete);
        assert_eq!(delegation.initiator, "Mahdi");
        assert!(delegation.participants.contains("Salim"));

        let cnet = &report.instances[1];
        assert_eq!(cnet.template, "contract-net");
        assert_eq!(cnet.outcome, Outcome::Complete);
        assert_eq!(cnet.initiator, "Malik");
        assert!(cnet.winners.contains("Amal"));

        let unmatched = &report.unmatched_conversations[0];
        assert_eq!(unmatched.activity, "Investigation report establishment");
        assert_eq!(unmatched.first_performative, "execute");
    }

    #[test]
    fn lifecycle_only_log_mines_nothing() {
        let text = "case,performative,activity,initiator,receiver,event_stream\n\
                    c1,execute,act,a,system,scheduled\n\
                    c1,execute,act,a,system,completed\n";
        let log = parse_flat(text).unwrap();
        let report = mine_protocols(&log, &builtin_templates());
        assert_eq!(report.conversations, 0);
        assert!(report.instances.is_empty());
    }

    #[test]
    fn partition_invariant_holds() {
        let log = parse_flat(CRISIS).unwrap();
        let report = mine_protocols(&log, &builtin_templates());
        assert_eq!(
            report.instances.len() + report.unmatched_conversations.len(),
            report.conversations
        );
    }
}
