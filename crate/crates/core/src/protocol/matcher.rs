//! The template matcher: simulates a protocol state machine over a
//! conversation's events and evaluates completeness constraints.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::segment::Conversation;
use super::template::{
    Constraint, Direction, DirectionClass, Multiplicity, PerfDir, ProtocolTemplate,
};
use crate::model::is_system;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Complete,
    Partial,
}

/// A matched (complete or partial) protocol occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtocolInstance {
    pub template: String,
    pub process: String,
    pub case_id: String,
    pub activity: String,
    pub initiator: String,
    pub participants: BTreeSet<String>,
    pub outcome: Outcome,
    /// Award-protocol winners (counterparties of the award performative).
    pub winners: BTreeSet<String>,
    /// Invited participants that never sent anything back.
    pub silent_participants: BTreeSet<String>,
    /// State reached when the walk stopped.
    pub furthest_state: String,
    pub events_consumed: usize,
    /// (first seq of the conversation, last consumed seq).
    pub event_span: (u64, u64),
    pub priority: i64,
    pub flags: Vec<String>,
}

/// Classifies an event's direction relative to the conversation initiator.
/// Returns `None` for events no template transition can describe
/// (initiator-to-system, or exchanges not touching the initiator).
fn classify(initiator: &str, event_initiator: &str, event_receiver: &str) -> Option<DirectionClass> {
    if is_system(event_receiver) {
        if event_initiator == initiator {
            None
        } else {
            Some(DirectionClass::ToSystem)
        }
    } else if event_initiator == initiator {
        Some(DirectionClass::FromInitiator)
    } else if event_receiver == initiator {
        Some(DirectionClass::ToInitiator)
    } else {
        None
    }
}

/// Simulates the template machine over the conversation. Returns `None`
/// when the first event cannot fire from the start state; otherwise a
/// complete or partial instance. Deterministic.
pub fn match_template(conv: &Conversation, template: &ProtocolTemplate) -> Option<ProtocolInstance> {
    let mut state = template.start.as_str();
    let mut participants: BTreeSet<String> = BTreeSet::new();
    let mut responders: BTreeSet<String> = BTreeSet::new();
    let mut winners: BTreeSet<String> = BTreeSet::new();
    // (performative, direction) -> (firing count, counterparties)
    let mut fired: BTreeMap<(String, Direction), (u64, BTreeSet<String>)> = BTreeMap::new();
    let mut flags: BTreeSet<String> = BTreeSet::new();
    let mut consumed = 0usize;
    let mut last_seq = conv.events.first().map_or(0, |e| e.seq);
    let mut halted = false;

    for event in &conv.events {
        let Some(class) = classify(&conv.initiator, &event.initiator, &event.receiver) else {
            halted = true;
            break;
        };
        let Some(transition) =
            template.transition_from(state, event.performative.as_str(), class)
        else {
            halted = true;
            break;
        };
        let counterparty = match class {
            DirectionClass::FromInitiator => {
                participants.insert(event.receiver.clone());
                event.receiver.clone()
            }
            DirectionClass::ToInitiator | DirectionClass::ToSystem => {
                // Replies must come from an addressed participant.
                if !participants.contains(&event.initiator) {
                    halted = true;
                    break;
                }
                responders.insert(event.initiator.clone());
                event.initiator.clone()
            }
        };
        if template.award_performative.as_deref() == Some(event.performative.as_str())
            && class == DirectionClass::FromInitiator
        {
            winners.insert(counterparty.clone());
        }
        let entry = fired
            .entry((transition.performative.clone(), transition.direction))
            .or_insert_with(|| (0, BTreeSet::new()));
        entry.0 += 1;
        entry.1.insert(counterparty);
        if transition.multiplicity == Multiplicity::One && entry.0 > 1 {
            flags.insert("ambiguous-interleaving".to_string());
        }
        state = transition.to.as_str();
        consumed += 1;
        last_seq = event.seq;
    }

    if consumed == 0 {
        return None;
    }

    let accepting = template.state(state).is_some_and(|s| s.accepting);
    let multiplicities_ok = template.transitions.iter().all(|t| {
        match fired.get(&(t.performative.clone(), t.direction)) {
            None => true, // transition not on the walk
            Some((count, parties)) => match t.multiplicity {
                Multiplicity::One => *count == 1,
                Multiplicity::EachParticipant => parties == &participants,
                Multiplicity::SomeParticipants => !parties.is_empty(),
            },
        }
    });
    let constraints_ok = template
        .constraints
        .iter()
        .all(|c| constraint_holds(c, &fired));
    let cardinality_ok = template.participants.contains(participants.len() as u64);

    let outcome = if !halted && accepting && multiplicities_ok && constraints_ok && cardinality_ok {
        Outcome::Complete
    } else {
        Outcome::Partial
    };

    let silent: BTreeSet<String> = participants.difference(&responders).cloned().collect();
    Some(ProtocolInstance {
        template: template.name.clone(),
        process: conv.process.clone(),
        case_id: conv.case_id.clone(),
        activity: conv.activity.clone(),
        initiator: conv.initiator.clone(),
        participants,
        outcome,
        winners,
        silent_participants: silent,
        furthest_state: state.to_string(),
        events_consumed: consumed,
        event_span: (conv.events.first().map_or(0, |e| e.seq), last_seq),
        priority: template.priority,
        flags: flags.into_iter().collect(),
    })
}

fn counterparties<'a>(
    fired: &'a BTreeMap<(String, Direction), (u64, BTreeSet<String>)>,
    pd: &PerfDir,
) -> Option<&'a BTreeSet<String>> {
    fired
        .get(&(pd.performative.clone(), pd.direction))
        .map(|(_, parties)| parties)
}

fn constraint_holds(
    constraint: &Constraint,
    fired: &BTreeMap<(String, Direction), (u64, BTreeSet<String>)>,
) -> bool {
    match constraint {
        Constraint::Covered { from, by } => {
            let Some(sources) = counterparties(fired, from) else {
                return true; // nothing to cover
            };
            sources.iter().all(|actor| {
                by.iter()
                    .any(|pd| counterparties(fired, pd).is_some_and(|s| s.contains(actor)))
            })
        }
        Constraint::MinCount {
            performative,
            direction,
            count,
        } => {
            fired
                .get(&(performative.clone(), *direction))
                .map_or(0, |(c, _)| *c)
                >= *count
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::flat::parse_flat;
    use crate::protocol::segment::segment_conversations;
    use crate::protocol::template::builtin_templates;

    const CRISIS: &str = include_str!("../../tests/fixtures/crisis.csv");

    fn template(name: &str) -> ProtocolTemplate {
        builtin_templates()
            .into_iter()
            .find(|t| t.name == name)
            .unwrap()
    }

    fn crisis_conversations() -> Vec<Conversation> {
        segment_conversations(&parse_flat(CRISIS).unwrap())
    }

    #[test]
    fn grey_section_is_a_complete_contract_net() {
        let convs = crisis_conversations();
        let inst = match_template(&convs[2], &template("contract-net")).unwrap();
        assert_eq!(inst.outcome, Outcome::Complete);
        assert_eq!(inst.initiator, "Malik");
        let participants: Vec<&str> = inst.participants.iter().map(String::as_str).collect();
        assert_eq!(participants, ["Amal", "Sami"]);
        let winners: Vec<&str> = inst.winners.iter().map(String::as_str).collect();
        assert_eq!(winners, ["Amal"]);
        assert!(inst.silent_participants.is_empty());
    }

    #[test]
    fn delegate_opening_does_not_start_a_contract_net() {
        let convs = crisis_conversations();
        assert!(match_template(&convs[1], &template("contract-net")).is_none());
    }

    #[test]
    fn truncated_contract_net_is_partial_in_the_bid_state() {
        let mut convs = crisis_conversations();
        convs[2].events.truncate(4); // cfp, cfp, propose, propose
        let inst = match_template(&convs[2], &template("contract-net")).unwrap();
        assert_eq!(inst.outcome, Outcome::Partial);
        assert_eq!(inst.furthest_state, "bidding");
        assert_eq!(inst.events_consumed, 4);
    }

    #[test]
    fn delegation_with_report_back_is_complete() {
        let convs = crisis_conversations();
        let inst = match_template(&convs[1], &template("delegation")).unwrap();
        assert_eq!(inst.outcome, Outcome::Complete);
        assert_eq!(inst.initiator, "Mahdi");
        let participants: Vec<&str> = inst.participants.iter().map(String::as_str).collect();
        assert_eq!(participants, ["Salim"]);
    }

    #[test]
    fn swapping_cfp_and_propose_breaks_completeness() {
        let mut convs = crisis_conversations();
        // Amal's propose before Malik's cfp to Amal.
        convs[2].events.swap(1, 2);
        let inst = match_template(&convs[2], &template("contract-net")).unwrap();
        assert_eq!(inst.outcome, Outcome::Partial);
    }

    #[test]
    fn single_round_cfp_is_not_an_auction() {
        let convs = crisis_conversations();
        let inst = match_template(&convs[2], &template("english-auction")).unwrap();
        assert_eq!(inst.outcome, Outcome::Partial);
    }
}
