//! Declarative interaction-protocol templates: a deterministic state
//! machine over performative-labeled, direction-classified events, plus
//! completeness constraints. Templates are data files; the built-in set
//! (delegation, contract-net, vote, english-auction, request) ships
//! embedded and can be extended with user files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Direction of a message relative to the conversation initiator `I`.
/// `i-to-p` and `i-to-all-p` describe the same event-level direction; the
/// latter marks a broadcast and is distinguished only for multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "i-to-p")]
    IToP,
    #[serde(rename = "i-to-all-p")]
    IToAllP,
    #[serde(rename = "p-to-i")]
    PToI,
    #[serde(rename = "p-to-system")]
    PToSystem,
}

impl Direction {
    /// Event-level direction class; broadcasts collapse onto `i-to-p`.
    pub fn class(self) -> DirectionClass {
        match self {
            Direction::IToP | Direction::IToAllP => DirectionClass::FromInitiator,
            Direction::PToI => DirectionClass::ToInitiator,
            Direction::PToSystem => DirectionClass::ToSystem,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DirectionClass {
    FromInitiator,
    ToInitiator,
    ToSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplicity {
    /// Fires exactly once on a complete walk.
    One,
    /// Must cover every known participant on a complete walk.
    EachParticipant,
    /// Fires for a non-empty subset of the participants.
    SomeParticipants,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDef {
    pub name: String,
    #[serde(default)]
    pub accepting: bool,
    /// Accepting states may only have outgoing transitions when resumable.
    #[serde(default)]
    pub resumable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub performative: String,
    pub direction: Direction,
    pub multiplicity: Multiplicity,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfDir {
    pub performative: String,
    pub direction: Direction,
}

/// Completeness constraints evaluated after the machine walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Constraint {
    /// Every counterparty of a `from` event must also be a counterparty of
    /// one of the `by` events.
    Covered { from: PerfDir, by: Vec<PerfDir> },
    /// At least `count` firings of the given performative/direction.
    MinCount {
        performative: String,
        direction: Direction,
        count: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardinalityRange {
    pub min: u64,
    pub max: Option<u64>,
}

impl CardinalityRange {
    pub fn contains(&self, n: u64) -> bool {
        n >= self.min && self.max.is_none_or(|m| n <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolTemplate {
    pub name: String,
    /// Disambiguation rank; higher wins when several templates complete.
    pub priority: i64,
    pub participants: CardinalityRange,
    pub start: String,
    pub states: Vec<StateDef>,
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    /// Counterparties of this performative (from the initiator) are the
    /// winners of award-style protocols.
    #[serde(default)]
    pub award_performative: Option<String>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template `{template}`: {message}")]
    Invalid { template: String, message: String },
    #[error("duplicate template name `{0}`")]
    DuplicateName(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ProtocolTemplate {
    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }

    /// The transition that fires in `state` for the given performative and
    /// event direction class, if any. Validity guarantees uniqueness.
    pub fn transition_from(
        &self,
        state: &str,
        performative: &str,
        class: DirectionClass,
    ) -> Option<&Transition> {
        self.transitions.iter().find(|t| {
            t.from == state && t.performative == performative && t.direction.class() == class
        })
    }

    /// Checks the template invariants: unique state names, resolvable
    /// transition endpoints, determinism per (state, performative,
    /// direction class), at least one accepting state, every accepting
    /// state reachable, and no exits from non-resumable accepting states.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let fail = |message: String| {
            Err(TemplateError::Invalid {
                template: self.name.clone(),
                message,
            })
        };

        let mut names = BTreeSet::new();
        for s in &self.states {
            if !names.insert(s.name.as_str()) {
                return fail(format!("duplicate state `{}`", s.name));
            }
        }
        if !names.contains(self.start.as_str()) {
            return fail(format!("start state `{}` is not defined", self.start));
        }
        if !self.states.iter().any(|s| s.accepting) {
            return fail("no accepting state".to_string());
        }

        let mut keys = BTreeSet::new();
        for t in &self.transitions {
            for endpoint in [&t.from, &t.to] {
                if !names.contains(endpoint.as_str()) {
                    return fail(format!("transition references unknown state `{endpoint}`"));
                }
            }
            if !keys.insert((t.from.as_str(), t.performative.as_str(), t.direction.class())) {
                return fail(format!(
                    "nondeterministic machine: two transitions from `{}` on `{}` in the same direction",
                    t.from, t.performative
                ));
            }
            let from = self.state(&t.from).expect("checked above");
            if from.accepting && !from.resumable {
                return fail(format!(
                    "transition leaves non-resumable accepting state `{}`",
                    t.from
                ));
            }
        }

        // Reachability from start over the transition relation.
        let mut reachable = BTreeSet::new();
        reachable.insert(self.start.as_str());
        let mut frontier = vec![self.start.as_str()];
        while let Some(state) = frontier.pop() {
            for t in self.transitions.iter().filter(|t| t.from == state) {
                if reachable.insert(t.to.as_str()) {
                    frontier.push(t.to.as_str());
                }
            }
        }
        for s in self.states.iter().filter(|s| s.accepting) {
            if !reachable.contains(s.name.as_str()) {
                return fail(format!("accepting state `{}` is unreachable", s.name));
            }
        }
        Ok(())
    }
}

const BUILTIN_SOURCES: [(&str, &str); 5] = [
    ("delegation", include_str!("../../templates/delegation.json")),
    ("contract-net", include_str!("../../templates/contract-net.json")),
    ("vote", include_str!("../../templates/vote.json")),
    ("english-auction", include_str!("../../templates/english-auction.json")),
    ("request", include_str!("../../templates/request.json")),
];

/// The five built-in templates, in load order.
pub fn builtin_templates() -> Vec<ProtocolTemplate> {
    BUILTIN_SOURCES
        .iter()
        .map(|(name, src)| {
            let t: ProtocolTemplate =
                serde_json::from_str(src).unwrap_or_else(|e| panic!("builtin `{name}`: {e}"));
            t.validate()
                .unwrap_or_else(|e| panic!("builtin `{name}`: {e}"));
            t
        })
        .collect()
}

/// Loads the built-ins followed by user template files. Duplicate names
/// and invalid machines are rejected.
pub fn load_templates(paths: &[impl AsRef<Path>]) -> Result<Vec<ProtocolTemplate>, TemplateError> {
    let mut templates = builtin_templates();
    let mut seen: BTreeMap<String, ()> =
        templates.iter().map(|t| (t.name.clone(), ())).collect();
    for path in paths {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::File {
            path: path.display().to_string(),
            source,
        })?;
        let template: ProtocolTemplate =
            serde_json::from_str(&text).map_err(|e| TemplateError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        template.validate()?;
        if seen.insert(template.name.clone(), ()).is_some() {
            return Err(TemplateError::DuplicateName(template.name));
        }
        templates.push(template);
    }
    Ok(templates)
}
