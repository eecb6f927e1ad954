//! Seeded synthetic log generation from a declarative ground-truth
//! configuration: an actor population, an organizational structure, a
//! protocol mix and timing parameters. Generation is a pure function of
//! the config — the same config (seed included) yields a byte-identical
//! serialized log. Per-case RNG substreams are ChaCha8 streams derived
//! from (seed, process index, case index), so streams are portable and
//! cases could be generated in parallel.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    is_system, EventLine, LifecycleState, Process, ProcessInstance, WorkflowLog,
    SYSTEM_ACTOR,
};
use crate::protocol::template::ProtocolTemplate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub roles: Vec<String>,
    #[serde(default)]
    pub org_unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub name: String,
}

/// Which organizational shape the generated traffic realizes, with
/// kind-specific parameters. Omitted parameters are derived from the actor
/// list (see `resolve`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    StrictHierarchy {
        #[serde(default)]
        edges: Option<Vec<(String, String)>>,
        #[serde(default)]
        branching: Option<usize>,
    },
    RelaxedHierarchy {
        #[serde(default)]
        edges: Option<Vec<(String, String)>>,
    },
    Federation {
        #[serde(default)]
        representatives: Option<BTreeMap<String, String>>,
    },
    Coalition {},
    Market {
        #[serde(default)]
        pool: Option<Vec<String>>,
    },
}

impl StructureSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StructureSpec::StrictHierarchy { .. } => "strict_hierarchy",
            StructureSpec::RelaxedHierarchy { .. } => "relaxed_hierarchy",
            StructureSpec::Federation { .. } => "federation",
            StructureSpec::Coalition {} => "coalition",
            StructureSpec::Market { .. } => "market",
        }
    }
}

fn default_processes() -> Vec<ProcessSpec> {
    vec![ProcessSpec {
        name: "default".to_string(),
    }]
}

fn default_report_back() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    #[serde(default = "default_processes")]
    pub processes: Vec<ProcessSpec>,
    pub actors: Vec<ActorSpec>,
    pub structure: StructureSpec,
    pub protocol_mix: BTreeMap<String, f64>,
    pub cases: u64,
    pub activities: Vec<String>,
    #[serde(default)]
    pub timestamp_base: Option<DateTime<Utc>>,
    #[serde(default = "default_mean_step", rename = "mean_step_secs")]
    pub mean_step_secs: u64,
    #[serde(default = "default_report_back")]
    pub report_back_prob: f64,
    #[serde(default)]
    pub abort_rate: f64,
    #[serde(default)]
    pub suspend_rate: f64,
}

fn default_mean_step() -> u64 {
    60
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no generator for template `{0}`")]
    UnsupportedTemplate(String),
    #[error("binding cardinality violation for `{template}`: {given} participants outside [{min}, {max}]")]
    BindingCardinality {
        template: String,
        given: usize,
        min: u64,
        max: String,
    },
}

/// Per-structure protocol compatibility: the generator only emits traffic
/// whose mined structure can still recover the configured kind.
fn allowed_protocols(kind: &StructureSpec) -> &'static [&'static str] {
    match kind {
        StructureSpec::StrictHierarchy { .. } | StructureSpec::RelaxedHierarchy { .. } => {
            &["delegation"]
        }
        StructureSpec::Federation { .. } => &["request"],
        StructureSpec::Coalition {} => &["request", "vote"],
        StructureSpec::Market { .. } => &["contract-net", "english-auction"],
    }
}

#[derive(Debug)]
enum StructureCtx {
    Hierarchy { edges: Vec<(String, String)> },
    Federation {
        units: Vec<(String, Vec<String>)>,
        reps: BTreeMap<String, String>,
    },
    Coalition { members: Vec<String> },
    Market { initiator: String, pool: Vec<String> },
}

fn invalid(msg: impl Into<String>) -> GeneratorError {
    GeneratorError::InvalidConfig(msg.into())
}

/// Checks the config invariants and resolves defaulted structure
/// parameters against the actor population.
fn resolve(config: &GeneratorConfig) -> Result<StructureCtx, GeneratorError> {
    let ids: Vec<&str> = config.actors.iter().map(|a| a.id.as_str()).collect();
    let id_set: BTreeSet<&str> = ids.iter().copied().collect();
    if id_set.len() != ids.len() {
        return Err(invalid("duplicate actor ids"));
    }
    if ids.iter().any(|id| is_system(id)) {
        return Err(invalid("the reserved actor id `system` cannot be generated"));
    }
    if config.activities.is_empty() {
        return Err(invalid("at least one activity name is required"));
    }
    if config.processes.is_empty() {
        return Err(invalid("at least one process is required"));
    }
    if config.protocol_mix.is_empty() || config.protocol_mix.values().all(|w| *w <= 0.0) {
        return Err(invalid("protocol_mix weights must not all be zero"));
    }
    if config.protocol_mix.values().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(invalid("protocol_mix weights must be non-negative and finite"));
    }
    let allowed = allowed_protocols(&config.structure);
    for name in config.protocol_mix.keys() {
        if !allowed.contains(&name.as_str()) {
            return Err(invalid(format!(
                "protocol `{name}` is not generatable under a {} structure (allowed: {})",
                config.structure.kind_name(),
                allowed.join(", ")
            )));
        }
    }
    for prob in [config.report_back_prob, config.abort_rate, config.suspend_rate] {
        if !(0.0..=1.0).contains(&prob) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
    }
    if config.mean_step_secs == 0 {
        return Err(invalid("mean_step_secs must be positive"));
    }

    let require_population = |min: usize| -> Result<(), GeneratorError> {
        if ids.len() < min {
            Err(invalid(format!(
                "{} requires at least {min} actors, got {}",
                config.structure.kind_name(),
                ids.len()
            )))
        } else {
            Ok(())
        }
    };

    match &config.structure {
        StructureSpec::StrictHierarchy { edges, branching } => {
            require_population(2)?;
            let edges = match edges {
                Some(edges) => edges.clone(),
                None => {
                    let b = branching.unwrap_or(2).max(1);
                    (1..ids.len())
                        .map(|i| (ids[(i - 1) / b].to_string(), ids[i].to_string()))
                        .collect()
                }
            };
            check_edges(&edges, &id_set)?;
            let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
            for (_, to) in &edges {
                *indeg.entry(to.as_str()).or_insert(0) += 1;
            }
            if indeg.values().any(|&d| d > 1) {
                return Err(invalid("strict hierarchy edges must form a forest (in-degree <= 1)"));
            }
            if !edges_acyclic(&edges) {
                return Err(invalid("strict hierarchy edges must be acyclic"));
            }
            Ok(StructureCtx::Hierarchy { edges })
        }
        StructureSpec::RelaxedHierarchy { edges } => {
            require_population(3)?;
            let edges = match edges {
                Some(edges) => edges.clone(),
                None => {
                    // Two delegators share the third actor, the rest chain on.
                    let mut edges = vec![
                        (ids[0].to_string(), ids[2].to_string()),
                        (ids[1].to_string(), ids[2].to_string()),
                    ];
                    for i in 2..ids.len() - 1 {
                        edges.push((ids[i].to_string(), ids[i + 1].to_string()));
                    }
                    edges
                }
            };
            check_edges(&edges, &id_set)?;
            if !edges_acyclic(&edges) {
                return Err(invalid("relaxed hierarchy edges must be acyclic"));
            }
            let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
            for (_, to) in &edges {
                *indeg.entry(to.as_str()).or_insert(0) += 1;
            }
            if indeg.values().all(|&d| d < 2) {
                return Err(invalid(
                    "relaxed hierarchy needs an actor with at least two delegators",
                ));
            }
            Ok(StructureCtx::Hierarchy { edges })
        }
        StructureSpec::Federation { representatives } => {
            require_population(4)?;
            let mut units: Vec<(String, Vec<String>)> = Vec::new();
            for actor in &config.actors {
                let Some(unit) = &actor.org_unit else {
                    return Err(invalid(format!(
                        "federation requires every actor to have an org unit; `{}` has none",
                        actor.id
                    )));
                };
                match units.iter_mut().find(|(u, _)| u == unit) {
                    Some((_, members)) => members.push(actor.id.clone()),
                    None => units.push((unit.clone(), vec![actor.id.clone()])),
                }
            }
            if units.len() < 2 {
                return Err(invalid("federation requires at least 2 org units"));
            }
            if config.activities.len() < 2 {
                return Err(invalid(
                    "federation generation needs at least 2 activity names (cross- and intra-unit exchanges must not share a conversation key)",
                ));
            }
            let mut reps = BTreeMap::new();
            for (unit, members) in &units {
                let rep = match representatives.as_ref().and_then(|r| r.get(unit)) {
                    Some(rep) => {
                        if !members.contains(rep) {
                            return Err(invalid(format!(
                                "representative `{rep}` is not a member of unit `{unit}`"
                            )));
                        }
                        rep.clone()
                    }
                    None => members[0].clone(),
                };
                reps.insert(unit.clone(), rep);
            }
            Ok(StructureCtx::Federation { units, reps })
        }
        StructureSpec::Coalition {} => {
            require_population(3)?;
            Ok(StructureCtx::Coalition {
                members: ids.iter().map(|s| s.to_string()).collect(),
            })
        }
        StructureSpec::Market { pool } => {
            require_population(3)?;
            let (initiator, pool) = match pool {
                Some(pool) => {
                    for bidder in pool {
                        if !id_set.contains(bidder.as_str()) {
                            return Err(invalid(format!("unknown pool actor `{bidder}`")));
                        }
                    }
                    let initiator = ids
                        .iter()
                        .find(|id| !pool.contains(&id.to_string()))
                        .ok_or_else(|| invalid("market needs an initiator outside the pool"))?;
                    (initiator.to_string(), pool.clone())
                }
                None => (
                    ids[0].to_string(),
                    ids[1..].iter().map(|s| s.to_string()).collect(),
                ),
            };
            if pool.len() < 2 {
                return Err(invalid("market pool needs at least 2 bidders"));
            }
            Ok(StructureCtx::Market { initiator, pool })
        }
    }
}

fn check_edges(
    edges: &[(String, String)],
    ids: &BTreeSet<&str>,
) -> Result<(), GeneratorError> {
    if edges.is_empty() {
        return Err(invalid("hierarchy needs at least one edge"));
    }
    for (from, to) in edges {
        if !ids.contains(from.as_str()) || !ids.contains(to.as_str()) {
            return Err(invalid(format!("hierarchy edge ({from}, {to}) names unknown actors")));
        }
        if from == to {
            return Err(invalid(format!("self-delegation edge on `{from}`")));
        }
    }
    Ok(())
}

fn edges_acyclic(edges: &[(String, String)]) -> bool {
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
    for (from, to) in edges {
        out.entry(from).or_default().push(to);
        indeg.entry(from).or_insert(0);
        *indeg.entry(to).or_insert(0) += 1;
    }
    let mut queue: Vec<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut seen = 0;
    while let Some(n) = queue.pop() {
        seen += 1;
        for &m in out.get(n).into_iter().flatten() {
            let d = indeg.get_mut(m).expect("known node");
            *d -= 1;
            if *d == 0 {
                queue.push(m);
            }
        }
    }
    seen == indeg.len()
}

/// Deterministic per-case substream: ChaCha8 keyed by (seed, process
/// index, case index).
fn case_rng(seed: u64, process_idx: u64, case_idx: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&process_idx.to_le_bytes());
    key[16..24].copy_from_slice(&case_idx.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Role→actor assignment for one emitted protocol occurrence.
#[derive(Debug, Clone)]
pub struct Binding {
    pub initiator: String,
    pub participants: Vec<String>,
    /// Forces the award to this participant (award-style protocols).
    pub winner: Option<String>,
}

/// Knobs for protocol emission; probabilities are evaluated against the
/// per-case RNG substream.
#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub report_back_prob: f64,
    pub refuse_prob: f64,
    pub ballot_accept_prob: f64,
    pub auction_rounds: u32,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            report_back_prob: 1.0,
            refuse_prob: 0.0,
            ballot_accept_prob: 0.5,
            auction_rounds: 2,
        }
    }
}

/// The interaction events of one protocol occurrence plus the actor (if
/// any) that will execute the activity.
#[derive(Debug, Clone)]
pub struct EmittedInstance {
    pub events: Vec<EventLine>,
    pub executor: Option<String>,
}

/// Emits the interaction events of one occurrence of a built-in protocol.
/// The emitted sequence is accepted complete by `match_template` for the
/// same template (generator/miner closure). Case ids, seq numbers and
/// timestamps are placeholders for the caller to rewrite.
pub fn emit_protocol_instance(
    template: &ProtocolTemplate,
    binding: &Binding,
    activity: &str,
    rng: &mut ChaCha8Rng,
    opts: &EmitOptions,
) -> Result<EmittedInstance, GeneratorError> {
    if !template.participants.contains(binding.participants.len() as u64) {
        return Err(GeneratorError::BindingCardinality {
            template: template.name.clone(),
            given: binding.participants.len(),
            min: template.participants.min,
            max: template
                .participants
                .max
                .map_or_else(|| "inf".to_string(), |m| m.to_string()),
        });
    }
    let initiator = &binding.initiator;
    let mut events = Vec::new();
    let mut push = |perf: &str, from: &str, to: &str| {
        events.push(EventLine::new("", 0, perf, activity, from, to));
    };

    let executor = match template.name.as_str() {
        "delegation" => {
            let delegate = &binding.participants[0];
            push("delegate", initiator, delegate);
            if rng.random::<f64>() < opts.report_back_prob {
                push("inform", delegate, initiator);
            }
            Some(delegate.clone())
        }
        "request" => {
            let responder = &binding.participants[0];
            push("request", initiator, responder);
            // The reply (inform or failure) is appended by the caller once
            // the lifecycle outcome is known; see `generate`.
            Some(responder.clone())
        }
        "vote" => {
            for p in &binding.participants {
                push("propose", initiator, p);
            }
            for p in &binding.participants {
                let ballot = if rng.random::<f64>() < opts.ballot_accept_prob {
                    "accept-proposal"
                } else {
                    "reject-proposal"
                };
                push(ballot, p, initiator);
            }
            for p in &binding.participants {
                push("inform", initiator, p);
            }
            None
        }
        "contract-net" => {
            for p in &binding.participants {
                push("cfp", initiator, p);
            }
            let mut proposers: Vec<&String> = Vec::new();
            let mut refusers: Vec<&String> = Vec::new();
            for p in &binding.participants {
                let must_propose = binding.winner.as_ref() == Some(p);
                if must_propose || rng.random::<f64>() >= opts.refuse_prob {
                    proposers.push(p);
                } else {
                    refusers.push(p);
                }
            }
            if proposers.is_empty() {
                proposers.push(refusers.remove(0));
            }
            for p in proposers.iter() {
                push("propose", p, initiator);
            }
            for p in &refusers {
                push("refuse", p, initiator);
            }
            let winner = binding
                .winner
                .clone()
                .unwrap_or_else(|| proposers[rng.random_range(0..proposers.len())].clone());
            push("accept-proposal", initiator, &winner);
            for p in proposers.iter().filter(|p| ***p != winner) {
                push("reject-proposal", initiator, p);
            }
            push("execute", &winner, SYSTEM_ACTOR);
            Some(winner)
        }
        "english-auction" => {
            let rounds = opts.auction_rounds.max(2);
            for _ in 0..rounds {
                for p in &binding.participants {
                    push("cfp", initiator, p);
                }
                for p in &binding.participants {
                    push("propose", p, initiator);
                }
            }
            let winner = binding
                .winner
                .clone()
                .unwrap_or_else(|| {
                    binding.participants[rng.random_range(0..binding.participants.len())].clone()
                });
            push("accept-proposal", initiator, &winner);
            for p in binding.participants.iter().filter(|p| **p != winner) {
                push("reject-proposal", initiator, p);
            }
            push("execute", &winner, SYSTEM_ACTOR);
            Some(winner)
        }
        other => return Err(GeneratorError::UnsupportedTemplate(other.to_string())),
    };

    Ok(EmittedInstance { events, executor })
}

fn weighted_choice<'a>(mix: &'a BTreeMap<String, f64>, rng: &mut ChaCha8Rng) -> &'a str {
    let total: f64 = mix.values().sum();
    let mut r = rng.random::<f64>() * total;
    for (name, weight) in mix {
        r -= weight;
        if r <= 0.0 {
            return name;
        }
    }
    mix.keys().next_back().expect("non-empty mix")
}

struct CaseBuilder {
    events: Vec<EventLine>,
}

impl CaseBuilder {
    /// Lifecycle events for one executed activity occurrence. Returns true
    /// when the occurrence aborts.
    fn push_lifecycle(
        &mut self,
        activity: &str,
        executor: &str,
        rng: &mut ChaCha8Rng,
        abort_rate: f64,
        suspend_rate: f64,
    ) -> bool {
        let aborted = rng.random::<f64>() < abort_rate;
        let suspended = rng.random::<f64>() < suspend_rate;
        let mut states = vec![LifecycleState::Scheduled, LifecycleState::Started];
        if suspended {
            states.push(LifecycleState::Suspended);
            states.push(LifecycleState::Resumed);
        }
        states.push(if aborted {
            LifecycleState::Aborted
        } else {
            LifecycleState::Completed
        });
        for state in states {
            let mut e = EventLine::new("", 0, "execute", activity, executor, SYSTEM_ACTOR);
            e.event_stream = Some(state);
            self.events.push(e);
        }
        aborted
    }
}

/// Generates a synthetic workflow log from the config. Deterministic,
/// always valid, and mineable back to its ground truth on noise-free
/// settings.
pub fn generate(config: &GeneratorConfig) -> Result<WorkflowLog, GeneratorError> {
    let ctx = resolve(config)?;
    let templates = crate::protocol::builtin_templates();
    let template_of = |name: &str| {
        templates
            .iter()
            .find(|t| t.name == name)
            .expect("allowed protocols are built-ins")
    };

    let mut log = WorkflowLog::new();
    for actor in &config.actors {
        let mut registered = crate::model::Actor::new(actor.id.clone());
        if let Some(name) = &actor.name {
            registered.name = name.clone();
        }
        registered.roles = actor.roles.iter().cloned().collect();
        registered.org_unit = actor.org_unit.clone();
        log.roles.extend(actor.roles.iter().cloned());
        if let Some(unit) = &actor.org_unit {
            log.org_units.insert(unit.clone());
        }
        log.actors.insert(actor.id.clone(), registered);
    }

    let opts = EmitOptions {
        report_back_prob: config.report_back_prob,
        refuse_prob: 0.15,
        ..EmitOptions::default()
    };

    for (process_idx, process_spec) in config.processes.iter().enumerate() {
        let mut instances = Vec::new();
        for case_idx in 0..config.cases {
            let mut rng = case_rng(config.seed, process_idx as u64, case_idx);
            let case_id = format!("c{:05}", case_idx + 1);
            let protocol = weighted_choice(&config.protocol_mix, &mut rng).to_string();
            let activity = config.activities[case_idx as usize % config.activities.len()].clone();
            let mut builder = CaseBuilder { events: Vec::new() };

            match (&ctx, protocol.as_str()) {
                (StructureCtx::Hierarchy { edges }, "delegation") => {
                    let (boss, subordinate) = &edges[case_idx as usize % edges.len()];
                    let binding = Binding {
                        initiator: boss.clone(),
                        participants: vec![subordinate.clone()],
                        winner: None,
                    };
                    let emitted = emit_protocol_instance(
                        template_of("delegation"),
                        &binding,
                        &activity,
                        &mut rng,
                        &opts,
                    )?;
                    // delegate first, lifecycle, then the report-back.
                    let mut iter = emitted.events.into_iter();
                    builder.events.push(iter.next().expect("delegate event"));
                    builder.push_lifecycle(
                        &activity,
                        subordinate,
                        &mut rng,
                        config.abort_rate,
                        config.suspend_rate,
                    );
                    builder.events.extend(iter);
                }
                (StructureCtx::Coalition { members }, "request") => {
                    let i = case_idx as usize % members.len();
                    let from = members[i].clone();
                    let to = members[(i + 1) % members.len()].clone();
                    emit_request_exchange(&mut builder, &from, &to, &activity, &mut rng, config)?;
                }
                (StructureCtx::Coalition { members }, "vote") => {
                    let i = case_idx as usize % members.len();
                    let initiator = members[i].clone();
                    let participants: Vec<String> = members
                        .iter()
                        .filter(|m| **m != initiator)
                        .cloned()
                        .collect();
                    let binding = Binding {
                        initiator,
                        participants,
                        winner: None,
                    };
                    let emitted = emit_protocol_instance(
                        template_of("vote"),
                        &binding,
                        &activity,
                        &mut rng,
                        &opts,
                    )?;
                    builder.events.extend(emitted.events);
                }
                (StructureCtx::Federation { units, reps }, "request") => {
                    // Cross-unit traffic flows between representatives only;
                    // members talk to their own representative.
                    let u = case_idx as usize % units.len();
                    let v = (u + 1) % units.len();
                    let cross_activity = activity.clone();
                    let intra_activity = config.activities
                        [(case_idx as usize + 1) % config.activities.len()]
                    .clone();
                    let rep_u = reps[&units[u].0].clone();
                    let rep_v = reps[&units[v].0].clone();
                    emit_request_exchange(
                        &mut builder,
                        &rep_u,
                        &rep_v,
                        &cross_activity,
                        &mut rng,
                        config,
                    )?;
                    let members: Vec<&String> = units[u]
                        .1
                        .iter()
                        .filter(|m| **m != rep_u)
                        .collect();
                    if !members.is_empty() {
                        // Divide out the unit cycle so member selection does
                        // not alias with it.
                        let round = case_idx as usize / units.len();
                        let member = members[round % members.len()].clone();
                        emit_request_exchange(
                            &mut builder,
                            &member,
                            &rep_u,
                            &intra_activity,
                            &mut rng,
                            config,
                        )?;
                    }
                }
                (StructureCtx::Market { initiator, pool }, name @ ("contract-net" | "english-auction")) => {
                    let k = 2 + (rng.random_range(0..pool.len().min(4) - 1)) % (pool.len() - 1);
                    let mut invited: BTreeSet<usize> = BTreeSet::new();
                    invited.insert(case_idx as usize % pool.len());
                    while invited.len() < k.min(pool.len()) {
                        invited.insert(rng.random_range(0..pool.len()));
                    }
                    let participants: Vec<String> =
                        invited.iter().map(|&i| pool[i].clone()).collect();
                    let binding = Binding {
                        initiator: initiator.clone(),
                        participants,
                        winner: None,
                    };
                    let emitted = emit_protocol_instance(
                        template_of(name),
                        &binding,
                        &activity,
                        &mut rng,
                        &opts,
                    )?;
                    // Lifecycle starts before the winner's execute line.
                    let split = emitted.events.len() - 1;
                    let mut events = emitted.events;
                    let execute = events.split_off(split);
                    builder.events.extend(events);
                    if let Some(winner) = &emitted.executor {
                        // scheduled/started ahead of the execute line,
                        // terminal after it.
                        let mut tail = CaseBuilder { events: Vec::new() };
                        tail.push_lifecycle(
                            &activity,
                            winner,
                            &mut rng,
                            config.abort_rate,
                            config.suspend_rate,
                        );
                        let terminal = tail.events.pop().expect("terminal state");
                        builder.events.extend(tail.events);
                        builder.events.extend(execute);
                        builder.events.push(terminal);
                    } else {
                        builder.events.extend(execute);
                    }
                }
                (_, other) => {
                    return Err(invalid(format!(
                        "protocol `{other}` cannot be generated under a {} structure",
                        config.structure.kind_name()
                    )));
                }
            }

            // Assign case ids, dense seq and strictly increasing timestamps.
            let mut cursor = config.timestamp_base;
            for (n, event) in builder.events.iter_mut().enumerate() {
                event.case_id = case_id.clone();
                event.seq = n as u64;
                if let Some(ts) = cursor {
                    let step = (config.mean_step_secs as f64
                        * (0.5 + rng.random::<f64>()))
                    .max(1.0) as i64;
                    let next = ts + Duration::seconds(step.max(1));
                    event.timestamp = Some(next);
                    cursor = Some(next);
                }
            }
            if !builder.events.is_empty() {
                instances.push(ProcessInstance {
                    case_id,
                    events: builder.events,
                });
            }
        }
        if !instances.is_empty() {
            log.processes.push(Process {
                name: process_spec.name.clone(),
                instances,
            });
        }
    }

    if log.processes.is_empty() {
        // cases = 0: an empty log still carries no registries to mine.
        log.actors.clear();
        log.roles.clear();
        log.org_units.clear();
        log.documents.clear();
    }
    log.normalize();
    Ok(log)
}

/// One request/reply exchange plus the responder's lifecycle; the reply is
/// `failure` exactly when the occurrence aborts.
fn emit_request_exchange(
    builder: &mut CaseBuilder,
    from: &str,
    to: &str,
    activity: &str,
    rng: &mut ChaCha8Rng,
    config: &GeneratorConfig,
) -> Result<(), GeneratorError> {
    builder
        .events
        .push(EventLine::new("", 0, "request", activity, from, to));
    let aborted = builder.push_lifecycle(activity, to, rng, config.abort_rate, config.suspend_rate);
    let reply = if aborted { "failure" } else { "inform" };
    builder
        .events
        .push(EventLine::new("", 0, reply, activity, to, from));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::flat::serialize_flat;
    use crate::model::validate_log;
    use crate::protocol::builtin_templates;

    fn base_config() -> GeneratorConfig {
        GeneratorConfig {
            seed: 7,
            processes: default_processes(),
            actors: vec![
                ActorSpec { id: "mahdi".into(), name: None, roles: vec![], org_unit: None },
                ActorSpec { id: "salim".into(), name: None, roles: vec![], org_unit: None },
            ],
            structure: StructureSpec::StrictHierarchy { edges: None, branching: None },
            protocol_mix: [("delegation".to_string(), 1.0)].into(),
            cases: 1,
            activities: vec!["act-a".into()],
            timestamp_base: Some("2026-01-01T08:00:00Z".parse().unwrap()),
            mean_step_secs: 60,
            report_back_prob: 1.0,
            abort_rate: 0.0,
            suspend_rate: 0.0,
        }
    }

    #[test]
    fn delegation_case_shows_the_delegate_inform_pattern() {
        let log = generate(&base_config()).unwrap();
        assert!(validate_log(&log).is_clean());
        let events = &log.processes[0].instances[0].events;
        let interactions: Vec<(&str, &str, &str)> = events
            .iter()
            .filter(|e| !e.is_lifecycle())
            .map(|e| (e.performative.as_str(), e.initiator.as_str(), e.receiver.as_str()))
            .collect();
        assert_eq!(
            interactions,
            [("delegate", "mahdi", "salim"), ("inform", "salim", "mahdi")]
        );
    }

    #[test]
    fn zero_cases_gives_an_empty_log() {
        let mut config = base_config();
        config.cases = 0;
        let log = generate(&config).unwrap();
        assert_eq!(log.event_count(), 0);
        assert!(log.processes.is_empty());
    }

    #[test]
    fn same_seed_same_bytes_different_seed_different_bytes() {
        let config = base_config();
        let a = serialize_flat(&generate(&config).unwrap());
        let b = serialize_flat(&generate(&config).unwrap());
        assert_eq!(a, b);
        let mut other = base_config();
        other.seed += 1;
        let c = serialize_flat(&generate(&other).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn forced_winner_contract_net_matches_the_crisis_pattern() {
        let template = builtin_templates().into_iter().find(|t| t.name == "contract-net").unwrap();
        let binding = Binding {
            initiator: "malik".into(),
            participants: vec!["sami".into(), "amal".into()],
            winner: Some("amal".into()),
        };
        let mut rng = case_rng(1, 0, 0);
        let emitted =
            emit_protocol_instance(&template, &binding, "analysis", &mut rng, &EmitOptions::default())
                .unwrap();
        let perfs: Vec<&str> = emitted.events.iter().map(|e| e.performative.as_str()).collect();
        assert_eq!(
            perfs,
            ["cfp", "cfp", "propose", "propose", "accept-proposal", "reject-proposal", "execute"]
        );
        assert_eq!(emitted.executor.as_deref(), Some("amal"));
        let accept = &emitted.events[4];
        assert_eq!(accept.receiver, "amal");
    }

    #[test]
    fn vote_with_all_accept_ballots_has_nine_events() {
        let template = builtin_templates().into_iter().find(|t| t.name == "vote").unwrap();
        let binding = Binding {
            initiator: "i".into(),
            participants: vec!["p1".into(), "p2".into(), "p3".into()],
            winner: None,
        };
        let mut rng = case_rng(1, 0, 0);
        let opts = EmitOptions { ballot_accept_prob: 1.0, ..EmitOptions::default() };
        let emitted = emit_protocol_instance(&template, &binding, "poll", &mut rng, &opts).unwrap();
        assert_eq!(emitted.events.len(), 9);
        assert_eq!(
            emitted.events.iter().filter(|e| e.performative.as_str() == "accept-proposal").count(),
            3
        );
    }

    #[test]
    fn delegation_without_report_back_is_a_single_event() {
        let template = builtin_templates().into_iter().find(|t| t.name == "delegation").unwrap();
        let binding = Binding {
            initiator: "boss".into(),
            participants: vec!["sub".into()],
            winner: None,
        };
        let mut rng = case_rng(1, 0, 0);
        let opts = EmitOptions { report_back_prob: 0.0, ..EmitOptions::default() };
        let emitted = emit_protocol_instance(&template, &binding, "task", &mut rng, &opts).unwrap();
        assert_eq!(emitted.events.len(), 1);
        assert_eq!(emitted.events[0].performative.as_str(), "delegate");
    }

    #[test]
    fn binding_cardinality_is_enforced() {
        let template = builtin_templates().into_iter().find(|t| t.name == "delegation").unwrap();
        let binding = Binding {
            initiator: "boss".into(),
            participants: vec!["a".into(), "b".into()],
            winner: None,
        };
        let mut rng = case_rng(1, 0, 0);
        let err = emit_protocol_instance(&template, &binding, "task", &mut rng, &EmitOptions::default())
            .unwrap_err();
        assert!(matches!(err, GeneratorError::BindingCardinality { .. }));
    }

    #[test]
    fn incompatible_protocol_mix_is_rejected() {
        let mut config = base_config();
        config.protocol_mix = [("contract-net".to_string(), 1.0)].into();
        let err = generate(&config).unwrap_err();
        assert!(err.to_string().contains("contract-net"));
    }

    #[test]
    fn generated_logs_always_validate() {
        for seed in 0..5 {
            let mut config = base_config();
            config.seed = seed;
            config.cases = 12;
            config.abort_rate = 0.3;
            config.suspend_rate = 0.3;
            let log = generate(&config).unwrap();
            assert!(validate_log(&log).is_clean(), "seed {seed}");
        }
    }
}
