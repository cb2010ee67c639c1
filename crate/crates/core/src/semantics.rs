//! Communicating systems and their synchronous semantics: configurations,
//! interaction labels, and bounded construction of the induced transition
//! system.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::machine::Cfsm;
use crate::model::{ActionLabel, Message, Participant, StateId, SystemName};

/// Default cap on explored configurations; exceeding it is a hard error.
pub const DEFAULT_MAX_CONFIGS: usize = 1_000_000;

/// Why a set of machines does not form a communicating system.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SystemViolation {
    /// The machine map is empty.
    Empty,
    /// Map key and machine owner disagree.
    NonLocalMachine { key: Participant, subject: Participant },
    /// A label names a participant that has no machine.
    DanglingParticipant {
        machine: Participant,
        label: ActionLabel,
        missing: Participant,
    },
}

impl fmt::Display for SystemViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemViolation::Empty => f.write_str("system has no machines"),
            SystemViolation::NonLocalMachine { key, subject } => {
                write!(f, "machine stored under {key} is owned by {subject}")
            }
            SystemViolation::DanglingParticipant {
                machine,
                label,
                missing,
            } => write!(
                f,
                "machine {machine} mentions {missing} in {label}, which has no machine"
            ),
        }
    }
}

/// A closed set of local machines, one per participant.
#[derive(Clone, PartialEq, Eq)]
pub struct System {
    name: SystemName,
    machines: BTreeMap<Participant, Cfsm>,
}

impl System {
    pub fn new(name: SystemName, machines: BTreeMap<Participant, Cfsm>) -> Result<Self> {
        validate_system(name, machines)
    }

    pub fn name(&self) -> &SystemName {
        &self.name
    }

    pub fn machines(&self) -> &BTreeMap<Participant, Cfsm> {
        &self.machines
    }

    pub fn machine(&self, p: &Participant) -> Result<&Cfsm> {
        self.machines
            .get(p)
            .ok_or_else(|| Error::UnknownParticipant(p.clone()))
    }

    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.machines.keys()
    }

    /// Every machine at its initial state.
    pub fn initial_configuration(&self) -> Configuration {
        Configuration(
            self.machines
                .iter()
                .map(|(p, m)| (p.clone(), m.fsa().initial().clone()))
                .collect(),
        )
    }

    /// Validates that `map` assigns a declared state to exactly the
    /// participants of this system.
    pub fn configuration(&self, map: BTreeMap<Participant, StateId>) -> Result<Configuration> {
        for p in self.machines.keys() {
            if !map.contains_key(p) {
                return Err(Error::ForeignConfiguration(format!(
                    "missing participant {p}"
                )));
            }
        }
        for (p, q) in &map {
            let m = self.machines.get(p).ok_or_else(|| {
                Error::ForeignConfiguration(format!("unexpected participant {p}"))
            })?;
            if !m.fsa().states().contains(q) {
                return Err(Error::ForeignConfiguration(format!(
                    "{q} is not a state of machine {p}"
                )));
            }
        }
        Ok(Configuration(map))
    }

    fn check_configuration(&self, s: &Configuration) -> Result<()> {
        self.configuration(s.0.clone()).map(|_| ())
    }
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.name)?;
        for m in self.machines.values() {
            write!(f, "{m:?}")?;
        }
        Ok(())
    }
}

/// Checks locality (key = owner) and closedness (every mentioned
/// participant has a machine); reports every violation.
pub fn validate_system(
    name: SystemName,
    machines: BTreeMap<Participant, Cfsm>,
) -> Result<System> {
    let mut violations = Vec::new();
    if machines.is_empty() {
        violations.push(SystemViolation::Empty);
    }
    for (key, m) in &machines {
        if key != m.subject() {
            violations.push(SystemViolation::NonLocalMachine {
                key: key.clone(),
                subject: m.subject().clone(),
            });
        }
        for t in m.fsa().transitions() {
            for q in t.label.participants() {
                if !machines.contains_key(q) {
                    violations.push(SystemViolation::DanglingParticipant {
                        machine: key.clone(),
                        label: t.label.clone(),
                        missing: q.clone(),
                    });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(System { name, machines })
    } else {
        violations.sort();
        violations.dedup();
        Err(Error::SystemInvalid(violations))
    }
}

/// One local state per participant; ordered lexicographically by the
/// participant-sorted entry list.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration(BTreeMap<Participant, StateId>);

impl Configuration {
    pub fn state(&self, p: &Participant) -> Result<&StateId> {
        self.0
            .get(p)
            .ok_or_else(|| Error::UnknownParticipant(p.clone()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Participant, &StateId)> {
        self.0.iter()
    }

    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.0.keys()
    }

    fn updated(&self, changes: &[(&Participant, &StateId)]) -> Configuration {
        let mut map = self.0.clone();
        for (p, q) in changes {
            map.insert((*p).clone(), (*q).clone());
        }
        Configuration(map)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (p, q)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}={q}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Label of one semantic step: a completed synchronous exchange, or one
/// participant's internal commitment. The actor on tau is recorded so runs
/// can be checked for involvement.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemLabel {
    Interaction {
        sender: Participant,
        receiver: Participant,
        msg: Message,
    },
    TauStep { actor: Participant },
}

impl SemLabel {
    pub fn interaction(sender: Participant, receiver: Participant, msg: Message) -> Result<Self> {
        if sender == receiver {
            return Err(Error::SelfCommunication(sender));
        }
        Ok(SemLabel::Interaction {
            sender,
            receiver,
            msg,
        })
    }

    pub fn tau_step(actor: Participant) -> Self {
        SemLabel::TauStep { actor }
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, SemLabel::TauStep { .. })
    }
}

impl fmt::Display for SemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemLabel::Interaction {
                sender,
                receiver,
                msg,
            } => write!(f, "{sender}->{receiver}:{msg}"),
            SemLabel::TauStep { actor } => write!(f, "tau({actor})"),
        }
    }
}

impl fmt::Debug for SemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// The participants a step involves: both endpoints of an interaction, the
/// acting participant of a tau step.
pub fn participants_of(label: &SemLabel) -> BTreeSet<&Participant> {
    match label {
        SemLabel::Interaction {
            sender, receiver, ..
        } => [sender, receiver].into_iter().collect(),
        SemLabel::TauStep { actor } => [actor].into_iter().collect(),
    }
}

/// Index of a configuration within its [`SemLts`].
pub type ConfigIx = usize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SemEdge {
    pub source: ConfigIx,
    pub label: SemLabel,
    pub target: ConfigIx,
}

/// The reachable fragment of a system's synchronous semantics.
/// Configurations are stored sorted; edges are sorted by (source, label,
/// target), so equal systems build identical values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemLts {
    configurations: Vec<Configuration>,
    initial: ConfigIx,
    edges: Vec<SemEdge>,
    outgoing: Vec<Vec<usize>>,
}

impl SemLts {
    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    pub fn config(&self, ix: ConfigIx) -> &Configuration {
        &self.configurations[ix]
    }

    pub fn initial(&self) -> ConfigIx {
        self.initial
    }

    pub fn initial_configuration(&self) -> &Configuration {
        &self.configurations[self.initial]
    }

    pub fn index_of(&self, s: &Configuration) -> Option<ConfigIx> {
        self.configurations.binary_search(s).ok()
    }

    pub fn edges(&self) -> &[SemEdge] {
        &self.edges
    }

    pub fn outgoing(&self, ix: ConfigIx) -> impl Iterator<Item = &SemEdge> {
        self.outgoing[ix].iter().map(move |&e| &self.edges[e])
    }

    pub fn out_degree(&self, ix: ConfigIx) -> usize {
        self.outgoing[ix].len()
    }

    /// One path from `from` matching `labels` exactly, if any exists.
    /// Returns the visited configuration indices, `labels.len() + 1` long.
    pub fn path_from(&self, from: ConfigIx, labels: &[SemLabel]) -> Option<Vec<ConfigIx>> {
        let mut path = vec![from];
        if self.extend_path(&mut path, labels) {
            Some(path)
        } else {
            None
        }
    }

    fn extend_path(&self, path: &mut Vec<ConfigIx>, rest: &[SemLabel]) -> bool {
        let Some(label) = rest.first() else {
            return true;
        };
        let here = *path.last().expect("path starts nonempty");
        for e in self.outgoing(here) {
            if e.label == *label {
                path.push(e.target);
                if self.extend_path(path, &rest[1..]) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_configs: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_configs: DEFAULT_MAX_CONFIGS,
        }
    }
}

pub fn build_semantics(sys: &System) -> Result<SemLts> {
    build_semantics_with(sys, BuildOptions::default())
}

/// Breadth-first exploration from the initial configuration under the two
/// step rules: a sender's output transition paired with a matching input
/// transition of the receiver, and any single machine's tau transition.
pub fn build_semantics_with(sys: &System, opts: BuildOptions) -> Result<SemLts> {
    let initial = sys.initial_configuration();
    let mut index: BTreeMap<Configuration, usize> = BTreeMap::new();
    let mut configs: Vec<Configuration> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut raw_edges: BTreeSet<(usize, SemLabel, usize)> = BTreeSet::new();

    let intern = |s: Configuration,
                      index: &mut BTreeMap<Configuration, usize>,
                      configs: &mut Vec<Configuration>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&ix) = index.get(&s) {
            return Ok(ix);
        }
        if configs.len() >= opts.max_configs {
            return Err(Error::StateExplosion {
                limit: opts.max_configs,
            });
        }
        let ix = configs.len();
        configs.push(s.clone());
        index.insert(s, ix);
        queue.push_back(ix);
        Ok(ix)
    };

    intern(initial, &mut index, &mut configs, &mut queue)?;

    while let Some(here) = queue.pop_front() {
        let source = configs[here].clone();
        for (actor, m) in sys.machines() {
            let local = source.state(actor).expect("configuration is total");
            for t in m.fsa().outgoing(local).cloned().collect::<Vec<_>>() {
                match &t.label {
                    ActionLabel::Tau => {
                        let next = source.updated(&[(actor, &t.target)]);
                        let ix = intern(next, &mut index, &mut configs, &mut queue)?;
                        raw_edges.insert((here, SemLabel::tau_step(actor.clone()), ix));
                    }
                    ActionLabel::Output {
                        sender,
                        receiver,
                        msg,
                    } => {
                        let peer = sys.machine(receiver)?;
                        let peer_state = source.state(receiver)?;
                        for u in peer.fsa().outgoing(peer_state) {
                            let matches = matches!(
                                &u.label,
                                ActionLabel::Input {
                                    sender: s2,
                                    receiver: r2,
                                    msg: m2,
                                } if s2 == sender && r2 == receiver && m2 == msg
                            );
                            if matches {
                                let next =
                                    source.updated(&[(actor, &t.target), (receiver, &u.target)]);
                                let ix = intern(next, &mut index, &mut configs, &mut queue)?;
                                raw_edges.insert((
                                    here,
                                    SemLabel::interaction(
                                        sender.clone(),
                                        receiver.clone(),
                                        msg.clone(),
                                    )?,
                                    ix,
                                ));
                            }
                        }
                    }
                    ActionLabel::Input { .. } => {}
                }
            }
        }
    }

    // Renumber into lexicographic configuration order for stable output.
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by(|&a, &b| configs[a].cmp(&configs[b]));
    let mut rank = vec![0usize; configs.len()];
    for (new_ix, &old_ix) in order.iter().enumerate() {
        rank[old_ix] = new_ix;
    }
    let mut sorted_configs = Vec::with_capacity(configs.len());
    for &old_ix in &order {
        sorted_configs.push(configs[old_ix].clone());
    }
    let mut edges: Vec<SemEdge> = raw_edges
        .into_iter()
        .map(|(s, label, t)| SemEdge {
            source: rank[s],
            label,
            target: rank[t],
        })
        .collect();
    edges.sort();
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); sorted_configs.len()];
    for (i, e) in edges.iter().enumerate() {
        outgoing[e.source].push(i);
    }

    Ok(SemLts {
        configurations: sorted_configs,
        initial: rank[0],
        edges,
        outgoing,
    })
}

/// The participants whose local state has at least one outgoing transition
/// in their own machine, whether or not any semantic step is possible.
pub fn enabled_participants(sys: &System, s: &Configuration) -> Result<BTreeSet<Participant>> {
    sys.check_configuration(s)?;
    let mut out = BTreeSet::new();
    for (p, m) in sys.machines() {
        let local = s.state(p)?;
        if m.fsa().outgoing(local).next().is_some() {
            out.insert(p.clone());
        }
    }
    Ok(out)
}
