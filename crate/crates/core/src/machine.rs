//! Local machines: well-formedness of the asymmetric discipline, state
//! taxonomy, determinism profiles, and the rewrite that retrofits tau
//! guards onto bare-output machines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ActionLabel, Fsa, Participant, StateId, Transition};

/// Why a machine fails the asymmetric well-formedness rules.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CfsmViolationKind {
    /// An output's source state lacks a single incoming tau transition.
    OutputWithoutTauGuard,
    /// A tau target does not have exactly one outgoing transition that is an
    /// output.
    TauTargetNotUniqueOutput,
    /// Outputs and taus may not loop on a single state.
    SelfLoopOnTauOrOutput,
    /// A communication label whose subject is not the machine's owner.
    NonLocalLabel,
    /// An output's source state has more than one incoming transition.
    MultipleIncomingToOutputSource,
}

impl fmt::Display for CfsmViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CfsmViolationKind::OutputWithoutTauGuard => "output-without-tau-guard",
            CfsmViolationKind::TauTargetNotUniqueOutput => "tau-target-not-unique-output",
            CfsmViolationKind::SelfLoopOnTauOrOutput => "self-loop-on-tau-or-output",
            CfsmViolationKind::NonLocalLabel => "non-local-label",
            CfsmViolationKind::MultipleIncomingToOutputSource => {
                "multiple-incoming-to-output-source"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CfsmViolation {
    pub kind: CfsmViolationKind,
    pub transition: Transition,
}

impl fmt::Display for CfsmViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.transition)
    }
}

/// A validated local machine owned by `subject`.
#[derive(Clone, PartialEq, Eq)]
pub struct Cfsm {
    subject: Participant,
    fsa: Fsa,
}

impl Cfsm {
    /// Validates the asymmetric discipline; reports every violation.
    pub fn new(subject: Participant, fsa: Fsa) -> Result<Self> {
        match validate_cfsm(&subject, &fsa) {
            Ok(()) => Ok(Cfsm { subject, fsa }),
            Err(violations) => Err(Error::MachineInvalid {
                subject,
                violations,
            }),
        }
    }

    pub fn subject(&self) -> &Participant {
        &self.subject
    }

    pub fn fsa(&self) -> &Fsa {
        &self.fsa
    }

    /// Every participant named by some label, the owner included only if a
    /// label mentions it.
    pub fn mentioned_participants(&self) -> BTreeSet<Participant> {
        let mut out = BTreeSet::new();
        for t in self.fsa.transitions() {
            for q in t.label.participants() {
                out.insert(q.clone());
            }
        }
        out
    }
}

impl fmt::Debug for Cfsm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "machine {}\n{:?}", self.subject, self.fsa)
    }
}

/// Checks the asymmetric well-formedness rules for `subject`:
/// communication labels must have `subject` as their subject, outputs and
/// taus must not self-loop, every output source must have exactly one
/// incoming transition and it must be tau, and every tau target must have
/// exactly one outgoing transition which is an output.
///
/// All violations are reported, each with its offending transition.
pub fn validate_cfsm(
    subject: &Participant,
    fsa: &Fsa,
) -> std::result::Result<(), Vec<CfsmViolation>> {
    let mut violations = Vec::new();
    let mut push = |kind: CfsmViolationKind, t: &Transition| {
        violations.push(CfsmViolation {
            kind,
            transition: t.clone(),
        });
    };

    let mut incoming: BTreeMap<&StateId, Vec<&Transition>> = BTreeMap::new();
    for t in fsa.transitions() {
        incoming.entry(&t.target).or_default().push(t);
    }

    for t in fsa.transitions() {
        match &t.label {
            ActionLabel::Tau => {
                if t.source == t.target {
                    push(CfsmViolationKind::SelfLoopOnTauOrOutput, t);
                }
                let outgoing: Vec<_> = fsa.outgoing(&t.target).collect();
                if outgoing.len() != 1 || !outgoing[0].label.is_output() {
                    push(CfsmViolationKind::TauTargetNotUniqueOutput, t);
                }
            }
            ActionLabel::Output { .. } => {
                if t.label.subject() != Some(subject) {
                    push(CfsmViolationKind::NonLocalLabel, t);
                }
                if t.source == t.target {
                    push(CfsmViolationKind::SelfLoopOnTauOrOutput, t);
                }
                let into_source = incoming.get(&t.source).map_or(&[][..], Vec::as_slice);
                match into_source {
                    [] => push(CfsmViolationKind::OutputWithoutTauGuard, t),
                    [guard] => {
                        if !guard.label.is_tau() {
                            push(CfsmViolationKind::OutputWithoutTauGuard, t);
                        }
                    }
                    _ => push(CfsmViolationKind::MultipleIncomingToOutputSource, t),
                }
            }
            ActionLabel::Input { .. } => {
                if t.label.subject() != Some(subject) {
                    push(CfsmViolationKind::NonLocalLabel, t);
                }
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        violations.sort();
        violations.dedup();
        Err(violations)
    }
}

/// Outgoing-shape taxonomy of one state. Exactly one of `terminal`,
/// `sending`, `receiving`, `mixed` holds; the asymmetric flags are false on
/// terminal states and partition the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateClass {
    pub terminal: bool,
    pub sending: bool,
    pub receiving: bool,
    pub mixed: bool,
    pub asymmetric_sending: bool,
    pub asymmetric_receiving: bool,
    pub asymmetric_mixed: bool,
}

/// Classifies `state` by the labels leaving it. A state is sending when
/// every outgoing transition belongs to the sending side (tau commitments
/// and outputs), receiving when all outgoing are inputs, and mixed when
/// inputs coexist with tau or output transitions.
pub fn classify_state(fsa: &Fsa, state: &StateId) -> Result<StateClass> {
    if !fsa.states().contains(state) {
        return Err(Error::UnknownState(state.clone()));
    }
    let outgoing: Vec<&Transition> = fsa.outgoing(state).collect();
    let terminal = outgoing.is_empty();
    let all_send_side = outgoing.iter().all(|t| !t.label.is_input());
    let all_inputs = outgoing.iter().all(|t| t.label.is_input());
    let sending = !terminal && all_send_side;
    let receiving = !terminal && all_inputs;
    let mixed = !terminal && !all_send_side && !all_inputs;
    Ok(StateClass {
        terminal,
        sending,
        receiving,
        mixed,
        asymmetric_sending: sending,
        asymmetric_receiving: receiving,
        asymmetric_mixed: mixed,
    })
}

/// Summary facts about one machine used by the composability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineProfile {
    /// No state has two inputs with the same message but different targets.
    pub in_deterministic: bool,
    /// No state has two tau-then-output chains with the same message and
    /// different post-output targets.
    pub out_deterministic: bool,
    /// Every state has at most one outgoing transition.
    pub sequential: bool,
    pub has_asymmetric_mixed: bool,
    pub terminal_states: BTreeSet<StateId>,
}

pub fn machine_profile(m: &Cfsm) -> MachineProfile {
    let fsa = m.fsa();
    let mut in_deterministic = true;
    let mut out_deterministic = true;
    let mut sequential = true;
    let mut has_asymmetric_mixed = false;
    let mut terminal_states = BTreeSet::new();

    for q in fsa.states() {
        let outgoing: Vec<&Transition> = fsa.outgoing(q).collect();
        if outgoing.is_empty() {
            terminal_states.insert(q.clone());
        }
        if outgoing.len() > 1 {
            sequential = false;
        }
        let class = classify_state(fsa, q).expect("state is declared");
        if class.asymmetric_mixed {
            has_asymmetric_mixed = true;
        }

        // Inputs with equal message must agree on the target, senders aside.
        let mut input_target: BTreeMap<&crate::model::Message, &StateId> = BTreeMap::new();
        for t in &outgoing {
            if let ActionLabel::Input { msg, .. } = &t.label {
                if *input_target.entry(msg).or_insert(&t.target) != &t.target {
                    in_deterministic = false;
                }
            }
        }

        // Tau-then-output chains with equal message must agree on the
        // post-output target, receivers aside.
        let mut output_target: BTreeMap<&crate::model::Message, &StateId> = BTreeMap::new();
        for t in &outgoing {
            if t.label.is_tau() {
                for u in fsa.outgoing(&t.target) {
                    if let ActionLabel::Output { msg, .. } = &u.label {
                        if *output_target.entry(msg).or_insert(&u.target) != &u.target {
                            out_deterministic = false;
                        }
                    }
                }
            }
        }
    }

    MachineProfile {
        in_deterministic,
        out_deterministic,
        sequential,
        has_asymmetric_mixed,
        terminal_states,
    }
}

/// Reroutes every bare output `p --!--> r` of a tau-free, subject-local
/// machine through a fresh commitment state: `p --tau--> p_outN --!--> r`,
/// numbering the fresh states in label order. Inputs are untouched and the
/// result satisfies the full asymmetric discipline.
pub fn normalize_outputs(fsa: &Fsa, subject: &Participant) -> Result<Cfsm> {
    let precondition = |reason: String| Error::NormalizePrecondition {
        subject: subject.clone(),
        reason,
    };
    for t in fsa.transitions() {
        match &t.label {
            ActionLabel::Tau => {
                return Err(precondition(format!(
                    "machine already contains a tau transition ({t})"
                )));
            }
            ActionLabel::Output { .. } | ActionLabel::Input { .. } => {
                if t.label.subject() != Some(subject) {
                    return Err(precondition(format!("non-local label ({t})")));
                }
                if t.label.is_output() && t.source == t.target {
                    return Err(precondition(format!("output self-loop ({t})")));
                }
            }
        }
    }

    let mut states = fsa.states().clone();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();
    for q in fsa.states() {
        let outputs: Vec<&Transition> = fsa
            .outgoing(q)
            .filter(|t| t.label.is_output())
            .collect();
        for (i, t) in outputs.iter().enumerate() {
            let mut name = format!("{q}_out{i}");
            while states.contains(&StateId::new(name.as_str())?) {
                name.push('\'');
            }
            let fresh = StateId::new(name)?;
            states.insert(fresh.clone());
            transitions.insert(Transition::new(q.clone(), ActionLabel::Tau, fresh.clone()));
            transitions.insert(Transition::new(fresh, t.label.clone(), t.target.clone()));
        }
        for t in fsa.outgoing(q).filter(|t| t.label.is_input()) {
            transitions.insert(t.clone());
        }
    }

    let rewritten = Fsa::new(states, fsa.initial().clone(), transitions)?;
    Cfsm::new(subject.clone(), rewritten)
}
