//! Shared vocabulary: participants, messages, action labels, and the
//! underlying finite-state automata all higher layers operate on.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

fn valid_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

macro_rules! token_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self> {
                let value = value.into();
                if valid_token(&value) {
                    Ok(Self(value))
                } else {
                    Err(Error::InvalidToken(value))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Self::new(s)
            }
        }
    };
}

token_newtype! {
    /// Name of a communicating participant.
    Participant
}

token_newtype! {
    /// Message payload identifier.
    Message
}

token_newtype! {
    /// Opaque state identifier; ordered lexicographically.
    StateId
}

token_newtype! {
    /// Name of a whole system of machines.
    SystemName
}

/// Transition label of a local machine. The subject of an output is the
/// sender, the subject of an input is the receiver; tau has no subject.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionLabel {
    Input {
        sender: Participant,
        receiver: Participant,
        msg: Message,
    },
    Output {
        sender: Participant,
        receiver: Participant,
        msg: Message,
    },
    Tau,
}

impl ActionLabel {
    pub fn input(sender: Participant, receiver: Participant, msg: Message) -> Result<Self> {
        if sender == receiver {
            return Err(Error::SelfCommunication(sender));
        }
        Ok(ActionLabel::Input {
            sender,
            receiver,
            msg,
        })
    }

    pub fn output(sender: Participant, receiver: Participant, msg: Message) -> Result<Self> {
        if sender == receiver {
            return Err(Error::SelfCommunication(sender));
        }
        Ok(ActionLabel::Output {
            sender,
            receiver,
            msg,
        })
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, ActionLabel::Tau)
    }

    pub fn is_input(&self) -> bool {
        matches!(self, ActionLabel::Input { .. })
    }

    pub fn is_output(&self) -> bool {
        matches!(self, ActionLabel::Output { .. })
    }

    /// The participant performing the action: sender for outputs, receiver
    /// for inputs, none for tau.
    pub fn subject(&self) -> Option<&Participant> {
        match self {
            ActionLabel::Input { receiver, .. } => Some(receiver),
            ActionLabel::Output { sender, .. } => Some(sender),
            ActionLabel::Tau => None,
        }
    }

    /// Both endpoints of a communication label, empty for tau.
    pub fn participants(&self) -> BTreeSet<&Participant> {
        match self {
            ActionLabel::Input {
                sender, receiver, ..
            }
            | ActionLabel::Output {
                sender, receiver, ..
            } => [sender, receiver].into_iter().collect(),
            ActionLabel::Tau => BTreeSet::new(),
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Input {
                sender,
                receiver,
                msg,
            } => write!(f, "{sender}->{receiver}?{msg}"),
            ActionLabel::Output {
                sender,
                receiver,
                msg,
            } => write!(f, "{sender}->{receiver}!{msg}"),
            ActionLabel::Tau => f.write_str("tau"),
        }
    }
}

impl fmt::Debug for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// One labelled transition. The derived order (source, label, target) is the
/// canonical edge order used everywhere output must be stable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub source: StateId,
    pub label: ActionLabel,
    pub target: StateId,
}

impl Transition {
    pub fn new(source: StateId, label: ActionLabel, target: StateId) -> Self {
        Transition {
            source,
            label,
            target,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} --{}--> {}", self.source, self.label, self.target)
    }
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Finite-state automaton over action labels. Transitions form a set; both
/// endpoints of every transition must be declared states.
#[derive(Clone, PartialEq, Eq)]
pub struct Fsa {
    states: BTreeSet<StateId>,
    initial: StateId,
    transitions: BTreeSet<Transition>,
}

impl Fsa {
    pub fn new(
        states: BTreeSet<StateId>,
        initial: StateId,
        transitions: BTreeSet<Transition>,
    ) -> Result<Self> {
        if !states.contains(&initial) {
            return Err(Error::DanglingInitial(initial));
        }
        for t in &transitions {
            if !states.contains(&t.source) {
                return Err(Error::DanglingEndpoint(t.source.clone()));
            }
            if !states.contains(&t.target) {
                return Err(Error::DanglingEndpoint(t.target.clone()));
            }
        }
        Ok(Fsa {
            states,
            initial,
            transitions,
        })
    }

    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn initial(&self) -> &StateId {
        &self.initial
    }

    pub fn transitions(&self) -> &BTreeSet<Transition> {
        &self.transitions
    }

    /// Transitions leaving `state`, in canonical order.
    pub fn outgoing<'a>(&'a self, state: &'a StateId) -> impl Iterator<Item = &'a Transition> {
        self.transitions.iter().filter(move |t| t.source == *state)
    }

    /// Transitions entering `state`.
    pub fn incoming<'a>(&'a self, state: &'a StateId) -> impl Iterator<Item = &'a Transition> {
        self.transitions.iter().filter(move |t| t.target == *state)
    }
}

impl fmt::Debug for Fsa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fsa init={}", self.initial)?;
        for t in &self.transitions {
            writeln!(f, "  {t}")?;
        }
        Ok(())
    }
}

/// All states reachable from `from` (inclusive), sorted.
pub fn reachable_states(fsa: &Fsa, from: &StateId) -> Result<BTreeSet<StateId>> {
    if !fsa.states().contains(from) {
        return Err(Error::UnknownState(from.clone()));
    }
    let mut seen: BTreeSet<StateId> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(from.clone());
    queue.push_back(from.clone());
    while let Some(q) = queue.pop_front() {
        for t in fsa.outgoing(&q) {
            if seen.insert(t.target.clone()) {
                queue.push_back(t.target.clone());
            }
        }
    }
    Ok(seen)
}

/// Outgoing (label, target) pairs of `state`, ordered by label then target.
pub fn successors(fsa: &Fsa, state: &StateId) -> Result<Vec<(ActionLabel, StateId)>> {
    if !fsa.states().contains(state) {
        return Err(Error::UnknownState(state.clone()));
    }
    let mut out: Vec<(ActionLabel, StateId)> = fsa
        .outgoing(state)
        .map(|t| (t.label.clone(), t.target.clone()))
        .collect();
    out.sort();
    Ok(out)
}
