//! Shorthand constructors for unit tests.

use std::collections::{BTreeMap, BTreeSet};

use crate::machine::Cfsm;
use crate::model::{ActionLabel, Fsa, Message, Participant, StateId, SystemName, Transition};
use crate::semantics::{Configuration, SemLabel, System};

pub fn p(name: &str) -> Participant {
    Participant::new(name).unwrap()
}

pub fn msg(name: &str) -> Message {
    Message::new(name).unwrap()
}

pub fn st(name: &str) -> StateId {
    StateId::new(name).unwrap()
}

pub fn out(sender: &str, receiver: &str, m: &str) -> ActionLabel {
    ActionLabel::output(p(sender), p(receiver), msg(m)).unwrap()
}

pub fn inp(sender: &str, receiver: &str, m: &str) -> ActionLabel {
    ActionLabel::input(p(sender), p(receiver), msg(m)).unwrap()
}

pub fn tr(source: &str, label: ActionLabel, target: &str) -> Transition {
    Transition::new(st(source), label, st(target))
}

/// Builds an automaton from edge triples; states are inferred.
pub fn fsa<const N: usize>(initial: &str, edges: [(&str, ActionLabel, &str); N]) -> Fsa {
    let mut states: BTreeSet<StateId> = BTreeSet::new();
    states.insert(st(initial));
    let mut transitions = BTreeSet::new();
    for (source, label, target) in edges {
        states.insert(st(source));
        states.insert(st(target));
        transitions.insert(tr(source, label, target));
    }
    Fsa::new(states, st(initial), transitions).unwrap()
}

/// Builds a validated machine from edge triples.
pub fn cfsm<const N: usize>(
    subject: &str,
    initial: &str,
    edges: [(&str, ActionLabel, &str); N],
) -> Cfsm {
    Cfsm::new(p(subject), fsa(initial, edges)).unwrap()
}

/// Builds a validated system from whole machines.
pub fn sys<const N: usize>(name: &str, machines: [Cfsm; N]) -> System {
    let map = machines
        .into_iter()
        .map(|m| (m.subject().clone(), m))
        .collect();
    System::new(SystemName::new(name).unwrap(), map).unwrap()
}

/// Builds a validated configuration of `s` from (participant, state) pairs.
pub fn config(s: &System, entries: &[(&str, &str)]) -> Configuration {
    let map = entries
        .iter()
        .map(|(q, v)| (p(q), st(v)))
        .collect::<BTreeMap<_, _>>();
    s.configuration(map).unwrap()
}

pub fn interaction(sender: &str, receiver: &str, m: &str) -> SemLabel {
    SemLabel::interaction(p(sender), p(receiver), msg(m)).unwrap()
}

pub fn tau_step(actor: &str) -> SemLabel {
    SemLabel::tau_step(p(actor))
}

/// The four-machine relay: K picks m-to-C or n-to-D, the chosen peer
/// notifies E, and E acknowledges the other peer with s. Twelve reachable
/// configurations, two maximal runs, strongly lock free.
pub fn relay_system() -> System {
    sys(
        "relay",
        [
            cfsm(
                "K",
                "0",
                [
                    ("0", ActionLabel::Tau, "1"),
                    ("0", ActionLabel::Tau, "2"),
                    ("1", out("K", "C", "m"), "3"),
                    ("2", out("K", "D", "n"), "3"),
                ],
            ),
            cfsm(
                "C",
                "0",
                [
                    ("0", inp("K", "C", "m"), "1"),
                    ("0", inp("E", "C", "s"), "3"),
                    ("1", ActionLabel::Tau, "2"),
                    ("2", out("C", "E", "c"), "3"),
                ],
            ),
            cfsm(
                "D",
                "0",
                [
                    ("0", inp("K", "D", "n"), "1"),
                    ("0", inp("E", "D", "s"), "3"),
                    ("1", ActionLabel::Tau, "2"),
                    ("2", out("D", "E", "d"), "3"),
                ],
            ),
            cfsm(
                "E",
                "0",
                [
                    ("0", inp("C", "E", "c"), "4"),
                    ("0", inp("D", "E", "d"), "1"),
                    ("1", ActionLabel::Tau, "2"),
                    ("2", out("E", "C", "s"), "3"),
                    ("4", ActionLabel::Tau, "5"),
                    ("5", out("E", "D", "s"), "3"),
                ],
            ),
        ],
    )
}

pub fn fixture(name: &str) -> &'static str {
    match name {
        "ex_sem" => include_str!("../fixtures/ex_sem.sys"),
        "ex_gc_s1" => include_str!("../fixtures/ex_gc_s1.sys"),
        "ex_gc_s2" => include_str!("../fixtures/ex_gc_s2.sys"),
        "dlfree_s1" => include_str!("../fixtures/dlfree_s1.sys"),
        "dlfree_s2" => include_str!("../fixtures/dlfree_s2.sys"),
        "incompat_s1" => include_str!("../fixtures/incompat_s1.sys"),
        "incompat_s2" => include_str!("../fixtures/incompat_s2.sys"),
        "mixed_s1" => include_str!("../fixtures/mixed_s1.sys"),
        "mixed_s2" => include_str!("../fixtures/mixed_s2.sys"),
        "lfcex_s1" => include_str!("../fixtures/lfcex_s1.sys"),
        "lfcex_s2" => include_str!("../fixtures/lfcex_s2.sys"),
        "sync_s1" => include_str!("../fixtures/sync_s1.sys"),
        "sync_s2" => include_str!("../fixtures/sync_s2.sys"),
        "all_terminal" => include_str!("../fixtures/all_terminal.sys"),
        _ => panic!("unknown fixture {name}"),
    }
}
