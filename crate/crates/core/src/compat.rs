//! Compatibility of two machines once partner identities are blurred away:
//! project both to bare input/output labels, then compute the greatest
//! relation matching every output with a dual input, closed under tau, with
//! terminal states aligned. Unmatched inputs are deliberately allowed.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::machine::Cfsm;
use crate::model::{ActionLabel, Message, StateId};

/// A communication label with the partner erased.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IoLabel {
    In(Message),
    Out(Message),
    Tau,
}

impl fmt::Display for IoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoLabel::In(m) => write!(f, "?{m}"),
            IoLabel::Out(m) => write!(f, "!{m}"),
            IoLabel::Tau => f.write_str("tau"),
        }
    }
}

impl fmt::Debug for IoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub fn dual_label(l: &IoLabel) -> IoLabel {
    match l {
        IoLabel::In(m) => IoLabel::Out(m.clone()),
        IoLabel::Out(m) => IoLabel::In(m.clone()),
        IoLabel::Tau => IoLabel::Tau,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IoTransition {
    pub source: StateId,
    pub label: IoLabel,
    pub target: StateId,
}

/// The io-projection of a machine: same states, same initial state, same
/// graph shape, labels reduced to polarity and message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoFsa {
    states: BTreeSet<StateId>,
    initial: StateId,
    transitions: BTreeSet<IoTransition>,
}

impl IoFsa {
    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn initial(&self) -> &StateId {
        &self.initial
    }

    pub fn transitions(&self) -> &BTreeSet<IoTransition> {
        &self.transitions
    }

    pub fn outgoing<'a>(&'a self, state: &'a StateId) -> impl Iterator<Item = &'a IoTransition> {
        self.transitions.iter().filter(move |t| t.source == *state)
    }

    pub fn is_terminal(&self, state: &StateId) -> bool {
        self.outgoing(state).next().is_none()
    }
}

pub fn io_projection(m: &Cfsm) -> IoFsa {
    let fsa = m.fsa();
    let transitions = fsa
        .transitions()
        .iter()
        .map(|t| IoTransition {
            source: t.source.clone(),
            label: match &t.label {
                ActionLabel::Input { msg, .. } => IoLabel::In(msg.clone()),
                ActionLabel::Output { msg, .. } => IoLabel::Out(msg.clone()),
                ActionLabel::Tau => IoLabel::Tau,
            },
            target: t.target.clone(),
        })
        .collect();
    IoFsa {
        states: fsa.states().clone(),
        initial: fsa.initial().clone(),
        transitions,
    }
}

/// A relation between states of two machines in which every pair satisfies
/// the five compatibility clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoCorrespondence {
    pairs: BTreeSet<(StateId, StateId)>,
}

impl IoCorrespondence {
    pub fn pairs(&self) -> &BTreeSet<(StateId, StateId)> {
        &self.pairs
    }

    pub fn contains(&self, left: &StateId, right: &StateId) -> bool {
        self.pairs.contains(&(left.clone(), right.clone()))
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// Does (q, q') satisfy all clauses relative to `relation`?
///
/// 1. q terminal iff q' terminal;
/// 2. every output !m of q is matched by some input ?m of q' with related
///    successors, and 3. vice versa;
/// 4. every tau successor r of q keeps (r, q') related, and 5. vice versa.
fn pair_ok(
    left: &IoFsa,
    right: &IoFsa,
    q: &StateId,
    q2: &StateId,
    related: impl Fn(&StateId, &StateId) -> bool,
) -> bool {
    if left.is_terminal(q) != right.is_terminal(q2) {
        return false;
    }
    for t in left.outgoing(q) {
        match &t.label {
            IoLabel::Out(m) => {
                let matched = right.outgoing(q2).any(|u| {
                    u.label == IoLabel::In(m.clone()) && related(&t.target, &u.target)
                });
                if !matched {
                    return false;
                }
            }
            IoLabel::Tau => {
                if !related(&t.target, q2) {
                    return false;
                }
            }
            IoLabel::In(_) => {}
        }
    }
    for u in right.outgoing(q2) {
        match &u.label {
            IoLabel::Out(m) => {
                let matched = left.outgoing(q).any(|t| {
                    t.label == IoLabel::In(m.clone()) && related(&t.target, &u.target)
                });
                if !matched {
                    return false;
                }
            }
            IoLabel::Tau => {
                if !related(q, &u.target) {
                    return false;
                }
            }
            IoLabel::In(_) => {}
        }
    }
    true
}

/// The union of all io-correspondences between the two machines, computed
/// by deleting violating pairs from the full cross product until nothing
/// changes. Monotone, hence at most |S1| * |S2| sweeps.
pub fn greatest_io_correspondence(m1: &Cfsm, m2: &Cfsm) -> IoCorrespondence {
    let left = io_projection(m1);
    let right = io_projection(m2);
    let mut pairs: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    for q in left.states() {
        for q2 in right.states() {
            pairs.insert((q.clone(), q2.clone()));
        }
    }
    let bound = left.states().len() * right.states().len() + 1;
    let mut sweeps = 0;
    loop {
        let before = pairs.len();
        let current = pairs.clone();
        pairs.retain(|(q, q2)| {
            pair_ok(&left, &right, q, q2, |a, b| {
                current.contains(&(a.clone(), b.clone()))
            })
        });
        sweeps += 1;
        if pairs.len() == before {
            break;
        }
        debug_assert!(sweeps <= bound, "deletion must terminate in |S1|*|S2| sweeps");
    }
    IoCorrespondence { pairs }
}

/// True iff the initial states are related; the greatest correspondence is
/// returned as the certificate either way.
pub fn check_compatibility(m1: &Cfsm, m2: &Cfsm) -> (bool, IoCorrespondence) {
    let relation = greatest_io_correspondence(m1, m2);
    let ok = relation.contains(m1.fsa().initial(), m2.fsa().initial());
    (ok, relation)
}

/// Independent clause-by-clause re-validation of a certificate.
pub fn validate_correspondence(
    m1: &Cfsm,
    m2: &Cfsm,
    relation: &IoCorrespondence,
) -> Result<()> {
    let left = io_projection(m1);
    let right = io_projection(m2);
    for (q, q2) in relation.pairs() {
        if !left.states().contains(q) {
            return Err(Error::UnknownState(q.clone()));
        }
        if !right.states().contains(q2) {
            return Err(Error::UnknownState(q2.clone()));
        }
        if !pair_ok(&left, &right, q, q2, |a, b| {
            relation.pairs.contains(&(a.clone(), b.clone()))
        }) {
            return Err(Error::InternalInconsistency(format!(
                "certificate pair ({q}, {q2}) violates a compatibility clause"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActionLabel;
    use crate::testutil::*;

    fn pair_set(entries: &[(&str, &str)]) -> BTreeSet<(StateId, StateId)> {
        entries.iter().map(|(a, b)| (st(a), st(b))).collect()
    }

    // The two-input interface machine and its committed dual.
    fn front_h() -> Cfsm {
        cfsm(
            "H",
            "0",
            [("0", inp("A", "H", "m"), "1"), ("0", inp("B", "H", "n"), "1")],
        )
    }

    fn back_k() -> Cfsm {
        cfsm(
            "K",
            "0",
            [
                ("0", ActionLabel::Tau, "1"),
                ("0", ActionLabel::Tau, "2"),
                ("1", out("K", "C", "m"), "3"),
                ("2", out("K", "D", "n"), "3"),
            ],
        )
    }

    #[test]
    fn io_projection_erases_partners_only() {
        let io = io_projection(&front_h());
        assert_eq!(io.states(), front_h().fsa().states());
        assert_eq!(io.initial(), &st("0"));
        let labels: Vec<_> = io.transitions().iter().map(|t| t.label.clone()).collect();
        assert_eq!(labels, vec![IoLabel::In(msg("m")), IoLabel::In(msg("n"))]);
        let io = io_projection(&back_k());
        assert!(io
            .transitions()
            .iter()
            .any(|t| t.label == IoLabel::Out(msg("m"))));
        assert_eq!(io.transitions().len(), back_k().fsa().transitions().len());
    }

    #[test]
    fn dual_swaps_polarity_and_is_an_involution() {
        assert_eq!(dual_label(&IoLabel::Out(msg("m"))), IoLabel::In(msg("m")));
        assert_eq!(dual_label(&IoLabel::Tau), IoLabel::Tau);
        for l in [IoLabel::In(msg("x")), IoLabel::Out(msg("x")), IoLabel::Tau] {
            assert_eq!(dual_label(&dual_label(&l)), l);
        }
    }

    #[test]
    fn front_and_back_interfaces_are_compatible() {
        let (ok, relation) = check_compatibility(&front_h(), &back_k());
        assert!(ok);
        assert_eq!(
            relation.pairs(),
            &pair_set(&[("0", "0"), ("0", "1"), ("0", "2"), ("1", "3")])
        );
        validate_correspondence(&front_h(), &back_k(), &relation).unwrap();
    }

    #[test]
    fn unmatched_inputs_are_allowed() {
        // The receiving side also accepts z, which nobody ever sends.
        let h = cfsm(
            "H",
            "0",
            [("0", inp("A", "H", "m"), "1"), ("0", inp("B", "H", "z"), "1")],
        );
        let k = cfsm(
            "K",
            "0",
            [("0", ActionLabel::Tau, "1"), ("1", out("K", "C", "m"), "2")],
        );
        let (ok, _) = check_compatibility(&h, &k);
        assert!(ok);
    }

    #[test]
    fn missing_input_for_an_output_is_incompatible() {
        // One side commits to x, the other only accepts y.
        let h = cfsm(
            "H",
            "0",
            [("0", ActionLabel::Tau, "1"), ("1", out("H", "A", "x"), "2")],
        );
        let k = cfsm("K", "0", [("0", inp("C", "K", "y"), "1")]);
        let (ok, relation) = check_compatibility(&h, &k);
        assert!(!ok);
        assert!(!relation.contains(&st("0"), &st("0")));
        // The surviving pairs still form a valid (smaller) correspondence.
        validate_correspondence(&h, &k, &relation).unwrap();
    }

    #[test]
    fn output_machine_is_incompatible_with_itself() {
        let m = cfsm(
            "H",
            "0",
            [("0", ActionLabel::Tau, "1"), ("1", out("H", "A", "m"), "2")],
        );
        let m2 = cfsm(
            "K",
            "0",
            [("0", ActionLabel::Tau, "1"), ("1", out("K", "B", "m"), "2")],
        );
        let (ok, _) = check_compatibility(&m, &m2);
        assert!(!ok);
    }

    #[test]
    fn terminal_only_machines_are_compatible() {
        let m = cfsm("P", "0", []);
        let m2 = cfsm("Q", "0", []);
        let (ok, relation) = check_compatibility(&m, &m2);
        assert!(ok);
        assert_eq!(relation.len(), 1);
    }

    #[test]
    fn compatibility_is_symmetric() {
        let cases = [
            (front_h(), back_k()),
            (
                cfsm(
                    "H",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("H", "A", "x"), "2")],
                ),
                cfsm("K", "0", [("0", inp("C", "K", "y"), "1")]),
            ),
            (cfsm("P", "0", []), cfsm("Q", "0", [])),
        ];
        for (a, b) in cases {
            let (ab, rel_ab) = check_compatibility(&a, &b);
            let (ba, rel_ba) = check_compatibility(&b, &a);
            assert_eq!(ab, ba);
            let flipped: BTreeSet<_> = rel_ba
                .pairs()
                .iter()
                .map(|(x, y)| (y.clone(), x.clone()))
                .collect();
            assert_eq!(rel_ab.pairs(), &flipped);
        }
    }

    // Brute-force maximality: the greatest correspondence must equal the
    // union of every relation that satisfies the clauses on its own.
    #[test]
    fn fixpoint_is_the_union_of_all_correspondences() {
        let m1 = front_h();
        let m2 = back_k();
        let left = io_projection(&m1);
        let right = io_projection(&m2);
        let all_pairs: Vec<(StateId, StateId)> = left
            .states()
            .iter()
            .flat_map(|q| right.states().iter().map(move |q2| (q.clone(), q2.clone())))
            .collect();
        assert!(all_pairs.len() <= 16, "bitmask enumeration stays cheap");
        let mut union: BTreeSet<(StateId, StateId)> = BTreeSet::new();
        for mask in 0u32..(1 << all_pairs.len()) {
            let subset: BTreeSet<(StateId, StateId)> = all_pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| p.clone())
                .collect();
            let valid = subset.iter().all(|(q, q2)| {
                pair_ok(&left, &right, q, q2, |a, b| {
                    subset.contains(&(a.clone(), b.clone()))
                })
            });
            if valid {
                union.extend(subset);
            }
        }
        let gfp = greatest_io_correspondence(&m1, &m2);
        assert_eq!(gfp.pairs(), &union);
    }

    #[test]
    fn tampered_certificates_are_rejected() {
        let (ok, mut relation) = check_compatibility(&front_h(), &back_k());
        assert!(ok);
        // Claim the terminal state corresponds to a committed state.
        relation.pairs.insert((st("1"), st("1")));
        assert!(validate_correspondence(&front_h(), &back_k(), &relation).is_err());
    }
}
