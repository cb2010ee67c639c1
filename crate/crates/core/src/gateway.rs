//! Turning a machine into a gateway that relays every message between its
//! own system and a peer gateway in another system, plus everything needed
//! to reason about the result: the composability check, system composition,
//! configuration projections back onto the components, and the state map
//! aligning the two gateways' progress.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::compat::{check_compatibility, greatest_io_correspondence, IoCorrespondence};
use crate::error::{Error, Result};
use crate::machine::{machine_profile, Cfsm, MachineProfile};
use crate::model::{ActionLabel, Fsa, Message, Participant, StateId, SystemName, Transition};
use crate::semantics::{build_semantics, ConfigIx, Configuration, SemLts, System};

/// Which rewrite step spawned a fresh gateway state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FreshStateOrigin {
    /// Between the new peer input and the tau edge of an output segment:
    /// the gateway is about to commit the forwarded message locally.
    ForwardPrefix {
        tau_source: StateId,
        tau_target: StateId,
        msg: Message,
    },
    /// Directly after an original input, before the relaying tau.
    InputEntry {
        input_source: StateId,
        input_target: StateId,
        sender: Participant,
        msg: Message,
    },
    /// Committed to forward a received message to the peer.
    OutputPending {
        input_source: StateId,
        input_target: StateId,
        sender: Participant,
        msg: Message,
    },
}

/// A machine rewritten to relay through a peer, with the bookkeeping that
/// projections need. External states are the surviving original states;
/// internal states are the fresh ones plus the original commit states of
/// output segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gateway {
    cfsm: Cfsm,
    peer: Participant,
    external_states: BTreeSet<StateId>,
    internal_states: BTreeSet<StateId>,
    provenance: BTreeMap<StateId, FreshStateOrigin>,
}

impl Gateway {
    pub fn cfsm(&self) -> &Cfsm {
        &self.cfsm
    }

    pub fn peer(&self) -> &Participant {
        &self.peer
    }

    pub fn external_states(&self) -> &BTreeSet<StateId> {
        &self.external_states
    }

    pub fn internal_states(&self) -> &BTreeSet<StateId> {
        &self.internal_states
    }

    pub fn provenance(&self) -> &BTreeMap<StateId, FreshStateOrigin> {
        &self.provenance
    }

    pub fn origin(&self, state: &StateId) -> Option<&FreshStateOrigin> {
        self.provenance.get(state)
    }

    /// Resolves a gateway state to a state of the original machine for
    /// configuration projection: fresh input-side states map forward to the
    /// input's original target, fresh forwarding prefixes map backward to
    /// the tau edge's source, and every original state is kept.
    pub fn project_state(&self, state: &StateId) -> Result<StateId> {
        if !self.cfsm.fsa().states().contains(state) {
            return Err(Error::UnknownState(state.clone()));
        }
        Ok(match self.provenance.get(state) {
            None => state.clone(),
            Some(FreshStateOrigin::ForwardPrefix { tau_source, .. }) => tau_source.clone(),
            Some(
                FreshStateOrigin::InputEntry { input_target, .. }
                | FreshStateOrigin::OutputPending { input_target, .. },
            ) => input_target.clone(),
        })
    }

    /// Resolves a gateway state to a state of the original machine for the
    /// progress-alignment invariant: input-side fresh states map backward
    /// to the input's source, output-segment states (the forwarding prefix
    /// and the original commit state) map forward past the output, and all
    /// other original states are kept.
    pub fn nof_state(&self, state: &StateId) -> Result<StateId> {
        if !self.cfsm.fsa().states().contains(state) {
            return Err(Error::UnknownState(state.clone()));
        }
        match self.provenance.get(state) {
            Some(FreshStateOrigin::ForwardPrefix { tau_target, .. }) => {
                self.output_target_of_commit(tau_target)
            }
            Some(
                FreshStateOrigin::InputEntry { input_source, .. }
                | FreshStateOrigin::OutputPending { input_source, .. },
            ) => Ok(input_source.clone()),
            None => {
                if self.internal_states.contains(state) {
                    // An original commit state: jump past its sole output.
                    self.output_target_of_commit(state)
                } else {
                    Ok(state.clone())
                }
            }
        }
    }

    fn output_target_of_commit(&self, commit: &StateId) -> Result<StateId> {
        let mut outputs = self
            .cfsm
            .fsa()
            .outgoing(commit)
            .filter(|t| t.label.is_output());
        let Some(t) = outputs.next() else {
            return Err(Error::InternalInconsistency(format!(
                "commit state {commit} has no output"
            )));
        };
        Ok(t.target.clone())
    }
}

fn fresh_id(base: String, states: &BTreeSet<StateId>) -> Result<StateId> {
    let mut name = base;
    loop {
        let candidate = StateId::new(name.as_str())?;
        if !states.contains(&candidate) {
            return Ok(candidate);
        }
        name.push('\'');
    }
}

/// Rewrites `m` so that every message crossing its interface is relayed
/// through `peer`: each output segment `p -tau-> q -!msg-> r` gains a peer
/// input in front (`p -?msg-> fresh -tau-> q`), and each input
/// `p -?msg-> r` is continued by a forwarding segment
/// (`p -?msg-> fresh -tau-> fresh' -!msg-to-peer-> r`).
pub fn build_gateway(m: &Cfsm, peer: &Participant) -> Result<Gateway> {
    let subject = m.subject();
    let clash = |reason: String| Error::PeerNameClash {
        subject: subject.clone(),
        peer: peer.clone(),
        reason,
    };
    if peer == subject {
        return Err(clash("a machine cannot relay through itself".into()));
    }
    if m.mentioned_participants().contains(peer) {
        return Err(clash("the peer already occurs in the machine's labels".into()));
    }

    let fsa = m.fsa();
    let mut states = fsa.states().clone();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();
    let mut provenance: BTreeMap<StateId, FreshStateOrigin> = BTreeMap::new();
    let mut internal: BTreeSet<StateId> = BTreeSet::new();

    for t in fsa.transitions() {
        match &t.label {
            ActionLabel::Tau => {
                // Output segment: the commit state's unique outgoing output.
                let commit = &t.target;
                let Some(output) = fsa.outgoing(commit).find(|u| u.label.is_output()) else {
                    return Err(Error::InternalInconsistency(format!(
                        "tau target {commit} has no output"
                    )));
                };
                let ActionLabel::Output { msg, .. } = &output.label else {
                    unreachable!("filtered on is_output");
                };
                let prefix = fresh_id(format!("{}_fwd_{}", t.source, commit), &states)?;
                states.insert(prefix.clone());
                transitions.insert(Transition::new(
                    t.source.clone(),
                    ActionLabel::input(peer.clone(), subject.clone(), msg.clone())?,
                    prefix.clone(),
                ));
                transitions.insert(Transition::new(
                    prefix.clone(),
                    ActionLabel::Tau,
                    commit.clone(),
                ));
                provenance.insert(
                    prefix.clone(),
                    FreshStateOrigin::ForwardPrefix {
                        tau_source: t.source.clone(),
                        tau_target: commit.clone(),
                        msg: msg.clone(),
                    },
                );
                internal.insert(prefix);
                internal.insert(commit.clone());
            }
            ActionLabel::Output { .. } => {
                transitions.insert(t.clone());
            }
            ActionLabel::Input { sender, msg, .. } => {
                let entry = fresh_id(format!("{}_in_{}", t.source, t.target), &states)?;
                states.insert(entry.clone());
                let pending = fresh_id(format!("{}_out_{}", t.source, t.target), &states)?;
                states.insert(pending.clone());
                transitions.insert(Transition::new(
                    t.source.clone(),
                    t.label.clone(),
                    entry.clone(),
                ));
                transitions.insert(Transition::new(
                    entry.clone(),
                    ActionLabel::Tau,
                    pending.clone(),
                ));
                transitions.insert(Transition::new(
                    pending.clone(),
                    ActionLabel::output(subject.clone(), peer.clone(), msg.clone())?,
                    t.target.clone(),
                ));
                let origin = |is_entry: bool| {
                    let (input_source, input_target) = (t.source.clone(), t.target.clone());
                    if is_entry {
                        FreshStateOrigin::InputEntry {
                            input_source,
                            input_target,
                            sender: sender.clone(),
                            msg: msg.clone(),
                        }
                    } else {
                        FreshStateOrigin::OutputPending {
                            input_source,
                            input_target,
                            sender: sender.clone(),
                            msg: msg.clone(),
                        }
                    }
                };
                provenance.insert(entry.clone(), origin(true));
                provenance.insert(pending.clone(), origin(false));
                internal.insert(entry);
                internal.insert(pending);
            }
        }
    }

    let external: BTreeSet<StateId> = states.difference(&internal).cloned().collect();
    let rewritten = Cfsm::new(subject.clone(), Fsa::new(states, fsa.initial().clone(), transitions)?)?;

    // Relaying keeps choices sequential around tau: no state may touch more
    // than one tau transition in total.
    for q in rewritten.fsa().states() {
        let tau_out = rewritten.fsa().outgoing(q).filter(|t| t.label.is_tau()).count();
        let tau_in = rewritten.fsa().incoming(q).filter(|t| t.label.is_tau()).count();
        if tau_in + tau_out > 1 {
            return Err(Error::InternalInconsistency(format!(
                "gateway state {q} touches {tau_in} incoming and {tau_out} outgoing tau transitions"
            )));
        }
    }

    Ok(Gateway {
        cfsm: rewritten,
        peer: peer.clone(),
        external_states: external,
        internal_states: internal,
        provenance,
    })
}

/// The structural and behavioural facts deciding whether two systems may be
/// composed through the given interface machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposabilityReport {
    pub disjoint_domains: bool,
    pub overlap: BTreeSet<Participant>,
    pub h_profile: MachineProfile,
    pub k_profile: MachineProfile,
    pub compatible: bool,
    pub certificate: IoCorrespondence,
    pub composable: bool,
    pub failure_reasons: Vec<String>,
}

pub fn check_composability(
    s1: &System,
    h: &Participant,
    s2: &System,
    k: &Participant,
) -> Result<ComposabilityReport> {
    let mh = s1.machine(h)?;
    let mk = s2.machine(k)?;
    let overlap: BTreeSet<Participant> = s1
        .participants()
        .filter(|p| s2.machines().contains_key(*p))
        .cloned()
        .collect();
    let disjoint_domains = overlap.is_empty();
    let h_profile = machine_profile(mh);
    let k_profile = machine_profile(mk);
    let (compatible, certificate) = check_compatibility(mh, mk);

    let mut failure_reasons = Vec::new();
    if !disjoint_domains {
        let names: Vec<String> = overlap.iter().map(|p| p.to_string()).collect();
        failure_reasons.push(format!("domains overlap on {}", names.join(", ")));
    }
    if !compatible {
        failure_reasons.push(format!("machines {h} and {k} are not compatible"));
    }
    for (name, profile) in [(h, &h_profile), (k, &k_profile)] {
        if !profile.in_deterministic {
            failure_reasons.push(format!("machine {name} is not ?-deterministic"));
        }
        if !profile.out_deterministic {
            failure_reasons.push(format!("machine {name} is not !-deterministic"));
        }
        if profile.has_asymmetric_mixed {
            failure_reasons.push(format!("machine {name} has an asymmetric-mixed state"));
        }
    }
    Ok(ComposabilityReport {
        disjoint_domains,
        overlap,
        composable: failure_reasons.is_empty(),
        h_profile,
        k_profile,
        compatible,
        certificate,
        failure_reasons,
    })
}

/// Which component of a composition to project onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Two systems joined by replacing their interface machines with gateways
/// that relay to each other. The originals are retained for projections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedSystem {
    system: System,
    left: System,
    right: System,
    h: Participant,
    k: Participant,
    left_gateway: Gateway,
    right_gateway: Gateway,
    forced: bool,
}

impl ComposedSystem {
    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn left(&self) -> &System {
        &self.left
    }

    pub fn right(&self) -> &System {
        &self.right
    }

    pub fn h(&self) -> &Participant {
        &self.h
    }

    pub fn k(&self) -> &Participant {
        &self.k
    }

    pub fn left_gateway(&self) -> &Gateway {
        &self.left_gateway
    }

    pub fn right_gateway(&self) -> &Gateway {
        &self.right_gateway
    }

    /// True when composability failed and composition went ahead anyway.
    pub fn forced(&self) -> bool {
        self.forced
    }
}

/// Replaces `h` in `s1` and `k` in `s2` with gateways relaying to each
/// other and merges the two domains. Overlapping domains are always an
/// error; a failed composability check is an error unless `force` is set
/// (forcing exists to study what goes wrong without the premises).
pub fn compose_systems(
    s1: &System,
    h: &Participant,
    s2: &System,
    k: &Participant,
    force: bool,
) -> Result<ComposedSystem> {
    let report = check_composability(s1, h, s2, k)?;
    if !report.disjoint_domains {
        let first = report.overlap.iter().next().expect("nonempty overlap");
        return Err(Error::OverlappingDomains(first.clone()));
    }
    if !report.composable && !force {
        return Err(Error::NotComposable {
            reasons: report.failure_reasons.clone(),
        });
    }
    let left_gateway = build_gateway(s1.machine(h)?, k)?;
    let right_gateway = build_gateway(s2.machine(k)?, h)?;

    let mut machines: BTreeMap<Participant, Cfsm> = BTreeMap::new();
    for (p, m) in s1.machines() {
        let m = if p == h { left_gateway.cfsm() } else { m };
        machines.insert(p.clone(), m.clone());
    }
    for (p, m) in s2.machines() {
        let m = if p == k { right_gateway.cfsm() } else { m };
        machines.insert(p.clone(), m.clone());
    }
    let name = SystemName::new(format!("{}_{}", s1.name(), s2.name()))?;
    let system = System::new(name, machines)?;
    Ok(ComposedSystem {
        system,
        left: s1.clone(),
        right: s2.clone(),
        h: h.clone(),
        k: k.clone(),
        left_gateway,
        right_gateway,
        forced: !report.composable,
    })
}

/// Restricts a composed configuration to one component system, resolving
/// the gateway's fresh states back to original ones.
pub fn project_configuration(
    cs: &ComposedSystem,
    s: &Configuration,
    side: Side,
) -> Result<Configuration> {
    // Validate against the composed system first for a clear error.
    cs.system.configuration(s.entries().map(|(p, q)| (p.clone(), q.clone())).collect())?;
    let (component, gateway, owner) = match side {
        Side::Left => (&cs.left, &cs.left_gateway, &cs.h),
        Side::Right => (&cs.right, &cs.right_gateway, &cs.k),
    };
    let mut map: BTreeMap<Participant, StateId> = BTreeMap::new();
    for p in component.participants() {
        let state = s.state(p)?;
        let resolved = if p == owner {
            gateway.project_state(state)?
        } else {
            state.clone()
        };
        map.insert(p.clone(), resolved);
    }
    component.configuration(map)
}

/// Convenience wrapper matching the state-map naming used in reports.
pub fn nof_state(gw: &Gateway, state: &StateId) -> Result<StateId> {
    gw.nof_state(state)
}

/// One reachable composed configuration whose projections or alignment
/// failed a clause of the projection property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionCounterexample {
    pub config: ConfigIx,
    pub clause: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProjectionVerdict {
    /// The composition was forced and indeed fails composability, so the
    /// property's premises do not apply; the failing clauses are repeated.
    PreconditionFailed { reasons: Vec<String> },
    Verified {
        holds: bool,
        checked: usize,
        counterexamples: Vec<ProjectionCounterexample>,
    },
}

/// Checks, for every reachable configuration of the composed system, that
/// the left projection is reachable in the left component, the right
/// projection in the right component, and that the two gateways' progress
/// stays aligned: the pair of original states obtained from both gateway
/// components lies in the greatest correspondence of the originals.
pub fn verify_projection_lemma(cs: &ComposedSystem, lts: &SemLts) -> Result<ProjectionVerdict> {
    let report = check_composability(&cs.left, &cs.h, &cs.right, &cs.k)?;
    if !report.composable {
        return Ok(ProjectionVerdict::PreconditionFailed {
            reasons: report.failure_reasons,
        });
    }
    let left_lts = build_semantics(&cs.left)?;
    let right_lts = build_semantics(&cs.right)?;
    let relation = greatest_io_correspondence(
        cs.left.machine(&cs.h)?,
        cs.right.machine(&cs.k)?,
    );

    let mut counterexamples = Vec::new();
    for ix in 0..lts.configurations().len() {
        let s = lts.config(ix);
        let left = project_configuration(cs, s, Side::Left)?;
        if left_lts.index_of(&left).is_none() {
            counterexamples.push(ProjectionCounterexample {
                config: ix,
                clause: format!("left projection {left} is not reachable"),
            });
        }
        let right = project_configuration(cs, s, Side::Right)?;
        if right_lts.index_of(&right).is_none() {
            counterexamples.push(ProjectionCounterexample {
                config: ix,
                clause: format!("right projection {right} is not reachable"),
            });
        }
        let nof_h = cs.left_gateway.nof_state(s.state(&cs.h)?)?;
        let nof_k = cs.right_gateway.nof_state(s.state(&cs.k)?)?;
        if !relation.contains(&nof_h, &nof_k) {
            counterexamples.push(ProjectionCounterexample {
                config: ix,
                clause: format!(
                    "gateway alignment ({nof_h}, {nof_k}) is outside the correspondence"
                ),
            });
        }
    }
    Ok(ProjectionVerdict::Verified {
        holds: counterexamples.is_empty(),
        checked: lts.configurations().len(),
        counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::build_semantics;
    use crate::testutil::*;

    fn front_system() -> System {
        sys(
            "front",
            [
                cfsm(
                    "A",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("A", "H", "m"), "2")],
                ),
                cfsm(
                    "B",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("B", "H", "n"), "2")],
                ),
                cfsm(
                    "H",
                    "0",
                    [("0", inp("A", "H", "m"), "1"), ("0", inp("B", "H", "n"), "1")],
                ),
            ],
        )
    }

    fn back_system() -> System {
        relay_system()
    }

    #[test]
    fn input_machine_gateway_matches_the_displayed_shape() {
        let h = front_system().machine(&p("H")).unwrap().clone();
        let gw = build_gateway(&h, &p("K")).unwrap();
        let f = gw.cfsm().fsa();
        assert_eq!(f.states().len(), 6);
        let expect: BTreeSet<Transition> = [
            tr("0", inp("A", "H", "m"), "0_in_1"),
            tr("0_in_1", ActionLabel::Tau, "0_out_1"),
            tr("0_out_1", out("H", "K", "m"), "1"),
            tr("0", inp("B", "H", "n"), "0_in_1'"),
            tr("0_in_1'", ActionLabel::Tau, "0_out_1'"),
            tr("0_out_1'", out("H", "K", "n"), "1"),
        ]
        .into();
        assert_eq!(f.transitions(), &expect);
        assert_eq!(gw.external_states(), &[st("0"), st("1")].into());
        assert_eq!(
            gw.internal_states(),
            &[st("0_in_1"), st("0_out_1"), st("0_in_1'"), st("0_out_1'")].into()
        );
        assert!(matches!(
            gw.origin(&st("0_in_1")),
            Some(FreshStateOrigin::InputEntry { .. })
        ));
        assert!(matches!(
            gw.origin(&st("0_out_1'")),
            Some(FreshStateOrigin::OutputPending { .. })
        ));
    }

    #[test]
    fn output_machine_gateway_gains_peer_inputs() {
        let k = back_system().machine(&p("K")).unwrap().clone();
        let gw = build_gateway(&k, &p("H")).unwrap();
        let f = gw.cfsm().fsa();
        assert_eq!(f.states().len(), 6);
        let expect: BTreeSet<Transition> = [
            tr("0", inp("H", "K", "m"), "0_fwd_1"),
            tr("0_fwd_1", ActionLabel::Tau, "1"),
            tr("1", out("K", "C", "m"), "3"),
            tr("0", inp("H", "K", "n"), "0_fwd_2"),
            tr("0_fwd_2", ActionLabel::Tau, "2"),
            tr("2", out("K", "D", "n"), "3"),
        ]
        .into();
        assert_eq!(f.transitions(), &expect);
        assert_eq!(gw.external_states(), &[st("0"), st("3")].into());
        // The original commit states become internal to the relay.
        assert!(gw.internal_states().contains(&st("1")));
        assert!(gw.internal_states().contains(&st("2")));
    }

    #[test]
    fn single_output_segment_starts_with_a_peer_input() {
        let m = cfsm(
            "H",
            "p",
            [("p", ActionLabel::Tau, "q"), ("q", out("H", "A", "m"), "r")],
        );
        let gw = build_gateway(&m, &p("K")).unwrap();
        let f = gw.cfsm().fsa();
        assert_eq!(f.states().len(), 4);
        let start = st("p");
        let first = f.outgoing(&start).next().unwrap();
        assert_eq!(first.label, inp("K", "H", "m"));
    }

    #[test]
    fn two_state_input_machine_becomes_a_four_state_relay() {
        let m = cfsm("H", "0", [("0", inp("A", "H", "m"), "1")]);
        let gw = build_gateway(&m, &p("K")).unwrap();
        assert_eq!(gw.cfsm().fsa().states().len(), 4);
        assert_eq!(gw.external_states().len(), 2);
    }

    #[test]
    fn state_count_follows_the_rewrite_arithmetic() {
        // |gw| = |m| + #tau-edges + 2 * #inputs, checked on mixed machines.
        for (m, peer) in [
            (back_system().machine(&p("E")).unwrap().clone(), p("Z")),
            (back_system().machine(&p("C")).unwrap().clone(), p("Z")),
            (front_system().machine(&p("H")).unwrap().clone(), p("K")),
        ] {
            let f = m.fsa();
            let taus = f.transitions().iter().filter(|t| t.label.is_tau()).count();
            let inputs = f.transitions().iter().filter(|t| t.label.is_input()).count();
            let gw = build_gateway(&m, &peer).unwrap();
            assert_eq!(
                gw.cfsm().fsa().states().len(),
                f.states().len() + taus + 2 * inputs
            );
            assert_eq!(
                gw.external_states().len() + gw.internal_states().len(),
                gw.cfsm().fsa().states().len()
            );
        }
    }

    #[test]
    fn gateway_rejects_clashing_peers() {
        let h = front_system().machine(&p("H")).unwrap().clone();
        assert!(matches!(
            build_gateway(&h, &p("H")),
            Err(Error::PeerNameClash { .. })
        ));
        assert!(matches!(
            build_gateway(&h, &p("A")),
            Err(Error::PeerNameClash { .. })
        ));
    }

    #[test]
    fn fresh_names_dodge_existing_states() {
        let m = cfsm(
            "H",
            "0",
            [
                ("0", inp("A", "H", "m"), "0_in_1"),
                ("0_in_1", inp("A", "H", "n"), "1"),
            ],
        );
        let gw = build_gateway(&m, &p("K")).unwrap();
        // The first rewrite wants 0_in_<target>; the name is taken by an
        // original state, so an apostrophe is appended.
        assert!(gw.cfsm().fsa().states().contains(&st("0_in_0_in_1")));
        assert!(gw
            .provenance()
            .keys()
            .all(|q| !m.fsa().states().contains(q)));
    }

    #[test]
    fn composability_holds_for_the_two_interface_systems() {
        let report =
            check_composability(&front_system(), &p("H"), &back_system(), &p("K")).unwrap();
        assert!(report.composable, "reasons: {:?}", report.failure_reasons);
        assert!(report.compatible);
        assert!(report.disjoint_domains);
    }

    #[test]
    fn composability_reports_every_failure() {
        // Same participant names on both sides, incompatible interfaces.
        let s1 = sys(
            "one",
            [
                cfsm(
                    "H",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("H", "A", "x"), "2")],
                ),
                cfsm("A", "0", [("0", inp("H", "A", "x"), "1")]),
            ],
        );
        let s2 = sys(
            "two",
            [
                cfsm("K", "0", [("0", inp("A", "K", "y"), "1")]),
                cfsm(
                    "A",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("A", "K", "y"), "2")],
                ),
            ],
        );
        let report = check_composability(&s1, &p("H"), &s2, &p("K")).unwrap();
        assert!(!report.composable);
        assert!(!report.disjoint_domains);
        assert!(!report.compatible);
        assert_eq!(report.overlap, [p("A")].into());
        assert!(report.failure_reasons.len() >= 2);
    }

    #[test]
    fn mixed_interface_states_block_composability() {
        let s1 = sys(
            "mixy",
            [
                cfsm(
                    "H",
                    "0",
                    [
                        ("0", ActionLabel::Tau, "1"),
                        ("1", out("H", "A", "x"), "2"),
                        ("0", inp("B", "H", "y"), "3"),
                    ],
                ),
                cfsm("A", "0", [("0", inp("H", "A", "x"), "1")]),
                cfsm(
                    "B",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("B", "H", "y"), "2")],
                ),
            ],
        );
        let s2 = sys(
            "dualmixy",
            [
                cfsm(
                    "K",
                    "0",
                    [
                        ("0", inp("C", "K", "x"), "1"),
                        ("0", ActionLabel::Tau, "2"),
                        ("2", out("K", "C", "y"), "3"),
                    ],
                ),
                cfsm(
                    "C",
                    "0",
                    [
                        ("0", ActionLabel::Tau, "1"),
                        ("1", out("C", "K", "x"), "2"),
                        ("0", inp("K", "C", "y"), "3"),
                    ],
                ),
            ],
        );
        let report = check_composability(&s1, &p("H"), &s2, &p("K")).unwrap();
        assert!(!report.composable);
        assert!(report
            .failure_reasons
            .iter()
            .any(|r| r.contains("asymmetric-mixed")));
    }

    #[test]
    fn composition_replaces_only_the_interface_machines() {
        let s1 = front_system();
        let s2 = back_system();
        let cs = compose_systems(&s1, &p("H"), &s2, &p("K"), false).unwrap();
        assert!(!cs.forced());
        let names: Vec<&str> = cs.system().participants().map(|p| p.as_str()).collect();
        assert_eq!(names, ["A", "B", "C", "D", "E", "H", "K"]);
        for q in ["A", "B"] {
            assert_eq!(cs.system().machine(&p(q)).unwrap(), s1.machine(&p(q)).unwrap());
        }
        for q in ["C", "D", "E"] {
            assert_eq!(cs.system().machine(&p(q)).unwrap(), s2.machine(&p(q)).unwrap());
        }
        assert_eq!(cs.system().machine(&p("H")).unwrap(), cs.left_gateway().cfsm());
        assert_eq!(cs.system().machine(&p("K")).unwrap(), cs.right_gateway().cfsm());
    }

    #[test]
    fn composed_relay_run_reaches_the_documented_configuration() {
        let cs = compose_systems(&front_system(), &p("H"), &back_system(), &p("K"), false)
            .unwrap();
        let lts = build_semantics(cs.system()).unwrap();
        let labels = [
            tau_step("A"),
            interaction("A", "H", "m"),
            tau_step("H"),
            interaction("H", "K", "m"),
        ];
        let path = lts.path_from(lts.initial(), &labels).unwrap();
        let end = lts.config(*path.last().unwrap()).clone();
        let expect = config(
            cs.system(),
            &[
                ("A", "2"),
                ("B", "0"),
                ("H", "1"),
                ("K", "0_fwd_1"),
                ("C", "0"),
                ("D", "0"),
                ("E", "0"),
            ],
        );
        assert_eq!(end, expect);
    }

    #[test]
    fn projections_recover_component_configurations() {
        let cs = compose_systems(&front_system(), &p("H"), &back_system(), &p("K"), false)
            .unwrap();
        let s = config(
            cs.system(),
            &[
                ("A", "2"),
                ("B", "0"),
                ("H", "1"),
                ("K", "0_fwd_1"),
                ("C", "0"),
                ("D", "0"),
                ("E", "0"),
            ],
        );
        let left = project_configuration(&cs, &s, Side::Left).unwrap();
        assert_eq!(left, config(cs.left(), &[("A", "2"), ("B", "0"), ("H", "1")]));
        let right = project_configuration(&cs, &s, Side::Right).unwrap();
        assert_eq!(
            right,
            config(
                cs.right(),
                &[("K", "0"), ("C", "0"), ("D", "0"), ("E", "0")]
            )
        );
        // Initial projects to the two component initials.
        let init = cs.system().initial_configuration();
        assert_eq!(
            project_configuration(&cs, &init, Side::Left).unwrap(),
            cs.left().initial_configuration()
        );
        assert_eq!(
            project_configuration(&cs, &init, Side::Right).unwrap(),
            cs.right().initial_configuration()
        );
    }

    #[test]
    fn input_side_fresh_states_project_forward() {
        let cs = compose_systems(&front_system(), &p("H"), &back_system(), &p("K"), false)
            .unwrap();
        let gw = cs.left_gateway();
        assert_eq!(gw.project_state(&st("0_in_1")).unwrap(), st("1"));
        assert_eq!(gw.project_state(&st("0_out_1")).unwrap(), st("1"));
        assert_eq!(gw.project_state(&st("0")).unwrap(), st("0"));
        let gw = cs.right_gateway();
        assert_eq!(gw.project_state(&st("0_fwd_1")).unwrap(), st("0"));
        assert_eq!(gw.project_state(&st("1")).unwrap(), st("1"));
        assert!(gw.project_state(&st("99")).is_err());
    }

    #[test]
    fn progress_alignment_maps_relaying_states_past_the_output() {
        let cs = compose_systems(&front_system(), &p("H"), &back_system(), &p("K"), false)
            .unwrap();
        let gwh = cs.left_gateway();
        assert_eq!(gwh.nof_state(&st("0")).unwrap(), st("0"));
        assert_eq!(gwh.nof_state(&st("0_in_1")).unwrap(), st("0"));
        assert_eq!(gwh.nof_state(&st("0_out_1")).unwrap(), st("0"));
        assert_eq!(gwh.nof_state(&st("1")).unwrap(), st("1"));
        let gwk = cs.right_gateway();
        assert_eq!(gwk.nof_state(&st("0")).unwrap(), st("0"));
        assert_eq!(gwk.nof_state(&st("0_fwd_1")).unwrap(), st("3"));
        // Original commit states jump past their output as well.
        assert_eq!(gwk.nof_state(&st("1")).unwrap(), st("3"));
        assert_eq!(gwk.nof_state(&st("2")).unwrap(), st("3"));
        assert_eq!(gwk.nof_state(&st("3")).unwrap(), st("3"));
    }

    #[test]
    fn projection_property_verifies_on_the_relay_composition() {
        let cs = compose_systems(&front_system(), &p("H"), &back_system(), &p("K"), false)
            .unwrap();
        let lts = build_semantics(cs.system()).unwrap();
        let verdict = verify_projection_lemma(&cs, &lts).unwrap();
        let ProjectionVerdict::Verified {
            holds,
            checked,
            counterexamples,
        } = verdict
        else {
            panic!("expected verification, got {verdict:?}");
        };
        assert!(holds, "counterexamples: {counterexamples:?}");
        assert_eq!(checked, lts.configurations().len());
        assert!(counterexamples.is_empty());
    }

    #[test]
    fn forced_composition_is_exempt_from_the_projection_property() {
        let s1 = sys(
            "one",
            [
                cfsm("A", "0", [("0", inp("H", "A", "x"), "1")]),
                cfsm(
                    "H",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("H", "A", "x"), "2")],
                ),
            ],
        );
        let s2 = sys(
            "two",
            [
                cfsm("K", "0", [("0", inp("C", "K", "y"), "1")]),
                cfsm(
                    "C",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("C", "K", "y"), "2")],
                ),
            ],
        );
        assert!(matches!(
            compose_systems(&s1, &p("H"), &s2, &p("K"), false),
            Err(Error::NotComposable { .. })
        ));
        let cs = compose_systems(&s1, &p("H"), &s2, &p("K"), true).unwrap();
        assert!(cs.forced());
        let lts = build_semantics(cs.system()).unwrap();
        let verdict = verify_projection_lemma(&cs, &lts).unwrap();
        assert!(matches!(verdict, ProjectionVerdict::PreconditionFailed { .. }));
    }

    #[test]
    fn overlapping_domains_cannot_be_composed_at_all() {
        let s1 = front_system();
        let s2 = sys(
            "clash",
            [
                cfsm("K", "0", [("0", inp("A", "K", "m"), "1")]),
                cfsm(
                    "A",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("A", "K", "m"), "2")],
                ),
            ],
        );
        assert!(matches!(
            compose_systems(&s1, &p("H"), &s2, &p("K"), true),
            Err(Error::OverlappingDomains(_))
        ));
    }

    #[test]
    fn forced_incompatible_composition_deadlocks_midway() {
        // The left gateway waits for x while the right one forwards y.
        let s1 = sys(
            "one",
            [
                cfsm("A", "0", [("0", inp("H", "A", "x"), "1")]),
                cfsm(
                    "H",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("H", "A", "x"), "2")],
                ),
            ],
        );
        let s2 = sys(
            "two",
            [
                cfsm("K", "0", [("0", inp("C", "K", "y"), "1")]),
                cfsm(
                    "C",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("C", "K", "y"), "2")],
                ),
            ],
        );
        let cs = compose_systems(&s1, &p("H"), &s2, &p("K"), true).unwrap();
        let lts = build_semantics(cs.system()).unwrap();
        let df = crate::properties::find_deadlocks(cs.system(), &lts).unwrap();
        assert!(!df.holds);
        assert_eq!(df.witnesses.len(), 1);
        let dead = lts.config(df.witnesses[0].config);
        let expect = config(
            cs.system(),
            &[("A", "0"), ("H", "0"), ("K", "0_out_1"), ("C", "2")],
        );
        assert_eq!(dead, &expect);
        // The stuck state is the right gateway's forwarding commitment.
        assert!(matches!(
            cs.right_gateway().origin(&st("0_out_1")),
            Some(FreshStateOrigin::OutputPending { .. })
        ));
    }
}
