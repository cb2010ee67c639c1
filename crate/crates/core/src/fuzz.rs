//! Randomised verification of the preservation properties: generate a
//! random system, derive a compatible peer system for its interface
//! machine, compose the two, and check that deadlock freedom, strong lock
//! freedom, (for sequential interfaces) lock freedom, the projection
//! property, and the implication chain all behave as promised. Premises
//! are measured, never assumed: a conclusion is only asserted when its
//! premise actually holds for the generated pair.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::serialize_system;
use crate::gateway::{check_composability, compose_systems, verify_projection_lemma, ProjectionVerdict};
use crate::machine::Cfsm;
use crate::model::{ActionLabel, Fsa, Message, Participant, StateId, SystemName, Transition};
use crate::properties::{
    check_implication_chain, check_strong_lock_freedom, find_deadlocks, find_locks,
};
use crate::semantics::{build_semantics_with, BuildOptions, System};

/// Exploration cap per generated system; blowups are skipped, not fatal.
pub const FUZZ_MAX_CONFIGS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzParams {
    pub seed: u64,
    pub iterations: usize,
    /// Upper bound on backbone states per machine; commit states on top.
    pub max_states: usize,
    /// Upper bound on participants per generated system.
    pub max_participants: usize,
    /// Size of the message pool.
    pub messages: usize,
    /// Generate a sequential interface machine so that the lock-freedom
    /// theorem's sequentiality premise can fire.
    pub require_sequential_gateways: bool,
}

impl Default for FuzzParams {
    fn default() -> Self {
        FuzzParams {
            seed: 42,
            iterations: 200,
            max_states: 5,
            max_participants: 4,
            messages: 3,
            require_sequential_gateways: false,
        }
    }
}

impl FuzzParams {
    fn validate(&self) -> Result<()> {
        let complain = |what: &str| Err(Error::InvalidFuzzParams(what.into()));
        if self.iterations == 0 {
            return complain("iterations must be positive");
        }
        if self.max_states == 0 {
            return complain("max_states must be positive");
        }
        if self.max_participants < 2 {
            return complain("need room for at least two participants");
        }
        if self.messages == 0 {
            return complain("message pool must be nonempty");
        }
        Ok(())
    }
}

/// One failed conclusion. The generating systems are serialized in full so
/// the case replays without rerunning the campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzViolation {
    pub iteration: usize,
    pub seed: u64,
    pub theorem: String,
    pub witness: String,
    pub left_system: String,
    pub right_system: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub params: FuzzParams,
    /// Iterations that produced a fully checked composition.
    pub checked: usize,
    /// Iterations abandoned because an exploration exceeded the cap.
    pub skipped: usize,
    /// Pairs passing check_composability.
    pub composable_pairs: usize,
    /// Pairs whose two components are both deadlock free.
    pub df_pairs: usize,
    /// Pairs whose two components are both lock free.
    pub lf_pairs: usize,
    /// Pairs whose two components are both strongly lock free.
    pub slf_pairs: usize,
    pub violations: Vec<FuzzViolation>,
}

impl FuzzReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, pool: &'a [T]) -> &'a T {
    &pool[rng.random_range(0..pool.len())]
}

/// Up to `k` distinct indices below `n`, in random order.
fn pick_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..all.len() {
        let j = rng.random_range(i..all.len());
        all.swap(i, j);
    }
    all.truncate(k.min(n));
    all
}

/// Generates a valid machine over numbered backbone states. Every state is
/// exclusively terminal, receiving, or sending, so the result is never
/// mixed, and distinct messages per state keep it ?- and !-deterministic.
fn gen_machine(
    rng: &mut ChaCha8Rng,
    subject: &Participant,
    others: &[Participant],
    n_states: usize,
    messages: &[Message],
    sequential: bool,
) -> Cfsm {
    let mains: Vec<StateId> = (0..n_states)
        .map(|i| StateId::new(i.to_string()).expect("numeric id"))
        .collect();
    let mut states: BTreeSet<StateId> = mains.iter().cloned().collect();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();

    for (six, s) in mains.iter().enumerate() {
        let roll = rng.random_range(0..100);
        if roll < 30 {
            continue; // terminal
        }
        let fanout = if sequential { 1 } else { rng.random_range(1..=2) };
        let picked = pick_distinct(rng, messages.len(), fanout);
        if roll < 70 {
            for mix in picked {
                let sender = pick(rng, others).clone();
                let target = pick(rng, &mains).clone();
                let label = ActionLabel::input(sender, subject.clone(), messages[mix].clone())
                    .expect("sender differs from subject");
                transitions.insert(Transition::new(s.clone(), label, target));
            }
        } else {
            for (pos, mix) in picked.into_iter().enumerate() {
                let commit = StateId::new(format!("c{six}_{pos}")).expect("commit id");
                states.insert(commit.clone());
                let receiver = pick(rng, others).clone();
                let target = pick(rng, &mains).clone();
                let label = ActionLabel::output(subject.clone(), receiver, messages[mix].clone())
                    .expect("receiver differs from subject");
                transitions.insert(Transition::new(s.clone(), ActionLabel::Tau, commit.clone()));
                transitions.insert(Transition::new(commit, label, target));
            }
        }
    }

    let fsa = Fsa::new(states, mains[0].clone(), transitions).expect("well formed by construction");
    Cfsm::new(subject.clone(), fsa).expect("valid by construction")
}

fn terminal_machine(subject: &Participant) -> Cfsm {
    let zero = StateId::new("0").expect("plain id");
    let fsa = Fsa::new([zero.clone()].into(), zero, BTreeSet::new()).expect("single state");
    Cfsm::new(subject.clone(), fsa).expect("no transitions to validate")
}

fn message_pool(params: &FuzzParams) -> Result<Vec<Message>> {
    (0..params.messages)
        .map(|i| Message::new(format!("m{i}")))
        .collect()
}

/// A random closed system with a distinguished interface machine `H`,
/// deterministic in the seed. Two flavours are mixed: *coupled* systems
/// built from machine/derived-twin pairs, which always run to completion,
/// and *wild* systems whose machines are generated independently and
/// usually get stuck, so both deadlocking and deadlock-free systems occur.
pub fn random_system(params: &FuzzParams) -> Result<(System, Participant)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let messages = message_pool(params)?;
    let interface = Participant::new("H")?;
    let n_participants = rng.random_range(2..=params.max_participants.max(2));
    let coupled = rng.random_range(0..100) < 60;
    let mut machines: BTreeMap<Participant, Cfsm> = BTreeMap::new();

    if coupled {
        for pair in 0..n_participants / 2 {
            let (a_name, b_name) = if pair == 0 {
                (interface.clone(), Participant::new("Q0")?)
            } else {
                (
                    Participant::new(format!("R{pair}"))?,
                    Participant::new(format!("S{pair}"))?,
                )
            };
            let n_states = rng.random_range(1..=params.max_states);
            let sequential = a_name == interface && params.require_sequential_gateways;
            let a = gen_machine(
                &mut rng,
                &a_name,
                std::slice::from_ref(&b_name),
                n_states,
                &messages,
                sequential,
            );
            let b = derive_compatible_peer(&a, &b_name, &a_name)
                .expect("generated machines are never mixed");
            machines.insert(a_name, a);
            machines.insert(b_name, b);
        }
        if n_participants % 2 == 1 {
            let lone = Participant::new("Z0")?;
            machines.insert(lone.clone(), terminal_machine(&lone));
        }
    } else {
        let mut domain = vec![interface.clone()];
        for i in 0..n_participants - 1 {
            domain.push(Participant::new(format!("P{i}"))?);
        }
        for subject in &domain {
            let others: Vec<Participant> =
                domain.iter().filter(|p| *p != subject).cloned().collect();
            let n_states = rng.random_range(1..=params.max_states);
            let sequential = *subject == interface && params.require_sequential_gateways;
            let m = gen_machine(&mut rng, subject, &others, n_states, &messages, sequential);
            machines.insert(subject.clone(), m);
        }
    }
    Ok((
        System::new(SystemName::new("fuzzed")?, machines)?,
        interface,
    ))
}

/// Derives the communication-flipped twin of `m`: inputs become committed
/// outputs towards `dual_partner`, output segments collapse into inputs
/// from `dual_partner`. The result is compatible with `m` whenever `m` has
/// no state mixing inputs with internal choices.
pub fn derive_compatible_peer(
    m: &Cfsm,
    dual_subject: &Participant,
    dual_partner: &Participant,
) -> Result<Cfsm> {
    if dual_subject == dual_partner {
        return Err(Error::PeerDerivation(
            "the dual subject and its partner must differ".into(),
        ));
    }
    let fsa = m.fsa();
    let commits: BTreeSet<&StateId> = fsa
        .transitions()
        .iter()
        .filter(|t| t.label.is_tau())
        .map(|t| &t.target)
        .collect();
    if commits.contains(fsa.initial()) {
        return Err(Error::PeerDerivation(
            "the initial state already commits an output".into(),
        ));
    }

    let mut states: BTreeSet<StateId> = fsa
        .states()
        .iter()
        .filter(|s| !commits.contains(s))
        .cloned()
        .collect();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();

    for p in fsa.states() {
        if commits.contains(p) {
            continue;
        }
        let has_tau = fsa.outgoing(p).any(|t| t.label.is_tau());
        let has_input = fsa.outgoing(p).any(|t| t.label.is_input());
        if has_tau && has_input {
            return Err(Error::PeerDerivation(format!(
                "state {p} mixes inputs with internal choices"
            )));
        }
        let mut fresh = 0usize;
        for t in fsa.outgoing(p) {
            match &t.label {
                ActionLabel::Input { msg, .. } => {
                    let mut base = format!("{p}_d{fresh}");
                    fresh += 1;
                    let commit = loop {
                        let candidate = StateId::new(base.as_str())?;
                        if !states.contains(&candidate) {
                            break candidate;
                        }
                        base.push('\'');
                    };
                    states.insert(commit.clone());
                    transitions.insert(Transition::new(p.clone(), ActionLabel::Tau, commit.clone()));
                    transitions.insert(Transition::new(
                        commit,
                        ActionLabel::output(dual_subject.clone(), dual_partner.clone(), msg.clone())?,
                        t.target.clone(),
                    ));
                }
                ActionLabel::Tau => {
                    let Some(output) = fsa.outgoing(&t.target).find(|u| u.label.is_output()) else {
                        return Err(Error::InternalInconsistency(format!(
                            "tau target {} has no output",
                            t.target
                        )));
                    };
                    let ActionLabel::Output { msg, .. } = &output.label else {
                        unreachable!("filtered on is_output");
                    };
                    transitions.insert(Transition::new(
                        p.clone(),
                        ActionLabel::input(dual_partner.clone(), dual_subject.clone(), msg.clone())?,
                        output.target.clone(),
                    ));
                }
                ActionLabel::Output { .. } => {
                    return Err(Error::PeerDerivation(format!(
                        "output source {p} is not guarded by an internal choice"
                    )));
                }
            }
        }
    }

    let fsa = Fsa::new(states, fsa.initial().clone(), transitions)?;
    Cfsm::new(dual_subject.clone(), fsa)
}

/// Wraps the derived peer of `m` into a closed two-machine system: the
/// peer plus the twin that feeds it. The pair advances in lockstep with
/// `m`'s own choices, so the system is deadlock free and strongly lock
/// free by construction.
pub fn dual_pair_system(
    m: &Cfsm,
    peer: &Participant,
    partner: &Participant,
    name: &str,
) -> Result<System> {
    let k = derive_compatible_peer(m, peer, partner)?;
    let y = derive_compatible_peer(&k, partner, peer)?;
    let machines = [(peer.clone(), k), (partner.clone(), y)].into();
    System::new(SystemName::new(name)?, machines)
}

fn mix(seed: u64, iteration: usize) -> u64 {
    seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Default)]
struct IterOutcome {
    skipped: bool,
    composable: bool,
    df_pair: bool,
    lf_pair: bool,
    slf_pair: bool,
    violations: Vec<FuzzViolation>,
}

fn run_iteration(params: &FuzzParams, iteration: usize) -> Result<IterOutcome> {
    let seed = mix(params.seed, iteration);
    let iter_params = FuzzParams {
        seed,
        ..params.clone()
    };
    let (s1, h) = random_system(&iter_params)?;
    let k = Participant::new("K")?;
    let partner = Participant::new("Y")?;
    let s2 = dual_pair_system(s1.machine(&h)?, &k, &partner, "peer")?;

    let mut out = IterOutcome::default();
    let fail = |out: &mut IterOutcome, theorem: &str, witness: String| {
        out.violations.push(FuzzViolation {
            iteration,
            seed,
            theorem: theorem.into(),
            witness,
            left_system: serialize_system(&s1),
            right_system: serialize_system(&s2),
        });
    };

    let comp = check_composability(&s1, &h, &s2, &k)?;
    out.composable = comp.composable;
    if !comp.composable {
        // The derived peer is compatible and deterministic by construction;
        // reaching this would be a generator bug worth reporting.
        fail(
            &mut out,
            "generator",
            format!("derived pair not composable: {:?}", comp.failure_reasons),
        );
        return Ok(out);
    }
    let cs = compose_systems(&s1, &h, &s2, &k, false)?;

    let opts = BuildOptions {
        max_configs: FUZZ_MAX_CONFIGS,
    };
    let explored = (
        build_semantics_with(&s1, opts),
        build_semantics_with(&s2, opts),
        build_semantics_with(cs.system(), opts),
    );
    let (lts1, lts2, ltsc) = match explored {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(Error::StateExplosion { .. }), ..)
        | (_, Err(Error::StateExplosion { .. }), _)
        | (.., Err(Error::StateExplosion { .. })) => {
            out.skipped = true;
            return Ok(out);
        }
        (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => return Err(e),
    };

    let df1 = find_deadlocks(&s1, &lts1)?;
    let df2 = find_deadlocks(&s2, &lts2)?;
    let lf1 = find_locks(&s1, &lts1)?;
    let lf2 = find_locks(&s2, &lts2)?;
    let slf1 = check_strong_lock_freedom(&s1, &lts1)?;
    let slf2 = check_strong_lock_freedom(&s2, &lts2)?;
    if !df2.holds || !lf2.holds || !slf2.holds {
        fail(
            &mut out,
            "generator",
            "derived peer system is not clean".into(),
        );
    }
    out.df_pair = df1.holds && df2.holds;
    out.lf_pair = lf1.holds && lf2.holds;
    out.slf_pair = slf1.holds && slf2.holds;

    if out.df_pair {
        let dfc = find_deadlocks(cs.system(), &ltsc)?;
        if !dfc.holds {
            fail(
                &mut out,
                "deadlock-freedom preservation",
                format!("composition deadlocks at {}", ltsc.config(dfc.witnesses[0].config)),
            );
        }
    }
    if out.slf_pair {
        let slfc = check_strong_lock_freedom(cs.system(), &ltsc)?;
        if !slfc.holds {
            let w = &slfc.witnesses[0];
            fail(
                &mut out,
                "strong-lock-freedom preservation",
                format!(
                    "participant {} avoidable from {}",
                    w.participant.as_ref().map(|p| p.to_string()).unwrap_or_default(),
                    ltsc.config(w.config)
                ),
            );
        }
    }
    if out.lf_pair && comp.h_profile.sequential && comp.k_profile.sequential {
        let lfc = find_locks(cs.system(), &ltsc)?;
        if !lfc.holds {
            let w = &lfc.witnesses[0];
            fail(
                &mut out,
                "lock-freedom preservation",
                format!(
                    "lock for {} at {}",
                    w.participant.as_ref().map(|p| p.to_string()).unwrap_or_default(),
                    ltsc.config(w.config)
                ),
            );
        }
    }

    match verify_projection_lemma(&cs, &ltsc)? {
        ProjectionVerdict::Verified { holds: true, .. } => {}
        ProjectionVerdict::Verified { counterexamples, .. } => {
            let clause = counterexamples
                .first()
                .map(|c| c.clause.clone())
                .unwrap_or_default();
            fail(&mut out, "projection", clause);
        }
        ProjectionVerdict::PreconditionFailed { reasons } => {
            fail(
                &mut out,
                "projection",
                format!("verifier rejected a composable pair: {reasons:?}"),
            );
        }
    }

    match check_implication_chain(cs.system(), &ltsc) {
        Ok(true) => {}
        Ok(false) | Err(Error::InternalInconsistency(_)) => {
            fail(&mut out, "implication-chain", "broken on the composition".into());
        }
        Err(e) => return Err(e),
    }

    Ok(out)
}

/// Runs the whole campaign. Iterations are independent and are spread over
/// worker threads; the aggregated report is ordered by iteration and is
/// identical for identical parameters.
pub fn run_preservation_fuzz(params: &FuzzParams) -> Result<FuzzReport> {
    params.validate()?;
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
        .min(params.iterations);

    let outcomes: Vec<Result<IterOutcome>> = if workers <= 1 {
        (0..params.iterations)
            .map(|i| run_iteration(params, i))
            .collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut mine = Vec::new();
                        let mut i = w;
                        while i < params.iterations {
                            mine.push((i, run_iteration(params, i)));
                            i += workers;
                        }
                        mine
                    })
                })
                .collect();
            let mut all: Vec<(usize, Result<IterOutcome>)> = handles
                .into_iter()
                .flat_map(|h| h.join().expect("fuzz worker panicked"))
                .collect();
            all.sort_by_key(|(i, _)| *i);
            all.into_iter().map(|(_, r)| r).collect()
        })
    };

    let mut report = FuzzReport {
        params: params.clone(),
        checked: 0,
        skipped: 0,
        composable_pairs: 0,
        df_pairs: 0,
        lf_pairs: 0,
        slf_pairs: 0,
        violations: Vec::new(),
    };
    for outcome in outcomes {
        let outcome = outcome?;
        if outcome.skipped {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        report.composable_pairs += usize::from(outcome.composable);
        report.df_pairs += usize::from(outcome.df_pair);
        report.lf_pairs += usize::from(outcome.lf_pair);
        report.slf_pairs += usize::from(outcome.slf_pair);
        report.violations.extend(outcome.violations);
    }
    Ok(report)
}
