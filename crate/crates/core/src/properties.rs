//! Communication properties of a built transition system: deadlocks, locks,
//! and strong lock freedom, each reported with machine-checkable witnesses.
//!
//! A deadlock is a reachable configuration without outgoing steps where
//! somebody could still move locally. A lock for A is a reachable
//! configuration from which no run ever involves A although A has pending
//! transitions. Strong lock freedom demands that every enabled participant
//! is involved in every maximal run.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::Participant;
use crate::semantics::{
    enabled_participants, participants_of, ConfigIx, SemLabel, SemLts, System,
};

/// Witness lists are truncated beyond this many entries by default.
pub const DEFAULT_WITNESS_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PropertyKind {
    DeadlockFreedom,
    LockFreedom,
    StrongLockFreedom,
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PropertyKind::DeadlockFreedom => "deadlock-freedom",
            PropertyKind::LockFreedom => "lock-freedom",
            PropertyKind::StrongLockFreedom => "strong-lock-freedom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WitnessKind {
    Deadlock,
    Lock,
    SlfViolation,
}

impl fmt::Display for WitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WitnessKind::Deadlock => "deadlock",
            WitnessKind::Lock => "lock",
            WitnessKind::SlfViolation => "slf-violation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessEvidence {
    /// The configuration speaks for itself (deadlocks).
    None,
    /// Every configuration reachable from the witness; none of their edges
    /// involves the locked participant.
    ReachableConfigs(Vec<ConfigIx>),
    /// A maximal run from the witness avoiding the participant: finite when
    /// `cycle_start` is None, otherwise a lasso whose labels from position
    /// `cycle_start` onwards repeat forever.
    MaximalRun {
        labels: Vec<SemLabel>,
        cycle_start: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub kind: WitnessKind,
    pub config: ConfigIx,
    pub participant: Option<Participant>,
    pub evidence: WitnessEvidence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    pub property: PropertyKind,
    pub holds: bool,
    pub witnesses: Vec<Witness>,
    /// True when more witnesses existed than the cap allowed.
    pub truncated: bool,
}

fn report(property: PropertyKind, witnesses: Vec<Witness>, cap: usize) -> PropertyReport {
    // A zero cap would make `holds` unreadable from the report; keep one.
    let cap = cap.max(1);
    let holds = witnesses.is_empty();
    let truncated = witnesses.len() > cap;
    let mut witnesses = witnesses;
    witnesses.truncate(cap);
    PropertyReport {
        property,
        holds,
        witnesses,
        truncated,
    }
}

/// Configuration indices in breadth-first discovery order from the initial
/// configuration; witness enumeration follows this order so the closest
/// witnesses come first.
fn bfs_order(lts: &SemLts) -> Vec<ConfigIx> {
    let n = lts.configurations().len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    seen[lts.initial()] = true;
    queue.push_back(lts.initial());
    while let Some(ix) = queue.pop_front() {
        order.push(ix);
        for e in lts.outgoing(ix) {
            if !seen[e.target] {
                seen[e.target] = true;
                queue.push_back(e.target);
            }
        }
    }
    order
}

fn involves(label: &SemLabel, a: &Participant) -> bool {
    participants_of(label).contains(a)
}

/// Configurations from which some edge in `edge_ok` is reachable (the edge's
/// source counts as reaching it). Traversal runs backwards over all edges.
fn can_reach_edge(lts: &SemLts, edge_ok: impl Fn(&SemLabel) -> bool) -> Vec<bool> {
    let n = lts.configurations().len();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in lts.edges().iter().enumerate() {
        incoming[e.target].push(i);
    }
    let mut hit = vec![false; n];
    let mut queue = VecDeque::new();
    for e in lts.edges() {
        if edge_ok(&e.label) && !hit[e.source] {
            hit[e.source] = true;
            queue.push_back(e.source);
        }
    }
    while let Some(ix) = queue.pop_front() {
        for &ei in &incoming[ix] {
            let src = lts.edges()[ei].source;
            if !hit[src] {
                hit[src] = true;
                queue.push_back(src);
            }
        }
    }
    hit
}

/// All reachable configurations with no outgoing steps where at least one
/// participant still has local transitions. All-terminal configurations are
/// successful termination, not deadlocks.
pub fn find_deadlocks(sys: &System, lts: &SemLts) -> Result<PropertyReport> {
    find_deadlocks_capped(sys, lts, DEFAULT_WITNESS_CAP)
}

pub fn find_deadlocks_capped(
    sys: &System,
    lts: &SemLts,
    cap: usize,
) -> Result<PropertyReport> {
    let mut witnesses = Vec::new();
    for ix in bfs_order(lts) {
        if lts.out_degree(ix) == 0 && !enabled_participants(sys, lts.config(ix))?.is_empty() {
            witnesses.push(Witness {
                kind: WitnessKind::Deadlock,
                config: ix,
                participant: None,
                evidence: WitnessEvidence::None,
            });
        }
    }
    Ok(report(PropertyKind::DeadlockFreedom, witnesses, cap))
}

/// All (configuration, participant) pairs where the participant has pending
/// local transitions but no reachable step involves it. Checked for every
/// participant via one backward closure over the involving edges.
pub fn find_locks(sys: &System, lts: &SemLts) -> Result<PropertyReport> {
    find_locks_capped(sys, lts, DEFAULT_WITNESS_CAP)
}

pub fn find_locks_capped(sys: &System, lts: &SemLts, cap: usize) -> Result<PropertyReport> {
    let order = bfs_order(lts);
    let mut found: Vec<(usize, Witness)> = Vec::new();
    for a in sys.participants() {
        let machine = sys.machine(a)?;
        let reaches_a = can_reach_edge(lts, |l| involves(l, a));
        for (pos, &ix) in order.iter().enumerate() {
            let local = lts.config(ix).state(a)?;
            let enabled = machine.fsa().outgoing(local).next().is_some();
            if enabled && !reaches_a[ix] {
                found.push((
                    pos,
                    Witness {
                        kind: WitnessKind::Lock,
                        config: ix,
                        participant: Some(a.clone()),
                        evidence: WitnessEvidence::ReachableConfigs(forward_closure(lts, ix)),
                    },
                ));
            }
        }
    }
    // Order by discovery position first so the closest witnesses survive the
    // cap regardless of participant names.
    found.sort_by(|(i, v), (j, w)| (i, &v.participant).cmp(&(j, &w.participant)));
    let witnesses = found.into_iter().map(|(_, w)| w).collect();
    Ok(report(PropertyKind::LockFreedom, witnesses, cap))
}

/// Sorted configurations reachable from `from`, itself included.
fn forward_closure(lts: &SemLts, from: ConfigIx) -> Vec<ConfigIx> {
    let n = lts.configurations().len();
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(ix) = queue.pop_front() {
        for e in lts.outgoing(ix) {
            if !seen[e.target] {
                seen[e.target] = true;
                queue.push_back(e.target);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

/// Strongly connected components of the sub-graph spanned by the edge
/// indices in `sub`; returns, per configuration, whether it lies on a cycle
/// (an SCC with an internal edge, including self-loops). Iterative Tarjan.
fn on_cycle(lts: &SemLts, sub: &[Vec<usize>]) -> Vec<bool> {
    let n = lts.configurations().len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut comp = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;

    // Explicit DFS frames: (node, next child position).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, child)) = frames.last() {
            if child < sub[v].len() {
                frames.last_mut().expect("frame exists").1 += 1;
                let w = lts.edges()[sub[v][child]].target;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(u, _)) = frames.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }

    let mut cyclic_comp = vec![false; next_comp];
    for (v, edges) in sub.iter().enumerate() {
        for &ei in edges {
            let w = lts.edges()[ei].target;
            if comp[v] == comp[w] {
                // Within one SCC an edge closes a cycle (v == w covers
                // self-loops).
                cyclic_comp[comp[v]] = true;
            }
        }
    }
    (0..n).map(|v| cyclic_comp[comp[v]]).collect()
}

/// For every configuration and every participant enabled there: a violation
/// iff some maximal run from the configuration avoids the participant.
/// In the sub-graph without the participant's edges this means reaching
/// either a cycle or a configuration that is terminal in the full graph.
pub fn check_strong_lock_freedom(sys: &System, lts: &SemLts) -> Result<PropertyReport> {
    check_strong_lock_freedom_capped(sys, lts, DEFAULT_WITNESS_CAP)
}

pub fn check_strong_lock_freedom_capped(
    sys: &System,
    lts: &SemLts,
    cap: usize,
) -> Result<PropertyReport> {
    let n = lts.configurations().len();
    let order = bfs_order(lts);
    let mut found: Vec<(usize, Witness)> = Vec::new();

    for a in sys.participants() {
        let machine = sys.machine(a)?;
        // Edge indices that survive deleting everything involving `a`.
        let mut sub: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, e) in lts.edges().iter().enumerate() {
            if !involves(&e.label, a) {
                sub[e.source].push(i);
            }
        }
        let cyclic = on_cycle(lts, &sub);
        let bad: Vec<bool> = (0..n)
            .map(|ix| cyclic[ix] || lts.out_degree(ix) == 0)
            .collect();
        // Backward closure of bad targets over the sub-graph.
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for row in &sub {
            for &ei in row {
                let e = &lts.edges()[ei];
                incoming[e.target].push(e.source);
            }
        }
        let mut doomed = bad.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| doomed[i]).collect();
        while let Some(ix) = queue.pop_front() {
            for &src in &incoming[ix] {
                if !doomed[src] {
                    doomed[src] = true;
                    queue.push_back(src);
                }
            }
        }

        for (pos, &ix) in order.iter().enumerate() {
            let local = lts.config(ix).state(a)?;
            let enabled = machine.fsa().outgoing(local).next().is_some();
            if enabled && doomed[ix] {
                let evidence = avoiding_run(lts, &sub, &bad, &cyclic, ix);
                found.push((
                    pos,
                    Witness {
                        kind: WitnessKind::SlfViolation,
                        config: ix,
                        participant: Some(a.clone()),
                        evidence,
                    },
                ));
            }
        }
    }

    found.sort_by(|(i, v), (j, w)| (i, &v.participant).cmp(&(j, &w.participant)));
    let witnesses = found.into_iter().map(|(_, w)| w).collect();
    Ok(report(PropertyKind::StrongLockFreedom, witnesses, cap))
}

/// Shortest run through `sub` from `from` to some bad configuration, plus a
/// closing cycle when the bad configuration's badness is being on a cycle.
fn avoiding_run(
    lts: &SemLts,
    sub: &[Vec<usize>],
    bad: &[bool],
    cyclic: &[bool],
    from: ConfigIx,
) -> WitnessEvidence {
    let stem_path = shortest_sub_path(lts, sub, from, |ix| bad[ix]);
    let (stem, end) = stem_path.expect("doomed configuration must reach a bad one");
    if lts.out_degree(end) == 0 {
        return WitnessEvidence::MaximalRun {
            labels: stem,
            cycle_start: None,
        };
    }
    debug_assert!(cyclic[end]);
    // Close the loop: shortest nonempty sub-path from `end` back to itself.
    let mut cycle: Option<Vec<SemLabel>> = None;
    for &ei in &sub[end] {
        let e = &lts.edges()[ei];
        if e.target == end {
            cycle = Some(vec![e.label.clone()]);
            break;
        }
        if let Some((mut rest, _)) = shortest_sub_path(lts, sub, e.target, |ix| ix == end) {
            let mut labels = vec![e.label.clone()];
            labels.append(&mut rest);
            if cycle.as_ref().is_none_or(|best| labels.len() < best.len()) {
                cycle = Some(labels);
            }
        }
    }
    let cycle = cycle.expect("cyclic configuration must close a loop");
    let cycle_start = stem.len();
    let mut labels = stem;
    labels.extend(cycle);
    WitnessEvidence::MaximalRun {
        labels,
        cycle_start: Some(cycle_start),
    }
}

/// BFS through the sub-graph; returns the labels along a shortest path from
/// `from` to the first configuration satisfying `stop`, and that endpoint.
fn shortest_sub_path(
    lts: &SemLts,
    sub: &[Vec<usize>],
    from: ConfigIx,
    stop: impl Fn(ConfigIx) -> bool,
) -> Option<(Vec<SemLabel>, ConfigIx)> {
    let n = lts.configurations().len();
    let mut parent: Vec<Option<(ConfigIx, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(ix) = queue.pop_front() {
        if stop(ix) {
            let mut labels = VecDeque::new();
            let mut cur = ix;
            while let Some((prev, ei)) = parent[cur] {
                labels.push_front(lts.edges()[ei].label.clone());
                cur = prev;
            }
            return Some((labels.into(), ix));
        }
        for &ei in &sub[ix] {
            let t = lts.edges()[ei].target;
            if !seen[t] {
                seen[t] = true;
                parent[t] = Some((ix, ei));
                queue.push_back(t);
            }
        }
    }
    None
}

/// Re-validates a witness against the transition system it was produced
/// from: deadlocks must be dead, lock evidence must cover exactly the
/// forward closure and avoid the participant, maximal runs must replay.
pub fn validate_witness(sys: &System, lts: &SemLts, w: &Witness) -> Result<()> {
    let fail = |msg: String| Err(Error::InternalInconsistency(msg));
    if w.config >= lts.configurations().len() {
        return fail(format!("witness configuration {} out of range", w.config));
    }
    match (&w.kind, &w.participant, &w.evidence) {
        (WitnessKind::Deadlock, None, WitnessEvidence::None) => {
            if lts.out_degree(w.config) != 0 {
                return fail("deadlock witness has outgoing steps".into());
            }
            if enabled_participants(sys, lts.config(w.config))?.is_empty() {
                return fail("deadlock witness enables nobody".into());
            }
            Ok(())
        }
        (WitnessKind::Lock, Some(a), WitnessEvidence::ReachableConfigs(configs)) => {
            if forward_closure(lts, w.config) != *configs {
                return fail("lock evidence is not the forward closure".into());
            }
            for &ix in configs {
                for e in lts.outgoing(ix) {
                    if involves(&e.label, a) {
                        return fail(format!("lock evidence reaches a step involving {a}"));
                    }
                }
            }
            Ok(())
        }
        (WitnessKind::SlfViolation, Some(a), WitnessEvidence::MaximalRun { labels, cycle_start }) => {
            if labels.iter().any(|l| involves(l, a)) {
                return fail(format!("avoiding run involves {a}"));
            }
            let ok = match cycle_start {
                None => label_path_endpoints(lts, w.config, labels)
                    .iter()
                    .any(|&end| lts.out_degree(end) == 0),
                Some(cs) => {
                    if *cs >= labels.len() {
                        return fail("cycle start beyond run".into());
                    }
                    let (stem, cycle) = labels.split_at(*cs);
                    label_path_endpoints(lts, w.config, stem).iter().any(|&mid| {
                        label_path_endpoints(lts, mid, cycle).contains(&mid)
                    })
                }
            };
            if ok {
                Ok(())
            } else {
                fail("avoiding run does not replay as a maximal run".into())
            }
        }
        _ => fail("witness shape does not match its kind".into()),
    }
}

/// Every configuration reachable from `from` by a path labelled exactly
/// `labels` (labels can be ambiguous, so there may be several).
fn label_path_endpoints(lts: &SemLts, from: ConfigIx, labels: &[SemLabel]) -> Vec<ConfigIx> {
    let mut layer = vec![from];
    for label in labels {
        let mut next = Vec::new();
        for &ix in &layer {
            for e in lts.outgoing(ix) {
                if e.label == *label && !next.contains(&e.target) {
                    next.push(e.target);
                }
            }
        }
        layer = next;
        if layer.is_empty() {
            break;
        }
    }
    layer
}

/// Cross-checks the three verdicts on one system: strong lock freedom must
/// imply lock freedom, which must imply deadlock freedom. A contradiction
/// can only come from a checker bug, hence the error, never `false`.
pub fn check_implication_chain(sys: &System, lts: &SemLts) -> Result<bool> {
    let df = find_deadlocks(sys, lts)?;
    let lf = find_locks(sys, lts)?;
    let slf = check_strong_lock_freedom(sys, lts)?;
    if slf.holds && !lf.holds {
        return Err(Error::InternalInconsistency(
            "strong lock freedom holds but lock freedom fails".into(),
        ));
    }
    if lf.holds && !df.holds {
        return Err(Error::InternalInconsistency(
            "lock freedom holds but deadlock freedom fails".into(),
        ));
    }
    Ok(true)
}
