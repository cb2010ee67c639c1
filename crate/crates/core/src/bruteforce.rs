//! Reference implementations of the property checkers by exhaustive run
//! enumeration. Deliberately naive, scanning the raw edge list instead of
//! adjacency structures: their whole point is to disagree with the
//! production checkers if either side has a bug.
//!
//! Every maximal run of a finite LTS is either a finite path ending in a
//! configuration without steps, or an infinite run whose prefix up to the
//! first repeated configuration folds into a lasso. Enumerating those
//! prefixes therefore covers all maximal runs for involvement questions.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::Participant;
use crate::properties::{
    check_strong_lock_freedom_capped, find_deadlocks_capped, find_locks_capped,
};
use crate::semantics::{participants_of, ConfigIx, SemLabel, SemLts, System};

/// Enumeration gives up beyond this many emitted runs.
pub const DEFAULT_RUN_BUDGET: usize = 100_000;

/// One maximal run: finite when `cycle_start` is None, otherwise the labels
/// from `cycle_start` onwards repeat forever.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleRun {
    pub labels: Vec<SemLabel>,
    pub cycle_start: Option<usize>,
}

impl OracleRun {
    pub fn involves(&self, a: &Participant) -> bool {
        self.labels.iter().any(|l| participants_of(l).contains(a))
    }
}

pub fn enumerate_maximal_runs(lts: &SemLts, from: ConfigIx) -> Result<Vec<OracleRun>> {
    enumerate_maximal_runs_with_budget(lts, from, DEFAULT_RUN_BUDGET)
}

/// Depth-first enumeration of all maximal runs from `from`, folding each
/// infinite run at its first configuration repetition.
pub fn enumerate_maximal_runs_with_budget(
    lts: &SemLts,
    from: ConfigIx,
    budget: usize,
) -> Result<Vec<OracleRun>> {
    let mut runs = Vec::new();
    let mut position = vec![usize::MAX; lts.configurations().len()];
    let mut labels = Vec::new();
    walk(lts, from, budget, &mut position, &mut labels, &mut runs)?;
    runs.sort();
    Ok(runs)
}

fn walk(
    lts: &SemLts,
    here: ConfigIx,
    budget: usize,
    position: &mut Vec<usize>,
    labels: &mut Vec<SemLabel>,
    runs: &mut Vec<OracleRun>,
) -> Result<()> {
    let emit = |runs: &mut Vec<OracleRun>, run: OracleRun| -> Result<()> {
        if runs.len() >= budget {
            return Err(Error::StateExplosion { limit: budget });
        }
        runs.push(run);
        Ok(())
    };

    position[here] = labels.len();
    let mut dead = true;
    for e in lts.edges().iter().filter(|e| e.source == here) {
        dead = false;
        if position[e.target] != usize::MAX {
            // Closing a loop: the run repeats from the target's position.
            let mut run_labels = labels.clone();
            run_labels.push(e.label.clone());
            emit(
                runs,
                OracleRun {
                    labels: run_labels,
                    cycle_start: Some(position[e.target]),
                },
            )?;
        } else {
            labels.push(e.label.clone());
            walk(lts, e.target, budget, position, labels, runs)?;
            labels.pop();
        }
    }
    if dead {
        emit(
            runs,
            OracleRun {
                labels: labels.clone(),
                cycle_start: None,
            },
        )?;
    }
    position[here] = usize::MAX;
    Ok(())
}

/// Configurations on any enumerated run from the initial configuration;
/// recomputes reachability without trusting the builder's bookkeeping.
fn oracle_reachable(lts: &SemLts) -> Result<BTreeSet<ConfigIx>> {
    let mut seen: BTreeSet<ConfigIx> = [lts.initial()].into();
    // Budgeted DFS mirroring the run enumeration, but collecting nodes.
    let mut stack = vec![lts.initial()];
    while let Some(ix) = stack.pop() {
        for e in lts.edges().iter().filter(|e| e.source == ix) {
            if seen.insert(e.target) {
                stack.push(e.target);
            }
        }
    }
    Ok(seen)
}

fn oracle_enabled(sys: &System, lts: &SemLts, ix: ConfigIx) -> Result<Vec<Participant>> {
    let mut out = Vec::new();
    for (p, m) in sys.machines() {
        let local = lts.config(ix).state(p)?;
        if m.fsa().outgoing(local).next().is_some() {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Deadlocks by definition: no edge leaves the configuration and somebody
/// is still enabled.
pub fn oracle_deadlock_configs(sys: &System, lts: &SemLts) -> Result<Vec<ConfigIx>> {
    let mut out = Vec::new();
    for ix in oracle_reachable(lts)? {
        let dead = !lts.edges().iter().any(|e| e.source == ix);
        if dead && !oracle_enabled(sys, lts, ix)?.is_empty() {
            out.push(ix);
        }
    }
    Ok(out)
}

/// Locks by definition: enabled participant, yet no enumerated run from the
/// configuration ever involves it.
pub fn oracle_lock_pairs(sys: &System, lts: &SemLts) -> Result<Vec<(ConfigIx, Participant)>> {
    let mut out = Vec::new();
    for ix in oracle_reachable(lts)? {
        let runs = enumerate_maximal_runs(lts, ix)?;
        for a in oracle_enabled(sys, lts, ix)? {
            if !runs.iter().any(|r| r.involves(&a)) {
                out.push((ix, a));
            }
        }
    }
    Ok(out)
}

/// Strong-lock-freedom violations by definition: enabled participant and
/// at least one enumerated maximal run that avoids it.
pub fn oracle_slf_violation_pairs(
    sys: &System,
    lts: &SemLts,
) -> Result<Vec<(ConfigIx, Participant)>> {
    let mut out = Vec::new();
    for ix in oracle_reachable(lts)? {
        let runs = enumerate_maximal_runs(lts, ix)?;
        for a in oracle_enabled(sys, lts, ix)? {
            if runs.iter().any(|r| !r.involves(&a)) {
                out.push((ix, a));
            }
        }
    }
    Ok(out)
}

/// Runs the production checkers uncapped and compares their witness sets
/// with the oracle's; any disagreement is an internal inconsistency.
pub fn crosscheck_properties(sys: &System, lts: &SemLts) -> Result<()> {
    let disagreement = |what: &str| {
        Err(Error::InternalInconsistency(format!(
            "oracle disagrees with {what}"
        )))
    };

    let df = find_deadlocks_capped(sys, lts, usize::MAX)?;
    let mut got: Vec<ConfigIx> = df.witnesses.iter().map(|w| w.config).collect();
    got.sort();
    if got != oracle_deadlock_configs(sys, lts)? {
        return disagreement("find_deadlocks");
    }

    let lf = find_locks_capped(sys, lts, usize::MAX)?;
    let mut got: Vec<(ConfigIx, Participant)> = lf
        .witnesses
        .iter()
        .map(|w| (w.config, w.participant.clone().expect("lock names someone")))
        .collect();
    got.sort();
    if got != oracle_lock_pairs(sys, lts)? {
        return disagreement("find_locks");
    }

    let slf = check_strong_lock_freedom_capped(sys, lts, usize::MAX)?;
    let mut got: Vec<(ConfigIx, Participant)> = slf
        .witnesses
        .iter()
        .map(|w| (w.config, w.participant.clone().expect("violation names someone")))
        .collect();
    got.sort();
    if got != oracle_slf_violation_pairs(sys, lts)? {
        return disagreement("check_strong_lock_freedom");
    }
    Ok(())
}
