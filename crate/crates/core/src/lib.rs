//! Asymmetric synchronous communicating finite-state machines: local
//! machine validation, synchronous-product semantics, deadlock and lock
//! analysis, gateway composition of two systems, compatibility checking,
//! and randomized preservation testing.
//!
//! The asymmetric discipline means every output is committed by a private
//! tau step of the sender before the synchronous handshake happens, so
//! choices are resolved by senders while receivers merely react.

pub mod bruteforce;
pub mod compat;
pub mod error;
pub mod format;
pub mod fuzz;
pub mod gateway;
pub mod machine;
pub mod model;
pub mod properties;
pub mod semantics;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Pos, Result};
pub use machine::{
    classify_state, machine_profile, normalize_outputs, validate_cfsm, Cfsm, CfsmViolation,
    CfsmViolationKind, MachineProfile, StateClass,
};
pub use bruteforce::{
    crosscheck_properties, enumerate_maximal_runs, oracle_deadlock_configs, oracle_lock_pairs,
    oracle_slf_violation_pairs, OracleRun,
};
pub use compat::{
    check_compatibility, dual_label, greatest_io_correspondence, io_projection,
    validate_correspondence, IoCorrespondence, IoFsa, IoLabel, IoTransition,
};
pub use format::{
    certificate_to_json, export_dot_lts, export_dot_machine, fuzz_report_to_json,
    parse_machines_raw, parse_system_file, report_to_json, serialize_composed, serialize_system,
};
pub use fuzz::{
    derive_compatible_peer, dual_pair_system, random_system, run_preservation_fuzz, FuzzParams,
    FuzzReport, FuzzViolation, FUZZ_MAX_CONFIGS,
};
pub use gateway::{
    build_gateway, check_composability, compose_systems, nof_state, project_configuration,
    verify_projection_lemma, ComposabilityReport, ComposedSystem, FreshStateOrigin, Gateway,
    ProjectionCounterexample, ProjectionVerdict, Side,
};
pub use properties::{
    check_implication_chain, check_strong_lock_freedom, check_strong_lock_freedom_capped,
    find_deadlocks, find_deadlocks_capped, find_locks, find_locks_capped, validate_witness,
    PropertyKind, PropertyReport, Witness, WitnessEvidence, WitnessKind, DEFAULT_WITNESS_CAP,
};
pub use model::{
    reachable_states, successors, ActionLabel, Fsa, Message, Participant, StateId, SystemName,
    Transition,
};
pub use semantics::{
    build_semantics, build_semantics_with, enabled_participants, participants_of, validate_system,
    BuildOptions, ConfigIx, Configuration, SemEdge, SemLabel, SemLts, System, SystemViolation,
    DEFAULT_MAX_CONFIGS,
};
