//! Command-line surface over the library: validation, semantics, property
//! checking, compatibility, composition, normalization, and fuzzing.
//!
//! Exit codes: 0 success / property holds, 1 property violated or machines
//! incompatible, 2 usage, parse, or validation errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cfsm_core::{
    build_semantics_with, certificate_to_json, check_compatibility, check_strong_lock_freedom,
    compose_systems, export_dot_lts, find_deadlocks, find_locks, fuzz_report_to_json,
    machine_profile, normalize_outputs, parse_machines_raw, parse_system_file, report_to_json,
    run_preservation_fuzz, serialize_composed, serialize_system, verify_projection_lemma,
    BuildOptions, Cfsm, Error, FuzzParams, Participant, ProjectionVerdict, SemLts, System,
    Witness, WitnessEvidence,
};

#[derive(Parser)]
#[command(
    name = "cfsm",
    version,
    about = "Analyzer for systems of asymmetric synchronous communicating state machines"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a system file and check the communication discipline
    Validate {
        file: PathBuf,
    },
    /// Build the synchronous semantics and report its size
    Semantics {
        file: PathBuf,
        /// Write the transition system as a DOT graph
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        /// Abort if the exploration exceeds this many configurations
        #[arg(long, value_name = "N")]
        max_configs: Option<usize>,
    },
    /// Check a communication property, printing witnesses for violations
    Check {
        file: PathBuf,
        #[arg(long, value_enum)]
        property: Property,
        /// Write the verdict and witnesses as JSON
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Decide whether two interface machines are compatible
    Compat {
        file1: PathBuf,
        p1: String,
        file2: PathBuf,
        p2: String,
        /// Write the witnessing state correspondence as JSON
        #[arg(long, value_name = "PATH")]
        certificate: Option<PathBuf>,
    },
    /// Replace two interface machines by connected gateways
    Compose {
        file1: PathBuf,
        h: String,
        file2: PathBuf,
        k: String,
        /// Write the composed system here instead of stdout
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Compose even when the composability check fails
        #[arg(long)]
        force: bool,
        /// Check that every reachable configuration projects onto the components
        #[arg(long)]
        verify_projection: bool,
    },
    /// Rewrite bare outputs into committed outputs
    Normalize {
        file: PathBuf,
        #[arg(short, long, value_name = "PATH")]
        output: PathBuf,
    },
    /// Randomized testing of the composition theorems
    Fuzz {
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "N")]
        iters: Option<usize>,
        /// Only generate sequential interface machines
        #[arg(long)]
        sequential: bool,
        /// Write the full campaign report as JSON
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    /// Some machine can always move in every reachable configuration
    Deadlock,
    /// No machine ends up waiting forever
    Lock,
    /// No machine can be sidestepped forever
    StrongLock,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("cfsm: {message}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<System, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_system_file(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_out(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn participant(name: &str) -> Result<Participant, String> {
    Participant::new(name).map_err(|e| e.to_string())
}

/// Exploration bound: explicit flag, then CFSM_MAX_CONFIGS, then default.
fn exploration_options(flag: Option<usize>) -> Result<BuildOptions, String> {
    let from_env = match std::env::var("CFSM_MAX_CONFIGS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            format!("CFSM_MAX_CONFIGS must be a positive integer, got {v:?}")
        })?),
        Err(std::env::VarError::NotPresent) => None,
        Err(e) => return Err(format!("CFSM_MAX_CONFIGS: {e}")),
    };
    let mut opts = BuildOptions::default();
    if let Some(n) = flag.or(from_env) {
        if n == 0 {
            return Err("the configuration limit must be positive".into());
        }
        opts.max_configs = n;
    }
    Ok(opts)
}

fn explore(sys: &System, flag: Option<usize>) -> Result<SemLts, String> {
    build_semantics_with(sys, exploration_options(flag)?).map_err(|e| e.to_string())
}

fn print_witness(w: &Witness, lts: &SemLts) {
    match &w.participant {
        Some(p) => println!("  {} for {} at {}", w.kind, p, lts.config(w.config)),
        None => println!("  {} at {}", w.kind, lts.config(w.config)),
    }
    match &w.evidence {
        WitnessEvidence::None => {}
        WitnessEvidence::ReachableConfigs(configs) => {
            let shown: Vec<String> = configs
                .iter()
                .take(6)
                .map(|&ix| lts.config(ix).to_string())
                .collect();
            let more = configs.len().saturating_sub(shown.len());
            let suffix = if more > 0 {
                format!(" (+{more} more)")
            } else {
                String::new()
            };
            println!("    reachable: {}{suffix}", shown.join(", "));
        }
        WitnessEvidence::MaximalRun { labels, cycle_start } => {
            let rendered: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
            match cycle_start {
                Some(at) => println!("    run: {} (loops from step {at})", rendered.join(", ")),
                None => println!("    run: {} (terminates)", rendered.join(", ")),
            }
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.cmd {
        Cmd::Validate { file } => {
            let sys = load(&file)?;
            println!("system {}: {} machines, valid", sys.name(), sys.machines().len());
            for (p, m) in sys.machines() {
                let prof = machine_profile(m);
                let mut traits = Vec::new();
                if prof.sequential {
                    traits.push("sequential".to_string());
                }
                if !prof.in_deterministic {
                    traits.push("not ?-deterministic".to_string());
                }
                if !prof.out_deterministic {
                    traits.push("not !-deterministic".to_string());
                }
                if prof.has_asymmetric_mixed {
                    traits.push("asymmetric-mixed".to_string());
                }
                let notes = if traits.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", traits.join(", "))
                };
                println!(
                    "  machine {p}: {} states, {} transitions{notes}",
                    m.fsa().states().len(),
                    m.fsa().transitions().len()
                );
            }
            Ok(0)
        }

        Cmd::Semantics { file, dot, max_configs } => {
            let sys = load(&file)?;
            let lts = explore(&sys, max_configs)?;
            println!(
                "{} configurations, {} edges",
                lts.configurations().len(),
                lts.edges().len()
            );
            if let Some(path) = dot {
                write_out(&path, &export_dot_lts(&lts))?;
            }
            Ok(0)
        }

        Cmd::Check { file, property, json } => {
            let sys = load(&file)?;
            let lts = explore(&sys, None)?;
            let report = match property {
                Property::Deadlock => find_deadlocks(&sys, &lts),
                Property::Lock => find_locks(&sys, &lts),
                Property::StrongLock => check_strong_lock_freedom(&sys, &lts),
            }
            .map_err(|e| e.to_string())?;
            if let Some(path) = json {
                let doc = serde_json::to_string_pretty(&report_to_json(&report, &lts))
                    .expect("report serializes");
                write_out(&path, &(doc + "\n"))?;
            }
            if report.holds {
                println!("{} holds", report.property);
                Ok(0)
            } else {
                println!(
                    "{} violated, {} witness(es):",
                    report.property,
                    report.witnesses.len()
                );
                for w in &report.witnesses {
                    print_witness(w, &lts);
                }
                if report.truncated {
                    println!("  (witness list truncated)");
                }
                Ok(1)
            }
        }

        Cmd::Compat { file1, p1, file2, p2, certificate } => {
            let s1 = load(&file1)?;
            let s2 = load(&file2)?;
            let (p1, p2) = (participant(&p1)?, participant(&p2)?);
            let m1 = s1.machine(&p1).map_err(|e| e.to_string())?;
            let m2 = s2.machine(&p2).map_err(|e| e.to_string())?;
            let (compatible, rel) = check_compatibility(m1, m2);
            if let Some(path) = certificate {
                let doc = serde_json::to_string_pretty(&certificate_to_json(&rel))
                    .expect("certificate serializes");
                write_out(&path, &(doc + "\n"))?;
            }
            if compatible {
                println!(
                    "{p1} and {p2} are compatible ({} related state pairs)",
                    rel.pairs().len()
                );
                Ok(0)
            } else {
                println!("{p1} and {p2} are not compatible");
                Ok(1)
            }
        }

        Cmd::Compose { file1, h, file2, k, output, force, verify_projection } => {
            let s1 = load(&file1)?;
            let s2 = load(&file2)?;
            let (h, k) = (participant(&h)?, participant(&k)?);
            let cs = match compose_systems(&s1, &h, &s2, &k, force) {
                Ok(cs) => cs,
                Err(Error::NotComposable { reasons }) => {
                    eprintln!("not composable:");
                    for r in reasons {
                        eprintln!("  {r}");
                    }
                    return Ok(1);
                }
                Err(e) => return Err(e.to_string()),
            };
            if cs.forced() {
                eprintln!("warning: composed under --force; the composability check failed");
            }
            let text = serialize_composed(&cs);
            match output {
                Some(path) => write_out(&path, &text)?,
                None => print!("{text}"),
            }
            if verify_projection {
                let lts = explore(cs.system(), None)?;
                match verify_projection_lemma(&cs, &lts).map_err(|e| e.to_string())? {
                    ProjectionVerdict::Verified { holds: true, checked, .. } => {
                        eprintln!("projection verified on {checked} configurations");
                    }
                    ProjectionVerdict::Verified { counterexamples, .. } => {
                        eprintln!("projection fails:");
                        for c in counterexamples {
                            eprintln!("  at {}: {}", c.config, c.clause);
                        }
                        return Ok(1);
                    }
                    ProjectionVerdict::PreconditionFailed { reasons } => {
                        eprintln!("projection preconditions not met:");
                        for r in reasons {
                            eprintln!("  {r}");
                        }
                        return Ok(1);
                    }
                }
            }
            Ok(0)
        }

        Cmd::Normalize { file, output } => {
            let text = fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let (name, raws) =
                parse_machines_raw(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            let mut machines: BTreeMap<Participant, Cfsm> = BTreeMap::new();
            for raw in raws {
                let m = normalize_outputs(&raw.fsa, &raw.subject).map_err(|e| e.to_string())?;
                machines.insert(raw.subject, m);
            }
            let sys = System::new(name, machines).map_err(|e| e.to_string())?;
            write_out(&output, &serialize_system(&sys))?;
            println!(
                "normalized {} machines -> {}",
                sys.machines().len(),
                output.display()
            );
            Ok(0)
        }

        Cmd::Fuzz { seed, iters, sequential, report } => {
            let mut params = FuzzParams::default();
            if let Some(s) = seed {
                params.seed = s;
            }
            if let Some(i) = iters {
                params.iterations = i;
            }
            params.require_sequential_gateways = sequential;
            let outcome = run_preservation_fuzz(&params).map_err(|e| e.to_string())?;
            println!(
                "checked {} iterations ({} skipped): {} composable, {} df pairs, {} lf pairs, {} slf pairs",
                outcome.checked,
                outcome.skipped,
                outcome.composable_pairs,
                outcome.df_pairs,
                outcome.lf_pairs,
                outcome.slf_pairs
            );
            if let Some(path) = report {
                let doc = serde_json::to_string_pretty(&fuzz_report_to_json(&outcome))
                    .expect("report serializes");
                write_out(&path, &(doc + "\n"))?;
            }
            if outcome.clean() {
                println!("no violations");
                Ok(0)
            } else {
                println!("{} violation(s):", outcome.violations.len());
                for v in &outcome.violations {
                    println!("  iteration {} (seed {}): {}: {}", v.iteration, v.seed, v.theorem, v.witness);
                }
                Ok(1)
            }
        }
    }
}
