//! The textual system format, DOT export, and JSON rendering of reports.
//!
//! Grammar:
//!
//! ```text
//! file    := "system" NAME machine+
//! machine := "machine" PARTICIPANT "{" "init" STATE edge* "}"
//! edge    := STATE "tau" STATE
//!          | STATE "!" PARTICIPANT MESSAGE STATE    owner sends
//!          | STATE "?" PARTICIPANT MESSAGE STATE    owner receives
//! ```
//!
//! Identifiers are `[A-Za-z0-9_']+`; `#` starts a comment running to the
//! end of the line. Labels name only the other endpoint, the owner is
//! implicit, so a machine cannot even express a transition that belongs to
//! somebody else. The words `system`, `machine`, `init` and `tau` are
//! reserved and cannot be used as identifiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::compat::IoCorrespondence;
use crate::error::{Error, Pos, Result};
use crate::fuzz::FuzzReport;
use crate::gateway::{ComposedSystem, FreshStateOrigin, Gateway};
use crate::machine::Cfsm;
use crate::model::{ActionLabel, Fsa, Participant, StateId, SystemName, Transition};
use crate::properties::{PropertyReport, WitnessEvidence};
use crate::semantics::{SemLts, System};

const RESERVED: [&str; 4] = ["system", "machine", "init", "tau"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    Bang,
    Quest,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::Bang => f.write_str("'!'"),
            Tok::Quest => f.write_str("'?'"),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' | '}' | '!' | '?' => {
                chars.next();
                col += 1;
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '!' => Tok::Bang,
                    _ => Tok::Quest,
                };
                toks.push((tok, pos));
            }
            c if is_word_char(c) => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    col += 1;
                }
                toks.push((Tok::Word(word), pos));
            }
            other => {
                return Err(Error::Parse {
                    pos,
                    message: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    Ok(toks)
}

/// A machine as written in a file, before the communication discipline is
/// checked; `pos` locates its `machine` keyword for diagnostics.
#[derive(Debug, Clone)]
pub struct RawMachine {
    pub subject: Participant,
    pub fsa: Fsa,
    pub pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        let toks = lex(text)?;
        let end = toks.last().map(|(_, p)| Pos {
            line: p.line,
            col: p.col + 1,
        });
        Ok(Parser {
            toks,
            at: 0,
            end: end.unwrap_or(Pos { line: 1, col: 1 }),
        })
    }

    fn fail<T>(&self, pos: Pos, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.toks.get(self.at)
    }

    fn next(&mut self, expected: &str) -> Result<(Tok, Pos)> {
        match self.toks.get(self.at) {
            Some(t) => {
                self.at += 1;
                Ok(t.clone())
            }
            None => self.fail(self.end, format!("expected {expected}, found end of input")),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<Pos> {
        let (tok, pos) = self.next(&format!("'{word}'"))?;
        match tok {
            Tok::Word(w) if w == word => Ok(pos),
            other => self.fail(pos, format!("expected '{word}', found {other}")),
        }
    }

    fn punct(&mut self, want: Tok) -> Result<Pos> {
        let (tok, pos) = self.next(&want.to_string())?;
        if tok == want {
            Ok(pos)
        } else {
            self.fail(pos, format!("expected {want}, found {tok}"))
        }
    }

    /// An identifier token; reserved words are rejected.
    fn ident(&mut self, kind: &str) -> Result<(String, Pos)> {
        let (tok, pos) = self.next(kind)?;
        match tok {
            Tok::Word(w) if RESERVED.contains(&w.as_str()) => {
                self.fail(pos, format!("'{w}' is reserved and cannot name a {kind}"))
            }
            Tok::Word(w) => Ok((w, pos)),
            other => self.fail(pos, format!("expected a {kind}, found {other}")),
        }
    }

    fn state(&mut self) -> Result<StateId> {
        let (w, pos) = self.ident("state")?;
        StateId::new(w).or_else(|e| self.fail(pos, e.to_string()))
    }

    fn file(&mut self) -> Result<(SystemName, Vec<RawMachine>, Pos)> {
        let sys_pos = self.keyword("system")?;
        let (name, pos) = self.ident("system name")?;
        let name = SystemName::new(name).or_else(|e| self.fail(pos, e.to_string()))?;
        let mut machines = Vec::new();
        while self.peek().is_some() {
            machines.push(self.machine()?);
        }
        if machines.is_empty() {
            return self.fail(self.end, "expected at least one machine");
        }
        Ok((name, machines, sys_pos))
    }

    fn machine(&mut self) -> Result<RawMachine> {
        let pos = self.keyword("machine")?;
        let (subject, spos) = self.ident("participant")?;
        let subject = Participant::new(subject).or_else(|e| self.fail(spos, e.to_string()))?;
        self.punct(Tok::LBrace)?;
        self.keyword("init")?;
        let initial = self.state()?;

        let mut states: BTreeSet<StateId> = [initial.clone()].into();
        let mut transitions: BTreeSet<Transition> = BTreeSet::new();
        loop {
            match self.peek() {
                Some((Tok::RBrace, _)) => {
                    self.at += 1;
                    break;
                }
                Some((Tok::Word(w), pos)) if w == "init" => {
                    return self.fail(*pos, "duplicate init");
                }
                Some((Tok::Word(_), _)) => {
                    let t = self.edge(&subject)?;
                    states.insert(t.source.clone());
                    states.insert(t.target.clone());
                    transitions.insert(t);
                }
                Some((other, pos)) => {
                    let (other, pos) = (other.clone(), *pos);
                    return self.fail(pos, format!("expected an edge or '}}', found {other}"));
                }
                None => return self.fail(self.end, "expected '}', found end of input"),
            }
        }
        let fsa = Fsa::new(states, initial, transitions)
            .or_else(|e| self.fail(pos, e.to_string()))?;
        Ok(RawMachine { subject, fsa, pos })
    }

    fn edge(&mut self, subject: &Participant) -> Result<Transition> {
        let source = self.state()?;
        let (tok, pos) = self.next("'tau', '!' or '?'")?;
        let label = match tok {
            Tok::Word(w) if w == "tau" => ActionLabel::Tau,
            Tok::Bang => {
                let (peer, ppos) = self.ident("participant")?;
                let peer = Participant::new(peer).or_else(|e| self.fail(ppos, e.to_string()))?;
                let (msg, mpos) = self.ident("message")?;
                let msg =
                    crate::model::Message::new(msg).or_else(|e| self.fail(mpos, e.to_string()))?;
                ActionLabel::output(subject.clone(), peer, msg)
                    .or_else(|e| self.fail(ppos, e.to_string()))?
            }
            Tok::Quest => {
                let (peer, ppos) = self.ident("participant")?;
                let peer = Participant::new(peer).or_else(|e| self.fail(ppos, e.to_string()))?;
                let (msg, mpos) = self.ident("message")?;
                let msg =
                    crate::model::Message::new(msg).or_else(|e| self.fail(mpos, e.to_string()))?;
                ActionLabel::input(peer, subject.clone(), msg)
                    .or_else(|e| self.fail(ppos, e.to_string()))?
            }
            other => {
                return self.fail(pos, format!("expected 'tau', '!' or '?', found {other}"));
            }
        };
        let target = self.state()?;
        Ok(Transition::new(source, label, target))
    }
}

/// Parses without enforcing the communication discipline, for files whose
/// machines are meant to be repaired by normalization first.
pub fn parse_machines_raw(text: &str) -> Result<(SystemName, Vec<RawMachine>)> {
    let mut parser = Parser::new(text)?;
    let (name, machines, _) = parser.file()?;
    let mut seen: BTreeSet<&Participant> = BTreeSet::new();
    for m in &machines {
        if !seen.insert(&m.subject) {
            return Err(Error::Parse {
                pos: m.pos,
                message: format!("machine {} is declared twice", m.subject),
            });
        }
    }
    Ok((name, machines))
}

/// Parses and fully validates a system file. Machine and system validation
/// failures are reported as located parse errors.
pub fn parse_system_file(text: &str) -> Result<System> {
    let mut parser = Parser::new(text)?;
    let (name, raws, sys_pos) = parser.file()?;
    let mut machines: BTreeMap<Participant, Cfsm> = BTreeMap::new();
    for raw in raws {
        if machines.contains_key(&raw.subject) {
            return Err(Error::Parse {
                pos: raw.pos,
                message: format!("machine {} is declared twice", raw.subject),
            });
        }
        let pos = raw.pos;
        let m = Cfsm::new(raw.subject, raw.fsa).map_err(|e| Error::Parse {
            pos,
            message: e.to_string(),
        })?;
        machines.insert(m.subject().clone(), m);
    }
    System::new(name, machines).map_err(|e| Error::Parse {
        pos: sys_pos,
        message: e.to_string(),
    })
}

fn render_edge(t: &Transition) -> String {
    match &t.label {
        ActionLabel::Tau => format!("{} tau {}", t.source, t.target),
        ActionLabel::Output { receiver, msg, .. } => {
            format!("{} ! {} {} {}", t.source, receiver, msg, t.target)
        }
        ActionLabel::Input { sender, msg, .. } => {
            format!("{} ? {} {} {}", t.source, sender, msg, t.target)
        }
    }
}

fn serialize_parts(
    sys: &System,
    header: &[String],
    machine_comments: &BTreeMap<Participant, Vec<String>>,
) -> String {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "system {}", sys.name());
    for (p, m) in sys.machines() {
        let _ = writeln!(out);
        for line in machine_comments.get(p).into_iter().flatten() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "machine {p} {{");
        let _ = writeln!(out, "  init {}", m.fsa().initial());
        for t in m.fsa().transitions() {
            let _ = writeln!(out, "  {}", render_edge(t));
        }
        let _ = writeln!(out, "}}");
    }
    out
}

/// Canonical text: machines sorted by participant, edges sorted by
/// (source, label, target); parsing the output reproduces the system.
/// States that neither appear in an edge nor are initial are not
/// expressible in the grammar and are dropped.
pub fn serialize_system(sys: &System) -> String {
    serialize_parts(sys, &[], &BTreeMap::new())
}

fn origin_comment(state: &StateId, origin: &FreshStateOrigin) -> String {
    match origin {
        FreshStateOrigin::ForwardPrefix {
            tau_source,
            tau_target,
            msg,
        } => format!("{state}: forward prefix of {tau_source} tau {tau_target} carrying {msg}"),
        FreshStateOrigin::InputEntry {
            input_source,
            input_target,
            sender,
            msg,
        } => format!("{state}: entry of {input_source} ? {sender} {msg} {input_target}"),
        FreshStateOrigin::OutputPending {
            input_source,
            input_target,
            sender,
            msg,
        } => format!(
            "{state}: pending relay of {msg} (received from {sender} at {input_source}) towards {input_target}"
        ),
    }
}

fn gateway_comments(owner: &Participant, gw: &Gateway) -> Vec<String> {
    let mut lines = vec![format!("gateway {owner} relaying to {}", gw.peer())];
    let external: Vec<String> = gw.external_states().iter().map(|s| s.to_string()).collect();
    lines.push(format!("external states: {}", external.join(", ")));
    for (state, origin) in gw.provenance() {
        lines.push(origin_comment(state, origin));
    }
    lines
}

/// Like [`serialize_system`] but with a header naming the two composed
/// systems and, above each gateway machine, comments tracing every fresh
/// state back to the transition that spawned it.
pub fn serialize_composed(cs: &ComposedSystem) -> String {
    let header = vec![format!(
        "composition of {} (interface {}) with {} (interface {})",
        cs.left().name(),
        cs.h(),
        cs.right().name(),
        cs.k()
    )];
    let comments = [
        (cs.h().clone(), gateway_comments(cs.h(), cs.left_gateway())),
        (cs.k().clone(), gateway_comments(cs.k(), cs.right_gateway())),
    ]
    .into();
    serialize_parts(cs.system(), &header, &comments)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT graph of one machine; the initial state is double-circled.
pub fn export_dot_machine(m: &Cfsm) -> String {
    let mut out = String::new();
    let name: String = m
        .subject()
        .as_str()
        .chars()
        .map(|c| if c == '\'' { '_' } else { c })
        .collect();
    let _ = writeln!(out, "digraph machine_{name} {{");
    let _ = writeln!(out, "  rankdir=LR;");
    for q in m.fsa().states() {
        let shape = if q == m.fsa().initial() {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(out, "  \"{}\" [shape={shape}];", dot_escape(q.as_str()));
    }
    for t in m.fsa().transitions() {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            dot_escape(t.source.as_str()),
            dot_escape(t.target.as_str()),
            dot_escape(&t.label.to_string())
        );
    }
    let _ = writeln!(out, "}}");
    out
}

/// DOT graph of a built transition system; nodes are configuration indices
/// labelled with the configuration, the initial one double-circled.
pub fn export_dot_lts(lts: &SemLts) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph semantics {{");
    let _ = writeln!(out, "  rankdir=LR;");
    for (ix, c) in lts.configurations().iter().enumerate() {
        let shape = if ix == lts.initial() {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(
            out,
            "  {ix} [label=\"{}\", shape={shape}];",
            dot_escape(&c.to_string())
        );
    }
    for e in lts.edges() {
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\"];",
            e.source,
            e.target,
            dot_escape(&e.label.to_string())
        );
    }
    let _ = writeln!(out, "}}");
    out
}

fn config_to_json(lts: &SemLts, ix: usize) -> Value {
    let mut map = serde_json::Map::new();
    for (p, q) in lts.config(ix).entries() {
        map.insert(p.to_string(), Value::String(q.to_string()));
    }
    Value::Object(map)
}

/// JSON rendering of a property report:
/// `{property, holds, witnesses: [{kind, config, participant?, evidence}]}`.
/// Lock evidence lists reachable configurations, run evidence lists labels
/// with an optional `cycle_start` marking where the repetition begins.
pub fn report_to_json(report: &PropertyReport, lts: &SemLts) -> Value {
    let witnesses: Vec<Value> = report
        .witnesses
        .iter()
        .map(|w| {
            let mut obj = serde_json::Map::new();
            obj.insert("kind".into(), json!(w.kind.to_string()));
            obj.insert("config".into(), config_to_json(lts, w.config));
            if let Some(p) = &w.participant {
                obj.insert("participant".into(), json!(p.to_string()));
            }
            let evidence: Vec<Value> = match &w.evidence {
                WitnessEvidence::None => Vec::new(),
                WitnessEvidence::ReachableConfigs(configs) => configs
                    .iter()
                    .map(|&ix| Value::String(lts.config(ix).to_string()))
                    .collect(),
                WitnessEvidence::MaximalRun { labels, cycle_start } => {
                    if let Some(at) = cycle_start {
                        obj.insert("cycle_start".into(), json!(at));
                    }
                    labels
                        .iter()
                        .map(|l| Value::String(l.to_string()))
                        .collect()
                }
            };
            obj.insert("evidence".into(), Value::Array(evidence));
            Value::Object(obj)
        })
        .collect();
    json!({
        "property": report.property.to_string(),
        "holds": report.holds,
        "truncated": report.truncated,
        "witnesses": witnesses,
    })
}

/// JSON rendering of a compatibility certificate: the surviving state pairs.
pub fn certificate_to_json(rel: &IoCorrespondence) -> Value {
    let pairs: Vec<Value> = rel
        .pairs()
        .iter()
        .map(|(a, b)| json!([a.to_string(), b.to_string()]))
        .collect();
    json!({ "pairs": pairs })
}

/// JSON rendering of a fuzz campaign report, violations in full.
pub fn fuzz_report_to_json(report: &FuzzReport) -> Value {
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| {
            json!({
                "iteration": v.iteration,
                "seed": v.seed,
                "theorem": v.theorem,
                "witness": v.witness,
                "left_system": v.left_system,
                "right_system": v.right_system,
            })
        })
        .collect();
    json!({
        "params": {
            "seed": report.params.seed,
            "iterations": report.params.iterations,
            "max_states": report.params.max_states,
            "max_participants": report.params.max_participants,
            "messages": report.params.messages,
            "require_sequential_gateways": report.params.require_sequential_gateways,
        },
        "checked": report.checked,
        "skipped": report.skipped,
        "composable_pairs": report.composable_pairs,
        "df_pairs": report.df_pairs,
        "lf_pairs": report.lf_pairs,
        "slf_pairs": report.slf_pairs,
        "clean": report.clean(),
        "violations": violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::gateway::compose_systems;
    use crate::machine::normalize_outputs;
    use crate::properties::find_deadlocks;
    use crate::semantics::build_semantics;
    use crate::testutil::*;
    use proptest::prelude::*;

    const VALID_FIXTURES: [&str; 12] = [
        "ex_sem",
        "ex_gc_s1",
        "ex_gc_s2",
        "dlfree_s1",
        "dlfree_s2",
        "incompat_s1",
        "incompat_s2",
        "mixed_s1",
        "mixed_s2",
        "lfcex_s1",
        "lfcex_s2",
        "all_terminal",
    ];

    #[test]
    fn every_valid_fixture_parses() {
        for name in VALID_FIXTURES {
            parse_system_file(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn raw_fixtures_parse_raw_and_fail_validation_until_normalized() {
        for name in ["sync_s1", "sync_s2"] {
            let text = fixture(name);
            assert!(matches!(parse_system_file(text), Err(Error::Parse { .. })));
            let (_, raws) = parse_machines_raw(text).unwrap();
            for raw in raws {
                normalize_outputs(&raw.fsa, &raw.subject)
                    .unwrap_or_else(|e| panic!("{name}/{}: {e}", raw.subject));
            }
        }
    }

    #[test]
    fn parsed_relay_fixture_matches_the_handwritten_system() {
        let parsed = parse_system_file(fixture("ex_sem")).unwrap();
        assert_eq!(parsed.machines(), relay_system().machines());
        assert_eq!(build_semantics(&parsed).unwrap().configurations().len(), 12);
    }

    #[test]
    fn canonical_serialization_is_a_fixpoint() {
        for name in VALID_FIXTURES {
            let once = serialize_system(&parse_system_file(fixture(name)).unwrap());
            let twice = serialize_system(&parse_system_file(&once).unwrap());
            assert_eq!(once, twice, "{name}");
        }
    }

    #[test]
    fn canonical_layout_is_pinned() {
        let expect = "\
system relay

machine C {
  init 0
  0 ? E s 3
  0 ? K m 1
  1 tau 2
  2 ! E c 3
}

machine D {
  init 0
  0 ? E s 3
  0 ? K n 1
  1 tau 2
  2 ! E d 3
}

machine E {
  init 0
  0 ? C c 4
  0 ? D d 1
  1 tau 2
  2 ! C s 3
  4 tau 5
  5 ! D s 3
}

machine K {
  init 0
  0 tau 1
  0 tau 2
  1 ! C m 3
  2 ! D n 3
}
";
        let parsed = parse_system_file(fixture("ex_sem")).unwrap();
        assert_eq!(serialize_system(&parsed), expect);
    }

    #[test]
    fn self_communication_is_a_located_error() {
        let text = "system s\nmachine A {\n  init 0\n  0 ! A m 1\n}\n";
        let Err(Error::Parse { pos, message }) = parse_system_file(text) else {
            panic!("self-send must be rejected");
        };
        assert_eq!((pos.line, pos.col), (4, 7));
        assert!(message.contains("both sender and receiver"), "{message}");
    }

    #[test]
    fn duplicate_init_is_a_syntax_error() {
        let text = "system s\nmachine A {\n  init 0\n  init 1\n}\n";
        let Err(Error::Parse { pos, message }) = parse_system_file(text) else {
            panic!("duplicate init must be rejected");
        };
        assert_eq!(pos.line, 4);
        assert!(message.contains("duplicate init"));
    }

    #[test]
    fn stray_characters_are_located() {
        let text = "system s\nmachine A {\n  init 0\n  0 @ 1\n}\n";
        let Err(Error::Parse { pos, .. }) = parse_system_file(text) else {
            panic!("stray character must be rejected");
        };
        assert_eq!((pos.line, pos.col), (4, 5));
    }

    #[test]
    fn reserved_words_cannot_name_things() {
        for text in [
            "system tau\nmachine A {\n  init 0\n}\n",
            "system s\nmachine init {\n  init 0\n}\n",
            "system s\nmachine A {\n  init machine\n}\n",
        ] {
            assert!(matches!(parse_system_file(text), Err(Error::Parse { .. })));
        }
    }

    #[test]
    fn duplicate_machines_are_rejected() {
        let text = "system s\nmachine A {\n  init 0\n}\nmachine A {\n  init 0\n}\n";
        let Err(Error::Parse { message, .. }) = parse_system_file(text) else {
            panic!("duplicate machine must be rejected");
        };
        assert!(message.contains("declared twice"));
    }

    #[test]
    fn truncated_files_report_end_of_input() {
        let Err(Error::Parse { message, .. }) = parse_system_file("system s\nmachine A {\n  init 0\n")
        else {
            panic!("truncated file must be rejected");
        };
        assert!(message.contains("end of input"), "{message}");
    }

    #[test]
    fn machine_dot_export_shapes() {
        let m = cfsm(
            "A",
            "0",
            [
                ("0", ActionLabel::Tau, "1"),
                ("1", out("A", "B", "m"), "2"),
                ("2", inp("B", "A", "k"), "0"),
            ],
        );
        let dot = export_dot_machine(&m);
        assert!(dot.contains("\"0\" [shape=doublecircle];"));
        assert!(dot.contains("\"1\" [shape=circle];"));
        assert!(dot.contains("\"0\" -> \"1\" [label=\"tau\"];"));
        assert!(dot.contains("\"1\" -> \"2\" [label=\"A->B!m\"];"));
        assert!(dot.contains("\"2\" -> \"0\" [label=\"B->A?k\"];"));
    }

    #[test]
    fn lts_dot_export_lists_every_configuration() {
        let lts = build_semantics(&relay_system()).unwrap();
        let dot = export_dot_lts(&lts);
        assert_eq!(dot.matches("[label=\"(").count(), 12);
        assert!(dot.contains("[label=\"K->C:m\"];"));
        assert!(dot.contains("0 [label=\"(C=0, D=0, E=0, K=0)\", shape=doublecircle];"));
    }

    #[test]
    fn composed_serialization_carries_provenance_and_reparses() {
        let s1 = parse_system_file(fixture("ex_gc_s1")).unwrap();
        let s2 = parse_system_file(fixture("ex_gc_s2")).unwrap();
        let cs = compose_systems(&s1, &p("H"), &s2, &p("K"), false).unwrap();
        let text = serialize_composed(&cs);
        assert!(text.contains("# gateway H relaying to K"));
        assert!(text.contains("# gateway K relaying to H"));
        assert!(text.contains("0_in_1"));
        assert!(text.contains("external states"));
        let parsed = parse_system_file(&text).unwrap();
        assert_eq!(&parsed, cs.system());
    }

    #[test]
    fn witness_json_has_the_documented_shape() {
        // A waits for x, B sends y: deadlock at the initial configuration.
        let s = sys(
            "stuck",
            [
                cfsm("A", "0", [("0", inp("B", "A", "x"), "1")]),
                cfsm(
                    "B",
                    "0",
                    [("0", ActionLabel::Tau, "1"), ("1", out("B", "A", "y"), "2")],
                ),
            ],
        );
        let lts = build_semantics(&s).unwrap();
        let report = find_deadlocks(&s, &lts).unwrap();
        let v = report_to_json(&report, &lts);
        assert_eq!(v["property"], "deadlock-freedom");
        assert_eq!(v["holds"], false);
        let w = &v["witnesses"][0];
        assert_eq!(w["kind"], "deadlock");
        assert_eq!(w["config"]["A"], "0");
        assert_eq!(w["config"]["B"], "1");
        assert!(w["evidence"].as_array().unwrap().is_empty());
    }

    #[test]
    fn certificate_json_lists_pairs() {
        let h = relay_system().machine(&p("C")).unwrap().clone();
        let k = crate::fuzz::derive_compatible_peer(&h, &p("X"), &p("Y")).unwrap();
        let (ok, rel) = crate::compat::check_compatibility(&h, &k);
        assert!(ok);
        let v = certificate_to_json(&rel);
        assert!(!v["pairs"].as_array().unwrap().is_empty());
    }

    /// Drops states that appear in no transition and are not initial; the
    /// textual format cannot express them, so round-tripping loses them.
    fn prune_isolated(s: &System) -> System {
        let machines = s
            .machines()
            .iter()
            .map(|(p, m)| {
                let f = m.fsa();
                let mut keep: BTreeSet<StateId> = [f.initial().clone()].into();
                for t in f.transitions() {
                    keep.insert(t.source.clone());
                    keep.insert(t.target.clone());
                }
                let pruned =
                    Fsa::new(keep, f.initial().clone(), f.transitions().clone()).unwrap();
                (p.clone(), Cfsm::new(p.clone(), pruned).unwrap())
            })
            .collect();
        System::new(s.name().clone(), machines).unwrap()
    }

    proptest! {
        #[test]
        fn random_systems_round_trip(seed in any::<u64>()) {
            let params = crate::fuzz::FuzzParams { seed, ..Default::default() };
            let (system, _) = crate::fuzz::random_system(&params).unwrap();
            let text = serialize_system(&system);
            let reparsed = parse_system_file(&text).unwrap();
            prop_assert_eq!(&reparsed, &prune_isolated(&system));
            prop_assert_eq!(serialize_system(&reparsed), text);
        }
    }
}
