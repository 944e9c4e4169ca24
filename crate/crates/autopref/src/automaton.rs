//! Deterministic finite automata over event alphabets.
//!
//! A [`Dfa`] encodes the temporal structure of a task: states track progress,
//! events (emitted by an environment's labeling function) drive transitions,
//! and reaching an accepting state means the task is complete. The transition
//! map is total: any `(state, event)` pair not written in the specification
//! text self-loops, and the reserved null event self-loops everywhere.
//!
//! Beyond simulation ([`Dfa::run_trace`]), the module provides the graph
//! analytics the rest of the crate is built on: shortest distance to
//! acceptance, potentials for reward shaping, and the set of *progress*
//! events from a state (events that strictly decrease the distance to
//! acceptance).

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

/// Index of a DFA state.
pub type DfaStateId = usize;
/// Index of an event symbol in a DFA's alphabet.
pub type EventId = usize;

/// Reserved name of the null event. It is implicit in specification text and
/// may not be declared or used in transition rules.
pub const NULL_EVENT_NAME: &str = "null";

/// Errors produced while parsing a DFA specification document.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DfaParseError {
    #[error("line {line}: expected `dfa <name>` header")]
    MissingHeader { line: usize },
    #[error("line {line}, col {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: duplicate `{directive}` declaration")]
    DuplicateDirective { line: usize, directive: &'static str },
    #[error("missing `{0}` declaration")]
    MissingDirective(&'static str),
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: unknown event `{name}`")]
    UnknownEvent { line: usize, name: String },
    #[error("line {line}: duplicate transition for ({state}, {event})")]
    DuplicateTransition { line: usize, state: String, event: String },
    #[error("line {line}: duplicate {kind} name `{name}`")]
    DuplicateName { line: usize, kind: &'static str, name: String },
    #[error("line {line}: `{NULL_EVENT_NAME}` is reserved and implicit")]
    ReservedNullEvent { line: usize },
}

/// Errors from DFA operations whose preconditions involve the graph shape.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DfaError {
    #[error("state `{0}` cannot reach any accepting state")]
    UnreachableAcceptance(String),
}

/// A deterministic finite automaton with a total transition map.
///
/// Values are immutable after construction; distances to acceptance are
/// precomputed so that trace simulation and progress queries are table
/// lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    name: String,
    states: Vec<String>,
    /// Event names; index 0 is always the reserved null event.
    events: Vec<String>,
    initial: DfaStateId,
    accepting: Vec<bool>,
    /// `transitions[state][event]` — total by construction.
    transitions: Vec<Vec<DfaStateId>>,
    /// Shortest number of transitions to an accepting state, `None` if none
    /// is reachable.
    dist: Vec<Option<u32>>,
    /// Per event: is it a progress event from at least one state?
    progress_somewhere: Vec<bool>,
    /// Per event: does it complete the task (progress transition into an
    /// accepting state) from at least one state?
    goal_event: Vec<bool>,
}

/// Result of running an event word through a DFA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfaTrace {
    /// Visited states, starting at the initial state; length = word length + 1.
    pub visited: Vec<DfaStateId>,
    /// Whether the final visited state is accepting.
    pub accepted: bool,
    /// Number of steps that strictly decreased the distance to acceptance.
    pub progress_count: usize,
}

/// The null event's index in every DFA alphabet.
pub const NULL_EVENT: EventId = 0;

impl Dfa {
    /// Builds a DFA from parts. Transition rules are given as
    /// `(state, event, target)` index triples; unspecified pairs self-loop.
    ///
    /// `events` must not contain the reserved null name; it is inserted at
    /// index 0 automatically.
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        events: Vec<String>,
        initial: DfaStateId,
        accepting: &[DfaStateId],
        rules: &[(DfaStateId, EventId, DfaStateId)],
    ) -> Self {
        assert!(initial < states.len(), "initial state out of range");
        assert!(
            !events.iter().any(|e| e == NULL_EVENT_NAME),
            "`{NULL_EVENT_NAME}` is reserved"
        );
        let mut all_events = Vec::with_capacity(events.len() + 1);
        all_events.push(NULL_EVENT_NAME.to_string());
        all_events.extend(events);

        let n = states.len();
        let mut transitions: Vec<Vec<DfaStateId>> =
            (0..n).map(|q| vec![q; all_events.len()]).collect();
        for &(q, e, t) in rules {
            assert!(q < n && t < n && e < all_events.len(), "rule out of range");
            assert!(e != NULL_EVENT, "null transitions are implicit");
            transitions[q][e] = t;
        }
        let mut is_accepting = vec![false; n];
        for &q in accepting {
            assert!(q < n, "accepting state out of range");
            is_accepting[q] = true;
        }

        let dist = distances(&transitions, &is_accepting);
        let ne = all_events.len();
        let mut progress_somewhere = vec![false; ne];
        let mut goal_event = vec![false; ne];
        for q in 0..n {
            for e in 1..ne {
                let t = transitions[q][e];
                if is_progress(&dist, q, t) {
                    progress_somewhere[e] = true;
                    if is_accepting[t] {
                        goal_event[e] = true;
                    }
                }
            }
        }

        Dfa {
            name: name.into(),
            states,
            events: all_events,
            initial,
            accepting: is_accepting,
            transitions,
            dist,
            progress_somewhere,
            goal_event,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of states.
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Number of events, including the null event.
    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn initial(&self) -> DfaStateId {
        self.initial
    }

    pub fn state_name(&self, q: DfaStateId) -> &str {
        &self.states[q]
    }

    pub fn event_name(&self, e: EventId) -> &str {
        &self.events[e]
    }

    /// Looks up a state by name.
    pub fn state_id(&self, name: &str) -> Option<DfaStateId> {
        self.states.iter().position(|s| s == name)
    }

    /// Looks up an event by name. `"null"` resolves to [`NULL_EVENT`].
    pub fn event_id(&self, name: &str) -> Option<EventId> {
        self.events.iter().position(|e| e == name)
    }

    pub fn is_accepting(&self, q: DfaStateId) -> bool {
        self.accepting[q]
    }

    /// The transition function. Out-of-range ids are a usage fault and panic.
    pub fn step(&self, q: DfaStateId, e: EventId) -> DfaStateId {
        self.transitions[q][e]
    }

    /// Runs an event word from the initial state.
    pub fn run_trace(&self, events: &[EventId]) -> DfaTrace {
        let mut visited = Vec::with_capacity(events.len() + 1);
        let mut q = self.initial;
        visited.push(q);
        let mut progress_count = 0;
        for &e in events {
            let next = self.step(q, e);
            if is_progress(&self.dist, q, next) {
                progress_count += 1;
            }
            q = next;
            visited.push(q);
        }
        DfaTrace {
            accepted: self.accepting[q],
            visited,
            progress_count,
        }
    }

    /// Shortest number of transitions from `q` to any accepting state, or
    /// `None` if no accepting state is reachable.
    pub fn distance_to_acceptance(&self, q: DfaStateId) -> Option<u32> {
        self.dist[q]
    }

    /// Shaping potential: `Φ(q) = -distance_to_acceptance(q)`. Accepting
    /// states have potential 0 and potentials strictly increase along
    /// progress transitions.
    pub fn potential(&self, q: DfaStateId) -> Result<f64, DfaError> {
        match self.dist[q] {
            Some(d) => Ok(-(d as f64)),
            None => Err(DfaError::UnreachableAcceptance(self.states[q].clone())),
        }
    }

    /// Events that strictly decrease the distance to acceptance from `q`.
    pub fn progress_events(&self, q: DfaStateId) -> Vec<EventId> {
        (1..self.events.len())
            .filter(|&e| self.is_progress(q, e))
            .collect()
    }

    /// Whether taking `e` from `q` strictly decreases distance to acceptance.
    pub fn is_progress(&self, q: DfaStateId, e: EventId) -> bool {
        is_progress(&self.dist, q, self.transitions[q][e])
    }

    /// Whether `e` is a progress event from at least one state. Used to
    /// detect out-of-order subgoal attempts.
    pub fn is_progress_somewhere(&self, e: EventId) -> bool {
        self.progress_somewhere[e]
    }

    /// Whether `e` completes the task (a progress transition into an
    /// accepting state) from some state.
    pub fn is_goal_event(&self, e: EventId) -> bool {
        self.goal_event[e]
    }

    /// Renders the DFA back into specification text. Self-loops and null
    /// transitions are implicit and omitted; `parse_dfa` on the output
    /// reproduces the DFA exactly.
    pub fn to_spec_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "dfa {}", self.name).unwrap();
        writeln!(out, "events: {}", self.events[1..].join(" ")).unwrap();
        writeln!(out, "states: {}", self.states.join(" ")).unwrap();
        writeln!(out, "initial: {}", self.states[self.initial]).unwrap();
        let accepting: Vec<&str> = (0..self.num_states())
            .filter(|&q| self.accepting[q])
            .map(|q| self.states[q].as_str())
            .collect();
        writeln!(out, "accepting: {}", accepting.join(" ")).unwrap();
        for q in 0..self.num_states() {
            for e in 1..self.num_events() {
                let t = self.transitions[q][e];
                if t != q {
                    writeln!(out, "{} -{}-> {}", self.states[q], self.events[e], self.states[t])
                        .unwrap();
                }
            }
        }
        out
    }
}

fn is_progress(dist: &[Option<u32>], from: DfaStateId, to: DfaStateId) -> bool {
    match (dist[from], dist[to]) {
        (Some(df), Some(dt)) => dt < df,
        _ => false,
    }
}

/// Multi-source reverse BFS from the accepting states. The null event (index
/// 0) is excluded; by construction it only self-loops, so this is cosmetic.
fn distances(transitions: &[Vec<DfaStateId>], accepting: &[bool]) -> Vec<Option<u32>> {
    let n = transitions.len();
    let mut rev: Vec<Vec<DfaStateId>> = vec![Vec::new(); n];
    for (q, row) in transitions.iter().enumerate() {
        for (&t, _e) in row.iter().zip(0..).skip(1) {
            rev[t].push(q);
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for q in 0..n {
        if accepting[q] {
            dist[q] = Some(0);
            queue.push_back(q);
        }
    }
    while let Some(q) = queue.pop_front() {
        let d = dist[q].unwrap();
        for &p in &rev[q] {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

/// Parses the line-oriented DFA specification format.
///
/// ```text
/// dfa chain3
/// events: a g
/// states: q0 q1 q2
/// initial: q0
/// accepting: q2
/// q0 -a-> q1
/// q1 -g-> q2
/// ```
///
/// `#` starts a comment. Unlisted `(state, event)` pairs self-loop, and the
/// null event is implicit and never written.
pub fn parse_dfa(text: &str) -> Result<Dfa, DfaParseError> {
    struct Decl<'a> {
        line: usize,
        items: Vec<(&'a str, usize)>,
    }

    let mut name: Option<&str> = None;
    let mut decls: HashMap<&'static str, Decl> = HashMap::new();
    let mut rules: Vec<(usize, (&str, usize), (&str, usize), (&str, usize))> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }

        // Tokens with their 1-based column positions.
        let tokens: Vec<(&str, usize)> = split_tokens(line);

        if name.is_none() {
            if tokens[0].0 != "dfa" || tokens.len() != 2 {
                return Err(DfaParseError::MissingHeader { line: line_no });
            }
            name = Some(tokens[1].0);
            continue;
        }

        let head = tokens[0].0;
        if let Some(directive) = ["events:", "states:", "initial:", "accepting:"]
            .iter()
            .find(|d| **d == head)
        {
            let key = &directive[..directive.len() - 1];
            let key: &'static str = match key {
                "events" => "events",
                "states" => "states",
                "initial" => "initial",
                _ => "accepting",
            };
            if decls.contains_key(key) {
                return Err(DfaParseError::DuplicateDirective { line: line_no, directive: key });
            }
            decls.insert(
                key,
                Decl { line: line_no, items: tokens[1..].to_vec() },
            );
            continue;
        }

        // Transition rule: `src -event-> dst`.
        if tokens.len() == 3 {
            let (mid, mid_col) = tokens[1];
            if let Some(event) = mid.strip_prefix('-').and_then(|m| m.strip_suffix("->")) {
                if event.is_empty() {
                    return Err(DfaParseError::Syntax {
                        line: line_no,
                        col: mid_col,
                        msg: "empty event in transition rule".to_string(),
                    });
                }
                rules.push((line_no, tokens[0], (event, mid_col + 1), tokens[2]));
                continue;
            }
        }
        return Err(DfaParseError::Syntax {
            line: line_no,
            col: tokens[0].1,
            msg: format!("expected directive or `state -event-> state`, found `{}`", line.trim()),
        });
    }

    if name.is_none() {
        return Err(DfaParseError::MissingHeader { line: text.lines().count() + 1 });
    }

    let states_decl = decls.remove("states").ok_or(DfaParseError::MissingDirective("states"))?;
    let events_decl = decls.remove("events").ok_or(DfaParseError::MissingDirective("events"))?;
    let initial_decl = decls.remove("initial").ok_or(DfaParseError::MissingDirective("initial"))?;
    let accepting_decl =
        decls.remove("accepting").ok_or(DfaParseError::MissingDirective("accepting"))?;

    let mut state_ids: HashMap<&str, DfaStateId> = HashMap::new();
    let mut states = Vec::new();
    for (tok, _col) in &states_decl.items {
        if state_ids.insert(tok, states.len()).is_some() {
            return Err(DfaParseError::DuplicateName {
                line: states_decl.line,
                kind: "state",
                name: tok.to_string(),
            });
        }
        states.push(tok.to_string());
    }
    if states.is_empty() {
        return Err(DfaParseError::Syntax {
            line: states_decl.line,
            col: 1,
            msg: "at least one state is required".to_string(),
        });
    }

    let mut event_ids: HashMap<&str, EventId> = HashMap::new();
    let mut events = Vec::new();
    for (tok, _col) in &events_decl.items {
        if *tok == NULL_EVENT_NAME {
            return Err(DfaParseError::ReservedNullEvent { line: events_decl.line });
        }
        if event_ids.insert(tok, events.len() + 1).is_some() {
            return Err(DfaParseError::DuplicateName {
                line: events_decl.line,
                kind: "event",
                name: tok.to_string(),
            });
        }
        events.push(tok.to_string());
    }

    let lookup_state = |line: usize, tok: &str| -> Result<DfaStateId, DfaParseError> {
        state_ids
            .get(tok)
            .copied()
            .ok_or_else(|| DfaParseError::UnknownState { line, name: tok.to_string() })
    };

    if initial_decl.items.len() != 1 {
        return Err(DfaParseError::Syntax {
            line: initial_decl.line,
            col: 1,
            msg: "`initial:` takes exactly one state".to_string(),
        });
    }
    let initial = lookup_state(initial_decl.line, initial_decl.items[0].0)?;

    let mut accepting = Vec::new();
    for (tok, _col) in &accepting_decl.items {
        accepting.push(lookup_state(accepting_decl.line, tok)?);
    }

    let mut seen: HashMap<(DfaStateId, EventId), ()> = HashMap::new();
    let mut resolved_rules = Vec::new();
    for (line, (src, _), (event, _), (dst, _)) in rules {
        if event == NULL_EVENT_NAME {
            return Err(DfaParseError::ReservedNullEvent { line });
        }
        let q = lookup_state(line, src)?;
        let e = *event_ids
            .get(event)
            .ok_or_else(|| DfaParseError::UnknownEvent { line, name: event.to_string() })?;
        let t = lookup_state(line, dst)?;
        if seen.insert((q, e), ()).is_some() {
            return Err(DfaParseError::DuplicateTransition {
                line,
                state: src.to_string(),
                event: event.to_string(),
            });
        }
        resolved_rules.push((q, e, t));
    }

    Ok(Dfa::new(name.unwrap(), states, events, initial, &accepting, &resolved_rules))
}

fn split_tokens(line: &str) -> Vec<(&str, usize)> {
    let mut tokens = Vec::new();
    let mut offset = 0;
    for piece in line.split_whitespace() {
        let start = line[offset..].find(piece).unwrap() + offset;
        tokens.push((piece, start + 1));
        offset = start + piece.len();
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CHAIN3: &str = "\
dfa chain3
events: a g
states: q0 q1 q2
initial: q0
accepting: q2
q0 -a-> q1
q1 -g-> q2
";

    fn chain3() -> Dfa {
        parse_dfa(CHAIN3).unwrap()
    }

    #[test]
    fn parses_chain3_fixture() {
        let d = chain3();
        assert_eq!(d.num_states(), 3);
        assert_eq!(d.name(), "chain3");
        assert_eq!(d.initial(), d.state_id("q0").unwrap());
        assert!(d.is_accepting(d.state_id("q2").unwrap()));
        assert_eq!(d.num_events(), 3); // null + a + g
        assert_eq!(d.event_id("null"), Some(NULL_EVENT));
    }

    #[test]
    fn missing_initial_is_an_error() {
        let text = "dfa d\nevents: a\nstates: q0\naccepting: q0\n";
        assert_eq!(parse_dfa(text), Err(DfaParseError::MissingDirective("initial")));
    }

    #[test]
    fn missing_accepting_is_an_error() {
        let text = "dfa d\nevents: a\nstates: q0\ninitial: q0\n";
        assert_eq!(parse_dfa(text), Err(DfaParseError::MissingDirective("accepting")));
    }

    #[test]
    fn duplicate_transition_is_an_error() {
        let text = format!("{CHAIN3}q0 -a-> q2\n");
        assert!(matches!(
            parse_dfa(&text),
            Err(DfaParseError::DuplicateTransition { state, event, .. })
                if state == "q0" && event == "a"
        ));
    }

    #[test]
    fn unknown_state_and_event_are_errors() {
        let text = format!("{CHAIN3}q0 -g-> q7\n");
        assert!(matches!(
            parse_dfa(&text),
            Err(DfaParseError::UnknownState { name, .. }) if name == "q7"
        ));
        let text = format!("{CHAIN3}q1 -zap-> q2\n");
        assert!(matches!(
            parse_dfa(&text),
            Err(DfaParseError::UnknownEvent { name, .. }) if name == "zap"
        ));
        let text = "dfa d\nevents: a\nstates: q0\ninitial: qx\naccepting: q0\n";
        assert!(matches!(
            parse_dfa(text),
            Err(DfaParseError::UnknownState { name, .. }) if name == "qx"
        ));
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let text = "dfa d\nevents: a\nstates: q0 q1\ninitial: q0\naccepting: q1\n  q0 => q1\n";
        match parse_dfa(text) {
            Err(DfaParseError::Syntax { line, col, .. }) => {
                assert_eq!(line, 6);
                assert_eq!(col, 3);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn null_event_is_reserved() {
        let text = "dfa d\nevents: null\nstates: q0\ninitial: q0\naccepting: q0\n";
        assert!(matches!(parse_dfa(text), Err(DfaParseError::ReservedNullEvent { line: 2 })));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header comment\n\n{CHAIN3}\n# trailing\n");
        assert_eq!(parse_dfa(&text).unwrap(), chain3());
    }

    #[test]
    fn step_follows_rules_and_defaults_to_self_loops() {
        let d = chain3();
        let (q0, q1) = (d.state_id("q0").unwrap(), d.state_id("q1").unwrap());
        let a = d.event_id("a").unwrap();
        assert_eq!(d.step(q0, NULL_EVENT), q0);
        assert_eq!(d.step(q0, a), q1);
        assert_eq!(d.step(q1, a), q1); // unspecified pair self-loops
    }

    #[test]
    fn run_trace_simulates_the_word() {
        let d = chain3();
        let a = d.event_id("a").unwrap();
        let g = d.event_id("g").unwrap();

        let t = d.run_trace(&[NULL_EVENT, a, g]);
        assert_eq!(t.visited, vec![0, 0, 1, 2]);
        assert!(t.accepted);
        assert_eq!(t.progress_count, 2);

        let t = d.run_trace(&[]);
        assert_eq!(t.visited, vec![0]);
        assert!(!t.accepted);

        let t = d.run_trace(&[g, a]);
        assert_eq!(t.visited, vec![0, 0, 1]);
        assert!(!t.accepted);
        assert_eq!(t.progress_count, 1);
    }

    #[test]
    fn distances_and_potentials() {
        let d = chain3();
        assert_eq!(d.distance_to_acceptance(0), Some(2));
        assert_eq!(d.distance_to_acceptance(1), Some(1));
        assert_eq!(d.distance_to_acceptance(2), Some(0));
        assert_eq!(d.potential(0).unwrap(), -2.0);
        assert_eq!(d.potential(1).unwrap(), -1.0);
        assert_eq!(d.potential(2).unwrap(), 0.0);
    }

    #[test]
    fn disconnected_accepting_state_is_unreachable() {
        let text = "dfa d\nevents: a\nstates: q0 q1\ninitial: q0\naccepting: q1\n";
        let d = parse_dfa(text).unwrap();
        assert_eq!(d.distance_to_acceptance(0), None);
        assert!(matches!(d.potential(0), Err(DfaError::UnreachableAcceptance(s)) if s == "q0"));
    }

    #[test]
    fn progress_events_list_distance_decreasing_events() {
        let d = chain3();
        let a = d.event_id("a").unwrap();
        assert_eq!(d.progress_events(0), vec![a]);
        assert!(d.progress_events(2).is_empty());
        assert!(d.is_progress_somewhere(d.event_id("g").unwrap()));
        assert!(d.is_goal_event(d.event_id("g").unwrap()));
        assert!(!d.is_goal_event(a));
    }

    #[test]
    fn bellman_property_of_distances() {
        let d = chain3();
        for q in 0..d.num_states() {
            let expected = if d.is_accepting(q) {
                Some(0)
            } else {
                (1..d.num_events())
                    .filter_map(|e| d.distance_to_acceptance(d.step(q, e)))
                    .min()
                    .map(|m| m + 1)
            };
            assert_eq!(d.distance_to_acceptance(q), expected, "state {q}");
        }
    }

    #[test]
    fn serialize_round_trips() {
        let d = chain3();
        assert_eq!(parse_dfa(&d.to_spec_text()).unwrap(), d);
    }
}
