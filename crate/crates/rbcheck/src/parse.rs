//! Line-oriented parsers for the template, timed-template and specification
//! file formats. Parsing is strict: duplicate declarations are errors, names
//! must match `[A-Za-z_][A-Za-z0-9_]*`, and `b` is reserved for broadcast.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::automata::{EdgePattern, FieldPattern, LetterPattern, SpecAutomaton, SpecTransition};
use crate::model::{
    ActionId, Edge, EdgeId, EdgeLabel, ProcessTemplate, RendezvousAction, StateId,
};
use crate::timed::{ClockDecl, ClockId, Guard, TimedEdge, TimedTemplate};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, col {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, col, msg: msg.into() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    text: String,
    line: usize,
    col: usize,
}

/// Splits a line into tokens; parentheses are single-char tokens so guard
/// s-expressions and transition patterns need no surrounding whitespace.
fn tokenize(line: &str, lineno: usize) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut cur_col = 0usize;
    for (i, ch) in line.chars().enumerate() {
        if ch == '#' {
            break;
        }
        if ch.is_whitespace() || ch == '(' || ch == ')' {
            if !cur.is_empty() {
                out.push(Token { text: std::mem::take(&mut cur), line: lineno, col: cur_col + 1 });
            }
            if ch == '(' || ch == ')' {
                out.push(Token { text: ch.to_string(), line: lineno, col: i + 1 });
            }
        } else {
            if cur.is_empty() {
                cur_col = i;
            }
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(Token { text: cur, line: lineno, col: cur_col + 1 });
    }
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_name(tok: &Token, what: &str) -> Result<(), ParseError> {
    if !is_identifier(&tok.text) {
        return err(tok.line, tok.col, format!("invalid {what} name `{}`", tok.text));
    }
    if tok.text == "b" {
        return err(tok.line, tok.col, format!("`b` is reserved and cannot name a {what}"));
    }
    Ok(())
}

/// What kind of input a file holds, decided by its `system` line.
#[derive(Debug)]
pub enum Input {
    Rb(ProcessTemplate),
    Timed(TimedTemplate),
}

/// Parses either template format, dispatching on the `system` header.
pub fn parse_input(src: &str) -> Result<Input, ParseError> {
    for (i, line) in src.lines().enumerate() {
        let toks = tokenize(line, i + 1);
        if toks.is_empty() {
            continue;
        }
        if toks[0].text != "system" {
            return err(toks[0].line, toks[0].col, "expected `system` header line");
        }
        return match toks.get(1).map(|t| t.text.as_str()) {
            Some("rb") => parse_template(src).map(Input::Rb),
            Some("timed") => parse_timed(src).map(Input::Timed),
            _ => err(toks[0].line, toks[0].col, "expected `system rb` or `system timed`"),
        };
    }
    err(1, 1, "empty input")
}

/// Parses the rendezvous/broadcast template format.
pub fn parse_template(src: &str) -> Result<ProcessTemplate, ParseError> {
    let mut k: Option<usize> = None;
    let mut states: Vec<String> = Vec::new();
    let mut init: BTreeSet<StateId> = BTreeSet::new();
    let mut actions: Vec<RendezvousAction> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut r_only = false;
    let mut saw_system = false;

    for (i, line) in src.lines().enumerate() {
        let toks = tokenize(line, i + 1);
        if toks.is_empty() {
            continue;
        }
        let head = &toks[0];
        if !saw_system {
            if head.text != "system" {
                return err(head.line, head.col, "first directive must be `system rb`");
            }
            if toks.get(1).map(|t| t.text.as_str()) != Some("rb") {
                return err(head.line, head.col, "expected `system rb`");
            }
            match toks.get(2).map(|t| t.text.as_str()) {
                None => {}
                Some("r_only") => r_only = true,
                Some(other) => {
                    return err(toks[2].line, toks[2].col, format!("unknown flag `{other}`"))
                }
            }
            if toks.len() > 3 {
                return err(toks[3].line, toks[3].col, "trailing tokens after system line");
            }
            saw_system = true;
            continue;
        }
        match head.text.as_str() {
            "k" => {
                if k.is_some() {
                    return err(head.line, head.col, "duplicate k line");
                }
                let v = toks
                    .get(1)
                    .ok_or(ParseError { line: head.line, col: head.col, msg: "k needs a value".into() })?;
                k = Some(v.text.parse().map_err(|_| ParseError {
                    line: v.line,
                    col: v.col,
                    msg: format!("invalid k value `{}`", v.text),
                })?);
            }
            "state" => {
                let name = toks.get(1).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "state needs a name".into(),
                })?;
                check_name(name, "state")?;
                if states.contains(&name.text) {
                    return err(name.line, name.col, format!("duplicate state `{}`", name.text));
                }
                let id = StateId(states.len());
                states.push(name.text.clone());
                for t in &toks[2..] {
                    match t.text.as_str() {
                        "init" => {
                            init.insert(id);
                        }
                        other => {
                            return err(t.line, t.col, format!("unknown state flag `{other}`"))
                        }
                    }
                }
            }
            "edge" => {
                let k = k.ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "k must be declared before edges".into(),
                })?;
                if toks.len() != 4 {
                    return err(head.line, head.col, "edge needs `edge <src> <letter> <dst>`");
                }
                let src = lookup_state(&states, &toks[1])?;
                let dst = lookup_state(&states, &toks[3])?;
                let label = parse_letter(&toks[2], k, &mut actions)?;
                let edge = Edge { src, label, dst };
                if edges.contains(&edge) {
                    return err(toks[1].line, toks[1].col, "duplicate edge");
                }
                edges.push(edge);
            }
            other => return err(head.line, head.col, format!("unknown directive `{other}`")),
        }
    }
    if !saw_system {
        return err(1, 1, "empty input");
    }
    let k = k.ok_or(ParseError { line: 1, col: 1, msg: "missing k line".into() })?;
    Ok(ProcessTemplate { k, states, init, actions, edges, r_only })
}

fn lookup_state(states: &[String], tok: &Token) -> Result<StateId, ParseError> {
    states
        .iter()
        .position(|s| *s == tok.text)
        .map(StateId)
        .ok_or(ParseError {
            line: tok.line,
            col: tok.col,
            msg: format!("undeclared state `{}`", tok.text),
        })
}

fn parse_letter(
    tok: &Token,
    k: usize,
    actions: &mut Vec<RendezvousAction>,
) -> Result<EdgeLabel, ParseError> {
    if tok.text == "b" {
        return Ok(EdgeLabel::Broadcast);
    }
    let Some((name, idx)) = tok.text.split_once('.') else {
        return err(
            tok.line,
            tok.col,
            format!("letter `{}` must be `b` or `<action>.<index>`", tok.text),
        );
    };
    if !is_identifier(name) || name == "b" {
        return err(tok.line, tok.col, format!("invalid action name `{name}`"));
    }
    let index: usize = idx.parse().map_err(|_| ParseError {
        line: tok.line,
        col: tok.col,
        msg: format!("invalid letter index `{idx}`"),
    })?;
    if index == 0 || index > k {
        return err(tok.line, tok.col, format!("letter index {index} out of range 1..={k}"));
    }
    let action = match actions.iter().position(|a| a.name == name) {
        Some(i) => ActionId(i),
        None => {
            actions.push(RendezvousAction { name: name.to_string() });
            ActionId(actions.len() - 1)
        }
    };
    Ok(EdgeLabel::Rendezvous { action, index })
}

/// Renders a template back into the text format; `parse_template` inverts it.
pub fn render_template(t: &ProcessTemplate) -> String {
    let mut out = String::new();
    out.push_str(if t.r_only { "system rb r_only\n" } else { "system rb\n" });
    out.push_str(&format!("k {}\n", t.k));
    for (i, name) in t.states.iter().enumerate() {
        if t.init.contains(&StateId(i)) {
            out.push_str(&format!("state {name} init\n"));
        } else {
            out.push_str(&format!("state {name}\n"));
        }
    }
    for e in &t.edges {
        out.push_str(&format!(
            "edge {} {} {}\n",
            t.state_name(e.src),
            t.letter_display(&e.label),
            t.state_name(e.dst)
        ));
    }
    out
}

/// Parses `src:letter:dst` against a template's declared states and letters.
pub fn parse_edge_ref(t: &ProcessTemplate, text: &str) -> Option<EdgeId> {
    let mut parts = text.split(':');
    let src = t.state_id(parts.next()?)?;
    let letter = parts.next()?;
    let dst = t.state_id(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    let label = if letter == "b" {
        EdgeLabel::Broadcast
    } else {
        let (name, idx) = letter.split_once('.')?;
        let action = t.action_id(name)?;
        EdgeLabel::Rendezvous { action, index: idx.parse().ok()? }
    };
    t.edge_id(src, label, dst)
}

/// Parses the timed template format.
pub fn parse_timed(src: &str) -> Result<TimedTemplate, ParseError> {
    let mut k: Option<usize> = None;
    let mut states: Vec<String> = Vec::new();
    let mut init: BTreeSet<StateId> = BTreeSet::new();
    let mut actions: Vec<RendezvousAction> = Vec::new();
    let mut clocks: Vec<ClockDecl> = Vec::new();
    let mut edges: Vec<TimedEdge> = Vec::new();
    let mut saw_system = false;

    for (i, line) in src.lines().enumerate() {
        let toks = tokenize(line, i + 1);
        if toks.is_empty() {
            continue;
        }
        let head = &toks[0];
        if !saw_system {
            if head.text != "system" || toks.get(1).map(|t| t.text.as_str()) != Some("timed") {
                return err(head.line, head.col, "first directive must be `system timed`");
            }
            saw_system = true;
            continue;
        }
        match head.text.as_str() {
            "k" => {
                if k.is_some() {
                    return err(head.line, head.col, "duplicate k line");
                }
                let v = toks.get(1).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "k needs a value".into(),
                })?;
                k = Some(v.text.parse().map_err(|_| ParseError {
                    line: v.line,
                    col: v.col,
                    msg: format!("invalid k value `{}`", v.text),
                })?);
            }
            "clock" => {
                let name = toks.get(1).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "clock needs a name".into(),
                })?;
                check_name(name, "clock")?;
                if clocks.iter().any(|c| c.name == name.text) {
                    return err(name.line, name.col, format!("duplicate clock `{}`", name.text));
                }
                let declared_max = match toks.get(2) {
                    None => None,
                    Some(t) if t.text == "max" => {
                        let v = toks.get(3).ok_or(ParseError {
                            line: t.line,
                            col: t.col,
                            msg: "max needs a value".into(),
                        })?;
                        Some(v.text.parse().map_err(|_| ParseError {
                            line: v.line,
                            col: v.col,
                            msg: format!("invalid max `{}`", v.text),
                        })?)
                    }
                    Some(t) => return err(t.line, t.col, format!("unexpected token `{}`", t.text)),
                };
                clocks.push(ClockDecl { name: name.text.clone(), declared_max });
            }
            "state" => {
                let name = toks.get(1).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "state needs a name".into(),
                })?;
                check_name(name, "state")?;
                if states.contains(&name.text) {
                    return err(name.line, name.col, format!("duplicate state `{}`", name.text));
                }
                let id = StateId(states.len());
                states.push(name.text.clone());
                for t in &toks[2..] {
                    if t.text == "init" {
                        init.insert(id);
                    } else {
                        return err(t.line, t.col, format!("unknown state flag `{}`", t.text));
                    }
                }
            }
            "edge" => {
                let kk = k.ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "k must be declared before edges".into(),
                })?;
                if toks.len() < 6 {
                    return err(
                        head.line,
                        head.col,
                        "edge needs `edge <src> <letter> <dst> guard <g> reset <r>`",
                    );
                }
                let src = lookup_state(&states, &toks[1])?;
                let dst = lookup_state(&states, &toks[3])?;
                let (action, index) = match parse_letter(&toks[2], kk, &mut actions)? {
                    EdgeLabel::Rendezvous { action, index } => (action, index),
                    EdgeLabel::Broadcast => {
                        return err(
                            toks[2].line,
                            toks[2].col,
                            "timed templates have no explicit broadcast edges",
                        )
                    }
                };
                if toks[4].text != "guard" {
                    return err(toks[4].line, toks[4].col, "expected `guard`");
                }
                let mut pos = 5;
                let guard = parse_guard(&toks, &mut pos, &clocks)?;
                let rtok = toks.get(pos).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "expected `reset` after the guard".into(),
                })?;
                if rtok.text != "reset" {
                    return err(rtok.line, rtok.col, "expected `reset`");
                }
                pos += 1;
                let mut resets = BTreeSet::new();
                if pos >= toks.len() {
                    return err(rtok.line, rtok.col, "reset needs `-` or a clock list");
                }
                if toks[pos].text == "-" {
                    pos += 1;
                } else {
                    while pos < toks.len() {
                        let c = &toks[pos];
                        let id = clocks
                            .iter()
                            .position(|d| d.name == c.text)
                            .map(ClockId)
                            .ok_or(ParseError {
                                line: c.line,
                                col: c.col,
                                msg: format!("undeclared clock `{}`", c.text),
                            })?;
                        resets.insert(id);
                        pos += 1;
                    }
                }
                if pos != toks.len() {
                    return err(toks[pos].line, toks[pos].col, "trailing tokens on edge line");
                }
                edges.push(TimedEdge { src, action, index, dst, guard, resets });
            }
            other => return err(head.line, head.col, format!("unknown directive `{other}`")),
        }
    }
    if !saw_system {
        return err(1, 1, "empty input");
    }
    let k = k.ok_or(ParseError { line: 1, col: 1, msg: "missing k line".into() })?;
    Ok(TimedTemplate { k, states, init, actions, clocks, edges })
}

fn parse_guard(toks: &[Token], pos: &mut usize, clocks: &[ClockDecl]) -> Result<Guard, ParseError> {
    let tok = toks
        .get(*pos)
        .ok_or(ParseError { line: 0, col: 0, msg: "unterminated guard".into() })?;
    *pos += 1;
    match tok.text.as_str() {
        "true" => Ok(Guard::True),
        "false" => Ok(Guard::False),
        "(" => {
            let op = toks.get(*pos).ok_or(ParseError {
                line: tok.line,
                col: tok.col,
                msg: "unterminated guard".into(),
            })?;
            *pos += 1;
            let guard = match op.text.as_str() {
                "lt" | "eq" => {
                    let c = toks.get(*pos).ok_or(ParseError {
                        line: op.line,
                        col: op.col,
                        msg: "predicate needs a constant".into(),
                    })?;
                    let constant: u32 = c.text.parse().map_err(|_| ParseError {
                        line: c.line,
                        col: c.col,
                        msg: format!("invalid constant `{}`", c.text),
                    })?;
                    *pos += 1;
                    let x = toks.get(*pos).ok_or(ParseError {
                        line: op.line,
                        col: op.col,
                        msg: "predicate needs a clock".into(),
                    })?;
                    let clock = clocks
                        .iter()
                        .position(|d| d.name == x.text)
                        .map(ClockId)
                        .ok_or(ParseError {
                            line: x.line,
                            col: x.col,
                            msg: format!("undeclared clock `{}`", x.text),
                        })?;
                    *pos += 1;
                    if op.text == "lt" {
                        Guard::Lt(constant, clock)
                    } else {
                        Guard::Eq(constant, clock)
                    }
                }
                "and" | "or" => {
                    let mut subs = Vec::new();
                    while toks.get(*pos).map(|t| t.text.as_str()) != Some(")") {
                        if *pos >= toks.len() {
                            return err(op.line, op.col, "unterminated guard");
                        }
                        subs.push(parse_guard(toks, pos, clocks)?);
                    }
                    if op.text == "and" {
                        Guard::And(subs)
                    } else {
                        Guard::Or(subs)
                    }
                }
                "not" => Guard::Not(Box::new(parse_guard(toks, pos, clocks)?)),
                other => {
                    return err(op.line, op.col, format!("unknown guard operator `{other}`"))
                }
            };
            let close = toks.get(*pos).ok_or(ParseError {
                line: tok.line,
                col: tok.col,
                msg: "missing `)`".into(),
            })?;
            if close.text != ")" {
                return err(close.line, close.col, format!("expected `)`, got `{}`", close.text));
            }
            *pos += 1;
            Ok(guard)
        }
        other => err(tok.line, tok.col, format!("unexpected token `{other}` in guard")),
    }
}

/// Parses the specification automaton format (`spec nbw` / `spec nfw`).
pub fn parse_spec(src: &str) -> Result<SpecAutomaton, ParseError> {
    let mut finite = None;
    let mut states: Vec<String> = Vec::new();
    let mut initial: BTreeSet<usize> = BTreeSet::new();
    let mut accepting: BTreeSet<usize> = BTreeSet::new();
    let mut transitions: Vec<SpecTransition> = Vec::new();

    for (i, line) in src.lines().enumerate() {
        let toks = tokenize(line, i + 1);
        if toks.is_empty() {
            continue;
        }
        let head = &toks[0];
        if finite.is_none() {
            if head.text != "spec" {
                return err(head.line, head.col, "first directive must be `spec nbw|nfw`");
            }
            finite = match toks.get(1).map(|t| t.text.as_str()) {
                Some("nbw") => Some(false),
                Some("nfw") => Some(true),
                _ => return err(head.line, head.col, "expected `spec nbw` or `spec nfw`"),
            };
            continue;
        }
        match head.text.as_str() {
            "state" => {
                let name = toks.get(1).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "state needs a name".into(),
                })?;
                if !is_identifier(&name.text) {
                    return err(name.line, name.col, format!("invalid state name `{}`", name.text));
                }
                if states.contains(&name.text) {
                    return err(name.line, name.col, format!("duplicate state `{}`", name.text));
                }
                let id = states.len();
                states.push(name.text.clone());
                for t in &toks[2..] {
                    match t.text.as_str() {
                        "init" => {
                            initial.insert(id);
                        }
                        "accepting" => {
                            accepting.insert(id);
                        }
                        other => {
                            return err(t.line, t.col, format!("unknown state flag `{other}`"))
                        }
                    }
                }
            }
            "trans" => {
                let src_tok = toks.get(1).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "trans needs `<src> <pattern> <dst>`".into(),
                })?;
                let src = states.iter().position(|s| *s == src_tok.text).ok_or(ParseError {
                    line: src_tok.line,
                    col: src_tok.col,
                    msg: format!("undeclared spec state `{}`", src_tok.text),
                })?;
                let mut pos = 2;
                let pattern = parse_pattern(&toks, &mut pos)?;
                let dst_tok = toks.get(pos).ok_or(ParseError {
                    line: head.line,
                    col: head.col,
                    msg: "trans is missing its destination".into(),
                })?;
                let dst = states.iter().position(|s| *s == dst_tok.text).ok_or(ParseError {
                    line: dst_tok.line,
                    col: dst_tok.col,
                    msg: format!("undeclared spec state `{}`", dst_tok.text),
                })?;
                if pos + 1 != toks.len() {
                    return err(head.line, head.col, "trailing tokens on trans line");
                }
                transitions.push(SpecTransition { src, pattern, dst });
            }
            other => return err(head.line, head.col, format!("unknown directive `{other}`")),
        }
    }
    let Some(finite) = finite else {
        return err(1, 1, "empty input");
    };
    if initial.is_empty() {
        return err(1, 1, "spec declares no initial state");
    }
    Ok(SpecAutomaton { finite, states, initial, accepting, transitions })
}

fn parse_pattern(toks: &[Token], pos: &mut usize) -> Result<EdgePattern, ParseError> {
    let tok = toks
        .get(*pos)
        .ok_or(ParseError { line: 0, col: 0, msg: "trans is missing its pattern".into() })?;
    if tok.text == "*" {
        *pos += 1;
        return Ok(EdgePattern::AnyEdge);
    }
    if tok.text != "(" {
        return err(tok.line, tok.col, "pattern must be `*` or `(src letter dst)`");
    }
    *pos += 1;
    let field = |t: &Token| -> FieldPattern {
        if t.text == "_" {
            FieldPattern::Any
        } else {
            FieldPattern::Name(t.text.clone())
        }
    };
    let src_tok = toks.get(*pos).ok_or(ParseError {
        line: tok.line,
        col: tok.col,
        msg: "pattern needs three fields".into(),
    })?;
    let src = field(src_tok);
    *pos += 1;
    let letter_tok = toks.get(*pos).ok_or(ParseError {
        line: tok.line,
        col: tok.col,
        msg: "pattern needs three fields".into(),
    })?;
    let letter = if letter_tok.text == "_" {
        LetterPattern::Any
    } else if letter_tok.text == "b" {
        LetterPattern::Broadcast
    } else {
        let Some((name, idx)) = letter_tok.text.split_once('.') else {
            return err(
                letter_tok.line,
                letter_tok.col,
                format!("invalid letter pattern `{}`", letter_tok.text),
            );
        };
        let index: usize = idx.parse().map_err(|_| ParseError {
            line: letter_tok.line,
            col: letter_tok.col,
            msg: format!("invalid letter index `{idx}`"),
        })?;
        LetterPattern::Letter { action: name.to_string(), index }
    };
    *pos += 1;
    let dst_tok = toks.get(*pos).ok_or(ParseError {
        line: tok.line,
        col: tok.col,
        msg: "pattern needs three fields".into(),
    })?;
    let dst = field(dst_tok);
    *pos += 1;
    let close = toks.get(*pos).ok_or(ParseError {
        line: tok.line,
        col: tok.col,
        msg: "missing `)` in pattern".into(),
    })?;
    if close.text != ")" {
        return err(close.line, close.col, format!("expected `)`, got `{}`", close.text));
    }
    *pos += 1;
    Ok(EdgePattern::Fields { src, letter, dst })
}
