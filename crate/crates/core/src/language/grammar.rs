//! Data-driven keyword grammar.
//!
//! Each rule maps a token pattern onto one instruction kind. Patterns are
//! matched against the full token sequence with backtracking over optional
//! groups.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::lexicon::{self, Unit};
use super::{Direction, InstructionKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionClass {
    Any,
    Relative,
    Compass,
    /// `left` / `right` only.
    Lateral,
}

impl DirectionClass {
    pub fn admits(self, d: Direction) -> bool {
        match self {
            DirectionClass::Any => true,
            DirectionClass::Relative => !d.is_compass(),
            DirectionClass::Compass => d.is_compass(),
            DirectionClass::Lateral => matches!(d, Direction::Left | Direction::Right),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Landmark,
    Direction(DirectionClass),
    Number,
    /// `true` for angle units, `false` for length units.
    Unit {
        angle: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Literal(String),
    OneOf(Vec<String>),
    Optional(Vec<Element>),
    Slot(Slot),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub kind: InstructionKind,
    pub elements: Vec<Element>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("grammar line {line}: {message}")]
pub struct GrammarError {
    pub line: usize,
    pub message: String,
}

/// Values bound by slots during a match.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Captures {
    pub landmark: Option<String>,
    pub direction: Option<Direction>,
    pub number: Option<f64>,
    pub unit: Option<Unit>,
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split(';').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |message: String| GrammarError { line, message };
            let (kind, pattern) = body
                .split_once("::=")
                .ok_or_else(|| err("expected `<kind> ::= <pattern>`".to_string()))?;
            let kind = InstructionKind::from_name(kind.trim())
                .ok_or_else(|| err(format!("unknown instruction kind `{}`", kind.trim())))?;
            let tokens = split_pattern(pattern);
            let (elements, rest) = parse_elements(&tokens, false).map_err(err)?;
            if !rest.is_empty() {
                return Err(err("unbalanced `]`".to_string()));
            }
            if elements.is_empty() {
                return Err(err("empty pattern".to_string()));
            }
            rules.push(Rule { kind, elements, line });
        }
        Ok(Grammar { rules })
    }

    /// First rule (in file order) that matches the whole token sequence, with
    /// its slot captures. `accept` can veto a match so the search continues.
    pub fn find_match<T>(
        &self,
        tokens: &[String],
        mut accept: impl FnMut(InstructionKind, &Captures) -> Option<T>,
    ) -> Option<T> {
        for rule in &self.rules {
            let mut found = None;
            match_seq(&rule.elements, tokens, Captures::default(), &mut |caps| {
                if let Some(v) = accept(rule.kind, caps) {
                    found = Some(v);
                    true
                } else {
                    false
                }
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

fn split_pattern(pattern: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_angle = false;
    for ch in pattern.chars() {
        match ch {
            '<' => {
                in_angle = true;
                cur.push(ch);
            }
            '>' => {
                in_angle = false;
                cur.push(ch);
            }
            '[' | ']' if !in_angle => {
                if !cur.is_empty() {
                    out.push(core::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() && !in_angle => {
                if !cur.is_empty() {
                    out.push(core::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_elements(tokens: &[String], nested: bool) -> Result<(Vec<Element>, &[String]), String> {
    let mut elements = Vec::new();
    let mut rest = tokens;
    while let Some((tok, tail)) = rest.split_first() {
        match tok.as_str() {
            "[" => {
                let (inner, after) = parse_elements(tail, true)?;
                match after.split_first() {
                    Some((close, after)) if close == "]" => {
                        elements.push(Element::Optional(inner));
                        rest = after;
                    }
                    _ => return Err("unclosed `[`".to_string()),
                }
            }
            "]" => {
                if nested {
                    return Ok((elements, rest));
                }
                return Err("unbalanced `]`".to_string());
            }
            t if t.starts_with('<') => {
                elements.push(Element::Slot(parse_slot(t)?));
                rest = tail;
            }
            t if t.starts_with('(') => {
                let inner = t
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| format!("bad alternation `{t}`"))?;
                let words: Vec<String> = inner.split('|').map(|w| w.trim().to_lowercase()).collect();
                if words.iter().any(|w| w.is_empty()) {
                    return Err(format!("empty alternative in `{t}`"));
                }
                elements.push(Element::OneOf(words));
                rest = tail;
            }
            t => {
                if !t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
                    return Err(format!("bad literal `{t}`"));
                }
                elements.push(Element::Literal(t.to_lowercase()));
                rest = tail;
            }
        }
    }
    if nested {
        return Err("unclosed `[`".to_string());
    }
    Ok((elements, rest))
}

fn parse_slot(t: &str) -> Result<Slot, String> {
    let inner = t
        .strip_prefix('<')
        .and_then(|s| s.strip_suffix('>'))
        .ok_or_else(|| format!("bad slot `{t}`"))?;
    let (name, class) = match inner.split_once(':') {
        Some((n, c)) => (n, Some(c)),
        None => (inner, None),
    };
    Ok(match (name, class) {
        ("landmark", None) => Slot::Landmark,
        ("number", None) => Slot::Number,
        ("unit", None) | ("unit", Some("length")) => Slot::Unit { angle: false },
        ("unit", Some("angle")) => Slot::Unit { angle: true },
        ("direction", None) => Slot::Direction(DirectionClass::Any),
        ("direction", Some("relative")) => Slot::Direction(DirectionClass::Relative),
        ("direction", Some("compass")) => Slot::Direction(DirectionClass::Compass),
        ("direction", Some("lateral")) => Slot::Direction(DirectionClass::Lateral),
        _ => return Err(format!("unknown slot `{t}`")),
    })
}

fn fill_slot(slot: Slot, tok: &str, caps: &mut Captures) -> bool {
    match slot {
        Slot::Landmark => {
            if lexicon::is_landmark_token(tok) {
                caps.landmark = Some(tok.to_string());
                return true;
            }
        }
        Slot::Direction(class) => {
            if let Some(d) = lexicon::direction_word(tok).filter(|d| class.admits(*d)) {
                caps.direction = Some(d);
                return true;
            }
        }
        Slot::Number => {
            if let Some(n) = lexicon::number_token(tok) {
                caps.number = Some(n);
                return true;
            }
        }
        Slot::Unit { angle } => {
            if let Some(u) = lexicon::unit_word(tok).filter(|u| u.is_angle() == angle) {
                caps.unit = Some(u);
                return true;
            }
        }
    }
    false
}

/// Calls `done` for every way `elements` can consume exactly `tokens`;
/// stops as soon as `done` returns `true`.
fn match_seq(elements: &[Element], tokens: &[String], caps: Captures, done: &mut dyn FnMut(&Captures) -> bool) -> bool {
    let Some((first, rest)) = elements.split_first() else {
        return tokens.is_empty() && done(&caps);
    };
    match first {
        Element::Literal(w) => match tokens.split_first() {
            Some((t, tail)) if t == w => match_seq(rest, tail, caps, done),
            _ => false,
        },
        Element::OneOf(ws) => match tokens.split_first() {
            Some((t, tail)) if ws.iter().any(|w| w == t) => match_seq(rest, tail, caps, done),
            _ => false,
        },
        Element::Slot(slot) => match tokens.split_first() {
            Some((t, tail)) => {
                let mut caps = caps;
                fill_slot(*slot, t, &mut caps) && match_seq(rest, tail, caps, done)
            }
            None => false,
        },
        Element::Optional(inner) => {
            let mut with: Vec<Element> = inner.clone();
            with.extend_from_slice(rest);
            match_seq(&with, tokens, caps.clone(), done) || match_seq(rest, tokens, caps, done)
        }
    }
}

/// Grammar elements flattened into a printable pattern, for diagnostics.
pub fn describe(elements: &[Element]) -> String {
    let parts: Vec<String> = elements
        .iter()
        .map(|e| match e {
            Element::Literal(w) => w.clone(),
            Element::OneOf(ws) => format!("({})", ws.join("|")),
            Element::Optional(inner) => format!("[{}]", describe(inner)),
            Element::Slot(s) => format!("{s:?}"),
        })
        .collect();
    parts.join(" ")
}
