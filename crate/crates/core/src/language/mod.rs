//! Restricted-English instruction and feedback parsing.
//!
//! Instructions are classified into the eight navigation kinds by a keyword
//! grammar ([`Grammar`]); the shipped rules are in
//! `data/grammar/instructions.grammar`. Feedback utterances must start with
//! `yes` or `no`; a `no` carries a replacement instruction.

pub mod grammar;
pub mod lexicon;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

pub use grammar::{Captures, DirectionClass, Grammar, GrammarError};
use lexicon::Unit;

/// Grammar shipped with the crate.
pub const DEFAULT_GRAMMAR: &str = include_str!("../../../../data/grammar/instructions.grammar");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstructionKind {
    ApproachEntrance,
    EnterRoom,
    ApproachObject,
    NavigateUnexplored,
    HandleObstruction,
    DirectionOnly,
    DirectionOrientation,
    MetricMove,
}

impl InstructionKind {
    pub const ALL: [InstructionKind; 8] = [
        InstructionKind::ApproachEntrance,
        InstructionKind::EnterRoom,
        InstructionKind::ApproachObject,
        InstructionKind::NavigateUnexplored,
        InstructionKind::HandleObstruction,
        InstructionKind::DirectionOnly,
        InstructionKind::DirectionOrientation,
        InstructionKind::MetricMove,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstructionKind::ApproachEntrance => "approach_entrance",
            InstructionKind::EnterRoom => "enter_room",
            InstructionKind::ApproachObject => "approach_object",
            InstructionKind::NavigateUnexplored => "navigate_unexplored",
            InstructionKind::HandleObstruction => "handle_obstruction",
            InstructionKind::DirectionOnly => "direction_only",
            InstructionKind::DirectionOrientation => "direction_orientation",
            InstructionKind::MetricMove => "metric_move",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds whose target is a named landmark.
    pub fn needs_landmark(self) -> bool {
        matches!(
            self,
            InstructionKind::ApproachEntrance
                | InstructionKind::EnterRoom
                | InstructionKind::ApproachObject
                | InstructionKind::NavigateUnexplored
                | InstructionKind::HandleObstruction
        )
    }
}

impl fmt::Display for InstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
    Left,
    Right,
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::Forward,
        Direction::Backward,
        Direction::Left,
        Direction::Right,
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    pub fn is_compass(self) -> bool {
        matches!(
            self,
            Direction::North | Direction::South | Direction::East | Direction::West
        )
    }

    /// World heading of this direction for a robot currently facing `yaw`.
    pub fn heading(self, yaw: f64) -> f64 {
        crate::math::wrap_angle(match self {
            Direction::Forward => yaw,
            Direction::Backward => yaw + PI,
            Direction::Left => yaw + FRAC_PI_2,
            Direction::Right => yaw - FRAC_PI_2,
            Direction::East => 0.0,
            Direction::North => FRAC_PI_2,
            Direction::West => PI,
            Direction::South => -FRAC_PI_2,
        })
    }

    pub fn word(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }
}

/// A parsed navigation command.
///
/// A rotation ("turn 15 degrees to the right") is a `DirectionOrientation`
/// with `distance = Some(0.0)`, a lateral direction and a signed
/// `rotation_deg` (positive = counter-clockwise / left).
#[derive(Clone, Debug, PartialEq)]
pub struct Instruction {
    pub kind: InstructionKind,
    pub landmark: Option<String>,
    pub direction: Option<Direction>,
    /// Meters.
    pub distance: Option<f64>,
    pub rotation_deg: Option<f64>,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LanguageError {
    #[error("unrecognized instruction: `{0}`")]
    UnrecognizedInstruction(String),
    #[error("not a feedback utterance (must start with yes/no): `{0}`")]
    NotFeedback(String),
    #[error("instruction violates its kind's shape: {0}")]
    Malformed(&'static str),
}

impl Instruction {
    pub fn is_rotation(&self) -> bool {
        self.rotation_deg.is_some()
    }

    /// Checks the per-kind field invariants.
    pub fn validate(&self) -> Result<(), LanguageError> {
        let bad = |m| Err(LanguageError::Malformed(m));
        if let Some(d) = self.distance {
            if !(d.is_finite() && d >= 0.0) {
                return bad("distance must be finite");
            }
            if d == 0.0 && !self.is_rotation() {
                return bad("distance must be positive");
            }
        }
        if self.kind.needs_landmark() {
            if self.landmark.is_none() || self.distance.is_some() || self.direction.is_some() {
                return bad("landmark kinds carry a landmark and no distance or direction");
            }
            return Ok(());
        }
        if self.landmark.is_some() || self.direction.is_none() {
            return bad("directional kinds carry a direction and no landmark");
        }
        match self.kind {
            InstructionKind::DirectionOnly => {
                if self.distance.is_some() || self.is_rotation() {
                    return bad("direction-only carries no distance");
                }
            }
            InstructionKind::DirectionOrientation => match (self.distance, self.rotation_deg) {
                (Some(d), Some(a)) => {
                    if d != 0.0 || !a.is_finite() {
                        return bad("rotation has zero distance and a finite angle");
                    }
                    if !matches!(self.direction, Some(Direction::Left | Direction::Right)) {
                        return bad("rotation direction must be left or right");
                    }
                }
                (Some(_), None) => {}
                (None, _) => return bad("direction-orientation carries a distance"),
            },
            InstructionKind::MetricMove => {
                if self.distance.is_none() || self.is_rotation() {
                    return bad("metric move carries a distance");
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Equality ignoring the source text.
    pub fn same_command(&self, other: &Instruction) -> bool {
        self.kind == other.kind
            && self.landmark == other.landmark
            && self.direction == other.direction
            && self.distance == other.distance
            && self.rotation_deg == other.rotation_deg
    }

    /// Canonical sentence that parses back to an equal command under the
    /// shipped grammar.
    pub fn render(&self) -> String {
        let lm = self.landmark.as_deref().unwrap_or("");
        let dir = self.direction.map(Direction::word).unwrap_or("");
        let dist = self.distance.unwrap_or(0.0);
        match self.kind {
            InstructionKind::ApproachEntrance => format!("go to the {lm}"),
            InstructionKind::EnterRoom => format!("go into the {lm}"),
            InstructionKind::ApproachObject => format!("move forward until you reach the {lm}"),
            InstructionKind::NavigateUnexplored => format!("go to the end of the {lm}"),
            InstructionKind::HandleObstruction => format!("move around the {lm}"),
            InstructionKind::DirectionOnly => format!("go {dir}"),
            InstructionKind::DirectionOrientation => match self.rotation_deg {
                Some(a) => format!("turn {} degrees to the {dir}", a.abs()),
                None => format!("head {dist} meters {dir}"),
            },
            InstructionKind::MetricMove => format!("move {dir} {dist} meters"),
        }
    }
}

fn build(kind: InstructionKind, caps: &Captures, raw: &str) -> Option<Instruction> {
    let mut instr = Instruction {
        kind,
        landmark: None,
        direction: None,
        distance: None,
        rotation_deg: None,
        raw_text: raw.to_string(),
    };
    if kind.needs_landmark() {
        instr.landmark = Some(caps.landmark.clone()?);
    } else {
        let dir = caps.direction?;
        instr.direction = Some(dir);
        match kind {
            InstructionKind::DirectionOnly => {
                if caps.number.is_some() {
                    return None;
                }
            }
            _ => {
                let n = caps.number?;
                let unit = caps.unit.unwrap_or(Unit::Meters);
                if n.is_nan() || n <= 0.0 {
                    return None;
                }
                if unit.is_angle() {
                    if kind != InstructionKind::DirectionOrientation {
                        return None;
                    }
                    let sign = match dir {
                        Direction::Left => 1.0,
                        Direction::Right => -1.0,
                        _ => return None,
                    };
                    instr.distance = Some(0.0);
                    instr.rotation_deg = Some(sign * n);
                } else {
                    instr.distance = Some(n * unit.to_meters());
                }
            }
        }
    }
    instr.validate().ok()?;
    Some(instr)
}

/// Parses an instruction with an explicit grammar.
pub fn parse_instruction_with(grammar: &Grammar, text: &str) -> Result<Instruction, LanguageError> {
    let tokens = lexicon::normalize(text);
    if tokens.is_empty() {
        return Err(LanguageError::UnrecognizedInstruction(text.to_string()));
    }
    grammar
        .find_match(&tokens, |kind, caps| build(kind, caps, text))
        .ok_or_else(|| LanguageError::UnrecognizedInstruction(text.to_string()))
}

/// Parses an instruction with the shipped grammar. Callers on hot paths
/// should keep a parsed [`Grammar`] and use [`parse_instruction_with`].
pub fn parse_instruction(text: &str) -> Result<Instruction, LanguageError> {
    parse_instruction_with(&default_grammar(), text)
}

/// The shipped grammar, parsed.
pub fn default_grammar() -> Grammar {
    Grammar::parse(DEFAULT_GRAMMAR).expect("shipped grammar is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Accept,
    Correct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackEvent {
    pub polarity: Polarity,
    /// Present iff `polarity == Correct`.
    pub replacement: Option<Instruction>,
    pub raw_text: String,
}

/// Splits a `yes ...` / `no ...` utterance into its polarity and the trailing
/// instruction text, with a leading "robot"/"do" and a trailing
/// "next"/"instead" removed. `None` when the utterance is not feedback.
pub fn split_feedback(text: &str) -> Option<(Polarity, String)> {
    let tokens = lexicon::tokenize(text);
    let (first, rest) = tokens.split_first()?;
    let polarity = match first.as_str() {
        "yes" => Polarity::Accept,
        "no" => Polarity::Correct,
        _ => return None,
    };
    let mut rest: Vec<&str> = rest.iter().map(String::as_str).collect();
    if rest.first() == Some(&"robot") {
        rest.remove(0);
    }
    if rest.first() == Some(&"do") {
        rest.remove(0);
    }
    if matches!(rest.last(), Some(&"next") | Some(&"instead")) {
        rest.pop();
    }
    Some((polarity, rest.join(" ")))
}

pub fn parse_feedback_with(grammar: &Grammar, text: &str) -> Result<FeedbackEvent, LanguageError> {
    let (polarity, rest) = split_feedback(text).ok_or_else(|| LanguageError::NotFeedback(text.to_string()))?;
    let replacement = match polarity {
        Polarity::Accept => None,
        Polarity::Correct => Some(parse_instruction_with(grammar, &rest)?),
    };
    Ok(FeedbackEvent {
        polarity,
        replacement,
        raw_text: text.to_string(),
    })
}

/// Parses `yes ...` / `no, <instruction>` feedback with the shipped grammar.
pub fn parse_feedback(text: &str) -> Result<FeedbackEvent, LanguageError> {
    parse_feedback_with(&default_grammar(), text)
}
