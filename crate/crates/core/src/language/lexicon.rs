//! Tokenization and the closed word lists used by grammar slots.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Direction;

pub const FEET_TO_METERS: f64 = 0.3048;

const NUMBER_WORDS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Feet,
    Meters,
    Degrees,
}

impl Unit {
    pub fn is_angle(self) -> bool {
        self == Unit::Degrees
    }

    /// Multiplier to meters for length units.
    pub fn to_meters(self) -> f64 {
        match self {
            Unit::Feet => FEET_TO_METERS,
            Unit::Meters => 1.0,
            Unit::Degrees => f64::NAN,
        }
    }
}

pub fn unit_word(tok: &str) -> Option<Unit> {
    Some(match tok {
        "feet" | "foot" | "ft" => Unit::Feet,
        "meters" | "meter" | "metres" | "metre" | "m" => Unit::Meters,
        "degrees" | "degree" | "deg" => Unit::Degrees,
        _ => return None,
    })
}

pub fn direction_word(tok: &str) -> Option<Direction> {
    Some(match tok {
        "forward" | "forwards" | "ahead" | "straight" => Direction::Forward,
        "backward" | "backwards" | "back" => Direction::Backward,
        "left" => Direction::Left,
        "right" => Direction::Right,
        "north" => Direction::North,
        "south" => Direction::South,
        "east" => Direction::East,
        "west" => Direction::West,
        _ => return None,
    })
}

/// Digits (integer or decimal) or a number word up to twenty.
pub fn number_token(tok: &str) -> Option<f64> {
    if let Some(i) = NUMBER_WORDS.iter().position(|w| *w == tok) {
        return Some(i as f64);
    }
    if !tok.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    if !tok.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn number_word(n: usize) -> Option<&'static str> {
    NUMBER_WORDS.get(n).copied()
}

/// Words that can never fill a `<landmark>` slot.
pub fn is_reserved(tok: &str) -> bool {
    direction_word(tok).is_some()
        || unit_word(tok).is_some()
        || number_token(tok).is_some()
        || matches!(tok, "the" | "a" | "an" | "to" | "of" | "robot" | "yes" | "no")
}

pub fn is_landmark_token(tok: &str) -> bool {
    tok.starts_with(|c: char| c.is_ascii_alphabetic())
        && tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && !is_reserved(tok)
}

/// Lowercases, drops punctuation and splits on whitespace. Decimal points
/// inside numbers, underscores and inner hyphens survive.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' || c == '-' || c == '.' {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned
        .split_whitespace()
        .map(|t| t.trim_matches(|c| c == '.' || c == '-'))
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

/// Tokens with a leading vocative "robot" removed.
pub fn normalize(text: &str) -> Vec<String> {
    let mut toks = tokenize(text);
    if toks.first().map(String::as_str) == Some("robot") {
        toks.remove(0);
    }
    toks
}
