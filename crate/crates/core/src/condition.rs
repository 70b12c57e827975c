//! Feedback conditions: which feedback features a session exposes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    N,
    S,
    SA,
    SAX,
    SAC,
    SAXC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackFlags {
    pub show_scores: bool,
    pub show_attribution: bool,
    pub show_contrastive: bool,
    pub show_counterfactual: bool,
}

impl Condition {
    pub const ALL: [Condition; 6] = [Self::N, Self::S, Self::SA, Self::SAX, Self::SAC, Self::SAXC];

    pub fn flags(self) -> FeedbackFlags {
        use Condition::*;
        FeedbackFlags {
            show_scores: self != N,
            show_attribution: matches!(self, SA | SAX | SAC | SAXC),
            show_contrastive: matches!(self, SAX | SAXC),
            show_counterfactual: matches!(self, SAC | SAXC),
        }
    }

    pub fn from_flags(flags: FeedbackFlags) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.flags() == flags)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::S => "S",
            Self::SA => "SA",
            Self::SAX => "SAX",
            Self::SAC => "SAC",
            Self::SAXC => "SAXC",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidCondition(s.to_string()))
    }
}
