use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary class label: cases are `+1`, controls `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Case,
    Control,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Case => 1.0,
            Label::Control => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Self {
        if value >= 0.0 {
            Label::Case
        } else {
            Label::Control
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Case => Label::Control,
            Label::Control => Label::Case,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Case => "case",
            Label::Control => "control",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "case" | "+1" | "1" => Ok(Label::Case),
            "control" | "-1" => Ok(Label::Control),
            other => Err(Error::usage(format!("unknown label token {other:?}"))),
        }
    }
}

/// Parses a cohort label cell, where `?` marks an unlabeled sample.
pub fn parse_optional_label(s: &str) -> Result<Option<Label>, Error> {
    if s.trim() == "?" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

pub fn optional_label_token(label: Option<Label>) -> &'static str {
    label.map_or("?", Label::as_str)
}
