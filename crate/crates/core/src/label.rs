use std::fmt;
use std::str::FromStr;

/// Screening outcome. `Suspicious` is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Suspicious,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Normal, Label::Suspicious];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Suspicious => "suspicious",
        }
    }

    /// Position in [`Label::ALL`]; used to index per-class arrays.
    pub fn index(self) -> usize {
        match self {
            Label::Normal => 0,
            Label::Suspicious => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Suspicious
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?} (expected `normal` or `suspicious`)")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "normal" => Ok(Label::Normal),
            "suspicious" => Ok(Label::Suspicious),
            other => Err(ParseLabelError(other.to_string())),
        }
    }
}
