use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary gold / predicted class. `Depressed` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Depressed,
    NonDepressed,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Depressed, Label::NonDepressed];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Depressed => "DEPRESSED",
            Label::NonDepressed => "NON_DEPRESSED",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Depressed
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Depressed => Label::NonDepressed,
            Label::NonDepressed => Label::Depressed,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised label {0:?} (expected DEPRESSED or NON_DEPRESSED)")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    /// Accepts the canonical names plus `1`/`0` and a few lowercase spellings
    /// commonly found in annotation spreadsheets.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "depressed" | "1" | "positive" | "depressive" => Ok(Label::Depressed),
            "non_depressed" | "0" | "negative" | "non_depressive" | "nondepressed" => {
                Ok(Label::NonDepressed)
            }
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_spellings() {
        assert_eq!("DEPRESSED".parse::<Label>().unwrap(), Label::Depressed);
        assert_eq!("non-depressed".parse::<Label>().unwrap(), Label::NonDepressed);
        assert_eq!("0".parse::<Label>().unwrap(), Label::NonDepressed);
        assert!("maybe".parse::<Label>().is_err());
    }

    #[test]
    fn serde_uses_screaming_case() {
        assert_eq!(serde_json::to_string(&Label::NonDepressed).unwrap(), "\"NON_DEPRESSED\"");
    }
}
