use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Road surface class. The ordinal is the one-hot / output-unit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadClass {
    Asphalt = 0,
    AsphaltDamaged = 1,
    Gravel = 2,
    GravelDamaged = 3,
    Pavement = 4,
}

impl RoadClass {
    pub const COUNT: usize = 5;
    pub const ALL: [RoadClass; 5] =
        [Self::Asphalt, Self::AsphaltDamaged, Self::Gravel, Self::GravelDamaged, Self::Pavement];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Asphalt => "asphalt",
            Self::AsphaltDamaged => "asphalt_damaged",
            Self::Gravel => "gravel",
            Self::GravelDamaged => "gravel_damaged",
            Self::Pavement => "pavement",
        }
    }

    /// The undamaged surface underneath.
    pub fn base(self) -> Self {
        match self {
            Self::AsphaltDamaged => Self::Asphalt,
            Self::GravelDamaged => Self::Gravel,
            other => other,
        }
    }

    pub fn is_damaged(self) -> bool {
        matches!(self, Self::AsphaltDamaged | Self::GravelDamaged)
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for RoadClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown road class `{s}`"))
    }
}
