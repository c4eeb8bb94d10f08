use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of gesture classes, one per letter `A`..=`Z`.
pub const NUM_CLASSES: usize = 26;

/// One of the 26 fingerspelled letters. `A` has index 0, `Z` index 25.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GestureLabel(u8);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("class index {0} out of range 0..{NUM_CLASSES}")]
    Index(usize),
    #[error("invalid label {0:?}, expected a single letter A-Z")]
    Letter(String),
}

impl GestureLabel {
    pub fn from_index(index: usize) -> Result<Self, LabelError> {
        if index < NUM_CLASSES {
            Ok(Self(index as u8))
        } else {
            Err(LabelError::Index(index))
        }
    }

    pub fn from_letter(letter: char) -> Result<Self, LabelError> {
        if letter.is_ascii_uppercase() {
            Ok(Self(letter as u8 - b'A'))
        } else {
            Err(LabelError::Letter(letter.to_string()))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn letter(self) -> char {
        (b'A' + self.0) as char
    }

    /// All labels in index order.
    pub fn all() -> impl ExactSizeIterator<Item = GestureLabel> + Clone {
        (0..NUM_CLASSES as u8).map(GestureLabel)
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for GestureLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_letter(c),
            _ => Err(LabelError::Letter(s.to_string())),
        }
    }
}

impl Serialize for GestureLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GestureLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
