//! Named-service names: labels, the hierarchical name grammar, and the
//! Service Chart / Service Tree models that produce exec names.

mod chart;
mod grammar;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chart::{ChartMicroservice, ChartSegment, HopKey, ServiceChart, ServiceTree};
pub use grammar::{Child, Command, LookupMeta, Segment, SegmentLabel, ServiceName, Step, TreeName};

/// Node-local interface identifier.
pub type FaceId = u32;

/// Canonical name prefix for every named-service command.
pub const PREFIX: &str = "sd-nsn";

/// Misspelled prefixes accepted on input and rewritten to [`PREFIX`].
pub(crate) const PREFIX_ALIASES: [&str; 2] = ["sdn-nsn", "sdn-ndn"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("malformed name `{name}`: {reason}")]
    MalformedName { name: String, reason: String },
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("`{0}` is not at the consumable position of the name")]
    ElementNotFirst(String),
    #[error("name has no executable body")]
    NotExecutable,
    #[error("service tree has no hop for segment {segment} position {index}")]
    MissingHop { segment: String, index: usize },
    #[error("invalid service chart: {0}")]
    InvalidChart(String),
}

impl NameError {
    pub(crate) fn malformed(name: &str, reason: impl Into<String>) -> Self {
        NameError::MalformedName {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

/// Parses `face<digits>` into a face id.
pub fn face_token(component: &str) -> Option<FaceId> {
    let digits = component.strip_prefix("face")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Recognizes `S<digits>` and returns the digit path.
pub fn segment_token(component: &str) -> Option<&str> {
    let digits = component.strip_prefix('S')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(digits)
}

/// Microservice, data, or agent identifier: `[a-z0-9-]+`, excluding the
/// reserved face-token form, all-digit strings and the command prefixes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    pub fn new(text: impl Into<String>) -> Result<Self, NameError> {
        let text = text.into();
        if Self::is_valid(&text) {
            Ok(Label(text))
        } else {
            Err(NameError::InvalidLabel(text))
        }
    }

    pub fn is_valid(text: &str) -> bool {
        !text.is_empty()
            && text
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
            && !text.bytes().all(|b| b.is_ascii_digit())
            && face_token(text).is_none()
            && text != PREFIX
            && !PREFIX_ALIASES.contains(&text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Label {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::new(s)
    }
}

impl TryFrom<String> for Label {
    type Error = NameError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Label::new(value)
    }
}

impl From<Label> for String {
    fn from(label: Label) -> Self {
        label.0
    }
}

impl std::borrow::Borrow<str> for Label {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Label {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
