//! Action-observation histories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One agent's history: an optional initial observation followed by
/// `(action, next observation)` pairs.
///
/// The text form is `init|a/o|a/o`, with `init` empty when the agent gets no
/// initial observation. The empty root history of such an agent is `""`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalAoh {
    pub initial: Option<u32>,
    pub steps: Vec<(u32, u32)>,
}

impl LocalAoh {
    pub fn new(initial: Option<u32>) -> Self {
        LocalAoh { initial, steps: Vec::new() }
    }

    /// Number of completed steps, i.e. the time index of the next decision.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty() && self.initial.is_none()
    }

    pub fn extended(&self, action: u32, observation: u32) -> Self {
        let mut next = self.clone();
        next.steps.push((action, observation));
        next
    }

    /// Relabels every action and observation token.
    pub fn map(&self, action: impl Fn(u32) -> u32, observation: impl Fn(u32) -> u32) -> Self {
        LocalAoh {
            initial: self.initial.map(&observation),
            steps: self.steps.iter().map(|&(a, o)| (action(a), observation(o))).collect(),
        }
    }

    /// Observation tokens in order, initial observation first.
    pub fn observations(&self) -> impl Iterator<Item = u32> + '_ {
        self.initial.into_iter().chain(self.steps.iter().map(|&(_, o)| o))
    }
}

impl fmt::Display for LocalAoh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(o) = self.initial {
            write!(f, "{o}")?;
        }
        for (a, o) in &self.steps {
            write!(f, "|{a}/{o}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed history `{0}`")]
pub struct ParseAohError(String);

impl FromStr for LocalAoh {
    type Err = ParseAohError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseAohError(s.to_string());
        let mut parts = s.split('|');
        let head = parts.next().unwrap_or("");
        let initial = if head.is_empty() {
            None
        } else {
            Some(head.parse().map_err(|_| bad())?)
        };
        let mut steps = Vec::new();
        for part in parts {
            let (a, o) = part.split_once('/').ok_or_else(bad)?;
            steps.push((a.parse().map_err(|_| bad())?, o.parse().map_err(|_| bad())?));
        }
        Ok(LocalAoh { initial, steps })
    }
}

impl Serialize for LocalAoh {
    fn serialize<Se: Serializer>(&self, serializer: Se) -> Result<Se::Ok, Se::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LocalAoh {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Histories of all agents at the same time step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAoh(pub Vec<LocalAoh>);

impl JointAoh {
    pub fn len(&self) -> usize {
        self.0.first().map_or(0, LocalAoh::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All agents have taken the same number of steps.
    pub fn is_consistent(&self) -> bool {
        self.0.windows(2).all(|w| w[0].len() == w[1].len())
    }
}
