//! Labeled recordings: the unit of leave-one-out evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::signal::TimeSeries;

/// The four elicited emotional states, in class-id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Relax,
    Scary,
    Disgust,
    Joy,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Relax, Emotion::Scary, Emotion::Disgust, Emotion::Joy];

    pub fn class_id(self) -> usize {
        self as usize
    }

    pub fn from_class_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Relax => "relax",
            Emotion::Scary => "scary",
            Emotion::Disgust => "disgust",
            Emotion::Joy => "joy",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown emotion label '{s}' (expected relax, scary, disgust or joy)"))
    }
}

/// One recording session of one subject under one stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub subject: u32,
    pub label: Emotion,
    /// RF phase record in radians.
    pub rf: TimeSeries,
    /// Simultaneous ECG in millivolts, when available.
    pub ecg: Option<TimeSeries>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.class_id()).collect()
    }

    pub fn subjects(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.subject).collect()
    }

    /// Per-class sample counts in class-id order.
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for s in &self.samples {
            counts[s.label.class_id()] += 1;
        }
        counts
    }
}
