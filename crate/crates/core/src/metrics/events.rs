use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximal anomalous runs as sorted, disjoint, non-adjacent half-open
/// intervals over `[0, total_len)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSet {
    total_len: usize,
    events: Vec<(usize, usize)>,
}

impl EventSet {
    pub fn from_labels(labels: &[u8]) -> Self {
        Self::from_mask(labels.iter().map(|&y| y != 0), labels.len())
    }

    /// Points with `score > threshold` as events.
    pub fn from_scores(scores: &[f64], threshold: f64) -> Self {
        Self::from_mask(scores.iter().map(|&s| s > threshold), scores.len())
    }

    fn from_mask(mask: impl Iterator<Item = bool>, total_len: usize) -> Self {
        let mut events = Vec::new();
        let mut open: Option<usize> = None;
        for (t, on) in mask.enumerate() {
            match (on, open) {
                (true, None) => open = Some(t),
                (false, Some(s)) => {
                    events.push((s, t));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(s) = open {
            events.push((s, total_len));
        }
        Self { total_len, events }
    }

    /// Validates and wraps explicit intervals.
    pub fn new(total_len: usize, events: Vec<(usize, usize)>) -> Result<Self> {
        for (i, &(s, e)) in events.iter().enumerate() {
            if s >= e || e > total_len {
                return Err(Error::config(format!(
                    "bad event [{s}, {e}) for length {total_len}"
                )));
            }
            if i > 0 && s <= events[i - 1].1 {
                return Err(Error::config(
                    "events must be sorted, disjoint and non-adjacent",
                ));
            }
        }
        Ok(Self { total_len, events })
    }

    pub fn to_labels(&self) -> Vec<u8> {
        let mut y = vec![0u8; self.total_len];
        for &(s, e) in &self.events {
            y[s..e].iter_mut().for_each(|v| *v = 1);
        }
        y
    }

    pub fn events(&self) -> &[(usize, usize)] {
        &self.events
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of anomalous timesteps.
    pub fn mass(&self) -> usize {
        self.events.iter().map(|(s, e)| e - s).sum()
    }
}
