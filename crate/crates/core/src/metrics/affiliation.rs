//! Affiliation precision/recall in discrete time.
//!
//! The timeline is split into zones of influence, one per truth event, with
//! boundaries halfway between consecutive events (gap points tied between two
//! events go to the earlier one). Inside a zone, each predicted point scores
//! the probability that a uniformly random zone point lies at least as far
//! from the event; each truth point scores the probability that a uniformly
//! random zone point lies at least as far from it as the nearest prediction.

use serde::{Deserialize, Serialize};

use crate::ndcore::Rng;
use crate::{Error, Result};

use super::EventSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affiliation {
    /// In [0, 1]; 0 when nothing is predicted.
    pub precision: f64,
    /// In [0, 1].
    pub recall: f64,
    /// Harmonic mean, 0-100.
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnbiasedAffiliation {
    /// May be negative; 0-100 scale.
    pub value: f64,
    pub baseline_precision: f64,
    pub baseline_recall: f64,
}

/// Zone `[start, end)` for each truth event.
pub(crate) fn zones(truth: &EventSet) -> Vec<(usize, usize)> {
    let ev = truth.events();
    let mut out = Vec::with_capacity(ev.len());
    let mut start = 0;
    for j in 0..ev.len() {
        let end = if j + 1 < ev.len() {
            // first gap point strictly closer to the next event
            (ev[j + 1].0 + ev[j].1 - 1) / 2 + 1
        } else {
            truth.total_len()
        };
        out.push((start, end));
        start = end;
    }
    out
}

#[inline]
fn clamp_count(lo: i64, hi: i64) -> i64 {
    (hi - lo).max(0)
}

/// Zone points whose distance to `[s, e)` is at least `d`.
fn points_at_least_from_event(zone: (usize, usize), event: (usize, usize), d: i64) -> i64 {
    let (zs, ze) = (zone.0 as i64, zone.1 as i64);
    let (s, e) = (event.0 as i64, event.1 as i64);
    if d <= 0 {
        return ze - zs;
    }
    // left side: x in [zs, s) with s - x >= d
    let left = clamp_count(zs, (s - d + 1).min(s));
    // right side: x in [e, ze) with x - (e - 1) >= d
    let right = clamp_count((e - 1 + d).max(e), ze);
    left + right
}

/// Zone points whose distance to point `y` is at least `d`.
fn points_at_least_from_point(zone: (usize, usize), y: i64, d: i64) -> i64 {
    let (zs, ze) = (zone.0 as i64, zone.1 as i64);
    if d <= 0 {
        return ze - zs;
    }
    clamp_count(zs, (y - d + 1).min(ze)) + clamp_count((y + d).max(zs), ze)
}

fn distance_to_event(x: usize, event: (usize, usize)) -> i64 {
    let (x, s, e) = (x as i64, event.0 as i64, event.1 as i64);
    if x < s {
        s - x
    } else if x >= e {
        x - e + 1
    } else {
        0
    }
}

/// Affiliation precision, recall and F1 of `predicted` against `truth`.
pub fn affiliation_f1(predicted: &EventSet, truth: &EventSet) -> Result<Affiliation> {
    if truth.is_empty() {
        return Err(Error::Metric(
            "affiliation needs at least one truth event".into(),
        ));
    }
    if predicted.total_len() != truth.total_len() {
        return Err(Error::Metric("predicted and truth lengths differ".into()));
    }
    let pred_points: Vec<usize> = predicted.events().iter().flat_map(|&(s, e)| s..e).collect();
    let zones = zones(truth);
    let mut precision_sum = 0.0;
    let mut precision_zones = 0usize;
    let mut recall_sum = 0.0;
    for (&zone, &event) in zones.iter().zip(truth.events()) {
        let lo = pred_points.partition_point(|&p| p < zone.0);
        let hi = pred_points.partition_point(|&p| p < zone.1);
        let in_zone = &pred_points[lo..hi];
        if in_zone.is_empty() {
            continue;
        }
        let size = (zone.1 - zone.0) as f64;
        let p: f64 = in_zone
            .iter()
            .map(|&x| {
                points_at_least_from_event(zone, event, distance_to_event(x, event)) as f64 / size
            })
            .sum::<f64>()
            / in_zone.len() as f64;
        precision_sum += p;
        precision_zones += 1;

        let r: f64 = (event.0..event.1)
            .map(|y| {
                let k = in_zone.partition_point(|&p| p < y);
                let mut d = i64::MAX;
                if k < in_zone.len() {
                    d = d.min(in_zone[k] as i64 - y as i64);
                }
                if k > 0 {
                    d = d.min(y as i64 - in_zone[k - 1] as i64);
                }
                points_at_least_from_point(zone, y as i64, d) as f64 / size
            })
            .sum::<f64>()
            / (event.1 - event.0) as f64;
        recall_sum += r;
    }
    let precision = if precision_zones == 0 {
        0.0
    } else {
        precision_sum / precision_zones as f64
    };
    let recall = recall_sum / zones.len() as f64;
    let f1 = if precision + recall > 0.0 {
        100.0 * 2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Affiliation {
        precision,
        recall,
        f1,
    })
}

/// `k` distinct uniformly random timesteps out of `total`, as events.
fn random_prediction(total: usize, k: usize, rng: &mut Rng) -> EventSet {
    let mut idx: Vec<usize> = (0..total).collect();
    for i in 0..k.min(total) {
        let j = i + rng.below((total - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut mask = vec![0u8; total];
    for &i in &idx[..k.min(total)] {
        mask[i] = 1;
    }
    EventSet::from_labels(&mask)
}

/// Expected affiliation precision and recall of a random predictor flagging
/// `k` timesteps, estimated from `draws` seeded draws.
pub fn random_affiliation_baseline(
    truth: &EventSet,
    k: usize,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws == 0 {
        return Err(Error::config("Monte-Carlo draws must be >= 1"));
    }
    let results = crate::par::map_range(draws, |i| {
        let mut rng = Rng::with_stream(seed, 1000 + i as u64);
        affiliation_f1(&random_prediction(truth.total_len(), k, &mut rng), truth)
    });
    let mut p = 0.0;
    let mut r = 0.0;
    for a in results {
        let a = a?;
        p += a.precision;
        r += a.recall;
    }
    Ok((p / draws as f64, r / draws as f64))
}

/// Excess-over-chance rescaling of affiliation precision and recall given
/// the random-predictor baselines `(p0, r0)`. A component whose baseline is
/// already perfect carries no excess and counts as 0.
pub fn uaff_f1(precision: f64, recall: f64, p0: f64, r0: f64) -> Result<f64> {
    let all = [precision, recall, p0, r0];
    if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Metric(format!(
            "affiliation values out of [0, 1]: {all:?}"
        )));
    }
    let excess = |v: f64, base: f64| {
        if base < 1.0 {
            (v - base) / (1.0 - base)
        } else {
            0.0
        }
    };
    let up = excess(precision, p0);
    let ur = excess(recall, r0);
    // harmonic mean only when both excesses are positive; with mixed
    // signs it is unbounded
    let v = if up > 0.0 && ur > 0.0 {
        2.0 * up * ur / (up + ur)
    } else {
        up.min(ur)
    };
    Ok(100.0 * v)
}

/// Affiliation of `predicted` plus its unbiased rescaling against a random
/// predictor with the same number of flagged timesteps.
pub fn unbiased_affiliation(
    predicted: &EventSet,
    truth: &EventSet,
    draws: usize,
    seed: u64,
) -> Result<(Affiliation, UnbiasedAffiliation)> {
    let aff = affiliation_f1(predicted, truth)?;
    let (p0, r0) = random_affiliation_baseline(truth, predicted.mass(), draws, seed)?;
    let value = uaff_f1(aff.precision, aff.recall, p0, r0)?;
    Ok((
        aff,
        UnbiasedAffiliation {
            value,
            baseline_precision: p0,
            baseline_recall: r0,
        },
    ))
}
