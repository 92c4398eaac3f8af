//! Domains ranked by how often they were shared.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

use crate::ratings::{RatingTable, Reliability};
use crate::store::{Dedup, KindSet, Result, Store};
use crate::timefmt::Window;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankClass {
    Reliable,
    Unreliable,
    #[default]
    All,
}

impl RankClass {
    fn admits(self, reliability: Reliability) -> bool {
        match self {
            RankClass::Reliable => reliability == Reliability::Reliable,
            RankClass::Unreliable => reliability == Reliability::Unreliable,
            RankClass::All => true,
        }
    }
}

impl FromStr for RankClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reliable" => Ok(RankClass::Reliable),
            "unreliable" => Ok(RankClass::Unreliable),
            "all" => Ok(RankClass::All),
            other => Err(format!("class must be reliable, unreliable or all, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankFrequencyEntry {
    pub rank: usize,
    pub domain: String,
    pub frequency: u64,
}

/// Ranks 1..N by descending frequency; equal frequencies are ordered by
/// domain name.
pub fn rank_frequency(
    counts: &BTreeMap<String, u64>,
    ratings: &RatingTable,
    class: RankClass,
    limit: Option<usize>,
) -> Vec<RankFrequencyEntry> {
    let mut rows: Vec<(&String, u64)> =
        counts.iter().filter(|(d, &n)| n > 0 && class.admits(ratings.reliability(d))).map(|(d, &n)| (d, n)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows.into_iter()
        .take(limit.unwrap_or(usize::MAX))
        .enumerate()
        .map(|(i, (domain, frequency))| RankFrequencyEntry { rank: i + 1, domain: domain.clone(), frequency })
        .collect()
}

pub fn rank_frequency_for_window(
    store: &Store,
    window: Window,
    ratings: &RatingTable,
    class: RankClass,
    limit: Option<usize>,
) -> Result<Vec<RankFrequencyEntry>> {
    if window.is_empty() {
        return Ok(Vec::new());
    }
    let counts = store.domain_counts(window, KindSet::ALL, Dedup::PerLink)?;
    Ok(rank_frequency(&counts, ratings, class, limit))
}

pub fn write_rankfreq_csv<W: std::io::Write>(rows: &[RankFrequencyEntry], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "domain", "frequency"])?;
    for r in rows {
        w.write_record([r.rank.to_string(), r.domain.clone(), r.frequency.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_domain() {
        let counts = BTreeMap::from([("c".to_string(), 5), ("a".to_string(), 5), ("b".to_string(), 3)]);
        let out = rank_frequency(&counts, &RatingTable::empty(), RankClass::All, None);
        let order: Vec<(&str, usize)> = out.iter().map(|e| (e.domain.as_str(), e.rank)).collect();
        assert_eq!(order, vec![("a", 1), ("c", 2), ("b", 3)]);
        assert_eq!(rank_frequency(&counts, &RatingTable::empty(), RankClass::All, Some(1)).len(), 1);
        assert!(rank_frequency(&counts, &RatingTable::empty(), RankClass::Reliable, None).is_empty());
    }
}
