//! Share of rated links by source orientation, per reliability class.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::ratings::{Orientation, RatingTable, Reliability};
use crate::store::{Dedup, KindSet, Result, Store};
use crate::timefmt::Window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationShare {
    pub orientation: Orientation,
    pub count: u64,
    /// Percentage of the row's base, 0..=100.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationRow {
    pub reliability: Reliability,
    /// Links with a known orientation; the percentage base.
    pub base: u64,
    pub shares: Vec<OrientationShare>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnknownCounts {
    pub reliable: u64,
    pub unreliable: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrientationTable {
    /// One row per reliability class with a non-zero base.
    pub rows: Vec<OrientationRow>,
    /// Rated links whose source has no orientation; outside every base.
    pub unknown: UnknownCounts,
}

/// `lang` keeps only sources whose rating lists that language.
pub fn orientation_distribution(
    domain_counts: &BTreeMap<String, u64>,
    ratings: &RatingTable,
    lang: Option<&str>,
) -> OrientationTable {
    let mut counts: BTreeMap<(Reliability, Orientation), u64> = BTreeMap::new();
    let mut unknown = UnknownCounts::default();
    for (domain, &n) in domain_counts {
        let rating = ratings.classify(domain);
        if !rating.reliability.is_rated() {
            continue;
        }
        if let Some(lang) = lang {
            if !rating.lang.as_deref().is_some_and(|l| l.eq_ignore_ascii_case(lang)) {
                continue;
            }
        }
        if rating.orientation == Orientation::Unknown {
            match rating.reliability {
                Reliability::Reliable => unknown.reliable += n,
                _ => unknown.unreliable += n,
            }
            continue;
        }
        *counts.entry((rating.reliability, rating.orientation)).or_default() += n;
    }

    let mut rows = Vec::new();
    for reliability in [Reliability::Reliable, Reliability::Unreliable] {
        let per: Vec<(Orientation, u64)> =
            Orientation::BUCKETS.iter().map(|&o| (o, counts.get(&(reliability, o)).copied().unwrap_or(0))).collect();
        let base: u64 = per.iter().map(|(_, n)| n).sum();
        if base == 0 {
            continue;
        }
        let shares = per
            .into_iter()
            .map(|(orientation, count)| OrientationShare {
                orientation,
                count,
                percent: count as f64 * 100.0 / base as f64,
            })
            .collect();
        rows.push(OrientationRow { reliability, base, shares });
    }
    OrientationTable { rows, unknown }
}

/// Distribution over every link kind in `window`, counted per link.
pub fn orientation_for_window(
    store: &Store,
    window: Window,
    ratings: &RatingTable,
    lang: Option<&str>,
) -> Result<OrientationTable> {
    if window.is_empty() {
        return Ok(OrientationTable::default());
    }
    let counts = store.domain_counts(window, KindSet::ALL, Dedup::PerLink)?;
    Ok(orientation_distribution(&counts, ratings, lang))
}
