//! Repeated reasoning folded into per-aspect widget scores.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::WidgetKind;
use crate::error::ReasonError;
use crate::library::{LibraryMode, PreferenceLibrary};
use crate::reasoning::{library_for_mode, reason_prepared, ChatBackend, ReasonedWidgetSet, ReasonerConfig, Transcript};
use crate::task::{Aspect, TaskContext};

/// Iterations per recommendation unless configured otherwise.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedRecommendation {
    pub task_name: String,
    pub aspect: Aspect,
    pub k: usize,
    pub scores: BTreeMap<WidgetKind, usize>,
    pub rationales: BTreeMap<WidgetKind, Vec<String>>,
    pub library_mode: LibraryMode,
}

impl AggregatedRecommendation {
    /// Widgets by score, highest first; ties by identifier.
    pub fn ranked(&self) -> Vec<(WidgetKind, usize)> {
        let mut v: Vec<(WidgetKind, usize)> = self.scores.iter().map(|(k, s)| (*k, *s)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_str().cmp(b.0.as_str())));
        v
    }

    pub fn top(&self) -> Option<WidgetKind> {
        self.ranked().first().map(|(k, _)| *k)
    }

    /// `{"widgets": [{"kind", "score", "count", "reasons"}], "k", "library_mode"}`
    /// with scores out of 10.
    pub fn option_document(&self) -> Value {
        let norm = normalize_scores_int(self, 10);
        let widgets: Vec<Value> = self
            .ranked()
            .into_iter()
            .map(|(kind, count)| {
                json!({
                    "kind": kind,
                    "score": norm[&kind],
                    "count": count,
                    "reasons": self.rationales.get(&kind).cloned().unwrap_or_default(),
                })
            })
            .collect();
        json!({ "widgets": widgets, "k": self.k, "library_mode": self.library_mode })
    }
}

/// Folds reasoning passes into one recommendation per aspect.
pub fn aggregate_sets(
    task_name: &str,
    sets: &[ReasonedWidgetSet],
    library_mode: LibraryMode,
) -> BTreeMap<Aspect, AggregatedRecommendation> {
    let mut out: BTreeMap<Aspect, AggregatedRecommendation> = BTreeMap::new();
    for set in sets {
        for (&aspect, rw) in &set.per_aspect {
            let rec = out.entry(aspect).or_insert_with(|| AggregatedRecommendation {
                task_name: task_name.to_string(),
                aspect,
                k: 0,
                scores: BTreeMap::new(),
                rationales: BTreeMap::new(),
                library_mode,
            });
            rec.k += 1;
            *rec.scores.entry(rw.widget).or_default() += 1;
            let reasons = rec.rationales.entry(rw.widget).or_default();
            if !rw.rationale.is_empty() && !reasons.contains(&rw.rationale) {
                reasons.push(rw.rationale.clone());
            }
        }
    }
    out
}

/// Runs `k` passes and scores widgets by how often they were chosen.
pub fn aggregate(
    ctx: &TaskContext,
    lib: &PreferenceLibrary,
    config: &ReasonerConfig,
    k: usize,
) -> Result<BTreeMap<Aspect, AggregatedRecommendation>, ReasonError> {
    aggregate_with(ctx, lib, config, k, None, None)
}

pub fn aggregate_with(
    ctx: &TaskContext,
    lib: &PreferenceLibrary,
    config: &ReasonerConfig,
    k: usize,
    backend: Option<&dyn ChatBackend>,
    transcript: Option<&Transcript>,
) -> Result<BTreeMap<Aspect, AggregatedRecommendation>, ReasonError> {
    if k == 0 {
        return Err(ReasonError::Config("k must be at least 1".into()));
    }
    config.validate()?;
    let prepared = library_for_mode(lib, config.library_mode, config.subset_seed)?;
    let sets: Vec<ReasonedWidgetSet> = (0..k as u64)
        .into_par_iter()
        .map(|i| reason_prepared(ctx, &prepared, config, config.seed.wrapping_add(i), backend, transcript))
        .collect::<Result<_, _>>()?;
    Ok(aggregate_sets(ctx.name(), &sets, config.library_mode))
}

/// Exact fraction, always in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Scores rescaled so they sum to `target`, as exact fractions.
pub fn normalize_scores(rec: &AggregatedRecommendation, target: u64) -> BTreeMap<WidgetKind, Ratio> {
    let k = rec.scores.values().sum::<usize>() as u64;
    rec.scores
        .iter()
        .map(|(w, &s)| (*w, Ratio::new(s as u64 * target, k.max(1))))
        .collect()
}

/// Integer scores summing to exactly `target` by largest remainder. Equal
/// remainders favour the higher raw score, then the identifier.
pub fn normalize_scores_int(rec: &AggregatedRecommendation, target: u64) -> BTreeMap<WidgetKind, u64> {
    let k = rec.scores.values().sum::<usize>() as u64;
    if k == 0 {
        return BTreeMap::new();
    }
    let mut floors: BTreeMap<WidgetKind, u64> = BTreeMap::new();
    let mut remainders: Vec<(u64, usize, WidgetKind)> = Vec::new();
    for (w, &s) in &rec.scores {
        let scaled = s as u64 * target;
        floors.insert(*w, scaled / k);
        remainders.push((scaled % k, s, *w));
    }
    let mut left = target - floors.values().sum::<u64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then_with(|| a.2.as_str().cmp(b.2.as_str())));
    for (_, _, w) in remainders {
        if left == 0 {
            break;
        }
        *floors.get_mut(&w).expect("present") += 1;
        left -= 1;
    }
    floors
}

/// The best widget per aspect, first occurrence only.
pub fn top_per_aspect(recs: &BTreeMap<Aspect, AggregatedRecommendation>) -> Vec<(Aspect, WidgetKind)> {
    let mut seen = BTreeSet::new();
    recs.iter()
        .filter_map(|(a, r)| r.top().map(|w| (*a, w)))
        .filter(|(_, w)| seen.insert(*w))
        .collect()
}
