//! Deterministic stand-in for the language model: seeded sampling from
//! relevance-weighted library frequencies.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ReasonedWidget, ReasonedWidgetSet};
use crate::catalog::{capabilities_of, fallback_order, CapabilityTag, WidgetKind};
use crate::library::{FrequencyTable, PreferenceLibrary};
use crate::task::{relevance, Aspect, RelevanceResult, TaskContext};

/// Stored reasons quoted per rationale.
const QUOTED_REASONS: usize = 2;
/// Relevant tasks named per rationale.
const NAMED_TASKS: usize = 3;

fn admissible(ctx: &TaskContext, kind: WidgetKind) -> bool {
    ctx.tags().is_empty() || !capabilities_of(kind).is_disjoint(ctx.tags())
}

/// Relevance-weighted widget shares for one aspect, restricted to widgets
/// whose capabilities meet the context tags. Zero-vote widgets are absent.
pub fn vote_distribution(
    ctx: &TaskContext,
    lib: &PreferenceLibrary,
    rel: &RelevanceResult,
    aspect: Aspect,
) -> BTreeMap<WidgetKind, f64> {
    let mut votes: BTreeMap<WidgetKind, f64> = BTreeMap::new();
    for r in &rel.ranked {
        let Some(list) = lib.task(&r.task_name).and_then(|t| t.responses_for(aspect)) else {
            continue;
        };
        let table = FrequencyTable::from_responses(list);
        if table.total == 0 {
            continue;
        }
        for (&kind, &count) in &table.counts {
            if count > 0 && admissible(ctx, kind) {
                *votes.entry(kind).or_default() += r.score() * count as f64 / table.total as f64;
            }
        }
    }
    votes
}

/// The library-free choice: the first fallback of the highest-precedence tag.
pub fn fallback_widget(ctx: &TaskContext) -> (WidgetKind, Option<CapabilityTag>) {
    CapabilityTag::FALLBACK_PRECEDENCE
        .into_iter()
        .find(|t| ctx.tags().contains(t))
        .map_or((WidgetKind::Slider, None), |t| (fallback_order(t)[0], Some(t)))
}

fn fallback_rationale(kind: WidgetKind, tag: Option<CapabilityTag>) -> String {
    match tag {
        Some(t) => format!(
            "No library evidence applies; {} is the default widget for {}.",
            kind.display_name(),
            t.describe()
        ),
        None => format!("No library evidence applies; {} is the general default.", kind.display_name()),
    }
}

fn library_rationale(
    lib: &PreferenceLibrary,
    rel: &RelevanceResult,
    aspect: Aspect,
    kind: WidgetKind,
    share: f64,
) -> String {
    let names: Vec<&str> = rel.ranked.iter().take(NAMED_TASKS).map(|r| r.task_name.as_str()).collect();
    let mut quotes: Vec<&str> = Vec::new();
    'tasks: for r in &rel.ranked {
        let list = lib.task(&r.task_name).and_then(|t| t.responses_for(aspect)).unwrap_or(&[]);
        for resp in list.iter().filter(|x| x.widget == kind) {
            if !quotes.contains(&resp.reason.as_str()) {
                quotes.push(&resp.reason);
                if quotes.len() == QUOTED_REASONS {
                    break 'tasks;
                }
            }
        }
    }
    let mut text = format!(
        "Relevant tasks: {}. {} holds {:.0}% of the weighted {} votes.",
        names.join(", "),
        kind.display_name(),
        share * 100.0,
        aspect.as_str()
    );
    if !quotes.is_empty() {
        let q: Vec<String> = quotes.iter().map(|s| format!("\"{s}\"")).collect();
        text.push_str(&format!(" Raters said: {}.", q.join("; ")));
    }
    text
}

/// One reasoning pass. Each requested aspect draws from the vote distribution
/// with a generator seeded by `seed`; without relevant tasks or surviving
/// votes the fallback widget is returned.
pub fn reason_once_oracle(ctx: &TaskContext, lib: &PreferenceLibrary, seed: u64) -> ReasonedWidgetSet {
    let rel = relevance(ctx, lib);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_aspect = BTreeMap::new();
    for &aspect in ctx.aspects() {
        let votes = vote_distribution(ctx, lib, &rel, aspect);
        let chosen = if votes.is_empty() {
            let (kind, tag) = fallback_widget(ctx);
            ReasonedWidget {
                widget: kind,
                rationale: fallback_rationale(kind, tag),
            }
        } else {
            let kinds: Vec<WidgetKind> = votes.keys().copied().collect();
            let weights: Vec<f64> = votes.values().copied().collect();
            let dist = WeightedIndex::new(&weights).expect("positive finite votes");
            let kind = kinds[dist.sample(&mut rng)];
            let share = votes[&kind] / weights.iter().sum::<f64>();
            ReasonedWidget {
                widget: kind,
                rationale: library_rationale(lib, &rel, aspect, kind, share),
            }
        };
        per_aspect.insert(aspect, chosen);
    }
    ReasonedWidgetSet {
        task_name: ctx.name().to_string(),
        per_aspect,
        relevant_tasks: rel.task_names(),
    }
}
