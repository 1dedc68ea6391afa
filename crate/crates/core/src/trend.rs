//! Qualitative preference trends the fixture library must exhibit.

use serde::{Deserialize, Serialize};

use crate::catalog::WidgetKind;
use crate::library::FrequencyTable;
use crate::task::Aspect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    /// `widgets[0]` is the strict argmax.
    Argmax,
    /// The argmax is one of `widgets`.
    ArgmaxIn,
    /// The two most chosen widgets are exactly `widgets`.
    TopTwo,
    /// `widgets[0]` is chosen more often than each of the rest.
    Beats,
    /// No widget exceeds 35% and each of `widgets` holds at least 20%.
    NoConsensus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendAssertion {
    pub id: String,
    pub task: String,
    pub aspect: Aspect,
    pub kind: TrendKind,
    pub widgets: Vec<WidgetKind>,
    pub trend: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendManifest {
    pub library_version: String,
    pub assertions: Vec<TrendAssertion>,
}

impl TrendAssertion {
    /// Checks the assertion against library response counts.
    pub fn holds_on(&self, table: &FrequencyTable) -> bool {
        let ranked = table.ranked();
        let count = |i: usize| ranked.get(i).map_or(0, |r| r.1);
        match self.kind {
            TrendKind::Argmax => {
                ranked.first().map(|r| r.0) == self.widgets.first().copied() && count(1) < count(0)
            }
            TrendKind::ArgmaxIn => ranked.first().is_some_and(|r| self.widgets.contains(&r.0)),
            TrendKind::TopTwo => {
                ranked.len() >= 2
                    && self.widgets.len() == 2
                    && self.widgets.contains(&ranked[0].0)
                    && self.widgets.contains(&ranked[1].0)
                    && count(2) < count(1)
            }
            TrendKind::Beats => self.beats(|k| table.count(k)),
            TrendKind::NoConsensus => {
                table.total > 0
                    && ranked.iter().all(|r| table.share(r.0) <= 0.35)
                    && self.widgets.iter().all(|w| table.share(*w) >= 0.2)
            }
        }
    }

    /// Checks the assertion against an aggregated recommendation ordered by
    /// score (highest first): the top-scored widget must satisfy it.
    pub fn holds_for_scores(&self, ranked: &[(WidgetKind, usize)]) -> bool {
        let Some(&(top, _)) = ranked.first() else {
            return false;
        };
        match self.kind {
            TrendKind::Argmax => self.widgets.first() == Some(&top),
            TrendKind::ArgmaxIn | TrendKind::TopTwo | TrendKind::NoConsensus => self.widgets.contains(&top),
            TrendKind::Beats => self.beats(|k| ranked.iter().find(|r| r.0 == k).map_or(0, |r| r.1)),
        }
    }

    fn beats(&self, count: impl Fn(WidgetKind) -> usize) -> bool {
        match self.widgets.split_first() {
            Some((w, rest)) => rest.iter().all(|l| count(*w) > count(*l)),
            None => false,
        }
    }
}
