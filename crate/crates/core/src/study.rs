//! Pairwise library-size comparison study: planning, records, simulated raters
//! and chi-squared analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::StudyError;
use crate::library::LibraryMode;
use crate::task::Aspect;

/// Evaluation tasks, three per task set.
pub const TASK_SETS: [[&str; 3]; 2] = [
    ["image_adjust_exposure", "image_adjust_temperature", "design_align_text"],
    ["image_adjust_tint", "image_change_to_spring", "design_position_logo"],
];

/// Latin-square rows: aspect given to the first, second and third task of a set.
pub const ASPECT_ROWS: [[Aspect; 3]; 3] = [
    [Aspect::Predictability, Aspect::Efficiency, Aspect::Explorability],
    [Aspect::Efficiency, Aspect::Explorability, Aspect::Predictability],
    [Aspect::Explorability, Aspect::Predictability, Aspect::Efficiency],
];

/// The six orders of three tasks, lexicographic.
pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Plan cells per task set: every permutation crossed with every aspect row.
pub const CELLS_PER_SET: usize = PERMUTATIONS.len() * ASPECT_ROWS.len();

/// Two library modes shown side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ComparisonPair {
    pub left: LibraryMode,
    pub right: LibraryMode,
}

#[derive(Deserialize)]
struct RawPair {
    left: LibraryMode,
    right: LibraryMode,
}

impl<'de> Deserialize<'de> for ComparisonPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawPair::deserialize(d)?;
        ComparisonPair::canonical(raw.left, raw.right).map_err(serde::de::Error::custom)
    }
}

impl ComparisonPair {
    /// The canonical pair with these sides, in table orientation.
    pub fn canonical(left: LibraryMode, right: LibraryMode) -> Result<Self, StudyError> {
        let pair = ComparisonPair { left, right };
        if enumerate_pairs().contains(&pair) {
            Ok(pair)
        } else {
            Err(StudyError::NonCanonicalPair(pair.key()))
        }
    }

    /// Position in the comparison table, from 0.
    pub fn index(&self) -> usize {
        enumerate_pairs().iter().position(|p| p == self).unwrap_or(usize::MAX)
    }

    /// Side holding more library responses.
    pub fn library_side(&self) -> Side {
        if self.left.size() >= self.right.size() {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn mode(&self, side: Side) -> LibraryMode {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn key(&self) -> String {
        format!("{}_vs_{}", self.left, self.right)
    }
}

impl fmt::Display for ComparisonPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} vs {}", self.left, self.right)
    }
}

impl FromStr for ComparisonPair {
    type Err = StudyError;

    /// Accepts `withlib10_vs_withlib25` or `withlib10 vs withlib25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StudyError::NonCanonicalPair(s.to_string());
        let (l, r) = s.split_once("_vs_").or_else(|| s.split_once(" vs ")).ok_or_else(bad)?;
        let left = l.parse().map_err(|_| bad())?;
        let right = r.parse().map_err(|_| bad())?;
        ComparisonPair::canonical(left, right)
    }
}

/// The six canonical pairs in table order.
pub fn enumerate_pairs() -> [ComparisonPair; 6] {
    let [w10, w25, w30, wo] = LibraryMode::CANONICAL;
    let p = |left, right| ComparisonPair { left, right };
    [p(w10, w25), p(w10, w30), p(w10, wo), p(w25, w30), p(w25, wo), p(w30, wo)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// One task of an assignment with its aspect and the pair presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanItem {
    pub task: String,
    pub aspect: Aspect,
    pub pairs: Vec<ComparisonPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub participant_id: String,
    /// 1 or 2.
    pub task_set: u8,
    /// Index into [`PERMUTATIONS`].
    pub permutation: usize,
    /// Index into [`ASPECT_ROWS`].
    pub aspect_row: usize,
    /// Items in presentation order.
    pub items: Vec<PlanItem>,
}

impl Assignment {
    pub fn presentations(&self) -> usize {
        self.items.iter().map(|i| i.pairs.len()).sum()
    }

    pub fn item(&self, task: &str, aspect: Aspect) -> Option<&PlanItem> {
        self.items.iter().find(|i| i.task == task && i.aspect == aspect)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub seed: u64,
    pub participants: Vec<Assignment>,
}

impl StudyPlan {
    pub fn participant(&self, id: &str) -> Option<&Assignment> {
        self.participants.iter().find(|a| a.participant_id == id)
    }

    /// Participants per (task set, permutation, aspect row).
    pub fn cell_counts(&self) -> BTreeMap<(u8, usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for a in &self.participants {
            *counts.entry((a.task_set, a.permutation, a.aspect_row)).or_default() += 1;
        }
        counts
    }

    /// Checks that `rec` is a presentation this plan gave its participant.
    pub fn validate_record(&self, rec: &ComparisonRecord) -> Result<(), StudyError> {
        let outside = |reason: String| StudyError::OutsidePlan {
            participant: rec.participant_id.clone(),
            reason,
        };
        let a = self
            .participant(&rec.participant_id)
            .ok_or_else(|| outside("participant not in plan".into()))?;
        let item = a
            .item(&rec.task_name, rec.aspect)
            .ok_or_else(|| outside(format!("{} / {} not assigned", rec.task_name, rec.aspect.as_str())))?;
        if !item.pairs.contains(&rec.pair) {
            return Err(outside(format!("pair {} not presented", rec.pair)));
        }
        Ok(())
    }
}

/// Which task sets participants are spread over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskSets {
    /// Participants alternate between set 1 and set 2.
    #[default]
    Both,
    /// Every participant gets the given set.
    Only(u8),
}

/// Plan alternating both task sets.
pub fn plan_study(n_participants: usize, seed: u64) -> Result<StudyPlan, StudyError> {
    plan_study_with(n_participants, seed, TaskSets::Both)
}

pub fn plan_study_with(n_participants: usize, seed: u64, sets: TaskSets) -> Result<StudyPlan, StudyError> {
    if n_participants == 0 {
        return Err(StudyError::NoParticipants);
    }
    if let TaskSets::Only(s) = sets {
        if !(1..=2).contains(&s) {
            return Err(StudyError::UnknownTaskSet(s));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n_participants.to_string().len().max(3);
    let participants = (0..n_participants)
        .map(|i| {
            let (task_set, within) = match sets {
                TaskSets::Both => ((i % 2) as u8 + 1, i / 2),
                TaskSets::Only(s) => (s, i),
            };
            let cell = within % CELLS_PER_SET;
            let (permutation, aspect_row) = (cell / ASPECT_ROWS.len(), cell % ASPECT_ROWS.len());
            let tasks = TASK_SETS[usize::from(task_set - 1)];
            let items = PERMUTATIONS[permutation]
                .iter()
                .map(|&t| {
                    let mut pairs = enumerate_pairs().to_vec();
                    pairs.shuffle(&mut rng);
                    PlanItem {
                        task: tasks[t].to_string(),
                        aspect: ASPECT_ROWS[aspect_row][t],
                        pairs,
                    }
                })
                .collect();
            Assignment {
                participant_id: format!("P{:0width$}", i + 1),
                task_set,
                permutation,
                aspect_row,
                items,
            }
        })
        .collect();
    Ok(StudyPlan { seed, participants })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub participant_id: String,
    pub task_name: String,
    pub aspect: Aspect,
    pub pair: ComparisonPair,
    pub selection: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text_reason: Option<String>,
}

impl ComparisonRecord {
    pub fn selected_mode(&self) -> LibraryMode {
        self.pair.mode(self.selection)
    }
}

/// Appends records as JSON lines.
pub fn write_records<W: Write>(mut out: W, records: &[ComparisonRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads JSON-lines records; blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<ComparisonRecord>, StudyError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| StudyError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| StudyError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredResult {
    pub observed: (u64, u64),
    pub statistic: f64,
    pub p: f64,
    pub stars: u8,
}

pub fn stars_for(p: f64) -> u8 {
    match p {
        p if p < 0.001 => 3,
        p if p < 0.01 => 2,
        p if p < 0.05 => 1,
        _ => 0,
    }
}

/// Two-category goodness-of-fit test against equal expected counts (df = 1).
pub fn chi_squared(a: u64, b: u64) -> Result<ChiSquaredResult, StudyError> {
    let n = a + b;
    if n == 0 {
        return Err(StudyError::NoObservations);
    }
    let d = a.abs_diff(b) as f64;
    let statistic = d * d / n as f64;
    let p = chi2_sf(statistic, 1.0);
    Ok(ChiSquaredResult {
        observed: (a, b),
        statistic,
        p,
        stars: stars_for(p),
    })
}

/// Upper tail of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_sf(statistic: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, statistic / 2.0)
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_TINY: f64 = 1e-300;
const GAMMA_MAX_ITER: usize = 500;

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let prefactor = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        let (mut ap, mut del) = (a, 1.0 / a);
        let mut sum = del;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * prefactor).max(0.0)
    } else {
        // modified Lentz continued fraction
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / GAMMA_TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < GAMMA_TINY {
                d = GAMMA_TINY;
            }
            c = b + an / c;
            if c.abs() < GAMMA_TINY {
                c = GAMMA_TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        prefactor * h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// One test per (task, aspect, pair).
    TaskAspectPair,
    /// Counts pooled over tasks: one test per (aspect, pair).
    AspectPair,
}

impl FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "task-aspect-pair" | "task" => Ok(Grouping::TaskAspectPair),
            "aspect-pair" | "aspect" => Ok(Grouping::AspectPair),
            _ => Err(format!("unknown grouping {s:?}; expected task-aspect-pair or aspect-pair")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub aspect: Aspect,
    pub left: LibraryMode,
    pub right: LibraryMode,
    pub count_left: u64,
    pub count_right: u64,
    pub chi2: f64,
    pub p: f64,
    pub stars: u8,
}

impl AnalysisRow {
    pub fn pair(&self) -> ComparisonPair {
        ComparisonPair {
            left: self.left,
            right: self.right,
        }
    }
}

fn task_rank(task: &str) -> usize {
    TASK_SETS.iter().flatten().position(|t| *t == task).unwrap_or(usize::MAX)
}

/// Counts selections per group and runs a chi-squared test on each.
pub fn analyze(records: &[ComparisonRecord], grouping: Grouping) -> Result<Vec<AnalysisRow>, StudyError> {
    if records.is_empty() {
        return Err(StudyError::EmptyRecords);
    }
    type Key = (usize, Option<String>, Aspect, usize);
    let mut groups: BTreeMap<Key, (ComparisonPair, u64, u64)> = BTreeMap::new();
    for r in records {
        let task = match grouping {
            Grouping::TaskAspectPair => Some(r.task_name.clone()),
            Grouping::AspectPair => None,
        };
        let rank = task.as_deref().map_or(0, task_rank);
        let entry = groups.entry((rank, task, r.aspect, r.pair.index())).or_insert((r.pair, 0, 0));
        match r.selection {
            Side::Left => entry.1 += 1,
            Side::Right => entry.2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((_, task, aspect, _), (pair, l, r))| {
            let chi = chi_squared(l, r)?;
            Ok(AnalysisRow {
                task,
                aspect,
                left: pair.left,
                right: pair.right,
                count_left: l,
                count_right: r,
                chi2: chi.statistic,
                p: chi.p,
                stars: chi.stars,
            })
        })
        .collect()
}

pub fn analysis_csv(rows: &[AnalysisRow], grouping: Grouping) -> String {
    let mut out = String::new();
    if grouping == Grouping::TaskAspectPair {
        out.push_str("task,");
    }
    out.push_str("aspect,left,right,count_left,count_right,chi2,p,stars\n");
    for r in rows {
        if grouping == Grouping::TaskAspectPair {
            out.push_str(r.task.as_deref().unwrap_or(""));
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.aspect.as_str(),
            r.left,
            r.right,
            r.count_left,
            r.count_right,
            r.chi2,
            r.p,
            r.stars
        ));
    }
    out
}

/// Simulated raters: each presentation picks the side with more library
/// responses with probability `p`, or the pair's override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaterModel {
    pub p: f64,
    /// Keyed by pair, e.g. `withlib30_vs_withoutlib`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_pair: BTreeMap<String, f64>,
    pub seed: u64,
}

impl RaterModel {
    pub fn uniform(p: f64, seed: u64) -> Self {
        RaterModel {
            p,
            per_pair: BTreeMap::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let check = |what: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(StudyError::InvalidModel(format!("{what} = {p} is not a probability")))
            }
        };
        check("p", self.p)?;
        for (key, &p) in &self.per_pair {
            key.parse::<ComparisonPair>()
                .map_err(|_| StudyError::InvalidModel(format!("unknown pair {key:?}")))?;
            check(key, p)?;
        }
        Ok(())
    }

    pub fn p_for(&self, pair: &ComparisonPair) -> f64 {
        self.per_pair.get(&pair.key()).copied().unwrap_or(self.p)
    }
}

/// One record per planned presentation, drawn in plan order.
pub fn simulate_raters(plan: &StudyPlan, model: &RaterModel) -> Result<Vec<ComparisonRecord>, StudyError> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut out = Vec::with_capacity(plan.participants.len() * 18);
    for a in &plan.participants {
        for item in &a.items {
            for pair in &item.pairs {
                let lib = pair.library_side();
                let selection = if rng.gen::<f64>() < model.p_for(pair) {
                    lib
                } else {
                    match lib {
                        Side::Left => Side::Right,
                        Side::Right => Side::Left,
                    }
                };
                out.push(ComparisonRecord {
                    participant_id: a.participant_id.clone(),
                    task_name: item.task.clone(),
                    aspect: item.aspect,
                    pair: *pair,
                    selection,
                    free_text_reason: None,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use std::collections::BTreeSet;

    fn w(n: usize) -> LibraryMode {
        LibraryMode::WithLib(n)
    }

    #[test]
    fn six_pairs_in_table_order() {
        let pairs = enumerate_pairs();
        assert_eq!(pairs.len(), 6);
        assert_eq!(pairs[5], ComparisonPair { left: w(30), right: LibraryMode::WithoutLib });
        assert!(pairs.iter().all(|p| p.left != p.right));
        let keys: Vec<_> = pairs.iter().map(ComparisonPair::key).collect();
        assert_eq!(keys[0], "withlib10_vs_withlib25");
        assert_eq!(keys[2], "withlib10_vs_withoutlib");
        for (i, p) in pairs.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(p.key().parse::<ComparisonPair>().unwrap(), *p);
        }
    }

    #[test]
    fn non_canonical_pairs_rejected() {
        assert!(ComparisonPair::canonical(w(25), w(10)).is_err());
        assert!(ComparisonPair::canonical(w(30), w(30)).is_err());
        assert!("withlib5_vs_withoutlib".parse::<ComparisonPair>().is_err());
        let json = r#"{"left":"withoutlib","right":"withlib30"}"#;
        assert!(serde_json::from_str::<ComparisonPair>(json).is_err());
    }

    #[test]
    fn library_side() {
        let [a, _, c, ..] = enumerate_pairs();
        assert_eq!(a.library_side(), Side::Right);
        assert_eq!(c.library_side(), Side::Left);
    }

    #[test]
    fn one_participant_gets_eighteen() {
        let plan = plan_study(1, 0).unwrap();
        assert_eq!(plan.participants[0].presentations(), 18);
        let aspects: BTreeSet<_> = plan.participants[0].items.iter().map(|i| i.aspect).collect();
        assert_eq!(aspects.len(), 3);
    }

    #[test]
    fn zero_participants_rejected() {
        assert!(matches!(plan_study(0, 1), Err(StudyError::NoParticipants)));
        assert!(matches!(plan_study_with(4, 1, TaskSets::Only(3)), Err(StudyError::UnknownTaskSet(3))));
    }

    #[test]
    fn single_set_cells_used_twice() {
        let plan = plan_study_with(36, 5, TaskSets::Only(1)).unwrap();
        let cells = plan.cell_counts();
        assert_eq!(cells.len(), 18);
        assert!(cells.values().all(|&c| c == 2));
    }

    #[test]
    fn both_sets_balanced_at_multiples_of_36() {
        for n in [36, 72, 108] {
            let cells = plan_study(n, 9).unwrap().cell_counts();
            assert_eq!(cells.len(), 36);
            assert!(cells.values().all(|&c| c == n / 36), "n = {n}");
        }
    }

    #[test]
    fn full_design_has_108_triples() {
        for n in [6, 7, 20, 72, 78] {
            let plan = plan_study(n, 3).unwrap();
            let triples: BTreeSet<_> = plan
                .participants
                .iter()
                .flat_map(|a| a.items.iter())
                .flat_map(|i| i.pairs.iter().map(move |p| (i.task.clone(), i.aspect, *p)))
                .collect();
            assert_eq!(triples.len(), 108, "n = {n}");
        }
    }

    #[test]
    fn table_rows_follow_latin_square() {
        let plan = plan_study_with(3, 0, TaskSets::Only(1)).unwrap();
        let of = |a: &Assignment, task: &str| a.items.iter().find(|i| i.task == task).unwrap().aspect;
        let exposure: Vec<_> = plan.participants.iter().map(|a| of(a, "image_adjust_exposure")).collect();
        assert_eq!(exposure, [Aspect::Predictability, Aspect::Efficiency, Aspect::Explorability]);
        assert_eq!(of(&plan.participants[0], "design_align_text"), Aspect::Explorability);
    }

    #[test]
    fn plan_is_seeded() {
        assert_eq!(plan_study(10, 4).unwrap(), plan_study(10, 4).unwrap());
        assert_ne!(plan_study(10, 4).unwrap(), plan_study(10, 5).unwrap());
        let plan = plan_study(12, 4).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<StudyPlan>(&json).unwrap(), plan);
    }

    #[test]
    fn chi_squared_examples() {
        let r = chi_squared(39, 39).unwrap();
        assert_eq!((r.statistic, r.p, r.stars), (0.0, 1.0, 0));
        let r = chi_squared(48, 30).unwrap();
        assert_eq!(r.statistic, 324.0 / 78.0);
        assert!(r.p < 0.05 && r.p >= 0.01);
        assert_eq!(r.stars, 1);
        let r = chi_squared(60, 18).unwrap();
        assert_eq!(r.statistic, 1764.0 / 78.0);
        assert_eq!(r.stars, 3);
        assert!(matches!(chi_squared(0, 0), Err(StudyError::NoObservations)));
    }

    #[test]
    fn critical_values() {
        for (stat, p) in [(3.841, 0.05), (6.635, 0.01), (10.828, 0.001)] {
            assert!((chi2_sf(stat, 1.0) - p).abs() < 5e-4, "{stat}");
        }
    }

    #[test]
    fn matches_reference_distribution() {
        for df in [1.0, 2.0, 3.0, 7.0] {
            let oracle = ChiSquared::new(df).unwrap();
            for i in 0..=500 {
                let x = f64::from(i) / 10.0;
                let (got, want) = (chi2_sf(x, df), oracle.sf(x));
                let tol = 1e-8 * want.abs().max(1e-300);
                assert!((got - want).abs() <= tol.max(1e-15), "df {df} x {x}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn chi_squared_symmetric(a in 0u64..500, b in 0u64..500) {
            prop_assume!(a + b > 0);
            let (x, y) = (chi_squared(a, b).unwrap(), chi_squared(b, a).unwrap());
            prop_assert_eq!(x.statistic, y.statistic);
            prop_assert_eq!(x.statistic == 0.0, a == b);
        }

        #[test]
        fn p_decreases_with_imbalance(n in 2u64..400, d in 0u64..200) {
            let a = (n / 2 + d).min(n);
            let less = chi_squared(a, n - a).unwrap();
            let more = chi_squared((a + 1).min(n), n - (a + 1).min(n)).unwrap();
            prop_assert!(more.p <= less.p);
        }
    }

    fn record(task: &str, aspect: Aspect, pair: ComparisonPair, selection: Side) -> ComparisonRecord {
        ComparisonRecord {
            participant_id: "P001".into(),
            task_name: task.into(),
            aspect,
            pair,
            selection,
            free_text_reason: None,
        }
    }

    #[test]
    fn unanimous_twenty_is_three_stars() {
        let pair = enumerate_pairs()[5];
        let recs: Vec<_> = (0..20)
            .map(|i| record(TASK_SETS[i % 2][i % 3], Aspect::ALL[i % 3], pair, Side::Left))
            .collect();
        let rows = analyze(&recs, Grouping::AspectPair).unwrap();
        let total: u64 = rows.iter().map(|r| r.count_left).sum();
        assert_eq!(total, 20);
        let pooled: Vec<_> = recs.iter().map(|r| ComparisonRecord { aspect: Aspect::Efficiency, ..r.clone() }).collect();
        let rows = analyze(&pooled, Grouping::AspectPair).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].count_left, rows[0].count_right, rows[0].chi2, rows[0].stars), (20, 0, 20.0, 3));
    }

    #[test]
    fn single_record_is_underpowered() {
        let rows = analyze(
            &[record("image_adjust_tint", Aspect::Efficiency, enumerate_pairs()[0], Side::Left)],
            Grouping::TaskAspectPair,
        )
        .unwrap();
        assert_eq!((rows[0].count_left, rows[0].count_right, rows[0].chi2, rows[0].stars), (1, 0, 1.0, 0));
        assert_eq!(rows[0].task.as_deref(), Some("image_adjust_tint"));
        assert!(matches!(analyze(&[], Grouping::AspectPair), Err(StudyError::EmptyRecords)));
    }

    #[test]
    fn groupings_cover_every_pair_present() {
        let plan = plan_study(12, 1).unwrap();
        let recs = simulate_raters(&plan, &RaterModel::uniform(0.6, 2)).unwrap();
        for g in [Grouping::TaskAspectPair, Grouping::AspectPair] {
            let rows = analyze(&recs, g).unwrap();
            let pairs: BTreeSet<_> = rows.iter().map(AnalysisRow::pair).collect();
            assert_eq!(pairs.len(), 6);
            let n: u64 = rows.iter().map(|r| r.count_left + r.count_right).sum();
            assert_eq!(n as usize, recs.len());
        }
        assert_eq!(analyze(&recs, Grouping::AspectPair).unwrap().len(), 18);
        assert_eq!(analyze(&recs, Grouping::TaskAspectPair).unwrap().len(), 108);
    }

    #[test]
    fn csv_layout() {
        let pair = enumerate_pairs()[5];
        let rows = analyze(&[record("design_align_text", Aspect::Efficiency, pair, Side::Left)], Grouping::TaskAspectPair).unwrap();
        let csv = analysis_csv(&rows, Grouping::TaskAspectPair);
        let (head, row) = csv.trim_end().split_once('\n').unwrap();
        assert_eq!(head, "task,aspect,left,right,count_left,count_right,chi2,p,stars");
        let cols: Vec<_> = row.split(',').collect();
        assert_eq!(cols[..7], ["design_align_text", "efficiency", "withlib30", "withoutlib", "1", "0", "1"]);
        assert!((cols[7].parse::<f64>().unwrap() - 0.317_310_507_862_914).abs() < 1e-12);
        assert_eq!(cols[8], "0");
    }

    #[test]
    fn certain_raters_pick_library_side() {
        let plan = plan_study(8, 0).unwrap();
        let recs = simulate_raters(&plan, &RaterModel::uniform(1.0, 7)).unwrap();
        assert_eq!(recs.len(), 8 * 18);
        assert!(recs.iter().all(|r| r.selection == r.pair.library_side()));
        for r in &recs {
            plan.validate_record(r).unwrap();
        }
    }

    #[test]
    fn simulation_is_seeded() {
        let plan = plan_study(10, 0).unwrap();
        let a = simulate_raters(&plan, &RaterModel::uniform(0.5, 3)).unwrap();
        assert_eq!(a, simulate_raters(&plan, &RaterModel::uniform(0.5, 3)).unwrap());
        assert_ne!(a, simulate_raters(&plan, &RaterModel::uniform(0.5, 4)).unwrap());
    }

    #[test]
    fn strong_effect_is_significant() {
        let plan = plan_study(78, 42).unwrap();
        let recs = simulate_raters(&plan, &RaterModel::uniform(0.8, 42)).unwrap();
        let rows = analyze(&recs, Grouping::AspectPair).unwrap();
        let target = enumerate_pairs()[5];
        let hits: Vec<_> = rows.iter().filter(|r| r.pair() == target).collect();
        assert_eq!(hits.len(), 3);
        for r in hits {
            assert_eq!(r.count_left + r.count_right, 78);
            assert_eq!(r.stars, 3, "{r:?}");
        }
    }

    #[test]
    fn per_pair_override() {
        let mut model = RaterModel::uniform(1.0, 0);
        model.per_pair.insert("withlib10_vs_withlib25".into(), 0.0);
        let plan = plan_study(2, 0).unwrap();
        for r in simulate_raters(&plan, &model).unwrap() {
            let lib = r.selection == r.pair.library_side();
            assert_eq!(lib, r.pair.index() != 0);
        }
        model.per_pair.insert("withlib25_vs_withlib10".into(), 0.5);
        assert!(matches!(model.validate(), Err(StudyError::InvalidModel(_))));
        assert!(RaterModel::uniform(1.5, 0).validate().is_err());
    }

    #[test]
    fn records_outside_plan_rejected() {
        let plan = plan_study(2, 0).unwrap();
        let a = &plan.participants[0];
        let item = &a.items[0];
        let mut rec = record(&item.task, item.aspect, item.pairs[0], Side::Right);
        plan.validate_record(&rec).unwrap();
        rec.aspect = Aspect::ALL.into_iter().find(|x| *x != item.aspect).unwrap();
        assert!(matches!(plan.validate_record(&rec), Err(StudyError::OutsidePlan { .. })));
        rec.participant_id = "P999".into();
        assert!(plan.validate_record(&rec).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let plan = plan_study(3, 0).unwrap();
        let mut recs = simulate_raters(&plan, &RaterModel::uniform(0.7, 1)).unwrap();
        recs[0].free_text_reason = Some("clearer labels".into());
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), recs.len());
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
        let bad = b"\n{\"participant_id\":\"P1\"}\n";
        assert!(matches!(read_records(&bad[..]), Err(StudyError::Record { line: 2, .. })));
    }

    #[test]
    fn grouping_names() {
        assert_eq!("aspect-pair".parse::<Grouping>().unwrap(), Grouping::AspectPair);
        assert_eq!("task_aspect_pair".parse::<Grouping>().unwrap(), Grouping::TaskAspectPair);
        assert!("pair".parse::<Grouping>().is_err());
    }
}
