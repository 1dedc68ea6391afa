//! The crowdsourced widget-preference library: loading, validation,
//! seeded subsetting and per-aspect frequency aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::catalog::{parse_widget_name, CapabilityTag, CategoryTag, WidgetKind};
use crate::error::{LibraryError, Violation, ViolationKind};
use crate::task::Aspect;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceResponse {
    pub rater_id: String,
    pub widget: WidgetKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub name: String,
    pub description: String,
    pub tags: BTreeSet<CategoryTag>,
    pub responses: BTreeMap<Aspect, Vec<PreferenceResponse>>,
}

impl TaskRecord {
    pub fn responses_for(&self, aspect: Aspect) -> Option<&[PreferenceResponse]> {
        self.responses.get(&aspect).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceLibrary {
    pub version: String,
    pub tasks: Vec<TaskRecord>,
}

/// How much of the library the reasoner sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LibraryMode {
    /// `n` responses per (task, aspect).
    WithLib(usize),
    WithoutLib,
}

impl LibraryMode {
    pub const CANONICAL: [LibraryMode; 4] = [
        LibraryMode::WithLib(10),
        LibraryMode::WithLib(25),
        LibraryMode::WithLib(30),
        LibraryMode::WithoutLib,
    ];

    /// Responses per aspect; withoutlib counts as zero.
    pub fn size(self) -> usize {
        match self {
            LibraryMode::WithLib(n) => n,
            LibraryMode::WithoutLib => 0,
        }
    }
}

impl fmt::Display for LibraryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LibraryMode::WithLib(n) => write!(f, "withlib{n}"),
            LibraryMode::WithoutLib => f.write_str("withoutlib"),
        }
    }
}

impl FromStr for LibraryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ':' | '_' | '-' | ' '))
            .collect();
        if norm == "withoutlib" {
            return Ok(LibraryMode::WithoutLib);
        }
        match norm.strip_prefix("withlib").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(LibraryMode::WithLib(n)),
            _ => Err(format!("invalid library mode {s:?}; expected withlib<N> or withoutlib")),
        }
    }
}

impl Serialize for LibraryMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LibraryMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    pub counts: BTreeMap<WidgetKind, usize>,
    pub total: usize,
}

impl FrequencyTable {
    pub fn from_responses(responses: &[PreferenceResponse]) -> Self {
        let mut counts = BTreeMap::new();
        for r in responses {
            *counts.entry(r.widget).or_insert(0) += 1;
        }
        FrequencyTable {
            counts,
            total: responses.len(),
        }
    }

    pub fn count(&self, kind: WidgetKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn share(&self, kind: WidgetKind) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(kind) as f64 / self.total as f64
        }
    }

    /// Widgets by count descending, then catalog order.
    pub fn ranked(&self) -> Vec<(WidgetKind, usize)> {
        let mut v: Vec<_> = self.counts.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn argmax(&self) -> Option<WidgetKind> {
        self.ranked().first().map(|(k, _)| *k)
    }
}

impl PreferenceLibrary {
    /// The library used in withoutlib mode.
    pub fn empty() -> Self {
        PreferenceLibrary {
            version: "empty".to_string(),
            tasks: Vec::new(),
        }
    }

    pub fn task(&self, name: &str) -> Option<&TaskRecord> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn total_responses(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| t.responses.values())
            .map(Vec::len)
            .sum()
    }

    /// Smallest response list over all (task, aspect) pairs present.
    pub fn min_responses_per_aspect(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| t.responses.values())
            .map(Vec::len)
            .min()
            .unwrap_or(0)
    }

    /// Library file JSON (pretty, stable key order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }

    /// Validates a parsed document, reporting every violation found.
    pub fn from_value(doc: &Value) -> Result<Self, LibraryError> {
        let mut v = Validator::default();
        let lib = v.library(doc);
        match lib {
            Some(lib) if v.violations.is_empty() => Ok(lib),
            _ => Err(LibraryError::Invalid(v.violations)),
        }
    }

    /// Appends one crowdsourced response, re-checking the list invariants.
    pub fn append_response(
        &mut self,
        task: &str,
        aspect: Aspect,
        response: PreferenceResponse,
    ) -> Result<usize, LibraryError> {
        let Some(idx) = self.tasks.iter().position(|t| t.name == task) else {
            return Err(LibraryError::UnknownTask(task.to_string()));
        };
        let list = self.tasks[idx].responses.entry(aspect).or_default();
        let path = format!("tasks[{idx}].responses.{aspect}[{}]", list.len());
        if response.rater_id.trim().is_empty() {
            return Err(LibraryError::Invalid(vec![Violation {
                path: format!("{path}.rater_id"),
                kind: ViolationKind::Empty,
            }]));
        }
        if response.reason.trim().is_empty() {
            return Err(LibraryError::Invalid(vec![Violation {
                path: format!("{path}.reason"),
                kind: ViolationKind::Empty,
            }]));
        }
        if list.iter().any(|r| r.rater_id == response.rater_id) {
            return Err(LibraryError::Invalid(vec![Violation {
                path: format!("{path}.rater_id"),
                kind: ViolationKind::Duplicate(response.rater_id),
            }]));
        }
        list.push(response);
        Ok(list.len())
    }
}

pub fn load_library(mut source: impl Read) -> Result<PreferenceLibrary, LibraryError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| LibraryError::Parse(serde_json::Error::io(e)))?;
    load_library_str(&text)
}

pub fn load_library_str(text: &str) -> Result<PreferenceLibrary, LibraryError> {
    let doc: Value = serde_json::from_str(text)?;
    PreferenceLibrary::from_value(&doc)
}

#[derive(Default)]
struct Validator {
    violations: Vec<Violation>,
}

impl Validator {
    fn push(&mut self, path: impl Into<String>, kind: ViolationKind) {
        self.violations.push(Violation {
            path: path.into(),
            kind,
        });
    }

    fn string(&mut self, obj: &Map<String, Value>, key: &str, path: &str) -> Option<String> {
        let p = join(path, key);
        match obj.get(key) {
            None => {
                self.push(p, ViolationKind::Missing);
                None
            }
            Some(Value::String(s)) if s.trim().is_empty() => {
                self.push(p, ViolationKind::Empty);
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.push(p, ViolationKind::WrongType("string"));
                None
            }
        }
    }

    fn library(&mut self, doc: &Value) -> Option<PreferenceLibrary> {
        let Some(root) = doc.as_object() else {
            self.push("$", ViolationKind::WrongType("object"));
            return None;
        };
        let version = self.string(root, "version", "");
        let tasks = match root.get("tasks") {
            None => {
                self.push("tasks", ViolationKind::Missing);
                None
            }
            Some(Value::Array(a)) if a.is_empty() => {
                self.push("tasks", ViolationKind::Empty);
                None
            }
            Some(Value::Array(a)) => {
                let mut seen = HashMap::new();
                let mut out = Vec::with_capacity(a.len());
                for (i, t) in a.iter().enumerate() {
                    let path = format!("tasks[{i}]");
                    if let Some(rec) = self.task(t, &path) {
                        if seen.insert(rec.name.clone(), i).is_some() {
                            self.push(format!("{path}.name"), ViolationKind::Duplicate(rec.name.clone()));
                        }
                        out.push(rec);
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.push("tasks", ViolationKind::WrongType("array"));
                None
            }
        };
        Some(PreferenceLibrary {
            version: version?,
            tasks: tasks?,
        })
    }

    fn task(&mut self, t: &Value, path: &str) -> Option<TaskRecord> {
        let Some(obj) = t.as_object() else {
            self.push(path, ViolationKind::WrongType("object"));
            return None;
        };
        let name = self.string(obj, "name", path);
        if let Some(n) = &name {
            if !n.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                self.push(join(path, "name"), ViolationKind::InvalidName(n.clone()));
            }
        }
        let description = self.string(obj, "description", path);
        let tags = self.tags(obj.get("tags"), &join(path, "tags"));
        let responses = self.responses(obj.get("responses"), &join(path, "responses"));
        Some(TaskRecord {
            name: name?,
            description: description?,
            tags: tags?,
            responses: responses?,
        })
    }

    fn tags(&mut self, v: Option<&Value>, path: &str) -> Option<BTreeSet<CapabilityTag>> {
        let arr = match v {
            None => {
                self.push(path, ViolationKind::Missing);
                return None;
            }
            Some(Value::Array(a)) => a,
            Some(_) => {
                self.push(path, ViolationKind::WrongType("array"));
                return None;
            }
        };
        let mut out = BTreeSet::new();
        let mut ok = true;
        for (j, t) in arr.iter().enumerate() {
            let p = format!("{path}[{j}]");
            match t.as_str().map(str::parse::<CapabilityTag>) {
                Some(Ok(tag)) => {
                    out.insert(tag);
                }
                Some(Err(_)) => {
                    self.push(p, ViolationKind::UnknownTag(t.as_str().unwrap_or_default().to_string()));
                    ok = false;
                }
                None => {
                    self.push(p, ViolationKind::WrongType("string"));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn responses(
        &mut self,
        v: Option<&Value>,
        path: &str,
    ) -> Option<BTreeMap<Aspect, Vec<PreferenceResponse>>> {
        let obj = match v {
            None => {
                self.push(path, ViolationKind::Missing);
                return None;
            }
            Some(Value::Object(o)) => o,
            Some(_) => {
                self.push(path, ViolationKind::WrongType("object"));
                return None;
            }
        };
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (key, list) in obj {
            let p = join(path, key);
            let Ok(aspect) = key.parse::<Aspect>() else {
                self.push(p, ViolationKind::UnknownAspect(key.clone()));
                ok = false;
                continue;
            };
            let Some(items) = list.as_array() else {
                self.push(p, ViolationKind::WrongType("array"));
                ok = false;
                continue;
            };
            let mut raters = BTreeSet::new();
            let mut parsed = Vec::with_capacity(items.len());
            for (j, item) in items.iter().enumerate() {
                let ip = format!("{p}[{j}]");
                match self.response(item, &ip) {
                    Some(r) => {
                        if !raters.insert(r.rater_id.clone()) {
                            self.push(format!("{ip}.rater_id"), ViolationKind::Duplicate(r.rater_id.clone()));
                            ok = false;
                        }
                        parsed.push(r);
                    }
                    None => ok = false,
                }
            }
            out.insert(aspect, parsed);
        }
        ok.then_some(out)
    }

    fn response(&mut self, v: &Value, path: &str) -> Option<PreferenceResponse> {
        let Some(obj) = v.as_object() else {
            self.push(path, ViolationKind::WrongType("object"));
            return None;
        };
        let rater_id = self.string(obj, "rater_id", path);
        let widget = match obj.get("widget") {
            None => {
                self.push(join(path, "widget"), ViolationKind::Missing);
                None
            }
            Some(Value::String(s)) => match parse_widget_name(s) {
                Ok(k) => Some(k),
                Err(_) => {
                    self.push(join(path, "widget"), ViolationKind::UnknownWidget(s.clone()));
                    None
                }
            },
            Some(_) => {
                self.push(join(path, "widget"), ViolationKind::WrongType("string"));
                None
            }
        };
        let reason = self.string(obj, "reason", path);
        Some(PreferenceResponse {
            rater_id: rater_id?,
            widget: widget?,
            reason: reason?,
        })
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Keeps `n` responses per (task, aspect): the raters that come first in a
/// seeded shuffle of all rater ids. The same ordering serves every list, so
/// for a fixed seed smaller subsets nest inside larger ones.
pub fn subset_library(
    lib: &PreferenceLibrary,
    mode: LibraryMode,
    seed: u64,
) -> Result<PreferenceLibrary, LibraryError> {
    let n = match mode {
        LibraryMode::WithoutLib => return Err(LibraryError::SubsetWithoutLibrary),
        LibraryMode::WithLib(n) => n,
    };
    let available = lib.min_responses_per_aspect();
    if n == 0 || n > available {
        return Err(LibraryError::SubsetTooLarge {
            requested: n,
            available,
        });
    }
    let rank = rater_ranks(lib, seed);
    let mut out = lib.clone();
    for task in &mut out.tasks {
        for list in task.responses.values_mut() {
            let mut order: Vec<usize> = (0..list.len()).collect();
            order.sort_by_key(|&i| rank[list[i].rater_id.as_str()]);
            let keep: BTreeSet<usize> = order.into_iter().take(n).collect();
            let mut i = 0;
            list.retain(|_| {
                let k = keep.contains(&i);
                i += 1;
                k
            });
        }
    }
    Ok(out)
}

fn rater_ranks(lib: &PreferenceLibrary, seed: u64) -> HashMap<&str, usize> {
    let mut ids: Vec<&str> = lib
        .tasks
        .iter()
        .flat_map(|t| t.responses.values())
        .flatten()
        .map(|r| r.rater_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
}

pub fn aggregate_frequencies(task: &TaskRecord, aspect: Aspect) -> Result<FrequencyTable, LibraryError> {
    task.responses_for(aspect)
        .map(FrequencyTable::from_responses)
        .ok_or_else(|| LibraryError::MissingAspect {
            task: task.name.clone(),
            aspect,
        })
}

/// Prompt-facing view of the library: per task its description, per-aspect
/// widget frequencies (most chosen first) and the reasons given per widget.
pub fn serialize_for_prompt(lib: &PreferenceLibrary) -> String {
    serde_json::to_string_pretty(&prompt_document(lib)).expect("prompt document serializes")
}

pub fn prompt_document(lib: &PreferenceLibrary) -> Value {
    let tasks: Vec<Value> = lib
        .tasks
        .iter()
        .map(|t| {
            let mut freq = Map::new();
            let mut reasons = Map::new();
            for (aspect, list) in &t.responses {
                let table = FrequencyTable::from_responses(list);
                let mut f = Map::new();
                let mut r = Map::new();
                for (kind, count) in table.ranked() {
                    f.insert(kind.as_str().into(), count.into());
                    let texts: Vec<Value> = list
                        .iter()
                        .filter(|x| x.widget == kind)
                        .map(|x| Value::String(x.reason.clone()))
                        .collect();
                    r.insert(kind.as_str().into(), Value::Array(texts));
                }
                freq.insert(aspect.as_str().into(), Value::Object(f));
                reasons.insert(aspect.as_str().into(), Value::Object(r));
            }
            serde_json::json!({
                "name": t.name,
                "description": t.description,
                "widget_frequency": freq,
                "widget_reasons": reasons,
            })
        })
        .collect();
    serde_json::json!({ "version": lib.version, "tasks": tasks })
}
