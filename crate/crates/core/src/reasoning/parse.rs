//! Extraction of reasoned widgets from free-form model replies.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde_json::{Map, Value};

use super::{ReasonedWidget, ReasonedWidgetSet};
use crate::catalog::parse_widget_name;
use crate::error::ParseError;
use crate::task::Aspect;

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"```[A-Za-z]*").unwrap());
// a value ending a line followed by a key on the next: the template omits commas there
static MISSING_COMMA: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"("|\}|\]|\d|true|false|null)([ \t]*\r?\n\s*)(")"#).unwrap());
static TRAILING_COMMA: LazyLock<Regex> = LazyLock::new(|| Regex::new(r",(\s*[}\]])").unwrap());
static TASK_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[a-z][a-z0-9]*(?:_[a-z0-9]+)+\b").unwrap());

/// Objects in `text` that parse as JSON, earliest start first.
fn json_objects(text: &str) -> Vec<Map<String, Value>> {
    let mut out = Vec::new();
    let mut skip_to = 0;
    for (i, _) in text.char_indices().filter(|(_, c)| *c == '{') {
        if i < skip_to {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(m))) = stream.next() {
            skip_to = i + stream.byte_offset();
            out.push(m);
        }
    }
    out
}

fn find_key<'a>(m: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    if let Some(v) = m.get(key) {
        return Some(v);
    }
    m.values().filter_map(Value::as_object).find_map(|inner| find_key(inner, key))
}

fn outermost_with_widget(text: &str) -> Option<Map<String, Value>> {
    json_objects(text).into_iter().find(|m| find_key(m, "widget").is_some())
}

fn repair(raw: &str) -> String {
    let s = FENCE.replace_all(raw, "");
    let s = MISSING_COMMA.replace_all(&s, "$1,$2$3");
    TRAILING_COMMA.replace_all(&s, "$1").into_owned()
}

/// Parses a reply that follows the response template, tolerating code fences
/// and missing commas.
pub fn parse_reasoning_response(raw: &str, requested: &BTreeSet<Aspect>) -> Result<ReasonedWidgetSet, ParseError> {
    let doc = outermost_with_widget(raw)
        .or_else(|| outermost_with_widget(&repair(raw)))
        .ok_or(ParseError::NoDocument)?;
    let widget = find_key(&doc, "widget").expect("selected for its widget key");
    let widget = widget
        .as_object()
        .ok_or_else(|| ParseError::Malformed("\"widget\" is not an object".into()))?;

    // {task: {aspect: widget}} or a flat {aspect: widget}
    let (task_name, choices) = if widget.values().all(Value::is_string) {
        (String::new(), widget)
    } else {
        widget
            .iter()
            .find_map(|(k, v)| v.as_object().map(|o| (k.clone(), o)))
            .ok_or_else(|| ParseError::Malformed("\"widget\" has no task entry".into()))?
    };

    let reasoning = find_key(&doc, "reasoning").and_then(Value::as_object);
    let mut per_aspect = BTreeMap::new();
    for &aspect in requested {
        let value = choices
            .iter()
            .find(|(k, _)| k.trim().eq_ignore_ascii_case(aspect.as_str()))
            .map(|(_, v)| v)
            .ok_or(ParseError::MissingAspect(aspect))?;
        let name = value
            .as_str()
            .ok_or_else(|| ParseError::Malformed(format!("{} widget is not a string", aspect.as_str())))?;
        let widget = parse_widget_name(name).map_err(|_| ParseError::UnknownWidget(name.to_string()))?;
        let rationale = reasoning
            .and_then(|r| r.get(&format!("{}_reasoning", aspect.as_str())))
            .map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Object(m) => m
                    .iter()
                    .find(|(k, _)| parse_widget_name(k).ok() == Some(widget))
                    .or_else(|| m.iter().next())
                    .and_then(|(_, v)| v.as_str())
                    .unwrap_or_default()
                    .to_string(),
                _ => String::new(),
            })
            .unwrap_or_default();
        per_aspect.insert(aspect, ReasonedWidget { widget, rationale });
    }

    let mut relevant_tasks: Vec<String> = Vec::new();
    if let Some(text) = reasoning
        .and_then(|r| r.get("relevant tasks from the library"))
        .and_then(Value::as_str)
    {
        for m in TASK_NAME.find_iter(text) {
            if !relevant_tasks.iter().any(|t| t == m.as_str()) {
                relevant_tasks.push(m.as_str().to_string());
            }
        }
    }
    Ok(ReasonedWidgetSet {
        task_name,
        per_aspect,
        relevant_tasks,
    })
}
