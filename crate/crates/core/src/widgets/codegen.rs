//! Widget code text: the LLM codegen prompt and a deterministic notebook emitter.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::{json, Value};

use super::{Plane, Range, WidgetSpec};
use crate::catalog::WidgetKind;
use crate::error::GenerateError;
use crate::reasoning::PromptBundle;

/// Shipped example code covering every widget kind.
pub const EXAMPLE_CODE: &str = include_str!("../../assets/example_widgets.py");

/// Templates `emit_widget_code` knows.
pub const TEMPLATES: [&str; 1] = ["notebook"];

const STANZA_MARK: &str = "# --- widget: ";

const CODEGEN_SYSTEM: &str = "Generate code for the UI widgets to perform the specified task. You should follow the steps below for the coding.

First, the UI widget code you provide must allow users to perform the task specified in the content of User task.

Second, the UI widget code you provide must follow the examples offered below for the implementation of Slider, Dropdown, Radio Buttons, Text Field, Preset Buttons, Color Wheel, Color Picker, Click on Image.
    - The UI widget types are in widget_type.
    - Find the example code for the relevant UI widget types.
    - When coding, you must only change the task to the specified task, implement the specified widgets, and keep the remaining code format the same as the example code.

Third, write your response in JSON format following the example responses below. 
";

/// Codegen prompt for the given specs. All specs should share a task; the
/// first one names it.
pub fn build_codegen_prompt(specs: &[WidgetSpec], example_code: &str) -> Result<PromptBundle, GenerateError> {
    if example_code.trim().is_empty() {
        return Err(GenerateError::EmptyExampleCode);
    }
    let first = specs.first().ok_or(GenerateError::NoSpecs)?;
    let mut kinds: Vec<&str> = Vec::new();
    for s in specs {
        if !kinds.contains(&s.kind.display_name()) {
            kinds.push(s.kind.display_name());
        }
    }
    let widget_type = kinds.join(", ");
    let system = format!(
        "{CODEGEN_SYSTEM}{{\n    \"task\": \"{task}\",\n    \n    \"widget_type\": \"{widget_type}\",\n\n    \"widget_code\": {{```python\n{code}\n```}}\n}}\n",
        task = first.task,
        code = example_code.trim_end(),
    );
    let task_json = json!({ "task": first.task, "widget_type": widget_type });
    let user = format!(
        "User task:\n{}\n",
        serde_json::to_string_pretty(&task_json).expect("json")
    );
    Ok(PromptBundle {
        system,
        user,
        library_json: None,
        candidates_json: serde_json::to_string(&kinds).expect("json"),
        task_description: first.task.clone(),
    })
}

fn var(spec: &WidgetSpec) -> String {
    format!("w_{}", spec.id.replace(['.', '-'], "_"))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn py_value(v: &Value) -> String {
    match v {
        Value::Number(n) => num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => format!("({})", a.iter().map(py_value).collect::<Vec<_>>().join(", ")),
        Value::String(s) => py_str(s),
        other => other.to_string(),
    }
}

fn py_str(s: &str) -> String {
    serde_json::to_string(s).expect("json")
}

fn stanza(spec: &WidgetSpec) -> String {
    let v = var(spec);
    let b = &spec.binding;
    let label = py_str(&spec.label);
    let param = py_str(&b.param);
    let mut s = format!("{STANZA_MARK}{} kind={}\n", spec.id, spec.kind.as_str());
    s += &format!("op_{v} = {}\n", serde_json::to_string(&b.op).expect("json"));
    match spec.kind {
        WidgetKind::Slider | WidgetKind::TextField => {
            let r = b.range.expect("validated");
            let ctor = if spec.kind == WidgetKind::Slider { "FloatSlider" } else { "BoundedFloatText" };
            let value = if (r.min..=r.max).contains(&0.0) { 0.0 } else { r.min };
            s += &format!(
                "{v} = widgets.{ctor}(value={}, min={}, max={}, step={}, description={label})\n",
                num(value),
                num(r.min),
                num(r.max),
                num(r.step)
            );
            s += &format!("{v}.observe(lambda change: apply_op(op_{v}, {param}, change[\"new\"]), names=\"value\")\n");
        }
        WidgetKind::Dropdown | WidgetKind::RadioButtons => {
            let opts = b.options.as_deref().unwrap_or_default();
            let ctor = if spec.kind == WidgetKind::Dropdown { "Dropdown" } else { "RadioButtons" };
            let list = opts.iter().map(py_value).collect::<Vec<_>>().join(", ");
            s += &format!("{v} = widgets.{ctor}(options=[{list}], description={label})\n");
            s += &format!("{v}.observe(lambda change: apply_op(op_{v}, {param}, change[\"new\"]), names=\"value\")\n");
        }
        WidgetKind::PresetButtons => {
            let presets = b.presets.as_deref().unwrap_or_default();
            s += &format!("presets_{v} = [\n");
            for p in presets {
                let colour = match &p.preview {
                    super::Preview::Swatch { hex, .. } => py_str(hex),
                    super::Preview::Marker { .. } => "None".to_string(),
                };
                s += &format!("    ({}, {}, {colour}),\n", py_value(&p.value), py_str(&p.label));
            }
            s += "]\n";
            s += &format!(
                "{v} = widgets.HBox([preset_button(op_{v}, {param}, value, name, colour) for value, name, colour in presets_{v}])\n"
            );
        }
        WidgetKind::ColorPicker => {
            s += &format!("{v} = widgets.ColorPicker(value=\"#ff0000\", description={label})\n");
            s += &format!("{v}.observe(lambda change: apply_op(op_{v}, {param}, hex_hue(change[\"new\"])), names=\"value\")\n");
        }
        WidgetKind::ColorWheel => {
            s += &format!("{v} = hue_wheel(description={label})\n");
            s += &format!("{v}.observe(lambda change: apply_op(op_{v}, {param}, change[\"new\"]), names=\"value\")\n");
        }
        WidgetKind::ClickOnImage => {
            let p = b.plane.expect("validated");
            s += &format!(
                "{v} = click_plane(x=({}, {}), y=({}, {}), description={label})\n",
                num(p.x.0),
                num(p.x.1),
                num(p.y.0),
                num(p.y.1)
            );
            s += &format!("{v}.on_click(lambda x, y: apply_op(op_{v}, {param}, (x, y)))\n");
        }
    }
    s += &format!("controls.append({v})\n");
    s
}

const NOTEBOOK_HEADER: &str = "import ipywidgets as widgets
from IPython.display import display
from crowdgen_notebook import apply_op, click_plane, hex_hue, hue_wheel, preset_button

controls = []

";

const NOTEBOOK_FOOTER: &str = "
display(widgets.VBox(controls))
";

/// Renders specs through a named template.
pub fn emit_widget_code(specs: &[WidgetSpec], template: &str) -> Result<String, GenerateError> {
    if !TEMPLATES.contains(&template) {
        return Err(GenerateError::UnknownTemplate(template.to_string()));
    }
    let mut out = String::from(NOTEBOOK_HEADER);
    for spec in specs {
        super::validate_spec(spec)?;
        out += &stanza(spec);
        out.push('\n');
    }
    out += NOTEBOOK_FOOTER;
    Ok(out)
}

/// What the structural checker recovers from one emitted stanza.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedWidget {
    pub id: String,
    pub kind: WidgetKind,
    pub op: Value,
    pub param: String,
    pub range: Option<Range>,
    pub options: Option<Vec<Value>>,
    pub preset_values: Option<Vec<Value>>,
    pub preset_labels: Option<Vec<String>>,
    pub plane: Option<Plane>,
    pub color: bool,
}

impl ExtractedWidget {
    /// True when the stanza carries the spec's kind and binding values.
    pub fn matches(&self, spec: &WidgetSpec) -> bool {
        let b = &spec.binding;
        let presets = b.presets.as_ref();
        self.id == spec.id
            && self.kind == spec.kind
            && serde_json::to_value(&b.op).ok().as_ref() == Some(&self.op)
            && self.param == b.param
            && self.range == b.range
            && self.options == b.options
            && self.preset_values == presets.map(|p| p.iter().map(|x| x.value.clone()).collect())
            && self.preset_labels == presets.map(|p| p.iter().map(|x| x.label.clone()).collect())
            && self.plane == b.plane
            && self.color == b.color.is_some()
    }
}

static HEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^# --- widget: (\S+) kind=(\S+)$").unwrap());
static OP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^op_\w+ = (\{.*\})$").unwrap());
static RANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"widgets\.(?:FloatSlider|BoundedFloatText)\(value=\S+, min=([^,]+), max=([^,]+), step=([^,]+),").unwrap()
});
static OPTIONS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"widgets\.(?:Dropdown|RadioButtons)\(options=\[(.*)\], description=").unwrap());
static PRESET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"^    \((.*), ("(?:[^"\\]|\\.)*"), (?:"[^"]*"|None)\),$"#).unwrap());
static PLANE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"click_plane\(x=\(([^,]+), ([^)]+)\), y=\(([^,]+), ([^)]+)\),").unwrap());
static PARAM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"apply_op\(op_\w+, ("[^"]*"),"#).unwrap());
static PRESET_PARAM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"preset_button\(op_\w+, ("[^"]*"),"#).unwrap());

fn parse_f64(s: &str) -> Result<f64, GenerateError> {
    s.trim().parse::<f64>().map_err(|_| GenerateError::Extract(format!("not a number: {s:?}")))
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Splits a Python list body into values; tuples become arrays.
fn parse_values(body: &str) -> Result<Vec<Value>, GenerateError> {
    let body = body.trim();
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = body;
    while !rest.is_empty() {
        if let Some(tail) = rest.strip_prefix('(') {
            let end = tail.find(')').ok_or_else(|| GenerateError::Extract("unclosed tuple".into()))?;
            let items = tail[..end].split(',').map(|x| parse_f64(x).map(number)).collect::<Result<_, _>>()?;
            out.push(Value::Array(items));
            rest = tail[end + 1..].trim_start_matches([',', ' ']);
        } else {
            let end = rest.find(',').unwrap_or(rest.len());
            out.push(number(parse_f64(&rest[..end])?));
            rest = rest[end..].trim_start_matches([',', ' ']);
        }
    }
    Ok(out)
}

fn unquote(s: &str) -> Result<String, GenerateError> {
    serde_json::from_str(s).map_err(|e| GenerateError::Extract(e.to_string()))
}

/// Reads emitted notebook text back into per-stanza kinds and binding values.
pub fn extract_widget_code(text: &str) -> Result<Vec<ExtractedWidget>, GenerateError> {
    let mut out: Vec<ExtractedWidget> = Vec::new();
    let mut in_presets = false;
    for line in text.lines() {
        if let Some(c) = HEAD.captures(line) {
            let kind = crate::catalog::parse_widget_name(&c[2]).map_err(|e| GenerateError::Extract(e.to_string()))?;
            out.push(ExtractedWidget {
                id: c[1].to_string(),
                kind,
                op: Value::Null,
                param: String::new(),
                range: None,
                options: None,
                preset_values: None,
                preset_labels: None,
                plane: None,
                color: matches!(kind, WidgetKind::ColorPicker | WidgetKind::ColorWheel),
            });
            in_presets = false;
            continue;
        }
        let Some(w) = out.last_mut() else { continue };
        if let Some(c) = OP.captures(line) {
            w.op = serde_json::from_str(&c[1]).map_err(|e| GenerateError::Extract(e.to_string()))?;
        } else if let Some(c) = RANGE.captures(line) {
            w.range = Some(Range {
                min: parse_f64(&c[1])?,
                max: parse_f64(&c[2])?,
                step: parse_f64(&c[3])?,
            });
        } else if let Some(c) = OPTIONS.captures(line) {
            w.options = Some(parse_values(&c[1])?);
        } else if let Some(c) = PLANE.captures(line) {
            w.plane = Some(Plane {
                x: (parse_f64(&c[1])?, parse_f64(&c[2])?),
                y: (parse_f64(&c[3])?, parse_f64(&c[4])?),
            });
        } else if line.starts_with("presets_") && line.ends_with("= [") {
            in_presets = true;
            w.preset_values = Some(Vec::new());
            w.preset_labels = Some(Vec::new());
        } else if in_presets && line == "]" {
            in_presets = false;
        } else if in_presets {
            let c = PRESET.captures(line).ok_or_else(|| GenerateError::Extract(format!("bad preset line {line:?}")))?;
            let mut value = parse_values(&c[1])?;
            if value.len() != 1 {
                return Err(GenerateError::Extract(format!("bad preset value {:?}", &c[1])));
            }
            w.preset_values.as_mut().expect("opened").push(value.remove(0));
            w.preset_labels.as_mut().expect("opened").push(unquote(&c[2])?);
        }
        if let Some(c) = PARAM.captures(line).or_else(|| PRESET_PARAM.captures(line)) {
            w.param = unquote(&c[1])?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::widgets::{binding_table, generate_unscored_spec};

    fn all_specs() -> Vec<WidgetSpec> {
        binding_table()
            .into_iter()
            .flat_map(|(task, _)| WidgetKind::ALL.into_iter().filter_map(move |k| generate_unscored_spec(task, k).ok()))
            .collect()
    }

    #[test]
    fn hue_slider_values_in_text() {
        let s = generate_unscored_spec("image_adjust_hue", WidgetKind::Slider).unwrap();
        let text = emit_widget_code(&[s], "notebook").unwrap();
        for v in ["min=0.0", "max=1.0", "step=0.01"] {
            assert!(text.contains(v), "{v}");
        }
    }

    #[test]
    fn round_trip_every_spec() {
        let specs = all_specs();
        let text = emit_widget_code(&specs, "notebook").unwrap();
        let got = extract_widget_code(&text).unwrap();
        assert_eq!(got.len(), specs.len());
        for (g, s) in got.iter().zip(&specs) {
            assert!(g.matches(s), "{g:?}\n{s:?}");
        }
    }

    #[test]
    fn empty_and_unknown() {
        let text = emit_widget_code(&[], "notebook").unwrap();
        assert_eq!(text, format!("{NOTEBOOK_HEADER}{NOTEBOOK_FOOTER}"));
        assert!(extract_widget_code(&text).unwrap().is_empty());
        assert!(matches!(emit_widget_code(&[], "react"), Err(GenerateError::UnknownTemplate(_))));
    }

    #[test]
    fn codegen_prompt() {
        let specs = [
            generate_unscored_spec("image_adjust_hue", WidgetKind::Slider).unwrap(),
            generate_unscored_spec("image_adjust_hue", WidgetKind::ColorWheel).unwrap(),
        ];
        let p = build_codegen_prompt(&specs, EXAMPLE_CODE).unwrap();
        assert!(p.system.contains("\"widget_type\": \"Slider, Color Wheel\""));
        assert!(p.system.contains("\"widget_code\""));
        assert!(p.system.contains(EXAMPLE_CODE.trim_end()));
        assert!(p.user.contains("image_adjust_hue"));
        assert_eq!(p, build_codegen_prompt(&specs, EXAMPLE_CODE).unwrap());
        assert!(matches!(build_codegen_prompt(&specs, "  \n"), Err(GenerateError::EmptyExampleCode)));
        assert!(matches!(build_codegen_prompt(&[], EXAMPLE_CODE), Err(GenerateError::NoSpecs)));
    }

    #[test]
    fn example_code_covers_every_kind() {
        for k in WidgetKind::ALL {
            assert!(EXAMPLE_CODE.contains(&format!("# {}", k.display_name())), "{k:?}");
        }
    }

    #[test]
    fn tampered_value_detected() {
        let s = generate_unscored_spec("image_adjust_hue", WidgetKind::Slider).unwrap();
        let text = emit_widget_code(std::slice::from_ref(&s), "notebook").unwrap().replace("step=0.01", "step=0.02");
        assert!(!extract_widget_code(&text).unwrap()[0].matches(&s));
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_numbers_round_trip(a in -1e6f64..1e6, b in -1e6f64..1e6, step in 1e-9f64..10.0,
                                        opts in proptest::collection::vec(-1e3f64..1e3, 1..8)) {
            let mut slider = generate_unscored_spec("image_adjust_exposure", WidgetKind::Slider).unwrap();
            slider.binding.range = Some(Range { min: a.min(b), max: a.max(b), step });
            let mut drop = generate_unscored_spec("image_adjust_tint", WidgetKind::Dropdown).unwrap();
            drop.binding.options = Some(opts.iter().map(|v| number(*v)).collect());
            let specs = [slider, drop];
            let got = extract_widget_code(&emit_widget_code(&specs, "notebook").unwrap()).unwrap();
            proptest::prop_assert!(got[0].matches(&specs[0]));
            proptest::prop_assert!(got[1].matches(&specs[1]));
        }
    }
}
