//! Renderable widget specifications bound to image operations.

mod codegen;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use codegen::{
    build_codegen_prompt, emit_widget_code, extract_widget_code, ExtractedWidget, EXAMPLE_CODE, TEMPLATES,
};

use crate::aggregate::{normalize_scores_int, AggregatedRecommendation};
use crate::catalog::WidgetKind;
use crate::error::GenerateError;
use crate::library::PreferenceLibrary;
use crate::task::{relevance, TaskContext};
use crate::imaging::{
    apply, hex_to_hue, hsv_to_rgb, rgb_to_hsv, text_anchor_position, HueMode, ImageBuffer, Margin, OpKind,
    TonePreset,
};

/// Version of the WidgetSpec wire format.
pub const SPEC_VERSION: &str = "1";

/// Grey used to render preview swatches for scalar presets.
pub const SWATCH_BASE: [u8; 4] = [128, 128, 128, 255];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

/// Normalized click plane, `[0, 1]` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Plane {
    pub const UNIT: Plane = Plane { x: (0.0, 1.0), y: (0.0, 1.0) };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Preview {
    Swatch {
        hex: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Marker {
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetOption {
    /// A number, or `[x, y]` for positions.
    pub value: Value,
    pub label: String,
    pub preview: Preview,
}

/// The value domain colour widgets offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorDomain {
    Hue,
}

/// How a widget's value turns into an image operation. Exactly one of the
/// domain fields is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBinding {
    /// The operation with its other parameters at their defaults.
    pub op: OpKind,
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presets: Option<Vec<PresetOption>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<Plane>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<ColorDomain>,
}

impl ParamBinding {
    fn populated(&self) -> usize {
        [
            self.range.is_some(),
            self.options.is_some(),
            self.presets.is_some(),
            self.plane.is_some(),
            self.color.is_some(),
        ]
        .into_iter()
        .filter(|x| *x)
        .count()
    }

    /// The operation a widget value selects. Scalars drive `param`, points
    /// drive positions and `#RRGGBB` strings drive hue-domain bindings.
    pub fn op_for(&self, value: &Value) -> Result<OpKind, GenerateError> {
        let bad = |why: &str| GenerateError::Extract(format!("value {value} for {}: {why}", self.param));
        let family = family_of(&self.op);
        let scalar = match value {
            Value::Number(n) => n.as_f64(),
            Value::String(s) if s.starts_with('#') => {
                Some(hex_to_hue(s).map_err(|e| GenerateError::Extract(e.to_string()))?)
            }
            _ => None,
        };
        let point = value.as_array().and_then(|a| match a.as_slice() {
            [x, y] => Some((x.as_f64()?, y.as_f64()?)),
            _ => None,
        });
        match (family, scalar, point) {
            (OpFamily::Position, _, Some((x, y))) => Ok(position_op(&self.op, x, y)),
            (OpFamily::Position, Some(v), None) => Ok(set_scalar(&self.op, &self.param, v)),
            (_, Some(v), None) => Ok(set_scalar(&self.op, &self.param, v)),
            _ => Err(bad("unsupported value shape")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetSpec {
    pub spec_version: String,
    pub id: String,
    pub task: String,
    pub kind: WidgetKind,
    pub label: String,
    pub score: u64,
    pub reasons: Vec<String>,
    pub binding: ParamBinding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpFamily {
    /// One number, optionally with a hue reading for colour widgets.
    Scalar { color: bool },
    Position,
}

fn family_of(op: &OpKind) -> OpFamily {
    match op {
        OpKind::Overlay { .. } | OpKind::Vignette { .. } | OpKind::TextAnchor { .. } => OpFamily::Position,
        OpKind::Hue { .. } | OpKind::SetHue { .. } | OpKind::ColorBalance { .. } | OpKind::TonePreset { .. } => {
            OpFamily::Scalar { color: true }
        }
        _ => OpFamily::Scalar { color: false },
    }
}

/// Operation template and driven parameter for each known task.
const BINDINGS: &[(&str, &str)] = &[
    ("image_adjust_lightness", "d"),
    ("image_adjust_saturation", "f"),
    ("image_adjust_hue", "h"),
    ("image_adjust_exposure", "ev"),
    ("image_adjust_tint", "t"),
    ("image_adjust_temperature", "w"),
    ("image_adjust_fall_color", "strength"),
    ("image_change_to_spring", "strength"),
    ("image_color_match", "h"),
    ("image_adjust_color_balance", "h"),
    ("image_place_watermark", "x"),
    ("image_place_vignette", "cx"),
    ("design_align_text", "offset"),
    ("design_position_logo", "x"),
];

/// Strength of the hue-driven colour balance: gains span `1 ± COLOR_BALANCE_GAIN`.
pub const COLOR_BALANCE_GAIN: f64 = 0.5;

fn template(task: &str) -> Option<OpKind> {
    Some(match task {
        "image_adjust_lightness" => OpKind::Lightness { d: 0.0 },
        "image_adjust_saturation" => OpKind::Saturation { f: 1.0 },
        "image_adjust_hue" => OpKind::Hue { h: 0.0, mode: HueMode::Wrap },
        "image_adjust_exposure" => OpKind::Exposure { ev: 0.0 },
        "image_adjust_tint" => OpKind::Tint { t: 0.0 },
        "image_adjust_temperature" => OpKind::Temperature { w: 0.0 },
        "image_adjust_fall_color" => OpKind::TonePreset { name: TonePreset::Fall, strength: 0.0 },
        "image_change_to_spring" => OpKind::TonePreset { name: TonePreset::Spring, strength: 0.0 },
        "image_color_match" => OpKind::SetHue { h: 0.0 },
        "image_adjust_color_balance" => OpKind::ColorBalance { r: 1.0, g: 1.0, b: 1.0 },
        "image_place_watermark" => OpKind::Overlay { asset: "watermark".into(), x: 1.0, y: 1.0, alpha: 0.6 },
        "image_place_vignette" => OpKind::Vignette { cx: 0.5, cy: 0.5, radius: 0.35, strength: 0.6 },
        "design_align_text" => OpKind::TextAnchor { margin: Margin::Top, offset: 0.5 },
        "design_position_logo" => OpKind::Overlay { asset: "logo".into(), x: 0.0, y: 0.0, alpha: 1.0 },
        _ => return None,
    })
}

/// Known task names with their bound operation.
pub fn binding_table() -> Vec<(&'static str, OpKind)> {
    BINDINGS.iter().map(|(t, _)| (*t, template(t).expect("table entry"))).collect()
}

/// Colour-balance gains for a hue: the hue's pure colour, centred on 1.
pub fn color_balance_gains(h: f64) -> (f64, f64, f64) {
    let (r, g, b) = hsv_to_rgb(h, 1.0, 1.0);
    let mean = (r + g + b) / 3.0;
    let gain = |c: f64| 1.0 + COLOR_BALANCE_GAIN * (c - mean) / mean.max(f64::EPSILON);
    (gain(r), gain(g), gain(b))
}

fn set_scalar(op: &OpKind, param: &str, v: f64) -> OpKind {
    let mut op = op.clone();
    match (&mut op, param) {
        (OpKind::Hue { h, .. } | OpKind::SetHue { h }, _) => *h = v,
        (OpKind::Saturation { f }, _) => *f = v,
        (OpKind::Lightness { d }, _) => *d = v,
        (OpKind::Exposure { ev }, _) => *ev = v,
        (OpKind::Tint { t }, _) => *t = v,
        (OpKind::Temperature { w }, _) => *w = v,
        (OpKind::TonePreset { strength, .. }, _) => *strength = v,
        (OpKind::ColorBalance { r, g, b }, _) => (*r, *g, *b) = color_balance_gains(v),
        (OpKind::Overlay { x, .. }, "x") => *x = v,
        (OpKind::Overlay { y, .. }, _) => *y = v,
        (OpKind::Vignette { cx, .. }, "cx") => *cx = v,
        (OpKind::Vignette { cy, .. }, _) => *cy = v,
        (OpKind::TextAnchor { offset, .. }, _) => *offset = v,
    }
    op
}

/// The edge of the unit square nearest to `(x, y)`; ties go top, bottom, left, right.
pub fn nearest_margin(x: f64, y: f64) -> (Margin, f64) {
    let candidates = [(Margin::Top, y, x), (Margin::Bottom, 1.0 - y, x), (Margin::Left, x, y), (Margin::Right, 1.0 - x, y)];
    let (m, _, off) = candidates
        .into_iter()
        .fold(None::<(Margin, f64, f64)>, |best, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .expect("four candidates");
    (m, off)
}

fn position_op(op: &OpKind, px: f64, py: f64) -> OpKind {
    let mut op = op.clone();
    match &mut op {
        OpKind::Overlay { x, y, .. } => (*x, *y) = (px, py),
        OpKind::Vignette { cx, cy, .. } => (*cx, *cy) = (px, py),
        OpKind::TextAnchor { margin, offset } => (*margin, *offset) = nearest_margin(px, py),
        _ => {}
    }
    op
}

fn op_label(op: &OpKind) -> &'static str {
    match op {
        OpKind::Hue { .. } => "Hue",
        OpKind::Saturation { .. } => "Saturation",
        OpKind::Lightness { .. } => "Lightness",
        OpKind::Exposure { .. } => "Exposure",
        OpKind::Tint { .. } => "Tint",
        OpKind::Temperature { .. } => "Temperature",
        OpKind::ColorBalance { .. } => "Colour balance",
        OpKind::TonePreset { name: TonePreset::Fall, .. } => "Fall tone",
        OpKind::TonePreset { name: TonePreset::Spring, .. } => "Spring tone",
        OpKind::SetHue { .. } => "Target colour",
        OpKind::Overlay { .. } => "Position",
        OpKind::Vignette { .. } => "Vignette centre",
        OpKind::TextAnchor { .. } => "Text position",
    }
}

/// Hue presets with the CSS colour the button is painted in.
const HUE_PRESETS: [(f64, &str, &str); 5] = [
    (0.0, "red", "#ff0000"),
    (0.2, "green", "#008000"),
    (0.4, "cyan", "#00ffff"),
    (0.6, "blue", "#0000ff"),
    (0.8, "magenta", "#ff00ff"),
];

const ANCHORS: [(f64, f64, &str); 9] = [
    (0.0, 0.0, "top left"),
    (0.5, 0.0, "top"),
    (1.0, 0.0, "top right"),
    (0.0, 0.5, "left"),
    (0.5, 0.5, "center"),
    (1.0, 0.5, "right"),
    (0.0, 1.0, "bottom left"),
    (0.5, 1.0, "bottom"),
    (1.0, 1.0, "bottom right"),
];

fn scalar_range(op: &OpKind) -> Range {
    let (min, max) = match op {
        OpKind::Hue { .. } | OpKind::SetHue { .. } | OpKind::ColorBalance { .. } => (0.0, 1.0),
        OpKind::TonePreset { .. } => (0.0, 1.0),
        OpKind::Saturation { .. } => (0.0, 2.0),
        OpKind::Overlay { .. } | OpKind::Vignette { .. } | OpKind::TextAnchor { .. } => (0.0, 1.0),
        _ => (-1.0, 1.0),
    };
    Range { min, max, step: 0.01 }
}

fn is_hue_domain(op: &OpKind) -> bool {
    matches!(op, OpKind::Hue { .. } | OpKind::SetHue { .. } | OpKind::ColorBalance { .. })
}

/// Five values: the hue presets for hue-domain ops, else evenly spaced over the range.
fn scalar_values(op: &OpKind) -> Vec<f64> {
    if is_hue_domain(op) {
        return HUE_PRESETS.iter().map(|p| p.0).collect();
    }
    let r = scalar_range(op);
    (0..5).map(|i| r.min + (r.max - r.min) * f64::from(i) / 4.0).collect()
}

fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn format_value(v: f64) -> String {
    format!("{v:?}")
}

fn scalar_presets(op: &OpKind, param: &str) -> Vec<PresetOption> {
    if is_hue_domain(op) {
        return HUE_PRESETS
            .iter()
            .map(|(v, name, css)| PresetOption {
                value: number(*v),
                label: format_value(*v),
                preview: Preview::Swatch {
                    hex: css.to_string(),
                    name: Some(name.to_string()),
                },
            })
            .collect();
    }
    let base = ImageBuffer::filled(1, 1, SWATCH_BASE).expect("1x1");
    scalar_values(op)
        .into_iter()
        .map(|v| {
            let p = apply(&base, &set_scalar(op, param, v)).map(|img| img.pixel(0, 0)).unwrap_or(SWATCH_BASE);
            PresetOption {
                value: number(v),
                label: format_value(v),
                preview: Preview::Swatch {
                    hex: hex([p[0], p[1], p[2]]),
                    name: None,
                },
            }
        })
        .collect()
}

fn position_presets() -> Vec<PresetOption> {
    ANCHORS
        .iter()
        .map(|(x, y, label)| PresetOption {
            value: Value::Array(vec![number(*x), number(*y)]),
            label: label.to_string(),
            preview: Preview::Marker { x: *x, y: *y },
        })
        .collect()
}

fn empty_binding(op: OpKind, param: &str) -> ParamBinding {
    ParamBinding {
        op,
        param: param.to_string(),
        range: None,
        options: None,
        presets: None,
        plane: None,
        color: None,
    }
}

/// Builds the binding for `kind` driving the operation bound to `task`.
pub fn binding_for(task: &str, kind: WidgetKind) -> Result<ParamBinding, GenerateError> {
    let op = template(task).ok_or_else(|| GenerateError::UnknownBinding(task.to_string()))?;
    let param = BINDINGS.iter().find(|(t, _)| *t == task).map(|(_, p)| *p).expect("table entry");
    let family = family_of(&op);
    let mismatch = || GenerateError::KindOpMismatch { kind, op: op.name() };
    let mut b = empty_binding(op.clone(), param);
    match (kind, family) {
        (WidgetKind::Slider | WidgetKind::TextField, _) => b.range = Some(scalar_range(&op)),
        (WidgetKind::Dropdown | WidgetKind::RadioButtons, OpFamily::Position) => {
            b.param = "xy".into();
            b.options = Some(ANCHORS.iter().map(|(x, y, _)| Value::Array(vec![number(*x), number(*y)])).collect());
        }
        (WidgetKind::Dropdown | WidgetKind::RadioButtons, OpFamily::Scalar { .. }) => {
            b.options = Some(scalar_values(&op).into_iter().map(number).collect());
        }
        (WidgetKind::PresetButtons, OpFamily::Position) => {
            b.param = "xy".into();
            b.presets = Some(position_presets());
        }
        (WidgetKind::PresetButtons, OpFamily::Scalar { .. }) => b.presets = Some(scalar_presets(&op, param)),
        (WidgetKind::ColorWheel | WidgetKind::ColorPicker, OpFamily::Scalar { color: true }) => {
            if !is_hue_domain(&op) {
                return Err(mismatch());
            }
            b.color = Some(ColorDomain::Hue);
        }
        (WidgetKind::ClickOnImage, OpFamily::Position) => {
            b.param = "xy".into();
            b.plane = Some(Plane::UNIT);
        }
        _ => return Err(mismatch()),
    }
    Ok(b)
}

/// Checks that a spec's binding domain is the one its kind needs.
pub fn validate_spec(spec: &WidgetSpec) -> Result<(), GenerateError> {
    let b = &spec.binding;
    let ok = b.populated() == 1
        && match spec.kind {
            WidgetKind::Slider | WidgetKind::TextField => b.range.is_some(),
            WidgetKind::Dropdown | WidgetKind::RadioButtons => b.options.as_ref().is_some_and(|o| !o.is_empty()),
            WidgetKind::PresetButtons => b.presets.as_ref().is_some_and(|p| {
                let labels: BTreeSet<&str> = p.iter().map(|x| x.label.as_str()).collect();
                !p.is_empty() && labels.len() == p.len()
            }),
            WidgetKind::ColorWheel | WidgetKind::ColorPicker => b.color.is_some(),
            WidgetKind::ClickOnImage => b.plane.is_some(),
        }
        && spec.score <= 10;
    if ok {
        Ok(())
    } else {
        Err(GenerateError::KindOpMismatch {
            kind: spec.kind,
            op: b.op.name(),
        })
    }
}

fn spec(task: &str, kind: WidgetKind, score: u64, reasons: Vec<String>) -> Result<WidgetSpec, GenerateError> {
    let binding = binding_for(task, kind)?;
    Ok(WidgetSpec {
        spec_version: SPEC_VERSION.to_string(),
        id: format!("{task}.{}", kind.as_str()),
        task: task.to_string(),
        kind,
        label: format!("{}: {}", kind.display_name(), op_label(&binding.op)),
        score,
        reasons,
        binding,
    })
}

/// Spec for a recommended widget, scored out of 10 with its rationales.
pub fn generate_spec(task: &str, kind: WidgetKind, rec: &AggregatedRecommendation) -> Result<WidgetSpec, GenerateError> {
    if !rec.scores.contains_key(&kind) {
        return Err(GenerateError::KindNotRecommended(kind));
    }
    let score = normalize_scores_int(rec, 10)[&kind];
    spec(task, kind, score, rec.rationales.get(&kind).cloned().unwrap_or_default())
}

/// Spec for a widget the user picked directly; it carries no score.
pub fn generate_unscored_spec(task: &str, kind: WidgetKind) -> Result<WidgetSpec, GenerateError> {
    spec(task, kind, 0, Vec::new())
}

/// The op-bound task a context drives: its own name when bound, else the most
/// relevant bound library task.
pub fn resolve_binding_task(ctx: &TaskContext, lib: &PreferenceLibrary) -> Result<String, GenerateError> {
    if template(ctx.name()).is_some() {
        return Ok(ctx.name().to_string());
    }
    relevance(ctx, lib)
        .ranked
        .into_iter()
        .map(|r| r.task_name)
        .find(|t| template(t).is_some())
        .ok_or_else(|| GenerateError::UnknownBinding(ctx.name().to_string()))
}

/// Hue picked by a click at angle `theta` (radians) on a colour wheel.
pub fn wheel_hue(theta: f64) -> f64 {
    (theta / std::f64::consts::TAU).rem_euclid(1.0)
}

/// The hue a colour widget reports for an RGB choice, for previews.
pub fn rgb_hue(rgb: [u8; 3]) -> f64 {
    rgb_to_hsv(f64::from(rgb[0]) / 255.0, f64::from(rgb[1]) / 255.0, f64::from(rgb[2]) / 255.0).0
}

/// Where a text block lands for a text-anchor op, as a normalized point.
pub fn text_anchor_point(op: &OpKind) -> Option<(f64, f64)> {
    match op {
        OpKind::TextAnchor { margin, offset } => Some(text_anchor_position(*margin, *offset)),
        _ => None,
    }
}
