//! The closed set of candidate widgets and their capability metadata.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;

/// One of the eight widget kinds the engine may recommend or render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    Slider,
    Dropdown,
    RadioButtons,
    TextField,
    PresetButtons,
    ColorWheel,
    ColorPicker,
    ClickOnImage,
}

impl WidgetKind {
    pub const ALL: [WidgetKind; 8] = [
        WidgetKind::Slider,
        WidgetKind::Dropdown,
        WidgetKind::RadioButtons,
        WidgetKind::TextField,
        WidgetKind::PresetButtons,
        WidgetKind::ColorWheel,
        WidgetKind::ColorPicker,
        WidgetKind::ClickOnImage,
    ];

    /// Stable snake_case identifier used in files and on the wire.
    pub fn as_str(self) -> &'static str {
        match self {
            WidgetKind::Slider => "slider",
            WidgetKind::Dropdown => "dropdown",
            WidgetKind::RadioButtons => "radio_buttons",
            WidgetKind::TextField => "text_field",
            WidgetKind::PresetButtons => "preset_buttons",
            WidgetKind::ColorWheel => "color_wheel",
            WidgetKind::ColorPicker => "color_picker",
            WidgetKind::ClickOnImage => "click_on_image",
        }
    }

    /// Human-facing name, as used in prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            WidgetKind::Slider => "Slider",
            WidgetKind::Dropdown => "Dropdown",
            WidgetKind::RadioButtons => "Radio Buttons",
            WidgetKind::TextField => "Text Field",
            WidgetKind::PresetButtons => "Preset Buttons",
            WidgetKind::ColorWheel => "Color Wheel",
            WidgetKind::ColorPicker => "Color Picker",
            WidgetKind::ClickOnImage => "Click on Image",
        }
    }

    pub fn capabilities(self) -> BTreeSet<CapabilityTag> {
        capabilities_of(self)
    }
}

impl fmt::Display for WidgetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WidgetKind {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_widget_name(s)
    }
}

/// What kind of data manipulation a widget (or a task) is about.
///
/// Tasks carry the same tags, so the type doubles as the task category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilityTag {
    Continuous,
    Discrete,
    Color,
    Position,
}

/// Task category tags share the capability vocabulary.
pub type CategoryTag = CapabilityTag;

impl CapabilityTag {
    pub const ALL: [CapabilityTag; 4] = [
        CapabilityTag::Continuous,
        CapabilityTag::Discrete,
        CapabilityTag::Color,
        CapabilityTag::Position,
    ];

    /// Order in which tags are consulted when no library is available.
    /// Discrete comes last: most tasks also admit discrete presets, and
    /// letting it win ties would hide the task's primary need.
    pub const FALLBACK_PRECEDENCE: [CapabilityTag; 4] = [
        CapabilityTag::Continuous,
        CapabilityTag::Position,
        CapabilityTag::Color,
        CapabilityTag::Discrete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CapabilityTag::Continuous => "continuous",
            CapabilityTag::Discrete => "discrete",
            CapabilityTag::Color => "color",
            CapabilityTag::Position => "position",
        }
    }

    /// Phrase used when describing task groups in prompts.
    pub fn describe(self) -> &'static str {
        match self {
            CapabilityTag::Continuous => "continuous value adjustment",
            CapabilityTag::Discrete => "discrete value selection",
            CapabilityTag::Color => "color adjustment",
            CapabilityTag::Position => "object positioning",
        }
    }
}

impl fmt::Display for CapabilityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CapabilityTag {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        CapabilityTag::ALL
            .into_iter()
            .find(|t| t.as_str() == norm)
            .ok_or_else(|| CatalogError::UnknownTag(s.to_string()))
    }
}

/// Catalog row: a widget with its capabilities and its fallback ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub kind: WidgetKind,
    pub display_name: &'static str,
    pub capabilities: BTreeSet<CapabilityTag>,
    /// tag -> rank (0 is most preferred) for tags where the widget is a fallback.
    pub fallback_priority: Vec<(CapabilityTag, usize)>,
}

pub fn capabilities_of(kind: WidgetKind) -> BTreeSet<CapabilityTag> {
    use CapabilityTag::*;
    let tags: &[CapabilityTag] = match kind {
        WidgetKind::Slider => &[Continuous, Position],
        WidgetKind::TextField => &[Continuous, Position],
        WidgetKind::Dropdown => &[Discrete],
        WidgetKind::RadioButtons => &[Discrete],
        WidgetKind::PresetButtons => &[Discrete, Color, Position],
        WidgetKind::ColorWheel => &[Color, Continuous],
        WidgetKind::ColorPicker => &[Color],
        WidgetKind::ClickOnImage => &[Position],
    };
    tags.iter().copied().collect()
}

/// Fallback order for one tag, used when reasoning runs without a library.
pub fn fallback_order(tag: CapabilityTag) -> &'static [WidgetKind] {
    use WidgetKind::*;
    match tag {
        CapabilityTag::Continuous => &[Slider, TextField, ColorWheel],
        CapabilityTag::Discrete => &[PresetButtons, Dropdown, RadioButtons],
        CapabilityTag::Color => &[ColorPicker, ColorWheel, PresetButtons],
        CapabilityTag::Position => &[Slider, ClickOnImage, PresetButtons],
    }
}

pub fn fallback_rank(kind: WidgetKind, tag: CapabilityTag) -> Option<usize> {
    fallback_order(tag).iter().position(|k| *k == kind)
}

pub fn entry(kind: WidgetKind) -> CatalogEntry {
    CatalogEntry {
        kind,
        display_name: kind.display_name(),
        capabilities: capabilities_of(kind),
        fallback_priority: CapabilityTag::ALL
            .into_iter()
            .filter_map(|t| fallback_rank(kind, t).map(|r| (t, r)))
            .collect(),
    }
}

/// The full candidate set, in declaration order.
pub fn catalog() -> Vec<CatalogEntry> {
    WidgetKind::ALL.into_iter().map(entry).collect()
}

/// Every kind whose capabilities intersect `tags`.
///
/// Kinds ranked as a fallback for one of the queried tags come first (best
/// rank over the queried tags), the rest follow; ties go by identifier.
pub fn candidates_for(tags: &BTreeSet<CapabilityTag>) -> Result<Vec<WidgetKind>, CatalogError> {
    if tags.is_empty() {
        return Err(CatalogError::EmptyTagSet);
    }
    let mut out: Vec<(usize, &'static str, WidgetKind)> = WidgetKind::ALL
        .into_iter()
        .filter(|k| !capabilities_of(*k).is_disjoint(tags))
        .map(|k| {
            let rank = tags
                .iter()
                .filter_map(|t| fallback_rank(k, *t))
                .min()
                .unwrap_or(usize::MAX);
            (rank, k.as_str(), k)
        })
        .collect();
    out.sort();
    Ok(out.into_iter().map(|(_, _, k)| k).collect())
}

const ALIASES: &[(&str, WidgetKind)] = &[
    ("sliders", WidgetKind::Slider),
    ("float_slider", WidgetKind::Slider),
    ("range_slider", WidgetKind::Slider),
    ("drop_down", WidgetKind::Dropdown),
    ("dropdown_menu", WidgetKind::Dropdown),
    ("dropdowns", WidgetKind::Dropdown),
    ("radio", WidgetKind::RadioButtons),
    ("radio_button", WidgetKind::RadioButtons),
    ("text_box", WidgetKind::TextField),
    ("textbox", WidgetKind::TextField),
    ("textfield", WidgetKind::TextField),
    ("text_input", WidgetKind::TextField),
    ("preset_button", WidgetKind::PresetButtons),
    ("presets", WidgetKind::PresetButtons),
    ("buttons_with_preview_overlays", WidgetKind::PresetButtons),
    ("preset_buttons_with_preview_overlays", WidgetKind::PresetButtons),
    ("colour_wheel", WidgetKind::ColorWheel),
    ("colorwheel", WidgetKind::ColorWheel),
    ("colour_picker", WidgetKind::ColorPicker),
    ("colorpicker", WidgetKind::ColorPicker),
    ("click_on_the_image", WidgetKind::ClickOnImage),
    ("click_image", WidgetKind::ClickOnImage),
    ("clicking_on_the_image", WidgetKind::ClickOnImage),
    ("direct_click", WidgetKind::ClickOnImage),
];

fn normalize_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for c in raw.trim().chars() {
        if c.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(c.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Case/space/underscore-insensitive widget lookup with a small alias table.
pub fn parse_widget_name(raw: &str) -> Result<WidgetKind, CatalogError> {
    let norm = normalize_name(raw);
    if let Some(k) = WidgetKind::ALL.into_iter().find(|k| k.as_str() == norm) {
        return Ok(k);
    }
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == norm)
        .map(|(_, k)| *k)
        .ok_or_else(|| CatalogError::UnknownWidget(raw.to_string()))
}
