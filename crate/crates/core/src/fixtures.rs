//! Shipped fixture data: the synthetic preference library, its trend
//! manifest, malformed library variants and golden HSV tables.

use crate::library::{load_library_str, PreferenceLibrary};
use crate::trend::TrendManifest;

pub const LIBRARY_JSON: &str = include_str!("../fixtures/library.json");
pub const TREND_MANIFEST_JSON: &str = include_str!("../fixtures/trend_manifest.json");
pub const MALFORMED_EXPECTED_JSON: &str = include_str!("../fixtures/malformed/expected.json");
pub const HUE_CLIP_GOLDEN_JSON: &str = include_str!("../fixtures/golden/hue_clip.json");
pub const HSV8_GOLDEN_JSON: &str = include_str!("../fixtures/golden/hsv8_roundtrip.json");
pub const PHOTO64_PNG: &[u8] = include_bytes!("../fixtures/images/photo64.png");
pub const PHOTO64_HUE020_PNG: &[u8] = include_bytes!("../fixtures/images/photo64_hue020_wrap.png");
pub const GRADIENT_PNG: &[u8] = include_bytes!("../fixtures/images/gradient32x16.png");

/// Malformed library documents by file name.
pub const MALFORMED: [(&str, &str); 10] = [
    ("invalid_json.json", include_str!("../fixtures/malformed/invalid_json.json")),
    ("empty_tasks.json", include_str!("../fixtures/malformed/empty_tasks.json")),
    ("missing_version.json", include_str!("../fixtures/malformed/missing_version.json")),
    ("unknown_widget.json", include_str!("../fixtures/malformed/unknown_widget.json")),
    ("duplicate_task_name.json", include_str!("../fixtures/malformed/duplicate_task_name.json")),
    ("empty_reason.json", include_str!("../fixtures/malformed/empty_reason.json")),
    ("unknown_aspect.json", include_str!("../fixtures/malformed/unknown_aspect.json")),
    ("missing_description.json", include_str!("../fixtures/malformed/missing_description.json")),
    ("unknown_tag.json", include_str!("../fixtures/malformed/unknown_tag.json")),
    (
        "duplicate_rater_wrong_type.json",
        include_str!("../fixtures/malformed/duplicate_rater_wrong_type.json"),
    ),
];

/// The full 8-task library.
pub fn library() -> PreferenceLibrary {
    load_library_str(LIBRARY_JSON).expect("shipped library is valid")
}

pub fn trend_manifest() -> TrendManifest {
    serde_json::from_str(TREND_MANIFEST_JSON).expect("shipped manifest is valid")
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct MalformedCase {
    pub file: String,
    /// `parse` or `invalid`.
    pub error: String,
    pub paths: Vec<String>,
}

pub fn malformed_cases() -> Vec<(MalformedCase, &'static str)> {
    #[derive(serde::Deserialize)]
    struct Expected {
        cases: Vec<MalformedCase>,
    }
    let expected: Expected = serde_json::from_str(MALFORMED_EXPECTED_JSON).expect("expected.json");
    expected
        .cases
        .into_iter()
        .map(|c| {
            let text = MALFORMED
                .iter()
                .find(|(f, _)| *f == c.file)
                .map(|(_, t)| *t)
                .unwrap_or_else(|| panic!("missing malformed fixture {}", c.file));
            (c, text)
        })
        .collect()
}
