//! Preference-guided widget recommendation: a crowdsourced preference
//! library, relevance-based widget reasoning, score aggregation, widget spec
//! generation, the image kernel the widgets drive, and the pairwise study
//! harness.

pub mod aggregate;
pub mod catalog;
pub mod error;
pub mod fixtures;
pub mod imaging;
pub mod library;
pub mod reasoning;
pub mod study;
pub mod task;
pub mod trend;
pub mod widgets;

pub use catalog::{candidates_for, capabilities_of, parse_widget_name, CapabilityTag, CategoryTag, WidgetKind};
pub use error::*;
pub use library::{
    aggregate_frequencies, load_library, load_library_str, serialize_for_prompt, subset_library, FrequencyTable,
    LibraryMode, PreferenceLibrary, PreferenceResponse, TaskRecord,
};
pub use task::{derive_tags, relevance, Aspect, RelevanceResult, TaskContext};
