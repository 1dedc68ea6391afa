//! Reasoning prompt assembly.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::catalog::{catalog, CategoryTag};
use crate::library::{prompt_document, PreferenceLibrary};
use crate::task::{Aspect, TaskContext};

/// Prompt text plus the serialized inputs it embeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    /// Absent for prompts built without a library.
    pub library_json: Option<String>,
    pub candidates_json: String,
    pub task_description: String,
}

impl PromptBundle {
    /// System and user blocks joined, as logged in transcripts.
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

fn definitions(out: &mut String) {
    out.push_str("First, please take the definitions below:\n");
    for a in Aspect::ALL {
        out.push_str(&format!("    - {}: {}\n", a.title(), a.definition()));
    }
    out.push('\n');
}

fn quoted_list(names: &[&str]) -> String {
    let q: Vec<String> = names.iter().map(|n| format!("\"{n}\"")).collect();
    match q.len() {
        0 => String::new(),
        1 => q[0].clone(),
        2 => format!("{} and {}", q[0], q[1]),
        n => format!("{}, and {}", q[..n - 1].join(", "), q[n - 1]),
    }
}

fn and_list(items: &[&str]) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].to_string(),
        n => format!("{} and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

/// One line per distinct tag set, grouping the library tasks that share it.
fn additional_task_information(lib: &PreferenceLibrary) -> Vec<String> {
    let mut groups: Vec<(&BTreeSet<CategoryTag>, Vec<&str>)> = Vec::new();
    for t in &lib.tasks {
        if t.tags.is_empty() {
            continue;
        }
        match groups.iter_mut().find(|(tags, _)| *tags == &t.tags) {
            Some((_, names)) => names.push(&t.name),
            None => groups.push((&t.tags, vec![&t.name])),
        }
    }
    groups
        .into_iter()
        .map(|(tags, names)| {
            let descs: Vec<&str> = tags.iter().map(|t| t.describe()).collect();
            let verb = if names.len() == 1 { "is" } else { "are" };
            format!("{} {verb} related to {}.", quoted_list(&names), and_list(&descs))
        })
        .collect()
}

fn response_template(with_library: bool) -> String {
    let mut t = String::from("{\n    \"reasoning\": {```reasoning\n");
    if with_library {
        t.push_str("        \"relevant tasks from the library\": \"<your reasoning>\"\n\n");
    }
    for (i, a) in Aspect::ALL.iter().enumerate() {
        if i > 0 {
            t.push_str("        \n");
        }
        t.push_str(&format!(
            "        \"{}_reasoning\": {{\n            \"<UI widget type>\": \"<your reasoning>\"\n        }}\n",
            a.as_str()
        ));
    }
    t.push_str("    ```}\n    \n    \"widget\": {```widget\n        \"<task_name>\": {\n");
    for (i, a) in Aspect::ALL.iter().enumerate() {
        let comma = if i + 1 < Aspect::ALL.len() { "," } else { "" };
        t.push_str(&format!("            \"{}\": \"<UI widget type>\"{comma}\n", a.as_str()));
    }
    t.push_str("        }\n    ```}\n}");
    t
}

fn response_instructions(out: &mut String, with_library: bool) {
    out.push_str(
        "Lastly, based on your reasoning, write down UI widgets for predictability, efficiency, and explorability in JSON format. \n\n\
         Refer to the example below to provide your response. \n\
         \x20   - Replace the placeholders marked by <> with your response. Do not include <> in your response. \n\
         \x20   - You must keep all the existing information from the example and only replace placeholders.\n\
         \x20   - The response must be in JSON format.\n",
    );
    out.push_str(&response_template(with_library));
}

fn library_system(lib: &PreferenceLibrary) -> String {
    let mut s = String::from(
        "Based on the crowdsourced UI widget preference library, reason UI widget type for the user task. \
         You should follow the steps below for the reasoning.\n\n",
    );
    definitions(&mut s);
    s.push_str(
        "Second, information on the crowdsourced UI widget preference library is in the prompt:\n\
         \x20   - Crowdsourced UI widget preference library task description: detailed descriptions of all the tasks.\n\
         \x20   - Crowdsourced UI widget preference library widget frequency: the frequency of user-preferred widgets. \
         Large numbers mean the corresponding widget is preferred by more people. \n\
         \x20   - Crowdsourced UI widget preference library widget reasons: the reasons for user-preferred widgets.\n\n\
         Third, search for the most relevant tasks from the crowdsourced UI widget preference library. \n\
         \x20   - You can compare the given task and the tasks names in the library, and refer to their task descriptions \
         to help you to find the relevant tasks.\n",
    );
    let info = additional_task_information(lib);
    if !info.is_empty() {
        s.push_str("    - Additional task information:\n");
        for line in info {
            s.push_str(&format!("        - {line}\n"));
        }
    }
    s.push_str(
        "\nFourth, reason the most proper UI widget for predictability, efficiency, and explorability. \n\
         \x20   - Your reasoning should be based on the relevant tasks you found in the library.\n\
         \x20   - After you find the relevant tasks, refer to the content of \"Predictability\", \"Efficiency\", or \
         \"Explorability\" in the widget frequency and widget reasons.\n\
         \x20   - You must refer to the widgets of high frequencies of the relevant tasks in widget frequency.\n\
         \x20   - You must refer to widget reasons to help your reasoning.\n\
         \x20   - The UI widget you reason must come from the given library.\n\n",
    );
    response_instructions(&mut s, true);
    s
}

fn no_library_system() -> String {
    let mut s = String::from(
        "Reason UI widget type for the user task. You should follow the steps below for the reasoning.\n\n",
    );
    definitions(&mut s);
    s.push_str(
        "Second, reason the most proper UI widget for predictability, efficiency, and explorability. \n\
         \x20   - The UI widget you reason must come from the given UI widget candidates.\n\n",
    );
    response_instructions(&mut s, false);
    s
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

/// Library split into the three prompt sections: descriptions, frequencies, reasons.
fn library_sections(lib: &PreferenceLibrary) -> [(&'static str, Value); 3] {
    let doc = prompt_document(lib);
    let mut desc = Map::new();
    let mut freq = Map::new();
    let mut reasons = Map::new();
    for t in doc["tasks"].as_array().into_iter().flatten() {
        let name = t["name"].as_str().unwrap_or_default().to_string();
        desc.insert(name.clone(), t["description"].clone());
        freq.insert(name.clone(), t["widget_frequency"].clone());
        reasons.insert(name, t["widget_reasons"].clone());
    }
    [
        ("Crowdsourced UI widget preference library task description", Value::Object(desc)),
        ("Crowdsourced UI widget preference library widget frequency", Value::Object(freq)),
        ("Crowdsourced UI widget preference library widget reasons", Value::Object(reasons)),
    ]
}

/// Builds the reasoning prompt; an empty library yields the library-free variant.
pub fn build_reasoning_prompt(ctx: &TaskContext, lib: &PreferenceLibrary) -> PromptBundle {
    let with_library = !lib.tasks.is_empty();
    let task = json!({
        "task_name": ctx.name(),
        "task_description": ctx.description(),
        "preference_aspects": ctx.aspects().iter().map(|a| a.as_str()).collect::<Vec<_>>(),
    });
    let candidates: Vec<Value> = catalog()
        .into_iter()
        .map(|e| json!({ "widget": e.kind.as_str(), "name": e.display_name }))
        .collect();
    let candidates_json = pretty(&Value::Array(candidates));

    let mut user = format!("User task:\n{}\n\nUI widget candidates:\n{}\n", pretty(&task), candidates_json);
    let library_json = if with_library {
        for (title, section) in library_sections(lib) {
            user.push_str(&format!("\n{title}:\n{}\n", pretty(&section)));
        }
        Some(pretty(&prompt_document(lib)))
    } else {
        None
    };
    PromptBundle {
        system: if with_library { library_system(lib) } else { no_library_system() },
        user,
        library_json,
        candidates_json,
        task_description: ctx.description().to_string(),
    }
}
