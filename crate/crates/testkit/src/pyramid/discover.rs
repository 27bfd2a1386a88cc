//! Case-file discovery.
//!
//! Cases live in JSON files named `*.case.json`, usually under a suites
//! directory with one subdirectory per layer:
//!
//! ```text
//! suites/
//!   unit/tool-lookup.case.json
//!   integration/update-phone.case.json
//!   acceptance/winter-tires.case.json
//! ```
//!
//! File shape:
//!
//! ```json
//! {
//!   "name": "update-phone",
//!   "layer": "integration",
//!   "agent": "driver_assistance",
//!   "user_inputs": ["My new number is +555-98765"],
//!   "language_variants": {"de": ["Meine neue Nummer ist +555-98765"]},
//!   "mock_script": [
//!     {"tool_use": [{"name": "update_customer_information",
//!                    "input": {"ucid": "1", "phoneNr": "+555-98765"}}]},
//!     {"text": ["Done."]},
//!     "passthrough"
//!   ],
//!   "replay_recording": "update-phone.recording.jsonl",
//!   "assertions": [{"tool": "update_customer_information",
//!                   "input_subset": {"phoneNr": "+555-98765"}}]
//! }
//! ```
//!
//! `layer` falls back to the parent directory name, `agent` to
//! `driver_assistance`. `replay_recording` is resolved relative to the
//! case file and answers the script's passthrough items. Language
//! variants expand into sibling cases named `{name}-{tag}` sharing the
//! script and assertions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;
use walkdir::WalkDir;

use crate::case::{Case, CaseAssertion};
use crate::llm::{
    LlmClient, RecordReplayClient, ScriptedResponse, ScriptedText, ScriptedToolUse,
    ToolUseRequest,
};

use super::{DiscoveredCase, Layer, PyramidError};

const DEFAULT_AGENT: &str = "driver_assistance";

/// Narrows a discovery run; an empty filter keeps everything.
#[derive(Debug, Clone, Default)]
pub struct DiscoverFilter {
    pub layer: Option<Layer>,
    /// Substring match on the variant-expanded case name.
    pub name: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    #[serde(default)]
    layer: Option<Layer>,
    #[serde(default)]
    agent: Option<String>,
    user_inputs: Vec<String>,
    #[serde(default)]
    language_variants: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    mock_script: Vec<ScriptItem>,
    #[serde(default)]
    replay_recording: Option<String>,
    #[serde(default)]
    assertions: Vec<CaseAssertion>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextItem {
    text: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolUseItem {
    tool_use: Vec<ToolUseEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolUseEntry {
    name: String,
    input: Value,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptItem {
    Keyword(String),
    Text(TextItem),
    ToolUse(ToolUseItem),
}

impl ScriptItem {
    fn into_response(self) -> Result<ScriptedResponse, String> {
        match self {
            ScriptItem::Keyword(k) if k == "passthrough" => Ok(ScriptedResponse::Passthrough),
            ScriptItem::Keyword(k) => Err(format!(
                "unknown script item {k:?}; expected \"passthrough\", \
                 {{\"text\": [...]}} or {{\"tool_use\": [...]}}"
            )),
            ScriptItem::Text(t) => {
                Ok(ScriptedResponse::Text(ScriptedText::new(t.text).map_err(|e| e.to_string())?))
            }
            ScriptItem::ToolUse(t) => Ok(ScriptedResponse::ToolUse(
                ScriptedToolUse::new(
                    t.tool_use.into_iter().map(|e| ToolUseRequest::new(e.name, e.input)).collect(),
                )
                .map_err(|e| e.to_string())?,
            )),
        }
    }
}

/// Collects every case under the given files and directories, expands
/// language variants, applies the filter and returns the cases sorted by
/// layer, then name.
pub fn discover(
    paths: &[PathBuf],
    filter: &DiscoverFilter,
) -> Result<Vec<DiscoveredCase>, PyramidError> {
    let mut files = Vec::new();
    for path in paths {
        collect_files(path, &mut files)?;
    }

    let mut cases = Vec::new();
    for file in &files {
        cases.extend(load_case_file(file)?);
    }
    cases.retain(|c| {
        filter.layer.map_or(true, |l| c.layer() == l)
            && filter.name.as_deref().map_or(true, |n| c.case().name().contains(n))
    });
    cases.sort_by(|a, b| (a.layer(), a.case().name()).cmp(&(b.layer(), b.case().name())));
    Ok(cases)
}

fn collect_files(root: &Path, out: &mut Vec<PathBuf>) -> Result<(), PyramidError> {
    // An explicitly named file is loaded as a case file regardless of its
    // suffix; directories contribute only `*.case.json` entries.
    if root.is_file() {
        out.push(root.to_path_buf());
        return Ok(());
    }
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            PyramidError::Io { path, source: e.into() }
        })?;
        if entry.file_type().is_file()
            && entry.file_name().to_str().is_some_and(|n| n.ends_with(".case.json"))
        {
            out.push(entry.into_path());
        }
    }
    Ok(())
}

fn infer_layer(path: &Path) -> Result<Layer, PyramidError> {
    let dir = path.parent().and_then(Path::file_name).and_then(|n| n.to_str());
    match dir.map(str::parse::<Layer>) {
        Some(Ok(layer)) => Ok(layer),
        _ => Err(PyramidError::Invalid {
            path: path.to_path_buf(),
            message: "no \"layer\" field and the parent directory is not named \
                      unit, integration or acceptance"
                .to_string(),
        }),
    }
}

fn load_case_file(path: &Path) -> Result<Vec<DiscoveredCase>, PyramidError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| PyramidError::Io { path: path.to_path_buf(), source: e })?;
    let file: CaseFile = serde_json::from_str(&raw)
        .map_err(|e| PyramidError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let invalid = |message: String| PyramidError::Invalid { path: path.to_path_buf(), message };

    let layer = match file.layer {
        Some(layer) => layer,
        None => infer_layer(path)?,
    };
    let agent = file.agent.unwrap_or_else(|| DEFAULT_AGENT.to_string());

    let mut script = Vec::with_capacity(file.mock_script.len());
    for item in file.mock_script {
        script.push(item.into_response().map_err(&invalid)?);
    }
    if layer != Layer::Acceptance && script.iter().any(|s| s.is_passthrough()) {
        return Err(invalid(format!(
            "case {:?} in layer {layer} contains a passthrough script item; \
             only acceptance cases may consult a real model",
            file.name
        )));
    }

    let mut case = Case::new(file.name, file.user_inputs)
        .map_err(|e| invalid(e.to_string()))?
        .with_mock_script(script)
        .with_assertions(file.assertions);

    if let Some(recording) = file.replay_recording {
        let resolved = path.parent().unwrap_or(Path::new(".")).join(recording);
        if !resolved.is_file() {
            return Err(invalid(format!(
                "replay recording {} does not exist",
                resolved.display()
            )));
        }
        case = case.with_client_factory(Arc::new(move || {
            Ok(Box::new(RecordReplayClient::replay(&resolved)?) as Box<dyn LlmClient>)
        }));
    }

    let expanded = if file.language_variants.is_empty() {
        vec![case]
    } else {
        case.with_variants(file.language_variants).map_err(|e| invalid(e.to_string()))?
    };
    Ok(expanded
        .into_iter()
        .map(|c| DiscoveredCase::new(c, layer, agent.clone()).with_source(path.to_path_buf()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, rel: &str, content: &str) -> PathBuf {
        let path = dir.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn discovers_sorted_by_layer_then_name() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "suites/integration/b.case.json",
            r#"{"name": "bravo", "user_inputs": ["x"]}"#,
        );
        write(
            tmp.path(),
            "suites/unit/z.case.json",
            r#"{"name": "zulu", "user_inputs": ["x"]}"#,
        );
        write(
            tmp.path(),
            "suites/unit/a.case.json",
            r#"{"name": "alpha", "user_inputs": ["x"]}"#,
        );

        let cases =
            discover(&[tmp.path().join("suites")], &DiscoverFilter::default()).unwrap();
        let names: Vec<&str> = cases.iter().map(|c| c.case().name()).collect();
        assert_eq!(names, ["alpha", "zulu", "bravo"]);
        assert_eq!(cases[0].layer(), Layer::Unit);
        assert_eq!(cases[2].layer(), Layer::Integration);
        assert_eq!(cases[0].agent_name(), "driver_assistance");
        assert!(cases[0].source().unwrap().ends_with("a.case.json"));
    }

    #[test]
    fn explicit_layer_field_beats_directory_name() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "anywhere/c.case.json",
            r#"{"name": "charlie", "layer": "acceptance", "user_inputs": ["x"]}"#,
        );
        let cases = discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap();
        assert_eq!(cases[0].layer(), Layer::Acceptance);
    }

    #[test]
    fn missing_layer_with_unhelpful_directory_is_invalid() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "misc/d.case.json", r#"{"name": "delta", "user_inputs": ["x"]}"#);
        let err =
            discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap_err();
        assert!(matches!(err, PyramidError::Invalid { .. }));
        assert!(err.to_string().contains("d.case.json"));
    }

    #[test]
    fn malformed_json_names_file_and_line() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "unit/bad.case.json", "{\n  \"name\": \"x\",,\n}");
        let err =
            discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("bad.case.json"));
        assert!(message.contains("line 2"), "unexpected message: {message}");
    }

    #[test]
    fn filters_by_layer_and_name() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "unit/a.case.json", r#"{"name": "alpha", "user_inputs": ["x"]}"#);
        write(
            tmp.path(),
            "integration/b.case.json",
            r#"{"name": "alphabet", "user_inputs": ["x"]}"#,
        );

        let unit_only = discover(
            &[tmp.path().to_path_buf()],
            &DiscoverFilter { layer: Some(Layer::Unit), name: None },
        )
        .unwrap();
        assert_eq!(unit_only.len(), 1);
        assert_eq!(unit_only[0].case().name(), "alpha");

        let by_name = discover(
            &[tmp.path().to_path_buf()],
            &DiscoverFilter { layer: None, name: Some("bet".into()) },
        )
        .unwrap();
        assert_eq!(by_name.len(), 1);
        assert_eq!(by_name[0].case().name(), "alphabet");
    }

    #[test]
    fn scripts_and_assertions_parse_into_the_case() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "unit/s.case.json",
            r#"{
                "name": "scripted",
                "user_inputs": ["find it"],
                "mock_script": [
                    {"tool_use": [{"name": "search_events", "input": {"city": "Munich"}}]},
                    {"text": ["done"]}
                ],
                "assertions": [{"tool": "search_events", "input_subset": {"city": "Munich"}}]
            }"#,
        );
        let cases = discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap();
        let case = cases[0].case();
        assert_eq!(case.script().len(), 2);
        assert_eq!(case.assertions().len(), 1);
    }

    #[test]
    fn language_variants_expand_with_suffixed_names() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "unit/v.case.json",
            r#"{
                "name": "events",
                "user_inputs": ["show me events in Munich"],
                "language_variants": {
                    "de": ["Zeige mir Veranstaltungen in München"],
                    "zh": ["搜慕尼黑的活动"]
                }
            }"#,
        );
        let cases = discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap();
        let names: Vec<&str> = cases.iter().map(|c| c.case().name()).collect();
        assert_eq!(names, ["events", "events-de", "events-zh"]);
        assert_eq!(cases[1].case().user_inputs()[0], "Zeige mir Veranstaltungen in München");
    }

    #[test]
    fn passthrough_in_unit_layer_is_rejected_at_discovery() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "unit/p.case.json",
            r#"{"name": "leaky", "user_inputs": ["x"], "mock_script": ["passthrough"]}"#,
        );
        let err =
            discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap_err();
        assert!(err.to_string().contains("passthrough"));
        assert!(err.to_string().contains("p.case.json"));
    }

    #[test]
    fn unknown_script_keyword_is_invalid() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "unit/k.case.json",
            r#"{"name": "kilo", "user_inputs": ["x"], "mock_script": ["realtime"]}"#,
        );
        let err =
            discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap_err();
        assert!(err.to_string().contains("realtime"));
    }

    #[test]
    fn missing_replay_recording_is_invalid() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "acceptance/r.case.json",
            r#"{
                "name": "romeo",
                "user_inputs": ["x"],
                "mock_script": ["passthrough"],
                "replay_recording": "gone.jsonl"
            }"#,
        );
        let err =
            discover(&[tmp.path().to_path_buf()], &DiscoverFilter::default()).unwrap_err();
        assert!(err.to_string().contains("gone.jsonl"));
    }

    #[test]
    fn nonexistent_path_is_an_io_error() {
        let err = discover(
            &[PathBuf::from("/definitely/not/here")],
            &DiscoverFilter::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PyramidError::Io { .. }));
    }
}
