//! Consistency check between scenario documentation and the suites.
//!
//! Scenario documents under `docs/scenarios/*.md` cite runnable cases
//! with list lines of the form:
//!
//! ```text
//! - case: `update-phone`
//! ```
//!
//! Every cited name must resolve to a case discovered under `suites/`,
//! so the walkthroughs can never drift away from what actually runs.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::pyramid::{discover, DiscoverFilter, PyramidError};

/// A citation whose case name no longer exists in the suites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrokenReference {
    pub doc: PathBuf,
    pub case: String,
}

impl fmt::Display for BrokenReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: cites unknown case `{}`", self.doc.display(), self.case)
    }
}

/// Scans `{repo_root}/docs/scenarios/*.md` and resolves every citation
/// against the cases discovered in `{repo_root}/suites`. An empty result
/// means the docs and the suites agree; a missing scenarios directory
/// counts as agreement.
pub fn validate_docs(repo_root: &Path) -> Result<Vec<BrokenReference>, PyramidError> {
    let scenarios = repo_root.join("docs").join("scenarios");
    if !scenarios.is_dir() {
        return Ok(Vec::new());
    }

    let suites = repo_root.join("suites");
    let known: BTreeSet<String> = if suites.is_dir() {
        discover(&[suites], &DiscoverFilter::default())?
            .into_iter()
            .map(|c| c.case().name().to_string())
            .collect()
    } else {
        BTreeSet::new()
    };

    let mut docs: Vec<PathBuf> = fs::read_dir(&scenarios)
        .map_err(|e| PyramidError::Io { path: scenarios.clone(), source: e })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "md"))
        .collect();
    docs.sort();

    let mut broken = Vec::new();
    for doc in docs {
        let text = fs::read_to_string(&doc)
            .map_err(|e| PyramidError::Io { path: doc.clone(), source: e })?;
        for line in text.lines() {
            if let Some(name) = cited_case(line) {
                if !known.contains(name) {
                    broken.push(BrokenReference { doc: doc.clone(), case: name.to_string() });
                }
            }
        }
    }
    Ok(broken)
}

fn cited_case(line: &str) -> Option<&str> {
    let rest = line.trim().strip_prefix("- case:")?.trim_start().strip_prefix('`')?;
    let end = rest.find('`')?;
    Some(&rest[..end])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(root: &Path, rel: &str, content: &str) {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    #[test]
    fn extracts_cited_names() {
        assert_eq!(cited_case("- case: `update-phone`"), Some("update-phone"));
        assert_eq!(cited_case("  - case: `a-b`  (see below)"), Some("a-b"));
        assert_eq!(cited_case("- case: update-phone"), None);
        assert_eq!(cited_case("case: `x`"), None);
        assert_eq!(cited_case("- case: `unterminated"), None);
    }

    #[test]
    fn consistent_docs_produce_no_broken_references() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "suites/unit/a.case.json",
            r#"{"name": "tool-lookup", "user_inputs": ["x"]}"#,
        );
        write(
            tmp.path(),
            "docs/scenarios/regression.md",
            "# Regression\n\n- case: `tool-lookup`\n",
        );
        assert_eq!(validate_docs(tmp.path()).unwrap(), Vec::new());
    }

    #[test]
    fn dangling_citation_names_doc_and_case() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "suites/unit/a.case.json",
            r#"{"name": "tool-lookup", "user_inputs": ["x"]}"#,
        );
        write(tmp.path(), "docs/scenarios/gone.md", "- case: `deleted-case`\n");
        let broken = validate_docs(tmp.path()).unwrap();
        assert_eq!(broken.len(), 1);
        assert_eq!(broken[0].case, "deleted-case");
        assert!(broken[0].doc.ends_with("gone.md"));
        assert!(broken[0].to_string().contains("deleted-case"));
    }

    #[test]
    fn variant_expanded_names_resolve() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "suites/unit/v.case.json",
            r#"{
                "name": "events",
                "user_inputs": ["x"],
                "language_variants": {"de": ["y"]}
            }"#,
        );
        write(tmp.path(), "docs/scenarios/langs.md", "- case: `events`\n- case: `events-de`\n");
        assert_eq!(validate_docs(tmp.path()).unwrap(), Vec::new());
    }

    #[test]
    fn missing_docs_directory_is_consistent() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(validate_docs(tmp.path()).unwrap(), Vec::new());
    }

    #[test]
    fn empty_scenarios_directory_is_consistent() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("docs/scenarios")).unwrap();
        assert_eq!(validate_docs(tmp.path()).unwrap(), Vec::new());
    }
}
