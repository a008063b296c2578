use std::path::{Path, PathBuf};

use boxreach_cli::problem::ProblemFile;
use boxreach_cli::report::ResultFile;
use boxreach_cli::run;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, doc: &Value, what: &str) {
    let v = jsonschema::validator_for(&json(&root().join("docs").join(schema))).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{}: {e}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{what} against {schema}: {errors:#?}");
}

#[test]
fn shipped_problems_match_the_schema() {
    for entry in std::fs::read_dir(root().join("problems")).unwrap() {
        let path = entry.unwrap().path();
        assert_valid("problem.schema.json", &json(&path), &path.display().to_string());
        // And re-serializing the parsed file stays valid.
        let parsed = ProblemFile::read(&path).unwrap();
        assert_valid("problem.schema.json", &serde_json::to_value(&parsed).unwrap(), "re-serialized");
    }
}

#[test]
fn emitted_files_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in ["linear_contraction.json", "linear_contraction_corrupted.json"].iter().enumerate() {
        let loaded = ProblemFile::read(&root().join("problems").join(name)).unwrap().build().unwrap();
        let out = dir.path().join(format!("v{i}"));
        run::validate(&loaded, 200, 1, Some(&out)).unwrap();
        run::reach(&loaded, Some(&dir.path().join(format!("r{i}"))), None).unwrap();
        for sub in [format!("v{i}"), format!("r{i}")] {
            let d = dir.path().join(sub);
            let result = json(&d.join("result.json"));
            assert_valid("result.schema.json", &result, name);
            assert_valid("timing.schema.json", &json(&d.join("timing.json")), name);
            let back: ResultFile = serde_json::from_value(result.clone()).unwrap();
            assert_eq!(serde_json::to_value(&back).unwrap(), result);
        }
    }
}

#[test]
fn schema_rejects_unknown_fields() {
    let mut doc = json(&root().join("problems/traffic3.json"));
    doc["problem"]["horizon"] = Value::from(3.0);
    let v = jsonschema::validator_for(&json(&root().join("docs/problem.schema.json"))).unwrap();
    assert!(!v.is_valid(&doc));
    assert!(ProblemFile::from_json(&doc.to_string()).is_err());
}
