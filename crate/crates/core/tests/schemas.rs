//! The committed JSON Schemas must match what the types generate. Set
//! `ZKACE_BLESS=1` to rewrite them after an intentional format change.

use std::path::PathBuf;

use zkace_core::schema;

fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(schema::SCHEMA_VERSION)
}

#[test]
fn committed_schemas_are_current() {
    let dir = schema_dir();
    let bless = std::env::var_os("ZKACE_BLESS").is_some();
    if bless {
        std::fs::create_dir_all(&dir).unwrap();
    }
    let mut stale = Vec::new();
    for (name, s) in schema::all() {
        let path = dir.join(format!("{name}.schema.json"));
        let fresh = schema::render(&s);
        if bless {
            std::fs::write(&path, &fresh).unwrap();
        } else if std::fs::read_to_string(&path).ok().as_deref() != Some(fresh.as_str()) {
            stale.push(name);
        }
    }
    assert!(stale.is_empty(), "stale schemas {stale:?}; rerun with ZKACE_BLESS=1");
}

#[test]
fn no_orphan_schema_files() {
    let names: Vec<String> = schema::all().iter().map(|(n, _)| format!("{n}.schema.json")).collect();
    for entry in std::fs::read_dir(schema_dir()).unwrap() {
        let file = entry.unwrap().file_name().into_string().unwrap();
        assert!(names.contains(&file), "{file} has no generating type");
    }
}

#[test]
fn bundle_schema_names_every_field() {
    let (_, s) = schema::all().into_iter().find(|(n, _)| *n == "proof_bundle").unwrap();
    let v = serde_json::to_value(&s).unwrap();
    for key in ["format_version", "backend_id", "circuit_id", "proof_b64", "public_inputs"] {
        assert!(v["properties"].get(key).is_some(), "{key}");
    }
}
