//! The shipped config schema and presets stay in sync with the code.

use std::path::PathBuf;

use homogvi::config::{schema, Config};

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn shipped_schema_matches_config_type() {
    let path = repo_root().join("docs/config.schema.json");
    let expected = serde_json::to_string_pretty(&schema()).unwrap() + "\n";
    if std::env::var_os("HOMOGVI_WRITE_SCHEMA").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    let shipped = std::fs::read_to_string(&path).expect("docs/config.schema.json exists");
    assert_eq!(shipped, expected, "regenerate with HOMOGVI_WRITE_SCHEMA=1 cargo test --test schema");
}

#[test]
fn every_preset_parses() {
    let dir = repo_root().join("presets");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let config = Config::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            if config.coefficient.is_some() {
                config.coefficient().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            }
            config.obstacle().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
