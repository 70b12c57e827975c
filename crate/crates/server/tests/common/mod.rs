#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// The shipped config with absolute fixture paths and a corpus directory
/// inside `dir`.
pub fn write_config(dir: &Path) -> PathBuf {
    let root = root();
    let text = std::fs::read_to_string(root.join("config/default.toml")).unwrap();
    let text = text
        .replace("\"../fixtures/", &format!("\"{}/fixtures/", root.display()))
        .replace("\"../var/corpus\"", &format!("\"{}/corpus\"", dir.display()));
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}
