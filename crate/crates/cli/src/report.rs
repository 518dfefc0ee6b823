//! Command outcomes: files to write, a JSON summary and failed checks.

use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub check: String,
    pub detail: String,
}

impl Failure {
    pub fn new(check: &str, detail: String) -> Self {
        Self {
            check: check.to_string(),
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    /// File names relative to the output directory, with contents.
    pub files: Vec<(String, String)>,
    pub failures: Vec<Failure>,
}

impl Outcome {
    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.files
            .iter()
            .map(|(name, body)| {
                let p = dir.join(name);
                std::fs::write(&p, body)?;
                Ok(p)
            })
            .collect()
    }

    /// Machine-readable status line printed on stdout.
    pub fn status_json(&self, command: &str) -> String {
        #[derive(Serialize)]
        struct Status<'a> {
            command: &'a str,
            status: &'a str,
            files: Vec<&'a str>,
            failures: &'a [Failure],
        }
        serde_json::to_string(&Status {
            command,
            status: if self.passed() { "pass" } else { "fail" },
            files: self.files.iter().map(|(n, _)| n.as_str()).collect(),
            failures: &self.failures,
        })
        .expect("serializable status")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}
