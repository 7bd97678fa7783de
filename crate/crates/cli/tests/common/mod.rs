#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const ALL_TAGS: &str = "cat,dog,parrot,office,kitchen,travel,短剧,办公室,脱口秀";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// A scratch run directory with its own config pointing at `fixture_dir`.
pub struct Run {
    pub dir: tempfile::TempDir,
}

impl Run {
    pub fn new() -> Self {
        Self::with_fixtures(&fixtures(), "")
    }

    pub fn with_fixtures(fixture_dir: &Path, extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = format!(
            "mock = true\nseed = 42\n{extra}\n[paths]\nwork_dir = \"work\"\ndataset = \"work/dataset.jsonl\"\n\
             meme_cache = \"work/memes.jsonl\"\nseed_dataset = {seed:?}\nfixtures = {fx:?}\n",
            seed = fixtures().join("seed.jsonl"),
            fx = fixture_dir,
        );
        std::fs::write(dir.path().join("quipgen.toml"), config).unwrap();
        Self { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path(rel)).unwrap()
    }

    pub fn quipgen(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_quipgen"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(self.path("quipgen.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.quipgen(args);
        assert!(
            out.status.success(),
            "quipgen {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    pub fn build(&self) -> String {
        self.ok(&["dataset-build", "--tags", ALL_TAGS])
    }

    pub fn build_and_embed(&self) {
        self.build();
        self.ok(&["embed"]);
    }

    pub fn generate(&self, meta: &str, out: &str) -> serde_json::Value {
        let target = fixtures().join(meta);
        self.ok(&[
            "generate",
            "--target",
            target.to_str().unwrap(),
            "--out-dir",
            out,
        ]);
        serde_json::from_str(&self.read(&format!("{out}/provenance.json"))).unwrap()
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
