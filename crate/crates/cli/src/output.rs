//! Output directory, per-command sidecar and exit status.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::cache::Cache;
use crate::config::{RunConfig, VERSION};

pub const EXIT_PARTIAL: i32 = 2;

pub struct Ctx {
    pub cfg: RunConfig,
    pub cache: Cache,
    pub command: &'static str,
    outputs: Vec<String>,
    diagnostics: Vec<String>,
    partial: bool,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    outputs: &'a [String],
    partial: bool,
    diagnostics: &'a [String],
    summary: &'a Value,
}

impl Ctx {
    pub fn new(cfg: RunConfig, cache: Cache, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
        Ok(Self { cfg, cache, command, outputs: Vec::new(), diagnostics: Vec::new(), partial: false })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let w = self.create(name)?;
        serde_json::to_writer_pretty(w, value)?;
        Ok(())
    }

    /// Records a diagnostic that makes the run partial (exit status 2).
    pub fn flag(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.diagnostics.push(msg);
        self.partial = true;
    }

    /// Writes `<command>.meta.json` and returns the exit status.
    pub fn finish(mut self, summary: Value) -> Result<i32> {
        let name = format!("{}.meta.json", self.command);
        let outputs = std::mem::take(&mut self.outputs);
        let meta = Sidecar {
            command: self.command,
            version: VERSION,
            config_hash: self.cfg.hash(),
            config: &self.cfg,
            outputs: &outputs,
            partial: self.partial,
            diagnostics: &self.diagnostics,
            summary: &summary,
        };
        let path = self.path(&name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &meta)?;
        // A closed pipe on stdout is not a failure of the run.
        let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&summary)?);
        Ok(if self.partial { EXIT_PARTIAL } else { 0 })
    }
}
