//! Run orchestration: overrides, output directory, manifest and replay.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::{decisions, run_experiment, OutputFile};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const OUTPUT_ROOT_ENV: &str = "QHD_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "qhd-runs";

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub dense_cap: Option<usize>,
    pub memory_cap: Option<usize>,
    /// Output root used when neither `out` nor the config names a directory.
    pub output_root: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: Value,
    pub files: Vec<OutputFile>,
}

impl RunReport {
    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join(MANIFEST_NAME)
    }
}

/// Applies overrides and resolves the config; nothing is written.
pub fn prepare(config: &ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut c = config.clone();
    if o.seed.is_some() {
        c.seed = o.seed;
    }
    if o.dense_cap.is_some() {
        c.dense_cap = o.dense_cap;
    }
    if o.memory_cap.is_some() {
        c.memory_cap = o.memory_cap;
    }
    if let Some(out) = &o.out {
        c.output_dir = Some(out.clone());
    }
    if c.output_dir.is_none() {
        let root = o
            .output_root
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
        c.output_dir = Some(root.join(c.experiment.as_str()));
    }
    if o.threads == Some(0) {
        return Err(CliError::config("--threads must be positive"));
    }
    c.resolve()
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(CliError::io(&tmp))?;
    f.write_all(bytes).map_err(CliError::io(&tmp))?;
    f.sync_all().map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

fn write_manifest(dir: &Path, manifest: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST_NAME), text.as_bytes())
}

/// Resolves, runs and records one experiment.
pub fn execute(config: &ExperimentConfig, o: &Overrides) -> Result<RunReport, CliError> {
    let cfg = prepare(config, o)?;
    let dir = cfg.output_dir.clone().expect("resolved");
    let threads = o.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Output(format!("thread pool: {e}")))?;

    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let started = unix_now();
    let mut manifest = json!({
        "manifest_version": 1,
        "tool": "qhd",
        "version": env!("CARGO_PKG_VERSION"),
        "status": "running",
        "config": serde_json::to_value(&cfg)?,
        "decisions": decisions(&cfg),
        "run": {"threads": threads, "started_unix": started},
    });
    write_manifest(&dir, &manifest)?;

    let clock = Instant::now();
    let result = pool.install(|| run_experiment(&cfg));
    manifest["run"]["wall_clock_seconds"] = json!(clock.elapsed().as_secs_f64());
    manifest["run"]["finished_unix"] = json!(unix_now());
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            manifest["status"] = json!("failed");
            manifest["error"] = e.record();
            write_manifest(&dir, &manifest)?;
            return Err(e);
        }
    };

    let mut outputs = Vec::with_capacity(out.files.len());
    for f in &out.files {
        write_atomic(&dir.join(&f.name), &f.bytes)?;
        outputs.push(json!({
            "name": f.name,
            "bytes": f.bytes.len(),
            "sha256": sha256_hex(&f.bytes),
        }));
    }
    manifest["outputs"] = Value::Array(outputs);
    manifest["summary"] = out.summary;
    manifest["status"] = json!("ok");
    write_manifest(&dir, &manifest)?;
    Ok(RunReport {
        output_dir: dir,
        manifest,
        files: out.files,
    })
}

/// Outcome of re-running a manifest.
#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub run: RunReport,
    /// Output files whose checksum differs from the recorded one.
    pub mismatched: Vec<String>,
}

pub fn load_manifest(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Replay(format!("{}: {e}", path.display())))
}

/// Re-runs the resolved config stored in a manifest and compares checksums.
/// Without `out` the replay writes next to the original, in `replay/`.
pub fn replay(
    manifest_path: &Path,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<ReplayReport, CliError> {
    let recorded = load_manifest(manifest_path)?;
    if recorded["status"] != "ok" {
        return Err(CliError::Replay(format!(
            "{} records status {}; only completed runs can be replayed",
            manifest_path.display(),
            recorded["status"]
        )));
    }
    let config: ExperimentConfig = serde_json::from_value(recorded["config"].clone())
        .map_err(|e| CliError::Replay(format!("config in manifest: {e}")))?;
    let out = out.unwrap_or_else(|| {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("replay")
    });
    let overrides = Overrides {
        out: Some(out),
        threads,
        ..Overrides::default()
    };
    let run = execute(&config, &overrides)?;
    let expected: Vec<(String, String)> = recorded["outputs"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|o| {
                    (
                        o["name"].as_str().unwrap_or_default().to_string(),
                        o["sha256"].as_str().unwrap_or_default().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    let mut mismatched = Vec::new();
    for (name, sha) in &expected {
        match run.files.iter().find(|f| &f.name == name) {
            Some(f) if &sha256_hex(&f.bytes) == sha => {}
            _ => mismatched.push(name.clone()),
        }
    }
    for f in &run.files {
        if !expected.iter().any(|(n, _)| n == &f.name) {
            mismatched.push(f.name.clone());
        }
    }
    Ok(ReplayReport { run, mismatched })
}
