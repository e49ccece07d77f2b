use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qhd_cli::run::OUTPUT_ROOT_ENV;
use qhd_cli::{execute, replay, CliError, ExperimentConfig, Overrides};

/// Runs one quantum hard-disk experiment from a config file.
#[derive(Parser, Debug)]
#[command(name = "qhd", version, about)]
struct Args {
    /// Experiment config (.json, .toml, .ini or .cfg).
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "replay",
        conflicts_with = "replay"
    )]
    config: Option<PathBuf>,

    /// Re-run the resolved config recorded in a manifest and compare checksums.
    #[arg(long, value_name = "MANIFEST")]
    replay: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed overriding the config.
    #[arg(long, conflicts_with = "replay")]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,

    /// Largest fragment diagonalized densely.
    #[arg(long, value_name = "N", conflicts_with = "replay")]
    dense_cap: Option<usize>,

    /// Largest sector materialized in memory.
    #[arg(long, value_name = "N", conflicts_with = "replay")]
    memory_cap: Option<usize>,

    /// Root for output directories when neither --out nor the config names one.
    #[arg(long, env = OUTPUT_ROOT_ENV, value_name = "DIR", hide_env_values = true)]
    output_root: Option<PathBuf>,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(manifest) = &args.replay {
        return match replay(manifest, args.out.clone(), args.threads) {
            Ok(r) if r.mismatched.is_empty() => {
                println!(
                    "replayed {} into {}: {} files byte-identical",
                    manifest.display(),
                    r.run.output_dir.display(),
                    r.run.files.len()
                );
                ExitCode::SUCCESS
            }
            Ok(r) => fail(&CliError::Replay(format!(
                "outputs differ from the manifest: {}",
                r.mismatched.join(", ")
            ))),
            Err(e) => fail(&e),
        };
    }
    let path = args
        .config
        .as_ref()
        .expect("clap requires --config without --replay");
    let config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        threads: args.threads,
        dense_cap: args.dense_cap,
        memory_cap: args.memory_cap,
        output_root: args.output_root,
    };
    match execute(&config, &overrides) {
        Ok(report) => {
            println!("{}", report.manifest_path().display());
            println!("{}", report.manifest["summary"]);
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
