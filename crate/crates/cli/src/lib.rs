//! Command-line driver: resolves arguments into a [`Job`], executes it in a
//! run directory and records a [`RunManifest`] next to the outputs.

pub mod args;
pub mod config;
pub mod error;
pub mod job;
pub mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use volstab_core::export::write_json;

pub use args::{Cli, Command, Common};
pub use error::{exit, CliError, Result};
pub use job::{Job, Outcome, RunDir};
pub use manifest::{RunManifest, MANIFEST_FILE};

/// A finished run.
#[derive(Debug)]
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub no_data: Option<String>,
}

fn default_run_dir(job: &Job) -> PathBuf {
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let tag = match job.seed() {
        Some(seed) => format!("seed{seed}"),
        None => job.name().to_owned(),
    };
    let base = PathBuf::from("runs").join(format!("{ts}-{tag}"));
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    dir
}

/// Runs `job` in `out` (or a fresh directory under `runs/`) and writes the
/// manifest.
pub fn execute(job: Job, out: Option<&Path>) -> Result<Run> {
    let dir = out.map_or_else(|| default_run_dir(&job), Path::to_path_buf);
    let mut inputs = BTreeMap::new();
    for p in job.inputs() {
        manifest::digest_inputs(p, &mut inputs)?;
    }
    let mut rd = RunDir::create(&dir, &job.inputs())?;
    let outcome = job.execute(&mut rd)?;
    let mut outputs = BTreeMap::new();
    for name in rd.written() {
        outputs.insert(name.clone(), manifest::sha256_file(&dir.join(name))?);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        subcommand: job.name().to_owned(),
        seed: job.seed(),
        config: job,
        inputs,
        outputs,
        results: outcome.results,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(Run {
        dir,
        manifest,
        no_data: outcome.no_data,
    })
}

/// Re-executes a recorded job after checking that its inputs are unchanged,
/// then checks that every output digest matches the record.
pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<Run> {
    let recorded = RunManifest::read(manifest_path)?;
    for (path, digest) in &recorded.inputs {
        if manifest::sha256_file(path)? != *digest {
            return Err(CliError::DigestMismatch { path: path.clone() });
        }
    }
    let run = execute(recorded.config.clone(), out)?;
    if run.manifest.outputs != recorded.outputs {
        let differing = recorded
            .outputs
            .iter()
            .find(|(k, v)| run.manifest.outputs.get(*k) != Some(v))
            .map_or_else(|| "set of outputs".to_owned(), |(k, _)| k.clone());
        return Err(CliError::ReplayMismatch {
            manifest: manifest_path.to_path_buf(),
            output: differing,
        });
    }
    Ok(run)
}

pub fn run(cli: &Cli) -> Result<Run> {
    let work = || match &cli.command {
        Command::Replay(r) => replay(&r.manifest, cli.common.out.as_deref()),
        command => {
            let job = args::resolve(command, &cli.common)?.expect("not a replay");
            execute(job, cli.common.out.as_deref())
        }
    };
    match cli.common.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Parses `args`, runs, reports and maps the result to an exit status.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    match run(&cli) {
        Ok(r) => {
            println!("{}", r.dir.display());
            println!(
                "{}",
                serde_json::to_string_pretty(&r.manifest.results).unwrap_or_default()
            );
            match r.no_data {
                Some(msg) => {
                    eprintln!("volstab: no data: {msg}");
                    ExitCode::from(exit::NO_DATA)
                }
                None => ExitCode::from(exit::OK),
            }
        }
        Err(e) => {
            eprintln!("volstab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
