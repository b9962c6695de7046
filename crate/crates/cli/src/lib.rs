//! Command-line driver: configuration, run manifests and subcommands.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser};
use iswerm_core::exec::with_threads;

use commands::{absolutize_env_spec, Command, ReplayArgs, RunContext};
use config::LabConfig;
use manifest::{FileDigest, RunManifest, Seeds, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "iswerm-lab", version, about = "Importance-weighted learning from adaptively collected bandit data")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "ISWERM_LAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the default configuration and exit.
    #[arg(long)]
    pub explain_config: bool,
}

/// What a finished run reports back to `main`.
#[derive(Debug)]
pub struct Outcome {
    /// False when a theory check failed or a replay differed.
    pub passed: bool,
    pub manifest: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    if cli.global.explain_config {
        print!("{}", LabConfig::explain());
        return Ok(Outcome {
            passed: true,
            manifest: None,
        });
    }
    let Some(mut command) = cli.command else {
        bail!("no subcommand given; see --help");
    };
    if let Command::Replay(a) = &command {
        return replay(a, &cli.global);
    }
    let mut cfg = match &cli.global.config {
        Some(p) => LabConfig::load(p)?,
        None => LabConfig::default(),
    };
    let seed = cli.global.seed.unwrap_or(cfg.seed);
    cfg.set_seed(seed);
    for env in [&mut cfg.collect.env, &mut cfg.bench.env, &mut cfg.sweep.env] {
        absolutize_env_spec(env)?;
    }
    command.absolutize()?;
    let threads = cli.global.threads.unwrap_or(cfg.threads);
    let inputs: Vec<PathBuf> = cli.global.config.iter().map(|p| std::path::absolute(p)).collect::<Result<_, _>>()?;
    execute(command, cfg, &cli.global.out_dir, threads, true, inputs)
}

/// Runs `command` into `out_dir` and writes its manifest.
pub fn execute(
    command: Command,
    cfg: LabConfig,
    out_dir: &Path,
    threads: usize,
    apply_overrides: bool,
    extra_inputs: Vec<PathBuf>,
) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut ctx = RunContext::new(out_dir.to_path_buf(), cfg, apply_overrides);
    for p in &extra_inputs {
        ctx.input(p);
    }
    with_threads(threads, || command.run(&mut ctx)).with_context(|| format!("{} failed", command.name()))?;
    ctx.cfg.validate()?;
    let artifacts = ctx
        .artifacts
        .iter()
        .map(|rel| FileDigest::of(&out_dir.join(rel), rel.clone()))
        .collect::<Result<Vec<_>>>()?;
    let inputs = ctx
        .inputs
        .iter()
        .map(|p| FileDigest::of(p, p.clone()))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config_hash: ctx.cfg.hash(),
        seeds: Seeds::of(&ctx.cfg),
        config: ctx.cfg,
        threads,
        inputs,
        artifacts,
        stage_seconds: ctx.stages,
        passed: ctx.passed,
    };
    let path = manifest.save(out_dir)?;
    Ok(Outcome {
        passed: manifest.passed,
        manifest: Some(path),
    })
}

/// Re-executes a recorded run and compares every artifact by SHA-256.
fn replay(a: &ReplayArgs, global: &GlobalArgs) -> Result<Outcome> {
    let recorded = RunManifest::load(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    for input in &recorded.inputs {
        let now = FileDigest::of(&input.path, input.path.clone())
            .with_context(|| format!("input {} of the recorded run", input.path.display()))?;
        if now.sha256 != input.sha256 {
            bail!("input {} changed since the recorded run", input.path.display());
        }
    }
    let into = a.into.clone().unwrap_or_else(|| base.join("replay"));
    if into.join(MANIFEST_FILE).exists() || std::fs::canonicalize(&into).ok() == std::fs::canonicalize(base).ok() {
        bail!("replay directory {} already holds a run", into.display());
    }
    let threads = global.threads.unwrap_or(recorded.config.threads);
    let outcome = execute(recorded.command.clone(), recorded.config.clone(), &into, threads, false, Vec::new())?;
    let fresh = RunManifest::load(&into.join(MANIFEST_FILE))?;
    let mut identical = fresh.config_hash == recorded.config_hash && fresh.artifacts.len() == recorded.artifacts.len();
    for old in &recorded.artifacts {
        let new = fresh.artifacts.iter().find(|n| n.path == old.path);
        let same = new.is_some_and(|n| n.sha256 == old.sha256);
        identical &= same;
        println!("{} {}", if same { "identical" } else { "DIFFERS" }, old.path.display());
    }
    if !identical {
        eprintln!("replay of {} did not reproduce the recorded outputs", a.manifest.display());
    }
    Ok(Outcome {
        passed: identical && outcome.passed == recorded.passed,
        manifest: outcome.manifest,
    })
}
