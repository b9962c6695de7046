//! Subcommands. Each one reads its inputs, writes its artifacts under the
//! output directory through [`RunContext`], and reports its stages.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Subcommand};
use iswerm_core::collector::{collect, GreedyLearner, GreedyModelSpec};
use iswerm_core::dataset::{LoggedDataset, ReferenceWeight};
use iswerm_core::env::{EnvSpec, Environment, LossKind};
use iswerm_core::evaluation::{
    compare_schemes, excess_risk, replicate_experiment, run_rate_sweep, RateSweepResult, RiskEstimate, TestSet,
};
use iswerm_core::exec::ExecMode;
use iswerm_core::ingest::{load_csv_classification, IngestOptions};
use iswerm_core::learners::{
    fit_model, fit_policy_iswerm, FinitePolicyClass, FittedModel, ModelKind, ModelSpec, Policy, PolicyClass,
    PolicyFit, TreePolicyClass,
};
use iswerm_core::predictor::Predictor;
use iswerm_core::seed::{child_seed, stage};
use iswerm_core::theory::{run_suite, Suite};
use iswerm_core::weights::{compute_weights_with, WeightScheme};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::LabConfig;

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Run the epsilon-greedy collector and write a JSONL dataset.
    Collect(CollectArgs),
    /// Clean a labelled CSV file into a numeric, standardized table.
    Ingest(IngestArgs),
    /// Fit a weighted regression model to a logged dataset.
    Train(TrainArgs),
    /// Weighted policy search over a finite or tree class.
    LearnPolicy(LearnPolicyArgs),
    /// Test error and excess risk of a trained model or policy.
    Evaluate(EvaluateArgs),
    /// Every weighting scheme against every model over replications.
    BanditBench(BenchArgs),
    /// Regret or excess-risk slopes over a grid of horizons.
    RateSweep(SweepArgs),
    /// Numerical checks of the variance bounds and sup-process rate.
    TheoryCheck(TheoryArgs),
    /// Re-run a manifest into a fresh directory and compare its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Collect(_) => "collect",
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::LearnPolicy(_) => "learn-policy",
            Command::Evaluate(_) => "evaluate",
            Command::BanditBench(_) => "bandit-bench",
            Command::RateSweep(_) => "rate-sweep",
            Command::TheoryCheck(_) => "theory-check",
            Command::Replay(_) => "replay",
        }
    }

    /// Makes every input path absolute so the recorded command can be
    /// replayed from anywhere.
    pub fn absolutize(&mut self) -> Result<()> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            *p = std::path::absolute(&*p)?;
            Ok(())
        };
        match self {
            Command::Collect(a) => absolutize_env(&mut a.env)?,
            Command::Ingest(a) => abs(&mut a.data)?,
            Command::Train(a) => abs(&mut a.data)?,
            Command::LearnPolicy(a) => {
                abs(&mut a.data)?;
                if let Some(path) = a.class.strip_prefix("finite:") {
                    a.class = format!("finite:{}", std::path::absolute(path)?.display());
                }
            }
            Command::Evaluate(a) => {
                absolutize_env(&mut a.env)?;
                if let Some(p) = a.model.as_mut() {
                    abs(p)?;
                }
                if let Some(p) = a.policy.as_mut() {
                    abs(p)?;
                }
            }
            Command::BanditBench(a) => absolutize_env(&mut a.env)?,
            Command::RateSweep(a) => absolutize_env(&mut a.env)?,
            Command::TheoryCheck(_) => {}
            Command::Replay(a) => abs(&mut a.manifest)?,
        }
        Ok(())
    }

    pub fn run(&self, ctx: &mut RunContext) -> Result<()> {
        match self {
            Command::Collect(a) => run_collect(a, ctx),
            Command::Ingest(a) => run_ingest(a, ctx),
            Command::Train(a) => run_train(a, ctx),
            Command::LearnPolicy(a) => run_learn_policy(a, ctx),
            Command::Evaluate(a) => run_evaluate(a, ctx),
            Command::BanditBench(a) => run_bench(a, ctx),
            Command::RateSweep(a) => run_sweep(a, ctx),
            Command::TheoryCheck(a) => run_theory(a, ctx),
            Command::Replay(_) => bail!("replay is handled by the driver"),
        }
    }
}

/// Environment in compact form with any file path made absolute.
fn absolutize_env(env: &mut Option<String>) -> Result<()> {
    let Some(s) = env.as_mut() else { return Ok(()) };
    let Some((kind, body)) = s.split_once(':') else { return Ok(()) };
    let key = match kind {
        "discrete" => "file",
        "csv" => "path",
        _ => return Ok(()),
    };
    let parts: Vec<String> = body
        .split(',')
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(format!("{k}={}", std::path::absolute(v.trim())?.display())),
            _ => Ok(kv.to_string()),
        })
        .collect::<Result<_>>()?;
    *s = format!("{kind}:{}", parts.join(","));
    Ok(())
}

/// Absolute paths inside a config-supplied environment.
pub fn absolutize_env_spec(spec: &mut EnvSpec) -> Result<()> {
    if let EnvSpec::Csv { path, .. } = spec {
        *path = std::path::absolute(&*path)?;
    }
    Ok(())
}

fn parse_env(s: &str) -> Result<EnvSpec> {
    let mut spec: EnvSpec = s.parse().with_context(|| format!("environment '{s}'"))?;
    absolutize_env_spec(&mut spec)?;
    Ok(spec)
}

/// `one`, `uniform` or `dirac:<arm>`.
pub fn parse_gstar(s: &str) -> Result<ReferenceWeight, String> {
    match s {
        "one" => Ok(ReferenceWeight::ConstantOne),
        "uniform" => Ok(ReferenceWeight::UniformDensity),
        _ => s
            .strip_prefix("dirac:")
            .and_then(|a| a.parse().ok())
            .map(ReferenceWeight::Dirac)
            .ok_or_else(|| format!("unknown reference weight '{s}' (expected one, uniform or dirac:<arm>)")),
    }
}

fn parse_greedy(s: &str) -> Result<GreedyLearner, String> {
    match s {
        "linear" => Ok(GreedyLearner::Linear),
        "tree" => Ok(GreedyLearner::Tree),
        _ => Err(format!("unknown greedy learner '{s}' (expected linear or tree)")),
    }
}

/// Shared state of one run: resolved config, output registry and timings.
pub struct RunContext {
    pub out_dir: PathBuf,
    pub cfg: LabConfig,
    /// False during replay, where the recorded config is already resolved.
    pub apply_overrides: bool,
    pub artifacts: Vec<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub stages: BTreeMap<String, f64>,
    pub passed: bool,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, cfg: LabConfig, apply_overrides: bool) -> Self {
        RunContext {
            out_dir,
            cfg,
            apply_overrides,
            artifacts: Vec::new(),
            inputs: Vec::new(),
            stages: BTreeMap::new(),
            passed: true,
        }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self).with_context(|| format!("stage `{name}`"));
        *self.stages.entry(name.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    /// Registers an artifact and returns where to write it.
    pub fn output(&mut self, rel: &Path) -> Result<PathBuf> {
        if rel.is_absolute() || rel.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
            bail!("output path {} must be relative to --out-dir", rel.display());
        }
        let full = self.out_dir.join(rel);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if !self.artifacts.iter().any(|a| a == rel) {
            self.artifacts.push(rel.to_path_buf());
        }
        Ok(full)
    }

    pub fn input(&mut self, path: &Path) {
        let p = path.to_path_buf();
        if !self.inputs.contains(&p) {
            self.inputs.push(p);
        }
    }

    fn env_inputs(&mut self, spec: &EnvSpec) {
        for p in spec.input_files() {
            self.input(p);
        }
    }

    fn write_json<T: Serialize>(&mut self, rel: &Path, value: &T) -> Result<()> {
        let path = self.output(rel)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn write_csv<T: Serialize>(&mut self, rel: &Path, rows: &[T]) -> Result<()> {
        let path = self.output(rel)?;
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated `x y yerr` plot data.
    fn write_dat(&mut self, rel: &Path, header: &str, rows: &[(f64, f64, f64)]) -> Result<()> {
        let mut text = format!("# {header}\n");
        for (x, y, e) in rows {
            text.push_str(&format!("{x} {y} {e}\n"));
        }
        let path = self.output(rel)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn write_text(&mut self, rel: &Path, text: &str) -> Result<()> {
        let path = self.output(rel)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn load_dataset(ctx: &mut RunContext, path: &Path) -> Result<LoggedDataset> {
    ctx.input(path);
    LoggedDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

// collect

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CollectArgs {
    /// Environment, e.g. `linear:d=2,k=3,seed=0,noise=1` or `discrete:file=env.toml`.
    #[arg(long)]
    pub env: Option<String>,
    /// Exploration decay exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub floor_eps: Option<f64>,
    /// Number of rounds.
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    #[arg(long, value_parser = parse_greedy)]
    pub greedy: Option<GreedyLearner>,
    #[arg(long, default_value = "dataset.jsonl")]
    pub out: PathBuf,
}

fn run_collect(a: &CollectArgs, ctx: &mut RunContext) -> Result<()> {
    if ctx.apply_overrides {
        let c = &mut ctx.cfg.collect;
        if let Some(e) = &a.env {
            c.env = parse_env(e)?;
        }
        if let Some(b) = a.beta {
            c.schedule.beta = b;
        }
        if let Some(f) = a.floor_eps {
            c.schedule.floor_eps = f;
        }
        if let Some(t) = a.horizon {
            c.horizon = t;
        }
        if let Some(g) = a.greedy {
            c.greedy = GreedyModelSpec {
                learner: g,
                ..c.greedy
            };
        }
    }
    let c = ctx.cfg.collect.clone();
    ctx.env_inputs(&c.env);
    let env = ctx.stage("env", |_| Ok(c.env.build()?))?;
    let seed = ctx.cfg.seed;
    let ds = ctx.stage("collect", |_| Ok(collect(&env, &c.schedule, &c.greedy, c.horizon, seed)?))?;
    ctx.stage("write", |ctx| {
        let path = ctx.output(&a.out)?;
        ds.save(&path)?;
        Ok(())
    })?;
    println!(
        "collected {} rounds (K = {}, d = {}, beta = {}) into {}",
        ds.len(),
        ds.num_arms,
        ds.context_dim,
        ds.beta,
        a.out.display()
    );
    Ok(())
}

// ingest

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub no_standardize: bool,
    /// Keep rows with missing cells, imputing the column mean.
    #[arg(long)]
    pub keep_missing: bool,
    #[arg(long, default_value = "ingested.csv")]
    pub out: PathBuf,
}

fn run_ingest(a: &IngestArgs, ctx: &mut RunContext) -> Result<()> {
    ctx.input(&a.data);
    let options = IngestOptions {
        drop_missing: !a.keep_missing,
        standardize: !a.no_standardize,
    };
    let table = ctx.stage("ingest", |_| Ok(load_csv_classification(&a.data, &a.label_col, options)?))?;
    ctx.stage("write", |ctx| {
        let path = ctx.output(&a.out)?;
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = table.column_names.clone();
        header.push(a.label_col.clone());
        w.write_record(&header)?;
        for (x, &y) in table.features.iter().zip(&table.labels) {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(table.class_names[y].clone());
            w.write_record(&row)?;
        }
        w.flush()?;
        let summary = json!({
            "rows": table.len(),
            "features": table.dim(),
            "num_classes": table.num_classes,
            "column_names": table.column_names,
            "class_names": table.class_names,
            "standardized": options.standardize,
        });
        ctx.write_json(&a.out.with_extension("summary.json"), &summary)
    })?;
    println!(
        "ingested {} rows, {} features, {} classes into {}",
        table.len(),
        table.dim(),
        table.num_classes,
        a.out.display()
    );
    Ok(())
}

// train

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Logged dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "iswerm")]
    pub scheme: WeightScheme,
    #[arg(long, default_value = "ridge")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 4)]
    pub cv_folds: usize,
    /// Comma-separated penalties; empty uses the built-in grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Vec<f64>,
    /// Fixed penalty, skipping cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub min_leaf_weight: f64,
    /// Reference weight: one, uniform or dirac:<arm>.
    #[arg(long, default_value = "one", value_parser = parse_gstar)]
    pub gstar: ReferenceWeight,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub scheme: WeightScheme,
    pub gstar: ReferenceWeight,
    pub spec: ModelSpec,
    pub num_arms: usize,
    pub context_dim: usize,
    pub fitted: FittedModel,
}

fn run_train(a: &TrainArgs, ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.stage("load", |ctx| load_dataset(ctx, &a.data))?;
    let spec = ModelSpec {
        kind: a.model,
        cv_folds: a.cv_folds,
        lambda_grid: a.lambda_grid.clone(),
        lambda: a.lambda,
        max_depth: a.max_depth,
        min_leaf_weight: a.min_leaf_weight,
    };
    let w = ctx.stage("weights", |_| Ok(compute_weights_with(a.scheme, &ds, &a.gstar)?))?;
    let fitted = ctx.stage("fit", |_| Ok(fit_model(&spec, &ds, &w)?))?;
    let lambda = fitted.lambda;
    let out = TrainedModel {
        scheme: a.scheme,
        gstar: a.gstar,
        spec,
        num_arms: ds.num_arms,
        context_dim: ds.context_dim,
        fitted,
    };
    ctx.stage("write", |ctx| ctx.write_json(&a.out, &out))?;
    match lambda {
        Some(l) => println!("trained {} with {} (lambda = {l}) into {}", a.model.name(), a.scheme, a.out.display()),
        None => println!("trained {} with {} into {}", a.model.name(), a.scheme, a.out.display()),
    }
    Ok(())
}

// learn-policy

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LearnPolicyArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `finite:<policies.json>` or `tree:<depth>`.
    #[arg(long)]
    pub class: String,
    #[arg(long, default_value = "iswerm")]
    pub scheme: WeightScheme,
    #[arg(long, default_value = "one", value_parser = parse_gstar)]
    pub gstar: ReferenceWeight,
    /// Outcomes are rewards to maximize rather than costs.
    #[arg(long)]
    pub rewards: bool,
    #[arg(long, default_value = "policy.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedPolicy {
    pub scheme: WeightScheme,
    pub gstar: ReferenceWeight,
    pub class: String,
    pub rewards: bool,
    pub fit: PolicyFit,
}

fn parse_class(ctx: &mut RunContext, s: &str) -> Result<PolicyClass> {
    if let Some(path) = s.strip_prefix("finite:") {
        let path = Path::new(path);
        ctx.input(path);
        return Ok(PolicyClass::Finite(FinitePolicyClass::load(path)?));
    }
    if let Some(depth) = s.strip_prefix("tree:") {
        let depth = depth.parse().map_err(|_| anyhow!("bad tree depth '{depth}'"))?;
        return Ok(PolicyClass::Tree(TreePolicyClass::new(depth)));
    }
    bail!("unknown policy class '{s}' (expected finite:<file> or tree:<depth>)")
}

fn run_learn_policy(a: &LearnPolicyArgs, ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.stage("load", |ctx| load_dataset(ctx, &a.data))?;
    let class = parse_class(ctx, &a.class)?;
    let w = ctx.stage("weights", |_| Ok(compute_weights_with(a.scheme, &ds, &a.gstar)?))?;
    let sign = if a.rewards { -1.0 } else { 1.0 };
    let fit = ctx.stage("search", |_| Ok(fit_policy_iswerm(&ds, &w, &class, sign)?))?;
    let risk = fit.risk;
    let out = LearnedPolicy {
        scheme: a.scheme,
        gstar: a.gstar,
        class: a.class.clone(),
        rewards: a.rewards,
        fit,
    };
    ctx.stage("write", |ctx| ctx.write_json(&a.out, &out))?;
    println!("selected policy with weighted empirical risk {risk} into {}", a.out.display());
    Ok(())
}

// evaluate

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Defaults to the `collect.env` of the config.
    #[arg(long)]
    pub env: Option<String>,
    /// Output of `train`.
    #[arg(long, conflicts_with = "policy", required_unless_present = "policy")]
    pub model: Option<PathBuf>,
    /// Output of `learn-policy`.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long, default_value = "evaluation.json")]
    pub out: PathBuf,
}

fn read_json<T: for<'de> Deserialize<'de>>(ctx: &mut RunContext, path: &Path) -> Result<T> {
    ctx.input(path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `None` when the environment does not know its means.
fn known_excess<P: Predictor + ?Sized>(
    f: &P,
    env: &Environment,
    gstar: &ReferenceWeight,
    loss: LossKind,
) -> Result<Option<RiskEstimate>> {
    match excess_risk(f, env, gstar, loss) {
        Ok(r) => Ok(Some(r)),
        Err(iswerm_core::error::Error::UnknownMean) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn run_evaluate(a: &EvaluateArgs, ctx: &mut RunContext) -> Result<()> {
    if ctx.apply_overrides {
        if let Some(e) = &a.env {
            ctx.cfg.collect.env = parse_env(e)?;
        }
        if let Some(n) = a.n_test {
            ctx.cfg.evaluate.n_test = n;
        }
    }
    let spec = ctx.cfg.collect.env.clone();
    ctx.env_inputs(&spec);
    let env = ctx.stage("env", |_| Ok(spec.build()?))?;
    let test = TestSet::draw(&env, ctx.cfg.evaluate.n_test, child_seed(ctx.cfg.seed, 0, stage::TEST));
    let (k, d) = (env.num_arms(), env.context_dim());
    let report = if let Some(path) = &a.model {
        let m: TrainedModel = read_json(ctx, path)?;
        if (m.num_arms, m.context_dim) != (k, d) {
            bail!(
                "model was trained with K = {}, d = {} but the environment has K = {k}, d = {d}",
                m.num_arms,
                m.context_dim
            );
        }
        let f = &m.fitted.model;
        ctx.stage("evaluate", |_| {
            Ok(json!({
                "kind": "model",
                "n_test": test.len(),
                "test_mse": test.mse(f),
                "gstar": m.gstar,
                "excess_risk": known_excess(f, &env, &m.gstar, LossKind::Squared)?,
            }))
        })?
    } else {
        let path = a.policy.as_ref().expect("clap requires --model or --policy");
        let p: LearnedPolicy = read_json(ctx, path)?;
        let policy: &Policy = &p.fit.policy;
        policy.check(k, d)?;
        ctx.stage("evaluate", |_| {
            Ok(json!({
                "kind": "policy",
                "n_test": test.len(),
                "rewards": env.rewards(),
                "policy_value": test.policy_value(policy),
                "gstar": p.gstar,
                "regret": known_excess(policy, &env, &p.gstar, LossKind::PolicyValue)?,
            }))
        })?
    };
    ctx.stage("write", |ctx| ctx.write_json(&a.out, &report))?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

// bandit-bench

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub env: Option<String>,
    /// Comma-separated horizons.
    #[arg(long = "T", value_delimiter = ',')]
    pub horizons: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub schemes: Vec<WeightScheme>,
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<ModelKind>,
    /// Prefix of every output file.
    #[arg(long, default_value = "bench")]
    pub prefix: String,
}

fn run_bench(a: &BenchArgs, ctx: &mut RunContext) -> Result<()> {
    if ctx.apply_overrides {
        let b = &mut ctx.cfg.bench;
        if let Some(e) = &a.env {
            b.env = parse_env(e)?;
        }
        if !a.horizons.is_empty() {
            b.horizons = a.horizons.clone();
        }
        if let Some(r) = a.reps {
            b.n_reps = r;
        }
        if let Some(beta) = a.beta {
            b.schedule.beta = beta;
        }
        if let Some(n) = a.test_size {
            b.test_size = n;
        }
        if !a.schemes.is_empty() {
            b.schemes = a.schemes.clone();
        }
        if !a.models.is_empty() {
            b.models = a.models.iter().map(|k| ModelSpec::of_kind(*k)).collect();
        }
        b.validate()?;
    }
    let mut cfg = ctx.cfg.bench.clone();
    cfg.exec = ExecMode::Parallel;
    ctx.env_inputs(&cfg.env);
    let result = ctx.stage("replicate", |_| Ok(replicate_experiment(&cfg)?))?;
    let comparisons = compare_schemes(&result);
    let p = &a.prefix;
    ctx.stage("write", |ctx| {
        ctx.write_csv(Path::new(&format!("{p}_reps.csv")), &result.rows)?;
        ctx.write_csv(Path::new(&format!("{p}_aggregate.csv")), &result.aggregate)?;
        ctx.write_csv(Path::new(&format!("{p}_compare.csv")), &comparisons)?;
        let mut series = Vec::new();
        for spec in &cfg.models {
            for scheme in &cfg.schemes {
                let rows: Vec<(f64, f64, f64)> = result
                    .aggregate
                    .iter()
                    .filter(|r| r.model == spec.kind && r.scheme == *scheme)
                    .map(|r| (r.horizon as f64, r.mean, r.se.unwrap_or(0.0)))
                    .collect();
                let name = format!("plots/{p}_{}_{}.dat", spec.kind.name(), scheme.name());
                ctx.write_dat(Path::new(&name), "T mean_test_mse se", &rows)?;
                series.push((spec.kind.name(), scheme.name(), name));
            }
        }
        let mut gp = String::from(
            "# gnuplot script: test MSE against T, one panel per model.\n\
             set logscale x\nset xlabel 'T'\nset ylabel 'test MSE'\nset key outside\n",
        );
        for spec in &cfg.models {
            let model = spec.kind.name();
            gp.push_str(&format!("set title '{model}'\nset output '{p}_{model}.png'\nplot "));
            let lines: Vec<String> = series
                .iter()
                .filter(|(m, _, _)| *m == model)
                .map(|(_, s, file)| {
                    format!("'{}' using 1:2:3 with yerrorlines title '{s}'", file.trim_start_matches("plots/"))
                })
                .collect();
            gp.push_str(&lines.join(", \\\n     "));
            gp.push('\n');
        }
        ctx.write_text(Path::new(&format!("plots/{p}.gp")), &gp)
    })?;
    for c in &comparisons {
        println!("{:<5} T={:<7} iswerm vs {:<12} {}", c.model.name(), c.horizon, c.scheme.name(), c.verdict.name());
    }
    Ok(())
}

// rate-sweep

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    #[arg(long = "T", value_delimiter = ',')]
    pub horizons: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Keep the smallest horizon in the slope fit.
    #[arg(long)]
    pub fit_all: bool,
    #[arg(long, default_value = "sweep")]
    pub prefix: String,
}

#[derive(Serialize)]
struct SweepAggRow {
    beta: f64,
    #[serde(rename = "T")]
    horizon: usize,
    mean: f64,
    se: f64,
}

#[derive(Serialize)]
struct SweepFitRow {
    beta: f64,
    slope: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    level: Option<f64>,
    target: f64,
    fast_target: Option<f64>,
    fit_t_min: Option<usize>,
    fit_t_max: Option<usize>,
}

fn sweep_tables(r: &RateSweepResult) -> (Vec<SweepAggRow>, Vec<SweepFitRow>) {
    let mut agg = Vec::new();
    let mut fits = Vec::new();
    for f in &r.fits {
        for (i, &t) in r.horizons.iter().enumerate() {
            agg.push(SweepAggRow {
                beta: f.beta,
                horizon: t,
                mean: f.mean_loss[i],
                se: f.se[i],
            });
        }
        fits.push(SweepFitRow {
            beta: f.beta,
            slope: f.fit.as_ref().map(|x| x.slope),
            lo: f.fit.as_ref().map(|x| x.lo),
            hi: f.fit.as_ref().map(|x| x.hi),
            level: f.fit.as_ref().map(|x| x.level),
            target: f.target,
            fast_target: f.fast_target,
            fit_t_min: f.fit_horizons.first().copied(),
            fit_t_max: f.fit_horizons.last().copied(),
        });
    }
    (agg, fits)
}

fn run_sweep(a: &SweepArgs, ctx: &mut RunContext) -> Result<()> {
    if ctx.apply_overrides {
        let s = &mut ctx.cfg.sweep;
        if let Some(e) = &a.env {
            s.env = parse_env(e)?;
        }
        if !a.betas.is_empty() {
            s.betas = a.betas.clone();
        }
        if !a.horizons.is_empty() {
            s.horizons = a.horizons.clone();
        }
        if let Some(r) = a.reps {
            s.n_reps = r;
        }
        if a.fit_all {
            s.fit_skip_smallest = false;
        }
        s.validate()?;
    }
    let mut cfg = ctx.cfg.sweep.clone();
    cfg.exec = ExecMode::Parallel;
    ctx.env_inputs(&cfg.env);
    let result = ctx.stage("sweep", |_| Ok(run_rate_sweep(&cfg)?))?;
    let (agg, fits) = sweep_tables(&result);
    let p = &a.prefix;
    ctx.stage("write", |ctx| {
        ctx.write_csv(Path::new(&format!("{p}_reps.csv")), &result.rows)?;
        ctx.write_csv(Path::new(&format!("{p}_aggregate.csv")), &agg)?;
        ctx.write_csv(Path::new(&format!("{p}_fits.csv")), &fits)?;
        let mut gp = String::from(
            "# gnuplot script: mean loss against T on log-log axes.\n\
             set logscale xy\nset xlabel 'T'\nset ylabel 'mean loss'\nset output 'sweep.png'\nplot ",
        );
        let mut lines = Vec::new();
        for (i, f) in result.fits.iter().enumerate() {
            let rows: Vec<(f64, f64, f64)> = result
                .horizons
                .iter()
                .enumerate()
                .map(|(j, &t)| (t as f64, f.mean_loss[j], f.se[j]))
                .collect();
            let name = format!("{p}_beta{i}.dat");
            ctx.write_dat(Path::new("plots").join(&name).as_path(), &format!("beta={} T mean se", f.beta), &rows)?;
            lines.push(format!("'{name}' using 1:2:3 with yerrorlines title 'beta={:.3}'", f.beta));
        }
        gp.push_str(&lines.join(", \\\n     "));
        gp.push('\n');
        ctx.write_text(Path::new(&format!("plots/{p}.gp")), &gp)
    })?;
    for f in &fits {
        match (f.slope, f.lo, f.hi) {
            (Some(s), Some(lo), Some(hi)) => println!(
                "beta={:.4} slope={s:.4} [{lo:.4}, {hi:.4}] target={:.4}",
                f.beta, f.target
            ),
            _ => println!("beta={:.4} slope undefined (zero mean loss)", f.beta),
        }
    }
    Ok(())
}

// theory-check

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TheoryArgs {
    /// unbiasedness, lemma2, lemma3, supscaling or all.
    #[arg(long, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

fn run_theory(a: &TheoryArgs, ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.theory.clone();
    let seed = ctx.cfg.seed;
    let reports = ctx.stage(a.suite.name(), |_| Ok(run_suite(a.suite, seed, &cfg, ExecMode::Parallel)?))?;
    ctx.stage("write", |ctx| ctx.write_json(&a.out, &reports))?;
    for r in &reports {
        println!(
            "{} {} statistic={} threshold={}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold
        );
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", reports.len());
        ctx.passed = false;
    }
    Ok(())
}

// replay

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// `manifest.json` of an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to re-run; defaults to `replay/` next to the manifest.
    #[arg(long)]
    pub into: Option<PathBuf>,
}
