//! Command-line front end. `main` parses arguments and calls [`run`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agent::{Agent, AgentCheckpoint, MetricsRow, PlanReport};
use crate::brute::{self, Grid, Space};
use crate::config::{Resolved, RunConfig};
use crate::env::{Outcome, PruningEnv};
use crate::error::Error;
use crate::graph::{preset, preset_names, Plan};
use crate::perf::LatencyBreakdown;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "splitprune",
    version,
    about = "Plan edge/cloud split points and channel pruning"
)]
pub struct Cli {
    /// Worker threads for enumeration; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Warm up and train an agent, then write metrics, checkpoint and plan.
    Train(TrainArgs),
    /// Print the plan of a trained checkpoint.
    Plan(PlanArgs),
    /// Exhaustively search a rate grid.
    Brute(BruteArgs),
    /// Repeat brute or train across values of one parameter.
    Sweep(SweepArgs),
    /// List built-in models.
    Presets,
    /// Summarize a checkpoint.
    Inspect(InspectArgs),
}

/// Flags shared by commands that build an environment. They override the
/// config file, which overrides built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in model name (see `presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Model in the layer text format.
    #[arg(long, value_name = "PATH")]
    pub model_file: Option<PathBuf>,
    /// Link rate in KB/s.
    #[arg(long)]
    pub r_tran_kbps: Option<f64>,
    /// Edge slowdown relative to the cloud.
    #[arg(long)]
    pub r_comp: Option<f64>,
    /// Accuracy floor below which reward is zero.
    #[arg(long)]
    pub acc_req: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Learning episodes after warm-up.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Comma-separated rate levels.
    #[arg(long, value_delimiter = ',', conflicts_with = "fine")]
    pub levels: Option<Vec<f64>>,
    /// Levels every 0.05 up to r_max.
    #[arg(long)]
    pub fine: bool,
    /// Comma-separated partitions to try instead of all admissible ones.
    #[arg(long, value_delimiter = ',')]
    pub partitions: Option<Vec<usize>>,
    /// Refuse grids with more plans than this.
    #[arg(long, default_value_t = brute::DEFAULT_CAP)]
    pub cap: u128,
}

#[derive(Debug, Args)]
pub struct BruteArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Brute,
    Train,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// `name=v1,v2,...` with name one of r_comp, r_tran_kbps, acc_req, seed.
    pub spec: String,
    #[arg(long, value_enum, default_value_t = Backend::Brute)]
    pub backend: Backend,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub checkpoint: PathBuf,
}

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Config(_) => EXIT_CONFIG,
            Error::Refused { .. } => EXIT_REFUSED,
            _ => EXIT_RUNTIME,
        };
        Failure { code, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Anything that goes wrong while assembling the run is a config error.
fn config_stage<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|error| Failure {
        code: EXIT_CONFIG,
        error,
    })
}

fn load_config(c: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => config_stage(RunConfig::load(path))?,
        None => RunConfig::default(),
    };
    if c.preset.is_some() || c.model_file.is_some() {
        cfg.model.preset = c.preset.clone();
        cfg.model.file = c.model_file.clone();
    }
    if let Some(v) = c.r_tran_kbps {
        cfg.env.r_tran_kbps = v;
    }
    if let Some(v) = c.r_comp {
        cfg.env.r_comp = v;
    }
    if let Some(v) = c.acc_req {
        cfg.env.acc_req = v;
    }
    if let Some(v) = c.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = &c.out {
        cfg.output.dir = v.clone();
    }
    Ok(cfg)
}

fn grid_of(args: &GridArgs, r_max: f64) -> CliResult<Grid> {
    let mut grid = if args.fine {
        config_stage(Grid::uniform(0.05, r_max))?
    } else if let Some(levels) = &args.levels {
        Grid {
            levels: levels.clone(),
            partitions: None,
        }
    } else {
        Grid::default()
    };
    grid.partitions = args.partitions.clone();
    config_stage(grid.validate(r_max))?;
    Ok(grid)
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the effective config, plus the source file verbatim when one was given.
fn echo_config(cfg: &RunConfig, source: Option<&Path>) -> CliResult {
    create_dir(&cfg.output.dir)?;
    fs::write(cfg.output.dir.join("config.toml"), cfg.to_toml())?;
    if let Some(src) = source {
        fs::copy(src, cfg.output.dir.join("config.source.toml"))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PlanDoc<'a> {
    model: &'a str,
    partition: usize,
    rates: &'a [f64],
    accuracy: f64,
    reward: f64,
    latency: &'a LatencyBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    option_values: Option<&'a [f64]>,
}

impl<'a> PlanDoc<'a> {
    fn from_report(model: &'a str, r: &'a PlanReport) -> Self {
        PlanDoc {
            model,
            partition: r.plan.partition,
            rates: &r.plan.prune.rates,
            accuracy: r.accuracy,
            reward: r.reward,
            latency: &r.latency,
            option_values: Some(&r.option_values),
        }
    }

    fn from_outcome(model: &'a str, o: &'a Outcome) -> Self {
        PlanDoc {
            model,
            partition: o.plan.partition,
            rates: &o.plan.prune.rates,
            accuracy: o.accuracy,
            reward: o.reward,
            latency: &o.latency,
            option_values: None,
        }
    }

    fn text(&self) -> String {
        let rates: Vec<String> = self.rates.iter().map(|r| format!("{r:.4}")).collect();
        let l = self.latency;
        format!(
            "model      {}\npartition  {}\nrates      {}\naccuracy   {:.6}\nt_edge     {:.6e} s\nt_trans    {:.6e} s\nt_cloud    {:.6e} s\ntotal      {:.6e} s\nreward     {:.6}\n",
            self.model,
            self.partition,
            rates.join(" "),
            self.accuracy,
            l.t_edge,
            l.t_trans,
            l.t_cloud,
            l.total,
            self.reward
        )
    }

    fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes") + "\n"
    }
}

/// Runs one parsed command, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Plan(a) => cmd_plan(a, out),
        Command::Brute(a) => cmd_brute(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Presets => cmd_presets(out),
        Command::Inspect(a) => cmd_inspect(a, out),
    }
}

fn resolve(cfg: &RunConfig) -> CliResult<Resolved> {
    config_stage(cfg.resolve())
}

fn train_once(
    cfg: &RunConfig,
    res: &Resolved,
    metrics: Option<&Path>,
) -> CliResult<(Agent, PlanReport)> {
    let penv = PruningEnv::new(&res.graph, &res.env, res.oracle.as_ref(), cfg.train.r_max);
    let mut agent = config_stage(Agent::new(&penv, cfg.train.clone()))?;
    let mut writer = match metrics {
        Some(p) => Some(csv::Writer::from_path(p).map_err(Error::from)?),
        None => None,
    };
    let mut write_err = None;
    agent.train(&penv, |row: &MetricsRow| {
        if let (Some(w), None) = (writer.as_mut(), write_err.as_ref()) {
            if let Err(e) = w.serialize(row) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(Error::from(e).into());
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    let report = agent.plan(&penv)?;
    Ok((agent, report))
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    if let Some(n) = a.episodes {
        cfg.train.episodes = n;
    }
    let res = resolve(&cfg)?;
    echo_config(&cfg, a.common.config.as_deref())?;
    let dir = &cfg.output.dir;
    let (agent, report) = train_once(&cfg, &res, Some(&dir.join("metrics.csv")))?;
    agent.save(&dir.join("checkpoint.json"))?;
    let doc = PlanDoc::from_report(&res.graph.name, &report);
    fs::write(dir.join("plan.json"), doc.json())?;
    write!(out, "{}", doc.text())?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn cmd_plan(a: PlanArgs, out: &mut dyn Write) -> CliResult {
    let agent = Agent::load(&a.checkpoint)?;
    let mut cfg = load_config(&a.common)?;
    if cfg.model.preset.is_none() && cfg.model.file.is_none() {
        cfg.model.preset = Some(agent.to_checkpoint().graph);
    }
    let res = resolve(&cfg)?;
    let penv = PruningEnv::new(
        &res.graph,
        &res.env,
        res.oracle.as_ref(),
        agent.config.r_max,
    );
    let report = agent.plan(&penv)?;
    let doc = PlanDoc::from_report(&res.graph.name, &report);
    let text = if a.json { doc.json() } else { doc.text() };
    write!(out, "{text}")?;
    Ok(())
}

fn cmd_brute(a: BruteArgs, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(&a.common)?;
    let res = resolve(&cfg)?;
    let grid = grid_of(&a.grid, cfg.train.r_max)?;
    let penv = PruningEnv::new(&res.graph, &res.env, res.oracle.as_ref(), cfg.train.r_max);
    let space = config_stage(Space::new(&penv, &grid))?;
    let all = space.all(a.grid.cap)?;
    let best = best_of(&all);
    echo_config(&cfg, a.common.config.as_deref())?;
    let dir = &cfg.output.dir;
    brute::write_csv(fs::File::create(dir.join("brute.csv"))?, &all)?;
    let doc = PlanDoc::from_outcome(&res.graph.name, best);
    fs::write(dir.join("best.json"), doc.json())?;
    let text = if a.json { doc.json() } else { doc.text() };
    write!(out, "{text}")?;
    if !a.json {
        writeln!(out, "evaluated  {} plans", all.len())?;
    }
    Ok(())
}

/// First maximum in index order, the same tie rule as [`Space::best`].
fn best_of(all: &[Outcome]) -> &Outcome {
    let mut best = &all[0];
    for o in &all[1..] {
        if o.reward > best.reward {
            best = o;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepParam {
    RComp,
    RTranKbps,
    AccReq,
    Seed,
}

fn parse_sweep(spec: &str) -> crate::Result<(SweepParam, &str, Vec<f64>)> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep spec '{spec}' is not name=v1,v2,...")))?;
    let name = name.trim();
    let param = match name {
        "r_comp" => SweepParam::RComp,
        "r_tran_kbps" => SweepParam::RTranKbps,
        "acc_req" => SweepParam::AccReq,
        "seed" => SweepParam::Seed,
        _ => {
            return Err(Error::NotFound {
                what: format!("sweep parameter '{name}'"),
                valid: ["r_comp", "r_tran_kbps", "acc_req", "seed"]
                    .map(String::from)
                    .to_vec(),
            })
        }
    };
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad sweep value '{}'", v.trim())))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if param == SweepParam::Seed && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(Error::Config(
            "seed values must be non-negative integers".into(),
        ));
    }
    Ok((param, name, values))
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> CliResult {
    let base = load_config(&a.common)?;
    let (param, name, values) = config_stage(parse_sweep(&a.spec))?;
    echo_config(&base, a.common.config.as_deref())?;
    let path = base.output.dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record([
        "param",
        "value",
        "partition",
        "rates",
        "acc",
        "t_edge",
        "t_trans",
        "t_cloud",
        "reward",
    ])
    .map_err(Error::from)?;
    for v in values {
        let mut cfg = base.clone();
        match param {
            SweepParam::RComp => cfg.env.r_comp = v,
            SweepParam::RTranKbps => cfg.env.r_tran_kbps = v,
            SweepParam::AccReq => cfg.env.acc_req = v,
            SweepParam::Seed => cfg.train.seed = v as u64,
        }
        if let Some(n) = a.episodes {
            cfg.train.episodes = n;
        }
        let res = resolve(&cfg)?;
        let (plan, acc, lat, reward): (Plan, f64, LatencyBreakdown, f64) = match a.backend {
            Backend::Brute => {
                let grid = grid_of(&a.grid, cfg.train.r_max)?;
                let penv =
                    PruningEnv::new(&res.graph, &res.env, res.oracle.as_ref(), cfg.train.r_max);
                let o = brute::enumerate_best(&penv, &grid, a.grid.cap)?;
                (o.plan, o.accuracy, o.latency, o.reward)
            }
            Backend::Train => {
                let (_, r) = train_once(&cfg, &res, None)?;
                (r.plan, r.accuracy, r.latency, r.reward)
            }
        };
        let rates: Vec<String> = plan.prune.rates.iter().map(|r| r.to_string()).collect();
        w.write_record([
            name.to_string(),
            v.to_string(),
            plan.partition.to_string(),
            rates.join(";"),
            acc.to_string(),
            lat.t_edge.to_string(),
            lat.t_trans.to_string(),
            lat.t_cloud.to_string(),
            reward.to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    drop(w);
    out.write_all(&fs::read(&path)?)?;
    Ok(())
}

fn cmd_presets(out: &mut dyn Write) -> CliResult {
    writeln!(
        out,
        "{:<10} {:>6} {:>5} {:>7} {:>12}",
        "name", "layers", "convs", "options", "GFLOPs"
    )?;
    for name in preset_names() {
        let g = preset(&name)?;
        writeln!(
            out,
            "{:<10} {:>6} {:>5} {:>7} {:>12.4}",
            name,
            g.len(),
            g.conv_count(),
            g.admissible_partitions().len(),
            g.total_flops() as f64 / 1e9
        )?;
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs, out: &mut dyn Write) -> CliResult {
    let text = fs::read_to_string(&a.checkpoint)?;
    let ck: AgentCheckpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("agent checkpoint: {e}"),
    })?;
    let agent = Agent::from_checkpoint(ck.clone())?;
    let params: usize = agent.q_net.parameter_count()
        + agent
            .actors
            .iter()
            .map(|a| a.parameter_count())
            .sum::<usize>();
    writeln!(out, "format             {} v{}", ck.format, ck.version)?;
    writeln!(out, "model              {}", ck.graph)?;
    writeln!(out, "layers / convs     {} / {}", ck.layers, ck.convs)?;
    writeln!(out, "options            {:?}", ck.partitions)?;
    writeln!(out, "learning episodes  {}", ck.learning_episodes)?;
    writeln!(out, "noise scale        {:.6}", agent.noise_scale())?;
    writeln!(out, "reward scale       {:.6}", ck.reward_scale)?;
    writeln!(out, "seed               {}", ck.config.seed)?;
    writeln!(out, "online parameters  {params}")?;
    Ok(())
}
