//! Argument parsing and command dispatch for the `branchruin` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use branchruin_core::flows::Boundary;
use branchruin_core::ruin::{BisectionConfig, CriticalVerdict};
use branchruin_core::tree::Tree;
use branchruin_core::walker::{Driver, StopRule};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, PercolationMode};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::format::{parse_tree, write_tree, HEADER};
use crate::scheme::SchemeConfig;
use crate::source::{Loaded, TreeSource};
use crate::sweep::{phase_sweep, PhaseSweepParams};
use crate::VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "branchruin",
    version,
    about = "Reinforced walks, ruin indices, percolation and flows on rooted trees"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or convert tree files.
    #[command(subcommand)]
    Tree(TreeCommand),
    /// Critical indices of a tree or of a tree with weights.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Monte Carlo walks and percolations.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Effective conductance, flow energy and the unit-flow construction.
    #[command(subcommand)]
    Flow(FlowCommand),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TreeArgs {
    /// `zd:D`, `regular:K`, `path`, `profile:a,b,..`, `gw:p0,p1,..`,
    /// `poly:p-1,p0,..` or a tree file.
    #[arg(long)]
    pub tree: TreeSource,
    /// Generations to build for generated trees.
    #[arg(long)]
    pub depth: Option<u32>,
}

impl TreeArgs {
    fn depth_or(&self, default: u32) -> u32 {
        self.depth.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BisectArgs {
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_lo: f64,
    #[arg(long, default_value_t = 64.0)]
    pub lambda_hi: f64,
}

impl BisectArgs {
    fn config(&self) -> BisectionConfig {
        BisectionConfig {
            lambda_lo: self.lambda_lo,
            lambda_hi: self.lambda_hi,
            tol: self.tol,
            ..BisectionConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum TreeCommand {
    /// Build a tree and write it in the text format.
    Gen(TreeArgs),
    /// Convert a tree between the text format and JSON.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvertArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub to: TreeFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub parents: Vec<Option<usize>>,
    pub depth_cap: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// RT index of the ruin profile.
    Rt(RtArgs),
    /// Branching-ruin number.
    Brr(IndexArgs),
    /// Branching number.
    Br(IndexArgs),
    /// Cutset criteria at a critical exponent.
    Critical(CriticalArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RtArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub scheme: SchemeConfig,
    #[command(flatten)]
    pub bisect: BisectArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IndexArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub bisect: BisectArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub delta_c: f64,
    /// `f(n) = ln(n + 1)^p`; 0 gives `f = 1`.
    #[arg(long, default_value_t = 0.0)]
    pub f_power: f64,
    #[command(flatten)]
    pub bisect: BisectArgs,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Independent walks from the root.
    Walk(WalkArgs),
    /// Percolation survival frequencies.
    Percolation(PercolationArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverArg {
    Direct,
    Rubin,
}

impl From<DriverArg> for Driver {
    fn from(d: DriverArg) -> Self {
        match d {
            DriverArg::Direct => Driver::Direct,
            DriverArg::Rubin => Driver::Rubin,
        }
    }
}

/// `depth:D,budget:B` plus `noreturn` to keep walking through the root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StopArg(pub StopRule);

impl FromStr for StopArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut rule = StopRule::budget(1_000_000).with_return();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once(':') {
                Some(("depth", v)) => rule.reach_depth = Some(v.parse().map_err(|_| format!("bad depth `{v}`"))?),
                Some(("budget", v)) => rule.budget = v.parse().map_err(|_| format!("bad budget `{v}`"))?,
                None if part == "noreturn" => rule.return_to_root = false,
                _ => return Err(format!("unknown stop condition `{part}`")),
            }
        }
        Ok(Self(rule))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub scheme: SchemeConfig,
    #[arg(long, value_enum, default_value = "direct")]
    pub driver: DriverArg,
    #[arg(long, default_value = "depth:200,budget:1000000")]
    pub stop: StopArg,
    #[arg(long, default_value_t = 200)]
    pub replicas: u64,
    /// Include every per-seed outcome in the JSON output.
    #[arg(long)]
    pub outcomes: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PercolationArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub scheme: SchemeConfig,
    #[arg(long, value_enum, default_value = "psi")]
    pub mode: PercolationMode,
    #[arg(long, default_value_t = 400)]
    pub trials: u64,
}

#[derive(Debug, Subcommand)]
pub enum FlowCommand {
    /// `C_eff` to the shorted level-k boundary at each doubling of k.
    Conductance(FlowArgs),
    /// Unit-strength energy of the unit-flow construction at each doubling.
    Energy(FlowArgs),
    /// The unit-flow construction at the full depth.
    Proptrans(FlowArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub scheme: SchemeConfig,
    #[arg(long, default_value_t = 1.5)]
    pub lambda: f64,
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// Sweep the reinforcement parameter across the phase transition.
    Phase(PhaseArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhaseArgs {
    /// JSON experiment config; other flags are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub tree: Option<TreeSource>,
    #[command(flatten)]
    pub scheme: SchemeConfig,
    /// Comma-separated δ grid.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Vec<f64>,
    #[arg(long)]
    pub rt_depth: Option<u32>,
    #[arg(long)]
    pub walk_replicas: Option<u64>,
    #[arg(long)]
    pub walk_budget: Option<u64>,
    #[arg(long)]
    pub walk_depth: Option<u32>,
    #[arg(long)]
    pub percolation_trials: Option<u64>,
    #[arg(long)]
    pub percolation_depth: Option<u32>,
}

impl PhaseArgs {
    fn config(&self, seed: u64) -> Result<ExperimentConfig, CliError> {
        if let Some(path) = &self.config {
            return ExperimentConfig::read(path);
        }
        let d = PhaseSweepParams::default();
        let rt_depth = self.rt_depth.unwrap_or(d.rt_depth);
        let sweep = PhaseSweepParams {
            deltas: self.deltas.clone(),
            rt_depth,
            walk_depth: self.walk_depth.unwrap_or(d.walk_depth),
            walk_budget: self.walk_budget.unwrap_or(d.walk_budget),
            walk_replicas: self.walk_replicas.unwrap_or(d.walk_replicas),
            percolation_depth: self.percolation_depth.unwrap_or(d.percolation_depth),
            percolation_trials: self.percolation_trials.unwrap_or(d.percolation_trials),
            conductance_depths: doublings(rt_depth),
            ..d
        };
        Ok(ExperimentConfig {
            tree: self.tree.clone().ok_or_else(|| CliError::Usage("--tree or --config is required".into()))?,
            scheme: self.scheme.clone(),
            seed,
            sweep,
            output: None,
        })
    }
}

/// `min(n, 2^8), ..., n` by doubling, always ending at `n`.
fn doublings(n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut k = 1u32;
    while k < n {
        if k >= n / 16 {
            out.push(k);
        }
        k = k.saturating_mul(2);
    }
    out.push(n);
    out
}

/// Wraps a result with the version string and the arguments that
/// produced it.
#[derive(Serialize)]
struct Report<'a, A: Serialize, T: Serialize> {
    version: &'static str,
    command: &'a str,
    seed: u64,
    args: &'a A,
    result: T,
}

struct Output<'a> {
    global: &'a Global,
}

impl Output<'_> {
    fn sink(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.global.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn emit<A: Serialize, T: Serialize>(
        &self,
        command: &str,
        args: &A,
        result: &T,
        text: impl FnOnce() -> String,
    ) -> Result<(), CliError> {
        let mut w = self.sink()?;
        if self.global.json {
            let report = Report { version: VERSION, command, seed: self.global.seed, args, result };
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        } else {
            write!(w, "{}", text())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("branchruin: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command. `Ok(4)` means the output was written but a
/// numerical diagnostic failed.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    let out = Output { global: g };
    match &cli.command {
        Command::Tree(TreeCommand::Gen(a)) => {
            let f = a.tree.load_explicit(a.depth_or(10), g.seed)?;
            let mut w = out.sink()?;
            if g.json {
                serde_json::to_writer_pretty(&mut w, &tree_json(&f.tree, f.weights.as_ref()))?;
                writeln!(w)?;
            } else {
                write_tree(&mut w, &f.tree, f.weights.as_ref().map(|(w, d)| (w.as_slice(), d.as_slice())))?;
            }
            w.flush()?;
            Ok(0)
        }
        Command::Tree(TreeCommand::Convert(a)) => convert(&out, a),
        Command::Analyze(cmd) => analyze(&out, g, cmd),
        Command::Simulate(SimulateCommand::Walk(a)) => {
            let stop = a.stop.0;
            let depth = stop.reach_depth.unwrap_or(a.tree.depth_or(200));
            let loaded = a.tree.tree.load(a.tree.depth_or(depth), g.seed)?;
            let scheme = a.scheme.resolve(loaded.file_scheme())?;
            let tree = analysis::walk_tree(&loaded, depth)?;
            let mut r = analysis::walks(&tree, &scheme, a.driver.into(), &stop, a.replicas, g.seed)?;
            if !a.outcomes {
                r.outcomes.clear();
                r.seeds.clear();
            }
            let sigma = r.sigma();
            out.emit("simulate walk", a, &r, || {
                format!(
                    "reached depth {depth}: {}/{} (frequency {:.4} ± {:.4})\n",
                    r.escaped, r.runs, r.frequency, sigma
                )
            })?;
            Ok(0)
        }
        Command::Simulate(SimulateCommand::Percolation(a)) => {
            let depth = a.tree.depth_or(1 << 12);
            let loaded = a.tree.tree.load(depth, g.seed)?;
            let scheme = a.scheme.resolve(loaded.file_scheme())?;
            let r = analysis::percolation(&loaded, &scheme, a.mode, a.scheme.delta, a.trials, depth, g.seed)?;
            out.emit("simulate percolation", a, &r, || {
                format!("survived to depth {}: {}/{} (frequency {:.4})\n", r.depth, r.survived, r.trials, r.frequency)
            })?;
            Ok(0)
        }
        Command::Flow(cmd) => flow(&out, g, cmd),
        Command::Sweep(SweepCommand::Phase(a)) => {
            let cfg = a.config(g.seed)?;
            let report = phase_sweep(&cfg)?;
            let json = report.to_json()?;
            match g.out.as_ref().or(cfg.output.as_ref()) {
                Some(p) => {
                    let json_path = p.with_extension("json");
                    std::fs::write(&json_path, format!("{json}\n"))?;
                    report.write_csv(File::create(p.with_extension("csv"))?)?;
                }
                None if g.json => println!("{json}"),
                None => report.write_csv(io::stdout().lock())?,
            }
            Ok(0)
        }
    }
}

fn tree_json(tree: &Tree, weights: Option<&(Vec<f64>, Vec<f64>)>) -> TreeJson {
    TreeJson {
        parents: tree.parents(),
        depth_cap: tree.depth_cap(),
        w: weights.map(|w| w.0.clone()),
        delta: weights.map(|w| w.1.clone()),
    }
}

fn convert(out: &Output<'_>, a: &ConvertArgs) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&a.input)?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("");
    let (tree, weights) = if first == HEADER {
        let f = parse_tree(text.as_bytes())?;
        (f.tree, f.weights)
    } else {
        let j: TreeJson = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: neither a tree file nor tree JSON: {e}", a.input.display())))?;
        let tree = Tree::from_parents(&j.parents)?;
        if j.depth_cap < tree.depth_cap() {
            return Err(CliError::Usage("depth_cap is below the deepest vertex".into()));
        }
        let weights = match (j.w, j.delta) {
            (Some(w), Some(d)) if w.len() == tree.len() && d.len() == tree.len() => Some((w, d)),
            (None, None) => None,
            _ => return Err(CliError::Usage("w and delta must both be present with one entry per vertex".into())),
        };
        (tree.with_depth_cap(j.depth_cap), weights)
    };
    let mut w = out.sink()?;
    match a.to {
        TreeFormat::Json => {
            serde_json::to_writer_pretty(&mut w, &tree_json(&tree, weights.as_ref()))?;
            writeln!(w)?;
        }
        TreeFormat::Text => write_tree(&mut w, &tree, weights.as_ref().map(|(x, y)| (x.as_slice(), y.as_slice())))?,
    }
    w.flush()?;
    Ok(0)
}

fn analyze(out: &Output<'_>, g: &Global, cmd: &AnalyzeCommand) -> Result<i32, CliError> {
    match cmd {
        AnalyzeCommand::Rt(a) => {
            let loaded = a.tree.tree.load(a.tree.depth_or(1 << 12), g.seed)?;
            let scheme = a.scheme.resolve(loaded.file_scheme())?;
            let e = analysis::rt(&loaded, &scheme, &a.bisect.config())?;
            out.emit("analyze rt", a, &e, || estimate_text("RT", &e))?;
            Ok(if e.decay_ok { 0 } else { 4 })
        }
        AnalyzeCommand::Brr(a) | AnalyzeCommand::Br(a) => {
            let is_brr = matches!(cmd, AnalyzeCommand::Brr(_));
            let loaded = a.tree.tree.load(a.tree.depth_or(1 << 12), g.seed)?;
            let e = if is_brr {
                analysis::brr(&loaded, &a.bisect.config())?
            } else {
                analysis::br(&loaded, &a.bisect.config())?
            };
            let (name, label) = if is_brr { ("analyze brr", "br_r") } else { ("analyze br", "br") };
            out.emit(name, a, &e, || estimate_text(label, &e))?;
            Ok(0)
        }
        AnalyzeCommand::Critical(a) => {
            let loaded = a.tree.tree.load(a.tree.depth_or(1 << 12), g.seed)?;
            let r = analysis::critical(&loaded, a.delta_c, a.f_power, &a.bisect.config())?;
            out.emit("analyze critical", a, &r, || {
                let v = match r.verdict {
                    CriticalVerdict::RecurrentCriterionMet => "recurrent criterion met",
                    CriticalVerdict::TransientCriterionMet => "transient criterion met",
                    CriticalVerdict::Inconclusive => "inconclusive",
                };
                format!("{v} (series exponent {:.3})\n", r.series_exponent)
            })?;
            Ok(0)
        }
    }
}

fn estimate_text(label: &str, e: &branchruin_core::ruin::Estimate) -> String {
    if e.decay_ok {
        format!("{label} ≈ {:.4} (bracket {:.4}..{:.4}, {} probes)\n", e.value, e.bracket.0, e.bracket.1, e.trace.len())
    } else {
        format!("{label} = inf (frontier scores do not decay)\n")
    }
}

fn flow(out: &Output<'_>, g: &Global, cmd: &FlowCommand) -> Result<i32, CliError> {
    let a = match cmd {
        FlowCommand::Conductance(a) | FlowCommand::Energy(a) | FlowCommand::Proptrans(a) => a,
    };
    let depth = a.tree.depth_or(1 << 10);
    let loaded = a.tree.tree.load(depth, g.seed)?;
    let depth = depth.min(loaded.depth_cap());
    let scheme = a.scheme.resolve(loaded.file_scheme())?;
    match cmd {
        FlowCommand::Conductance(_) => {
            let c = analysis::conductance(&loaded, &scheme, &doublings(depth), Boundary::Shorted)?;
            out.emit("flow conductance", a, &c, || c.iter().map(|(k, x)| format!("{k}\t{x:.6e}\n")).collect())?;
            Ok(0)
        }
        FlowCommand::Energy(_) => {
            let rows: Vec<analysis::ProptransSummary> = doublings(depth)
                .into_iter()
                .map(|k| analysis::proptrans(&loaded, &scheme, a.lambda, k))
                .collect::<Result<_, _>>()?;
            out.emit("flow energy", a, &rows, || {
                rows.iter().map(|r| format!("{}\t{:.6e}\t{:.6e}\n", r.depth, r.source, r.unit_energy)).collect()
            })?;
            Ok(0)
        }
        FlowCommand::Proptrans(_) => {
            let mut r = analysis::proptrans(&loaded, &scheme, a.lambda, depth)?;
            if matches!(loaded, Loaded::Spherical(_) | Loaded::Explicit(_)) && depth >= 1 << 10 {
                if let Ok(e) = analysis::rt(&loaded, &scheme, &BisectionConfig::default()) {
                    if e.decay_ok && a.lambda >= e.value {
                        r.warning = Some(format!("lambda {} is not below the RT estimate {:.3}", a.lambda, e.value));
                    }
                }
            }
            let failed = r.conservation_error > 1e-12;
            out.emit("flow proptrans", a, &r, || {
                let mut s = format!(
                    "source {:.6e}, energy {:.6e} (C_lambda {:.4}, within: {}), max prefix u {:.4} (within: {})\n",
                    r.source, r.energy, r.c_lambda, r.energy_within_bound, r.max_prefix_u, r.prefix_within_bound
                );
                if let Some(w) = &r.warning {
                    s.push_str(&format!("warning: {w}\n"));
                }
                s
            })?;
            Ok(if failed { 4 } else { 0 })
        }
    }
}
