//! Command-line front end.
//!
//! Every stage reads and writes files (or stdin/stdout), so a pipeline looks
//! like `generate | form | analyze` with intermediate JSON tasksets.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::schedulability_test;
use crate::error::{Error, Result};
use crate::experiment::{run_sweep_with_workers, write_csv, SweepPolicy, SweepSpec, SWEEP_HORIZON_CAP};
use crate::gangform::{config_count_bound, form_taskset, stirling2, Algorithm, InterferenceOracle, NoInterference};
use crate::generator::{generate_taskset, GenSpec, TasksetType};
use crate::interference::{apply_interference, GangDemandModel, PolicyKind};
use crate::model::{Fraction, Taskset, Ticks};
use crate::simulator::{makespan, miss_stats, simulate, write_gantt_csv, SimConfig, SimPolicy, DEFAULT_HORIZON_CAP};

#[derive(Debug, Parser)]
#[command(name = "vgang", version, about = "Virtual-gang formation, analysis and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random taskset.
    Generate(GenerateArgs),
    /// Form virtual gangs from same-period tasks.
    Form(FormArgs),
    /// Response-time analysis under one-gang-at-a-time scheduling.
    Analyze(AnalyzeArgs),
    /// Simulate a taskset and report makespan and deadline misses.
    Simulate(SimulateArgs),
    /// Acceptance-ratio sweep over utilization.
    Sweep(SweepArgs),
    /// Stirling numbers of the second kind and configuration counts.
    Stirling(StirlingArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgArg {
    Bfc,
    Gpc,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TypeArg {
    Light,
    Mixed,
    Heavy,
}

impl From<TypeArg> for TasksetType {
    fn from(t: TypeArg) -> TasksetType {
        match t {
            TypeArg::Light => TasksetType::Light,
            TypeArg::Mixed => TasksetType::Mixed,
            TypeArg::Heavy => TasksetType::Heavy,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long = "type", value_enum, default_value = "mixed")]
    pub taskset_type: TypeArg,
    /// Target total utilization (sum of h * C / T).
    #[arg(long)]
    pub util: f64,
    /// Fixed number of tasks per period (default: uniform in [2, 5]).
    #[arg(long)]
    pub n_per_period: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FormArgs {
    /// Taskset JSON (`-` for stdin).
    #[arg(default_value = "-")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "bfc")]
    pub alg: AlgArg,
    #[arg(long, default_value_t = 0.2)]
    pub tolerance: f64,
    /// Measure gang WCETs with the co-runner interference model.
    #[arg(long, value_enum, default_value = "on")]
    pub interference: Switch,
    /// Fail instead of falling back to greedy packing when brute force is too large.
    #[arg(long)]
    pub no_fallback: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(default_value = "-")]
    pub input: PathBuf,
    /// Inflate WCETs with the gang interference model before the analysis.
    #[arg(long, value_enum, default_value = "off")]
    pub interference: Switch,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(default_value = "-")]
    pub input: PathBuf,
    /// rtgang, rtgsync, unsync, gangftp or threaded.
    #[arg(long, default_value = "rtgang")]
    pub policy: SimPolicy,
    /// Simulated time; defaults to one hyperperiod.
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP.get())]
    pub horizon_cap: u64,
    /// Release offset as `ID=TICKS`; repeatable.
    #[arg(long = "offset", value_parser = parse_offset)]
    pub offsets: Vec<(String, u64)>,
    #[arg(long)]
    pub non_preemptive: bool,
    #[arg(long, default_value_t = 0)]
    pub preemption_cost: u64,
    /// Inflate WCETs with the interference model matching the policy.
    #[arg(long, value_enum, default_value = "off")]
    pub interference: Switch,
    /// Event trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Execution intervals as CSV.
    #[arg(long)]
    pub gantt: Option<PathBuf>,
    /// Summary JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 8)]
    pub m: u32,
    #[arg(long = "type", value_enum, default_value = "mixed")]
    pub taskset_type: TypeArg,
    /// Comma-separated utilization points (default 0.5 to m in steps of 0.25).
    #[arg(long, value_delimiter = ',')]
    pub util: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub tasksets_per_point: usize,
    /// Comma-separated subset of RT_GANG, RTG_SYNC_BFC, RTG_SYNC_GPC, GANG_FTP_SIM, THREADED_SIM.
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<SweepPolicy>,
    /// Evaluate only this setting (default: both).
    #[arg(long, value_enum)]
    pub interference: Option<Switch>,
    #[arg(long)]
    pub n_per_period: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub tolerance: f64,
    /// Simulation horizon cap for the SIM policies.
    #[arg(long, default_value_t = SWEEP_HORIZON_CAP.get())]
    pub horizon_cap: u64,
    #[arg(long, env = "VGANG_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StirlingArgs {
    pub n: u32,
    /// Number of blocks; omit together with `--m` for the configuration count.
    pub k: Option<u32>,
    /// Cores: print the number of viable configurations of `n` single-core tasks.
    #[arg(long)]
    pub m: Option<u32>,
}

fn parse_offset(s: &str) -> std::result::Result<(String, u64), String> {
    let (id, t) = s.split_once('=').ok_or_else(|| format!("expected ID=TICKS, got `{s}`"))?;
    let t = t.parse().map_err(|e| format!("bad offset `{t}`: {e}"))?;
    Ok((id.to_owned(), t))
}

fn fraction(name: &str, value: f64) -> Result<Fraction> {
    Fraction::from_f64(value).ok_or_else(|| Error::InvalidSpec(format!("{name} must be a finite non-negative number")))
}

fn read_input(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(path)?;
    }
    Ok(text)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn with_extra(ts: &Taskset, key: &str, extra: Value) -> Result<String> {
    let mut doc = serde_json::to_value(ts)?;
    doc[key] = extra;
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Form(a) => cmd_form(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Stirling(a) => cmd_stirling(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut spec = GenSpec::new(a.m, fraction("--util", a.util)?, a.taskset_type.into(), a.seed);
    if let Some(n) = a.n_per_period {
        spec = spec.with_tasks_per_period(n);
    }
    let ts = generate_taskset(&spec)?;
    write_output(a.out.as_deref(), &with_extra(&ts, "gen_spec", serde_json::to_value(&spec)?)?)
}

fn cmd_form(a: FormArgs) -> Result<()> {
    let ts = Taskset::from_json(&read_input(&a.input)?)?;
    let algorithm = match a.alg {
        AlgArg::Bfc => Algorithm::Bfc,
        AlgArg::Gpc => Algorithm::Gpc,
    };
    let oracle: &dyn InterferenceOracle = match a.interference {
        Switch::On => &GangDemandModel,
        Switch::Off => &NoInterference,
    };
    let (formed, provenance) =
        form_taskset(&ts, algorithm, oracle, fraction("--tolerance", a.tolerance)?, !a.no_fallback)?;
    write_output(a.out.as_deref(), &with_extra(&formed, "provenance", serde_json::to_value(provenance)?)?)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let mut ts = Taskset::from_json(&read_input(&a.input)?)?;
    if a.interference == Switch::On {
        ts = apply_interference(&ts, PolicyKind::RtgSync)?;
    }
    write_output(a.out.as_deref(), &(schedulability_test(&ts).to_json()? + "\n"))
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut ts = Taskset::from_json(&read_input(&a.input)?)?;
    if a.interference == Switch::On {
        let kind = match a.policy {
            SimPolicy::RtGang => PolicyKind::RtGang,
            SimPolicy::RtgSync | SimPolicy::UnsyncVgang => PolicyKind::RtgSync,
            SimPolicy::GangFtp => PolicyKind::GangFtp,
            SimPolicy::Threaded => PolicyKind::Threaded,
        };
        ts = apply_interference(&ts, kind)?;
    }
    let mut cfg = SimConfig::new(a.policy);
    cfg.horizon = a.horizon.map(Ticks::new);
    cfg.horizon_cap = Ticks::new(a.horizon_cap);
    cfg.preemptive = !a.non_preemptive;
    cfg.preemption_cost = Ticks::new(a.preemption_cost);
    for (id, t) in a.offsets {
        cfg = cfg.with_offset(id, Ticks::new(t));
    }
    let trace = simulate(&ts, &cfg)?;
    if let Some(path) = &a.trace {
        trace.write_jsonl(io::BufWriter::new(fs::File::create(path)?))?;
    }
    if let Some(path) = &a.gantt {
        write_gantt_csv(&trace, fs::File::create(path)?)?;
    }
    let stats = miss_stats(&trace);
    let summary = json!({
        "policy": a.policy.to_string(),
        "end": trace.end,
        "makespan": makespan(&trace).ok(),
        "misses": stats.misses,
        "misses_per_entity": stats.per_entity,
        "max_lateness": stats.max_lateness,
    });
    write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&summary)? + "\n"))
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut spec = SweepSpec::new(a.m, a.taskset_type.into());
    if !a.util.is_empty() {
        spec.utils = a.util.iter().map(|&u| fraction("--util", u)).collect::<Result<_>>()?;
    }
    if !a.policies.is_empty() {
        spec.policies = a.policies;
    }
    if let Some(s) = a.interference {
        spec.interference = vec![s == Switch::On];
    }
    spec.tasksets_per_point = a.tasksets_per_point;
    spec.tasks_per_period = a.n_per_period;
    spec.seed = a.seed;
    spec.tolerance = fraction("--tolerance", a.tolerance)?;
    spec.horizon_cap = Ticks::new(a.horizon_cap);
    let rows = run_sweep_with_workers(&spec, a.workers)?;
    match &a.out {
        Some(path) => write_csv(&rows, fs::File::create(path)?),
        None => write_csv(&rows, io::stdout().lock()),
    }
}

fn cmd_stirling(a: StirlingArgs) -> Result<()> {
    let doc = match (a.k, a.m) {
        (Some(k), None) => json!({ "n": a.n, "k": k, "value": stirling2(a.n, k)? }),
        (None, Some(m)) => json!({ "n": a.n, "m": m, "configs": config_count_bound(a.n, m)? }),
        _ => return Err(Error::InvalidSpec("give exactly one of K or --m".into())),
    };
    write_output(None, &(serde_json::to_string(&doc)? + "\n"))
}

/// Machine-readable error document printed on stderr.
pub fn error_json(err: &Error) -> String {
    json!({ "error": err.kind(), "message": err.to_string() }).to_string()
}
