//! Acceptance-ratio sweeps over generated tasksets.
//!
//! Every utilization point draws `tasksets_per_point` tasksets from seeds
//! derived from `(seed, point, index)`, and every policy judges the same
//! tasksets. One-gang-at-a-time policies are judged by response-time
//! analysis. `GANG_FTP_SIM` and `THREADED_SIM` are judged by simulating the
//! synchronous release over the (capped) hyperperiod: a miss-free run is a
//! necessary condition only, so those curves are optimistic.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::schedulability_test;
use crate::error::Result;
use crate::gangform::{form_taskset, Algorithm, InterferenceOracle, NoInterference, DEFAULT_TOLERANCE};
use crate::generator::{generate_taskset, GenSpec, TasksetType};
use crate::interference::{apply_interference, GangDemandModel, PolicyKind};
use crate::model::{Fraction, Taskset, Ticks};
use crate::simulator::{hyperperiod, simulate, EventKind, SimConfig, SimPolicy};

/// Horizon cap for simulation-based verdicts in sweeps.
pub const SWEEP_HORIZON_CAP: Ticks = Ticks::new(100_000);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepPolicy {
    RtGang,
    RtgSyncBfc,
    RtgSyncGpc,
    GangFtpSim,
    ThreadedSim,
}

impl SweepPolicy {
    pub const ALL: [SweepPolicy; 5] = [
        SweepPolicy::RtGang,
        SweepPolicy::RtgSyncBfc,
        SweepPolicy::RtgSyncGpc,
        SweepPolicy::GangFtpSim,
        SweepPolicy::ThreadedSim,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepPolicy::RtGang => "RT_GANG",
            SweepPolicy::RtgSyncBfc => "RTG_SYNC_BFC",
            SweepPolicy::RtgSyncGpc => "RTG_SYNC_GPC",
            SweepPolicy::GangFtpSim => "GANG_FTP_SIM",
            SweepPolicy::ThreadedSim => "THREADED_SIM",
        }
    }
}

impl fmt::Display for SweepPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.to_ascii_uppercase().replace('-', "_");
        SweepPolicy::ALL
            .into_iter()
            .find(|p| p.label() == key || p.label().replace('_', "") == key.replace('_', ""))
            .ok_or_else(|| format!("unknown sweep policy `{s}`"))
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub m: u32,
    pub taskset_type: TasksetType,
    pub utils: Vec<Fraction>,
    pub tasksets_per_point: usize,
    pub policies: Vec<SweepPolicy>,
    /// Interference settings to evaluate (`true` = on).
    pub interference: Vec<bool>,
    /// Fixed number of tasks per period instead of the default range.
    pub tasks_per_period: Option<u32>,
    pub seed: u64,
    pub tolerance: Fraction,
    pub horizon_cap: Ticks,
}

impl SweepSpec {
    pub fn new(m: u32, taskset_type: TasksetType) -> SweepSpec {
        SweepSpec {
            m,
            taskset_type,
            utils: default_grid(m),
            tasksets_per_point: 500,
            policies: SweepPolicy::ALL.to_vec(),
            interference: vec![false, true],
            tasks_per_period: None,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            horizon_cap: SWEEP_HORIZON_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(crate::Error::InvalidSpec(msg.to_owned()));
        if self.utils.is_empty() {
            return bad("utilization grid is empty");
        }
        if self.tasksets_per_point == 0 {
            return bad("tasksets_per_point must be at least 1");
        }
        if self.policies.is_empty() || self.interference.is_empty() {
            return bad("no policy or interference setting selected");
        }
        Ok(())
    }

    fn gen_spec(&self, util: Fraction, seed: u64) -> GenSpec {
        let spec = GenSpec::new(self.m, util, self.taskset_type, seed);
        match self.tasks_per_period {
            Some(n) => spec.with_tasks_per_period(n),
            None => spec,
        }
    }
}

/// `0.5, 0.75, ..., m`.
pub fn default_grid(m: u32) -> Vec<Fraction> {
    let step = Fraction::DENOM / 4;
    (2..=4 * m as u64).map(|i| Fraction::from_micros(i * step)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub util: f64,
    pub policy: SweepPolicy,
    pub taskset_type: TasksetType,
    pub interference: bool,
    pub accept_ratio: f64,
    pub n: usize,
}

/// SplitMix64 finalizer over the point coordinates.
pub fn derive_seed(seed: u64, point: usize, index: usize) -> u64 {
    let mut z = seed ^ ((point as u64) << 32) ^ index as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let combos: Vec<(SweepPolicy, bool)> =
        spec.policies.iter().flat_map(|&p| spec.interference.iter().map(move |&i| (p, i))).collect();
    let jobs: Vec<(usize, usize)> =
        (0..spec.utils.len()).flat_map(|p| (0..spec.tasksets_per_point).map(move |k| (p, k))).collect();

    let verdicts: Vec<Vec<bool>> = jobs
        .par_iter()
        .map(|&(point, k)| {
            let ts = generate_taskset(&spec.gen_spec(spec.utils[point], derive_seed(spec.seed, point, k)))?;
            combos.iter().map(|&(policy, on)| accepts(&ts, policy, on, spec.tolerance, spec.horizon_cap)).collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (point, util) in spec.utils.iter().enumerate() {
        let chunk = &verdicts[point * spec.tasksets_per_point..(point + 1) * spec.tasksets_per_point];
        for (c, &(policy, interference)) in combos.iter().enumerate() {
            let accepted = chunk.iter().filter(|v| v[c]).count();
            rows.push(SweepRow {
                util: util.to_f64(),
                policy,
                taskset_type: spec.taskset_type,
                interference,
                accept_ratio: accepted as f64 / spec.tasksets_per_point as f64,
                n: spec.tasksets_per_point,
            });
        }
    }
    Ok(rows)
}

/// Runs the sweep on a pool of `workers` threads (`None` = rayon's default).
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::Error::InvalidSpec(e.to_string()))?;
            pool.install(|| run_sweep(spec))
        }
        None => run_sweep(spec),
    }
}

/// Whether `ts` is deemed schedulable under `policy`.
pub fn accepts(
    ts: &Taskset,
    policy: SweepPolicy,
    interference: bool,
    tolerance: Fraction,
    horizon_cap: Ticks,
) -> Result<bool> {
    match policy {
        SweepPolicy::RtGang => {
            let ts = if interference { apply_interference(ts, PolicyKind::RtGang)? } else { ts.clone() };
            Ok(schedulability_test(&ts).schedulable)
        }
        SweepPolicy::RtgSyncBfc | SweepPolicy::RtgSyncGpc => {
            let algorithm = if policy == SweepPolicy::RtgSyncBfc { Algorithm::Bfc } else { Algorithm::Gpc };
            let oracle: &dyn InterferenceOracle = if interference { &GangDemandModel } else { &NoInterference };
            let (formed, _) = form_taskset(ts, algorithm, oracle, tolerance, true)?;
            Ok(schedulability_test(&formed).schedulable)
        }
        SweepPolicy::GangFtpSim | SweepPolicy::ThreadedSim => {
            let (kind, sim) = if policy == SweepPolicy::GangFtpSim {
                (PolicyKind::GangFtp, SimPolicy::GangFtp)
            } else {
                (PolicyKind::Threaded, SimPolicy::Threaded)
            };
            let ts = if interference { apply_interference(ts, kind)? } else { ts.clone() };
            simulation_feasible(&ts, sim, horizon_cap)
        }
    }
}

fn simulation_feasible(ts: &Taskset, policy: SimPolicy, horizon_cap: Ticks) -> Result<bool> {
    if ts.entities().iter().any(|e| e.wcet() > e.period()) || ts.utilization() > ts.m() as f64 {
        return Ok(false);
    }
    // Capping is routine here, so pass the horizon explicitly instead of
    // letting the simulator warn for every taskset.
    let max_period = ts.entities().iter().map(|e| e.period()).max().unwrap_or_default();
    let horizon = hyperperiod(ts).map_or(horizon_cap, |h| h.min(horizon_cap)).max(max_period);
    let mut cfg = SimConfig::new(policy).with_horizon(horizon);
    cfg.stop_on_first_miss = true;
    let trace = simulate(ts, &cfg)?;
    Ok(!trace.events.iter().any(|e| e.kind == EventKind::DeadlineMiss))
}

/// Columns: `util,policy,type,interference,accept_ratio,n`.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["util", "policy", "type", "interference", "accept_ratio", "n"])?;
    for r in rows {
        writer.write_record([
            format!("{:.2}", r.util),
            r.policy.label().to_owned(),
            r.taskset_type.to_string(),
            if r.interference { "on" } else { "off" }.to_owned(),
            format!("{:.4}", r.accept_ratio),
            r.n.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Looks up the acceptance ratio of one curve point.
pub fn ratio_at(rows: &[SweepRow], util: f64, policy: SweepPolicy, interference: bool) -> Option<f64> {
    rows.iter()
        .find(|r| (r.util - util).abs() < 1e-9 && r.policy == policy && r.interference == interference)
        .map(|r| r.accept_ratio)
}
