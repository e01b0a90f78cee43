//! Random parallel tasksets for schedulability experiments.
//!
//! Tasks are produced in same-period groups: draw a period, draw how many
//! tasks share it, then draw each task's isolation WCET (a fraction of the
//! period), its parallelism and its resource demand. Groups are added until
//! the utilization target is met; the task that would overshoot is shrunk
//! to fill the remainder exactly and ends generation.
//!
//! The RNG is ChaCha8 seeded from a single `u64`, so a seed names the same
//! taskset on every platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Fraction, Task, Taskset, Ticks};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TasksetType {
    Light,
    Mixed,
    Heavy,
}

impl TasksetType {
    /// Inclusive range of per-task parallelism on `m` cores.
    pub fn core_range(self, m: u32) -> (u32, u32) {
        let pivot = (3 * m).div_ceil(10).max(1);
        match self {
            TasksetType::Light => (1, pivot),
            TasksetType::Heavy => (pivot, m),
            TasksetType::Mixed => (1, m),
        }
    }
}

impl FromStr for TasksetType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "light" => Ok(TasksetType::Light),
            "mixed" => Ok(TasksetType::Mixed),
            "heavy" => Ok(TasksetType::Heavy),
            _ => Err(format!("unknown taskset type `{s}`")),
        }
    }
}

impl fmt::Display for TasksetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TasksetType::Light => "light",
            TasksetType::Mixed => "mixed",
            TasksetType::Heavy => "heavy",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub m: u32,
    pub util_target: Fraction,
    pub taskset_type: TasksetType,
    /// Inclusive range for the number of tasks drawn per period.
    pub tasks_per_period: (u32, u32),
    pub period_range: (u64, u64),
    /// Isolation WCET as a fraction of the period, inclusive.
    pub wcet_fraction_range: (Fraction, Fraction),
    pub seed: u64,
}

impl GenSpec {
    pub fn new(m: u32, util_target: Fraction, taskset_type: TasksetType, seed: u64) -> GenSpec {
        GenSpec {
            m,
            util_target,
            taskset_type,
            tasks_per_period: (2, 5),
            period_range: (10, 1500),
            wcet_fraction_range: (Fraction::from_ratio(1, 10), Fraction::from_ratio(1, 5)),
            seed,
        }
    }

    pub fn with_tasks_per_period(mut self, n: u32) -> GenSpec {
        self.tasks_per_period = (n, n);
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_owned()));
        if self.m == 0 {
            return bad("m must be positive");
        }
        let (n_lo, n_hi) = self.tasks_per_period;
        if n_lo == 0 || n_lo > n_hi {
            return bad("tasks_per_period must be a non-empty range of positive counts");
        }
        let (p_lo, p_hi) = self.period_range;
        if p_lo == 0 || p_lo > p_hi {
            return bad("period_range must be a non-empty range of positive periods");
        }
        let (f_lo, f_hi) = self.wcet_fraction_range;
        if f_lo == Fraction::ZERO || f_lo > f_hi || f_hi > Fraction::ONE {
            return bad("wcet_fraction_range must lie within (0, 1]");
        }
        Ok(())
    }
}

/// Inclusive WCET bounds in ticks for `period`, at least one tick wide.
fn wcet_bounds(period: u64, (lo, hi): (Fraction, Fraction)) -> (u64, u64) {
    let scaled = |f: Fraction| period as u128 * f.micros() as u128;
    let denom = Fraction::DENOM as u128;
    let low = (scaled(lo).div_ceil(denom) as u64).max(1);
    let high = ((scaled(hi) / denom) as u64).max(low);
    (low, high)
}

pub fn generate_taskset(spec: &GenSpec) -> Result<Taskset> {
    spec.validate()?;
    let target = spec.util_target.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h_lo, h_hi) = spec.taskset_type.core_range(spec.m);
    let mut tasks = Vec::new();
    let mut remaining = target;
    let mut group = 0;

    'groups: while remaining > 0.0 {
        let period = rng.gen_range(spec.period_range.0..=spec.period_range.1);
        let count = rng.gen_range(spec.tasks_per_period.0..=spec.tasks_per_period.1);
        let (c_lo, c_hi) = wcet_bounds(period, spec.wcet_fraction_range);
        for j in 0..count {
            let c = rng.gen_range(c_lo..=c_hi);
            let h = rng.gen_range(h_lo..=h_hi);
            let demand = Fraction::from_micros(rng.gen_range(0..=Fraction::DENOM));
            let id = format!("g{group}t{j}");
            let u = (c * h as u64) as f64 / period as f64;
            if u >= remaining - 1e-12 {
                // Shrink to the remainder; a fill below one tick is dropped.
                let fill = ((remaining * period as f64 / h as f64) + 1e-9).floor() as u64;
                let fill = fill.min(c);
                if fill >= 1 {
                    tasks.push(Task::new(id, h, Ticks::new(fill), Ticks::new(period), demand)?);
                }
                break 'groups;
            }
            tasks.push(Task::new(id, h, Ticks::new(c), Ticks::new(period), demand)?);
            remaining -= u;
        }
        group += 1;
    }

    let ts = Taskset::from_tasks(tasks, spec.m)?.with_util_target(spec.util_target);
    let got = ts.utilization();
    // Only the final fill is rounded, and by less than h / T.
    if got > target + 1e-9 || target - got > spec.m as f64 / spec.period_range.0 as f64 {
        return Err(Error::UnreachableTarget { target, got });
    }
    Ok(ts)
}
