//! Synthetic shared-resource interference.
//!
//! Every task carries a resource-demand factor in `[0, 1]`. Its worst-case
//! resource utilization `R` is its own demand plus the largest combined
//! demand of whatever may run next to it under a given policy, and its
//! WCET is inflated linearly once the resource saturates:
//! `C = ceil(C* · max(R, 1))`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gangform::InterferenceOracle;
use crate::model::{Entity, Fraction, Task, Taskset, Ticks, VirtualGang};

/// Exact worst-case resource utilization of a task.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResourceUtilization(Ratio<u128>);

impl ResourceUtilization {
    pub fn new(value: Ratio<u128>) -> Self {
        ResourceUtilization(value)
    }

    pub fn from_demand(demand: Fraction) -> Self {
        ResourceUtilization(demand_ratio(demand))
    }

    pub fn value(&self) -> Ratio<u128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for ResourceUtilization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyKind {
    RtGang,
    RtgSync,
    GangFtp,
    Threaded,
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "rtgang" => Ok(PolicyKind::RtGang),
            "rtgsync" => Ok(PolicyKind::RtgSync),
            "gangftp" => Ok(PolicyKind::GangFtp),
            "threaded" => Ok(PolicyKind::Threaded),
            _ => Err(format!("unknown policy `{s}`")),
        }
    }
}

fn demand_ratio(demand: Fraction) -> Ratio<u128> {
    Ratio::new(demand.micros() as u128, Fraction::DENOM as u128)
}

/// `ceil(c_iso · max(R, 1))`.
pub fn scale_wcet(c_iso: Ticks, r: ResourceUtilization) -> Ticks {
    let factor = r.0.max(Ratio::from_integer(1));
    let scaled = (Ratio::from_integer(c_iso.get() as u128) * factor).ceil().to_integer();
    Ticks::new(scaled as u64)
}

/// Utilization of `task` inside a synchronized virtual gang: only its fellow
/// members can run beside it.
pub fn gang_resource_utilization(task: &Task, gang: &VirtualGang) -> Result<ResourceUtilization> {
    if !gang.contains(task.id()) {
        return Err(Error::TaskNotInGang(task.id().to_owned()));
    }
    let others: Fraction = gang.members().iter().filter(|t| t.id() != task.id()).map(Task::demand).sum();
    Ok(ResourceUtilization::from_demand(task.demand() + others))
}

/// Utilization of `task` under gang fixed-priority scheduling: its own demand
/// plus the most demanding set of other entities that fits on the remaining
/// `m - h` cores. Priorities are ignored, only capacity limits co-runners.
pub fn gangftp_resource_utilization(task: &Task, ts: &Taskset) -> Result<ResourceUtilization> {
    let subject = find(task, ts)?;
    Ok(gangftp_utilization(subject, ts))
}

/// Utilization of one thread of `task` under thread-level global scheduling:
/// each thread carries `demand / h`, and the `m - 1` most demanding other
/// threads (sibling threads included) may run beside it.
pub fn threaded_resource_utilization(task: &Task, ts: &Taskset) -> Result<ResourceUtilization> {
    let subject = find(task, ts)?;
    Ok(threaded_utilization(subject, ts))
}

fn find<'a>(task: &Task, ts: &'a Taskset) -> Result<&'a Entity> {
    ts.entities().iter().find(|e| e.id() == task.id()).ok_or_else(|| Error::TaskNotInTaskset(task.id().to_owned()))
}

fn gangftp_utilization(subject: &Entity, ts: &Taskset) -> ResourceUtilization {
    let capacity = (ts.m() - subject.h()) as usize;
    // 0/1 knapsack: weight = cores, value = demand.
    let mut best = vec![0u64; capacity + 1];
    for other in ts.entities().iter().filter(|e| e.id() != subject.id()) {
        let weight = other.h() as usize;
        let value = other.demand().micros();
        for c in (weight..=capacity).rev() {
            best[c] = best[c].max(best[c - weight] + value);
        }
    }
    ResourceUtilization::from_demand(subject.demand() + Fraction::from_micros(best[capacity]))
}

fn threaded_utilization(subject: &Entity, ts: &Taskset) -> ResourceUtilization {
    let per_thread = |e: &Entity| Ratio::new(e.demand().micros() as u128, e.h() as u128 * Fraction::DENOM as u128);
    let own = per_thread(subject);
    let mut others: Vec<Ratio<u128>> = Vec::new();
    for e in ts.entities() {
        let threads = if e.id() == subject.id() { e.h() - 1 } else { e.h() };
        others.extend(std::iter::repeat_n(per_thread(e), threads as usize));
    }
    others.sort_unstable_by(|a, b| b.cmp(a));
    let co_runners = (ts.m() as usize).saturating_sub(1);
    let total = others.iter().take(co_runners).fold(own, |acc, d| acc + d);
    ResourceUtilization(total)
}

/// Co-run WCET of a synchronized gang: the slowest member once every member
/// is inflated by the combined demand of the gang.
#[derive(Copy, Clone, Debug, Default)]
pub struct GangDemandModel;

impl InterferenceOracle for GangDemandModel {
    fn gang_wcet(&self, gang: &VirtualGang) -> Ticks {
        gang.members()
            .iter()
            .map(|t| scale_wcet(t.c_iso(), gang_resource_utilization(t, gang).expect("member of its own gang")))
            .max()
            .unwrap_or_default()
    }
}

/// Returns `ts` with every entity's `c_eff` set to its interference-inflated
/// WCET under `policy`.
///
/// Under the one-gang-at-a-time policies a plain task runs alone and only
/// gang members interfere with each other. Gangs are treated as single
/// co-runner units under the other two policies.
pub fn apply_interference(ts: &Taskset, policy: PolicyKind) -> Result<Taskset> {
    let entities = ts
        .entities()
        .iter()
        .map(|e| {
            let c_eff = match (policy, e) {
                (PolicyKind::RtGang | PolicyKind::RtgSync, Entity::Task(t)) => {
                    scale_wcet(t.c_iso(), ResourceUtilization::from_demand(t.demand()))
                }
                (PolicyKind::RtGang | PolicyKind::RtgSync, Entity::Gang(g)) => GangDemandModel.gang_wcet(g),
                (PolicyKind::GangFtp, _) => scale_wcet(e.c_iso(), gangftp_utilization(e, ts)),
                (PolicyKind::Threaded, _) => scale_wcet(e.c_iso(), threaded_utilization(e, ts)),
            };
            e.clone().with_c_eff(c_eff)
        })
        .collect::<Result<Vec<_>>>()?;
    ts.with_entities(entities)
}
