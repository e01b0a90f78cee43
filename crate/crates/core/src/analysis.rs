//! Response-time analysis for one-gang-at-a-time scheduling.
//!
//! When at most one gang runs at any instant the multicore behaves as a
//! uniprocessor whose "jobs" are whole gangs, so the classic fixed-priority
//! fixed-point iteration is exact.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{Entity, Taskset, Ticks};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResponseTime {
    pub value: Ticks,
    /// False when the iteration passed the entity's period.
    pub converged: bool,
    pub iterations: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchedVerdict {
    pub schedulable: bool,
    pub per_entity: BTreeMap<String, ResponseTime>,
}

#[derive(Serialize)]
struct VerdictReport<'a> {
    schedulable: bool,
    response_times: BTreeMap<&'a str, u64>,
}

impl SchedVerdict {
    pub fn to_json(&self) -> serde_json::Result<String> {
        let report = VerdictReport {
            schedulable: self.schedulable,
            response_times: self.per_entity.iter().map(|(id, r)| (id.as_str(), r.value.get())).collect(),
        };
        serde_json::to_string_pretty(&report)
    }
}

/// Rate-monotonic priorities: shorter period first, then smaller WCET, then
/// id. The highest-priority entity receives the largest value; all values are
/// distinct.
pub fn assign_priorities(ts: &Taskset) -> Taskset {
    let mut order: Vec<usize> = (0..ts.len()).collect();
    let entities = ts.entities();
    order.sort_by(|&a, &b| {
        let key = |e: &Entity| (e.period(), e.wcet(), e.id().to_owned());
        key(&entities[a]).cmp(&key(&entities[b]))
    });
    let mut prioritized = entities.to_vec();
    let n = order.len() as i64;
    for (rank, &i) in order.iter().enumerate() {
        prioritized[i] = prioritized[i].clone().with_priority(n - rank as i64);
    }
    ts.with_entities(prioritized).expect("priorities do not affect validity")
}

/// Fixed-point iteration `R = C + Σ_hp ceil(R / T_j) · C_j`, seeded with `C`.
///
/// Stops at the first repeated value or as soon as the iterate exceeds the
/// entity's period.
pub fn response_time(entity: &Entity, higher_priority: &[&Entity]) -> ResponseTime {
    let wcet = entity.wcet();
    let period = entity.period();
    let mut current = wcet;
    let mut iterations = 0;
    if current > period {
        return ResponseTime { value: current, converged: false, iterations };
    }
    loop {
        iterations += 1;
        let next = wcet + higher_priority.iter().map(|hp| hp.wcet() * current.div_ceil(hp.period())).sum::<Ticks>();
        debug_assert!(next >= current, "response-time iterates must not decrease");
        if next == current {
            return ResponseTime { value: current, converged: true, iterations };
        }
        if next > period {
            return ResponseTime { value: next, converged: false, iterations };
        }
        current = next;
    }
}

/// Runs [`response_time`] for every entity against all entities of higher
/// (or equal) priority. Priorities are assigned first if any is missing.
pub fn schedulability_test(ts: &Taskset) -> SchedVerdict {
    let assigned;
    let ts = if ts.entities().iter().any(|e| e.priority().is_none()) {
        assigned = assign_priorities(ts);
        &assigned
    } else {
        ts
    };
    let mut per_entity = BTreeMap::new();
    let mut schedulable = true;
    for e in ts.entities() {
        let prio = e.priority();
        let hp: Vec<&Entity> = ts.entities().iter().filter(|o| o.id() != e.id() && o.priority() >= prio).collect();
        let r = response_time(e, &hp);
        schedulable &= r.converged && r.value <= e.period();
        per_entity.insert(e.id().to_owned(), r);
    }
    SchedVerdict { schedulable, per_entity }
}
