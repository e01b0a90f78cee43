//! Event-driven multicore scheduling simulator.
//!
//! Time advances directly from one event (release, completion, member
//! arrival, horizon) to the next, so traces are exact in ticks. At every
//! event the policy picks the set of running units from the ready jobs:
//!
//! * `RtGang`, `RtgSync`: the highest-priority ready entity runs alone on
//!   cores `0..h`; an arriving higher-priority entity preempts all of its
//!   threads at once.
//! * `UnsyncVgang`: as above, but the members of a virtual gang arrive at
//!   their own offsets. The gang holds its cores from the moment it is
//!   picked until its last member finishes.
//! * `GangFtp`: ready entities are visited in priority order and each one
//!   that still fits on the idle cores is started; the rest wait.
//! * `Threaded`: every entity is split into `h` independent threads that are
//!   scheduled by global preemptive fixed priority.

mod trace;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::assign_priorities;
use crate::error::{Error, Result};
use crate::model::{Entity, Taskset, Ticks};

pub use trace::{
    gantt_rows, makespan, miss_stats, write_gantt_csv, EventKind, GanttRow, MissStats, SimEvent, SimTrace,
};

/// Horizon used when the hyperperiod is unreasonably long.
pub const DEFAULT_HORIZON_CAP: Ticks = Ticks::new(1_000_000);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SimPolicy {
    RtGang,
    RtgSync,
    UnsyncVgang,
    GangFtp,
    Threaded,
}

impl SimPolicy {
    fn one_at_a_time(self) -> bool {
        matches!(self, SimPolicy::RtGang | SimPolicy::RtgSync | SimPolicy::UnsyncVgang)
    }
}

impl FromStr for SimPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "rtgang" => Ok(SimPolicy::RtGang),
            "rtgsync" => Ok(SimPolicy::RtgSync),
            "unsync" | "unsyncvgang" => Ok(SimPolicy::UnsyncVgang),
            "gangftp" => Ok(SimPolicy::GangFtp),
            "threaded" => Ok(SimPolicy::Threaded),
            _ => Err(format!("unknown policy `{s}`")),
        }
    }
}

impl fmt::Display for SimPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SimPolicy::RtGang => "rtgang",
            SimPolicy::RtgSync => "rtgsync",
            SimPolicy::UnsyncVgang => "unsync",
            SimPolicy::GangFtp => "gangftp",
            SimPolicy::Threaded => "threaded",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub policy: SimPolicy,
    /// `None` simulates one hyperperiod (plus the largest offset), capped at
    /// `horizon_cap`.
    pub horizon: Option<Ticks>,
    pub horizon_cap: Ticks,
    /// Release offsets by entity id. Under `UnsyncVgang`, offsets keyed by a
    /// gang member's id delay that member relative to its gang's release.
    pub release_offsets: BTreeMap<String, Ticks>,
    pub preemptive: bool,
    /// Extra work charged to a unit each time it is preempted.
    pub preemption_cost: Ticks,
    pub stop_on_first_miss: bool,
}

impl SimConfig {
    pub fn new(policy: SimPolicy) -> SimConfig {
        SimConfig {
            policy,
            horizon: None,
            horizon_cap: DEFAULT_HORIZON_CAP,
            release_offsets: BTreeMap::new(),
            preemptive: true,
            preemption_cost: Ticks::ZERO,
            stop_on_first_miss: false,
        }
    }

    pub fn with_horizon(mut self, horizon: Ticks) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_offset(mut self, id: impl Into<String>, offset: Ticks) -> Self {
        self.release_offsets.insert(id.into(), offset);
        self
    }
}

/// Least common multiple of all periods, `None` on overflow.
pub fn hyperperiod(ts: &Taskset) -> Option<Ticks> {
    let mut lcm: u64 = 1;
    for e in ts.entities() {
        let p = e.period().get();
        lcm = (lcm / gcd(lcm, p)).checked_mul(p)?;
    }
    Some(Ticks::new(lcm))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn simulate(ts: &Taskset, cfg: &SimConfig) -> Result<SimTrace> {
    if ts.is_empty() {
        return Ok(SimTrace { events: Vec::new(), m: ts.m(), end: Ticks::ZERO });
    }
    let horizon = resolve_horizon(ts, cfg)?;
    let prioritized;
    let ts = if ts.entities().iter().any(|e| e.priority().is_none()) {
        prioritized = assign_priorities(ts);
        &prioritized
    } else {
        ts
    };
    Ok(Engine::new(ts, cfg, horizon).run())
}

fn resolve_horizon(ts: &Taskset, cfg: &SimConfig) -> Result<Ticks> {
    let max_period = ts.entities().iter().map(Entity::period).max().unwrap_or_default();
    if let Some(h) = cfg.horizon {
        if h < max_period {
            return Err(Error::InvalidConfig(format!("horizon {h} is shorter than the longest period {max_period}")));
        }
        return Ok(h);
    }
    let max_offset = cfg.release_offsets.values().copied().max().unwrap_or_default();
    let base = match hyperperiod(ts) {
        Some(h) if h <= cfg.horizon_cap => h,
        other => {
            log::warn!(
                "hyperperiod {} exceeds the horizon cap; simulating {} ticks",
                other.map_or_else(|| "(overflow)".to_owned(), |h| h.to_string()),
                cfg.horizon_cap.max(max_period)
            );
            cfg.horizon_cap.max(max_period)
        }
    };
    Ok(base + max_offset)
}

/// Static description of what an entity's jobs consist of.
struct Source {
    id: String,
    priority: i64,
    period: u64,
    width: u32,
    parts: Vec<PartSpec>,
    next_release: u64,
}

struct PartSpec {
    id: String,
    work: u64,
    width: u32,
    offset: u64,
}

struct Part {
    remaining: u64,
    avail_at: u64,
    started: bool,
}

struct Job {
    source: usize,
    release: u64,
    deadline: u64,
    parts: Vec<Part>,
    started: bool,
    missed: bool,
    done: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Unit {
    job: usize,
    part: Option<usize>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    m: u32,
    horizon: u64,
    per_thread: bool,
    sources: Vec<Source>,
    jobs: Vec<Job>,
    active: Vec<usize>,
    running: HashMap<Unit, Vec<u32>>,
    events: Vec<SimEvent>,
    now: u64,
}

impl<'a> Engine<'a> {
    fn new(ts: &Taskset, cfg: &'a SimConfig, horizon: Ticks) -> Engine<'a> {
        let per_thread = cfg.policy == SimPolicy::Threaded;
        let offset_of = |id: &str| cfg.release_offsets.get(id).map_or(0, |t| t.get());
        let sources = ts
            .entities()
            .iter()
            .map(|e| {
                let parts = match (cfg.policy, e) {
                    (SimPolicy::Threaded, _) => {
                        // one unit per thread; gang members keep their own WCET
                        let threads: Vec<(u64, u32)> = match e {
                            Entity::Task(t) => vec![(t.wcet().get(), t.h())],
                            Entity::Gang(g) if g.c_eff().is_some() => vec![(g.wcet().get(), g.h())],
                            Entity::Gang(g) => g.members().iter().map(|t| (t.wcet().get(), t.h())).collect(),
                        };
                        threads
                            .into_iter()
                            .flat_map(|(work, h)| std::iter::repeat_n(work, h as usize))
                            .enumerate()
                            .map(|(k, work)| PartSpec { id: format!("{}#{k}", e.id()), work, width: 1, offset: 0 })
                            .collect()
                    }
                    (SimPolicy::UnsyncVgang, Entity::Gang(g)) => g
                        .members()
                        .iter()
                        .map(|t| PartSpec {
                            id: t.id().to_owned(),
                            work: t.wcet().get(),
                            width: t.h(),
                            offset: offset_of(t.id()),
                        })
                        .collect(),
                    _ => vec![PartSpec { id: e.id().to_owned(), work: e.wcet().get(), width: e.h(), offset: 0 }],
                };
                Source {
                    id: e.id().to_owned(),
                    priority: e.priority().unwrap_or_default(),
                    period: e.period().get(),
                    width: e.h(),
                    parts,
                    next_release: offset_of(e.id()),
                }
            })
            .collect();
        Engine {
            cfg,
            m: ts.m(),
            horizon: horizon.get(),
            per_thread,
            sources,
            jobs: Vec::new(),
            active: Vec::new(),
            running: HashMap::new(),
            events: Vec::new(),
            now: 0,
        }
    }

    fn emit(&mut self, kind: EventKind, id: String, cores: Vec<u32>) {
        self.events.push(SimEvent { time: Ticks::new(self.now), kind, id, cores });
    }

    fn run(mut self) -> SimTrace {
        loop {
            if self.check_deadlines() {
                break;
            }
            if self.now >= self.horizon {
                break;
            }
            self.release_jobs();
            self.schedule();
            let next = self.next_event_time();
            self.advance(next);
        }
        SimTrace { events: self.events, m: self.m, end: Ticks::new(self.now) }
    }

    /// Emits misses for overdue jobs; true when the run should stop.
    fn check_deadlines(&mut self) -> bool {
        let mut stop = false;
        for k in 0..self.active.len() {
            let j = self.active[k];
            let job = &self.jobs[j];
            if !job.missed && job.deadline <= self.now {
                self.jobs[j].missed = true;
                let id = self.sources[self.jobs[j].source].id.clone();
                self.emit(EventKind::DeadlineMiss, id, Vec::new());
                stop |= self.cfg.stop_on_first_miss;
            }
        }
        stop
    }

    fn release_jobs(&mut self) {
        for s in 0..self.sources.len() {
            while self.sources[s].next_release == self.now && self.now < self.horizon {
                let src = &mut self.sources[s];
                let release = src.next_release;
                src.next_release += src.period;
                let parts = src
                    .parts
                    .iter()
                    .map(|p| Part { remaining: p.work, avail_at: release + p.offset, started: false })
                    .collect();
                self.jobs.push(Job {
                    source: s,
                    release,
                    deadline: release + src.period,
                    parts,
                    started: false,
                    missed: false,
                    done: false,
                });
                self.active.push(self.jobs.len() - 1);
                let id = self.sources[s].id.clone();
                self.emit(EventKind::Release, id, Vec::new());
            }
        }
    }

    /// Ready units in dispatch order: priority, then job release, then source order.
    fn ready_units(&self) -> Vec<Unit> {
        // Only the oldest unfinished job of each source may run.
        let mut oldest: BTreeMap<usize, usize> = BTreeMap::new();
        for &j in &self.active {
            let job = &self.jobs[j];
            oldest
                .entry(job.source)
                .and_modify(|cur| {
                    if self.jobs[*cur].release > job.release {
                        *cur = j;
                    }
                })
                .or_insert(j);
        }
        let mut units: Vec<Unit> = Vec::new();
        for &j in oldest.values() {
            if self.per_thread {
                let job = &self.jobs[j];
                units.extend(
                    job.parts
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| p.remaining > 0 && p.avail_at <= self.now)
                        .map(|(k, _)| Unit { job: j, part: Some(k) }),
                );
            } else {
                units.push(Unit { job: j, part: None });
            }
        }
        units.sort_by_key(|u| {
            let job = &self.jobs[u.job];
            (std::cmp::Reverse(self.sources[job.source].priority), job.release, job.source, u.part)
        });
        units
    }

    fn width(&self, unit: Unit) -> u32 {
        let source = &self.sources[self.jobs[unit.job].source];
        match unit.part {
            Some(k) => source.parts[k].width,
            None => source.width,
        }
    }

    fn unit_id(&self, unit: Unit) -> String {
        let source = &self.sources[self.jobs[unit.job].source];
        match unit.part {
            Some(k) => source.parts[k].id.clone(),
            None => source.id.clone(),
        }
    }

    fn select(&self, ready: &[Unit]) -> Vec<Unit> {
        let mut chosen: Vec<Unit> = Vec::new();
        let mut free = self.m;
        if !self.cfg.preemptive {
            for u in ready {
                if self.running.contains_key(u) {
                    chosen.push(*u);
                    free -= self.width(*u);
                }
            }
        }
        if self.cfg.policy.one_at_a_time() {
            if chosen.is_empty() {
                chosen.extend(ready.first().copied());
            }
            return chosen;
        }
        for u in ready {
            let w = self.width(*u);
            if !chosen.contains(u) && w <= free {
                chosen.push(*u);
                free -= w;
            }
        }
        chosen
    }

    fn schedule(&mut self) {
        let ready = self.ready_units();
        let chosen = self.select(&ready);

        let mut preempted: Vec<Unit> = self.running.keys().filter(|u| !chosen.contains(u)).copied().collect();
        preempted.sort();
        for u in preempted {
            let cores = self.running.remove(&u).unwrap_or_default();
            self.charge_preemption(u);
            let id = self.unit_id(u);
            self.emit(EventKind::Preempt, id, cores);
        }

        let mut busy = vec![false; self.m as usize];
        for cores in self.running.values() {
            for &c in cores {
                busy[c as usize] = true;
            }
        }
        for u in chosen {
            if self.running.contains_key(&u) {
                continue;
            }
            let width = self.width(u) as usize;
            let cores: Vec<u32> = (0..self.m).filter(|&c| !busy[c as usize]).take(width).collect();
            debug_assert_eq!(cores.len(), width, "selection exceeded the core count");
            for &c in &cores {
                busy[c as usize] = true;
            }
            let first = match u.part {
                Some(k) => !std::mem::replace(&mut self.jobs[u.job].parts[k].started, true),
                None => !std::mem::replace(&mut self.jobs[u.job].started, true),
            };
            let kind = if first { EventKind::Start } else { EventKind::Resume };
            let id = self.unit_id(u);
            self.emit(kind, id, cores.clone());
            self.running.insert(u, cores);
        }
        debug_assert!(self.running.values().map(Vec::len).sum::<usize>() <= self.m as usize);
    }

    fn charge_preemption(&mut self, u: Unit) {
        let cost = self.cfg.preemption_cost.get();
        if cost == 0 {
            return;
        }
        let now = self.now;
        let job = &mut self.jobs[u.job];
        match u.part {
            Some(k) => job.parts[k].remaining += cost,
            None => {
                job.parts.iter_mut().filter(|p| p.remaining > 0 && p.avail_at <= now).for_each(|p| p.remaining += cost)
            }
        }
    }

    /// Parts of a running unit that make progress right now.
    fn progressing(&self, u: Unit) -> Vec<usize> {
        let job = &self.jobs[u.job];
        match u.part {
            Some(k) => vec![k],
            None => (0..job.parts.len())
                .filter(|&k| job.parts[k].remaining > 0 && job.parts[k].avail_at <= self.now)
                .collect(),
        }
    }

    fn next_event_time(&self) -> u64 {
        let mut next = self.horizon;
        for s in &self.sources {
            if s.next_release < self.horizon {
                next = next.min(s.next_release);
            }
        }
        for &j in &self.active {
            let deadline = self.jobs[j].deadline;
            if deadline > self.now {
                next = next.min(deadline);
            }
        }
        for u in self.running.keys() {
            let job = &self.jobs[u.job];
            for k in self.progressing(*u) {
                next = next.min(self.now + job.parts[k].remaining);
            }
            if u.part.is_none() {
                for p in job.parts.iter().filter(|p| p.avail_at > self.now) {
                    next = next.min(p.avail_at);
                }
            }
        }
        next
    }

    fn advance(&mut self, next: u64) {
        let dt = next - self.now;
        let mut units: Vec<Unit> = self.running.keys().copied().collect();
        units.sort();
        for &u in &units {
            for k in self.progressing(u) {
                self.jobs[u.job].parts[k].remaining -= dt;
            }
        }
        self.now = next;
        for u in units {
            let job = &self.jobs[u.job];
            let unit_done = match u.part {
                Some(k) => job.parts[k].remaining == 0,
                None => job.parts.iter().all(|p| p.remaining == 0),
            };
            if !unit_done {
                continue;
            }
            let cores = self.running.remove(&u).unwrap_or_default();
            let id = self.unit_id(u);
            if u.part.is_some() {
                self.emit(EventKind::Complete, id, cores);
                if self.jobs[u.job].parts.iter().all(|p| p.remaining == 0) {
                    let job_id = self.sources[self.jobs[u.job].source].id.clone();
                    self.finish(u.job);
                    self.emit(EventKind::Complete, job_id, Vec::new());
                }
            } else {
                self.finish(u.job);
                self.emit(EventKind::Complete, id, cores);
            }
        }
    }

    fn finish(&mut self, job: usize) {
        self.jobs[job].done = true;
        self.active.retain(|&j| j != job);
    }
}
