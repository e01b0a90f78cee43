use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Ticks;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Release,
    Start,
    Preempt,
    Resume,
    Complete,
    DeadlineMiss,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    #[serde(rename = "t")]
    pub time: Ticks,
    pub kind: EventKind,
    pub id: String,
    pub cores: Vec<u32>,
}

/// Time-ordered scheduling events over `[0, end]`.
///
/// Jobs are identified by their entity id. Under thread-level scheduling the
/// execution events (`START`, `PREEMPT`, `RESUME` and per-thread `COMPLETE`)
/// carry `<entity>#<thread>` ids, while job-level events keep the entity id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimTrace {
    pub events: Vec<SimEvent>,
    pub m: u32,
    /// Time at which the simulation stopped.
    pub end: Ticks,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MissStats {
    pub misses: usize,
    pub per_entity: BTreeMap<String, usize>,
    /// Largest completion-minus-deadline over late jobs; jobs still running
    /// at the end of the trace count up to the end.
    pub max_lateness: Ticks,
}

impl SimTrace {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn gantt_rows(&self) -> Vec<GanttRow> {
        gantt_rows(self)
    }
}

/// Latest first-job completion minus earliest release, over every entity
/// that released a job.
pub fn makespan(trace: &SimTrace) -> Result<Ticks> {
    let mut first_release: Option<Ticks> = None;
    let mut released: Vec<&str> = Vec::new();
    let mut completed: HashMap<&str, Ticks> = HashMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Release => {
                first_release = Some(first_release.map_or(e.time, |t| t.min(e.time)));
                if !released.contains(&e.id.as_str()) {
                    released.push(&e.id);
                }
            }
            EventKind::Complete => {
                completed.entry(&e.id).or_insert(e.time);
            }
            _ => {}
        }
    }
    let Some(start) = first_release else { return Ok(Ticks::ZERO) };
    let mut latest = start;
    for id in released {
        let done = completed.get(id).ok_or_else(|| Error::IncompleteTrace(id.to_owned()))?;
        latest = latest.max(*done);
    }
    Ok(latest - start)
}

pub fn miss_stats(trace: &SimTrace) -> MissStats {
    // Per entity: outstanding jobs in release order, with their missed deadline if any.
    let mut jobs: HashMap<&str, VecDeque<Option<Ticks>>> = HashMap::new();
    let mut stats = MissStats::default();
    for e in &trace.events {
        match e.kind {
            EventKind::Release => jobs.entry(&e.id).or_default().push_back(None),
            EventKind::DeadlineMiss => {
                stats.misses += 1;
                *stats.per_entity.entry(e.id.clone()).or_default() += 1;
                if let Some(slot) = jobs.get_mut(e.id.as_str()).and_then(|q| q.iter_mut().find(|s| s.is_none())) {
                    *slot = Some(e.time);
                }
            }
            EventKind::Complete => {
                if let Some(Some(Some(deadline))) = jobs.get_mut(e.id.as_str()).map(VecDeque::pop_front) {
                    stats.max_lateness = stats.max_lateness.max(e.time.saturating_sub(deadline));
                }
            }
            _ => {}
        }
    }
    for queue in jobs.values() {
        for deadline in queue.iter().flatten() {
            stats.max_lateness = stats.max_lateness.max(trace.end.saturating_sub(*deadline));
        }
    }
    stats
}

/// One contiguous execution interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GanttRow {
    pub entity: String,
    pub start: u64,
    pub end: u64,
    pub cores: String,
}

pub fn gantt_rows(trace: &SimTrace) -> Vec<GanttRow> {
    let mut open: HashMap<&str, (Ticks, &[u32])> = HashMap::new();
    let mut rows = Vec::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Start | EventKind::Resume => {
                open.insert(&e.id, (e.time, &e.cores));
            }
            EventKind::Preempt | EventKind::Complete => {
                if let Some((start, cores)) = open.remove(e.id.as_str()) {
                    rows.push(row(&e.id, start, e.time, cores));
                }
            }
            _ => {}
        }
    }
    let mut still_open: Vec<_> = open.into_iter().collect();
    still_open.sort();
    for (id, (start, cores)) in still_open {
        rows.push(row(id, start, trace.end, cores));
    }
    rows
}

fn row(id: &str, start: Ticks, end: Ticks, cores: &[u32]) -> GanttRow {
    let cores = cores.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    GanttRow { entity: id.to_owned(), start: start.get(), end: end.get(), cores }
}

/// Writes `entity,start,end,cores` rows; cores are space separated.
pub fn write_gantt_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in gantt_rows(trace) {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
