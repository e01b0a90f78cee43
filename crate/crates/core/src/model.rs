//! Domain types: rigid gang tasks, virtual gangs, system configurations and
//! tasksets, together with their JSON encoding.
//!
//! Time is counted in integer ticks and every fractional quantity (demand,
//! tolerance, utilization targets) is a fixed-point [`Fraction`], so all
//! comparisons the analysis makes are exact.

use std::collections::HashSet;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A non-negative count of abstract time units.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ticks(u64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    pub const fn new(ticks: u64) -> Self {
        Ticks(ticks)
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    /// `ceil(self / divisor)`; `divisor` must be non-zero.
    pub fn div_ceil(self, divisor: Ticks) -> u64 {
        self.0.div_ceil(divisor.0)
    }

    pub fn checked_sub(self, rhs: Ticks) -> Option<Ticks> {
        self.0.checked_sub(rhs.0).map(Ticks)
    }

    pub fn saturating_sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl Mul<u64> for Ticks {
    type Output = Ticks;
    fn mul(self, rhs: u64) -> Ticks {
        Ticks(self.0 * rhs)
    }
}

impl Sum for Ticks {
    fn sum<I: Iterator<Item = Ticks>>(iter: I) -> Ticks {
        Ticks(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Non-negative rational with a fixed denominator of [`Fraction::DENOM`].
///
/// Encoded in JSON as a plain float, rounded to the nearest representable
/// value on input.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(u64);

impl Fraction {
    pub const DENOM: u64 = 1_000_000;
    pub const ZERO: Fraction = Fraction(0);
    pub const ONE: Fraction = Fraction(Self::DENOM);

    pub const fn from_micros(micros: u64) -> Self {
        Fraction(micros)
    }

    /// `num / den`, rounded to the nearest micro-unit.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let scaled = num as u128 * Self::DENOM as u128;
        Fraction(((scaled + den as u128 / 2) / den as u128) as u64)
    }

    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        let micros = (value * Self::DENOM as f64).round();
        (micros <= u64::MAX as f64).then_some(Fraction(micros as u64))
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::DENOM as f64
    }
}

impl Add for Fraction {
    type Output = Fraction;
    fn add(self, rhs: Fraction) -> Fraction {
        Fraction(self.0 + rhs.0)
    }
}

impl Sum for Fraction {
    fn sum<I: Iterator<Item = Fraction>>(iter: I) -> Fraction {
        Fraction(iter.map(|d| d.0).sum())
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_f64().fmt(f)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Fraction::from_f64(value)
            .ok_or_else(|| serde::de::Error::custom(format!("expected a non-negative number, got {value}")))
    }
}

/// A rigid periodic gang task: `h` cores for `c_iso` ticks every `period`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaskRepr", into = "TaskRepr")]
pub struct Task {
    id: String,
    h: u32,
    c_iso: Ticks,
    c_eff: Option<Ticks>,
    period: Ticks,
    demand: Fraction,
    priority: Option<i64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct TaskRepr {
    id: String,
    h: u32,
    c_iso: u64,
    period: u64,
    demand: Fraction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_eff: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<i64>,
}

impl TryFrom<TaskRepr> for Task {
    type Error = Error;
    fn try_from(r: TaskRepr) -> Result<Task> {
        let task = Task::new(r.id, r.h, Ticks(r.c_iso), Ticks(r.period), r.demand)?;
        let task = match r.c_eff {
            Some(c) => task.with_c_eff(Ticks(c))?,
            None => task,
        };
        Ok(match r.priority {
            Some(p) => task.with_priority(p),
            None => task,
        })
    }
}

impl From<Task> for TaskRepr {
    fn from(t: Task) -> TaskRepr {
        TaskRepr {
            id: t.id,
            h: t.h,
            c_iso: t.c_iso.0,
            period: t.period.0,
            demand: t.demand,
            c_eff: t.c_eff.map(Ticks::get),
            priority: t.priority,
        }
    }
}

impl Task {
    pub fn new(id: impl Into<String>, h: u32, c_iso: Ticks, period: Ticks, demand: Fraction) -> Result<Task> {
        let id = id.into();
        let invalid = |reason: &str| Error::InvalidTask { id: id.clone(), reason: reason.to_owned() };
        if h == 0 {
            return Err(invalid("h must be at least 1"));
        }
        if c_iso.get() == 0 {
            return Err(invalid("c_iso must be at least one tick"));
        }
        if period < c_iso {
            return Err(invalid("period is shorter than c_iso"));
        }
        if demand > Fraction::ONE {
            return Err(invalid("demand must lie in [0, 1]"));
        }
        Ok(Task { id, h, c_iso, c_eff: None, period, demand, priority: None })
    }

    pub fn with_c_eff(mut self, c_eff: Ticks) -> Result<Task> {
        if c_eff < self.c_iso {
            return Err(Error::InvalidTask { id: self.id, reason: "c_eff is below c_iso".into() });
        }
        self.c_eff = Some(c_eff);
        Ok(self)
    }

    pub fn with_priority(mut self, priority: i64) -> Task {
        self.priority = Some(priority);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn h(&self) -> u32 {
        self.h
    }
    pub fn c_iso(&self) -> Ticks {
        self.c_iso
    }
    pub fn c_eff(&self) -> Option<Ticks> {
        self.c_eff
    }
    pub fn period(&self) -> Ticks {
        self.period
    }
    pub fn demand(&self) -> Fraction {
        self.demand
    }
    pub fn priority(&self) -> Option<i64> {
        self.priority
    }

    /// The WCET analysis and simulation use: `c_eff` when known, else `c_iso`.
    pub fn wcet(&self) -> Ticks {
        self.c_eff.unwrap_or(self.c_iso)
    }
}

/// A statically linked group of same-period tasks scheduled as one gang.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GangRepr", into = "GangRepr")]
pub struct VirtualGang {
    id: String,
    members: Vec<Task>,
    h: u32,
    c_iso: Ticks,
    c_eff: Option<Ticks>,
    period: Ticks,
    demand: Fraction,
    priority: Option<i64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct GangRepr {
    id: String,
    members: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_eff: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<i64>,
}

impl TryFrom<GangRepr> for VirtualGang {
    type Error = Error;
    fn try_from(r: GangRepr) -> Result<VirtualGang> {
        let gang = VirtualGang::with_id(r.id, r.members)?;
        let gang = match r.c_eff {
            Some(c) => gang.with_c_eff(Ticks(c))?,
            None => gang,
        };
        Ok(match r.priority {
            Some(p) => gang.with_priority(p),
            None => gang,
        })
    }
}

impl From<VirtualGang> for GangRepr {
    fn from(g: VirtualGang) -> GangRepr {
        GangRepr { id: g.id, members: g.members, c_eff: g.c_eff.map(Ticks::get), priority: g.priority }
    }
}

/// Builds a viable virtual gang on an `m`-core platform.
pub fn make_virtual_gang(members: Vec<Task>, m: u32) -> Result<VirtualGang> {
    let gang = VirtualGang::new(members)?;
    if gang.h > m {
        return Err(Error::NotViable { cores: gang.h, m });
    }
    Ok(gang)
}

impl VirtualGang {
    /// Gang named after its members, joined with `+`.
    pub fn new(members: Vec<Task>) -> Result<VirtualGang> {
        let id = members.iter().map(Task::id).collect::<Vec<_>>().join("+");
        Self::with_id(id, members)
    }

    pub fn with_id(id: impl Into<String>, members: Vec<Task>) -> Result<VirtualGang> {
        let first = members.first().ok_or(Error::EmptyGang)?;
        let period = first.period;
        let mut seen = HashSet::new();
        for t in &members {
            if t.period != period {
                return Err(Error::PeriodMismatch { first: period.get(), other: t.period.get() });
            }
            if !seen.insert(t.id.as_str()) {
                return Err(Error::DuplicateId(t.id.clone()));
            }
        }
        let h = members.iter().map(|t| t.h).sum();
        let c_iso = members.iter().map(|t| t.c_iso).max().unwrap_or_default();
        let demand = members.iter().map(|t| t.demand).sum();
        Ok(VirtualGang { id: id.into(), members, h, c_iso, c_eff: None, period, demand, priority: None })
    }

    pub fn with_c_eff(mut self, c_eff: Ticks) -> Result<VirtualGang> {
        if c_eff < self.c_iso {
            return Err(Error::InvalidTask { id: self.id, reason: "gang c_eff is below c_iso".into() });
        }
        self.c_eff = Some(c_eff);
        Ok(self)
    }

    pub fn with_priority(mut self, priority: i64) -> VirtualGang {
        self.priority = Some(priority);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn members(&self) -> &[Task] {
        &self.members
    }
    pub fn h(&self) -> u32 {
        self.h
    }
    pub fn c_iso(&self) -> Ticks {
        self.c_iso
    }
    pub fn c_eff(&self) -> Option<Ticks> {
        self.c_eff
    }
    pub fn period(&self) -> Ticks {
        self.period
    }
    pub fn demand(&self) -> Fraction {
        self.demand
    }
    pub fn priority(&self) -> Option<i64> {
        self.priority
    }
    pub fn wcet(&self) -> Ticks {
        self.c_eff.unwrap_or(self.c_iso)
    }
    pub fn contains(&self, task_id: &str) -> bool {
        self.members.iter().any(|t| t.id == task_id)
    }
}

/// A schedulable unit: either a plain task or a virtual gang.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entity {
    Task(Task),
    Gang(VirtualGang),
}

impl Entity {
    pub fn id(&self) -> &str {
        match self {
            Entity::Task(t) => t.id(),
            Entity::Gang(g) => g.id(),
        }
    }
    pub fn h(&self) -> u32 {
        match self {
            Entity::Task(t) => t.h(),
            Entity::Gang(g) => g.h(),
        }
    }
    pub fn c_iso(&self) -> Ticks {
        match self {
            Entity::Task(t) => t.c_iso(),
            Entity::Gang(g) => g.c_iso(),
        }
    }
    pub fn wcet(&self) -> Ticks {
        match self {
            Entity::Task(t) => t.wcet(),
            Entity::Gang(g) => g.wcet(),
        }
    }
    pub fn period(&self) -> Ticks {
        match self {
            Entity::Task(t) => t.period(),
            Entity::Gang(g) => g.period(),
        }
    }
    pub fn demand(&self) -> Fraction {
        match self {
            Entity::Task(t) => t.demand(),
            Entity::Gang(g) => g.demand(),
        }
    }
    pub fn priority(&self) -> Option<i64> {
        match self {
            Entity::Task(t) => t.priority(),
            Entity::Gang(g) => g.priority(),
        }
    }

    pub fn with_priority(self, priority: i64) -> Entity {
        match self {
            Entity::Task(t) => Entity::Task(t.with_priority(priority)),
            Entity::Gang(g) => Entity::Gang(g.with_priority(priority)),
        }
    }

    pub fn with_c_eff(self, c_eff: Ticks) -> Result<Entity> {
        Ok(match self {
            Entity::Task(t) => Entity::Task(t.with_c_eff(c_eff)?),
            Entity::Gang(g) => Entity::Gang(g.with_c_eff(c_eff)?),
        })
    }

    /// Tasks that make up this entity (the task itself for a plain task).
    pub fn tasks(&self) -> &[Task] {
        match self {
            Entity::Task(t) => std::slice::from_ref(t),
            Entity::Gang(g) => g.members(),
        }
    }
}

impl From<Task> for Entity {
    fn from(t: Task) -> Entity {
        Entity::Task(t)
    }
}

impl From<VirtualGang> for Entity {
    fn from(g: VirtualGang) -> Entity {
        Entity::Gang(g)
    }
}

/// A partition of a candidate set into viable virtual gangs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SystemConfig {
    pub gangs: Vec<VirtualGang>,
    pub completion_time: Ticks,
    pub discovery_index: usize,
}

impl SystemConfig {
    pub fn new(gangs: Vec<VirtualGang>, discovery_index: usize) -> SystemConfig {
        let completion_time = gangs.iter().map(VirtualGang::wcet).sum();
        SystemConfig { gangs, completion_time, discovery_index }
    }

    /// Ordering key: shorter completion first, then fewer gangs, then earlier discovery.
    pub fn rank_key(&self) -> (Ticks, usize, usize) {
        (self.completion_time, self.gangs.len(), self.discovery_index)
    }
}

/// Tasks and gangs on an `m`-core platform.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TasksetRepr", into = "TasksetRepr")]
pub struct Taskset {
    entities: Vec<Entity>,
    m: u32,
    util_target: Option<Fraction>,
}

#[derive(Clone, Serialize, Deserialize)]
struct TasksetRepr {
    m: u32,
    tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    gangs: Vec<VirtualGang>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    util_target: Option<Fraction>,
}

impl TryFrom<TasksetRepr> for Taskset {
    type Error = Error;
    fn try_from(r: TasksetRepr) -> Result<Taskset> {
        let entities = r.tasks.into_iter().map(Entity::Task).chain(r.gangs.into_iter().map(Entity::Gang)).collect();
        let mut ts = Taskset::new(entities, r.m)?;
        ts.util_target = r.util_target;
        Ok(ts)
    }
}

impl From<Taskset> for TasksetRepr {
    fn from(ts: Taskset) -> TasksetRepr {
        let mut tasks = Vec::new();
        let mut gangs = Vec::new();
        for e in ts.entities {
            match e {
                Entity::Task(t) => tasks.push(t),
                Entity::Gang(g) => gangs.push(g),
            }
        }
        TasksetRepr { m: ts.m, tasks, gangs, util_target: ts.util_target }
    }
}

impl Taskset {
    pub fn new(entities: Vec<Entity>, m: u32) -> Result<Taskset> {
        if m == 0 {
            return Err(Error::NotViable { cores: 0, m });
        }
        let mut ids = HashSet::new();
        for e in &entities {
            if e.h() > m {
                return Err(Error::NotViable { cores: e.h(), m });
            }
            if !ids.insert(e.id().to_owned()) {
                return Err(Error::DuplicateId(e.id().to_owned()));
            }
            if let Entity::Gang(g) = e {
                for t in g.members() {
                    if t.id() != g.id() && !ids.insert(t.id().to_owned()) {
                        return Err(Error::DuplicateId(t.id().to_owned()));
                    }
                }
            }
        }
        Ok(Taskset { entities, m, util_target: None })
    }

    pub fn from_tasks(tasks: Vec<Task>, m: u32) -> Result<Taskset> {
        Self::new(tasks.into_iter().map(Entity::Task).collect(), m)
    }

    pub fn with_util_target(mut self, target: Fraction) -> Taskset {
        self.util_target = Some(target);
        self
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn util_target(&self) -> Option<Fraction> {
        self.util_target
    }
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    /// Plain tasks, in declaration order (gang members excluded).
    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.entities.iter().filter_map(|e| match e {
            Entity::Task(t) => Some(t),
            Entity::Gang(_) => None,
        })
    }

    /// Total core-utilization `Σ wcet·h / T`.
    pub fn utilization(&self) -> f64 {
        self.entities.iter().map(|e| e.wcet().get() as f64 * e.h() as f64 / e.period().get() as f64).sum()
    }

    /// Replaces the entity list, keeping `m` and the utilization target.
    pub fn with_entities(&self, entities: Vec<Entity>) -> Result<Taskset> {
        let mut ts = Taskset::new(entities, self.m)?;
        ts.util_target = self.util_target;
        Ok(ts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Malformed documents and invalid task fields are `Json` errors;
    /// cross-entity violations keep their own kind.
    pub fn from_json(text: &str) -> Result<Taskset> {
        let repr: TasksetRepr = serde_json::from_str(text)?;
        Taskset::try_from(repr)
    }
}
