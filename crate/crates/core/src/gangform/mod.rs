//! Virtual gang formation over same-period candidate sets.
//!
//! Two formation strategies are provided: exhaustive enumeration of every
//! viable partition with iterative interference refinement
//! ([`gang_formation_bruteforce`]) and greedy first-fit packing in decreasing
//! WCET order ([`gang_formation_greedy`]). Both consult an
//! [`InterferenceOracle`] for the co-run WCET of a gang.

mod bruteforce;
mod greedy;
mod stirling;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Entity, Fraction, SystemConfig, Task, Taskset, Ticks, VirtualGang};

pub use bruteforce::{
    gang_formation_bruteforce, gang_formation_bruteforce_capped, generate_system_configs, rank_configs, RankedConfigs,
    DEFAULT_CONFIG_CAP,
};
pub use greedy::gang_formation_greedy;
pub use stirling::{config_count_bound, stirling2};

/// Default acceptance threshold for interference-inflated WCETs (20 %).
pub const DEFAULT_TOLERANCE: Fraction = Fraction::from_micros(200_000);

/// Source of co-run WCETs for virtual gangs.
///
/// Results below the gang's isolation WCET are raised to it.
pub trait InterferenceOracle: Sync {
    fn gang_wcet(&self, gang: &VirtualGang) -> Ticks;
}

impl<F> InterferenceOracle for F
where
    F: Fn(&VirtualGang) -> Ticks + Sync,
{
    fn gang_wcet(&self, gang: &VirtualGang) -> Ticks {
        self(gang)
    }
}

/// Members never slow each other down.
#[derive(Copy, Clone, Debug, Default)]
pub struct NoInterference;

impl InterferenceOracle for NoInterference {
    fn gang_wcet(&self, gang: &VirtualGang) -> Ticks {
        gang.c_iso()
    }
}

/// Tasks sharing one period, eligible to be grouped into gangs.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    tasks: Vec<Task>,
    m: u32,
}

impl CandidateSet {
    pub fn new(tasks: Vec<Task>, m: u32) -> Result<CandidateSet> {
        let first = tasks.first().ok_or(Error::EmptyGang)?;
        let period = first.period();
        let mut ids = HashSet::new();
        for t in &tasks {
            if t.period() != period {
                return Err(Error::PeriodMismatch { first: period.get(), other: t.period().get() });
            }
            if t.h() > m {
                return Err(Error::NotViable { cores: t.h(), m });
            }
            if !ids.insert(t.id()) {
                return Err(Error::DuplicateId(t.id().to_owned()));
            }
        }
        Ok(CandidateSet { tasks, m })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn period(&self) -> Ticks {
        self.tasks[0].period()
    }
    pub fn len(&self) -> usize {
        self.tasks.len()
    }
    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Groups the plain tasks of `ts` by exact period, shortest period first.
pub fn candidate_sets(ts: &Taskset) -> Vec<CandidateSet> {
    let mut groups: BTreeMap<Ticks, Vec<Task>> = BTreeMap::new();
    for t in ts.tasks() {
        groups.entry(t.period()).or_default().push(t.clone());
    }
    groups
        .into_values()
        .map(|tasks| CandidateSet::new(tasks, ts.m()).expect("taskset invariants imply a valid candidate set"))
        .collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bfc,
    Gpc,
}

/// How a configuration was reached.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub period: u64,
    pub tasks: usize,
    /// Re-ranking rounds of the refinement loop (brute force only).
    pub iterations: usize,
    pub oracle_calls: usize,
    pub tolerance: Fraction,
    pub configs_enumerated: usize,
    /// Discovery indices of the configurations that were selected as best, in order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub visited: Vec<usize>,
    /// Set when brute force was abandoned for the greedy heuristic.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

/// Chosen configuration plus how it was found.
#[derive(Clone, Debug, Serialize)]
pub struct Formation {
    pub config: SystemConfig,
    pub provenance: Provenance,
}

/// Runs gang formation on every candidate set of `ts` and returns a taskset
/// whose plain tasks are replaced by the formed gangs. Gangs already present
/// in `ts` are kept.
///
/// With `fallback`, candidate sets too large for brute force are formed
/// greedily instead of failing.
pub fn form_taskset(
    ts: &Taskset,
    algorithm: Algorithm,
    oracle: &dyn InterferenceOracle,
    tolerance: Fraction,
    fallback: bool,
) -> Result<(Taskset, Vec<Provenance>)> {
    let mut entities: Vec<Entity> = ts.entities().iter().filter(|e| matches!(e, Entity::Gang(_))).cloned().collect();
    let mut provenance = Vec::new();
    for cs in candidate_sets(ts) {
        let formation = match algorithm {
            Algorithm::Gpc => gang_formation_greedy(&cs, oracle, tolerance),
            Algorithm::Bfc => match gang_formation_bruteforce(&cs, oracle, tolerance) {
                Err(Error::ConfigSpaceTooLarge { .. }) if fallback => {
                    let mut f = gang_formation_greedy(&cs, oracle, tolerance);
                    f.provenance.fallback = true;
                    f
                }
                other => other?,
            },
        };
        entities.extend(formation.config.gangs.into_iter().map(Entity::Gang));
        provenance.push(formation.provenance);
    }
    Ok((ts.with_entities(entities)?, provenance))
}

/// `c_eff ≤ (1 + tolerance) · baseline`, exactly.
pub(crate) fn within_tolerance(c_eff: Ticks, baseline: Ticks, tolerance: Fraction) -> bool {
    let lhs = c_eff.get() as u128 * Fraction::DENOM as u128;
    let rhs = baseline.get() as u128 * (Fraction::DENOM as u128 + tolerance.micros() as u128);
    lhs <= rhs
}

pub(crate) fn measure(oracle: &dyn InterferenceOracle, gang: &VirtualGang) -> Ticks {
    oracle.gang_wcet(gang).max(gang.c_iso())
}
