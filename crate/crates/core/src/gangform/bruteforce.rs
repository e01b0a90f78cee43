use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Fraction, SystemConfig, Task, Ticks, VirtualGang};

use super::{config_count_bound, measure, within_tolerance, Algorithm, CandidateSet, Formation};
use super::{InterferenceOracle, Provenance};

/// Largest configuration space brute force will enumerate by default.
pub const DEFAULT_CONFIG_CAP: u128 = 10_000_000;

/// Configurations ordered best-first by [`SystemConfig::rank_key`].
#[derive(Clone, Debug)]
pub struct RankedConfigs {
    pub configs: Vec<SystemConfig>,
}

impl RankedConfigs {
    pub fn best(&self) -> Option<&SystemConfig> {
        self.configs.first()
    }
}

pub fn rank_configs(mut configs: Vec<SystemConfig>) -> RankedConfigs {
    configs.sort_by_key(SystemConfig::rank_key);
    RankedConfigs { configs }
}

/// Every partition of the candidate set into viable gangs, each exactly once.
///
/// Discovery indices start at the all-singletons configuration and move
/// towards coarser groupings (more gangs first).
pub fn generate_system_configs(cs: &CandidateSet) -> Vec<SystemConfig> {
    let space = ConfigSpace::enumerate(cs);
    (0..space.configs.len())
        .map(|i| {
            let gangs = space.configs[i].iter().map(|&mask| space.gang(mask, None)).collect();
            SystemConfig::new(gangs, i)
        })
        .collect()
}

pub fn gang_formation_bruteforce(
    cs: &CandidateSet,
    oracle: &dyn InterferenceOracle,
    tolerance: Fraction,
) -> Result<Formation> {
    gang_formation_bruteforce_capped(cs, oracle, tolerance, DEFAULT_CONFIG_CAP)
}

/// Exhaustive formation with iterative interference refinement.
///
/// The best configuration under isolation WCETs is measured through the
/// oracle. If its inflated completion time stays within `tolerance` of the
/// pre-measurement value the search stops; otherwise every configuration
/// sharing an inflated gang is re-costed and the new best is measured in
/// turn, until the best stops changing. Measurements are cached per member
/// set, so completion times only grow and no configuration is measured twice.
pub fn gang_formation_bruteforce_capped(
    cs: &CandidateSet,
    oracle: &dyn InterferenceOracle,
    tolerance: Fraction,
    cap: u128,
) -> Result<Formation> {
    if cs.len() > 64 {
        return Err(Error::ConfigSpaceTooLarge { bound: u128::MAX, cap });
    }
    let bound = match config_count_bound(cs.len() as u32, cs.m()) {
        Ok(bound) => bound,
        Err(Error::Overflow(_)) => u128::MAX,
        Err(e) => return Err(e),
    };
    if bound > cap {
        return Err(Error::ConfigSpaceTooLarge { bound, cap });
    }

    let space = ConfigSpace::enumerate(cs);
    let mut measured: HashMap<u64, Ticks> = HashMap::new();
    let mut oracle_calls = 0;
    let mut completion: Vec<Ticks> =
        space.configs.iter().map(|gangs| gangs.iter().map(|&g| space.c_iso(g)).sum()).collect();

    let mut best = space.best(&completion);
    let mut visited = vec![best];
    let mut iterations = 0;
    loop {
        let baseline = completion[best];
        let mut inflated = Vec::new();
        for &mask in &space.configs[best] {
            if measured.contains_key(&mask) {
                continue;
            }
            let c_eff = measure(oracle, &space.gang(mask, None));
            oracle_calls += 1;
            measured.insert(mask, c_eff);
            if c_eff != space.c_iso(mask) {
                inflated.push(mask);
            }
        }
        completion[best] = space.cost(best, &measured);
        if within_tolerance(completion[best], baseline, tolerance) {
            break;
        }

        for (i, gangs) in space.configs.iter().enumerate() {
            if gangs.iter().any(|g| inflated.contains(g)) {
                completion[i] = space.cost(i, &measured);
            }
        }
        iterations += 1;
        let next = space.best(&completion);
        if next == best {
            break;
        }
        best = next;
        // A revisited configuration is fully measured and passes the
        // tolerance check trivially.
        if visited.contains(&best) {
            break;
        }
        visited.push(best);
    }

    let gangs = space.configs[best].iter().map(|&mask| space.gang(mask, measured.get(&mask).copied())).collect();
    let config = SystemConfig::new(gangs, best);
    debug_assert_eq!(config.completion_time, completion[best]);
    Ok(Formation {
        config,
        provenance: Provenance {
            algorithm: Algorithm::Bfc,
            period: cs.period().get(),
            tasks: cs.len(),
            iterations,
            oracle_calls,
            tolerance,
            configs_enumerated: space.configs.len(),
            visited,
            fallback: false,
        },
    })
}

/// Partitions as member bitmasks over the candidate set.
struct ConfigSpace<'a> {
    tasks: &'a [Task],
    configs: Vec<Vec<u64>>,
}

impl<'a> ConfigSpace<'a> {
    fn enumerate(cs: &'a CandidateSet) -> Self {
        let tasks = cs.tasks();
        let cores: Vec<u32> = tasks.iter().map(Task::h).collect();
        let mut configs = Vec::new();
        let mut blocks: Vec<(u64, u32)> = Vec::with_capacity(tasks.len());
        extend_partitions(0, &cores, cs.m(), &mut blocks, &mut configs);
        // Stable: within a block count, recursion order is kept.
        configs.sort_by_key(|c| std::cmp::Reverse(c.len()));
        ConfigSpace { tasks, configs }
    }

    fn members(&self, mask: u64) -> impl Iterator<Item = &Task> + '_ {
        self.tasks.iter().enumerate().filter(move |(i, _)| mask & (1 << i) != 0).map(|(_, t)| t)
    }

    fn c_iso(&self, mask: u64) -> Ticks {
        self.members(mask).map(Task::c_iso).max().unwrap_or_default()
    }

    fn gang(&self, mask: u64, c_eff: Option<Ticks>) -> VirtualGang {
        let gang = VirtualGang::new(self.members(mask).cloned().collect()).expect("members share one period");
        match c_eff {
            Some(c) => gang.with_c_eff(c).expect("measurements are at least c_iso"),
            None => gang,
        }
    }

    fn cost(&self, config: usize, measured: &HashMap<u64, Ticks>) -> Ticks {
        self.configs[config].iter().map(|g| measured.get(g).copied().unwrap_or_else(|| self.c_iso(*g))).sum()
    }

    fn best(&self, completion: &[Ticks]) -> usize {
        (0..self.configs.len())
            .min_by_key(|&i| (completion[i], self.configs[i].len(), i))
            .expect("the all-singletons configuration always exists")
    }
}

fn extend_partitions(i: usize, cores: &[u32], m: u32, blocks: &mut Vec<(u64, u32)>, out: &mut Vec<Vec<u64>>) {
    if i == cores.len() {
        out.push(blocks.iter().map(|b| b.0).collect());
        return;
    }
    for b in 0..blocks.len() {
        if blocks[b].1 + cores[i] <= m {
            blocks[b].0 |= 1 << i;
            blocks[b].1 += cores[i];
            extend_partitions(i + 1, cores, m, blocks, out);
            blocks[b].0 &= !(1 << i);
            blocks[b].1 -= cores[i];
        }
    }
    blocks.push((1 << i, cores[i]));
    extend_partitions(i + 1, cores, m, blocks, out);
    blocks.pop();
}
