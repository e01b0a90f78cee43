use std::cmp::Reverse;

use crate::model::{Fraction, SystemConfig, Task, VirtualGang};

use super::{measure, within_tolerance, Algorithm, CandidateSet, Formation, InterferenceOracle, Provenance};

/// Greedy packing in decreasing isolation-WCET order.
///
/// Tasks are sorted by `c_iso` descending, ties broken by larger `h` and then
/// by id. The head of the list anchors a new gang and absorbs every later
/// task that still fits on the platform. Once all gangs are formed each is
/// measured once; a gang whose co-run WCET exceeds `tolerance` over its
/// isolation WCET is split back into singletons.
pub fn gang_formation_greedy(cs: &CandidateSet, oracle: &dyn InterferenceOracle, tolerance: Fraction) -> Formation {
    let mut pending: Vec<&Task> = cs.tasks().iter().collect();
    pending.sort_by(|a, b| {
        (Reverse(a.c_iso()), Reverse(a.h()), a.id()).cmp(&(Reverse(b.c_iso()), Reverse(b.h()), b.id()))
    });

    let mut groups: Vec<Vec<Task>> = Vec::new();
    while !pending.is_empty() {
        let anchor = pending.remove(0);
        let mut cores = anchor.h();
        let mut members = vec![anchor.clone()];
        pending.retain(|t| {
            if cores + t.h() <= cs.m() {
                cores += t.h();
                members.push((*t).clone());
                false
            } else {
                true
            }
        });
        groups.push(members);
    }

    let mut oracle_calls = 0;
    let mut gangs = Vec::new();
    let mut settle = |members: Vec<Task>, gangs: &mut Vec<VirtualGang>| {
        let gang = VirtualGang::new(members).expect("candidate set shares one period");
        let c_eff = measure(oracle, &gang);
        oracle_calls += 1;
        if gang.members().len() > 1 && !within_tolerance(c_eff, gang.c_iso(), tolerance) {
            return Some(gang.members().to_vec());
        }
        gangs.push(gang.with_c_eff(c_eff).expect("measurements are at least c_iso"));
        None
    };
    for members in groups {
        if let Some(rejected) = settle(members, &mut gangs) {
            for t in rejected {
                settle(vec![t], &mut gangs);
            }
        }
    }

    Formation {
        config: SystemConfig::new(gangs, 0),
        provenance: Provenance {
            algorithm: Algorithm::Gpc,
            period: cs.period().get(),
            tasks: cs.len(),
            iterations: 0,
            oracle_calls,
            tolerance,
            configs_enumerated: 0,
            visited: Vec::new(),
            fallback: false,
        },
    }
}
