//! Reference oracles and property checks shared by the property tests and
//! the acceptance suite. Oracles here are written independently of the
//! library code they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Mutex;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use vgang::analysis::{assign_priorities, response_time, schedulability_test};
use vgang::experiment::{run_sweep, write_csv, SweepPolicy, SweepSpec};
use vgang::gangform::{
    config_count_bound, gang_formation_bruteforce, gang_formation_greedy, generate_system_configs, CandidateSet,
    NoInterference, DEFAULT_TOLERANCE,
};
use vgang::generator::{generate_taskset, GenSpec, TasksetType};
use vgang::interference::{
    apply_interference, gang_resource_utilization, gangftp_resource_utilization, scale_wcet,
    threaded_resource_utilization, GangDemandModel, PolicyKind, ResourceUtilization,
};
use vgang::model::{make_virtual_gang, Entity, Fraction, Task, Taskset, Ticks, VirtualGang};
use vgang::simulator::{makespan, simulate, EventKind, SimConfig, SimPolicy, SimTrace};

pub type Check = Result<(), String>;

pub fn task(id: &str, h: u32, c: u64, t: u64, demand: f64) -> Task {
    Task::new(id, h, Ticks::new(c), Ticks::new(t), Fraction::from_f64(demand).unwrap()).unwrap()
}

/// τ1..τ4 (C = 1..4, T = 10, one core each) on four cores.
pub fn table1() -> Vec<Task> {
    (1..=4).map(|i| task(&format!("tau{i}"), 1, i, 10, 0.0)).collect()
}

pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- oracles

/// Counts partitions of `cores.len()` items whose blocks each fit in `m`
/// cores: the first remaining item picks every subset of the others as its
/// block-mates.
pub fn count_viable_partitions(cores: &[u32], m: u32) -> u64 {
    fn go(items: &[u32], m: u32) -> u64 {
        let Some((&first, rest)) = items.split_first() else { return 1 };
        let mut total = 0;
        for subset in 0u32..(1 << rest.len()) {
            let width: u32 = first + (0..rest.len()).filter(|i| subset & (1 << i) != 0).map(|i| rest[i]).sum::<u32>();
            if width > m {
                continue;
            }
            let remaining: Vec<u32> = (0..rest.len()).filter(|i| subset & (1 << i) == 0).map(|i| rest[i]).collect();
            total += go(&remaining, m);
        }
        total
    }
    go(cores, m)
}

/// S(n, k) by the triangular recurrence S(n, k) = k S(n-1, k) + S(n-1, k-1).
pub fn stirling_table(max_n: usize) -> Vec<Vec<u128>> {
    let mut s = vec![vec![0u128; max_n + 1]; max_n + 1];
    s[0][0] = 1;
    for n in 1..=max_n {
        for k in 1..=n {
            s[n][k] = k as u128 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    s
}

/// S(n, k) = (1/k!) Σ_{i=0}^{k} (-1)^i C(k, i) (k - i)^n, in i128.
pub fn stirling_alternating(n: u32, k: u32) -> u128 {
    let mut binom: i128 = 1;
    let mut sum: i128 = 0;
    for i in 0..=k as i128 {
        if i > 0 {
            binom = binom * (k as i128 - i + 1) / i;
        }
        let term = binom * (k as i128 - i).pow(n);
        sum += if i % 2 == 0 { term } else { -term };
    }
    let factorial: i128 = (1..=k as i128).product();
    (sum / factorial) as u128
}

/// Most demanding subset of `others` (cores, demand in micro-units) fitting
/// into `capacity` cores, by enumerating every subset.
pub fn best_subset_demand(others: &[(u32, u64)], capacity: u32) -> u64 {
    let mut best = 0;
    for subset in 0u32..(1 << others.len()) {
        let (mut cores, mut demand) = (0, 0);
        for (i, &(h, d)) in others.iter().enumerate() {
            if subset & (1 << i) != 0 {
                cores += h;
                demand += d;
            }
        }
        if cores <= capacity {
            best = best.max(demand);
        }
    }
    best
}

/// Classic uniprocessor fixed-priority response times for `(C, T)` pairs
/// sorted by decreasing priority; `None` when a response exceeds its period.
pub fn classic_rta(tasks: &[(u64, u64)]) -> Vec<Option<u64>> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, &(c, t))| {
            let mut r = c;
            loop {
                let next = c + tasks[..i].iter().map(|&(cj, tj)| r.div_ceil(tj) * cj).sum::<u64>();
                if next > t {
                    return None;
                }
                if next == r {
                    return Some(r);
                }
                r = next;
            }
        })
        .collect()
}

/// Running intervals `(entity, start, end, cores)` rebuilt from a trace.
pub fn intervals(trace: &SimTrace) -> Vec<(String, u64, u64, Vec<u32>)> {
    let mut open: HashMap<&str, (u64, &[u32])> = HashMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Start | EventKind::Resume => {
                open.insert(&e.id, (e.time.get(), &e.cores));
            }
            EventKind::Preempt | EventKind::Complete => {
                if let Some((s, cores)) = open.remove(e.id.as_str()) {
                    out.push((e.id.clone(), s, e.time.get(), cores.to_vec()));
                }
            }
            _ => {}
        }
    }
    for (id, (s, cores)) in open {
        out.push((id.to_owned(), s, trace.end.get(), cores.to_vec()));
    }
    out
}

/// Entity of a trace id: thread suffixes `#k` are dropped; unsynchronized
/// members map to their gang through `owner`.
fn entity_of<'a>(id: &'a str, owner: &'a HashMap<String, String>) -> &'a str {
    let base = id.split('#').next().unwrap();
    owner.get(base).map_or(base, String::as_str)
}

/// No core runs two things at once and cores stay within `0..m`; under the
/// one-gang-at-a-time policies, no two entities ever overlap.
pub fn check_trace_capacity(ts: &Taskset, policy: SimPolicy, trace: &SimTrace) -> Check {
    let owner: HashMap<String, String> = ts
        .entities()
        .iter()
        .filter_map(|e| match e {
            Entity::Gang(g) => {
                Some(g.members().iter().map(|t| (t.id().to_owned(), g.id().to_owned())).collect::<Vec<_>>())
            }
            Entity::Task(_) => None,
        })
        .flatten()
        .collect();
    let iv = intervals(trace);
    for (id, s, e, cores) in &iv {
        if cores.iter().any(|&c| c >= ts.m()) || cores.iter().collect::<HashSet<_>>().len() != cores.len() {
            return Err(format!("{id} on bad cores {cores:?}"));
        }
        if s > e {
            return Err(format!("{id} interval reversed"));
        }
    }
    for (i, a) in iv.iter().enumerate() {
        for b in &iv[i + 1..] {
            let overlap = a.1 < b.2 && b.1 < a.2;
            if !overlap {
                continue;
            }
            if a.3.iter().any(|c| b.3.contains(c)) {
                return Err(format!("{} and {} share a core during [{}, {})", a.0, b.0, a.1.max(b.1), a.2.min(b.2)));
            }
            let exclusive = matches!(policy, SimPolicy::RtGang | SimPolicy::RtgSync | SimPolicy::UnsyncVgang);
            if exclusive && entity_of(&a.0, &owner) != entity_of(&b.0, &owner) {
                return Err(format!("{} and {} run together under {policy}", a.0, b.0));
            }
        }
    }
    Ok(())
}

/// Gang-FTP: after the events of each instant, no waiting entity fits on the
/// idle cores.
pub fn check_gangftp_work_conserving(ts: &Taskset, trace: &SimTrace) -> Check {
    let width: HashMap<&str, u32> = ts.entities().iter().map(|e| (e.id(), e.h())).collect();
    let mut pending: HashMap<&str, u32> = HashMap::new();
    let mut running: HashMap<&str, u32> = HashMap::new();
    let events = &trace.events;
    let mut i = 0;
    while i < events.len() {
        let now = events[i].time;
        while i < events.len() && events[i].time == now {
            let e = &events[i];
            let id = e.id.as_str();
            match e.kind {
                EventKind::Release => *pending.entry(id).or_default() += 1,
                EventKind::Start | EventKind::Resume => {
                    running.insert(id, e.cores.len() as u32);
                }
                EventKind::Preempt => {
                    running.remove(id);
                }
                EventKind::Complete => {
                    running.remove(id);
                    *pending.get_mut(id).unwrap() -= 1;
                }
                EventKind::DeadlineMiss => {}
            }
            i += 1;
        }
        if now == trace.end {
            break;
        }
        let idle = ts.m() - running.values().sum::<u32>();
        for (id, &n) in &pending {
            if n > 0 && !running.contains_key(id) && width[id] <= idle {
                return Err(format!("{id} (h = {}) waits at t = {now} with {idle} idle cores", width[id]));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------- strategies

/// Same-period candidate set: `(m, [(h, C, demand micros)])`.
pub fn candidate_strategy(max_n: usize) -> impl Strategy<Value = (u32, Vec<(u32, u64, u64)>)> {
    prop_oneof![Just(4u32), Just(8u32)]
        .prop_flat_map(move |m| (Just(m), prop::collection::vec((1..=m, 1..=20u64, 0..=1_000_000u64), 1..=max_n)))
}

pub fn candidate_set(m: u32, spec: &[(u32, u64, u64)]) -> CandidateSet {
    let tasks = spec
        .iter()
        .enumerate()
        .map(|(i, &(h, c, d))| {
            Task::new(format!("t{i}"), h, Ticks::new(c), Ticks::new(100), Fraction::from_micros(d)).unwrap()
        })
        .collect();
    CandidateSet::new(tasks, m).unwrap()
}

/// Small multi-period tasksets with short hyperperiods.
pub fn taskset_strategy() -> impl Strategy<Value = Taskset> {
    let periods = prop::sample::select(vec![4u64, 5, 6, 8, 10, 12, 15, 20, 24, 30]);
    prop_oneof![Just(2u32), Just(4u32)]
        .prop_flat_map(move |m| {
            (Just(m), prop::collection::vec((1..=m, 1..=6u64, periods.clone(), 0..=1_000_000u64), 1..=6))
        })
        .prop_map(|(m, specs)| {
            let tasks = specs
                .into_iter()
                .enumerate()
                .map(|(i, (h, c, t, d))| {
                    Task::new(format!("x{i}"), h, Ticks::new(c.min(t)), Ticks::new(t), Fraction::from_micros(d))
                        .unwrap()
                })
                .collect();
            Taskset::from_tasks(tasks, m).unwrap()
        })
}

// ----------------------------------------------------------- model checks

pub fn prop_gang_wcet_max_rule() -> Check {
    run(256, candidate_strategy(6), |(m, spec)| {
        let cs = candidate_set(m, &spec);
        let tasks = cs.tasks();
        let mut gang_members = Vec::new();
        let mut width = 0;
        let mut previous = Ticks::ZERO;
        for t in tasks {
            if width + t.h() > m {
                continue;
            }
            width += t.h();
            gang_members.push(t.clone());
            let gang = make_virtual_gang(gang_members.clone(), m).unwrap();
            let expected = gang_members.iter().map(Task::c_iso).max().unwrap();
            prop_assert_eq!(gang.c_iso(), expected);
            prop_assert!(gang.c_iso() >= previous);
            prop_assert_eq!(gang.h(), width);
            previous = gang.c_iso();
        }
        Ok(())
    })
}

pub fn prop_partition_property() -> Check {
    run(128, candidate_strategy(6), |(m, spec)| {
        let cs = candidate_set(m, &spec);
        let mut expected: Vec<&str> = cs.tasks().iter().map(Task::id).collect();
        expected.sort();
        for config in generate_system_configs(&cs) {
            let mut seen: Vec<&str> = config.gangs.iter().flat_map(|g| g.members().iter().map(Task::id)).collect();
            seen.sort();
            prop_assert_eq!(&seen, &expected);
            prop_assert!(config.gangs.iter().all(|g| g.h() <= m));
        }
        Ok(())
    })
}

pub fn prop_ticks_exact() -> Check {
    run(512, (0..u64::MAX / 2, 0..u64::MAX / 2), |(a, b)| {
        let (a, b) = (Ticks::new(a), Ticks::new(b));
        prop_assert_eq!((a + b) - b, a);
        Ok(())
    })
}

// --------------------------------------------------------- gangform checks

pub fn prop_enumeration_completeness() -> Check {
    for n in 1..=7u32 {
        for m in n..=8 {
            let cs = candidate_set(m, &vec![(1, 1, 0); n as usize]);
            let enumerated = generate_system_configs(&cs).len() as u128;
            let bound = config_count_bound(n, m).map_err(|e| e.to_string())?;
            let oracle = count_viable_partitions(&vec![1; n as usize], m) as u128;
            if enumerated != bound || enumerated != oracle {
                return Err(format!("N={n} m={m}: enumerated {enumerated}, bound {bound}, oracle {oracle}"));
            }
        }
    }
    run(256, candidate_strategy(7), |(m, spec)| {
        let cs = candidate_set(m, &spec);
        let cores: Vec<u32> = spec.iter().map(|s| s.0).collect();
        prop_assert_eq!(generate_system_configs(&cs).len() as u64, count_viable_partitions(&cores, m));
        Ok(())
    })
}

pub fn optimality_and_dominance(m: u32, spec: &[(u32, u64, u64)]) -> Result<(), TestCaseError> {
    let cs = candidate_set(m, spec);
    let bf = gang_formation_bruteforce(&cs, &NoInterference, DEFAULT_TOLERANCE)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let worst_better = generate_system_configs(&cs).into_iter().find(|c| c.completion_time < bf.config.completion_time);
    prop_assert!(worst_better.is_none(), "brute force {} beaten by {:?}", bf.config.completion_time, worst_better);
    let greedy = gang_formation_greedy(&cs, &NoInterference, DEFAULT_TOLERANCE);
    prop_assert!(greedy.config.completion_time >= bf.config.completion_time);
    Ok(())
}

pub fn prop_bruteforce_optimal_greedy_dominated() -> Check {
    run(256, candidate_strategy(7), |(m, spec)| optimality_and_dominance(m, &spec))
}

/// Deterministic pseudo-random inflation keyed by member set.
fn hashed_oracle(salt: u64) -> impl Fn(&VirtualGang) -> Ticks + Sync {
    move |g: &VirtualGang| {
        let mut h = salt;
        for t in g.members() {
            for b in t.id().bytes() {
                h = h.wrapping_mul(0x100_0000_01B3) ^ b as u64;
            }
        }
        let extra = if g.members().len() > 1 { h % (2 * g.c_iso().get() + 1) } else { 0 };
        g.c_iso() + Ticks::new(extra)
    }
}

pub fn prop_refinement_terminates_and_memoizes() -> Check {
    run(256, (candidate_strategy(7), any::<u64>()), |((m, spec), salt)| {
        let cs = candidate_set(m, &spec);
        let inner = hashed_oracle(salt);
        let calls: Mutex<Vec<String>> = Mutex::new(Vec::new());
        let oracle = |g: &VirtualGang| {
            let mut key: Vec<&str> = g.members().iter().map(Task::id).collect();
            key.sort();
            calls.lock().unwrap().push(key.join(","));
            inner(g)
        };
        let f = gang_formation_bruteforce(&cs, &oracle, DEFAULT_TOLERANCE).unwrap();
        let visited = &f.provenance.visited;
        prop_assert_eq!(visited.iter().collect::<HashSet<_>>().len(), visited.len(), "best revisited: {:?}", visited);
        let calls = calls.into_inner().unwrap();
        prop_assert_eq!(calls.iter().collect::<HashSet<_>>().len(), calls.len(), "gang measured twice");
        prop_assert_eq!(f.provenance.oracle_calls, calls.len());
        // the reported gangs carry their measured WCETs
        for g in &f.config.gangs {
            prop_assert_eq!(g.wcet(), inner(g).max(g.c_iso()));
        }
        Ok(())
    })
}

pub fn prop_formation_deterministic() -> Check {
    run(128, (candidate_strategy(6), any::<u64>()), |((m, spec), salt)| {
        let cs = candidate_set(m, &spec);
        let oracle = hashed_oracle(salt);
        let a = gang_formation_bruteforce(&cs, &oracle, DEFAULT_TOLERANCE).unwrap();
        let b = gang_formation_bruteforce(&cs, &oracle, DEFAULT_TOLERANCE).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let a = gang_formation_greedy(&cs, &oracle, DEFAULT_TOLERANCE);
        let b = gang_formation_greedy(&cs, &oracle, DEFAULT_TOLERANCE);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        Ok(())
    })
}

// ------------------------------------------------------ interference checks

pub fn prop_rt_gang_neutrality() -> Check {
    run(256, taskset_strategy(), |ts| {
        let inflated = apply_interference(&ts, PolicyKind::RtGang).unwrap();
        for e in inflated.entities() {
            prop_assert_eq!(e.wcet(), e.c_iso());
        }
        for t in ts.tasks() {
            let alone = make_virtual_gang(vec![t.clone()], ts.m()).unwrap();
            use vgang::gangform::InterferenceOracle;
            prop_assert_eq!(GangDemandModel.gang_wcet(&alone), t.c_iso());
        }
        Ok(())
    })
}

pub fn prop_interference_monotone() -> Check {
    run(256, (taskset_strategy(), 1..=1_000_000u64, 1..=2u32), |(ts, demand, h)| {
        let newcomer = Task::new("new", h, Ticks::new(1), Ticks::new(10), Fraction::from_micros(demand)).unwrap();
        let mut tasks: Vec<Task> = ts.tasks().cloned().collect();
        tasks.push(newcomer.clone());
        let grown = Taskset::from_tasks(tasks, ts.m()).unwrap();
        for t in ts.tasks() {
            let before = gangftp_resource_utilization(t, &ts).unwrap().value();
            let after = gangftp_resource_utilization(t, &grown).unwrap().value();
            prop_assert!(after >= before);
            let before = threaded_resource_utilization(t, &ts).unwrap().value();
            let after = threaded_resource_utilization(t, &grown).unwrap().value();
            prop_assert!(after >= before);
        }
        // inside a gang
        let members: Vec<Task> = ts.tasks().filter(|t| t.h() == 1).take(ts.m() as usize - 1).cloned().collect();
        if !members.is_empty() {
            let base = VirtualGang::new(members.iter().map(|t| t.clone_with_period(10)).collect()).unwrap();
            let mut more: Vec<Task> = base.members().to_vec();
            more.push(Task::new("new", 1, Ticks::new(1), Ticks::new(10), Fraction::from_micros(demand)).unwrap());
            let bigger = VirtualGang::new(more).unwrap();
            for t in base.members() {
                let before = gang_resource_utilization(t, &base).unwrap().value();
                let after = gang_resource_utilization(t, &bigger).unwrap().value();
                prop_assert!(after > before);
            }
        }
        Ok(())
    })
}

trait WithPeriod {
    fn clone_with_period(&self, period: u64) -> Task;
}

impl WithPeriod for Task {
    fn clone_with_period(&self, period: u64) -> Task {
        Task::new(self.id(), self.h(), self.c_iso().min(Ticks::new(period)), Ticks::new(period), self.demand()).unwrap()
    }
}

pub fn prop_gangftp_exact() -> Check {
    let strategy = (2..=8u32).prop_flat_map(|m| (Just(m), prop::collection::vec((1..=m, 0..=1_000_000u64), 1..=12)));
    run(256, strategy, |(m, specs)| {
        let tasks: Vec<Task> = specs
            .iter()
            .enumerate()
            .map(|(i, &(h, d))| {
                Task::new(format!("k{i}"), h, Ticks::new(1), Ticks::new(10), Fraction::from_micros(d)).unwrap()
            })
            .collect();
        let ts = Taskset::from_tasks(tasks.clone(), m).unwrap();
        for (i, t) in tasks.iter().enumerate() {
            let others: Vec<(u32, u64)> = specs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &s)| s).collect();
            let expected = specs[i].1 + best_subset_demand(&others, m - t.h());
            let got = gangftp_resource_utilization(t, &ts).unwrap();
            prop_assert_eq!(got, ResourceUtilization::from_demand(Fraction::from_micros(expected)));
        }
        Ok(())
    })
}

pub fn prop_saturation_threshold() -> Check {
    run(512, (1..=100_000u64, 0..=1_000_000u64, 1..=3_000_000u64), |(c, r, over)| {
        let c = Ticks::new(c);
        prop_assert_eq!(scale_wcet(c, ResourceUtilization::from_demand(Fraction::from_micros(r))), c);
        let big = ResourceUtilization::from_demand(Fraction::from_micros(over));
        let scaled = scale_wcet(c, big).get();
        let exact = c.get() as u128 * over.max(1_000_000) as u128;
        prop_assert_eq!(scaled as u128, exact.div_ceil(1_000_000));
        Ok(())
    })
}

// ---------------------------------------------------------- analysis checks

/// RTA-schedulable tasksets never miss a deadline in simulation.
pub fn rta_sound(ts: &Taskset, policy: SimPolicy, horizon_cap: Ticks) -> Result<bool, String> {
    if !schedulability_test(ts).schedulable {
        return Ok(false);
    }
    let mut cfg = SimConfig::new(policy);
    cfg.horizon_cap = horizon_cap;
    let trace = simulate(ts, &cfg).map_err(|e| e.to_string())?;
    if let Some(miss) = trace.events.iter().find(|e| e.kind == EventKind::DeadlineMiss) {
        return Err(format!("analysis says schedulable but {} misses at t = {}", miss.id, miss.time));
    }
    Ok(true)
}

pub fn prop_analysis_sound() -> Check {
    run(256, taskset_strategy(), |ts| {
        rta_sound(&ts, SimPolicy::RtGang, Ticks::new(1_000_000)).map_err(TestCaseError::fail)?;
        Ok(())
    })
}

pub fn prop_fixed_point_monotone() -> Check {
    run(256, taskset_strategy(), |ts| {
        let ts = assign_priorities(&ts);
        for e in ts.entities() {
            let hp: Vec<&Entity> = ts.entities().iter().filter(|o| o.priority() > e.priority()).collect();
            // independent re-run of the iteration, checking every step
            let mut r = e.wcet().get();
            let mut steps = 0;
            while r <= e.period().get() {
                let next =
                    e.wcet().get() + hp.iter().map(|o| r.div_ceil(o.period().get()) * o.wcet().get()).sum::<u64>();
                prop_assert!(next >= r, "iterate decreased from {} to {}", r, next);
                steps += 1;
                if next == r {
                    break;
                }
                r = next;
            }
            let got = response_time(e, &hp);
            if got.converged {
                prop_assert_eq!(got.value.get(), r);
                prop_assert!(steps >= 1);
            } else {
                prop_assert!(r > e.period().get() || got.value > e.period());
            }
        }
        Ok(())
    })
}

pub fn prop_priority_total_order() -> Check {
    run(256, taskset_strategy(), |ts| {
        let ts = assign_priorities(&ts);
        let prios: Vec<i64> = ts.entities().iter().map(|e| e.priority().unwrap()).collect();
        prop_assert_eq!(prios.iter().collect::<HashSet<_>>().len(), prios.len());
        for a in ts.entities() {
            for b in ts.entities() {
                let key = |e: &Entity| (e.period(), e.wcet(), e.id().to_owned());
                if key(a) < key(b) {
                    prop_assert!(a.priority() > b.priority());
                }
            }
        }
        Ok(())
    })
}

pub fn prop_rm_equivalence() -> Check {
    run(256, taskset_strategy(), |ts| {
        let gangs: Vec<Entity> =
            ts.tasks().map(|t| make_virtual_gang(vec![t.clone()], ts.m()).unwrap().into()).collect();
        let gang_ts = assign_priorities(&ts.with_entities(gangs).unwrap());
        let mut order: Vec<&Entity> = gang_ts.entities().iter().collect();
        order.sort_by_key(|e| std::cmp::Reverse(e.priority()));
        let reference = classic_rta(&order.iter().map(|e| (e.wcet().get(), e.period().get())).collect::<Vec<_>>());
        let verdict = schedulability_test(&gang_ts);
        for (e, expected) in order.iter().zip(&reference) {
            let got = verdict.per_entity[e.id()];
            match expected {
                Some(r) => {
                    prop_assert!(got.converged);
                    prop_assert_eq!(got.value.get(), *r);
                }
                None => prop_assert!(!got.converged),
            }
        }
        prop_assert_eq!(verdict.schedulable, reference.iter().all(Option::is_some));
        Ok(())
    })
}

// --------------------------------------------------------- simulator checks

pub const ALL_SIM_POLICIES: [SimPolicy; 5] =
    [SimPolicy::RtGang, SimPolicy::RtgSync, SimPolicy::UnsyncVgang, SimPolicy::GangFtp, SimPolicy::Threaded];

/// Forms gangs greedily so the gang-aware policies see virtual gangs.
fn with_gangs(ts: &Taskset) -> Taskset {
    vgang::gangform::form_taskset(ts, vgang::gangform::Algorithm::Gpc, &NoInterference, DEFAULT_TOLERANCE, true)
        .unwrap()
        .0
}

pub fn prop_core_capacity() -> Check {
    run(128, taskset_strategy(), |ts| {
        for policy in ALL_SIM_POLICIES {
            for input in [ts.clone(), with_gangs(&ts)] {
                let trace = simulate(&input, &SimConfig::new(policy)).unwrap();
                check_trace_capacity(&input, policy, &trace).map_err(TestCaseError::fail)?;
            }
        }
        Ok(())
    })
}

pub fn prop_gangftp_work_conserving() -> Check {
    run(128, taskset_strategy(), |ts| {
        let trace = simulate(&ts, &SimConfig::new(SimPolicy::GangFtp)).unwrap();
        check_gangftp_work_conserving(&ts, &trace).map_err(TestCaseError::fail)
    })
}

pub fn check_sync_pathology() -> Check {
    let m = 4;
    let gang = make_virtual_gang(table1(), m).map_err(|e| e.to_string())?;
    let ts = Taskset::new(vec![gang.into()], m).map_err(|e| e.to_string())?;
    let synced = makespan(&simulate(&ts, &SimConfig::new(SimPolicy::RtgSync)).unwrap()).unwrap();
    let cfg = SimConfig::new(SimPolicy::UnsyncVgang)
        .with_offset("tau2", Ticks::new(1))
        .with_offset("tau3", Ticks::new(3))
        .with_offset("tau4", Ticks::new(6));
    let staggered = makespan(&simulate(&ts, &cfg).unwrap()).unwrap();
    if synced != Ticks::new(4) || staggered <= synced {
        return Err(format!("synchronized {synced}, staggered {staggered}"));
    }
    Ok(())
}

pub fn prop_trace_deterministic() -> Check {
    run(64, taskset_strategy(), |ts| {
        for policy in ALL_SIM_POLICIES {
            let cfg = SimConfig::new(policy);
            prop_assert_eq!(simulate(&ts, &cfg).unwrap(), simulate(&ts, &cfg).unwrap());
        }
        Ok(())
    })
}

// --------------------------------------------------------- generator checks

pub fn gen_strategy() -> impl Strategy<Value = GenSpec> {
    let kind = prop_oneof![Just(TasksetType::Light), Just(TasksetType::Mixed), Just(TasksetType::Heavy)];
    (prop_oneof![Just(4u32), Just(8u32), Just(16u32)], 1..=64u64, kind, any::<u64>()).prop_map(
        |(m, quarter, kind, seed)| GenSpec::new(m, Fraction::from_ratio(quarter.min(4 * m as u64), 4), kind, seed),
    )
}

pub fn prop_generator_conformance() -> Check {
    run(256, gen_strategy(), |spec| {
        let ts = generate_taskset(&spec).unwrap();
        let target = spec.util_target.to_f64();
        let got = ts.utilization();
        let slack: f64 = ts.tasks().map(|t| t.h() as f64 / t.period().get() as f64).sum();
        prop_assert!(got <= target + 1e-9, "overshoot {} > {}", got, target);
        prop_assert!(target - got <= slack + 1e-9, "shortfall {} beyond {}", target - got, slack);
        let (h_lo, h_hi) = match spec.taskset_type {
            TasksetType::Light => (1, (3 * spec.m).div_ceil(10)),
            TasksetType::Heavy => ((3 * spec.m).div_ceil(10), spec.m),
            TasksetType::Mixed => (1, spec.m),
        };
        let tasks: Vec<&Task> = ts.tasks().collect();
        for (i, t) in tasks.iter().enumerate() {
            let p = t.period().get();
            prop_assert!((10..=1500).contains(&p));
            prop_assert!((h_lo..=h_hi).contains(&t.h()), "h = {} outside [{}, {}]", t.h(), h_lo, h_hi);
            let c = t.c_iso().get();
            prop_assert!(c <= p / 5, "C = {} above T/5 for T = {}", c, p);
            if i + 1 < tasks.len() {
                prop_assert!(c >= p.div_ceil(10), "C = {} below T/10 for T = {}", c, p);
            }
        }
        prop_assert_eq!(generate_taskset(&spec).unwrap(), ts);
        Ok(())
    })
}

/// Chi-square statistic of `counts` against the uniform distribution.
pub fn chi_square(counts: &BTreeMap<u32, u64>, support: std::ops::RangeInclusive<u32>) -> f64 {
    let total: u64 = counts.values().sum();
    let bins = support.clone().count() as f64;
    let expected = total as f64 / bins;
    support.map(|v| counts.get(&v).copied().unwrap_or(0) as f64).map(|o| (o - expected).powi(2) / expected).sum()
}

pub fn check_h_uniform() -> Check {
    // critical values at p = 0.001 for 2, 5 and 7 degrees of freedom
    for (kind, critical) in [(TasksetType::Light, 13.82), (TasksetType::Heavy, 20.52), (TasksetType::Mixed, 24.32)] {
        let (lo, hi) = kind.core_range(8);
        let mut counts = BTreeMap::new();
        let mut draws = 0u64;
        let mut seed = 0;
        while draws < 10_000 {
            let ts = generate_taskset(&GenSpec::new(8, Fraction::from_ratio(8, 1), kind, seed))
                .map_err(|e| e.to_string())?;
            // Pool every task, the final (shrunk) one included: generation
            // stops on a draw, and dropping that draw would favour small h.
            for t in ts.tasks() {
                *counts.entry(t.h()).or_insert(0u64) += 1;
                draws += 1;
            }
            seed += 1;
        }
        let stat = chi_square(&counts, lo..=hi);
        if stat > critical {
            return Err(format!("{kind}: chi-square {stat:.2} > {critical} over {draws} draws ({counts:?})"));
        }
    }
    Ok(())
}

// ------------------------------------------------------------ sweep checks

pub fn check_sweep_deterministic() -> Check {
    let mut spec = SweepSpec::new(4, TasksetType::Mixed);
    spec.utils = vec![Fraction::from_ratio(3, 2), Fraction::from_ratio(3, 1)];
    spec.tasksets_per_point = 12;
    spec.seed = 77;
    let render = || -> Result<String, String> {
        let rows = run_sweep(&spec).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).map_err(|e| e.to_string())?;
        Ok(String::from_utf8(buf).unwrap())
    };
    let (a, b) = (render()?, render()?);
    if a != b {
        return Err("sweep output differs between runs".into());
    }
    let simulated = [SweepPolicy::GangFtpSim, SweepPolicy::ThreadedSim];
    for p in SweepPolicy::ALL {
        if simulated.contains(&p) != p.label().ends_with("_SIM") {
            return Err(format!("{p} is mislabeled"));
        }
    }
    Ok(())
}

pub type Property = (&'static str, fn() -> Check);

/// Every property, by name.
pub fn all_properties() -> Vec<Property> {
    vec![
        ("gang WCET max rule", prop_gang_wcet_max_rule),
        ("partition property", prop_partition_property),
        ("exact tick arithmetic", prop_ticks_exact),
        ("enumeration completeness", prop_enumeration_completeness),
        ("brute-force optimality, greedy dominance", prop_bruteforce_optimal_greedy_dominated),
        ("refinement termination and memoization", prop_refinement_terminates_and_memoizes),
        ("formation determinism", prop_formation_deterministic),
        ("RT-Gang interference neutrality", prop_rt_gang_neutrality),
        ("interference monotonicity", prop_interference_monotone),
        ("Gang-FTP knapsack exactness", prop_gangftp_exact),
        ("saturation threshold", prop_saturation_threshold),
        ("analysis soundness", prop_analysis_sound),
        ("fixed-point monotonicity", prop_fixed_point_monotone),
        ("priority total order", prop_priority_total_order),
        ("RM equivalence", prop_rm_equivalence),
        ("core capacity and one-at-a-time", prop_core_capacity),
        ("Gang-FTP work conservation", prop_gangftp_work_conserving),
        ("synchronization pathology", check_sync_pathology),
        ("trace determinism", prop_trace_deterministic),
        ("generator range conformance", prop_generator_conformance),
        ("generator h uniformity", check_h_uniform),
        ("sweep determinism and SIM labels", check_sweep_deterministic),
    ]
}
