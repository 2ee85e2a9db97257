//! Safety nets, periods and parts, and job relevance.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::sizes::release_exp;
use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::{Instance, Job, Objective};
use crate::num::{pow_i, Epsilon, Q};
use crate::schedule::release_weight;

/// Reserved window for the jobs of one release date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetWindow {
    pub release_x: i64,
    pub interval: i64,
    pub machine: usize,
    pub start: Q,
    pub end: Q,
    pub jobs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SafetyNetPlan {
    pub windows: Vec<NetWindow>,
}

impl SafetyNetPlan {
    pub fn window_of(&self, release_x: i64) -> Option<&NetWindow> {
        self.windows.iter().find(|w| w.release_x == release_x)
    }
}

/// Smallest `s` for which a volume `v` released at `R_x` fits into the
/// stretch slack `ε·|I_{x+s−1}|`.
pub fn min_feasible_s(eps: &Epsilon, x: i64, v: &Q) -> i64 {
    let e = eps.value();
    let need = v / (e * e * eps.pow(x));
    if need.is_zero() {
        return 1;
    }
    (eps.ceil_log(&need).expect("positive") + 1).max(1)
}

/// Places windows at the end of their target intervals, most recent release
/// date last. Entries are `(release_x, target interval, volume, job ids)`.
pub fn stack_windows(eps: &Epsilon, s: i64, machine: usize, entries: Vec<(i64, i64, Q, Vec<String>)>) -> Result<Vec<NetWindow>> {
    let mut by_target: BTreeMap<i64, Vec<(i64, Q, Vec<String>)>> = BTreeMap::new();
    for (x, y, v, ids) in entries {
        by_target.entry(y).or_default().push((x, v, ids));
    }
    let mut out = Vec::new();
    for (y, mut group) in by_target {
        group.sort_by_key(|g| std::cmp::Reverse(g.0));
        let total = group.iter().fold(Q::zero(), |a, g| a + &g.1);
        if total > eps.value() * eps.interval_len(y) {
            let suggested = group.iter().map(|(x, _, _)| min_feasible_s(eps, *x, &total)).max().unwrap_or(s).max(s + 1);
            return Err(Error::SafetyNet { suggested_s: suggested });
        }
        let mut end = eps.pow(y + 1);
        for (x, v, jobs) in group {
            let start = &end - &v;
            out.push(NetWindow { release_x: x, interval: y, machine, start: start.clone(), end, jobs });
            end = start;
        }
    }
    out.sort_by_key(|w| w.release_x);
    Ok(out)
}

/// One window per release date `R_x`, at the end of `I_{x+s−1}` on the
/// fastest machine, of length the date's volume at that machine's speed.
pub fn assign_safety_nets(inst: &Instance, cfg: &SchemeConfig) -> Result<SafetyNetPlan> {
    let eps = &inst.epsilon;
    let mut dates: BTreeMap<i64, (Q, Vec<String>)> = BTreeMap::new();
    for j in &inst.jobs {
        let e = dates.entry(release_exp(eps, j)).or_insert_with(|| (Q::zero(), Vec::new()));
        e.0 += j.min_time(&inst.env);
        e.1.push(j.id.clone());
    }
    let machine = (0..inst.env.m()).rev().max_by_key(|&i| inst.env.speed(i)).unwrap_or(0);
    let fits = dates.iter().all(|(x, (v, _))| *v <= eps.value() * eps.interval_len(x + cfg.s - 1));
    if !fits {
        let suggested = dates.iter().map(|(x, (v, _))| min_feasible_s(eps, *x, v)).max().expect("some date overflows");
        return Err(Error::SafetyNet { suggested_s: suggested });
    }
    let entries = dates.into_iter().map(|(x, (v, ids))| (x, x + cfg.s - 1, v, ids)).collect();
    Ok(SafetyNetPlan { windows: stack_windows(eps, cfg.s, machine, entries)? })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodInfo {
    pub index: i64,
    pub rw: Q,
}

/// Periods of `s` intervals; parts end at insignificant periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartStructure {
    pub s: i64,
    pub periods: Vec<PeriodInfo>,
    /// Indices `a_1 < … < a_ℓ` of insignificant periods.
    pub insignificant: Vec<i64>,
    /// Inclusive period ranges of the parts.
    pub parts: Vec<(i64, i64)>,
    /// Jobs released in insignificant periods.
    pub safety_net_only: Vec<String>,
}

impl PartStructure {
    pub fn period_of_x(&self, x: i64) -> i64 {
        x.div_euclid(self.s)
    }

    pub fn part_of_period(&self, k: i64) -> usize {
        self.parts.iter().position(|(a, b)| *a <= k && k <= *b).expect("parts cover all periods")
    }
}

/// Splits the periods into parts. Period `Q_{k+p}` (`p ≥ 1`) is
/// insignificant when `rw(Q_{k+p}) ≤ ε/(1+ε)^s · Σ_{i<p} rw(Q_{k+i})`,
/// where `Q_k` starts the current part; it closes that part.
pub fn partition_periods(inst: &Instance, cfg: &SchemeConfig) -> PartStructure {
    let eps = &inst.epsilon;
    let s = cfg.s;
    let mut per: BTreeMap<i64, Vec<&Job>> = BTreeMap::new();
    for j in &inst.jobs {
        per.entry(release_exp(eps, j).div_euclid(s)).or_default().push(j);
    }
    let last = per.keys().next_back().copied().unwrap_or(0);
    let first = per.keys().next().copied().unwrap_or(0).min(0);
    let ratio = eps.value() / pow_i(eps.base(), s);
    let mut periods = Vec::new();
    let mut insignificant = Vec::new();
    let mut parts = Vec::new();
    let mut safety_net_only = Vec::new();
    let mut start = first;
    let mut sum = Q::zero();
    for k in first..=last {
        let jobs = per.get(&k).cloned().unwrap_or_default();
        let rw = release_weight(jobs.iter().copied());
        if k > start && rw <= &ratio * &sum {
            insignificant.push(k);
            parts.push((start, k));
            safety_net_only.extend(jobs.iter().map(|j| j.id.clone()));
            start = k + 1;
            sum = Q::zero();
        } else {
            sum += &rw;
        }
        periods.push(PeriodInfo { index: k, rw });
    }
    if start <= last {
        parts.push((start, last));
    }
    PartStructure { s, periods, insignificant, parts, safety_net_only }
}

/// Relevance state of one job as input to [`RelevanceRule::step`].
#[derive(Debug, Clone)]
pub struct RelInput<'a> {
    pub release: &'a Q,
    pub weight: &'a Q,
    /// Released at or before `R_{x−1}`.
    pub was_released: bool,
    pub was_irrelevant: bool,
}

/// The relevance rule at one interval boundary.
#[derive(Debug, Clone)]
pub struct RelevanceRule {
    eps: Epsilon,
    gamma: i64,
    s: i64,
    makespan: bool,
    factor: Q,
}

impl RelevanceRule {
    pub fn new(cfg: &SchemeConfig, objective: &Objective) -> Self {
        let eps = cfg.epsilon.clone();
        let gamma = cfg.gamma();
        let denom = Q::from_integer((cfg.delta_jobs.max(1) as i64 * gamma).into()) * pow_i(eps.base(), gamma + cfg.s);
        let factor = eps.value() / denom;
        Self { eps, gamma, s: cfg.s, makespan: matches!(objective, Objective::Makespan), factor }
    }

    /// Domination factor `ε/(Δ·Γ·(1+ε)^{Γ+s})`.
    pub fn factor(&self) -> &Q {
        &self.factor
    }

    /// Irrelevance flags at `R_x` for jobs released by `R_x`.
    pub fn step(&self, x: i64, jobs: &[RelInput<'_>]) -> Vec<bool> {
        if self.makespan {
            let cut = self.eps.pow(x - self.s);
            return jobs.iter().map(|j| *j.release <= cut).collect();
        }
        let old = self.eps.pow(x - self.gamma);
        let now = self.eps.pow(x);
        let w_max = jobs
            .iter()
            .filter(|j| *j.release == now || (j.was_released && !j.was_irrelevant && *j.release >= old))
            .map(|j| j.weight)
            .max();
        jobs.iter()
            .map(|j| j.was_irrelevant || *j.release < old || w_max.is_some_and(|w| *j.weight < &self.factor * w))
            .collect()
    }
}

/// Tracks sticky relevance flags of a job list as time advances.
#[derive(Debug, Clone)]
pub struct RelevanceTracker {
    rule: RelevanceRule,
    x: Option<i64>,
    irrelevant: Vec<Option<bool>>,
}

impl RelevanceTracker {
    pub fn new(cfg: &SchemeConfig, objective: &Objective) -> Self {
        Self { rule: RelevanceRule::new(cfg, objective), x: None, irrelevant: Vec::new() }
    }

    /// Advances to `R_x` (stepping through skipped boundaries) and returns
    /// per-job irrelevance, `None` for unreleased jobs.
    pub fn advance(&mut self, jobs: &[Job], x: i64) -> &[Option<bool>] {
        self.irrelevant.resize(jobs.len(), None);
        let start = self.x.map_or_else(|| jobs.iter().map(|j| release_exp(&self.rule.eps, j)).min().unwrap_or(x).min(x), |p| p + 1);
        for y in start..=x {
            let now = self.rule.eps.pow(y);
            let idx: Vec<usize> = (0..jobs.len()).filter(|&i| jobs[i].release <= now).collect();
            let inputs: Vec<RelInput> = idx
                .iter()
                .map(|&i| RelInput {
                    release: &jobs[i].release,
                    weight: &jobs[i].weight,
                    was_released: self.irrelevant[i].is_some(),
                    was_irrelevant: self.irrelevant[i] == Some(true),
                })
                .collect();
            let flags = self.rule.step(y, &inputs);
            for (k, &i) in idx.iter().enumerate() {
                self.irrelevant[i] = Some(flags[k]);
            }
        }
        self.x = Some(self.x.map_or(x, |p| p.max(x)));
        &self.irrelevant
    }
}

/// Relevance flags (`true` = relevant) at `R_x` of jobs released by `R_x`.
pub fn classify_relevance(jobs: &[Job], cfg: &SchemeConfig, objective: &Objective, x: i64) -> BTreeMap<String, bool> {
    let mut t = RelevanceTracker::new(cfg, objective);
    let flags = t.advance(jobs, x).to_vec();
    jobs.iter().zip(flags).filter_map(|(j, f)| f.map(|irr| (j.id.clone(), !irr))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MachineEnv;
    use crate::num::{q, qr};

    fn eps(n: i64, d: i64) -> Epsilon {
        Epsilon::from_ratio(n, d).unwrap()
    }

    fn inst(e: Epsilon, jobs: Vec<Job>) -> Instance {
        Instance::new(e, MachineEnv::Identical { m: 1 }, true, Objective::WeightedCompletion, jobs).unwrap()
    }

    #[test]
    fn single_job_net() {
        let cfg = SchemeConfig { epsilon: eps(1, 1), s: 3, ..SchemeConfig::default() };
        let plan = assign_safety_nets(&inst(eps(1, 1), vec![Job::new("a", q(1), q(1), q(1))]), &cfg).unwrap();
        assert_eq!(plan.windows.len(), 1);
        let w = &plan.windows[0];
        assert_eq!((w.interval, w.start.clone(), w.end.clone()), (2, q(7), q(8)));
    }

    #[test]
    fn overflow_suggests_s() {
        let cfg = SchemeConfig { epsilon: eps(1, 1), s: 1, ..SchemeConfig::default() };
        let two = inst(eps(1, 1), vec![Job::new("a", q(1), q(1), q(1)), Job::new("b", q(1), q(1), q(1))]);
        assert_eq!(assign_safety_nets(&two, &cfg).unwrap_err(), Error::SafetyNet { suggested_s: 2 });
        let cfg = SchemeConfig { s: 2, ..cfg };
        assert!(assign_safety_nets(&two, &cfg).is_ok());
    }

    #[test]
    fn stacked_windows_are_disjoint() {
        let e = eps(1, 1);
        let ws = stack_windows(&e, 2, 0, vec![(0, 3, q(1), vec!["a".into()]), (1, 3, q(2), vec!["b".into()])]).unwrap();
        assert_eq!((ws[0].start.clone(), ws[0].end.clone()), (q(13), q(14)));
        assert_eq!((ws[1].start.clone(), ws[1].end.clone()), (q(14), q(16)));
    }

    #[test]
    fn insignificant_period() {
        let e = eps(1, 2);
        let cfg = SchemeConfig { epsilon: e.clone(), s: 2, ..SchemeConfig::default() };
        let r2 = e.pow(2);
        let jobs = |w1: Q| vec![Job::new("a", q(1), q(1), q(100)), Job::new("b", r2.clone(), q(1), w1 / &r2)];
        let p = partition_periods(&inst(e.clone(), jobs(q(20))), &cfg);
        assert_eq!(p.insignificant, vec![1]);
        assert_eq!(p.safety_net_only, vec!["b".to_string()]);
        assert_eq!(p.parts, vec![(0, 1)]);
        let p = partition_periods(&inst(e.clone(), jobs(q(30))), &cfg);
        assert!(p.insignificant.is_empty());
        let single = partition_periods(&inst(e, vec![Job::new("a", q(1), q(1), q(1))]), &cfg);
        assert_eq!(single.parts, vec![(0, 0)]);
    }

    #[test]
    fn relevance_examples() {
        let e = eps(1, 2);
        let cfg = SchemeConfig { epsilon: e.clone(), s: 1, k: 2, delta_jobs: 2, ..SchemeConfig::default() };
        let rule = RelevanceRule::new(&cfg, &Objective::WeightedCompletion);
        assert_eq!(rule.factor(), &qr(1, 27));
        let jobs = vec![Job::new("a", q(1), q(1), q(1)), Job::new("b", q(1), q(1), q(100))];
        let f = classify_relevance(&jobs, &cfg, &Objective::WeightedCompletion, 0);
        assert!(!f["a"] && f["b"]);

        let boundary = vec![Job::new("a", q(1), q(1), q(1))];
        assert!(classify_relevance(&boundary, &cfg, &Objective::WeightedCompletion, 2)["a"]);
        assert!(!classify_relevance(&boundary, &cfg, &Objective::WeightedCompletion, 3)["a"]);

        let mk = SchemeConfig { s: 2, ..cfg };
        assert!(classify_relevance(&boundary, &mk, &Objective::Makespan, 1)["a"]);
        assert!(!classify_relevance(&boundary, &mk, &Objective::Makespan, 2)["a"]);
    }
}
