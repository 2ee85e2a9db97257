//! Search for the map with the smallest `ρ'` over a universe.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Mutex;

use num_traits::One;

use crate::algmap::{ActionClass, ActionPolicy, AlgorithmMap, BuiltinRule, CanonicalKey, Configuration, Engine};
use crate::error::{Error, Result};
use crate::model::Objective;
use crate::num::Q;
use crate::oracle::{OptPolicy, OracleCache};

use super::evaluate::{end_ratio, evaluate_map, CompetitiveReport};
use super::reach::{initial_configs, live, reachable_classes, successors, Reach};
use super::universe::Universe;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Branch-and-bound over all assignments of reachable choice keys.
    Exact,
    /// Greedy: each new choice key is fixed by the action minimizing `ρ'`
    /// on the universe truncated `h` dates ahead, `base` filling the rest.
    Heuristic { h: i64, base: BuiltinRule },
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub map: AlgorithmMap,
    pub report: CompetitiveReport,
    /// Search nodes (exact) or candidate evaluations (heuristic).
    pub nodes: u64,
}

/// Rule whose action is tried first.
fn default_rule(u: &Universe) -> BuiltinRule {
    match (u.preemptive, &u.objective) {
        (false, _) => BuiltinRule::SmithListNonpmtn,
        (true, Objective::WeightedCompletion) => BuiltinRule::WsptPmtn,
        (true, _) => BuiltinRule::Srpt,
    }
}

fn ordered_actions(rule: BuiltinRule, engine: &Engine, conf: &Configuration, key: &CanonicalKey, acts: &[ActionClass]) -> Result<Vec<ActionClass>> {
    let first = rule.choose(engine, conf, key, acts)?;
    let mut v = vec![first.clone()];
    v.extend(acts.iter().filter(|a| **a != first).cloned());
    Ok(v)
}

#[derive(Clone)]
struct Node {
    map: AlgorithmMap,
    queue: VecDeque<Configuration>,
    seen: BTreeSet<(i64, CanonicalKey)>,
    worst: Option<Q>,
}

struct Bb<'a> {
    u: &'a Universe,
    engine: Engine,
    rule: BuiltinRule,
    opt_policy: OptPolicy,
    cache: &'a OracleCache,
    ratios: BTreeMap<CanonicalKey, Q>,
    best: Option<(Q, AlgorithmMap)>,
    nodes: u64,
}

impl Bb<'_> {
    fn ratio(&mut self, key: &CanonicalKey, conf: &Configuration) -> Result<Q> {
        if let Some(r) = self.ratios.get(key) {
            return Ok(r.clone());
        }
        let r = end_ratio(&self.engine, conf, self.opt_policy, self.cache)?.ratio;
        self.ratios.insert(key.clone(), r.clone());
        Ok(r)
    }

    fn dominated(&self, worst: &Option<Q>) -> bool {
        matches!((worst, &self.best), (Some(w), Some((b, _))) if w >= b)
    }

    fn push(&self, node: &mut Node, conf: &Configuration, action: &ActionClass) -> Result<()> {
        for c in successors(self.u, &self.engine, conf, action)? {
            if node.seen.insert((c.x, self.engine.key(&c))) {
                node.queue.push_back(c);
            }
        }
        Ok(())
    }

    fn dfs(&mut self, mut node: Node) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.u.cfg.map_cap {
            return Err(Error::Refused(format!("search exceeded {} nodes", self.u.cfg.map_cap)));
        }
        let x0 = self.u.x_min();
        while let Some(conf) = node.queue.pop_front() {
            let key = self.engine.key(&conf);
            if key.end {
                let r = self.ratio(&key, &conf)?;
                if node.worst.as_ref().is_none_or(|w| r > *w) {
                    node.worst = Some(r);
                }
                if self.dominated(&node.worst) {
                    return Ok(());
                }
            }
            if !live(self.u, &self.engine, &conf) || conf.x - x0 + 1 >= self.u.cfg.e_cap {
                continue;
            }
            let acts = self.engine.actions(&conf);
            if acts.len() == 1 {
                self.push(&mut node, &conf, &acts[0])?;
                continue;
            }
            if let Some(a) = node.map.table.get(&key).cloned() {
                self.push(&mut node, &conf, &a)?;
                continue;
            }
            for a in ordered_actions(self.rule, &self.engine, &conf, &key, &acts)? {
                let mut child = node.clone();
                child.map.insert(key.clone(), a.clone());
                self.push(&mut child, &conf, &a)?;
                self.dfs(child)?;
            }
            return Ok(());
        }
        if let Some(w) = node.worst {
            if !self.dominated(&Some(w.clone())) {
                self.best = Some((w, node.map));
            }
        }
        Ok(())
    }
}

/// Policy that reads a partial map and falls back to a rule, recording the
/// keys where the fallback was used.
struct WithFallback<'a> {
    map: &'a AlgorithmMap,
    fallback: BuiltinRule,
    misses: Mutex<Vec<(i64, CanonicalKey, Configuration)>>,
}

impl ActionPolicy for WithFallback<'_> {
    fn choose(&self, engine: &Engine, conf: &Configuration, key: &CanonicalKey, actions: &[ActionClass]) -> Result<ActionClass> {
        if let Some(a) = self.map.table.get(key) {
            return Ok(a.clone());
        }
        self.misses.lock().expect("miss lock").push((conf.x, key.clone(), conf.clone()));
        self.fallback.choose(engine, conf, key, actions)
    }
}

fn heuristic(u: &Universe, opt_policy: OptPolicy, cache: &OracleCache, h: i64, base: BuiltinRule) -> Result<SearchOutcome> {
    let engine = u.engine();
    let mut map = AlgorithmMap::new();
    let mut nodes = 0u64;
    loop {
        let probe = WithFallback { map: &map, fallback: base, misses: Mutex::new(Vec::new()) };
        reachable_classes(u, Reach::Policy(&probe))?;
        let misses = probe.misses.into_inner().expect("miss lock");
        let Some((x, key, conf)) = misses.into_iter().min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1))) else { break };
        let acts = engine.actions(&conf);
        let local = u.truncated(x + h);
        let mut best: Option<(Q, ActionClass)> = None;
        for a in ordered_actions(base, &engine, &conf, &key, &acts)? {
            nodes += 1;
            let mut trial = map.clone();
            trial.insert(key.clone(), a.clone());
            let policy = WithFallback { map: &trial, fallback: base, misses: Mutex::new(Vec::new()) };
            let rho = match evaluate_map(&policy, "candidate", &local, opt_policy, cache) {
                Ok(r) => r.rho,
                Err(Error::NoEndConfigurations) => Q::one(),
                Err(e) => return Err(e),
            };
            if best.as_ref().is_none_or(|(b, _)| rho < *b) {
                best = Some((rho, a));
            }
        }
        let (_, a) = best.expect("a choice key has at least two actions");
        map.insert(key, a);
    }
    let mut report = evaluate_map(&map, "heuristic", u, opt_policy, cache)?;
    report.heuristic = true;
    report.notes.push(format!("heuristic search, lookahead {h} dates, base rule {}", base.name()));
    Ok(SearchOutcome { map, report, nodes })
}

/// Map with the smallest `ρ'` over `u`.
pub fn search_best_map(u: &Universe, opt_policy: OptPolicy, cache: &OracleCache, mode: SearchMode) -> Result<SearchOutcome> {
    if let SearchMode::Heuristic { h, base } = mode {
        return heuristic(u, opt_policy, cache, h, base);
    }
    let engine = u.engine();
    let mut root = Node { map: AlgorithmMap::new(), queue: VecDeque::new(), seen: BTreeSet::new(), worst: None };
    for c in initial_configs(u, &engine)? {
        if root.seen.insert((c.x, engine.key(&c))) {
            root.queue.push_back(c);
        }
    }
    let mut bb = Bb { u, rule: default_rule(u), engine, opt_policy, cache, ratios: BTreeMap::new(), best: None, nodes: 0 };
    bb.dfs(root)?;
    let nodes = bb.nodes;
    let Some((_, map)) = bb.best else { return Err(Error::NoEndConfigurations) };
    let mut report = evaluate_map(&map, "best", u, opt_policy, cache)?;
    report.notes.push(format!("exact branch-and-bound, {nodes} nodes"));
    Ok(SearchOutcome { map, report, nodes })
}

/// Plain exhaustion over every assignment of the choice keys reachable
/// under some map. Used to validate the branch-and-bound.
pub fn exhaustive_best_map(u: &Universe, opt_policy: OptPolicy, cache: &OracleCache) -> Result<SearchOutcome> {
    let rs = reachable_classes(u, Reach::AllMaps)?;
    let keys: Vec<(&CanonicalKey, &Vec<ActionClass>)> = rs.choices.iter().collect();
    let total = keys.iter().try_fold(1u64, |a, (_, v)| a.checked_mul(v.len() as u64)).unwrap_or(u64::MAX);
    if total > u.cfg.map_cap {
        return Err(Error::Refused(format!("{total} maps exceed the cap of {}", u.cfg.map_cap)));
    }
    let mut best: Option<(CompetitiveReport, AlgorithmMap)> = None;
    for n in 0..total {
        let mut rest = n;
        let mut map = AlgorithmMap::new();
        for (k, acts) in &keys {
            let len = acts.len() as u64;
            map.insert((*k).clone(), acts[(rest % len) as usize].clone());
            rest /= len;
        }
        let report = evaluate_map(&map, "best", u, opt_policy, cache)?;
        if best.as_ref().is_none_or(|(b, _)| report.rho < b.rho) {
            best = Some((report, map));
        }
    }
    let (mut report, map) = best.ok_or(Error::NoEndConfigurations)?;
    report.notes.push(format!("exhaustive over {total} maps"));
    Ok(SearchOutcome { map, report, nodes: total })
}
