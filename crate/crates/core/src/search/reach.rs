//! Level-by-level reachability of configuration classes and cycle detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::algmap::{ActionClass, ActionPolicy, CanonicalKey, Configuration, Engine};
use crate::error::{Error, Result};

use super::universe::Universe;

/// Which actions are followed: one policy, or every feasible action.
#[derive(Clone, Copy)]
pub enum Reach<'a> {
    Policy(&'a dyn ActionPolicy),
    AllMaps,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub x_bar: i64,
    pub x_bar2: i64,
    pub period: i64,
}

#[derive(Debug, Clone)]
pub struct ReachableSets {
    pub x0: i64,
    /// Per level (date `x0 + i`), each class with a concrete witness.
    pub levels: Vec<BTreeMap<CanonicalKey, Configuration>>,
    /// End-configuration classes with their first witness.
    pub ends: BTreeMap<CanonicalKey, Configuration>,
    /// Classes with more than one feasible action, with those actions.
    pub choices: BTreeMap<CanonicalKey, Vec<ActionClass>>,
    /// The level cap `E_cap` was reached.
    pub truncated: bool,
}

impl ReachableSets {
    pub fn keys(&self, level: usize) -> BTreeSet<&CanonicalKey> {
        self.levels[level].keys().collect()
    }

    pub fn class_count(&self) -> usize {
        self.levels.iter().map(BTreeMap::len).sum()
    }
}

/// Successors of `conf` under `action` for every release option at `x+1`.
pub(crate) fn successors(u: &Universe, engine: &Engine, conf: &Configuration, action: &ActionClass) -> Result<Vec<Configuration>> {
    let mut base = conf.clone();
    engine.apply(&mut base, action)?;
    u.catalog(base.x)
        .iter()
        .map(|set| {
            let mut c = base.clone();
            let jobs = u.jobs_of(c.x, set);
            engine.arrive(&mut c, &jobs)?;
            Ok(c)
        })
        .collect()
}

pub(crate) fn initial_configs(u: &Universe, engine: &Engine) -> Result<Vec<Configuration>> {
    let x0 = u.x_min();
    u.catalog(x0)
        .iter()
        .map(|set| {
            let mut c = engine.initial(x0);
            engine.arrive(&mut c, &u.jobs_of(x0, set))?;
            Ok(c)
        })
        .collect()
}

/// Whether a configuration can still change: jobs unfinished or releases to come.
pub(crate) fn live(u: &Universe, engine: &Engine, conf: &Configuration) -> bool {
    conf.x < u.x_last() || engine.unfinished(conf)
}

/// Breadth-first over dates until nothing is live; the level numbered
/// `E_cap - 1` is recorded but not expanded.
pub fn reachable_classes(u: &Universe, reach: Reach<'_>) -> Result<ReachableSets> {
    let engine = u.engine();
    let mut rs = ReachableSets { x0: u.x_min(), levels: Vec::new(), ends: BTreeMap::new(), choices: BTreeMap::new(), truncated: false };
    let mut level: BTreeMap<CanonicalKey, Configuration> = BTreeMap::new();
    for c in initial_configs(u, &engine)? {
        level.entry(engine.key(&c)).or_insert(c);
    }
    let mut total = 0usize;
    loop {
        total += level.len();
        if total > u.cfg.class_cap {
            return Err(Error::Refused(format!("{total} classes exceed the cap of {} at level {}", u.cfg.class_cap, rs.levels.len())));
        }
        let mut next: BTreeMap<CanonicalKey, Configuration> = BTreeMap::new();
        let last = rs.levels.len() as i64 + 1 >= u.cfg.e_cap;
        for (key, conf) in &level {
            if key.end {
                rs.ends.entry(key.clone()).or_insert_with(|| conf.clone());
            }
            if !live(u, &engine, conf) {
                continue;
            }
            if last {
                rs.truncated = true;
                continue;
            }
            let acts = engine.actions(conf);
            let chosen: Vec<ActionClass> = match reach {
                _ if acts.len() == 1 => acts.clone(),
                Reach::Policy(p) => vec![p.choose(&engine, conf, key, &acts)?],
                Reach::AllMaps => {
                    rs.choices.entry(key.clone()).or_insert_with(|| acts.clone());
                    acts.clone()
                }
            };
            for a in &chosen {
                for c in successors(u, &engine, conf, a)? {
                    next.entry(engine.key(&c)).or_insert(c);
                }
            }
        }
        rs.levels.push(level);
        if next.is_empty() {
            break;
        }
        level = next;
    }
    Ok(rs)
}

/// First pair of levels `a < b` with equal class sets such that the sets
/// keep agreeing (`ℂ_{a+k} = ℂ_{b+k}`) up to the last computed level.
pub fn detect_cycle(rs: &ReachableSets) -> Option<Cycle> {
    let keys: Vec<BTreeSet<&CanonicalKey>> = (0..rs.levels.len()).map(|i| rs.keys(i)).collect();
    for b in 1..keys.len() {
        for a in 0..b {
            if (0..keys.len() - b).all(|k| keys[a + k] == keys[b + k]) {
                return Some(Cycle { x_bar: rs.x0 + a as i64, x_bar2: rs.x0 + b as i64, period: (b - a) as i64 });
            }
        }
    }
    None
}

/// `ℂ_{x̄+k} = ℂ_{x̄'+k}` for every `k` with both levels computed.
pub fn verify_cycle(rs: &ReachableSets, c: &Cycle) -> bool {
    let a = (c.x_bar - rs.x0) as usize;
    let b = (c.x_bar2 - rs.x0) as usize;
    b < rs.levels.len() && (0..rs.levels.len() - b).all(|k| rs.keys(a + k) == rs.keys(b + k))
}
