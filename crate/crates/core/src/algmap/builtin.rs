//! Rule-based policies and a lazily drawn random map.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionClass, ActionPolicy, AlgorithmMap, CanonicalKey, Configuration, Engine, JobKey};
use crate::error::{Error, Result};
use crate::num::Q;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinRule {
    /// Shortest remaining processing time first, as many atoms as fit.
    Srpt,
    /// Largest `w/p` first, preemptive.
    WsptPmtn,
    /// Largest `w/p` first, started on the earliest free machine.
    SmithListNonpmtn,
    /// Never processes anything; all work happens in safety nets.
    IdleSafety,
}

impl BuiltinRule {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinRule::Srpt => "srpt",
            BuiltinRule::WsptPmtn => "wspt_pmtn",
            BuiltinRule::SmithListNonpmtn => "smith_list_nonpmtn",
            BuiltinRule::IdleSafety => "idle_safety",
        }
    }
}

impl FromStr for BuiltinRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srpt" => Ok(BuiltinRule::Srpt),
            "wspt_pmtn" => Ok(BuiltinRule::WsptPmtn),
            "smith_list_nonpmtn" => Ok(BuiltinRule::SmithListNonpmtn),
            "idle_safety" => Ok(BuiltinRule::IdleSafety),
            _ => Err(Error::Config(format!("unknown builtin map {s}"))),
        }
    }
}

pub fn builtin_policy(name: &str) -> Result<BuiltinRule> {
    name.parse()
}

fn smith(conf: &Configuration, i: usize) -> Q {
    let j = &conf.jobs[i].job;
    &j.weight / j.p()
}

impl BuiltinRule {
    fn pmtn(self, engine: &Engine, conf: &Configuration) -> ActionClass {
        let len = engine.eps.interval_len(conf.x);
        let mut cap = Q::from_integer(engine.m.into()) * &len - engine.net_volume(conf);
        let mut cands: Vec<(Q, JobKey, usize)> = (0..conf.jobs.len())
            .filter(|&i| engine.actionable(conf, i))
            .map(|i| {
                let metric = match self {
                    BuiltinRule::Srpt => conf.jobs[i].remaining_work(),
                    _ => -smith(conf, i),
                };
                (metric, engine.job_key(conf, i), i)
            })
            .collect();
        cands.sort();
        let mut v = Vec::new();
        for (_, key, i) in cands {
            let j = &conf.jobs[i];
            let limit = std::cmp::min(&len, &cap);
            let fit: i64 = (limit / &j.grid.atom).floor().to_integer().try_into().unwrap_or(i64::MAX);
            let a = fit.min(j.remaining_atoms());
            if a > 0 {
                cap -= &j.grid.atom * Q::from_integer(a.into());
                v.push((key, a));
            }
        }
        v.sort();
        ActionClass::Pmtn(v)
    }

    fn list(self, engine: &Engine, conf: &Configuration) -> ActionClass {
        let (lo, hi) = (engine.eps.pow(conf.x), engine.eps.pow(conf.x + 1));
        let mut cands: Vec<(Q, JobKey, usize)> =
            (0..conf.jobs.len()).filter(|&i| engine.actionable(conf, i)).map(|i| (-smith(conf, i), engine.job_key(conf, i), i)).collect();
        cands.sort();
        let mut t: Vec<Q> = conf.free.iter().map(|f| std::cmp::max(f.clone(), lo.clone())).collect();
        let mut seqs: Vec<Vec<JobKey>> = vec![Vec::new(); engine.m];
        for (_, key, i) in cands {
            let Some(mc) = (0..engine.m).filter(|&k| t[k] < hi).min_by(|&a, &b| t[a].cmp(&t[b]).then(a.cmp(&b))) else { break };
            t[mc] = &t[mc] + conf.jobs[i].job.p();
            seqs[mc].push(key);
        }
        let mut v: Vec<(Option<JobKey>, Vec<JobKey>)> =
            seqs.into_iter().enumerate().filter(|(_, s)| !s.is_empty()).map(|(k, s)| (engine.head_key(conf, k), s)).collect();
        v.sort();
        ActionClass::NonPmtn(v)
    }
}

impl ActionPolicy for BuiltinRule {
    fn choose(&self, engine: &Engine, conf: &Configuration, _: &CanonicalKey, actions: &[ActionClass]) -> Result<ActionClass> {
        let a = match (self, engine.preemptive) {
            (BuiltinRule::IdleSafety, true) => ActionClass::Pmtn(Vec::new()),
            (BuiltinRule::IdleSafety, false) => ActionClass::NonPmtn(Vec::new()),
            (BuiltinRule::Srpt | BuiltinRule::WsptPmtn, true) => self.pmtn(engine, conf),
            (BuiltinRule::SmithListNonpmtn, false) => self.list(engine, conf),
            _ => return Err(Error::Unsupported(format!("{} does not apply to this machine model", self.name()))),
        };
        debug_assert!(actions.contains(&a), "{} produced an infeasible action", self.name());
        Ok(a)
    }
}

/// Draws a uniform action the first time a key is seen and keeps it; the
/// draw depends only on the seed and the key.
#[derive(Debug)]
pub struct RandomPolicy {
    seed: u64,
    memo: Mutex<HashMap<CanonicalKey, ActionClass>>,
}

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { seed, memo: Mutex::new(HashMap::new()) }
    }

    /// The choices made so far, as a table.
    pub fn to_map(&self) -> AlgorithmMap {
        AlgorithmMap { table: self.memo.lock().expect("memo lock").iter().map(|(k, a)| (k.clone(), a.clone())).collect() }
    }
}

impl ActionPolicy for RandomPolicy {
    fn choose(&self, _: &Engine, _: &Configuration, key: &CanonicalKey, actions: &[ActionClass]) -> Result<ActionClass> {
        let mut memo = self.memo.lock().expect("memo lock");
        if let Some(a) = memo.get(key) {
            return Ok(a.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv(&key.digest()));
        let a = actions[rng.gen_range(0..actions.len())].clone();
        memo.insert(key.clone(), a.clone());
        Ok(a)
    }
}
