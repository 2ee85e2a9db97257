//! Finite adversary universes: per release date a catalog of job multisets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algmap::Engine;
use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::{Instance, Job, MachineEnv, Objective};
use crate::num::Q;

/// A job released at `R_x` with `p = R_{x+p}` and `w = (1+ε)^w`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobTemplate {
    pub p: i64,
    pub w: i64,
}

pub type Catalog = Vec<Vec<JobTemplate>>;

/// Description of a generated universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseSpec {
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "yes")]
    pub preemptive: bool,
    #[serde(default)]
    pub makespan: bool,
    /// Size exponents relative to the release date.
    pub p_exps: Vec<i64>,
    #[serde(default = "zero_vec")]
    pub w_exps: Vec<i64>,
    /// Jobs per date; `Δ` when absent.
    #[serde(default)]
    pub max_jobs: Option<usize>,
    /// First release exponent.
    #[serde(default)]
    pub x_min: i64,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn zero_vec() -> Vec<i64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    pub cfg: SchemeConfig,
    pub m: usize,
    pub preemptive: bool,
    pub objective: Objective,
    /// Release options per date; dates outside the map release nothing.
    pub catalogs: BTreeMap<i64, Catalog>,
}

fn multisets(items: &[JobTemplate], k: usize, from: usize, cur: &mut Vec<JobTemplate>, out: &mut Catalog) {
    out.push(cur.clone());
    if cur.len() == k {
        return;
    }
    for i in from..items.len() {
        cur.push(items[i].clone());
        multisets(items, k, i, cur, out);
        cur.pop();
    }
}

/// Every multiset of at most `Δ` templates at each date `x_min..=X_max`,
/// the empty one included. Sizes outside `[ε²/(2d), 1/ε]·R_x` are dropped.
pub fn build_universe(cfg: &SchemeConfig, spec: &UniverseSpec) -> Result<Universe> {
    cfg.validate()?;
    let eps = &cfg.epsilon;
    let e = eps.value();
    let lo = e * e / Q::from_integer((2 * cfg.d).into());
    let hi = Q::from_integer(1.into()) / e;
    let mut templates = Vec::new();
    for &p in &spec.p_exps {
        let size = eps.pow(p);
        if size < lo || size > hi {
            log::warn!("size exponent {p} outside the admissible window, skipped");
            continue;
        }
        for &w in &spec.w_exps {
            templates.push(JobTemplate { p, w });
        }
    }
    templates.sort();
    templates.dedup();
    let k = spec.max_jobs.unwrap_or(cfg.delta_jobs);
    let mut catalog = Vec::new();
    multisets(&templates, k, 0, &mut Vec::new(), &mut catalog);
    if catalog.len() > cfg.catalog_cap {
        return Err(Error::Refused(format!("catalog has {} job sets, cap is {}", catalog.len(), cfg.catalog_cap)));
    }
    let catalogs = (spec.x_min..=cfg.x_max).map(|x| (x, catalog.clone())).collect();
    let objective = if spec.makespan { Objective::Makespan } else { Objective::WeightedCompletion };
    Ok(Universe { cfg: cfg.clone(), m: spec.m, preemptive: spec.preemptive, objective, catalogs })
}

impl Universe {
    pub fn from_catalogs(cfg: &SchemeConfig, m: usize, preemptive: bool, objective: Objective, catalogs: BTreeMap<i64, Catalog>) -> Self {
        Self { cfg: cfg.clone(), m, preemptive, objective, catalogs }
    }

    /// The same catalog at every date from `x_min` to `x_last`.
    pub fn stationary(cfg: &SchemeConfig, m: usize, preemptive: bool, catalog: Catalog, x_min: i64, x_last: i64) -> Self {
        Self::rotating(cfg, m, preemptive, &[catalog], x_min, x_last)
    }

    /// Catalogs used in turn at consecutive dates.
    pub fn rotating(cfg: &SchemeConfig, m: usize, preemptive: bool, cycle: &[Catalog], x_min: i64, x_last: i64) -> Self {
        let catalogs = (x_min..=x_last).map(|x| (x, cycle[(x - x_min) as usize % cycle.len()].clone())).collect();
        Self::from_catalogs(cfg, m, preemptive, Objective::WeightedCompletion, catalogs)
    }

    pub fn engine(&self) -> Engine {
        Engine::new(&self.cfg, self.m, self.preemptive, self.objective.clone())
    }

    pub fn x_min(&self) -> i64 {
        self.catalogs.keys().next().copied().unwrap_or(0)
    }

    /// Last date at which something can be released.
    pub fn x_last(&self) -> i64 {
        self.catalogs.iter().rev().find(|(_, c)| c.iter().any(|s| !s.is_empty())).map_or(self.x_min(), |(x, _)| *x)
    }

    pub fn catalog(&self, x: i64) -> Catalog {
        self.catalogs.get(&x).cloned().unwrap_or_else(|| vec![Vec::new()])
    }

    pub fn jobs_of(&self, x: i64, set: &[JobTemplate]) -> Vec<Job> {
        let eps = &self.cfg.epsilon;
        set.iter().enumerate().map(|(k, t)| Job::new(format!("x{x}_{k}"), eps.pow(x), eps.pow(x + t.p), eps.pow(t.w))).collect()
    }

    pub fn instance(&self, jobs: Vec<Job>) -> Result<Instance> {
        Instance::new(self.cfg.epsilon.clone(), MachineEnv::Identical { m: self.m }, self.preemptive, self.objective.clone(), jobs)
    }

    /// Number of release sequences, saturating.
    pub fn instance_count(&self) -> u128 {
        (self.x_min()..=self.x_last()).fold(1u128, |a, x| a.saturating_mul(self.catalog(x).len() as u128))
    }

    /// All non-empty instances, refusing above `cap`.
    pub fn instances(&self, cap: usize) -> Result<Vec<Vec<Job>>> {
        let n = self.instance_count();
        if n > cap as u128 {
            return Err(Error::Refused(format!("universe has {n} instances, cap is {cap}")));
        }
        let mut out: Vec<Vec<Job>> = vec![Vec::new()];
        for x in self.x_min()..=self.x_last() {
            let cat = self.catalog(x);
            out = out.into_iter().flat_map(|pre| cat.iter().map(move |s| (pre.clone(), s.clone()))).map(|(mut pre, s)| {
                pre.extend(self.jobs_of(x, &s));
                pre
            }).collect();
        }
        out.retain(|v| !v.is_empty());
        Ok(out)
    }

    /// Same universe with nothing released after `x_limit`.
    pub fn truncated(&self, x_limit: i64) -> Self {
        Self { catalogs: self.catalogs.iter().filter(|(x, _)| **x <= x_limit).map(|(x, c)| (*x, c.clone())).collect(), ..self.clone() }
    }

    pub fn describe(&self) -> String {
        let sets: usize = self.catalogs.values().map(Vec::len).max().unwrap_or(0);
        format!(
            "m={} {} dates {}..={} up to {} job sets per date, {} release sequences",
            self.m,
            if self.preemptive { "preemptive" } else { "non-preemptive" },
            self.x_min(),
            self.x_last(),
            sets,
            self.instance_count()
        )
    }
}
