//! Ratios of end-configurations and competitive reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::algmap::{ActionPolicy, CanonicalKey, Configuration, Engine};
use crate::error::{Error, Result};
use crate::model::{Instance, Job, MachineEnv};
use crate::num::{fmt_q, Q};
use crate::oracle::{opt_value_cached, OptPolicy, OracleCache};
use crate::schedule::{objective_of, ObjValue};
use crate::simplify::composed_factor;

use super::reach::{reachable_classes, Reach};
use super::universe::Universe;

/// `r(C)` of one end-configuration (or one instance, for randomized maps).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndRecord {
    pub x: i64,
    pub key: String,
    pub val: Q,
    pub opt: Q,
    pub ratio: Q,
    /// The relevant jobs the ratio is taken over.
    pub jobs: Vec<Job>,
}

impl EndRecord {
    pub fn to_json(&self) -> Value {
        let jobs: Vec<Value> = self
            .jobs
            .iter()
            .map(|j| json!({"id": j.id, "release": fmt_q(&j.release), "p": fmt_q(j.p()), "weight": fmt_q(&j.weight)}))
            .collect();
        json!({"x": self.x, "key": self.key, "val": fmt_q(&self.val), "opt": fmt_q(&self.opt), "ratio": fmt_q(&self.ratio), "jobs": jobs})
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetitiveReport {
    /// `ρ'`, the largest ratio.
    pub rho: Q,
    pub argmax: EndRecord,
    /// All records, sorted by key.
    pub ends: Vec<EndRecord>,
    pub map: String,
    pub opt_policy: OptPolicy,
    pub universe: String,
    pub certificate_factor: Q,
    pub heuristic: bool,
    pub notes: Vec<String>,
}

impl CompetitiveReport {
    pub(crate) fn from_records(mut ends: Vec<EndRecord>, map: &str, opt_policy: OptPolicy, u: &Universe) -> Result<Self> {
        if ends.is_empty() {
            return Err(Error::NoEndConfigurations);
        }
        ends.sort_by(|a, b| a.key.cmp(&b.key).then(a.x.cmp(&b.x)));
        let argmax = ends.iter().fold(&ends[0], |best, e| if e.ratio > best.ratio { e } else { best }).clone();
        let notes = vec![format!("ratio quantified over the finite universe: {}", u.describe()), format!("level cap E_cap = {}", u.cfg.e_cap)];
        Ok(Self {
            rho: argmax.ratio.clone(),
            argmax,
            ends,
            map: map.to_string(),
            opt_policy,
            universe: u.describe(),
            certificate_factor: composed_factor(&crate::simplify::pipeline_certificates(&u.cfg.epsilon, u.preemptive)),
            heuristic: false,
            notes,
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rho": fmt_q(&self.rho),
            "argmax": self.argmax.to_json(),
            "certificate_factor": fmt_q(&self.certificate_factor),
            "map": self.map,
            "opt_policy": self.opt_policy,
            "universe": self.universe,
            "mode": if self.heuristic { "heuristic" } else { "exact" },
            "end_configurations": self.ends.len(),
            "notes": self.notes,
        })
    }

    /// `x,key,val,opt,ratio` per record.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,key,val,opt,ratio\n");
        for e in &self.ends {
            s.push_str(&format!("{},\"{}\",{},{},{}\n", e.x, e.key.replace('"', "'"), fmt_q(&e.val), fmt_q(&e.opt), fmt_q(&e.ratio)));
        }
        s
    }
}

pub(crate) fn exact(v: ObjValue, what: &str) -> Result<Q> {
    match v {
        ObjValue::Exact(q) => Ok(q),
        ObjValue::Bounds { .. } => Err(Error::Precision(format!("{what} is not exactly representable"))),
    }
}

/// `val_C(Rel(C)) / Opt(Rel(C))` with snapped completions of the relevant jobs.
pub fn end_ratio(engine: &Engine, conf: &Configuration, opt_policy: OptPolicy, cache: &OracleCache) -> Result<EndRecord> {
    let rel: Vec<_> = conf.jobs.iter().filter(|j| !j.irrelevant).collect();
    let items = rel
        .iter()
        .map(|j| {
            let c = j.fin.ok_or_else(|| Error::Domain(format!("job {} is unfinished", j.job.id)))?;
            Ok((j.job.weight.clone(), engine.eps.pow(c + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let val = exact(objective_of(&engine.objective, items), "value")?;
    let jobs: Vec<Job> = rel.iter().map(|j| j.job.clone()).collect();
    let inst = Instance::new(engine.eps.clone(), MachineEnv::Identical { m: engine.m }, engine.preemptive, engine.objective.clone(), jobs.clone())?;
    let opt = exact(opt_value_cached(&inst, &engine.cfg, opt_policy.is_grid(), cache)?, "optimum")?;
    let key = engine.key(conf).digest();
    Ok(EndRecord { x: conf.x, key, ratio: &val / &opt, val, opt, jobs })
}

pub(crate) fn records(engine: &Engine, ends: &BTreeMap<CanonicalKey, Configuration>, opt_policy: OptPolicy, cache: &OracleCache) -> Result<Vec<EndRecord>> {
    let confs: Vec<&Configuration> = ends.values().collect();
    confs.par_iter().map(|c| end_ratio(engine, c, opt_policy, cache)).collect()
}

/// `ρ'` of a policy: the largest `r(C)` over its reachable end-configurations.
pub fn evaluate_map(policy: &dyn ActionPolicy, name: &str, u: &Universe, opt_policy: OptPolicy, cache: &OracleCache) -> Result<CompetitiveReport> {
    let rs = reachable_classes(u, Reach::Policy(policy))?;
    let engine = u.engine();
    let recs = records(&engine, &rs.ends, opt_policy, cache)?;
    let mut report = CompetitiveReport::from_records(recs, name, opt_policy, u)?;
    if rs.truncated {
        report.notes.push("reachability stopped at E_cap before all configurations finished".into());
    }
    Ok(report)
}
