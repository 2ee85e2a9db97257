//! Preemptive optimum with free preemption points, by branching at release
//! and completion events.

use std::collections::HashMap;

use num_traits::Zero;

use super::{check_job_cap, CostModel, OracleResult, SearchStats};
use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::num::Q;
use crate::schedule::{ObjValue, Piece, Schedule};

/// Best value below a state and the first step taken from it.
type Memo = HashMap<(Q, Vec<Q>), (ObjValue, Vec<(usize, Q)>)>;

struct Ev {
    release: Vec<Q>,
    weight: Vec<Q>,
    group: Vec<usize>,
    m: usize,
    cm: CostModel,
    memo: Memo,
    stats: SearchStats,
    cap: u64,
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out: Vec<Vec<usize>> = subsets(&items[1..], k - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    out.extend(subsets(&items[1..], k));
    out
}

impl Ev {
    fn canon(&self, rem: &[Q]) -> Vec<Q> {
        let mut v: Vec<(usize, Q)> = self.group.iter().copied().zip(rem.iter().cloned()).collect();
        v.sort();
        v.into_iter().map(|(_, r)| r).collect()
    }

    /// Candidate sets to run from `t`, with the length of the step.
    fn choices(&self, t: &Q, rem: &[Q]) -> Vec<(Vec<usize>, Q)> {
        let n = rem.len();
        let avail: Vec<usize> = (0..n).filter(|&j| rem[j] > Q::zero() && self.release[j] <= *t).collect();
        let next_rel = (0..n).filter(|&j| rem[j] > Q::zero() && self.release[j] > *t).map(|j| self.release[j].clone()).min();
        if avail.is_empty() {
            let r = next_rel.expect("unfinished job pending");
            return vec![(vec![], r - t)];
        }
        // skip sets that differ only by swapping identical jobs
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for set in subsets(&avail, self.m.min(avail.len())) {
            let sig: Vec<(usize, Q)> = set.iter().map(|&j| (self.group[j], rem[j].clone())).collect();
            if !seen.insert(sig) {
                continue;
            }
            let mut step = set.iter().map(|&j| rem[j].clone()).min().expect("non-empty");
            if let Some(r) = &next_rel {
                step = step.min(r - t);
            }
            out.push((set, step));
        }
        out
    }

    fn solve(&mut self, t: &Q, rem: &[Q]) -> Result<ObjValue> {
        if rem.iter().all(Q::is_zero) {
            return Ok(self.cm.zero());
        }
        let key = (t.clone(), self.canon(rem));
        if let Some((v, _)) = self.memo.get(&key) {
            self.stats.cache_hits += 1;
            return Ok(v.clone());
        }
        self.stats.nodes += 1;
        if self.stats.nodes > self.cap {
            return Err(Error::Refused(format!("refined oracle exceeded the state cap of {}", self.cap)));
        }
        let mut best: Option<(ObjValue, Vec<(usize, Q)>)> = None;
        for (set, step) in self.choices(t, rem) {
            let (v, _) = self.child(t, rem, &set, &step)?;
            best = match best {
                Some(b) if !self.cm.less(&v, &b.0)? => Some(b),
                _ => Some((v, set.iter().map(|&j| (self.group[j], rem[j].clone())).collect())),
            };
        }
        let best = best.expect("some choice");
        self.memo.insert(key, best.clone());
        Ok(best.0)
    }

    fn child(&mut self, t: &Q, rem: &[Q], set: &[usize], step: &Q) -> Result<(ObjValue, Vec<Q>)> {
        let end = t + step;
        let mut next = rem.to_vec();
        let mut now = self.cm.zero();
        for &j in set {
            next[j] = &next[j] - step;
            if next[j].is_zero() {
                now = self.cm.combine(&now, &self.cm.job(&self.weight[j], &end));
            }
        }
        let rest = self.solve(&end, &next)?;
        Ok((self.cm.combine(&now, &rest), next))
    }
}

/// Exact for a single machine; for `m ≥ 2` only schedules that change the
/// running set at release and completion events are searched, which gives
/// an upper bound on the optimum.
pub fn opt_refined_preemptive(inst: &Instance, cfg: &SchemeConfig) -> Result<OracleResult> {
    check_job_cap(inst, cfg)?;
    if !inst.env.is_identical() {
        return Err(Error::Unsupported("refined oracle needs identical machines".into()));
    }
    let sig: Vec<(&Q, &Q, &Q)> = inst.jobs.iter().map(|j| (&j.release, j.p(), &j.weight)).collect();
    let group = sig.iter().map(|s| sig.iter().position(|t| t == s).expect("present")).collect();
    let mut ev = Ev {
        release: inst.jobs.iter().map(|j| j.release.clone()).collect(),
        weight: inst.jobs.iter().map(|j| j.weight.clone()).collect(),
        group,
        m: inst.env.m(),
        cm: CostModel::new(&inst.objective),
        memo: HashMap::new(),
        stats: SearchStats::default(),
        cap: cfg.oracle_state_cap,
    };
    let rem0: Vec<Q> = inst.jobs.iter().map(|j| j.p().clone()).collect();
    let t0 = ev.release.iter().min().cloned().unwrap_or_else(Q::zero);
    let value = ev.solve(&t0, &rem0)?;

    let mut pieces = Vec::new();
    let (mut t, mut rem) = (t0, rem0);
    while !rem.iter().all(Q::is_zero) {
        let key = (t.clone(), ev.canon(&rem));
        let (_, sig) = ev.memo.get(&key).cloned().expect("solved state");
        let set = remap(&rem, &ev.group, &sig);
        let (_, step) = ev.choices(&t, &rem).into_iter().find(|(s, _)| *s == set).expect("stored choice is available");
        let end = &t + &step;
        for (i, &j) in set.iter().enumerate() {
            pieces.push(Piece { machine: i, job: inst.jobs[j].id.clone(), start: t.clone(), end: end.clone() });
            rem[j] = &rem[j] - &step;
        }
        t = end;
    }
    Ok(OracleResult { value, witness: Schedule::new(pieces), stats: ev.stats, grid: false })
}

/// Picks, for each `(group, remaining)` entry, the first matching job.
fn remap(rem: &[Q], group: &[usize], sig: &[(usize, Q)]) -> Vec<usize> {
    let mut used = vec![false; rem.len()];
    let mut out: Vec<usize> = sig
        .iter()
        .map(|(g, r)| {
            let k = (0..rem.len()).find(|&k| !used[k] && group[k] == *g && rem[k] == *r).expect("equivalent job");
            used[k] = true;
            k
        })
        .collect();
    out.sort();
    out
}
