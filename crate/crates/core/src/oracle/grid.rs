//! Grid-consistent preemptive optimum: dynamic program over intervals and
//! remaining-atom vectors.

use std::collections::HashMap;

use num_traits::Zero;

use super::{check_job_cap, CostModel, OracleResult, SearchStats};
use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::num::{Epsilon, Q};
use crate::schedule::{mcnaughton, ObjValue, Piece, Schedule};

/// A job in grid units: available from interval `avail`, processed in
/// `atoms` pieces of length `atom`. Large jobs (`p ≥ ε³·R_release`) have
/// `1/μ` atoms, small jobs a single one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridJob {
    pub id: String,
    pub avail: i64,
    pub atom: Q,
    pub atoms: i64,
    pub weight: Q,
}

impl GridJob {
    pub fn new(eps: &Epsilon, mu: &Q, id: &str, release: &Q, p: &Q, weight: &Q) -> Self {
        let avail = eps.ceil_log(release).expect("positive release");
        let base = eps.floor_log(release).expect("positive release");
        let e = eps.value();
        let large = *p >= e * e * e * eps.pow(base);
        let (atom, atoms) = if large {
            let n: i64 = mu.recip().to_integer().try_into().expect("1/mu fits i64");
            (p * mu, n)
        } else {
            (p.clone(), 1)
        };
        Self { id: id.to_string(), avail, atom, atoms, weight: weight.clone() }
    }

    pub fn is_large(&self) -> bool {
        self.atoms > 1
    }
}

/// Orders one interval's processing for the wrap: jobs finishing in the
/// interval first (shortest amount first), then the rest in input order.
pub fn wrap_order(items: Vec<(String, Q, bool)>) -> Vec<(String, Q)> {
    let (mut fin, rest): (Vec<_>, Vec<_>) = items.into_iter().partition(|(_, _, f)| *f);
    fin.sort_by(|a, b| a.1.cmp(&b.1));
    fin.into_iter().chain(rest).map(|(j, a, _)| (j, a)).collect()
}

struct Dp<'a> {
    jobs: &'a [GridJob],
    group: Vec<usize>,
    eps: &'a Epsilon,
    m: Q,
    cm: CostModel,
    memo: HashMap<(i64, Vec<u16>), ObjValue>,
    stats: SearchStats,
    cap: u64,
}

impl Dp<'_> {
    fn canon(&self, rem: &[u16]) -> Vec<u16> {
        let mut v: Vec<(usize, u16)> = self.group.iter().copied().zip(rem.iter().copied()).collect();
        v.sort();
        v.into_iter().map(|(_, r)| r).collect()
    }

    /// All maximal feasible atom allocations at interval `x`.
    fn allocations(&self, x: i64, rem: &[u16]) -> Vec<Vec<u16>> {
        let len = self.eps.interval_len(x);
        let released: Vec<usize> = (0..self.jobs.len()).filter(|&j| rem[j] > 0 && self.jobs[j].avail <= x).collect();
        let max: Vec<u16> = released
            .iter()
            .map(|&j| {
                let fit = (&len / &self.jobs[j].atom).floor().to_integer();
                let fit: i64 = fit.try_into().unwrap_or(i64::MAX);
                fit.clamp(0, rem[j] as i64) as u16
            })
            .collect();
        let mut out = Vec::new();
        let mut cur = vec![0u16; self.jobs.len()];
        self.enumerate(&released, &max, rem, 0, &(&self.m * &len), &mut cur, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(&self, rel: &[usize], max: &[u16], rem: &[u16], k: usize, cap: &Q, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if k == rel.len() {
            let maximal = rel.iter().enumerate().all(|(i, &j)| cur[j] >= max[i] || self.jobs[j].atom > *cap);
            if maximal {
                out.push(cur.clone());
            }
            return;
        }
        let j = rel[k];
        let mut hi = max[k];
        if k > 0 {
            let p = rel[k - 1];
            if self.group[p] == self.group[j] && rem[p] == rem[j] {
                hi = hi.min(cur[p]);
            }
        }
        for a in (0..=hi).rev() {
            let used = &self.jobs[j].atom * Q::from_integer(a.into());
            if used > *cap {
                continue;
            }
            cur[j] = a;
            self.enumerate(rel, max, rem, k + 1, &(cap - used), cur, out);
        }
        cur[j] = 0;
    }

    fn next_x(&self, x: i64, rem: &[u16]) -> i64 {
        let pending = (0..self.jobs.len()).filter(|&j| rem[j] > 0).map(|j| self.jobs[j].avail).min().expect("unfinished jobs");
        pending.max(x)
    }

    fn step_cost(&self, x: i64, rem: &[u16], alloc: &[u16]) -> ObjValue {
        let c = self.eps.pow(x + 1);
        (0..self.jobs.len())
            .filter(|&j| rem[j] > 0 && alloc[j] == rem[j])
            .map(|j| self.cm.job(&self.jobs[j].weight, &c))
            .fold(self.cm.zero(), |a, b| self.cm.combine(&a, &b))
    }

    fn solve(&mut self, x: i64, rem: &[u16]) -> Result<ObjValue> {
        if rem.iter().all(|&r| r == 0) {
            return Ok(self.cm.zero());
        }
        let x = self.next_x(x, rem);
        let key = (x, self.canon(rem));
        if let Some(v) = self.memo.get(&key) {
            self.stats.cache_hits += 1;
            return Ok(v.clone());
        }
        self.stats.nodes += 1;
        if self.stats.nodes > self.cap {
            return Err(Error::Refused(format!("grid oracle exceeded the state cap of {}", self.cap)));
        }
        let mut best: Option<ObjValue> = None;
        for alloc in self.allocations(x, rem) {
            let next: Vec<u16> = rem.iter().zip(&alloc).map(|(r, a)| r - a).collect();
            let now = self.step_cost(x, rem, &alloc);
            let rest = self.solve(x + 1, &next)?;
            let v = self.cm.combine(&now, &rest);
            best = match best {
                Some(b) if !self.cm.less(&v, &b)? => Some(b),
                _ => Some(v),
            };
        }
        let best = best.expect("at least one allocation");
        self.memo.insert(key, best.clone());
        Ok(best)
    }
}

/// Exact optimum over grid schedules: per interval, large jobs receive whole
/// atoms, small jobs run completely or not at all, each job at most `|I_x|`,
/// all jobs together at most `m·|I_x|`; completions are snapped.
pub fn opt_grid_preemptive(inst: &Instance, cfg: &SchemeConfig) -> Result<OracleResult> {
    check_job_cap(inst, cfg)?;
    if !inst.env.is_identical() {
        return Err(Error::Unsupported("grid oracle needs identical machines".into()));
    }
    let eps = &inst.epsilon;
    let m = inst.env.m();
    let jobs: Vec<GridJob> = inst.jobs.iter().map(|j| GridJob::new(eps, &cfg.mu, &j.id, &j.release, j.p(), &j.weight)).collect();
    let sig: Vec<(i64, &Q, i64, &Q)> = jobs.iter().map(|j| (j.avail, &j.atom, j.atoms, &j.weight)).collect();
    let group: Vec<usize> = sig.iter().map(|s| sig.iter().position(|t| t == s).expect("present")).collect();
    let mut dp = Dp {
        jobs: &jobs,
        group,
        eps,
        m: Q::from_integer(m.into()),
        cm: CostModel::new(&inst.objective),
        memo: HashMap::new(),
        stats: SearchStats::default(),
        cap: cfg.oracle_state_cap,
    };
    let rem0: Vec<u16> = jobs.iter().map(|j| j.atoms as u16).collect();
    let x0 = jobs.iter().map(|j| j.avail).min().unwrap_or(0);
    let value = dp.solve(x0, &rem0)?;

    let mut pieces: Vec<Piece> = Vec::new();
    let mut rem = rem0;
    let mut x = x0;
    while rem.iter().any(|&r| r > 0) {
        x = dp.next_x(x, &rem);
        let target = dp.solve(x, &rem)?;
        let mut chosen = None;
        for alloc in dp.allocations(x, &rem) {
            let next: Vec<u16> = rem.iter().zip(&alloc).map(|(r, a)| r - a).collect();
            let now = dp.step_cost(x, &rem, &alloc);
            let rest = dp.solve(x + 1, &next)?;
            let v = dp.cm.combine(&now, &rest);
            if v == target {
                chosen = Some((alloc, next));
                break;
            }
        }
        let (alloc, next) = chosen.expect("optimal allocation reproduces the memo value");
        let items = wrap_order(
            (0..jobs.len())
                .filter(|&j| alloc[j] > 0)
                .map(|j| (jobs[j].id.clone(), &jobs[j].atom * Q::from_integer(alloc[j].into()), alloc[j] == rem[j]))
                .collect(),
        );
        let len = eps.interval_len(x);
        pieces.extend(mcnaughton(&eps.pow(x), &len, m, &len, &items));
        rem = next;
        x += 1;
    }
    debug_assert!(pieces.iter().all(|p| !(&p.end - &p.start).is_zero()));
    Ok(OracleResult { value, witness: Schedule::new(pieces), stats: dp.stats, grid: true })
}
