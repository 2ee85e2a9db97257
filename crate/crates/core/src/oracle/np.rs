//! Non-preemptive optimum by branch and bound over (job, machine) choices.

use num_traits::Zero;

use super::{check_job_cap, CostModel, OracleResult, SearchStats};
use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::num::{Epsilon, Q};
use crate::schedule::{ObjValue, Piece, Schedule};

struct Bb<'a> {
    inst: &'a Instance,
    eps: &'a Epsilon,
    snapped: bool,
    cm: CostModel,
    /// `time[j][i]`, `None` where job `j` cannot run on machine `i`.
    time: Vec<Vec<Option<Q>>>,
    min_time: Vec<Q>,
    best: Option<(ObjValue, Vec<Piece>)>,
    stats: SearchStats,
    cap: u64,
}

impl Bb<'_> {
    fn same_column(&self, h: usize, i: usize) -> bool {
        self.time.iter().all(|row| row[h] == row[i])
    }

    fn cost(&self, j: usize, c: &Q) -> Result<ObjValue> {
        let c = if self.snapped { self.eps.snap(c)? } else { c.clone() };
        Ok(self.cm.job(&self.inst.jobs[j].weight, &c))
    }

    fn bound(&self, acc: &ObjValue, done: &[bool], last: &Q) -> Result<ObjValue> {
        let mut lb = acc.clone();
        for (j, job) in self.inst.jobs.iter().enumerate() {
            if !done[j] {
                let start = std::cmp::max(&job.release, last);
                lb = self.cm.combine(&lb, &self.cost(j, &(start + &self.min_time[j]))?);
            }
        }
        Ok(lb)
    }

    /// Jobs are added in non-decreasing start order, each as early as its
    /// machine allows.
    fn dfs(&mut self, free: &mut Vec<Q>, done: &mut Vec<bool>, last: &Q, acc: &ObjValue, pieces: &mut Vec<Piece>) -> Result<()> {
        self.stats.nodes += 1;
        if self.stats.nodes > self.cap {
            return Err(Error::Refused(format!("branch and bound exceeded the node cap of {}", self.cap)));
        }
        if done.iter().all(|&d| d) {
            let better = match &self.best {
                None => true,
                Some((b, _)) => self.cm.less(acc, b)?,
            };
            if better {
                self.best = Some((acc.clone(), pieces.clone()));
            }
            return Ok(());
        }
        if let Some((b, _)) = &self.best {
            if self.bound(acc, done, last)?.lo() >= b.hi() {
                return Ok(());
            }
        }
        let n = done.len();
        let mut moves = Vec::new();
        for j in (0..n).filter(|&j| !done[j]) {
            // identical unscheduled jobs: only the first is branched on
            let job = &self.inst.jobs[j];
            if (0..j).any(|k| !done[k] && self.time[k] == self.time[j] && self.inst.jobs[k].release == job.release && self.inst.jobs[k].weight == job.weight) {
                continue;
            }
            for i in 0..free.len() {
                let Some(p) = &self.time[j][i] else { continue };
                if (0..i).any(|h| free[h] == free[i] && self.same_column(h, i)) {
                    continue;
                }
                let start = std::cmp::max(&free[i], &job.release).clone();
                if start < *last {
                    continue;
                }
                let end = &start + p;
                moves.push((self.cost(j, &end)?.lo().clone(), j, i, start, end));
            }
        }
        moves.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, j, i, start, end) in moves {
            let prev = std::mem::replace(&mut free[i], end.clone());
            done[j] = true;
            pieces.push(Piece { machine: i, job: self.inst.jobs[j].id.clone(), start: start.clone(), end: end.clone() });
            let acc2 = self.cm.combine(acc, &self.cost(j, &end)?);
            self.dfs(free, done, &start, &acc2, pieces)?;
            pieces.pop();
            done[j] = false;
            free[i] = prev;
        }
        Ok(())
    }
}

/// Exact non-preemptive optimum on any machine environment; with `snapped`
/// each completion is charged at the right end of its interval.
pub fn opt_nonpreemptive_bb(inst: &Instance, cfg: &SchemeConfig, snapped: bool) -> Result<OracleResult> {
    check_job_cap(inst, cfg)?;
    let m = inst.env.m();
    let time: Vec<Vec<Option<Q>>> = inst.jobs.iter().map(|j| (0..m).map(|i| j.time_on(&inst.env, i)).collect()).collect();
    let mut bb = Bb {
        inst,
        eps: &inst.epsilon,
        snapped,
        cm: CostModel::new(&inst.objective),
        min_time: inst.jobs.iter().map(|j| j.min_time(&inst.env)).collect(),
        time,
        best: None,
        stats: SearchStats::default(),
        cap: cfg.oracle_state_cap,
    };
    let zero = bb.cm.zero();
    bb.dfs(&mut vec![Q::zero(); m], &mut vec![false; inst.jobs.len()], &Q::zero(), &zero, &mut Vec::new())?;
    let (value, pieces) = bb.best.take().expect("every job runs somewhere");
    Ok(OracleResult { value, witness: Schedule::new(pieces), stats: bb.stats, grid: snapped })
}
