//! Interval-by-interval execution of a policy on identical machines.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use super::{ActionClass, ActionPolicy, CanonicalKey, JobKey, JobState};
use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::{Instance, Job, Objective, Proc};
use crate::num::{fmt_q, Epsilon, Q};
use crate::oracle::GridJob;
use crate::schedule::{mcnaughton, Piece, Schedule};
use crate::simplify::{min_feasible_s, RelInput, RelevanceRule};

/// Fixed parameters of a run.
#[derive(Debug, Clone)]
pub struct Engine {
    pub eps: Epsilon,
    pub cfg: SchemeConfig,
    pub m: usize,
    pub preemptive: bool,
    pub objective: Objective,
    rule: RelevanceRule,
}

/// A released job and its progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtJob {
    pub job: Job,
    pub rx: i64,
    pub px: i64,
    pub grid: GridJob,
    /// Atoms processed (preemptive).
    pub done: i64,
    /// `(interval, atoms)` for the last `Γ` intervals.
    pub hist: Vec<(i64, i64)>,
    pub machine: Option<usize>,
    pub start: Option<Q>,
    /// Raw completion time once fixed.
    pub end: Option<Q>,
    /// Completion interval, set once the job is finished at a boundary.
    pub fin: Option<i64>,
    pub irrelevant: bool,
}

impl RtJob {
    pub fn finished(&self) -> bool {
        self.fin.is_some()
    }

    pub fn remaining_atoms(&self) -> i64 {
        self.grid.atoms - self.done
    }

    pub fn remaining_work(&self) -> Q {
        &self.grid.atom * Q::from_integer(self.remaining_atoms().into())
    }
}

/// State at the boundary `R_x`: released jobs (sorted by id), machine free
/// times, and everything scheduled so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub x: i64,
    pub jobs: Vec<RtJob>,
    pub free: Vec<Q>,
    pub pieces: Vec<Piece>,
    /// Some job was unfinished at the previous boundary.
    pub had_unfinished: bool,
}

impl Configuration {
    pub fn job(&self, id: &str) -> Option<&RtJob> {
        self.jobs.iter().find(|j| j.job.id == id)
    }
}

/// Result of [`simulate`]: the schedule, the final configuration and the
/// `(key, action)` pairs at every real choice.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub schedule: Schedule,
    pub last: Configuration,
    pub trace: Vec<(i64, CanonicalKey, ActionClass)>,
}

const MAX_STEPS: usize = 100_000;

impl Engine {
    pub fn new(cfg: &SchemeConfig, m: usize, preemptive: bool, objective: Objective) -> Self {
        Self {
            eps: cfg.epsilon.clone(),
            cfg: cfg.clone(),
            m,
            preemptive,
            rule: RelevanceRule::new(cfg, &objective),
            objective,
        }
    }

    pub fn for_instance(inst: &Instance, cfg: &SchemeConfig) -> Result<Self> {
        if !inst.env.is_identical() {
            return Err(Error::Unsupported("algorithm maps run on identical machines".into()));
        }
        let cfg = SchemeConfig { epsilon: inst.epsilon.clone(), ..cfg.clone() };
        Ok(Self::new(&cfg, inst.env.m(), inst.preemptive, inst.objective.clone()))
    }

    pub fn initial(&self, x: i64) -> Configuration {
        Configuration { x, jobs: Vec::new(), free: vec![Q::zero(); self.m], pieces: Vec::new(), had_unfinished: false }
    }

    fn makespan(&self) -> bool {
        self.objective == Objective::Makespan
    }

    /// Adds the jobs released at `R_x` and refreshes relevance; call once per
    /// boundary, with an empty slice when nothing arrives.
    pub fn arrive(&self, conf: &mut Configuration, jobs: &[Job]) -> Result<()> {
        for j in jobs {
            let Proc::Uniform(p) = &j.proc else {
                return Err(Error::Unsupported(format!("job {}: per-machine times", j.id)));
            };
            let rx = self.eps.exact_log(&j.release).ok_or_else(|| Error::Domain(format!("job {}: release is not a power of 1+eps", j.id)))?;
            let px = self.eps.exact_log(p).ok_or_else(|| Error::Domain(format!("job {}: size is not a power of 1+eps", j.id)))?;
            if rx != conf.x {
                return Err(Error::Domain(format!("job {} released at exponent {rx}, configuration is at {}", j.id, conf.x)));
            }
            if conf.job(&j.id).is_some() {
                return Err(Error::Instance(format!("duplicate job id {}", j.id)));
            }
            let grid = GridJob::new(&self.eps, &self.cfg.mu, &j.id, &j.release, p, &j.weight);
            let rt = RtJob {
                job: j.clone(),
                rx,
                px,
                grid,
                done: 0,
                hist: Vec::new(),
                machine: None,
                start: None,
                end: None,
                fin: None,
                irrelevant: false,
            };
            let pos = conf.jobs.partition_point(|o| o.job.id < j.id);
            conf.jobs.insert(pos, rt);
        }
        let inputs: Vec<RelInput> = conf
            .jobs
            .iter()
            .map(|j| RelInput { release: &j.job.release, weight: &j.job.weight, was_released: j.rx < conf.x, was_irrelevant: j.irrelevant })
            .collect();
        let flags = self.rule.step(conf.x, &inputs);
        for (j, f) in conf.jobs.iter_mut().zip(flags) {
            j.irrelevant = f;
        }
        Ok(())
    }

    pub fn unfinished(&self, conf: &Configuration) -> bool {
        conf.jobs.iter().any(|j| !j.finished())
    }

    pub fn is_end(&self, conf: &Configuration) -> bool {
        conf.had_unfinished && !self.unfinished(conf)
    }

    /// Unfinished jobs whose safety net lies in the current interval.
    pub fn net_due(&self, conf: &Configuration, i: usize) -> bool {
        let j = &conf.jobs[i];
        !j.finished() && j.rx == conf.x - self.cfg.s + 1
    }

    pub(crate) fn actionable(&self, conf: &Configuration, i: usize) -> bool {
        let j = &conf.jobs[i];
        !j.finished() && !j.irrelevant && !self.net_due(conf, i) && (self.preemptive || j.start.is_none())
    }

    pub fn job_key(&self, conf: &Configuration, i: usize) -> JobKey {
        let x = conf.x;
        let j = &conf.jobs[i];
        let net = j.irrelevant;
        let w = if net || self.makespan() {
            None
        } else {
            let w_max = conf.jobs.iter().filter(|o| !o.irrelevant).map(|o| &o.job.weight).max().expect("j is relevant");
            Some(fmt_q(&(&j.job.weight / w_max)))
        };
        let state = if self.preemptive {
            let hist = if net || self.makespan() { Vec::new() } else { j.hist.iter().map(|(y, a)| (y - x, *a)).collect() };
            JobState::Pmtn { done: j.done, hist, fin: j.fin.map(|c| c - x) }
        } else {
            JobState::NonPmtn { start: j.start.as_ref().map(|s| fmt_q(&(s / self.eps.pow(x)))), fin: j.fin.map(|c| c - x) }
        };
        JobKey { r: j.rx - x, p: j.px - x, w, state }
    }

    pub fn key(&self, conf: &Configuration) -> CanonicalKey {
        let mut jobs = Vec::new();
        let mut nets = Vec::new();
        for (i, j) in conf.jobs.iter().enumerate() {
            if !j.irrelevant {
                jobs.push(self.job_key(conf, i));
            } else if !j.finished() {
                nets.push(self.job_key(conf, i));
            }
        }
        jobs.sort();
        nets.sort();
        CanonicalKey { jobs, nets, end: self.is_end(conf) }
    }

    /// Remaining work of the jobs whose safety net is due now.
    pub fn net_volume(&self, conf: &Configuration) -> Q {
        (0..conf.jobs.len()).filter(|&i| self.net_due(conf, i)).fold(Q::zero(), |a, i| a + conf.jobs[i].remaining_work())
    }

    /// The last job on machine `i` still running at `R_x`.
    fn head(&self, conf: &Configuration, i: usize) -> Option<usize> {
        let now = self.eps.pow(conf.x);
        (0..conf.jobs.len())
            .filter(|&k| conf.jobs[k].machine == Some(i) && conf.jobs[k].end.as_ref().is_some_and(|e| *e > now))
            .max_by(|&a, &b| conf.jobs[a].end.cmp(&conf.jobs[b].end))
    }

    pub(crate) fn head_key(&self, conf: &Configuration, i: usize) -> Option<JobKey> {
        self.head(conf, i).map(|k| self.job_key(conf, k))
    }

    /// All feasible action classes, idle first.
    pub fn actions(&self, conf: &Configuration) -> Vec<ActionClass> {
        let set: BTreeSet<ActionClass> = if self.preemptive { self.pmtn_actions(conf) } else { self.np_actions(conf) };
        set.into_iter().collect()
    }

    fn pmtn_actions(&self, conf: &Configuration) -> BTreeSet<ActionClass> {
        let len = self.eps.interval_len(conf.x);
        let cap = Q::from_integer(self.m.into()) * &len - self.net_volume(conf);
        let mut cands: Vec<(JobKey, usize)> = (0..conf.jobs.len()).filter(|&i| self.actionable(conf, i)).map(|i| (self.job_key(conf, i), i)).collect();
        cands.sort();
        let max: Vec<i64> = cands
            .iter()
            .map(|(_, i)| {
                let j = &conf.jobs[*i];
                let fit: i64 = (&len / &j.grid.atom).floor().to_integer().try_into().unwrap_or(i64::MAX);
                fit.min(j.remaining_atoms())
            })
            .collect();
        let mut out = BTreeSet::new();
        let mut cur = vec![0i64; cands.len()];
        self.pmtn_rec(conf, &cands, &max, 0, &cap, &mut cur, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn pmtn_rec(&self, conf: &Configuration, cands: &[(JobKey, usize)], max: &[i64], k: usize, cap: &Q, cur: &mut Vec<i64>, out: &mut BTreeSet<ActionClass>) {
        if k == cands.len() {
            let mut v: Vec<(JobKey, i64)> = cands.iter().zip(cur.iter()).filter(|(_, &a)| a > 0).map(|((key, _), &a)| (key.clone(), a)).collect();
            v.sort();
            out.insert(ActionClass::Pmtn(v));
            return;
        }
        let mut hi = max[k];
        if k > 0 && cands[k - 1].0 == cands[k].0 {
            hi = hi.min(cur[k - 1]);
        }
        let atom = &conf.jobs[cands[k].1].grid.atom;
        for a in 0..=hi {
            let used = atom * Q::from_integer(a.into());
            if used > *cap {
                break;
            }
            cur[k] = a;
            self.pmtn_rec(conf, cands, max, k + 1, &(cap - used), cur, out);
        }
        cur[k] = 0;
    }

    fn np_actions(&self, conf: &Configuration) -> BTreeSet<ActionClass> {
        let cands: Vec<usize> = (0..conf.jobs.len()).filter(|&i| self.actionable(conf, i)).collect();
        let mut out = BTreeSet::new();
        let mut used = vec![false; conf.jobs.len()];
        let mut entries: Vec<(Option<JobKey>, Vec<JobKey>)> = Vec::new();
        self.np_machine(conf, &cands, 0, &mut used, &mut entries, &mut out);
        out
    }

    fn np_machine(
        &self,
        conf: &Configuration,
        cands: &[usize],
        i: usize,
        used: &mut Vec<bool>,
        entries: &mut Vec<(Option<JobKey>, Vec<JobKey>)>,
        out: &mut BTreeSet<ActionClass>,
    ) {
        if i == self.m || cands.iter().all(|&c| used[c]) {
            let mut v: Vec<_> = entries.iter().filter(|(_, s)| !s.is_empty()).cloned().collect();
            v.sort();
            out.insert(ActionClass::NonPmtn(v));
            return;
        }
        let t = std::cmp::max(conf.free[i].clone(), self.eps.pow(conf.x));
        entries.push((self.head_key(conf, i), Vec::new()));
        self.np_seq(conf, cands, i, &t, used, entries, out);
        entries.pop();
    }

    #[allow(clippy::too_many_arguments)]
    fn np_seq(
        &self,
        conf: &Configuration,
        cands: &[usize],
        i: usize,
        t: &Q,
        used: &mut Vec<bool>,
        entries: &mut Vec<(Option<JobKey>, Vec<JobKey>)>,
        out: &mut BTreeSet<ActionClass>,
    ) {
        self.np_machine(conf, cands, i + 1, used, entries, out);
        if *t >= self.eps.pow(conf.x + 1) {
            return;
        }
        for &c in cands {
            if used[c] {
                continue;
            }
            used[c] = true;
            entries.last_mut().expect("current machine").1.push(self.job_key(conf, c));
            let next = t + conf.jobs[c].job.p();
            self.np_seq(conf, cands, i, &next, used, entries, out);
            entries.last_mut().expect("current machine").1.pop();
            used[c] = false;
        }
    }

    /// Canonical class of concrete pieces processed in interval `x` from
    /// configuration `conf`.
    pub fn classify_schedule(&self, conf: &Configuration, pieces: &[Piece]) -> Result<ActionClass> {
        let idx = |id: &str| conf.jobs.iter().position(|j| j.job.id == id).ok_or_else(|| Error::Domain(format!("unknown job {id}")));
        let len = self.eps.interval_len(conf.x);
        let (lo, hi) = (self.eps.pow(conf.x), self.eps.pow(conf.x + 1));
        if pieces.iter().any(|p| p.start < lo || p.end > hi || p.machine >= self.m) {
            return Err(Error::Domain("piece outside the interval".into()));
        }
        if self.preemptive {
            let mut amount: BTreeMap<usize, Q> = BTreeMap::new();
            for p in pieces {
                *amount.entry(idx(&p.job)?).or_insert_with(Q::zero) += &p.end - &p.start;
            }
            let total = amount.values().fold(Q::zero(), |a, v| a + v);
            if total > Q::from_integer(self.m.into()) * &len {
                return Err(Error::Domain("interval over capacity".into()));
            }
            let mut v = Vec::new();
            for (i, a) in amount {
                let j = &conf.jobs[i];
                let atoms = &a / &j.grid.atom;
                if !atoms.is_integer() || a > len || atoms.to_integer() > j.remaining_atoms().into() {
                    return Err(Error::Domain(format!("job {}: amount is not a feasible atom count", j.job.id)));
                }
                let n: i64 = atoms.to_integer().try_into().expect("small count");
                v.push((self.job_key(conf, i), n));
            }
            v.sort();
            Ok(ActionClass::Pmtn(v))
        } else {
            let mut by_machine: BTreeMap<usize, Vec<&Piece>> = BTreeMap::new();
            for p in pieces {
                by_machine.entry(p.machine).or_default().push(p);
            }
            let mut v = Vec::new();
            for (i, mut ps) in by_machine {
                ps.sort_by(|a, b| a.start.cmp(&b.start));
                let seq = ps.iter().map(|p| Ok(self.job_key(conf, idx(&p.job)?))).collect::<Result<Vec<_>>>()?;
                v.push((self.head_key(conf, i), seq));
            }
            v.sort();
            Ok(ActionClass::NonPmtn(v))
        }
    }

    fn pick(&self, conf: &Configuration, key: &JobKey, used: &mut [bool], ok: impl Fn(usize) -> bool) -> Result<usize> {
        let i = (0..conf.jobs.len())
            .find(|&i| !used[i] && ok(i) && self.job_key(conf, i) == *key)
            .ok_or_else(|| Error::MapIncomplete(format!("action refers to [{key}], which is not available")))?;
        used[i] = true;
        Ok(i)
    }

    /// Runs `action` in interval `x`, then the safety nets due, and advances
    /// to `R_{x+1}`.
    pub fn apply(&self, conf: &mut Configuration, action: &ActionClass) -> Result<()> {
        let prev_unfinished = self.unfinished(conf);
        match action {
            ActionClass::Pmtn(v) if self.preemptive => self.apply_pmtn(conf, v)?,
            ActionClass::NonPmtn(v) if !self.preemptive => self.apply_np(conf, v)?,
            _ => return Err(Error::Domain("action kind does not match the instance".into())),
        }
        conf.x += 1;
        conf.had_unfinished = prev_unfinished;
        let now = self.eps.pow(conf.x);
        let eps = &self.eps;
        for j in &mut conf.jobs {
            if j.fin.is_none() {
                if let Some(e) = &j.end {
                    if *e <= now {
                        j.fin = Some(eps.ceil_log(e)? - 1);
                    }
                }
            }
            let keep = conf.x - self.cfg.gamma();
            j.hist.retain(|(y, _)| *y >= keep);
        }
        Ok(())
    }

    fn apply_pmtn(&self, conf: &mut Configuration, v: &[(JobKey, i64)]) -> Result<()> {
        let x = conf.x;
        let len = self.eps.interval_len(x);
        let vol = self.net_volume(conf);
        let nets: Vec<usize> = (0..conf.jobs.len()).filter(|&i| self.net_due(conf, i)).collect();
        if vol > len {
            let rx = conf.jobs[nets[0]].rx;
            return Err(Error::SafetyNet { suggested_s: min_feasible_s(&self.eps, rx, &vol).max(self.cfg.s + 1) });
        }
        let mut used = vec![false; conf.jobs.len()];
        let mut alloc: Vec<(usize, i64)> = Vec::new();
        for (k, a) in v {
            let i = self.pick(conf, k, &mut used, |i| self.actionable(conf, i))?;
            alloc.push((i, *a));
        }
        alloc.sort();
        let mut total = Q::zero();
        for &(i, a) in &alloc {
            let j = &conf.jobs[i];
            let amount = &j.grid.atom * Q::from_integer(a.into());
            if a <= 0 || a > j.remaining_atoms() || amount > len {
                return Err(Error::MapIncomplete(format!("infeasible amount for job {}", j.job.id)));
            }
            total += amount;
        }
        if total > Q::from_integer(self.m.into()) * &len - &vol {
            return Err(Error::MapIncomplete("action exceeds interval capacity".into()));
        }
        let items = crate::oracle::wrap_order(
            alloc
                .iter()
                .map(|&(i, a)| {
                    let j = &conf.jobs[i];
                    (j.job.id.clone(), &j.grid.atom * Q::from_integer(a.into()), a == j.remaining_atoms())
                })
                .collect(),
        );
        let pieces = mcnaughton(&self.eps.pow(x), &len, self.m, &(&len - &vol), &items);
        for &(i, a) in &alloc {
            let j = &mut conf.jobs[i];
            j.done += a;
            j.hist.push((x, a));
            if j.done == j.grid.atoms {
                j.end = pieces.iter().filter(|p| p.job == j.job.id).map(|p| p.end.clone()).max();
            }
        }
        conf.pieces.extend(pieces);
        let mut t = self.eps.pow(x + 1) - &vol;
        for i in nets {
            let j = &mut conf.jobs[i];
            let w = j.remaining_work();
            let end = &t + &w;
            conf.pieces.push(Piece { machine: 0, job: j.job.id.clone(), start: t.clone(), end: end.clone() });
            j.hist.push((x, j.remaining_atoms()));
            j.done = j.grid.atoms;
            j.end = Some(end.clone());
            t = end;
        }
        Ok(())
    }

    fn apply_np(&self, conf: &mut Configuration, v: &[(Option<JobKey>, Vec<JobKey>)]) -> Result<()> {
        let x = conf.x;
        let (lo, hi) = (self.eps.pow(x), self.eps.pow(x + 1));
        let heads: Vec<Option<JobKey>> = (0..self.m).map(|i| self.head_key(conf, i)).collect();
        let mut machine_used = vec![false; self.m];
        let mut used = vec![false; conf.jobs.len()];
        for (head, seq) in v {
            let i = (0..self.m)
                .find(|&i| !machine_used[i] && heads[i] == *head)
                .ok_or_else(|| Error::MapIncomplete("action refers to a machine state that does not exist".into()))?;
            machine_used[i] = true;
            let mut t = std::cmp::max(conf.free[i].clone(), lo.clone());
            for k in seq {
                let c = self.pick(conf, k, &mut used, |c| self.actionable(conf, c))?;
                if t >= hi {
                    return Err(Error::MapIncomplete("start after the interval".into()));
                }
                t = self.start_np(conf, c, i, t);
            }
        }
        let forced: Vec<usize> = (0..conf.jobs.len()).filter(|&c| self.net_due(conf, c) && conf.jobs[c].start.is_none()).collect();
        for c in forced {
            let i = (0..self.m).min_by(|&a, &b| conf.free[a].cmp(&conf.free[b]).then(a.cmp(&b))).expect("m >= 1");
            let t = std::cmp::max(conf.free[i].clone(), lo.clone());
            self.start_np(conf, c, i, t);
        }
        Ok(())
    }

    fn start_np(&self, conf: &mut Configuration, c: usize, i: usize, t: Q) -> Q {
        let j = &mut conf.jobs[c];
        let end = &t + j.job.p();
        conf.pieces.push(Piece { machine: i, job: j.job.id.clone(), start: t.clone(), end: end.clone() });
        j.machine = Some(i);
        j.start = Some(t);
        j.end = Some(end.clone());
        j.done = j.grid.atoms;
        conf.free[i] = end.clone();
        end
    }

    /// One boundary: forced actions are applied directly, otherwise `policy`
    /// chooses. Returns the key and action when there was a choice.
    pub fn step(&self, conf: &mut Configuration, policy: &dyn ActionPolicy) -> Result<Option<(CanonicalKey, ActionClass)>> {
        let acts = self.actions(conf);
        if acts.len() == 1 {
            self.apply(conf, &acts[0])?;
            return Ok(None);
        }
        let key = self.key(conf);
        let a = policy.choose(self, conf, &key, &acts)?;
        self.apply(conf, &a)?;
        Ok(Some((key, a)))
    }
}

/// Runs `policy` on a simplified instance (release dates and sizes powers
/// of `1+ε`, identical machines).
pub fn simulate(policy: &dyn ActionPolicy, inst: &Instance, cfg: &SchemeConfig) -> Result<SimOutcome> {
    let engine = Engine::for_instance(inst, cfg)?;
    simulate_with(&engine, policy, &inst.jobs)
}

pub fn simulate_with(engine: &Engine, policy: &dyn ActionPolicy, jobs: &[Job]) -> Result<SimOutcome> {
    let mut by_x: BTreeMap<i64, Vec<Job>> = BTreeMap::new();
    for j in jobs {
        let x = engine.eps.exact_log(&j.release).ok_or_else(|| Error::Domain(format!("job {}: release is not a power of 1+eps", j.id)))?;
        by_x.entry(x).or_default().push(j.clone());
    }
    let Some(&x0) = by_x.keys().next() else {
        return Ok(SimOutcome { schedule: Schedule::default(), last: engine.initial(0), trace: Vec::new() });
    };
    let last_x = *by_x.keys().last().expect("non-empty");
    let mut conf = engine.initial(x0);
    let mut trace = Vec::new();
    for _ in 0..MAX_STEPS {
        let x = conf.x;
        engine.arrive(&mut conf, by_x.get(&x).map_or(&[][..], Vec::as_slice))?;
        if conf.x >= last_x && !engine.unfinished(&conf) {
            let schedule = Schedule::new(conf.pieces.clone());
            return Ok(SimOutcome { schedule, last: conf, trace });
        }
        if let Some((k, a)) = engine.step(&mut conf, policy)? {
            trace.push((x, k, a));
        }
    }
    Err(Error::Domain("simulation did not terminate".into()))
}
