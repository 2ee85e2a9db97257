//! Concrete schedules (machine pieces), completion records, objective
//! evaluation and the feasibility checker.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Job, Objective};
use crate::num::{fmt_q, qstr, rational_power_bounds, Epsilon, Q};

/// Job `job` runs on `machine` during `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub machine: usize,
    pub job: String,
    #[serde(with = "qstr")]
    pub start: Q,
    #[serde(with = "qstr")]
    pub end: Q,
}

/// Interval → machine → job → processed time.
pub type IntervalAmounts = BTreeMap<i64, BTreeMap<usize, BTreeMap<String, Q>>>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub pieces: Vec<Piece>,
}

/// Completion data of one job: `c(j)`, raw `C_j` and the snapped `R_{c(j)+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub interval: i64,
    pub raw: Q,
    pub snapped: Q,
}

/// Objective value: exact, or a certified enclosure when a fractional power
/// is irrational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjValue {
    Exact(Q),
    Bounds { lo: Q, hi: Q },
}

impl ObjValue {
    pub fn exact(&self) -> Option<&Q> {
        match self {
            ObjValue::Exact(v) => Some(v),
            ObjValue::Bounds { .. } => None,
        }
    }

    pub fn lo(&self) -> &Q {
        match self {
            ObjValue::Exact(v) => v,
            ObjValue::Bounds { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> &Q {
        match self {
            ObjValue::Exact(v) => v,
            ObjValue::Bounds { hi, .. } => hi,
        }
    }

    /// Orders two values, refusing when the enclosures overlap.
    pub fn try_cmp(&self, other: &ObjValue) -> Result<Ordering> {
        if let (ObjValue::Exact(a), ObjValue::Exact(b)) = (self, other) {
            return Ok(a.cmp(b));
        }
        if self.hi() < other.lo() {
            Ok(Ordering::Less)
        } else if self.lo() > other.hi() {
            Ok(Ordering::Greater)
        } else {
            Err(Error::Precision(format!(
                "cannot order [{}, {}] and [{}, {}]",
                fmt_q(self.lo()),
                fmt_q(self.hi()),
                fmt_q(other.lo()),
                fmt_q(other.hi())
            )))
        }
    }

    fn add(self, other: ObjValue) -> ObjValue {
        match (self, other) {
            (ObjValue::Exact(a), ObjValue::Exact(b)) => ObjValue::Exact(a + b),
            (a, b) => ObjValue::Bounds { lo: a.lo() + b.lo(), hi: a.hi() + b.hi() },
        }
    }
}

/// Bits of precision used for irrational monomial powers.
pub const POWER_PRECISION_BITS: u32 = 96;

/// `k·C^α` for a positive completion time.
pub fn monomial_cost(c: &Q, k: &Q, alpha: &Q) -> ObjValue {
    let a = alpha.numer().to_u32().expect("alpha numerator fits u32");
    let b = alpha.denom().to_u32().expect("alpha denominator fits u32");
    let (lo, hi) = rational_power_bounds(c, a, b, POWER_PRECISION_BITS);
    if lo == hi {
        ObjValue::Exact(k * lo)
    } else {
        ObjValue::Bounds { lo: k * lo, hi: k * hi }
    }
}

/// Aggregates per-job completion times into the objective value.
pub fn objective_of(objective: &Objective, items: impl IntoIterator<Item = (Q, Q)>) -> ObjValue {
    match objective {
        Objective::WeightedCompletion => ObjValue::Exact(items.into_iter().map(|(w, c)| w * c).fold(Q::zero(), |a, b| a + b)),
        Objective::Makespan => ObjValue::Exact(items.into_iter().map(|(_, c)| c).max().unwrap_or_else(Q::zero)),
        Objective::Monomial { k, alpha } => items.into_iter().fold(ObjValue::Exact(Q::zero()), |acc, (w, c)| {
            let v = match monomial_cost(&c, k, alpha) {
                ObjValue::Exact(v) => ObjValue::Exact(&w * v),
                ObjValue::Bounds { lo, hi } => ObjValue::Bounds { lo: &w * lo, hi: &w * hi },
            };
            acc.add(v)
        }),
    }
}

/// `rw(J) = Σ r_j·w_j`.
pub fn release_weight<'a>(jobs: impl IntoIterator<Item = &'a Job>) -> Q {
    jobs.into_iter().map(|j| &j.release * &j.weight).fold(Q::zero(), |a, b| a + b)
}

/// First violated constraint found by [`check_schedule_feasibility`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownJob { job: String },
    EmptyPiece { job: String },
    BadMachine { job: String, machine: usize },
    /// Two pieces overlap on one machine (interval capacity exceeded).
    Capacity { machine: usize, interval: i64, jobs: (String, String) },
    /// A job runs on two machines at once.
    Parallel { job: String, interval: i64 },
    Release { job: String, interval: i64 },
    Overwork { job: String },
    NonPreemptive { job: String },
}

impl Schedule {
    pub fn new(pieces: Vec<Piece>) -> Self {
        Self { pieces }
    }

    /// Fraction of `job`'s requirement processed by the pieces.
    fn processed_fraction(&self, inst: &Instance, job: &Job) -> Q {
        self.pieces
            .iter()
            .filter(|p| p.job == job.id)
            .map(|p| match job.time_on(&inst.env, p.machine) {
                Some(t) => (&p.end - &p.start) / t,
                None => Q::zero(),
            })
            .fold(Q::zero(), |a, b| a + b)
    }

    pub fn completion(&self, inst: &Instance, job: &Job) -> Result<Option<Completion>> {
        if self.processed_fraction(inst, job) < Q::one() {
            return Ok(None);
        }
        let raw = self.pieces.iter().filter(|p| p.job == job.id).map(|p| p.end.clone()).max().expect("pieces exist");
        completion_record(&inst.epsilon, raw).map(Some)
    }

    pub fn completions(&self, inst: &Instance) -> Result<BTreeMap<String, Completion>> {
        let mut out = BTreeMap::new();
        let mut unfinished = Vec::new();
        for j in &inst.jobs {
            match self.completion(inst, j)? {
                Some(c) => {
                    out.insert(j.id.clone(), c);
                }
                None => unfinished.push(j.id.clone()),
            }
        }
        if unfinished.is_empty() {
            Ok(out)
        } else {
            Err(Error::Incomplete(unfinished))
        }
    }

    /// Per interval, per machine: processed amount (time) of each job.
    pub fn interval_amounts(&self, eps: &Epsilon) -> Result<IntervalAmounts> {
        let mut out = IntervalAmounts::new();
        for p in &self.pieces {
            let mut t = p.start.clone();
            while t < p.end {
                let x = eps.interval_of(&t)?;
                let end = std::cmp::min(p.end.clone(), eps.pow(x + 1));
                *out.entry(x).or_default().entry(p.machine).or_default().entry(p.job.clone()).or_insert_with(Q::zero) += &end - &t;
                t = end;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self, eps: &Epsilon) -> Result<String> {
        #[derive(Serialize)]
        struct IntervalOut {
            x: i64,
            machines: BTreeMap<usize, Vec<(String, String)>>,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            pieces: &'a [Piece],
            intervals: Vec<IntervalOut>,
        }
        let intervals = self
            .interval_amounts(eps)?
            .into_iter()
            .map(|(x, ms)| IntervalOut {
                x,
                machines: ms.into_iter().map(|(i, js)| (i, js.into_iter().map(|(j, a)| (j, fmt_q(&a))).collect())).collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&Out { pieces: &self.pieces, intervals }).expect("schedule serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct In {
            pieces: Vec<Piece>,
        }
        let v: In = serde_json::from_str(text).map_err(|e| Error::Parse { field: "schedule".into(), msg: e.to_string() })?;
        Ok(Schedule { pieces: v.pieces })
    }
}

/// McNaughton wrap of per-job amounts into one interval `[start, start+len)`.
/// Machines are filled in the order `1, …, m−1, 0`; machine 0 only offers
/// `cap0 ≤ len` (the rest is reserved). Every amount must be at most `len`.
pub fn mcnaughton(start: &Q, len: &Q, m: usize, cap0: &Q, items: &[(String, Q)]) -> Vec<Piece> {
    let order: Vec<usize> = (1..m).chain(std::iter::once(0)).collect();
    let cap = |i: usize| if i == 0 { cap0.clone() } else { len.clone() };
    let mut out = Vec::new();
    let mut k = 0;
    let mut t = Q::zero();
    for (job, amount) in items {
        let mut left = amount.clone();
        while left.is_positive() {
            let machine = *order.get(k).expect("amounts fit the interval");
            let room = cap(machine) - &t;
            if !room.is_positive() {
                k += 1;
                t = Q::zero();
                continue;
            }
            let take = std::cmp::min(left.clone(), room.clone());
            out.push(Piece { machine, job: job.clone(), start: start + &t, end: start + &t + &take });
            left -= &take;
            t += take;
        }
    }
    out
}

pub fn completion_record(eps: &Epsilon, raw: Q) -> Result<Completion> {
    let snapped_exp = eps.ceil_log(&raw)?;
    Ok(Completion { interval: snapped_exp - 1, snapped: eps.pow(snapped_exp), raw })
}

/// Objective value of a complete schedule, using raw or snapped completion times.
pub fn evaluate_objective(sched: &Schedule, inst: &Instance, snapped: bool) -> Result<ObjValue> {
    let comps = sched.completions(inst)?;
    Ok(objective_of(
        &inst.objective,
        inst.jobs.iter().map(|j| {
            let c = &comps[&j.id];
            (j.weight.clone(), if snapped { c.snapped.clone() } else { c.raw.clone() })
        }),
    ))
}

/// Verifies machine capacity, job non-parallelism, release dates, work
/// conservation and (when preemption is off) single-machine contiguity with
/// reserved idle gaps.
pub fn check_schedule_feasibility(sched: &Schedule, inst: &Instance) -> std::result::Result<(), Violation> {
    let eps = &inst.epsilon;
    let ix = |t: &Q| eps.floor_log(t).unwrap_or(i64::MIN);
    let jobs: HashMap<&str, &Job> = inst.jobs.iter().map(|j| (j.id.as_str(), j)).collect();
    for p in &sched.pieces {
        let Some(job) = jobs.get(p.job.as_str()) else {
            return Err(Violation::UnknownJob { job: p.job.clone() });
        };
        if p.end <= p.start {
            return Err(Violation::EmptyPiece { job: p.job.clone() });
        }
        if p.machine >= inst.env.m() || job.time_on(&inst.env, p.machine).is_none() {
            return Err(Violation::BadMachine { job: p.job.clone(), machine: p.machine });
        }
        if p.start < job.release {
            return Err(Violation::Release { job: p.job.clone(), interval: ix(&p.start) });
        }
    }
    let mut by_machine: BTreeMap<usize, Vec<&Piece>> = BTreeMap::new();
    let mut by_job: BTreeMap<&str, Vec<&Piece>> = BTreeMap::new();
    for p in &sched.pieces {
        by_machine.entry(p.machine).or_default().push(p);
        by_job.entry(p.job.as_str()).or_default().push(p);
    }
    for (m, ps) in by_machine.iter_mut() {
        ps.sort_by(|a, b| a.start.cmp(&b.start));
        for w in ps.windows(2) {
            if w[1].start < w[0].end {
                return Err(Violation::Capacity { machine: *m, interval: ix(&w[1].start), jobs: (w[0].job.clone(), w[1].job.clone()) });
            }
        }
    }
    for (id, ps) in by_job.iter_mut() {
        ps.sort_by(|a, b| a.start.cmp(&b.start));
        for w in ps.windows(2) {
            if w[1].start < w[0].end {
                return Err(Violation::Parallel { job: id.to_string(), interval: ix(&w[1].start) });
            }
        }
        let job = jobs[id];
        if sched.processed_fraction(inst, job) > Q::one() {
            return Err(Violation::Overwork { job: id.to_string() });
        }
        if !inst.preemptive {
            let machine = ps[0].machine;
            if ps.iter().any(|p| p.machine != machine) {
                return Err(Violation::NonPreemptive { job: id.to_string() });
            }
            let (lo, hi) = (&ps[0].start, &ps[ps.len() - 1].end);
            let intruder = by_machine[&machine].iter().any(|p| p.job != *id && p.start < *hi && p.end > *lo);
            if intruder {
                return Err(Violation::NonPreemptive { job: id.to_string() });
            }
        }
    }
    Ok(())
}

/// True when every job completes no earlier than its release plus its fastest running time.
pub fn respects_lower_bounds(sched: &Schedule, inst: &Instance) -> Result<bool> {
    let comps = sched.completions(inst)?;
    Ok(inst.jobs.iter().all(|j| {
        let c = &comps[&j.id].raw;
        *c >= &j.release + j.min_time(&inst.env) && !c.is_negative()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MachineEnv;
    use crate::num::{q, qr};

    fn one_job(eps: (i64, i64), objective: Objective) -> Instance {
        Instance::new(
            Epsilon::from_ratio(eps.0, eps.1).unwrap(),
            MachineEnv::Identical { m: 1 },
            true,
            objective,
            vec![Job::new("a", q(1), q(2), q(3))],
        )
        .unwrap()
    }

    fn piece(m: usize, j: &str, s: Q, e: Q) -> Piece {
        Piece { machine: m, job: j.into(), start: s, end: e }
    }

    #[test]
    fn single_job_raw_and_snapped() {
        let inst = one_job((1, 1), Objective::WeightedCompletion);
        let s = Schedule::new(vec![piece(0, "a", q(1), q(3))]);
        assert_eq!(evaluate_objective(&s, &inst, false).unwrap(), ObjValue::Exact(q(9)));
        assert_eq!(evaluate_objective(&s, &inst, true).unwrap(), ObjValue::Exact(q(12)));
        let c = s.completion(&inst, &inst.jobs[0]).unwrap().unwrap();
        assert_eq!(c.interval, 1);
    }

    #[test]
    fn makespan_is_max() {
        let inst = Instance::new(
            Epsilon::from_ratio(1, 1).unwrap(),
            MachineEnv::Identical { m: 2 },
            true,
            Objective::Makespan,
            vec![Job::new("a", q(1), q(2), q(1)), Job::new("b", q(1), q(3), q(1))],
        )
        .unwrap();
        let s = Schedule::new(vec![piece(0, "a", q(1), q(3)), piece(1, "b", q(1), q(4))]);
        assert_eq!(evaluate_objective(&s, &inst, false).unwrap(), ObjValue::Exact(q(4)));
    }

    #[test]
    fn incomplete_schedule_lists_jobs() {
        let inst = one_job((1, 1), Objective::WeightedCompletion);
        let s = Schedule::new(vec![piece(0, "a", q(1), q(2))]);
        assert_eq!(evaluate_objective(&s, &inst, false), Err(Error::Incomplete(vec!["a".into()])));
    }

    #[test]
    fn monomial_exact_and_bounded() {
        let inst = one_job((1, 1), Objective::Monomial { k: q(2), alpha: q(2) });
        let s = Schedule::new(vec![piece(0, "a", q(1), q(3))]);
        assert_eq!(evaluate_objective(&s, &inst, false).unwrap(), ObjValue::Exact(q(54)));
        let inst = one_job((1, 1), Objective::Monomial { k: q(1), alpha: qr(3, 2) });
        let v = evaluate_objective(&s, &inst, false).unwrap();
        // 3 · 3^{3/2} ≈ 15.588
        assert!(v.lo() < v.hi());
        assert!(*v.lo() > qr(15588, 1000) && *v.hi() < qr(15589, 1000));
        assert!(v.try_cmp(&v.clone()).is_err());
        assert_eq!(v.try_cmp(&ObjValue::Exact(q(16))).unwrap(), Ordering::Less);
    }

    #[test]
    fn wrap_never_overlaps_itself() {
        let items = vec![("a".to_string(), q(3)), ("b".to_string(), q(4)), ("c".to_string(), q(2))];
        let ps = mcnaughton(&q(4), &q(4), 3, &q(2), &items);
        let mut by_job: BTreeMap<&str, Vec<&Piece>> = BTreeMap::new();
        for p in &ps {
            by_job.entry(p.job.as_str()).or_default().push(p);
            assert!(p.machine != 0 || p.end <= q(6));
        }
        let b = &by_job["b"];
        assert_eq!(b.len(), 2);
        assert!(b[1].end <= b[0].start || b[0].end <= b[1].start);
    }

    #[test]
    fn release_weight_examples() {
        assert_eq!(release_weight(std::iter::empty::<&Job>()), q(0));
        let jobs = [Job::new("a", q(2), q(1), q(3)), Job::new("b", q(1), q(1), q(1))];
        assert_eq!(release_weight(jobs.iter()), q(7));
    }

    #[test]
    fn feasibility_examples() {
        let empty = Instance::new(Epsilon::from_ratio(1, 1).unwrap(), MachineEnv::Identical { m: 1 }, true, Objective::WeightedCompletion, vec![]).unwrap();
        assert!(check_schedule_feasibility(&Schedule::default(), &empty).is_ok());

        let two = Instance::new(
            Epsilon::from_ratio(1, 1).unwrap(),
            MachineEnv::Identical { m: 1 },
            true,
            Objective::WeightedCompletion,
            vec![Job::new("a", q(2), q(2), q(1)), Job::new("b", q(2), q(2), q(1))],
        )
        .unwrap();
        let over = Schedule::new(vec![piece(0, "a", q(2), q(4)), piece(0, "b", q(2), q(4))]);
        assert!(matches!(check_schedule_feasibility(&over, &two), Err(Violation::Capacity { interval: 1, .. })));
        let early = Schedule::new(vec![piece(0, "a", q(1), q(3))]);
        assert!(matches!(check_schedule_feasibility(&early, &two), Err(Violation::Release { .. })));
        let parallel = Instance { env: MachineEnv::Identical { m: 2 }, ..two.clone() };
        let par = Schedule::new(vec![piece(0, "a", q(2), q(3)), piece(1, "a", q(2), q(3))]);
        assert!(matches!(check_schedule_feasibility(&par, &parallel), Err(Violation::Parallel { .. })));
    }

    #[test]
    fn nonpreemptive_reserved_idle_is_allowed_but_interleaving_is_not() {
        let inst = Instance::new(
            Epsilon::from_ratio(1, 1).unwrap(),
            MachineEnv::Identical { m: 1 },
            false,
            Objective::WeightedCompletion,
            vec![Job::new("a", q(1), q(2), q(1)), Job::new("b", q(1), q(1), q(1))],
        )
        .unwrap();
        let gap = Schedule::new(vec![piece(0, "a", q(1), q(2)), piece(0, "a", q(3), q(4)), piece(0, "b", q(4), q(5))]);
        assert!(check_schedule_feasibility(&gap, &inst).is_ok());
        let inter = Schedule::new(vec![piece(0, "a", q(1), q(2)), piece(0, "b", q(2), q(3)), piece(0, "a", q(3), q(4))]);
        assert!(matches!(check_schedule_feasibility(&inter, &inst), Err(Violation::NonPreemptive { .. })));
    }
}
