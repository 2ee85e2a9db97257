//! Exact offline optimum for small instances.

mod cache;
mod grid;
mod np;
mod refined;

pub use cache::OracleCache;
pub use grid::{opt_grid_preemptive, wrap_order, GridJob};
pub use np::opt_nonpreemptive_bb;
pub use refined::opt_refined_preemptive;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::{Instance, Objective};
use crate::num::Q;
use crate::schedule::{monomial_cost, ObjValue, Schedule};

/// Schedule space of the optimum used in ratio denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptPolicy {
    /// Interval grid, μ-atoms, snapped completions.
    #[default]
    Grid,
    /// Free preemption points, raw completions.
    Refined,
}

impl OptPolicy {
    pub fn is_grid(self) -> bool {
        self == OptPolicy::Grid
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub cache_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub value: ObjValue,
    pub witness: Schedule,
    pub stats: SearchStats,
    pub grid: bool,
}

/// Per-job cost of completing at `c`, and how costs combine.
#[derive(Debug, Clone)]
pub(crate) struct CostModel {
    objective: Objective,
}

impl CostModel {
    pub(crate) fn new(objective: &Objective) -> Self {
        Self { objective: objective.clone() }
    }

    pub(crate) fn zero(&self) -> ObjValue {
        ObjValue::Exact(Q::zero())
    }

    pub(crate) fn job(&self, w: &Q, c: &Q) -> ObjValue {
        match &self.objective {
            Objective::WeightedCompletion => ObjValue::Exact(w * c),
            Objective::Makespan => ObjValue::Exact(c.clone()),
            Objective::Monomial { k, alpha } => match monomial_cost(c, k, alpha) {
                ObjValue::Exact(v) => ObjValue::Exact(w * v),
                ObjValue::Bounds { lo, hi } => ObjValue::Bounds { lo: w * lo, hi: w * hi },
            },
        }
    }

    pub(crate) fn combine(&self, a: &ObjValue, b: &ObjValue) -> ObjValue {
        match &self.objective {
            Objective::Makespan => {
                let (x, y) = (a.lo(), b.lo());
                ObjValue::Exact(std::cmp::max(x, y).clone())
            }
            _ => match (a, b) {
                (ObjValue::Exact(x), ObjValue::Exact(y)) => ObjValue::Exact(x + y),
                _ => ObjValue::Bounds { lo: a.lo() + b.lo(), hi: a.hi() + b.hi() },
            },
        }
    }

    /// `a < b`, refusing on overlapping enclosures.
    pub(crate) fn less(&self, a: &ObjValue, b: &ObjValue) -> Result<bool> {
        Ok(a.try_cmp(b)? == std::cmp::Ordering::Less)
    }
}

pub(crate) fn check_job_cap(inst: &Instance, cfg: &SchemeConfig) -> Result<()> {
    if inst.jobs.len() > cfg.oracle_job_cap {
        return Err(Error::Refused(format!("{} jobs exceed the oracle cap of {}", inst.jobs.len(), cfg.oracle_job_cap)));
    }
    Ok(())
}

/// Exact optimum; the grid variant restricts to interval-grid schedules with
/// snapped completions, the refined one allows arbitrary preemption points.
pub fn opt_value(inst: &Instance, cfg: &SchemeConfig, grid: bool) -> Result<OracleResult> {
    check_job_cap(inst, cfg)?;
    match (inst.preemptive, grid) {
        (true, true) => opt_grid_preemptive(inst, cfg),
        (true, false) => opt_refined_preemptive(inst, cfg),
        (false, g) => opt_nonpreemptive_bb(inst, cfg, g),
    }
}

/// Same as [`opt_value`] but consults and fills `cache`.
pub fn opt_value_cached(inst: &Instance, cfg: &SchemeConfig, grid: bool, cache: &OracleCache) -> Result<ObjValue> {
    if let Some(v) = cache.get(inst, cfg, grid) {
        return Ok(v);
    }
    let r = opt_value(inst, cfg, grid)?;
    cache.put(inst, cfg, grid, &r.value);
    Ok(r.value)
}

/// `max(rw, Σ w_j·f(r_j + fastest running time))`, the lower end for monomials.
pub fn lower_bounds(inst: &Instance) -> Q {
    let cm = CostModel::new(&inst.objective);
    let v = inst
        .jobs
        .iter()
        .map(|j| cm.job(&j.weight, &(&j.release + j.min_time(&inst.env))))
        .fold(cm.zero(), |a, b| cm.combine(&a, &b));
    let rw = match inst.objective {
        Objective::WeightedCompletion => crate::schedule::release_weight(&inst.jobs),
        _ => Q::zero(),
    };
    std::cmp::max(v.lo().clone(), rw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Job, MachineEnv};
    use crate::num::{q, Epsilon};
    use crate::schedule::{check_schedule_feasibility, evaluate_objective};

    fn inst(eps: i64, m: usize, pmtn: bool, obj: Objective, jobs: Vec<Job>) -> Instance {
        Instance::new(Epsilon::from_ratio(1, eps).unwrap(), MachineEnv::Identical { m }, pmtn, obj, jobs).unwrap()
    }

    fn cfg(mu: (i64, i64)) -> SchemeConfig {
        SchemeConfig { mu: crate::num::qr(mu.0, mu.1), epsilon: Epsilon::from_ratio(1, 1).unwrap(), ..SchemeConfig::default() }
    }

    #[test]
    fn nonpreemptive_two_jobs() {
        let i = inst(1, 1, false, Objective::WeightedCompletion, vec![Job::new("a", q(1), q(1), q(1)), Job::new("b", q(1), q(2), q(1))]);
        for grid in [false, true] {
            let r = opt_value(&i, &cfg((1, 4)), grid).unwrap();
            assert_eq!(r.value, ObjValue::Exact(q(6)));
            check_schedule_feasibility(&r.witness, &i).unwrap();
        }
    }

    #[test]
    fn srpt_instance_raw_value_is_nine() {
        let i = inst(1, 1, true, Objective::WeightedCompletion, vec![Job::new("a", q(1), q(4), q(1)), Job::new("b", q(2), q(1), q(1))]);
        let r = opt_value(&i, &cfg((1, 4)), false).unwrap();
        assert_eq!(r.value, ObjValue::Exact(q(9)));
        let g = opt_value(&i, &cfg((1, 4)), true).unwrap();
        check_schedule_feasibility(&g.witness, &i).unwrap();
        // the grid optimum is the SRPT schedule: raw 9, snapped 4 + 8
        assert_eq!(evaluate_objective(&g.witness, &i, false).unwrap(), ObjValue::Exact(q(9)));
        assert_eq!(g.value, ObjValue::Exact(q(12)));
        assert_eq!(evaluate_objective(&g.witness, &i, true).unwrap(), g.value);
    }

    #[test]
    fn single_job_and_no_contention() {
        let i = inst(1, 1, true, Objective::WeightedCompletion, vec![Job::new("a", q(2), q(2), q(3))]);
        assert_eq!(opt_value(&i, &cfg((1, 2)), false).unwrap().value, ObjValue::Exact(q(12)));
        let i = inst(1, 3, true, Objective::WeightedCompletion, vec![Job::new("a", q(2), q(1), q(1)), Job::new("b", q(2), q(2), q(2)), Job::new("c", q(2), q(1), q(1))]);
        assert_eq!(opt_value(&i, &cfg((1, 2)), false).unwrap().value, ObjValue::Exact(q(3 + 8 + 3)));
        assert_eq!(lower_bounds(&i), q(14));
    }

    #[test]
    fn makespan_parallel() {
        let i = inst(1, 2, true, Objective::Makespan, vec![Job::new("a", q(1), q(2), q(1)), Job::new("b", q(1), q(2), q(1))]);
        assert_eq!(opt_value(&i, &cfg((1, 2)), false).unwrap().value, ObjValue::Exact(q(3)));
        let g = opt_value(&i, &cfg((1, 2)), true).unwrap();
        assert_eq!(g.value, ObjValue::Exact(q(4)));
        check_schedule_feasibility(&g.witness, &i).unwrap();
    }

    #[test]
    fn three_equal_jobs_any_order() {
        let i = inst(1, 1, false, Objective::WeightedCompletion, (0..3).map(|k| Job::new(format!("j{k}"), q(1), q(1), q(1))).collect());
        assert_eq!(opt_value(&i, &cfg((1, 2)), false).unwrap().value, ObjValue::Exact(q(2 + 3 + 4)));
    }

    #[test]
    fn refuses_over_cap() {
        let c = SchemeConfig { oracle_job_cap: 1, ..cfg((1, 2)) };
        let i = inst(1, 1, true, Objective::WeightedCompletion, vec![Job::new("a", q(1), q(1), q(1)), Job::new("b", q(1), q(1), q(1))]);
        assert!(opt_value(&i, &c, true).unwrap_err().is_refusal());
        assert_eq!(lower_bounds(&i.with_jobs(vec![])), q(0));
    }
}
