//! Jobs, machine environments, objectives and instances, with their JSON form.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{fmt_q, parse_q, Epsilon, Q};

/// Processing requirement: one value for identical/related machines, one
/// entry per machine (`None` = infinite) for unrelated machines.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Proc {
    Uniform(Q),
    PerMachine(Vec<Option<Q>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Job {
    pub id: String,
    pub release: Q,
    pub proc: Proc,
    pub weight: Q,
}

impl Job {
    pub fn new(id: impl Into<String>, release: Q, p: Q, weight: Q) -> Self {
        Self { id: id.into(), release, proc: Proc::Uniform(p), weight }
    }

    /// The uniform processing requirement. Panics on unrelated rows.
    pub fn p(&self) -> &Q {
        match &self.proc {
            Proc::Uniform(p) => p,
            Proc::PerMachine(_) => panic!("job {} has per-machine processing times", self.id),
        }
    }

    pub fn row(&self) -> Option<&[Option<Q>]> {
        match &self.proc {
            Proc::PerMachine(r) => Some(r),
            Proc::Uniform(_) => None,
        }
    }

    /// Largest finite processing time (`p̃_j` on unrelated machines).
    pub fn p_tilde(&self) -> Q {
        match &self.proc {
            Proc::Uniform(p) => p.clone(),
            Proc::PerMachine(row) => row.iter().flatten().max().cloned().unwrap_or_else(Q::zero),
        }
    }

    /// Shortest possible running time of the job in `env`.
    pub fn min_time(&self, env: &MachineEnv) -> Q {
        match &self.proc {
            Proc::Uniform(p) => p / env.s_max(),
            Proc::PerMachine(row) => row.iter().flatten().min().cloned().unwrap_or_else(Q::zero),
        }
    }

    /// Time needed on machine `i`, `None` when infinite.
    pub fn time_on(&self, env: &MachineEnv, i: usize) -> Option<Q> {
        match &self.proc {
            Proc::Uniform(p) => Some(p / env.speed(i)),
            Proc::PerMachine(row) => row.get(i).cloned().flatten(),
        }
    }

    pub fn smith_ratio(&self) -> Q {
        &self.weight / self.p_tilde()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MachineEnv {
    Identical { m: usize },
    Related { speeds: Vec<Q> },
    Unrelated { m: usize },
}

impl MachineEnv {
    pub fn m(&self) -> usize {
        match self {
            MachineEnv::Identical { m } | MachineEnv::Unrelated { m } => *m,
            MachineEnv::Related { speeds } => speeds.len(),
        }
    }

    pub fn speed(&self, i: usize) -> Q {
        match self {
            MachineEnv::Related { speeds } => speeds[i].clone(),
            _ => Q::one(),
        }
    }

    pub fn s_max(&self) -> Q {
        match self {
            MachineEnv::Related { speeds } => speeds.iter().max().cloned().unwrap_or_else(Q::one),
            _ => Q::one(),
        }
    }

    pub fn is_identical(&self) -> bool {
        matches!(self, MachineEnv::Identical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Objective {
    WeightedCompletion,
    /// `Σ w_j · k · C_j^α`.
    Monomial { k: Q, alpha: Q },
    Makespan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub epsilon: Epsilon,
    pub env: MachineEnv,
    pub preemptive: bool,
    pub objective: Objective,
    pub jobs: Vec<Job>,
}

impl Instance {
    pub fn new(epsilon: Epsilon, env: MachineEnv, preemptive: bool, objective: Objective, jobs: Vec<Job>) -> Result<Self> {
        let inst = Self { epsilon, env, preemptive, objective, jobs };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.env.m();
        if m == 0 {
            return Err(Error::Instance("machine count must be at least 1".into()));
        }
        if let MachineEnv::Related { speeds } = &self.env {
            if speeds.iter().any(|s| !s.is_positive()) {
                return Err(Error::Instance("speeds must be positive".into()));
            }
        }
        if let Objective::Monomial { k, alpha } = &self.objective {
            if !k.is_positive() || *alpha < Q::one() {
                return Err(Error::Instance("monomial objective needs k > 0 and alpha >= 1".into()));
            }
        }
        let mut seen = HashSet::new();
        for j in &self.jobs {
            if !seen.insert(j.id.as_str()) {
                return Err(Error::Instance(format!("duplicate job id {}", j.id)));
            }
            if !j.release.is_positive() || !j.weight.is_positive() {
                return Err(Error::Instance(format!("job {}: release and weight must be positive", j.id)));
            }
            match (&j.proc, &self.env) {
                (Proc::Uniform(p), MachineEnv::Identical { .. } | MachineEnv::Related { .. }) => {
                    if !p.is_positive() {
                        return Err(Error::Instance(format!("job {}: processing time must be positive", j.id)));
                    }
                }
                (Proc::PerMachine(row), MachineEnv::Unrelated { m }) => {
                    if row.len() != *m {
                        return Err(Error::Instance(format!("job {}: needs {} processing times", j.id, m)));
                    }
                    if row.iter().flatten().any(|p| !p.is_positive()) {
                        return Err(Error::Instance(format!("job {}: processing time must be positive", j.id)));
                    }
                    if row.iter().all(Option::is_none) {
                        return Err(Error::Instance(format!("job {}: no finite processing time", j.id)));
                    }
                }
                _ => return Err(Error::Instance(format!("job {}: processing data does not match machine kind", j.id))),
            }
        }
        Ok(())
    }

    pub fn job(&self, id: &str) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn with_jobs(&self, jobs: Vec<Job>) -> Self {
        Self { jobs, ..self.clone() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(text).map_err(|e| Error::Parse { field: "instance".into(), msg: e.to_string() })?;
        raw.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawInstance::from_instance(self)).expect("instance serializes")
    }
}

// JSON wire format.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    epsilon: String,
    machines: RawMachines,
    preemptive: bool,
    objective: RawObjective,
    jobs: Vec<RawJob>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawMachines {
    Identical { m: usize },
    Related { speeds: Vec<String> },
    Unrelated { m: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawObjective {
    WeightedCompletion,
    Monomial { k: String, alpha: String },
    Makespan,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawProc {
    One(String),
    Row(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJob {
    id: String,
    r: String,
    p: RawProc,
    w: String,
}

impl RawInstance {
    fn into_instance(self) -> Result<Instance> {
        let eps = Epsilon::new(parse_q("epsilon", &self.epsilon)?)?;
        let env = match self.machines {
            RawMachines::Identical { m } => MachineEnv::Identical { m },
            RawMachines::Unrelated { m } => MachineEnv::Unrelated { m },
            RawMachines::Related { speeds } => MachineEnv::Related {
                speeds: speeds
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse_q(&format!("machines.speeds[{i}]"), s))
                    .collect::<Result<_>>()?,
            },
        };
        let objective = match self.objective {
            RawObjective::WeightedCompletion => Objective::WeightedCompletion,
            RawObjective::Makespan => Objective::Makespan,
            RawObjective::Monomial { k, alpha } => Objective::Monomial {
                k: parse_q("objective.k", &k)?,
                alpha: parse_q("objective.alpha", &alpha)?,
            },
        };
        let mut jobs = Vec::with_capacity(self.jobs.len());
        for (idx, rj) in self.jobs.into_iter().enumerate() {
            let field = |f: &str| format!("jobs[{idx}].{f}");
            let proc = match rj.p {
                RawProc::One(s) => Proc::Uniform(parse_q(&field("p"), &s)?),
                RawProc::Row(row) => Proc::PerMachine(
                    row.iter()
                        .enumerate()
                        .map(|(i, s)| {
                            if s.trim() == "inf" {
                                Ok(None)
                            } else {
                                parse_q(&field(&format!("p[{i}]")), s).map(Some)
                            }
                        })
                        .collect::<Result<_>>()?,
                ),
            };
            jobs.push(Job { id: rj.id, release: parse_q(&field("r"), &rj.r)?, proc, weight: parse_q(&field("w"), &rj.w)? });
        }
        Instance::new(eps, env, self.preemptive, objective, jobs)
    }

    fn from_instance(inst: &Instance) -> Self {
        let machines = match &inst.env {
            MachineEnv::Identical { m } => RawMachines::Identical { m: *m },
            MachineEnv::Unrelated { m } => RawMachines::Unrelated { m: *m },
            MachineEnv::Related { speeds } => RawMachines::Related { speeds: speeds.iter().map(fmt_q).collect() },
        };
        let objective = match &inst.objective {
            Objective::WeightedCompletion => RawObjective::WeightedCompletion,
            Objective::Makespan => RawObjective::Makespan,
            Objective::Monomial { k, alpha } => RawObjective::Monomial { k: fmt_q(k), alpha: fmt_q(alpha) },
        };
        let jobs = inst
            .jobs
            .iter()
            .map(|j| RawJob {
                id: j.id.clone(),
                r: fmt_q(&j.release),
                p: match &j.proc {
                    Proc::Uniform(p) => RawProc::One(fmt_q(p)),
                    Proc::PerMachine(row) => {
                        RawProc::Row(row.iter().map(|p| p.as_ref().map(fmt_q).unwrap_or_else(|| "inf".into())).collect())
                    }
                },
                w: fmt_q(&j.weight),
            })
            .collect();
        RawInstance { epsilon: fmt_q(inst.epsilon.value()), machines, preemptive: inst.preemptive, objective, jobs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qr};

    const SAMPLE: &str = r#"{"epsilon":"1/2","machines":{"kind":"identical","m":2},"preemptive":true,"objective":{"kind":"weighted_completion"},"jobs":[{"id":"j1","r":"3/2","p":"1","w":"2"}]}"#;

    #[test]
    fn parses_sample_instance() {
        let inst = Instance::from_json(SAMPLE).unwrap();
        assert_eq!(inst.env.m(), 2);
        assert_eq!(inst.jobs[0].release, qr(3, 2));
        assert_eq!(*inst.jobs[0].p(), q(1));
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn parses_unrelated_rows() {
        let text = r#"{"epsilon":"1","machines":{"kind":"unrelated","m":2},"preemptive":true,"objective":{"kind":"makespan"},"jobs":[{"id":"a","r":"1","p":["1","inf"],"w":"1"}]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.jobs[0].row().unwrap(), &[Some(q(1)), None]);
        assert_eq!(inst.jobs[0].min_time(&inst.env), q(1));
    }

    #[test]
    fn rejects_bad_rational_naming_field() {
        let text = SAMPLE.replace("\"p\":\"1\"", "\"p\":\"1/0\"");
        match Instance::from_json(&text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "jobs[0].p"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_ids_and_unknown_keys() {
        let dup = SAMPLE.replace(
            r#"[{"id":"j1","r":"3/2","p":"1","w":"2"}]"#,
            r#"[{"id":"j1","r":"3/2","p":"1","w":"2"},{"id":"j1","r":"1","p":"1","w":"1"}]"#,
        );
        assert!(Instance::from_json(&dup).is_err());
        let unknown = SAMPLE.replace("\"preemptive\"", "\"bogus\":1,\"preemptive\"");
        assert!(Instance::from_json(&unknown).is_err());
    }
}
