//! Configurations, their canonical keys, interval-schedule action classes,
//! algorithm maps as finite tables, and the simulator.

mod builtin;
mod engine;

pub use builtin::{builtin_policy, BuiltinRule, RandomPolicy};
pub use engine::{simulate, simulate_with, Configuration, Engine, RtJob, SimOutcome};

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{fmt_q, parse_q, Q};

/// Scale-free progress of one job.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    /// Atoms done, recent per-interval atoms as `(offset, atoms)`, and the
    /// offset of the completion interval.
    Pmtn { done: i64, hist: Vec<(i64, i64)>, fin: Option<i64> },
    /// Start time divided by `R_x`, and the completion interval offset.
    NonPmtn { start: Option<String>, fin: Option<i64> },
}

/// A job seen from interval `x`: release and size exponents relative to `x`,
/// weight relative to the heaviest relevant job.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobKey {
    pub r: i64,
    pub p: i64,
    pub w: Option<String>,
    pub state: JobState,
}

impl JobKey {
    pub fn is_finished(&self) -> bool {
        matches!(self.state, JobState::Pmtn { fin: Some(_), .. } | JobState::NonPmtn { fin: Some(_), .. })
    }
}

impl fmt::Display for JobKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{} p{}", self.r, self.p)?;
        if let Some(w) = &self.w {
            write!(f, " w{w}")?;
        }
        match &self.state {
            JobState::Pmtn { done, hist, fin } => {
                write!(f, " d{done}")?;
                if !hist.is_empty() {
                    let h: Vec<String> = hist.iter().map(|(o, a)| format!("{o}:{a}")).collect();
                    write!(f, " h[{}]", h.join(","))?;
                }
                if let Some(c) = fin {
                    write!(f, " c{c}")?;
                }
            }
            JobState::NonPmtn { start, fin } => {
                if let Some(s) = start {
                    write!(f, " s{s}")?;
                }
                if let Some(c) = fin {
                    write!(f, " c{c}")?;
                }
            }
        }
        Ok(())
    }
}

/// Equivalence class of a configuration: sorted relevant jobs (finished ones
/// included), unfinished irrelevant jobs waiting for their safety nets, and
/// whether this is an end-configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalKey {
    pub jobs: Vec<JobKey>,
    pub nets: Vec<JobKey>,
    pub end: bool,
}

impl CanonicalKey {
    /// Stable readable text, e.g. `{r0 p-1 w1 d0 | nets: | end}`.
    pub fn digest(&self) -> String {
        let jobs: Vec<String> = self.jobs.iter().map(ToString::to_string).collect();
        let nets: Vec<String> = self.nets.iter().map(ToString::to_string).collect();
        format!("{{{} | nets: {}{}}}", jobs.join("; "), nets.join("; "), if self.end { " | end" } else { "" })
    }

    pub fn has_unfinished(&self) -> bool {
        !self.nets.is_empty() || self.jobs.iter().any(|j| !j.is_finished())
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.digest())
    }
}

/// Canonical interval-schedule. Preemptive: atoms per job class (non-zero
/// entries only). Non-preemptive: per used machine, the job it is still
/// running (if any) and the jobs started on it in this interval, in order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Pmtn(Vec<(JobKey, i64)>),
    NonPmtn(Vec<(Option<JobKey>, Vec<JobKey>)>),
}

impl ActionClass {
    pub fn is_idle(&self) -> bool {
        match self {
            ActionClass::Pmtn(v) => v.is_empty(),
            ActionClass::NonPmtn(v) => v.is_empty(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ActionClass::Pmtn(v) if v.is_empty() => "idle".into(),
            ActionClass::NonPmtn(v) if v.is_empty() => "idle".into(),
            ActionClass::Pmtn(v) => v.iter().map(|(k, a)| format!("{a}x[{k}]")).collect::<Vec<_>>().join(" + "),
            ActionClass::NonPmtn(v) => v
                .iter()
                .map(|(run, seq)| {
                    let head = run.as_ref().map_or("free".to_string(), |k| format!("after [{k}]"));
                    let seq: Vec<String> = seq.iter().map(|k| format!("[{k}]")).collect();
                    format!("{head}: {}", seq.join(" "))
                })
                .collect::<Vec<_>>()
                .join(" / "),
        }
    }
}

/// Chooses the action for a configuration among its feasible classes.
pub trait ActionPolicy {
    fn choose(&self, engine: &Engine, conf: &Configuration, key: &CanonicalKey, actions: &[ActionClass]) -> Result<ActionClass>;
}

/// Deterministic algorithm map: a table from key to action class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlgorithmMap {
    pub table: BTreeMap<CanonicalKey, ActionClass>,
}

#[derive(Serialize, Deserialize)]
struct KeyLine {
    digest: String,
    value: CanonicalKey,
}

#[derive(Serialize, Deserialize)]
struct MapLine {
    key: KeyLine,
    action: ActionClass,
}

#[derive(Serialize, Deserialize)]
struct RandLine {
    key: KeyLine,
    actions: Vec<(ActionClass, String)>,
}

fn parse_err(line: usize, e: impl fmt::Display) -> Error {
    Error::Parse { field: format!("line {line}"), msg: e.to_string() }
}

impl AlgorithmMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn insert(&mut self, key: CanonicalKey, action: ActionClass) {
        self.table.insert(key, action);
    }

    /// One `{"key": {"digest", "value"}, "action"}` object per line, keys sorted.
    pub fn to_jsonl(&self) -> String {
        self.table
            .iter()
            .map(|(k, a)| {
                let line = MapLine { key: KeyLine { digest: k.digest(), value: k.clone() }, action: a.clone() };
                serde_json::to_string(&line).expect("map line serializes") + "\n"
            })
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let l: MapLine = serde_json::from_str(line).map_err(|e| parse_err(n + 1, e))?;
            map.insert(l.key.value, l.action);
        }
        Ok(map)
    }
}

impl ActionPolicy for AlgorithmMap {
    fn choose(&self, _: &Engine, _: &Configuration, key: &CanonicalKey, actions: &[ActionClass]) -> Result<ActionClass> {
        let a = self.table.get(key).ok_or_else(|| Error::MapIncomplete(format!("map incomplete at key {key}")))?;
        if !actions.contains(a) {
            return Err(Error::MapIncomplete(format!("stored action {} is not feasible at key {key}", a.describe())));
        }
        Ok(a.clone())
    }
}

/// Randomized map: per key a probability vector over action classes, every
/// entry a multiple of `δ`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RandomizedAlgorithmMap {
    pub delta: Q,
    pub table: BTreeMap<CanonicalKey, Vec<(ActionClass, Q)>>,
}

impl RandomizedAlgorithmMap {
    /// Point distributions on the actions of `map`.
    pub fn from_deterministic(map: &AlgorithmMap, delta: Q) -> Self {
        let table = map.table.iter().map(|(k, a)| (k.clone(), vec![(a.clone(), Q::one())])).collect();
        Self { delta, table }
    }

    /// Every vector sums to 1 with entries in `δ·ℕ`.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.table {
            let total = v.iter().fold(Q::zero(), |a, (_, p)| a + p);
            if total != Q::one() {
                return Err(Error::Config(format!("probabilities at {k} sum to {}", fmt_q(&total))));
            }
            if let Some((_, p)) = v.iter().find(|(_, p)| *p < Q::zero() || !(p / &self.delta).is_integer()) {
                return Err(Error::Config(format!("probability {} at {k} is not a multiple of delta", fmt_q(p))));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        self.table
            .iter()
            .map(|(k, v)| {
                let line = RandLine {
                    key: KeyLine { digest: k.digest(), value: k.clone() },
                    actions: v.iter().map(|(a, p)| (a.clone(), fmt_q(p))).collect(),
                };
                serde_json::to_string(&line).expect("map line serializes") + "\n"
            })
            .collect()
    }

    pub fn from_jsonl(text: &str, delta: Q) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let l: RandLine = serde_json::from_str(line).map_err(|e| parse_err(n + 1, e))?;
            let v = l.actions.into_iter().map(|(a, p)| Ok((a, parse_q("probability", &p)?))).collect::<Result<Vec<_>>>()?;
            table.insert(l.key.value, v);
        }
        let m = Self { delta, table };
        m.validate()?;
        Ok(m)
    }
}
