//! Memo of oracle values, optionally persisted as JSON lines.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::{Instance, Objective, Proc};
use crate::num::{fmt_q, parse_q, Q};
use crate::schedule::ObjValue;

#[derive(Serialize, Deserialize)]
struct Line {
    key: String,
    lo: String,
    hi: String,
}

/// Values are stored for a normal form of the instance: job ids dropped,
/// jobs sorted and, for weighted completion on identical machines with
/// power-of-`(1+ε)` dates and sizes, time shifted so the earliest release is
/// 1 and weights divided by the largest one.
#[derive(Debug, Default)]
pub struct OracleCache {
    map: Mutex<HashMap<String, ObjValue>>,
}

fn fmt_proc(p: &Proc) -> String {
    match p {
        Proc::Uniform(v) => fmt_q(v),
        Proc::PerMachine(row) => row.iter().map(|e| e.as_ref().map_or("inf".to_string(), fmt_q)).collect::<Vec<_>>().join(","),
    }
}

/// Normalized key and the factor the stored value must be multiplied by.
fn normalize(inst: &Instance, cfg: &SchemeConfig, grid: bool) -> (String, Q) {
    let eps = &inst.epsilon;
    let mut time_div = Q::from_integer(1.into());
    let mut w_div = Q::from_integer(1.into());
    let scalable = inst.objective == Objective::WeightedCompletion
        && inst.env.is_identical()
        && !inst.jobs.is_empty()
        && inst.jobs.iter().all(|j| eps.exact_log(&j.release).is_some() && matches!(&j.proc, Proc::Uniform(p) if eps.exact_log(p).is_some()));
    if scalable {
        let k = inst.jobs.iter().filter_map(|j| eps.exact_log(&j.release)).min().expect("non-empty");
        time_div = eps.pow(k);
        w_div = inst.jobs.iter().map(|j| j.weight.clone()).max().expect("non-empty");
    }
    let mut jobs: Vec<String> = inst
        .jobs
        .iter()
        .map(|j| {
            let proc = match &j.proc {
                Proc::Uniform(p) => Proc::Uniform(p / &time_div),
                other => other.clone(),
            };
            format!("{}:{}:{}", fmt_q(&(&j.release / &time_div)), fmt_proc(&proc), fmt_q(&(&j.weight / &w_div)))
        })
        .collect();
    jobs.sort();
    let key = format!(
        "{}|{:?}|{}|{:?}|{}|{}|{}",
        fmt_q(eps.value()),
        inst.env,
        inst.preemptive,
        inst.objective,
        fmt_q(&cfg.mu),
        grid,
        jobs.join(";")
    );
    (key, time_div * w_div)
}

fn scale(v: &ObjValue, f: &Q) -> ObjValue {
    match v {
        ObjValue::Exact(x) => ObjValue::Exact(x * f),
        ObjValue::Bounds { lo, hi } => ObjValue::Bounds { lo: lo * f, hi: hi * f },
    }
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, inst: &Instance, cfg: &SchemeConfig, grid: bool) -> Option<ObjValue> {
        let (key, f) = normalize(inst, cfg, grid);
        self.map.lock().expect("cache lock").get(&key).map(|v| scale(v, &f))
    }

    pub fn put(&self, inst: &Instance, cfg: &SchemeConfig, grid: bool, value: &ObjValue) {
        let (key, f) = normalize(inst, cfg, grid);
        let inv = Q::from_integer(1.into()) / f;
        self.map.lock().expect("cache lock").insert(key, scale(value, &inv));
    }

    /// Reads a cache file; unreadable lines are skipped with a warning and a
    /// missing file gives an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        let cache = Self::new();
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(Error::Io(e.to_string())),
        };
        let mut map = cache.map.lock().expect("cache lock");
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Line>(&line)
                .map_err(|e| e.to_string())
                .and_then(|l| Ok((l.key, parse_q("lo", &l.lo).map_err(|e| e.to_string())?, parse_q("hi", &l.hi).map_err(|e| e.to_string())?)));
            match parsed {
                Ok((key, lo, hi)) => {
                    let v = if lo == hi { ObjValue::Exact(lo) } else { ObjValue::Bounds { lo, hi } };
                    map.insert(key, v);
                }
                Err(e) => log::warn!("{}:{}: dropping cache line: {e}", path.display(), n + 1),
            }
        }
        drop(map);
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let map = self.map.lock().expect("cache lock");
        let mut keys: Vec<&String> = map.keys().collect();
        keys.sort();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::Io(e.to_string()))?);
        for k in keys {
            let v = &map[k];
            let line = Line { key: k.clone(), lo: fmt_q(v.lo()), hi: fmt_q(v.hi()) };
            writeln!(out, "{}", serde_json::to_string(&line).expect("line serializes")).map_err(|e| Error::Io(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }
}
