//! Run configuration: one JSON document with a `scheme` section (the scheme
//! constants) and an optional `universe` section. Flags override the file.

use clap::Args;
use serde::Deserialize;
use serde_json::{Map, Value};

use crscheme::algmap::BuiltinRule;
use crscheme::config::SchemeConfig;
use crscheme::error::{Error, Result};
use crscheme::model::Objective;
use crscheme::oracle::OptPolicy;
use crscheme::search::{Universe, UniverseSpec};

/// Scheme values settable from the command line.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Epsilon as a rational, e.g. `1/2`.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Safety-net span in intervals.
    #[arg(long)]
    pub s: Option<i64>,
    #[arg(long = "K")]
    pub k: Option<i64>,
    /// Max jobs per release date.
    #[arg(long = "Delta")]
    pub delta_jobs: Option<usize>,
    #[arg(long = "X-max")]
    pub x_max: Option<i64>,
    #[arg(long = "E-cap")]
    pub e_cap: Option<i64>,
    /// Atom fraction of a large job, e.g. `1/4`.
    #[arg(long)]
    pub mu: Option<String>,
}

impl Overrides {
    fn apply(&self, scheme: &mut Map<String, Value>) {
        let mut set = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                scheme.insert(k.to_string(), v);
            }
        };
        set("epsilon", self.epsilon.clone().map(Value::from));
        set("s", self.s.map(Value::from));
        set("K", self.k.map(Value::from));
        set("Delta", self.delta_jobs.map(Value::from));
        set("X_max", self.x_max.map(Value::from));
        set("E_cap", self.e_cap.map(Value::from));
        set("mu", self.mu.clone().map(Value::from));
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    scheme: Map<String, Value>,
    #[serde(default)]
    universe: Option<UniverseSpec>,
    #[serde(default)]
    opt_policy: OptPolicy,
    /// Builtin rule completing heuristic search.
    #[serde(default)]
    base_rule: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    universe: Option<UniverseSpec>,
    pub opt_policy: OptPolicy,
    base_rule: Option<BuiltinRule>,
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawRun = serde_json::from_str(text).map_err(|e| Error::Parse { field: "config".into(), msg: e.to_string() })?;
        let mut scheme = raw.scheme;
        overrides.apply(&mut scheme);
        let scheme = SchemeConfig::from_json(&Value::Object(scheme).to_string())?;
        let base_rule = raw.base_rule.map(|s| s.parse()).transpose()?;
        Ok(Self { scheme, universe: raw.universe, opt_policy: raw.opt_policy, base_rule })
    }

    pub fn universe(&self) -> Result<&UniverseSpec> {
        self.universe.as_ref().ok_or_else(|| Error::Config("the configuration has no universe section".into()))
    }

    /// Configured rule, else the natural list rule of the universe.
    pub fn base_rule(&self, u: &Universe) -> Result<BuiltinRule> {
        Ok(self.base_rule.unwrap_or(match (u.preemptive, &u.objective) {
            (false, _) => BuiltinRule::SmithListNonpmtn,
            (true, Objective::WeightedCompletion) => BuiltinRule::WsptPmtn,
            (true, _) => BuiltinRule::Srpt,
        }))
    }
}

pub fn parse_policy(s: &str) -> std::result::Result<OptPolicy, String> {
    match s {
        "grid" => Ok(OptPolicy::Grid),
        "refined" => Ok(OptPolicy::Refined),
        _ => Err(format!("unknown opt policy {s}, expected grid or refined")),
    }
}
