//! Command-line front end: simplification, constants, optimum, simulation,
//! map evaluation and search.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crscheme::algmap::{builtin_policy, simulate, ActionPolicy, AlgorithmMap, RandomizedAlgorithmMap};
use crscheme::error::Error;
use crscheme::model::Instance;
use crscheme::num::fmt_q;
use crscheme::oracle::{opt_value, OptPolicy, OracleCache};
use crscheme::schedule::ObjValue;
use crscheme::search::{build_universe, evaluate_map, evaluate_randomized_map, search_best_map, SearchMode};
use crscheme::simplify::{pipeline, theoretical_constants};

use config::{parse_policy, Overrides, RunConfig};

const EXIT_PARSE: u8 = 1;
const EXIT_REFUSED: u8 = 2;
const EXIT_HEURISTIC: u8 = 3;

#[derive(Parser)]
#[command(name = "crscheme", about = "Competitive-ratio approximation for online scheduling")]
struct Cli {
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON with `scheme` and `universe` sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the simplification pipeline on an instance.
    Simplify {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the theoretical constants for the configured epsilon.
    Constants {
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Exact optimum of a small instance.
    Oracle {
        instance: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        opt_policy: Option<OptPolicy>,
        /// Include the optimal schedule.
        #[arg(long)]
        witness: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a map on a simplified instance.
    Simulate {
        instance: PathBuf,
        /// Builtin rule name or map file.
        #[arg(long)]
        map: String,
        #[command(flatten)]
        common: Common,
    },
    /// Competitive ratio of a map over the configured universe.
    Evaluate {
        /// Builtin rule name or map file.
        #[arg(long, conflicts_with = "randomized")]
        map: Option<String>,
        /// Randomized map file.
        #[arg(long)]
        randomized: Option<PathBuf>,
        #[arg(long, value_parser = parse_policy)]
        opt_policy: Option<OptPolicy>,
        /// Per-end-configuration ratios as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Optimum cache file, read and updated.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Best map over the configured universe.
    Search {
        /// Greedy search looking this many dates ahead instead of exact search.
        #[arg(long)]
        heuristic: Option<i64>,
        #[arg(long, value_parser = parse_policy)]
        opt_policy: Option<OptPolicy>,
        /// Where to write the best map.
        #[arg(long)]
        map_out: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Merge competitive reports into one comparison table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Config(_) | Error::Instance(_) | Error::Io(_) | Error::Domain(_) => EXIT_PARSE,
            _ => EXIT_REFUSED,
        };
        Fail(code, e.to_string())
    }
}

type Out<T> = Result<T, Fail>;

fn read(path: &Path) -> Out<String> {
    fs::read_to_string(path).map_err(|e| Fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Out<()> {
    fs::write(path, text).map_err(|e| Fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, v: &Value) -> Out<()> {
    let text = serde_json::to_string_pretty(v).expect("json value serializes") + "\n";
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(c: &Common) -> Out<RunConfig> {
    let text = match &c.config {
        Some(p) => read(p)?,
        None => "{}".to_string(),
    };
    Ok(RunConfig::parse(&text, &c.overrides)?)
}

fn load_instance(path: &Path) -> Out<Instance> {
    Ok(Instance::from_json(&read(path)?)?)
}

fn load_map(spec: &str) -> Out<Box<dyn ActionPolicy + Sync>> {
    if let Ok(rule) = builtin_policy(spec) {
        return Ok(Box::new(rule));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Fail(EXIT_PARSE, format!("map: {spec} is neither a builtin rule nor a file")));
    }
    Ok(Box::new(AlgorithmMap::from_jsonl(&read(path)?)?))
}

fn load_cache(path: Option<&PathBuf>) -> Out<OracleCache> {
    match path {
        Some(p) => Ok(OracleCache::load(p)?),
        None => Ok(OracleCache::new()),
    }
}

fn save_cache(cache: &OracleCache, path: Option<&PathBuf>) -> Out<()> {
    if let Some(p) = path {
        cache.save(p)?;
    }
    Ok(())
}

fn obj_json(v: &ObjValue) -> Value {
    match v {
        ObjValue::Exact(q) => json!(fmt_q(q)),
        ObjValue::Bounds { lo, hi } => json!({"lo": fmt_q(lo), "hi": fmt_q(hi)}),
    }
}

fn parse_json(text: &str) -> Value {
    serde_json::from_str(text).expect("internal json reparses")
}

fn run(cli: Cli) -> Out<u8> {
    match cli.cmd {
        Cmd::Simplify { instance, common } => {
            let rc = load_config(&common)?;
            let inst = load_instance(&instance)?;
            let out = pipeline(&inst, &rc.scheme)?;
            let parts = out.parts.as_ref().map(|p| json!({"s": p.s, "parts": p.parts, "insignificant": p.insignificant, "safety_net_only": p.safety_net_only}));
            let v = json!({
                "instance": parse_json(&out.instance.to_json()),
                "certificates": out.certificates,
                "factor": fmt_q(&out.factor()),
                "instance_factor": fmt_q(&out.instance_factor()),
                "parts": parts,
            });
            emit(common.out.as_deref(), &v)?;
        }
        Cmd::Constants { m, common } => {
            let rc = load_config(&common)?;
            let v = serde_json::to_value(theoretical_constants(&rc.scheme.epsilon, m, rc.scheme.d)).expect("constants serialize");
            emit(common.out.as_deref(), &v)?;
        }
        Cmd::Oracle { instance, opt_policy, witness, common } => {
            let rc = load_config(&common)?;
            let inst = load_instance(&instance)?;
            let policy = opt_policy.unwrap_or(rc.opt_policy);
            let r = opt_value(&inst, &rc.scheme, policy.is_grid())?;
            let mut v = json!({"value": obj_json(&r.value), "opt_policy": policy, "nodes": r.stats.nodes});
            if witness {
                v["witness"] = parse_json(&r.witness.to_json(&inst.epsilon)?);
            }
            emit(common.out.as_deref(), &v)?;
        }
        Cmd::Simulate { instance, map, common } => {
            let rc = load_config(&common)?;
            let inst = load_instance(&instance)?;
            let policy = load_map(&map)?;
            let out = simulate(policy.as_ref(), &inst, &rc.scheme)?;
            let comps = out.schedule.completions(&inst)?;
            let completions: serde_json::Map<String, Value> =
                comps.iter().map(|(id, c)| (id.clone(), json!({"raw": fmt_q(&c.raw), "interval": c.interval}))).collect();
            let v = json!({
                "schedule": parse_json(&out.schedule.to_json(&inst.epsilon)?),
                "completions": completions,
                "value_raw": obj_json(&crscheme::schedule::evaluate_objective(&out.schedule, &inst, false)?),
                "value_snapped": obj_json(&crscheme::schedule::evaluate_objective(&out.schedule, &inst, true)?),
                "decisions": out.trace.len(),
            });
            emit(common.out.as_deref(), &v)?;
        }
        Cmd::Evaluate { map, randomized, opt_policy, csv, cache, common } => {
            let rc = load_config(&common)?;
            let u = build_universe(&rc.scheme, rc.universe()?)?;
            let policy = opt_policy.unwrap_or(rc.opt_policy);
            let oc = load_cache(cache.as_ref())?;
            let report = match (map, randomized) {
                (_, Some(path)) => {
                    let g = RandomizedAlgorithmMap::from_jsonl(&read(&path)?, rc.scheme.delta.clone())?;
                    evaluate_randomized_map(&g, &path.display().to_string(), &u, policy, &oc)?
                }
                (Some(m), None) => evaluate_map(load_map(&m)?.as_ref(), &m, &u, policy, &oc)?,
                (None, None) => return Err(Fail(EXIT_PARSE, "evaluate needs --map or --randomized".into())),
            };
            save_cache(&oc, cache.as_ref())?;
            if let Some(p) = csv {
                write(&p, &report.to_csv())?;
            }
            emit(common.out.as_deref(), &report.to_json())?;
        }
        Cmd::Search { heuristic, opt_policy, map_out, cache, common } => {
            let rc = load_config(&common)?;
            let u = build_universe(&rc.scheme, rc.universe()?)?;
            let policy = opt_policy.unwrap_or(rc.opt_policy);
            let oc = load_cache(cache.as_ref())?;
            let mode = match heuristic {
                Some(h) => SearchMode::Heuristic { h, base: rc.base_rule(&u)? },
                None => SearchMode::Exact,
            };
            let out = search_best_map(&u, policy, &oc, mode)?;
            save_cache(&oc, cache.as_ref())?;
            if let Some(p) = map_out {
                write(&p, &out.map.to_jsonl())?;
            }
            let mut v = out.report.to_json();
            v["map_entries"] = json!(out.map.len());
            v["search_nodes"] = json!(out.nodes);
            emit(common.out.as_deref(), &v)?;
            if out.report.heuristic {
                return Ok(EXIT_HEURISTIC);
            }
        }
        Cmd::Report { reports, out } => {
            let mut rows = Vec::new();
            for p in &reports {
                let v: Value = serde_json::from_str(&read(p)?).map_err(|e| Fail(EXIT_PARSE, format!("{}: {e}", p.display())))?;
                let field = |k: &str| v.get(k).cloned().ok_or_else(|| Fail(EXIT_PARSE, format!("{}: missing field {k}", p.display())));
                rows.push(json!({
                    "file": p.display().to_string(),
                    "map": field("map")?,
                    "rho": field("rho")?,
                    "opt_policy": field("opt_policy")?,
                    "mode": field("mode")?,
                    "certificate_factor": field("certificate_factor")?,
                    "end_configurations": field("end_configurations")?,
                }));
            }
            emit(out.as_deref(), &json!({"reports": rows}))?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global() {
        log::warn!("thread pool: {e}");
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
