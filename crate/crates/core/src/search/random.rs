//! δ-discretized randomized maps and their exact expected ratios.

use std::collections::BTreeMap;

use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algmap::{ActionClass, Configuration, Engine, RandomizedAlgorithmMap};
use crate::error::{Error, Result};
use crate::model::Job;
use crate::num::{fmt_q, Q};
use crate::oracle::{opt_value_cached, OptPolicy, OracleCache};
use crate::schedule::objective_of;

use super::evaluate::{exact, CompetitiveReport, EndRecord};
use super::reach::{reachable_classes, Reach};
use super::universe::Universe;

/// Rounds a probability vector onto the `δ` grid: floor every entry, then
/// hand out the missing `δ`-chunks by largest remainder, ties going to the
/// smaller action. Zero entries are dropped.
pub fn discretize_probs(v: &[(ActionClass, Q)], delta: &Q) -> Result<Vec<(ActionClass, Q)>> {
    if *delta <= Q::zero() || !(Q::one() / delta).is_integer() {
        return Err(Error::Config(format!("1/delta must be a positive integer, delta is {}", fmt_q(delta))));
    }
    let total = v.iter().fold(Q::zero(), |a, (_, p)| a + p);
    if total != Q::one() || v.iter().any(|(_, p)| *p < Q::zero()) {
        return Err(Error::Config(format!("probabilities sum to {}", fmt_q(&total))));
    }
    let n = Q::one() / delta;
    let mut units: Vec<(ActionClass, Q, Q)> = v
        .iter()
        .map(|(a, p)| {
            let scaled = p / delta;
            let fl = scaled.floor();
            (a.clone(), fl.clone(), scaled - fl)
        })
        .collect();
    let assigned = units.iter().fold(Q::zero(), |a, (_, u, _)| a + u);
    let mut missing = (&n - assigned).to_integer().to_i64().unwrap_or(0);
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&i, &j| units[j].2.cmp(&units[i].2).then_with(|| units[i].0.cmp(&units[j].0)));
    for i in order {
        if missing <= 0 {
            break;
        }
        units[i].1 += Q::one();
        missing -= 1;
    }
    let mut out: Vec<(ActionClass, Q)> = units.into_iter().filter(|(_, u, _)| !u.is_zero()).map(|(a, u, _)| (a, u * delta)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

pub fn discretize_map(g: &RandomizedAlgorithmMap, delta: &Q) -> Result<RandomizedAlgorithmMap> {
    let table = g.table.iter().map(|(k, v)| Ok((k.clone(), discretize_probs(v, delta)?))).collect::<Result<BTreeMap<_, _>>>()?;
    Ok(RandomizedAlgorithmMap { delta: delta.clone(), table })
}

/// Random weights on every feasible action of every choice key reachable
/// under some map, discretized with the configured `δ`.
pub fn random_randomized_map(u: &Universe, seed: u64) -> Result<RandomizedAlgorithmMap> {
    let rs = reachable_classes(u, Reach::AllMaps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = BTreeMap::new();
    for (k, acts) in &rs.choices {
        let mut w: Vec<i64> = acts.iter().map(|_| rng.gen_range(0..10)).collect();
        if w.iter().all(|&x| x == 0) {
            w[0] = 1;
        }
        let sum: i64 = w.iter().sum();
        let v: Vec<(ActionClass, Q)> = acts.iter().zip(&w).map(|(a, &x)| (a.clone(), Q::new(x.into(), sum.into()))).collect();
        table.insert(k.clone(), discretize_probs(&v, &u.cfg.delta)?);
    }
    Ok(RandomizedAlgorithmMap { delta: u.cfg.delta.clone(), table })
}

struct Tree<'a> {
    engine: &'a Engine,
    g: &'a RandomizedAlgorithmMap,
    by_x: BTreeMap<i64, Vec<Job>>,
    last_x: i64,
    leaves: u64,
    cap: u64,
}

impl Tree<'_> {
    /// Expected objective below `conf`, weighted by `prob`.
    fn expect(&mut self, mut conf: Configuration, prob: Q) -> Result<Q> {
        loop {
            let x = conf.x;
            self.engine.arrive(&mut conf, self.by_x.get(&x).map_or(&[][..], Vec::as_slice))?;
            if conf.x >= self.last_x && !self.engine.unfinished(&conf) {
                self.leaves += 1;
                if self.leaves > self.cap {
                    return Err(Error::Refused(format!("outcome tree exceeds {} leaves", self.cap)));
                }
                let items: Vec<(Q, Q)> = conf
                    .jobs
                    .iter()
                    .map(|j| (j.job.weight.clone(), self.engine.eps.pow(j.fin.expect("finished") + 1)))
                    .collect();
                return Ok(exact(objective_of(&self.engine.objective, items), "value")? * prob);
            }
            let acts = self.engine.actions(&conf);
            if acts.len() == 1 {
                self.engine.apply(&mut conf, &acts[0])?;
                continue;
            }
            let key = self.engine.key(&conf);
            let dist = self.g.table.get(&key).ok_or_else(|| Error::MapIncomplete(format!("randomized map incomplete at key {key}")))?;
            let mut sum = Q::zero();
            for (a, p) in dist.iter().filter(|(_, p)| !p.is_zero()) {
                let mut c = conf.clone();
                self.engine.apply(&mut c, a)?;
                sum += self.expect(c, &prob * p)?;
            }
            return Ok(sum);
        }
    }
}

/// `E[val(I)] / Opt(I)` per instance of the universe by full enumeration of
/// the outcome tree; `ρ'` is the largest.
pub fn evaluate_randomized_map(g: &RandomizedAlgorithmMap, name: &str, u: &Universe, opt_policy: OptPolicy, cache: &OracleCache) -> Result<CompetitiveReport> {
    g.validate()?;
    let engine = u.engine();
    let instances = u.instances(u.cfg.rand_enum_cap)?;
    let recs = instances
        .par_iter()
        .map(|jobs| {
            let mut by_x: BTreeMap<i64, Vec<Job>> = BTreeMap::new();
            for j in jobs {
                let x = engine.eps.exact_log(&j.release).expect("universe releases are powers");
                by_x.entry(x).or_default().push(j.clone());
            }
            let x0 = *by_x.keys().next().expect("instances are non-empty");
            let last_x = *by_x.keys().next_back().expect("instances are non-empty");
            let mut tree = Tree { engine: &engine, g, by_x, last_x, leaves: 0, cap: u.cfg.map_cap };
            let val = tree.expect(engine.initial(x0), Q::one())?;
            let opt = exact(opt_value_cached(&u.instance(jobs.clone())?, &u.cfg, opt_policy.is_grid(), cache)?, "optimum")?;
            let key = jobs.iter().map(|j| format!("{}:p{}w{}", j.id, fmt_q(j.p()), fmt_q(&j.weight))).collect::<Vec<_>>().join(" ");
            Ok(EndRecord { x: last_x, key, ratio: &val / &opt, val, opt, jobs: jobs.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = CompetitiveReport::from_records(recs, name, opt_policy, u)?;
    report.notes.push("randomized map: expected objective over all jobs of each instance".into());
    Ok(report)
}
