//! Configuration equivalence decided from raw schedule pieces: a bijection
//! between relevant jobs matching scaled release, size, per-interval work
//! (or start time) and weights up to one common power of `1+ε`, plus equal
//! multisets of unfinished irrelevant jobs and the same end status.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crscheme::algmap::{Configuration, Engine, RandomPolicy};
use crscheme::config::SchemeConfig;
use crscheme::model::{Job, Objective};
use crscheme::num::{qr, Epsilon, Q};

use super::Outcome;

/// A job seen from `R_x`, every time and length divided by `R_x`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Seen {
    r: Q,
    p: Q,
    /// Work per interval offset (preemptive).
    work: BTreeMap<i64, Q>,
    /// Start (non-preemptive).
    start: Option<Q>,
    finished: bool,
}

struct View {
    /// Relevant jobs with their raw weights.
    rel: Vec<(Seen, Q)>,
    nets: Vec<Seen>,
    end: bool,
}

fn view(eps: &Epsilon, preemptive: bool, conf: &Configuration) -> View {
    let now = eps.pow(conf.x);
    let before = eps.pow(conf.x - 1);
    let mut rel = Vec::new();
    let mut nets = Vec::new();
    let mut all_done = true;
    for j in &conf.jobs {
        let pieces: Vec<_> = conf.pieces.iter().filter(|pc| pc.job == j.job.id).collect();
        let p = j.job.p().clone();
        let mut work = BTreeMap::new();
        let mut start = None;
        let finished = if preemptive {
            let mut total = Q::zero();
            for pc in pieces.iter().filter(|pc| pc.start < now) {
                let len = &pc.end - &pc.start;
                total += &len;
                let y = eps.floor_log(&pc.start).expect("positive time") - conf.x;
                *work.entry(y).or_insert_with(Q::zero) += len / &now;
            }
            total == p
        } else {
            start = pieces.iter().map(|pc| pc.start.clone()).min();
            start.as_ref().is_some_and(|s| s + &p <= now)
        };
        all_done &= finished;
        let seen = Seen { r: &j.job.release / &now, p: &p / &now, work, start: start.map(|s| s / &now), finished };
        if !j.irrelevant {
            rel.push((seen, j.job.weight.clone()));
        } else if !finished {
            nets.push(seen);
        }
    }
    let recent = conf.pieces.iter().any(|pc| pc.end > before && pc.start < now);
    nets.sort();
    View { rel, nets, end: all_done && recent }
}

/// Bijection test: for each candidate weight scale (a power of `1+ε`
/// taking the first job of `a` to some job of `b`), compare the scaled
/// job multisets.
fn equivalent(eps: &Epsilon, a: &View, b: &View) -> bool {
    if a.end != b.end || a.nets != b.nets || a.rel.len() != b.rel.len() {
        return false;
    }
    let Some((_, w0)) = a.rel.first() else { return true };
    let mut target: Vec<(Seen, Q)> = b.rel.clone();
    target.sort();
    b.rel.iter().any(|(_, wb)| {
        let scale = wb / w0;
        if eps.exact_log(&scale).is_none() {
            return false;
        }
        let mut mapped: Vec<(Seen, Q)> = a.rel.iter().map(|(s, w)| (s.clone(), w * &scale)).collect();
        mapped.sort();
        mapped == target
    })
}

/// Group index and two `(run, step)` positions.
type Pair = (usize, (usize, usize), (usize, usize));

struct Group {
    engine: Engine,
    runs: Vec<Vec<Configuration>>,
}

fn configurations(engine: &Engine, policy: &RandomPolicy, jobs: &[Job]) -> Vec<Configuration> {
    let mut by_x: BTreeMap<i64, Vec<Job>> = BTreeMap::new();
    for j in jobs {
        by_x.entry(engine.eps.exact_log(&j.release).expect("power release")).or_default().push(j.clone());
    }
    let (x0, last) = (*by_x.keys().next().expect("jobs"), *by_x.keys().next_back().expect("jobs"));
    let mut conf = engine.initial(x0);
    let mut out = Vec::new();
    loop {
        let x = conf.x;
        engine.arrive(&mut conf, by_x.get(&x).map_or(&[][..], Vec::as_slice)).expect("arrival");
        out.push(conf.clone());
        if x >= last && !engine.unfinished(&conf) {
            return out;
        }
        engine.step(&mut conf, policy).expect("step");
    }
}

fn random_jobs(rng: &mut ChaCha8Rng, eps: &Epsilon, shift: i64, wshift: i64) -> Vec<Job> {
    let mut jobs = Vec::new();
    for x in 0..rng.gen_range(1..=8) {
        for i in 0..rng.gen_range(0..=2) {
            let p = [-4, -6][rng.gen_range(0..2)];
            let w = [0, 1, 20][rng.gen_range(0..3)];
            jobs.push(Job::new(format!("j{x}_{i}"), eps.pow(x + shift), eps.pow(x + shift + p), eps.pow(w + wshift)));
        }
    }
    if jobs.is_empty() {
        jobs.push(Job::new("j0", eps.pow(shift), eps.pow(shift - 4), eps.pow(wshift)));
    }
    jobs
}

fn shifted(jobs: &[Job], eps: &Epsilon, d: i64, y: i64) -> Vec<Job> {
    let (f, g) = (eps.pow(d), eps.pow(y));
    jobs.iter().map(|j| Job::new(j.id.clone(), &j.release * &f, j.p() * &f, &j.weight * &g)).collect()
}

/// Key equality against the bijection test on twin and random pairs.
pub fn keys_match_equivalence() -> Outcome {
    let eps = Epsilon::from_ratio(1, 2).expect("valid epsilon");
    let cfg = SchemeConfig { epsilon: eps.clone(), mu: qr(1, 2), s: 3, k: 2, delta_jobs: 2, ..SchemeConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut groups: Vec<Group> = [(1, true), (2, true), (1, false), (2, false)]
        .into_iter()
        .map(|(m, pmtn)| Group { engine: Engine::new(&cfg, m, pmtn, Objective::WeightedCompletion), runs: Vec::new() })
        .collect();
    let mut pairs: Vec<Pair> = Vec::new();
    for (gi, g) in groups.iter_mut().enumerate() {
        for seed in 0..40 {
            let policy = RandomPolicy::new(seed);
            let jobs = random_jobs(&mut rng, &eps, 0, 0);
            let base = configurations(&g.engine, &policy, &jobs);
            let twin = configurations(&g.engine, &policy, &shifted(&jobs, &eps, rng.gen_range(-3..=3), rng.gen_range(-2..=2)));
            let (a, b) = (g.runs.len(), g.runs.len() + 1);
            for k in 0..base.len().min(twin.len()) {
                pairs.push((gi, (a, k), (b, k)));
            }
            g.runs.push(base);
            g.runs.push(twin);
        }
    }
    pairs.shuffle(&mut rng);
    pairs.truncate(400);
    while pairs.len() < 1000 {
        let gi = rng.gen_range(0..groups.len());
        let runs = &groups[gi].runs;
        let pick = |rng: &mut ChaCha8Rng| {
            let r = rng.gen_range(0..runs.len());
            (r, rng.gen_range(0..runs[r].len()))
        };
        let (a, b) = (pick(&mut rng), pick(&mut rng));
        pairs.push((gi, a, b));
    }
    let (mut same, mut differ, mut bad) = (0, 0, Vec::new());
    for (gi, (ra, ka), (rb, kb)) in pairs {
        let g = &groups[gi];
        let (ca, cb) = (&g.runs[ra][ka], &g.runs[rb][kb]);
        let by_key = g.engine.key(ca) == g.engine.key(cb);
        let by_def = equivalent(&eps, &view(&eps, g.engine.preemptive, ca), &view(&eps, g.engine.preemptive, cb));
        match (by_key, by_def) {
            (true, true) => same += 1,
            (false, false) => differ += 1,
            _ => bad.push(format!("m={} pmtn={} x={} vs x={}: key {by_key}, bijection {by_def}", g.engine.m, g.engine.preemptive, ca.x, cb.x)),
        }
    }
    Outcome {
        pass: bad.is_empty() && same > 0 && differ > 0,
        detail: format!("1000 pairs: {same} equivalent, {differ} not, {} disagreements {}", bad.len(), bad.iter().take(3).cloned().collect::<Vec<_>>().join("; ")),
    }
}
