//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod equiv;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crscheme::algmap::{simulate, ActionClass, BuiltinRule, RandomPolicy, RandomizedAlgorithmMap};
use crscheme::config::SchemeConfig;
use crscheme::model::{Instance, Job, MachineEnv, Objective, Proc};
use crscheme::num::{fmt_q, q, qr, to_f64, Epsilon, Q};
use crscheme::oracle::{opt_value, OptPolicy, OracleCache};
use crscheme::search::*;
use crscheme::simplify::{
    bound_ptimes_unrelated, bound_speeds_related, classify_relevance, composed_factor, partition_periods, rescale_parts_nonpreemptive,
    round_instance, sweep_dates, Sweep,
};

/// Wall-clock budgets.
const BUDGET_SRPT: Duration = Duration::from_secs(60);
const BUDGET_SEARCH: Duration = Duration::from_secs(600);
const BUDGET_PIPELINE: Duration = Duration::from_secs(600);

/// Name and check of one criterion.
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn half() -> Epsilon {
    Epsilon::from_ratio(1, 2).expect("valid epsilon")
}

fn t(p: i64, w: i64) -> JobTemplate {
    JobTemplate { p, w }
}

/// SRPT on unit-weight single-machine preemptive instances.
fn srpt_is_optimal() -> Outcome {
    let cfg = SchemeConfig { epsilon: half(), mu: qr(1, 2), s: 7, k: 3, delta_jobs: 2, x_max: 4, oracle_job_cap: 10, e_cap: 40, ..SchemeConfig::default() };
    let spec = UniverseSpec { m: 1, preemptive: true, makespan: false, p_exps: vec![-3], w_exps: vec![0], max_jobs: None, x_min: 0 };
    let u = build_universe(&cfg, &spec).expect("universe");
    let start = Instant::now();
    let r = evaluate_map(&BuiltinRule::Srpt, "srpt", &u, OptPolicy::Grid, &OracleCache::new()).expect("evaluation");
    let el = start.elapsed();
    Outcome {
        pass: r.rho == q(1) && el <= BUDGET_SRPT,
        detail: format!("rho' = {} over {} end classes, {} release sequences, {:.1?}", fmt_q(&r.rho), r.ends.len(), u.instance_count(), el),
    }
}

/// Branch-and-bound against plain exhaustion, non-preemptive.
fn search_is_exact() -> Outcome {
    let cfg = SchemeConfig { epsilon: half(), mu: qr(1, 2), s: 3, k: 1, delta_jobs: 1, x_max: 1, map_cap: 20_000, ..SchemeConfig::default() };
    let spec = UniverseSpec { m: 1, preemptive: false, makespan: false, p_exps: vec![0], w_exps: vec![0, 3], max_jobs: Some(1), x_min: 0 };
    let u = build_universe(&cfg, &spec).expect("universe");
    let cache = OracleCache::new();
    let start = Instant::now();
    let bb = search_best_map(&u, OptPolicy::Grid, &cache, SearchMode::Exact).expect("branch and bound");
    let ex = exhaustive_best_map(&u, OptPolicy::Grid, &cache).expect("exhaustion");
    let el = start.elapsed();
    let bound = q(2) * (Q::one() + cfg.epsilon.value());
    Outcome {
        pass: bb.report.rho == ex.report.rho && bb.report.rho <= bound && el <= BUDGET_SEARCH,
        detail: format!(
            "rho' = {} (exhaustive {} over {} maps, bound {}), {} search nodes, {:.1?}",
            fmt_q(&bb.report.rho),
            fmt_q(&ex.report.rho),
            ex.nodes,
            fmt_q(&bound),
            bb.nodes,
            el
        ),
    }
}

fn random_instance(rng: &mut ChaCha8Rng, preemptive: bool) -> Instance {
    let n = rng.gen_range(1..=5);
    let jobs = (0..n)
        .map(|i| Job::new(format!("j{i}"), qr(rng.gen_range(4..=32), 4), qr(rng.gen_range(1..=24), 8), q(rng.gen_range(1..=5))))
        .collect();
    Instance::new(half(), MachineEnv::Identical { m: 1 }, preemptive, Objective::WeightedCompletion, jobs).expect("instance")
}

/// Instance-changing steps: rounding, the per-date sweep and, without
/// preemption, part rescaling.
fn simplified(inst: &Instance, cfg: &SchemeConfig) -> (Instance, Q) {
    let (rounded, c) = round_instance(inst);
    let (mut out, mut certs) = sweep_dates(&rounded, cfg, Sweep::all());
    certs.insert(0, c);
    if !inst.preemptive {
        let parts = partition_periods(&out, cfg);
        let (scaled, c) = rescale_parts_nonpreemptive(&out, &parts, cfg);
        out = scaled;
        certs.push(c);
    }
    (out, composed_factor(&certs))
}

/// Opt(I) ≤ Opt(simplified I) ≤ factor·Opt(I).
fn simplification_loss() -> Outcome {
    let cfg = SchemeConfig { epsilon: half(), ..SchemeConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut worst = 0f64;
    for i in 0..200 {
        let inst = random_instance(&mut rng, i % 2 == 0);
        let (out, factor) = simplified(&inst, &cfg);
        let opt = |x: &Instance| opt_value(x, &cfg, false).expect("oracle").value.exact().cloned().expect("exact value");
        let (a, b) = (opt(&inst), opt(&out));
        worst = worst.max(to_f64(&(&b / &a / &factor)));
        if !(a <= b && b <= &factor * &a) {
            bad.push(format!("#{i}: {} vs {} (factor {})", fmt_q(&a), fmt_q(&b), fmt_q(&factor)));
        }
    }
    let el = start.elapsed();
    Outcome {
        pass: bad.is_empty() && el <= BUDGET_PIPELINE,
        detail: format!("{} violations in 200, max Opt ratio / factor {worst:.3}, {:.1?} {}", bad.len(), el, bad.join("; ")),
    }
}

/// Σ_irrelevant w·C ≤ 3ε·Σ_relevant r·w at every boundary of single-part
/// simulated schedules.
fn irrelevant_jobs_bound() -> Outcome {
    let cfg = SchemeConfig { epsilon: half(), mu: qr(1, 4), s: 2, k: 4, delta_jobs: 2, ..SchemeConfig::default() };
    let eps = cfg.epsilon.clone();
    let obj = Objective::WeightedCompletion;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut n, mut bad, mut old, mut dominated) = (0u64, 0, 0, 0);
    let mut worst = 0f64;
    while n < 100 {
        let mut jobs = Vec::new();
        for x in 0..rng.gen_range(4..24) {
            if rng.gen_bool(0.3) {
                continue;
            }
            for i in 0..rng.gen_range(1..=2) {
                jobs.push(Job::new(format!("j{x}_{i}"), eps.pow(x), eps.pow(x + rng.gen_range(-8..=-5)), eps.pow(rng.gen_range(0..=30))));
            }
        }
        if jobs.is_empty() {
            continue;
        }
        let inst = Instance::new(eps.clone(), MachineEnv::Identical { m: 1 }, true, obj.clone(), jobs).expect("instance");
        if partition_periods(&inst, &cfg).parts.len() != 1 {
            continue;
        }
        n += 1;
        let sim = simulate(&RandomPolicy::new(n), &inst, &cfg).expect("simulation");
        let done = sim.schedule.completions(&inst).expect("completions");
        let x0 = inst.jobs.iter().filter_map(|j| eps.exact_log(&j.release)).min().expect("jobs");
        for x in x0..=sim.last.x {
            let rel = classify_relevance(&inst.jobs, &cfg, &obj, x);
            let (mut lhs, mut rhs) = (Q::zero(), Q::zero());
            for j in &inst.jobs {
                match rel.get(&j.id) {
                    Some(true) => rhs += &j.release * &j.weight,
                    Some(false) => {
                        if j.release < eps.pow(x - cfg.gamma()) {
                            old += 1;
                        } else {
                            dominated += 1;
                        }
                        lhs += &j.weight * &done[&j.id].raw;
                    }
                    None => {}
                }
            }
            let cap = q(3) * eps.value() * &rhs;
            if lhs > cap {
                bad += 1;
            }
            if !rhs.is_zero() {
                worst = worst.max(to_f64(&(lhs / cap)));
            }
        }
    }
    Outcome {
        pass: bad == 0 && old > 0 && dominated > 0,
        detail: format!("{bad} violations over 100 schedules, max lhs/bound {worst:.3}, irrelevant job-boundaries: {old} old, {dominated} dominated"),
    }
}

fn cycle_cfg() -> SchemeConfig {
    SchemeConfig { e_cap: 14, s: 4, k: 1, ..SchemeConfig::default() }
}

/// Period 1, 2 and 3 universes and the set repetition at every level.
fn cycling() -> Outcome {
    let mut found = Vec::new();
    let mut pass = true;
    for p in 1..=3i64 {
        let cats: Vec<Catalog> = (0..p).map(|i| vec![vec![], vec![t(i - 3, 0)]]).collect();
        let u = if p == 1 { Universe::stationary(&cycle_cfg(), 1, true, cats[0].clone(), 0, 30) } else { Universe::rotating(&cycle_cfg(), 1, true, &cats, 0, 30) };
        let rs = reachable_classes(&u, Reach::Policy(&BuiltinRule::IdleSafety)).expect("reachability");
        let Some(c) = detect_cycle(&rs) else {
            pass = false;
            found.push(format!("period {p}: none"));
            continue;
        };
        let sets: Vec<BTreeSet<_>> = rs.levels.iter().map(|l| l.keys().collect()).collect();
        let (a, b) = ((c.x_bar - rs.x0) as usize, (c.x_bar2 - rs.x0) as usize);
        let repeats = (0..sets.len() - b).all(|k| sets[a + k] == sets[b + k]);
        pass &= c.period == p && repeats && verify_cycle(&rs, &c);
        found.push(format!("period {} at x = {}, {} levels", c.period, c.x_bar, sets.len()));
    }
    Outcome { pass, detail: found.join("; ") }
}

/// Random probability vectors with denominators off the `1/8` grid.
fn off_grid_map(u: &Universe, rng: &mut ChaCha8Rng) -> RandomizedAlgorithmMap {
    let rs = reachable_classes(u, Reach::AllMaps).expect("reachability");
    let mut table = BTreeMap::new();
    for (k, acts) in &rs.choices {
        let d: i64 = [3, 5, 7, 9][rng.gen_range(0..4)];
        let mut counts = vec![0i64; acts.len()];
        for _ in 0..d {
            counts[rng.gen_range(0..acts.len())] += 1;
        }
        let v: Vec<(ActionClass, Q)> = acts.iter().zip(&counts).filter(|(_, &c)| c > 0).map(|(a, &c)| (a.clone(), qr(c, d))).collect();
        table.insert(k.clone(), v);
    }
    RandomizedAlgorithmMap { delta: qr(1, 315), table }
}

/// ρ'(discretize(f)) ≤ (1+ε)·ρ'(f).
fn discretization() -> Outcome {
    let cfg = SchemeConfig { epsilon: half(), mu: qr(1, 2), s: 2, k: 1, delta: qr(1, 8), ..SchemeConfig::default() };
    let one = BTreeMap::from([(0, vec![vec![t(-3, 0)]]), (1, vec![vec![t(-3, 0)]])]);
    let four = BTreeMap::from([(0, vec![vec![t(-3, 0)], vec![t(-4, 0)]]), (1, vec![vec![t(-3, 0)], vec![t(-4, 0)]])]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cache = OracleCache::new();
    let mut bad = 0;
    let mut worst = 0f64;
    let mut runs = 0;
    for (cats, pmtn) in [(&one, true), (&four, true), (&one, false), (&four, false)] {
        let u = Universe::from_catalogs(&cfg, 1, pmtn, Objective::WeightedCompletion, cats.clone());
        for _ in 0..50 {
            let f = off_grid_map(&u, &mut rng);
            let g = discretize_map(&f, &cfg.delta).expect("discretization");
            let rf = evaluate_randomized_map(&f, "f", &u, OptPolicy::Grid, &cache).expect("evaluation").rho;
            let rg = evaluate_randomized_map(&g, "g", &u, OptPolicy::Grid, &cache).expect("evaluation").rho;
            runs += 1;
            let bound = cfg.epsilon.base() * &rf;
            worst = worst.max(to_f64(&(&rg / &rf)));
            if rg > bound {
                bad += 1;
            }
        }
    }
    Outcome { pass: bad == 0, detail: format!("{bad} violations in {runs} maps, max ratio {worst:.4} (bound 1.5)") }
}

/// Σ_o moved_rw(o) = rw(I).
fn offset_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for i in 0..100 {
        let jobs = (0..rng.gen_range(1..=12))
            .map(|k| Job::new(format!("j{k}"), qr(rng.gen_range(1..=400), 4), qr(rng.gen_range(1..=20), 8), qr(rng.gen_range(1..=30), 3)))
            .collect();
        let inst = Instance::new(half(), MachineEnv::Identical { m: 1 }, i % 2 == 0, Objective::WeightedCompletion, jobs).expect("instance");
        for m in [2, 3, 5] {
            let cfg = SchemeConfig { epsilon: half(), s: rng.gen_range(1..=4), offset_m: Some(m), ..SchemeConfig::default() };
            let r = offset_split(&inst, &cfg, None).expect("split");
            let sum = r.variants.iter().fold(Q::zero(), |a, v| a + &v.moved_rw);
            if sum != r.total_rw || r.variants.len() != m as usize {
                bad += 1;
            }
        }
    }
    Outcome { pass: bad == 0, detail: format!("{bad} mismatches in 300 (instance, M) pairs") }
}

/// Speed and processing-time spreads after the transformations.
fn transform_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SchemeConfig::default();
    let (mut bad_q, mut bad_r) = (0, 0);
    for _ in 0..100 {
        let m = rng.gen_range(1..=5usize);
        let eps = Epsilon::from_ratio(1, rng.gen_range(1..=4)).expect("valid epsilon");
        let limit = Q::from_integer((m as i64).into()) / eps.value();
        let speeds: Vec<Q> = (0..m).map(|_| qr(rng.gen_range(1..=1000), 100)).collect();
        let jobs = vec![Job::new("a", q(1), q(1), q(1))];
        let inst = Instance::new(eps.clone(), MachineEnv::Related { speeds }, true, Objective::WeightedCompletion, jobs).expect("instance");
        let (out, _, _) = bound_speeds_related(&inst, &cfg);
        let MachineEnv::Related { speeds } = &out.env else { unreachable!("related stays related") };
        let lo = speeds.iter().min().expect("a machine is kept");
        if *lo != Q::one() || out.env.s_max() > limit {
            bad_q += 1;
        }

        let jobs = (0..rng.gen_range(1..=6))
            .map(|k| {
                let mut row: Vec<Option<Q>> = (0..m).map(|_| rng.gen_bool(0.8).then(|| qr(rng.gen_range(1..=1000), 10))).collect();
                if row.iter().all(Option::is_none) {
                    row[0] = Some(q(1));
                }
                Job { id: format!("j{k}"), release: q(1), proc: Proc::PerMachine(row), weight: q(1) }
            })
            .collect();
        let inst = Instance::new(eps, MachineEnv::Unrelated { m }, true, Objective::WeightedCompletion, jobs).expect("instance");
        let (out, _) = bound_ptimes_unrelated(&inst, &cfg);
        for j in &out.jobs {
            let finite: Vec<&Q> = j.row().expect("per-machine row").iter().flatten().collect();
            let (Some(lo), Some(hi)) = (finite.iter().min(), finite.iter().max()) else {
                bad_r += 1;
                continue;
            };
            if (*hi / *lo) > limit {
                bad_r += 1;
            }
        }
    }
    Outcome { pass: bad_q == 0 && bad_r == 0, detail: format!("{bad_q} related and {bad_r} unrelated violations in 100 instances each") }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("SRPT optimal on unit-weight preemptive universe", srpt_is_optimal),
        ("exact search on non-preemptive universe", search_is_exact),
        ("simplification loss within certificate", simplification_loss),
        ("irrelevant jobs bound", irrelevant_jobs_bound),
        ("canonical keys match equivalence", equiv::keys_match_equivalence),
        ("cycle detection", cycling),
        ("randomized discretization", discretization),
        ("offset identity", offset_identity),
        ("transform postconditions", transform_bounds),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {} {name}: {} {} [{:.1?}]", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
