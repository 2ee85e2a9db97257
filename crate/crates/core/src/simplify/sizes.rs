//! Rounding and the per-release-date simplifications: size classes, tiny
//! packs, large-job pruning and the small-volume cap.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::LossCertificate;
use crate::config::{Mode, SchemeConfig};
use crate::model::{Instance, Job, MachineEnv, Proc};
use crate::num::{ceil_i64, Epsilon, Q};

/// Release interval of a job (exact exponent once rounded).
pub fn release_exp(eps: &Epsilon, job: &Job) -> i64 {
    eps.floor_log(&job.release).expect("release dates are positive")
}

fn min_finite(job: &Job) -> Q {
    match &job.proc {
        Proc::Uniform(p) => p.clone(),
        Proc::PerMachine(row) => row.iter().flatten().min().cloned().expect("a finite entry exists"),
    }
}

/// Rounds processing times, weights and release dates up to powers of
/// `1+ε`, with `r_j ≥ max(ε·p_j, 1)`.
pub fn round_instance(inst: &Instance) -> (Instance, LossCertificate) {
    let eps = &inst.epsilon;
    let up = |v: &Q| eps.round_up(v).expect("positive");
    let jobs = inst
        .jobs
        .iter()
        .map(|j| {
            let proc = match &j.proc {
                Proc::Uniform(p) => Proc::Uniform(up(p)),
                Proc::PerMachine(row) => Proc::PerMachine(row.iter().map(|e| e.as_ref().map(up)).collect()),
            };
            let mut out = Job { id: j.id.clone(), release: j.release.clone(), proc, weight: up(&j.weight) };
            let floor = std::cmp::max(eps.value() * min_finite(&out), Q::one());
            out.release = up(&std::cmp::max(out.release.clone(), floor));
            out
        })
        .collect();
    (inst.with_jobs(jobs), LossCertificate::eps_pow("round", eps, 3))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DateClasses {
    pub large: Vec<String>,
    pub small: Vec<String>,
    pub tiny: Vec<String>,
}

/// Per release interval: large (`p ≥ ε³R_x`), tiny (`p ≤ (ε/2d)|I_x|`) and
/// the remaining small jobs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SizeClass {
    pub dates: BTreeMap<i64, DateClasses>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Size {
    Large,
    Small,
    Tiny,
}

fn size_of(eps: &Epsilon, d: i64, x: i64, job: &Job) -> Size {
    let p = job.p_tilde();
    let e = eps.value();
    if p >= e * e * e * eps.pow(x) {
        Size::Large
    } else if p <= e * eps.interval_len(x) / Q::from_integer((2 * d).into()) {
        Size::Tiny
    } else {
        Size::Small
    }
}

pub fn classify_sizes(inst: &Instance, cfg: &SchemeConfig) -> SizeClass {
    let eps = &inst.epsilon;
    let mut out = SizeClass::default();
    for j in &inst.jobs {
        let x = release_exp(eps, j);
        let e = out.dates.entry(x).or_default();
        match size_of(eps, cfg.d, x, j) {
            Size::Large => e.large.push(j.id.clone()),
            Size::Small => e.small.push(j.id.clone()),
            Size::Tiny => e.tiny.push(j.id.clone()),
        }
    }
    out
}

fn tie_key(j: &Job) -> (&Q, Q, &Q, &str) {
    (&j.release, j.p_tilde(), &j.weight, j.id.as_str())
}

/// Non-increasing Smith ratio, ties by parameters then id.
fn smith_cmp(a: &Job, b: &Job) -> Ordering {
    b.smith_ratio().cmp(&a.smith_ratio()).then_with(|| tie_key(a).cmp(&tie_key(b)))
}

/// Non-increasing weight, ties by parameters then id.
fn weight_cmp(a: &Job, b: &Job) -> Ordering {
    b.weight.cmp(&a.weight).then_with(|| tie_key(a).cmp(&tie_key(b)))
}

/// Large jobs kept per (date, size) type: `⌈m/ε² + m⌉`.
pub fn large_per_type_bound(eps: &Epsilon, m: usize) -> usize {
    let m = Q::from_integer(m.into());
    let e = eps.value();
    ceil_i64(&(&m / (e * e) + &m)) as usize
}

fn large_cap(inst: &Instance, cfg: &SchemeConfig) -> usize {
    let bound = large_per_type_bound(&inst.epsilon, inst.env.m());
    match cfg.mode {
        Mode::Theoretical => bound,
        Mode::Desk => cfg.max_large_per_type.unwrap_or(bound),
    }
}

fn volume_capacity(inst: &Instance, x: i64) -> Q {
    let len = inst.epsilon.interval_len(x);
    match &inst.env {
        MachineEnv::Related { speeds } => speeds.iter().fold(Q::zero(), |a, s| a + s) * len,
        env => Q::from_integer(env.m().into()) * len,
    }
}

/// Which per-date steps a sweep applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sweep {
    pub pack: bool,
    pub prune: bool,
    pub cap: bool,
}

impl Sweep {
    pub fn all() -> Self {
        Self { pack: true, prune: true, cap: true }
    }
}

fn pack_date(inst: &Instance, cfg: &SchemeConfig, x: i64, jobs: Vec<Job>) -> Vec<Job> {
    if matches!(inst.env, MachineEnv::Unrelated { .. }) {
        return jobs;
    }
    let eps = &inst.epsilon;
    let (mut tiny, mut rest): (Vec<Job>, Vec<Job>) = jobs.into_iter().partition(|j| size_of(eps, cfg.d, x, j) == Size::Tiny);
    if tiny.is_empty() {
        return rest;
    }
    tiny.sort_by(smith_cmp);
    let d = Q::from_integer(cfg.d.into());
    let upper = eps.value() * eps.interval_len(x) / &d;
    let lower = &upper / Q::from_integer(2.into());
    let mut packs: Vec<Vec<Job>> = Vec::new();
    let mut load = Q::zero();
    for j in tiny {
        match packs.last_mut() {
            Some(p) if &load + j.p() <= upper => {
                load += j.p();
                p.push(j);
            }
            _ => {
                load = j.p().clone();
                packs.push(vec![j]);
            }
        }
    }
    for members in packs {
        let total = members.iter().fold(Q::zero(), |a, j| a + j.p());
        let weight = members.iter().fold(Q::zero(), |a, j| a + &j.weight);
        let release = members.iter().map(|j| j.release.clone()).max().expect("non-empty pack");
        let id = members.iter().map(|j| j.id.as_str()).collect::<Vec<_>>().join("+");
        let p = eps.round_up(&std::cmp::max(total, lower.clone())).expect("positive");
        rest.push(Job { id, release, proc: Proc::Uniform(p), weight: eps.round_up(&weight).expect("positive") });
    }
    rest
}

/// Splits `jobs` into (kept, moved).
fn prune_date(inst: &Instance, cfg: &SchemeConfig, x: i64, jobs: Vec<Job>) -> (Vec<Job>, Vec<Job>) {
    let eps = &inst.epsilon;
    let cap = large_cap(inst, cfg);
    let (large, mut kept): (Vec<Job>, Vec<Job>) = jobs.into_iter().partition(|j| size_of(eps, cfg.d, x, j) == Size::Large);
    let mut types: BTreeMap<Vec<Option<Q>>, Vec<Job>> = BTreeMap::new();
    for j in large {
        let key = match &j.proc {
            Proc::Uniform(p) => vec![Some(p.clone())],
            Proc::PerMachine(row) => row.clone(),
        };
        types.entry(key).or_default().push(j);
    }
    let mut moved = Vec::new();
    for (_, mut group) in types {
        group.sort_by(weight_cmp);
        if group.len() > cap {
            moved.extend(group.split_off(cap));
        }
        kept.extend(group);
    }
    (kept, moved)
}

fn cap_date(inst: &Instance, cfg: &SchemeConfig, x: i64, jobs: Vec<Job>) -> (Vec<Job>, Vec<Job>) {
    let eps = &inst.epsilon;
    let (mut small, mut kept): (Vec<Job>, Vec<Job>) = jobs.into_iter().partition(|j| size_of(eps, cfg.d, x, j) != Size::Large);
    small.sort_by(smith_cmp);
    let capacity = volume_capacity(inst, x);
    let mut load = Q::zero();
    let mut moved = Vec::new();
    let mut full = false;
    for j in small {
        let p = j.p_tilde();
        if !full && &load + &p <= capacity {
            load += p;
            kept.push(j);
        } else {
            full = true;
            moved.push(j);
        }
    }
    (kept, moved)
}

/// Applies the chosen per-date steps in ascending date order; jobs moved to
/// `R_{x+1}` are re-examined at their new date. Dates past
/// `max(X_max, last release)` are terminal and left untouched.
pub fn sweep_dates(inst: &Instance, cfg: &SchemeConfig, sweep: Sweep) -> (Instance, Vec<LossCertificate>) {
    let eps = &inst.epsilon;
    let mut by_date: BTreeMap<i64, Vec<Job>> = BTreeMap::new();
    for j in &inst.jobs {
        by_date.entry(release_exp(eps, j)).or_default().push(j.clone());
    }
    let terminal = by_date.keys().next_back().copied().unwrap_or(0).max(cfg.x_max) + 1;
    let mut out = Vec::new();
    while let Some((x, mut jobs)) = by_date.pop_first() {
        if sweep.pack {
            jobs = pack_date(inst, cfg, x, jobs);
        }
        if x < terminal {
            let mut moved = Vec::new();
            if sweep.prune {
                let (k, mv) = prune_date(inst, cfg, x, jobs);
                jobs = k;
                moved.extend(mv);
            }
            if sweep.cap {
                let (k, mv) = cap_date(inst, cfg, x, jobs);
                jobs = k;
                moved.extend(mv);
            }
            if !moved.is_empty() {
                let next = eps.pow(x + 1);
                by_date.entry(x + 1).or_default().extend(moved.into_iter().map(|mut j| {
                    j.release = next.clone();
                    j
                }));
            }
        }
        out.extend(jobs);
    }
    let order: BTreeMap<&str, usize> = inst.jobs.iter().enumerate().map(|(i, j)| (j.id.as_str(), i)).collect();
    out.sort_by_key(|j| (order.get(j.id.as_str()).copied().unwrap_or(usize::MAX), j.id.clone()));
    let mut certs = Vec::new();
    if sweep.pack {
        certs.push(LossCertificate::eps_pow("pack_tiny", eps, 2));
    }
    if sweep.prune {
        certs.push(LossCertificate::new("prune_large", Q::one()));
    }
    if sweep.cap {
        certs.push(LossCertificate::eps_pow("cap_small", eps, 1));
    }
    (inst.with_jobs(out), certs)
}

pub fn pack_tiny_jobs(inst: &Instance, cfg: &SchemeConfig) -> (Instance, LossCertificate) {
    let (i, mut c) = sweep_dates(inst, cfg, Sweep { pack: true, prune: false, cap: false });
    (i, c.remove(0))
}

pub fn prune_large_jobs(inst: &Instance, cfg: &SchemeConfig) -> (Instance, LossCertificate) {
    let (i, mut c) = sweep_dates(inst, cfg, Sweep { pack: false, prune: true, cap: false });
    (i, c.remove(0))
}

pub fn cap_small_volume(inst: &Instance, cfg: &SchemeConfig) -> (Instance, LossCertificate) {
    let (i, mut c) = sweep_dates(inst, cfg, Sweep { pack: false, prune: false, cap: true });
    (i, c.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Objective;
    use crate::num::{q, qr};

    fn inst(eps: (i64, i64), m: usize, jobs: Vec<Job>) -> Instance {
        Instance::new(Epsilon::from_ratio(eps.0, eps.1).unwrap(), MachineEnv::Identical { m }, true, Objective::WeightedCompletion, jobs).unwrap()
    }

    fn cfg(eps: (i64, i64)) -> SchemeConfig {
        SchemeConfig { epsilon: Epsilon::from_ratio(eps.0, eps.1).unwrap(), ..SchemeConfig::default() }
    }

    #[test]
    fn rounding_examples() {
        let (r, c) = round_instance(&inst((1, 1), 1, vec![Job::new("a", qr(3, 2), qr(3, 5), q(3))]));
        assert_eq!(r.jobs[0], Job::new("a", q(2), q(1), q(4)));
        assert_eq!(c.factor, q(8));
        let (again, c2) = round_instance(&r);
        assert_eq!(again, r);
        assert_eq!(c2.factor, q(8));
        let (r, _) = round_instance(&inst((1, 1), 1, vec![Job::new("a", qr(1, 10), q(8), q(1))]));
        assert_eq!(r.jobs[0], Job::new("a", q(8), q(8), q(1)));
    }

    #[test]
    fn size_classes() {
        let c = cfg((1, 2));
        let r4 = qr(81, 16);
        let i = inst((1, 2), 1, vec![Job::new("a", r4.clone(), q(1), q(1)), Job::new("b", r4.clone(), &r4 / q(8), q(1))]);
        let sc = classify_sizes(&i, &c);
        assert_eq!(sc.dates[&4].large, vec!["a".to_string(), "b".to_string()]);
        let len = c.epsilon.interval_len(4);
        let i = inst((1, 2), 1, vec![Job::new("t", r4.clone(), &len / q(32), q(1)), Job::new("s", r4, &len / q(15), q(1))]);
        let sc = classify_sizes(&i, &c);
        assert_eq!(sc.dates[&4].tiny, vec!["t".to_string()]);
        assert_eq!(sc.dates[&4].small, vec!["s".to_string()]);
    }

    #[test]
    fn packing_examples() {
        let c = cfg((1, 2));
        let len = c.epsilon.interval_len(2);
        let r = c.epsilon.pow(2);
        let jobs: Vec<Job> = (0..6).map(|i| Job::new(format!("t{i}"), r.clone(), &len / q(32), q(1))).collect();
        let (out, _) = pack_tiny_jobs(&inst((1, 2), 1, jobs), &c);
        let mut sizes: Vec<usize> = out.jobs.iter().map(|j| j.id.split('+').count()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 4]);

        let a = Job::new("a", r.clone(), &len / q(64), q(1));
        let b = Job::new("b", r.clone(), &len / q(64), q(3));
        let (out, _) = pack_tiny_jobs(&inst((1, 2), 1, vec![a, b]), &c);
        assert_eq!(out.jobs.len(), 1);
        assert_eq!(out.jobs[0].id, "b+a");
        assert_eq!(out.jobs[0].weight, c.epsilon.round_up(&q(4)).unwrap());

        let big = inst((1, 2), 1, vec![Job::new("a", q(1), q(1), q(1))]);
        assert_eq!(pack_tiny_jobs(&big, &c).0, big);
    }

    #[test]
    fn pruning_keeps_heaviest() {
        let c = SchemeConfig { max_large_per_type: Some(2), ..cfg((1, 1)) };
        let jobs = vec![Job::new("a", q(2), q(2), q(4)), Job::new("b", q(2), q(2), q(2)), Job::new("c", q(2), q(2), q(1))];
        let (out, _) = prune_large_jobs(&inst((1, 1), 1, jobs), &c);
        assert_eq!(out.job("c").unwrap().release, q(4));
        assert_eq!(out.job("a").unwrap().release, q(2));
        let tied = vec![Job::new("z", q(2), q(2), q(1)), Job::new("y", q(2), q(2), q(1)), Job::new("x", q(2), q(2), q(1))];
        let (out, _) = prune_large_jobs(&inst((1, 1), 1, tied.clone()), &c);
        assert_eq!(out.job("z").unwrap().release, q(4));
        let few = inst((1, 1), 1, tied[..2].to_vec());
        assert_eq!(prune_large_jobs(&few, &c).0, few);
    }

    #[test]
    fn small_volume_cap() {
        let c = cfg((1, 1));
        let jobs: Vec<Job> = ["a", "b", "c"].iter().map(|id| Job::new(*id, q(1), qr(2, 5), q(1))).collect();
        let (out, _) = cap_small_volume(&inst((1, 1), 1, jobs), &c);
        let moved: Vec<&str> = out.jobs.iter().filter(|j| j.release == q(2)).map(|j| j.id.as_str()).collect();
        assert_eq!(moved, vec!["c"]);
        let ok = inst((1, 1), 1, vec![Job::new("a", q(1), qr(2, 5), q(1))]);
        assert_eq!(cap_small_volume(&ok, &c).0, ok);
    }

    #[test]
    fn large_type_bound_value() {
        assert_eq!(large_per_type_bound(&Epsilon::from_ratio(1, 2).unwrap(), 1), 5);
    }
}
