//! Transformations for non-preemptive parts and non-identical machines.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::history::PartStructure;
use super::sizes::release_exp;
use super::LossCertificate;
use crate::config::SchemeConfig;
use crate::model::{Instance, Job, MachineEnv, Proc};
use crate::num::{pow_i, Q};
use crate::schedule::release_weight;

/// Scales the weights of each part `i ≥ 1` by the least power of `1+ε`
/// making the (already scaled) earlier parts satisfy
/// `Σ_{ℓ<i} rw(P_ℓ) ≤ ε/(1+ε)^s · rw(first(i))`, where `first(i)` are the
/// jobs of the earliest release date in part `i`.
pub fn rescale_parts_nonpreemptive(inst: &Instance, parts: &PartStructure, cfg: &SchemeConfig) -> (Instance, LossCertificate) {
    let eps = &inst.epsilon;
    let ratio = eps.value() / pow_i(eps.base(), cfg.s);
    let part_of = |j: &Job| parts.part_of_period(parts.period_of_x(release_exp(eps, j)));
    let mut jobs = inst.jobs.clone();
    let mut prev = Q::zero();
    for i in 0..parts.parts.len() {
        let idx: Vec<usize> = (0..jobs.len()).filter(|&k| part_of(&jobs[k]) == i).collect();
        if idx.is_empty() {
            continue;
        }
        if i > 0 && !prev.is_zero() {
            let first_r = idx.iter().map(|&k| jobs[k].release.clone()).min().expect("non-empty part");
            let first = release_weight(idx.iter().map(|&k| &jobs[k]).filter(|j| j.release == first_r));
            let base = &ratio * first;
            let mut y = 0;
            while &base * eps.pow(y) < prev {
                y += 1;
            }
            let f = eps.pow(y);
            for &k in &idx {
                jobs[k].weight = &jobs[k].weight * &f;
            }
        }
        prev += release_weight(idx.iter().map(|&k| &jobs[k]));
    }
    (inst.with_jobs(jobs), LossCertificate::eps_pow("rescale_parts", eps, 1))
}

/// Slow machines removed by [`bound_speeds_related`]; their work is replayed
/// in the slack of `host`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folded: Vec<usize>,
    pub host: usize,
    /// Original index of every remaining machine.
    pub kept: Vec<usize>,
    /// Divisor applied to speeds and processing times.
    pub scale: Q,
}

/// Removes machines with `s_i ≤ (ε/m)·s_max` (never the fastest) and renormalizes so that the
/// slowest remaining machine has speed 1.
pub fn bound_speeds_related(inst: &Instance, _cfg: &SchemeConfig) -> (Instance, LossCertificate, FoldPlan) {
    let eps = &inst.epsilon;
    let cert = LossCertificate::eps_pow("bound_speeds", eps, 2);
    let MachineEnv::Related { speeds } = &inst.env else {
        let m = inst.env.m();
        return (inst.clone(), cert, FoldPlan { folded: vec![], host: 0, kept: (0..m).collect(), scale: Q::one() });
    };
    let s_max = inst.env.s_max();
    let host = (0..speeds.len()).find(|&i| speeds[i] == s_max).expect("non-empty");
    let threshold = eps.value() / Q::from_integer(speeds.len().into()) * &s_max;
    // the fastest machine survives even when ε/m ≥ 1
    let (kept, folded): (Vec<usize>, Vec<usize>) = (0..speeds.len()).partition(|&i| speeds[i] > threshold || speeds[i] == s_max);
    let scale = kept.iter().map(|&i| speeds[i].clone()).min().expect("fastest machine is kept");
    let env = MachineEnv::Related { speeds: kept.iter().map(|&i| &speeds[i] / &scale).collect() };
    let jobs = inst
        .jobs
        .iter()
        .map(|j| Job { proc: Proc::Uniform(j.p() / &scale), ..j.clone() })
        .collect();
    let host = kept.iter().position(|&i| i == host).expect("host kept");
    let out = Instance { env, jobs, ..inst.clone() };
    (out, cert, FoldPlan { folded, host, kept, scale })
}

/// Drops machine `i'` for job `j` when some `p_{ij} ≤ (ε/m)·p_{i'j}`,
/// keeping the fastest machines of `j`.
pub fn bound_ptimes_unrelated(inst: &Instance, _cfg: &SchemeConfig) -> (Instance, LossCertificate) {
    let eps = &inst.epsilon;
    let m = Q::from_integer(inst.env.m().into());
    let jobs = inst
        .jobs
        .iter()
        .map(|j| match &j.proc {
            Proc::PerMachine(row) => {
                let min = row.iter().flatten().min().cloned().expect("a finite entry exists");
                let limit = &min * &m / eps.value();
                let row = row.iter().map(|e| e.clone().filter(|p| *p == min || *p < limit)).collect();
                Job { proc: Proc::PerMachine(row), ..j.clone() }
            }
            Proc::Uniform(_) => j.clone(),
        })
        .collect();
    (inst.with_jobs(jobs), LossCertificate::eps_pow("bound_ptimes", eps, 1))
}

/// Support set and row normalized by its first finite entry.
type ClassSig = (Vec<bool>, Vec<Option<Q>>);

fn signature(job: &Job) -> ClassSig {
    match &job.proc {
        Proc::PerMachine(row) => {
            let first = row.iter().flatten().next().cloned().expect("a finite entry exists");
            (row.iter().map(Option::is_some).collect(), row.iter().map(|e| e.as_ref().map(|p| p / &first)).collect())
        }
        Proc::Uniform(_) => (vec![true], vec![Some(Q::one())]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobClassTable {
    pub class_of: BTreeMap<String, usize>,
    /// Per class: machine support and processing-ratio signature.
    pub classes: Vec<(Vec<bool>, Vec<Option<Q>>)>,
    pub p_tilde: BTreeMap<String, Q>,
}

/// Jobs share a class iff they have the same support and proportional rows.
pub fn classify_job_classes(inst: &Instance) -> JobClassTable {
    let sigs: BTreeMap<ClassSig, usize> = inst.jobs.iter().map(signature).map(|s| (s, 0)).collect();
    let classes: Vec<ClassSig> = sigs.into_keys().collect();
    let class_of = inst
        .jobs
        .iter()
        .map(|j| {
            let s = signature(j);
            (j.id.clone(), classes.iter().position(|c| *c == s).expect("present"))
        })
        .collect();
    let p_tilde = inst.jobs.iter().map(|j| (j.id.clone(), j.p_tilde())).collect();
    JobClassTable { class_of, classes, p_tilde }
}

/// Per (class, release date) keeps at most `Δ` jobs, heaviest first, and
/// moves the others to the next release date until fixpoint.
pub fn cap_job_classes(inst: &Instance, cfg: &SchemeConfig) -> (Instance, LossCertificate) {
    let eps = &inst.epsilon;
    let table = classify_job_classes(inst);
    let mut jobs = inst.jobs.clone();
    loop {
        let mut groups: BTreeMap<(usize, i64), Vec<usize>> = BTreeMap::new();
        for (k, j) in jobs.iter().enumerate() {
            groups.entry((table.class_of[&j.id], release_exp(eps, j))).or_default().push(k);
        }
        let mut changed = false;
        for ((_, x), mut idx) in groups {
            if idx.len() <= cfg.delta_jobs {
                continue;
            }
            idx.sort_by(|&a, &b| jobs[b].weight.cmp(&jobs[a].weight).then_with(|| jobs[a].id.cmp(&jobs[b].id)));
            for &k in &idx[cfg.delta_jobs..] {
                jobs[k].release = eps.pow(x + 1);
            }
            changed = true;
            break;
        }
        if !changed {
            break;
        }
    }
    (inst.with_jobs(jobs), LossCertificate::eps_pow("cap_classes", eps, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Objective;
    use crate::num::{q, qr, Epsilon};
    use crate::simplify::partition_periods;

    fn cfg(n: i64, d: i64) -> SchemeConfig {
        SchemeConfig { epsilon: Epsilon::from_ratio(n, d).unwrap(), ..SchemeConfig::default() }
    }

    #[test]
    fn rescale_two_parts() {
        let c = SchemeConfig { s: 1, ..cfg(1, 1) };
        // period 0: rw 100; period 1 (r=2): rw 1 is insignificant and ends part 0;
        // part 1 starts at r=4 with rw 10.
        let jobs = vec![Job::new("a", q(1), q(1), q(100)), Job::new("b", q(2), q(1), qr(1, 2)), Job::new("c", q(4), q(1), qr(10, 4))];
        let inst = Instance::new(c.epsilon.clone(), MachineEnv::Identical { m: 1 }, false, Objective::WeightedCompletion, jobs).unwrap();
        let parts = partition_periods(&inst, &c);
        assert_eq!(parts.parts, vec![(0, 1), (2, 2)]);
        let (out, cert) = rescale_parts_nonpreemptive(&inst, &parts, &c);
        // 101 ≤ (1/2)·10·2^y  ⇒  y = 5
        assert_eq!(out.job("c").unwrap().weight, qr(10, 4) * q(32));
        assert_eq!(out.job("a").unwrap().weight, q(100));
        assert_eq!(cert.factor, q(2));

        let single = Instance::new(c.epsilon.clone(), MachineEnv::Identical { m: 1 }, false, Objective::WeightedCompletion, vec![Job::new("a", q(1), q(1), q(1))]).unwrap();
        let p = partition_periods(&single, &c);
        assert_eq!(rescale_parts_nonpreemptive(&single, &p, &c).0, single);
    }

    #[test]
    fn speeds_fold() {
        let c = cfg(1, 2);
        let inst = Instance::new(c.epsilon.clone(), MachineEnv::Related { speeds: vec![q(1), q(10)] }, true, Objective::WeightedCompletion, vec![Job::new("a", q(10), q(10), q(1))]).unwrap();
        let (out, _, plan) = bound_speeds_related(&inst, &c);
        assert_eq!(out.env, MachineEnv::Related { speeds: vec![q(1)] });
        assert_eq!(out.jobs[0].p(), &q(1));
        assert_eq!(plan.folded, vec![0]);
        let same = Instance { env: MachineEnv::Related { speeds: vec![q(1), q(1)] }, ..inst };
        assert_eq!(bound_speeds_related(&same, &c).0, same);
    }

    #[test]
    fn single_fast_machine_survives_large_eps() {
        let c = cfg(1, 1);
        let inst = Instance::new(c.epsilon.clone(), MachineEnv::Related { speeds: vec![qr(3, 2)] }, true, Objective::WeightedCompletion, vec![Job::new("a", q(1), q(3), q(1))]).unwrap();
        let (out, _, plan) = bound_speeds_related(&inst, &c);
        assert_eq!(out.env, MachineEnv::Related { speeds: vec![q(1)] });
        assert_eq!(out.jobs[0].p(), &q(2));
        assert!(plan.folded.is_empty());
    }

    fn rel(row: &[Option<i64>]) -> Job {
        Job { id: "j".into(), release: q(100), proc: Proc::PerMachine(row.iter().map(|e| e.map(q)).collect()), weight: q(1) }
    }

    #[test]
    fn unrelated_ratio_bound() {
        let c = cfg(1, 2);
        let mk = |job: Job| Instance::new(c.epsilon.clone(), MachineEnv::Unrelated { m: job.row().unwrap().len() }, true, Objective::WeightedCompletion, vec![job]).unwrap();
        assert_eq!(bound_ptimes_unrelated(&mk(rel(&[Some(1), Some(100)])), &c).0.jobs[0], rel(&[Some(1), None]));
        assert_eq!(bound_ptimes_unrelated(&mk(rel(&[Some(1), Some(3)])), &c).0.jobs[0], rel(&[Some(1), Some(3)]));
        assert_eq!(bound_ptimes_unrelated(&mk(rel(&[Some(5)])), &c).0.jobs[0], rel(&[Some(5)]));
        // m/ε = 1: only the fastest machines remain
        let one = cfg(1, 1);
        let single = Instance::new(one.epsilon.clone(), MachineEnv::Unrelated { m: 1 }, true, Objective::WeightedCompletion, vec![rel(&[Some(5)])]).unwrap();
        assert_eq!(bound_ptimes_unrelated(&single, &one).0.jobs[0], rel(&[Some(5)]));
    }

    #[test]
    fn job_classes() {
        let c = cfg(1, 2);
        let pair = |a: &[Option<i64>], b: &[Option<i64>]| {
            let mut x = rel(a);
            let mut y = rel(b);
            x.id = "x".into();
            y.id = "y".into();
            let t = classify_job_classes(&Instance::new(c.epsilon.clone(), MachineEnv::Unrelated { m: 2 }, true, Objective::WeightedCompletion, vec![x, y]).unwrap());
            t.class_of["x"] == t.class_of["y"]
        };
        assert!(pair(&[Some(1), Some(2)], &[Some(2), Some(4)]));
        assert!(!pair(&[Some(1), Some(2)], &[Some(2), Some(3)]));
        assert!(!pair(&[Some(1), None], &[Some(1), Some(2)]));
    }
}
