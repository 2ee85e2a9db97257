//! Instance and schedule transformations, each returning the transformed
//! object together with the loss factor it may cost.

mod constants;
mod history;
mod sizes;
mod transform;

pub use constants::{theoretical_constants, ConstantsReport};
pub use history::{
    assign_safety_nets, classify_relevance, min_feasible_s, partition_periods, stack_windows, NetWindow, PartStructure, PeriodInfo,
    RelInput, RelevanceRule, RelevanceTracker, SafetyNetPlan,
};
pub use sizes::{
    cap_small_volume, classify_sizes, large_per_type_bound, pack_tiny_jobs, prune_large_jobs, release_exp, round_instance, sweep_dates,
    DateClasses, SizeClass, Sweep,
};
pub use transform::{
    bound_ptimes_unrelated, bound_speeds_related, cap_job_classes, classify_job_classes, rescale_parts_nonpreemptive, FoldPlan,
    JobClassTable,
};

use num_traits::One;
use serde::Serialize;

use crate::config::SchemeConfig;
use crate::error::Result;
use crate::model::Instance;
use crate::num::{fmt_q, pow_i, Epsilon, Q};

/// Claimed multiplicative loss of one transformation step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossCertificate {
    pub step: String,
    pub factor: Q,
}

impl LossCertificate {
    pub fn new(step: &str, factor: Q) -> Self {
        Self { step: step.to_string(), factor }
    }

    pub(crate) fn eps_pow(step: &str, eps: &Epsilon, k: i64) -> Self {
        Self::new(step, pow_i(eps.base(), k))
    }
}

impl Serialize for LossCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LossCertificate", 2)?;
        st.serialize_field("step", &self.step)?;
        st.serialize_field("factor", &fmt_q(&self.factor))?;
        st.end()
    }
}

/// Product of all factors.
pub fn composed_factor(certs: &[LossCertificate]) -> Q {
    certs.iter().fold(Q::one(), |a, c| a * &c.factor)
}

/// Certificates of the pipeline steps that apply to identical machines, at
/// their claimed factors.
pub fn pipeline_certificates(eps: &Epsilon, preemptive: bool) -> Vec<LossCertificate> {
    let mut v = vec![
        LossCertificate::eps_pow("round", eps, 3),
        LossCertificate::eps_pow("pack_tiny", eps, 2),
        LossCertificate::new("prune_large", Q::one()),
        LossCertificate::eps_pow("cap_small", eps, 1),
    ];
    if !preemptive {
        v.push(LossCertificate::eps_pow("rescale_parts", eps, 1));
    }
    v.push(LossCertificate::eps_pow("safety_nets", eps, 1));
    v.push(LossCertificate::eps_pow("parts", eps, 1));
    v
}

/// Result of the full simplification pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub instance: Instance,
    pub certificates: Vec<LossCertificate>,
    pub nets: Option<SafetyNetPlan>,
    pub parts: Option<PartStructure>,
}

impl PipelineOutput {
    pub fn factor(&self) -> Q {
        composed_factor(&self.certificates)
    }

    /// Factor of the steps that change the instance (not the schedule space).
    pub fn instance_factor(&self) -> Q {
        composed_factor(&self.certificates.iter().filter(|c| !matches!(c.step.as_str(), "safety_nets" | "parts")).cloned().collect::<Vec<_>>())
    }
}

/// round → per-date sweep of pack, prune and cap → (non-preemptive
/// rescale) → safety nets → periods and parts.
///
/// Safety nets and parts are only planned for identical and related
/// machines; an infeasible net plan is an error.
pub fn pipeline(inst: &Instance, cfg: &SchemeConfig) -> Result<PipelineOutput> {
    let (rounded, c_round) = round_instance(inst);
    let mut certs = vec![c_round];
    let sweep = sweep_dates(&rounded, cfg, Sweep::all());
    certs.extend(sweep.1);
    let mut out = sweep.0;
    let mut parts = None;
    let mut nets = None;
    if !matches!(out.env, crate::model::MachineEnv::Unrelated { .. }) {
        if !out.preemptive {
            let p = partition_periods(&out, cfg);
            let (scaled, c) = rescale_parts_nonpreemptive(&out, &p, cfg);
            out = scaled;
            certs.push(c);
        }
        let plan = assign_safety_nets(&out, cfg)?;
        certs.push(LossCertificate::eps_pow("safety_nets", &cfg.epsilon, 1));
        nets = Some(plan);
        let p = partition_periods(&out, cfg);
        certs.push(LossCertificate::eps_pow("parts", &cfg.epsilon, 1));
        parts = Some(p);
    }
    Ok(PipelineOutput { instance: out, certificates: certs, nets, parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Job, MachineEnv, Objective};
    use crate::num::{q, qr};

    #[test]
    fn pipeline_output_is_rounded_and_certified() {
        let cfg = SchemeConfig { s: 4, ..SchemeConfig::default() };
        let inst = Instance::new(
            cfg.epsilon.clone(),
            MachineEnv::Identical { m: 1 },
            true,
            Objective::WeightedCompletion,
            vec![Job::new("a", qr(3, 2), qr(3, 5), q(3)), Job::new("b", q(2), q(1), q(1))],
        )
        .unwrap();
        let out = pipeline(&inst, &cfg).unwrap();
        for j in &out.instance.jobs {
            assert!(cfg.epsilon.exact_log(&j.release).is_some());
            assert!(cfg.epsilon.exact_log(j.p()).is_some());
            assert!(j.release >= cfg.epsilon.value() * j.p());
        }
        assert!(out.factor() >= out.instance_factor());
        assert_eq!(out.certificates[0].factor, qr(27, 8));
        let json = serde_json::to_string(&out.certificates).unwrap();
        assert!(json.starts_with(r#"[{"step":"round","factor":"27/8"}"#));
    }
}
