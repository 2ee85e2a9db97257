//! Closed-form and least-integer constants of the scheme for a given `ε, m`.

use num_traits::One;
use serde::Serialize;

use super::sizes::large_per_type_bound;
use crate::num::{ceil_i64, fmt_q, log_f64, pow_i, Epsilon, Q};

/// Values above which a constant is flagged as impractical at desk scale.
const DESK_S: i64 = 8;
const DESK_K: i64 = 8;
const DESK_DELTA: i64 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstantsReport {
    pub epsilon: String,
    pub m: usize,
    pub d: i64,
    /// `⌈4·log_{1+ε}(1/ε)⌉`.
    pub distinct_large_sizes: i64,
    /// `⌈m/ε² + m⌉` kept per (date, size) type.
    pub large_per_type: i64,
    /// `⌈m/ε² + m⌉ · ⌈4·log_{1+ε}(1/ε)⌉` large jobs per date.
    pub max_large_per_type: i64,
    /// `⌈log_{1+ε}(2d/ε⁴)⌉`.
    pub distinct_small_sizes: i64,
    /// Small jobs per date, `⌈2dm/ε⌉`.
    pub max_small_per_date: i64,
    #[serde(rename = "Delta")]
    pub delta_jobs: i64,
    pub s: i64,
    #[serde(rename = "K")]
    pub k: i64,
    #[serde(rename = "Gamma")]
    pub gamma: i64,
    /// Domination factor `coefficient · (1+ε)^{exponent}`.
    pub domination_coefficient: String,
    pub domination_exponent: i64,
    pub domination_log10: String,
    /// Pack sizes lie in `[lo, hi]·|I_x|`.
    pub pack_lo: String,
    pub pack_hi: String,
    #[serde(rename = "M")]
    pub offset_m: i64,
    pub warnings: Vec<String>,
}

/// Least `s ≥ 1` with `(1+ε)^{s−1} ≥ m(ε + (8/ε³)·log_{1+ε}(1/ε))/ε²`.
fn safety_net_s(eps: &Epsilon, m: usize) -> i64 {
    let e = crate::num::to_f64(eps.value());
    let ln_b = log_f64(eps.base());
    let target = m as f64 * (e + 8.0 / (e * e * e) * ((1.0 / e).ln() / ln_b)) / (e * e);
    let mut s = 1;
    while ((s - 1) as f64) * ln_b < target.ln() - 1e-12 {
        s += 1;
    }
    s
}

/// Least `K` with `q^K/(1−q^K) ≤ ε`, `q = 1 − δ'/(1+δ')`, `δ' = ε/(1+ε)^s`,
/// i.e. `q^K ≤ ε/(1+ε)`; checked exactly.
fn period_k(eps: &Epsilon, s: i64) -> i64 {
    let d = eps.value() / pow_i(eps.base(), s);
    let q = Q::one() - &d / (Q::one() + &d);
    let bound = eps.value() / eps.base();
    let est = (log_f64(&bound) / log_f64(&q)).floor().max(1.0) as i64;
    let mut k = (est - 2).max(1);
    while pow_i(&q, k - 1) <= bound && k > 1 {
        k -= 1;
    }
    while pow_i(&q, k) > bound {
        k += 1;
    }
    k
}

pub fn theoretical_constants(eps: &Epsilon, m: usize, d: i64) -> ConstantsReport {
    let e = eps.value();
    let inv = Q::one() / e;
    let distinct_large = eps.ceil_log(&pow_i(&inv, 4)).expect("positive");
    let per_type = large_per_type_bound(eps, m) as i64;
    let max_large = per_type * distinct_large;
    let dq = Q::from_integer(d.into());
    let distinct_small = eps.ceil_log(&(Q::from_integer(2.into()) * &dq * pow_i(&inv, 4))).expect("positive");
    let max_small = ceil_i64(&(Q::from_integer((2 * d * m as i64).into()) / e));
    let delta_jobs = max_large + max_small;
    let s = safety_net_s(eps, m);
    let k = period_k(eps, s);
    let gamma = k * s;
    let coeff = e / Q::from_integer((delta_jobs * gamma).into());
    let dom_exp = -(gamma + s);
    let log10 = log_f64(&coeff) / std::f64::consts::LN_10 + dom_exp as f64 * log_f64(eps.base()) / std::f64::consts::LN_10;
    let offset_m = ceil_i64(&(pow_i(eps.base(), s) / e));
    let mut warnings = Vec::new();
    if s > DESK_S {
        warnings.push(format!("s = {s} exceeds desk scale ({DESK_S})"));
    }
    if k > DESK_K {
        warnings.push(format!("K = {k} exceeds desk scale ({DESK_K})"));
    }
    if delta_jobs > DESK_DELTA {
        warnings.push(format!("Delta = {delta_jobs} exceeds desk scale ({DESK_DELTA})"));
    }
    ConstantsReport {
        epsilon: fmt_q(e),
        m,
        d,
        distinct_large_sizes: distinct_large,
        large_per_type: per_type,
        max_large_per_type: max_large,
        distinct_small_sizes: distinct_small,
        max_small_per_date: max_small,
        delta_jobs,
        s,
        k,
        gamma,
        domination_coefficient: fmt_q(&coeff),
        domination_exponent: dom_exp,
        domination_log10: format!("{log10:.3}"),
        pack_lo: fmt_q(&(e / (Q::from_integer(2.into()) * &dq))),
        pack_hi: fmt_q(&(e / &dq)),
        offset_m,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_epsilon_values() {
        let eps = Epsilon::from_ratio(1, 2).unwrap();
        let r = theoretical_constants(&eps, 1, 4);
        assert_eq!(r.distinct_large_sizes, 7);
        assert_eq!(r.large_per_type, 5);
        assert_eq!(r.max_large_per_type, 35);
        assert_eq!(r.s, 17);
        assert_eq!(r.gamma, r.k * r.s);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn k_matches_direct_iteration() {
        let eps = Epsilon::from_ratio(1, 2).unwrap();
        for s in 1..5 {
            let d = eps.value() / pow_i(eps.base(), s);
            let q = Q::one() - &d / (Q::one() + &d);
            let mut k = 1;
            loop {
                let qk = pow_i(&q, k);
                if &qk / (Q::one() - &qk) <= *eps.value() {
                    break;
                }
                k += 1;
            }
            assert_eq!(period_k(&eps, s), k, "s = {s}");
        }
        assert_eq!(period_k(&eps, 2), 6);
    }
}
