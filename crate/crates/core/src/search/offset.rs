//! Random offsets: with offset `o`, every period `i ≡ o (mod M)` goes to the
//! safety nets and the instance splits into parts of `M` periods.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::config::SchemeConfig;
use crate::error::{Error, Result};
use crate::model::{Instance, Job};
use crate::num::{ceil_i64, pow_i, Q};
use crate::schedule::release_weight;
use crate::simplify::release_exp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetVariant {
    pub offset: i64,
    /// Jobs released in the moved periods.
    pub safety_net_only: Vec<String>,
    pub moved_rw: Q,
    /// Inclusive period ranges; each ends at a moved period or the last one.
    pub parts: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetReport {
    pub m_offsets: i64,
    pub variants: Vec<OffsetVariant>,
    pub total_rw: Q,
    /// `(1/M)·Σ_o moved_rw(o)`, equal to `rw(I)/M`.
    pub average_moved: Q,
}

/// `M` from the config, or `⌈(1+ε)^s/ε⌉`.
fn offset_count(cfg: &SchemeConfig) -> i64 {
    cfg.offset_m.unwrap_or_else(|| {
        let eps = &cfg.epsilon;
        ceil_i64(&(pow_i(eps.base(), cfg.s) / eps.value()))
    })
}

fn periods(inst: &Instance, s: i64) -> BTreeMap<i64, Vec<&Job>> {
    let mut per: BTreeMap<i64, Vec<&Job>> = BTreeMap::new();
    for j in &inst.jobs {
        per.entry(release_exp(&inst.epsilon, j).div_euclid(s)).or_default().push(j);
    }
    per
}

/// One variant per offset (all `M` when `offset` is `None`).
pub fn offset_split(inst: &Instance, cfg: &SchemeConfig, offset: Option<i64>) -> Result<OffsetReport> {
    let m = offset_count(cfg);
    if m < 1 {
        return Err(Error::Config(format!("offset count must be positive, got {m}")));
    }
    if let Some(o) = offset {
        if !(0..m).contains(&o) {
            return Err(Error::Config(format!("offset {o} outside 0..{m}")));
        }
    }
    let per = periods(inst, cfg.s);
    let first = per.keys().next().copied().unwrap_or(0);
    let last = per.keys().next_back().copied().unwrap_or(0);
    let offsets: Vec<i64> = offset.map_or_else(|| (0..m).collect(), |o| vec![o]);
    let variants = offsets
        .into_iter()
        .map(|o| {
            let mut v = OffsetVariant { offset: o, safety_net_only: Vec::new(), moved_rw: Q::zero(), parts: Vec::new() };
            let mut start = first;
            for k in first..=last {
                if k.rem_euclid(m) != o {
                    continue;
                }
                if let Some(jobs) = per.get(&k) {
                    v.moved_rw += release_weight(jobs.iter().copied());
                    v.safety_net_only.extend(jobs.iter().map(|j| j.id.clone()));
                }
                v.parts.push((start, k));
                start = k + 1;
            }
            if start <= last {
                v.parts.push((start, last));
            }
            v.safety_net_only.sort();
            v
        })
        .collect::<Vec<_>>();
    let total_rw = release_weight(inst.jobs.iter());
    let sum = variants.iter().fold(Q::zero(), |a, v| a + &v.moved_rw);
    Ok(OffsetReport { m_offsets: m, average_moved: sum / Q::from_integer(m.into()), variants, total_rw })
}

/// Offsets whose moved periods meet the intervals `x_lo..=x_hi`.
pub fn offsets_hitting_window(s: i64, m: i64, x_lo: i64, x_hi: i64) -> BTreeSet<i64> {
    (x_lo.div_euclid(s)..=x_hi.div_euclid(s)).map(|k| k.rem_euclid(m)).collect()
}
