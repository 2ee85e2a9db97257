use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{qr, qstr, Epsilon, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Desk,
    Theoretical,
}

/// Scheme constants. Keys in JSON use the symbol names (`Delta`, `K`, `G`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: Epsilon,
    /// Safety-net span in intervals.
    #[serde(default = "default_s")]
    pub s: i64,
    /// Max jobs per release date.
    #[serde(rename = "Delta", default = "default_delta_jobs")]
    pub delta_jobs: usize,
    #[serde(rename = "K", default = "default_k")]
    pub k: i64,
    /// Optional echo of `K·s`; rejected when inconsistent.
    #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
    pub gamma_echo: Option<i64>,
    #[serde(with = "qstr", default = "default_mu")]
    pub mu: Q,
    #[serde(default = "default_d")]
    pub d: i64,
    #[serde(with = "qstr", default = "default_delta")]
    pub delta: Q,
    #[serde(rename = "G", default = "default_g")]
    pub g: i64,
    #[serde(rename = "X_max", default = "default_x_max")]
    pub x_max: i64,
    #[serde(rename = "E_cap", default = "default_e_cap")]
    pub e_cap: i64,
    #[serde(default)]
    pub mode: Mode,
    /// Desk-mode cap on large jobs per (release date, size) type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_large_per_type: Option<usize>,
    /// Periods per part for offset splitting; theoretical value when absent.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub offset_m: Option<i64>,
    #[serde(default = "default_oracle_job_cap")]
    pub oracle_job_cap: usize,
    #[serde(default = "default_oracle_state_cap")]
    pub oracle_state_cap: u64,
    #[serde(default = "default_class_cap")]
    pub class_cap: usize,
    #[serde(default = "default_catalog_cap")]
    pub catalog_cap: usize,
    #[serde(default = "default_map_cap")]
    pub map_cap: u64,
    #[serde(default = "default_rand_enum_cap")]
    pub rand_enum_cap: usize,
}

fn default_epsilon() -> Epsilon {
    Epsilon::from_ratio(1, 2).expect("valid")
}
fn default_s() -> i64 {
    2
}
fn default_delta_jobs() -> usize {
    2
}
fn default_k() -> i64 {
    2
}
fn default_mu() -> Q {
    qr(1, 4)
}
fn default_d() -> i64 {
    4
}
fn default_delta() -> Q {
    qr(1, 8)
}
fn default_g() -> i64 {
    4
}
fn default_x_max() -> i64 {
    4
}
fn default_e_cap() -> i64 {
    16
}
fn default_oracle_job_cap() -> usize {
    7
}
fn default_oracle_state_cap() -> u64 {
    10_000_000
}
fn default_class_cap() -> usize {
    200_000
}
fn default_catalog_cap() -> usize {
    100_000
}
fn default_map_cap() -> u64 {
    50_000_000
}
fn default_rand_enum_cap() -> usize {
    4
}

impl Default for SchemeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

fn reciprocal_is_integer(v: &Q) -> bool {
    v.numer().is_one() || (v.recip()).is_integer()
}

impl SchemeConfig {
    /// `Γ = K·s`.
    pub fn gamma(&self) -> i64 {
        self.k * self.s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.s < 1 {
            return bad("s must be at least 1");
        }
        if self.k < 1 {
            return bad("K must be at least 1");
        }
        if let Some(g) = self.gamma_echo {
            if g != self.gamma() {
                return Err(Error::Config(format!("Gamma = {g} but K*s = {}", self.gamma())));
            }
        }
        if self.mu <= Q::zero() || self.mu > Q::one() || !reciprocal_is_integer(&self.mu) {
            return bad("mu must be 1/n for a positive integer n");
        }
        if self.delta <= Q::zero() || self.delta > Q::one() || !reciprocal_is_integer(&self.delta) {
            return bad("delta must be 1/n for a positive integer n");
        }
        if self.d < 1 {
            return bad("d must be positive");
        }
        if self.g < 1 {
            return bad("G must be positive");
        }
        if self.x_max < 0 {
            return bad("X_max must be non-negative");
        }
        if self.e_cap < 1 {
            return bad("E_cap must be positive");
        }
        if let Some(m) = self.offset_m {
            if m < 1 {
                return bad("M must be positive");
            }
        }
        if self.max_large_per_type == Some(0) {
            return bad("max_large_per_type must be positive");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SchemeConfig = serde_json::from_str(text).map_err(|e| Error::Parse { field: "scheme".into(), msg: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Atoms per large job, `1/μ`.
    pub fn atoms(&self) -> i64 {
        (self.mu.recip()).to_integer().try_into().expect("1/mu fits i64")
    }

    /// Quanta per unit probability, `1/δ`.
    pub fn delta_steps(&self) -> i64 {
        (self.delta.recip()).to_integer().try_into().expect("1/delta fits i64")
    }

    pub fn eps(&self) -> &Epsilon {
        &self.epsilon
    }
}
