//! Synthetic loss histories: a truncated lognormal body below the threshold
//! spliced to a truncated Pareto tail above it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{open_unit, stream_rng};
use crate::special::{std_normal_cdf, std_normal_quantile_unchecked};

const UOM1: &str = include_str!("../profiles/uom1.profile");

/// Names accepted by [`LossProfile::builtin`].
pub const BUILTIN_PROFILES: [&str; 1] = ["uom1"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    pub name: String,
    pub threshold: f64,
    /// Probability that a loss comes from the tail.
    pub tail_weight: f64,
    pub body_meanlog: f64,
    pub body_sdlog: f64,
    pub tail_alpha: f64,
    /// Upper truncation point of the tail.
    pub tail_cap: f64,
    pub default_n: usize,
}

impl LossProfile {
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "uom1" => Self::parse(UOM1),
            _ => Err(Error::Parse(format!(
                "unknown profile `{name}`; available: {}",
                BUILTIN_PROFILES.join(", ")
            ))),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("profile line {}: expected `key = value`", i + 1)))?;
            if fields.insert(k.trim().to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse(format!("profile line {}: duplicate key `{}`", i + 1, k.trim())));
            }
        }
        let mut take = |key: &str| {
            fields.remove(key).ok_or_else(|| Error::Parse(format!("profile is missing `{key}`")))
        };
        fn num<T: std::str::FromStr>(key: &str, (line, v): (usize, String)) -> Result<T> {
            v.parse().map_err(|_| Error::Parse(format!("profile line {line}: bad value for `{key}`: `{v}`")))
        }
        let profile = LossProfile {
            name: take("name")?.1,
            threshold: num("threshold", take("threshold")?)?,
            tail_weight: num("tail_weight", take("tail_weight")?)?,
            body_meanlog: num("body_meanlog", take("body_meanlog")?)?,
            body_sdlog: num("body_sdlog", take("body_sdlog")?)?,
            tail_alpha: num("tail_alpha", take("tail_alpha")?)?,
            tail_cap: num("tail_cap", take("tail_cap")?)?,
            default_n: num("default_n", take("default_n")?)?,
        };
        if let Some((key, (line, _))) = fields.into_iter().next() {
            return Err(Error::Parse(format!("profile line {line}: unknown key `{key}`")));
        }
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.threshold > 0.0
            && self.tail_weight > 0.0
            && self.tail_weight < 1.0
            && self.body_meanlog.is_finite()
            && self.body_sdlog > 0.0
            && self.tail_alpha > 0.0
            && self.tail_cap > self.threshold
            && self.default_n > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parse(format!("profile `{}` has out-of-range values", self.name)))
        }
    }

    /// `n` losses from stream 0 of `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        let body_mass = std_normal_cdf((self.threshold.ln() - self.body_meanlog) / self.body_sdlog);
        let tail_mass = 1.0 - (self.threshold / self.tail_cap).powf(self.tail_alpha);
        (0..n)
            .map(|_| {
                let u = open_unit(&mut rng);
                if open_unit(&mut rng) < self.tail_weight {
                    self.threshold * (1.0 - u * tail_mass).powf(-1.0 / self.tail_alpha)
                } else {
                    let z = std_normal_quantile_unchecked(u * body_mass);
                    (self.body_meanlog + self.body_sdlog * z).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub fraction_above_threshold: f64,
}

pub fn summarize(losses: &[f64], threshold: f64) -> LossSummary {
    let n = losses.len();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let above = losses.iter().filter(|&&x| x >= threshold).count();
    LossSummary {
        n,
        mean,
        median: crate::mle::median(losses),
        fraction_above_threshold: above as f64 / n as f64,
    }
}
