//! The five severity families behind one interface.
//!
//! Pareto lives on `[T, ∞)` with `T` as its scale. Every other family is
//! shifted: `X = T + Y` with `Y` from the base family on `(0, ∞)`, so
//! `T = 0` recovers the unshifted distribution.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{ln_gamma_variate, open_unit, std_normal};
use crate::special::{
    inc_beta_split, ln_beta_unchecked, std_normal_cdf, std_normal_quantile_unchecked,
};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityFamily {
    Pareto,
    Weibull,
    Lognormal,
    #[serde(rename = "loglogistic")]
    LogLogistic,
    #[serde(rename = "gb2")]
    Gb2,
}

impl SeverityFamily {
    pub const ALL: [SeverityFamily; 5] = [
        SeverityFamily::Pareto,
        SeverityFamily::Weibull,
        SeverityFamily::Lognormal,
        SeverityFamily::LogLogistic,
        SeverityFamily::Gb2,
    ];

    pub fn param_count(self) -> usize {
        self.param_names().len()
    }

    /// Parameter labels, in storage order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            SeverityFamily::Pareto => &["shape"],
            SeverityFamily::Weibull => &["shape", "scale"],
            SeverityFamily::Lognormal => &["meanlog", "sdlog"],
            SeverityFamily::LogLogistic => &["shape", "scale"],
            SeverityFamily::Gb2 => &["shape1", "scale", "shape2", "shape3"],
        }
    }

    /// Machine name used in file names and config files.
    pub fn key(self) -> &'static str {
        match self {
            SeverityFamily::Pareto => "pareto",
            SeverityFamily::Weibull => "weibull",
            SeverityFamily::Lognormal => "lognormal",
            SeverityFamily::LogLogistic => "loglogistic",
            SeverityFamily::Gb2 => "gb2",
        }
    }

    /// Human label used as the row name in report tables.
    pub fn label(self) -> &'static str {
        match self {
            SeverityFamily::Pareto => "Pareto",
            SeverityFamily::Weibull => "Weibull",
            SeverityFamily::Lognormal => "lognormal",
            SeverityFamily::LogLogistic => "log-logistic",
            SeverityFamily::Gb2 => "GB2",
        }
    }

    /// Whether observations equal to the threshold are inside the support.
    pub fn includes_threshold(self) -> bool {
        matches!(self, SeverityFamily::Pareto)
    }

    /// Smallest sample size the fitter accepts.
    pub fn min_sample_size(self) -> usize {
        match self {
            SeverityFamily::Pareto => 1,
            SeverityFamily::Weibull | SeverityFamily::Lognormal => 2,
            SeverityFamily::LogLogistic => 3,
            SeverityFamily::Gb2 => 8,
        }
    }
}

impl fmt::Display for SeverityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SeverityFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pareto" => Ok(SeverityFamily::Pareto),
            "weibull" => Ok(SeverityFamily::Weibull),
            "lognormal" | "lnorm" => Ok(SeverityFamily::Lognormal),
            "loglogistic" | "log-logistic" | "llogis" => Ok(SeverityFamily::LogLogistic),
            "gb2" => Ok(SeverityFamily::Gb2),
            other => Err(Error::Parse(format!("unknown severity family `{other}`"))),
        }
    }
}

/// A family, its parameter vector and the support threshold `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityModel {
    family: SeverityFamily,
    params: Vec<f64>,
    threshold: f64,
}

impl SeverityModel {
    pub fn new(family: SeverityFamily, params: impl Into<Vec<f64>>, threshold: f64) -> Result<Self> {
        let params = params.into();
        validate(family, &params, threshold)?;
        Ok(SeverityModel { family, params, threshold })
    }

    pub fn pareto(alpha: f64, threshold: f64) -> Result<Self> {
        Self::new(SeverityFamily::Pareto, vec![alpha], threshold)
    }

    pub fn weibull(shape: f64, scale: f64, threshold: f64) -> Result<Self> {
        Self::new(SeverityFamily::Weibull, vec![shape, scale], threshold)
    }

    pub fn lognormal(meanlog: f64, sdlog: f64, threshold: f64) -> Result<Self> {
        Self::new(SeverityFamily::Lognormal, vec![meanlog, sdlog], threshold)
    }

    pub fn loglogistic(shape: f64, scale: f64, threshold: f64) -> Result<Self> {
        Self::new(SeverityFamily::LogLogistic, vec![shape, scale], threshold)
    }

    pub fn gb2(a: f64, b: f64, p: f64, q: f64, threshold: f64) -> Result<Self> {
        Self::new(SeverityFamily::Gb2, vec![a, b, p, q], threshold)
    }

    pub fn family(&self) -> SeverityFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Same family and threshold, new parameters.
    pub fn with_params(&self, params: impl Into<Vec<f64>>) -> Result<Self> {
        Self::new(self.family, params, self.threshold)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let lp = self.log_pdf(x);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            lp.exp()
        }
    }

    /// `ln f(x)`, or `-∞` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        log_pdf_raw(self.family, &self.params, self.threshold, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = self.threshold;
        let p = &self.params;
        if x.is_nan() {
            return f64::NAN;
        }
        match self.family {
            SeverityFamily::Pareto => {
                if x <= t {
                    0.0
                } else {
                    // 1 - (T/x)^α
                    -(p[0] * (t / x).ln()).exp_m1()
                }
            }
            _ => {
                let y = x - t;
                if y <= 0.0 {
                    return 0.0;
                }
                if y.is_infinite() {
                    return 1.0;
                }
                match self.family {
                    SeverityFamily::Weibull => -(-(y / p[1]).powf(p[0])).exp_m1(),
                    SeverityFamily::Lognormal => std_normal_cdf((y.ln() - p[0]) / p[1]),
                    SeverityFamily::LogLogistic => logistic(p[0] * (y / p[1]).ln()),
                    SeverityFamily::Gb2 => {
                        let w = p[0] * (y / p[1]).ln();
                        let (z, one_minus_z) = (logistic(w), logistic(-w));
                        inc_beta_split(z, one_minus_z, p[2], p[3])
                    }
                    SeverityFamily::Pareto => unreachable!(),
                }
            }
        }
    }

    /// Inverse CDF on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile requires 0 < u < 1, got {u}")));
        }
        let t = self.threshold;
        let p = &self.params;
        Ok(match self.family {
            SeverityFamily::Pareto => t * (-(-u).ln_1p() / p[0]).exp(),
            SeverityFamily::Weibull => t + p[1] * (-(-u).ln_1p()).powf(1.0 / p[0]),
            SeverityFamily::Lognormal => t + (p[0] + p[1] * std_normal_quantile_unchecked(u)).exp(),
            SeverityFamily::LogLogistic => t + p[1] * ((u.ln() - (-u).ln_1p()) / p[0]).exp(),
            SeverityFamily::Gb2 => {
                let w = gb2_log_odds_quantile(u, p[2], p[3]);
                t + p[1] * (w / p[0]).exp()
            }
        })
    }

    /// `n` i.i.d. draws from the model.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = self.threshold;
        let p = &self.params;
        match self.family {
            // U and 1 - U share a law; U ∈ (0, 1) keeps ln U finite.
            SeverityFamily::Pareto => t * (-open_unit(rng).ln() / p[0]).exp(),
            SeverityFamily::Weibull => t + p[1] * (-open_unit(rng).ln()).powf(1.0 / p[0]),
            SeverityFamily::Lognormal => t + (p[0] + p[1] * std_normal(rng)).exp(),
            SeverityFamily::LogLogistic => {
                let u = open_unit(rng);
                t + p[1] * ((u.ln() - (-u).ln_1p()) / p[0]).exp()
            }
            SeverityFamily::Gb2 => {
                let lg_p = ln_gamma_variate(rng, p[2]);
                let lg_q = ln_gamma_variate(rng, p[3]);
                t + p[1] * ((lg_p - lg_q) / p[0]).exp()
            }
        }
    }

    /// Sum of `log_pdf` over `xs`; `-∞` if any point is outside the support.
    pub fn log_likelihood(&self, xs: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &x in xs {
            let lp = self.log_pdf(x);
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            acc += lp;
        }
        acc
    }

    /// Whether `x` lies in the support.
    pub fn in_support(&self, x: f64) -> bool {
        if self.family.includes_threshold() {
            x >= self.threshold
        } else {
            x > self.threshold
        }
    }
}

fn validate(family: SeverityFamily, params: &[f64], threshold: f64) -> Result<()> {
    let bad = |reason: String| Err(Error::InvalidParameters { family, reason });
    if params.len() != family.param_count() {
        return bad(format!("expected {} parameters, got {}", family.param_count(), params.len()));
    }
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return bad(format!("threshold must be finite and nonnegative, got {threshold}"));
    }
    if family == SeverityFamily::Pareto && threshold <= 0.0 {
        return bad("Pareto requires a positive threshold".into());
    }
    for (name, &v) in family.param_names().iter().zip(params) {
        if !v.is_finite() {
            return bad(format!("{name} must be finite, got {v}"));
        }
        let unrestricted = family == SeverityFamily::Lognormal && *name == "meanlog";
        if !unrestricted && v <= 0.0 {
            return bad(format!("{name} must be positive, got {v}"));
        }
    }
    Ok(())
}

/// `ln f(x)` without parameter validation; used by the finite-difference
/// score oracle, which perturbs parameters directly.
pub(crate) fn log_pdf_raw(family: SeverityFamily, p: &[f64], t: f64, x: f64) -> f64 {
    if family == SeverityFamily::Pareto {
        if !(x >= t) {
            return f64::NEG_INFINITY;
        }
        let alpha = p[0];
        return alpha.ln() - t.ln() - (alpha + 1.0) * (x / t).ln();
    }
    let y = x - t;
    if !(y > 0.0) || y.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let ly = y.ln();
    match family {
        SeverityFamily::Weibull => {
            let (a, b) = (p[0], p[1]);
            let r = ly - b.ln();
            a.ln() - b.ln() + (a - 1.0) * r - (a * r).exp()
        }
        SeverityFamily::Lognormal => {
            let (mu, sigma) = (p[0], p[1]);
            let z = (ly - mu) / sigma;
            -LN_SQRT_2PI - sigma.ln() - ly - 0.5 * z * z
        }
        SeverityFamily::LogLogistic => {
            let (a, s) = (p[0], p[1]);
            let w = a * (ly - s.ln());
            a.ln() + w - ly - 2.0 * softplus(w)
        }
        SeverityFamily::Gb2 => {
            let (a, b, pp, q) = (p[0], p[1], p[2], p[3]);
            let r = ly - b.ln();
            let w = a * r;
            a.ln() + (a * pp - 1.0) * r - b.ln() - ln_beta_unchecked(pp, q) - (pp + q) * softplus(w)
        }
        SeverityFamily::Pareto => unreachable!(),
    }
}

/// `ln(1 + e^w)` without overflow.
#[inline]
pub(crate) fn softplus(w: f64) -> f64 {
    if w > 0.0 {
        w + (-w).exp().ln_1p()
    } else {
        w.exp().ln_1p()
    }
}

#[inline]
fn logistic(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    }
}

/// Solves `I_{σ(w)}(p, q) = u` for the log-odds `w`, where `σ` is the
/// logistic function. Safeguarded Newton inside an expanding bracket.
fn gb2_log_odds_quantile(u: f64, p: f64, q: f64) -> f64 {
    let lb = ln_beta_unchecked(p, q);
    let cdf = |w: f64| inc_beta_split(logistic(w), logistic(-w), p, q);
    // dF/dw = z^p (1-z)^q / B(p, q)
    let dens = |w: f64| (-p * softplus(-w) - q * softplus(w) - lb).exp();

    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while cdf(lo) > u {
        lo *= 2.0;
        if lo < -1e4 {
            break;
        }
    }
    while cdf(hi) < u {
        hi *= 2.0;
        if hi > 1e4 {
            break;
        }
    }
    let mut w = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(w) - u;
        if f == 0.0 {
            return w;
        }
        if f < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let d = dens(w);
        let mut next = w - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-15 * (1.0 + w.abs()) || hi - lo <= 1e-15 * (1.0 + w.abs()) {
            return next;
        }
        w = next;
    }
    w
}
