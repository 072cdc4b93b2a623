//! Maximum-likelihood fitting for the five families.
//!
//! Pareto and lognormal have closed forms, Weibull reduces to a
//! one-dimensional profile root, and log-logistic and GB2 are minimized
//! numerically with Nelder–Mead on a penalized negative log-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{softplus, SeverityFamily, SeverityModel};
use crate::optimizer::{nelder_mead, NelderMeadOptions, OptimResult};
use crate::special::ln_beta_unchecked;

/// Objective value returned outside the positive orthant.
pub const PENALTY: f64 = 1e10;

const WEIBULL_SHAPE_MIN: f64 = 1e-3;
const WEIBULL_SHAPE_MAX: f64 = 1e3;
const WEIBULL_SCAN_STEPS: usize = 200;

/// Relative data perturbations defining the second and third GB2 starts.
pub const GB2_PERTURBATIONS: [f64; 3] = [1.0, 1.05, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FitWarning {
    /// Weibull shape at or below one, where the literature flags the MLE as
    /// inconsistent.
    WeibullInconsistent,
    /// The numerical starts ended in different local minima.
    LocalMinimumRisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: SeverityModel,
    pub nll: f64,
    pub converged: bool,
    pub n: usize,
    pub warnings: Vec<FitWarning>,
    pub start_points_tried: usize,
}

impl FitResult {
    fn new(model: SeverityModel, xs: &[f64], start_points_tried: usize) -> Self {
        let nll = -model.log_likelihood(xs);
        let mut warnings = Vec::new();
        if model.family() == SeverityFamily::Weibull && model.params()[0] <= 1.0 {
            warnings.push(FitWarning::WeibullInconsistent);
        }
        FitResult { model, nll, converged: true, n: xs.len(), warnings, start_points_tried }
    }

    pub fn params(&self) -> &[f64] {
        self.model.params()
    }

    pub fn has_warning(&self, w: FitWarning) -> bool {
        self.warnings.contains(&w)
    }

    fn warn(&mut self, w: FitWarning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
            self.warnings.sort();
        }
    }
}

/// Fits `family` to `xs` with support threshold `threshold`.
pub fn fit(family: SeverityFamily, xs: &[f64], threshold: f64) -> Result<FitResult> {
    match family {
        SeverityFamily::Pareto => fit_pareto(xs, threshold),
        SeverityFamily::Weibull => fit_weibull(xs, threshold),
        SeverityFamily::Lognormal => fit_lognormal(xs, threshold),
        SeverityFamily::LogLogistic => fit_loglogistic(xs, threshold),
        SeverityFamily::Gb2 => fit_gb2(xs, threshold),
    }
}

/// `α̂ = n / Σ ln(x_i / T)`.
pub fn fit_pareto(xs: &[f64], threshold: f64) -> Result<FitResult> {
    if !(threshold > 0.0) {
        return Err(Error::precondition(format!("Pareto threshold must be positive, got {threshold}")));
    }
    if xs.is_empty() {
        return Err(Error::degenerate("empty sample"));
    }
    let mut sum = 0.0;
    for &x in xs {
        if !(x >= threshold) || !x.is_finite() {
            return Err(Error::degenerate(format!("observation {x} below Pareto threshold {threshold}")));
        }
        sum += (x / threshold).ln();
    }
    if sum <= 0.0 {
        return Err(Error::degenerate("every observation equals the threshold"));
    }
    let alpha = xs.len() as f64 / sum;
    Ok(FitResult::new(SeverityModel::pareto(alpha, threshold)?, xs, 0))
}

/// Mean and biased (divisor `n`) standard deviation of `ln(x - T)`.
pub fn fit_lognormal(xs: &[f64], threshold: f64) -> Result<FitResult> {
    let ly = shifted_logs(xs, threshold, 2)?;
    let n = ly.len() as f64;
    let mu = ly.iter().sum::<f64>() / n;
    let var = ly.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::degenerate("all observations are equal"));
    }
    Ok(FitResult::new(SeverityModel::lognormal(mu, sigma, threshold)?, xs, 0))
}

/// Profile-likelihood root for the shape, closed form for the scale.
pub fn fit_weibull(xs: &[f64], threshold: f64) -> Result<FitResult> {
    let ly = shifted_logs(xs, threshold, 2)?;
    let max_ly = ly.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Work with t = y / max(y) so y^a never overflows; g is scale invariant.
    let lt: Vec<f64> = ly.iter().map(|l| l - max_ly).collect();
    if lt.iter().all(|&l| l == 0.0) {
        return Err(Error::degenerate("all observations are equal"));
    }
    let shape = weibull_shape_root(&lt).ok_or_else(|| Error::NoConvergence {
        family: SeverityFamily::Weibull,
        reason: format!("profile equation not bracketed in [{WEIBULL_SHAPE_MIN}, {WEIBULL_SHAPE_MAX}]"),
    })?;
    let n = lt.len() as f64;
    let mean_ta = lt.iter().map(|l| (shape * l).exp()).sum::<f64>() / n;
    let scale = (max_ly + mean_ta.ln() / shape).exp();
    Ok(FitResult::new(SeverityModel::weibull(shape, scale, threshold)?, xs, 0))
}

/// `g(a) = Σ t^a ln t / Σ t^a − 1/a − mean(ln t)`, with its derivative.
pub fn weibull_profile_equation(lt: &[f64], a: f64) -> (f64, f64) {
    let (mut s0, mut s1, mut s2, mut sl) = (0.0, 0.0, 0.0, 0.0);
    for &l in lt {
        let w = (a * l).exp();
        s0 += w;
        s1 += w * l;
        s2 += w * l * l;
        sl += l;
    }
    let m1 = s1 / s0;
    let g = m1 - 1.0 / a - sl / lt.len() as f64;
    let dg = s2 / s0 - m1 * m1 + 1.0 / (a * a);
    (g, dg)
}

fn weibull_shape_root(lt: &[f64]) -> Option<f64> {
    let ratio = (WEIBULL_SHAPE_MAX / WEIBULL_SHAPE_MIN).powf(1.0 / WEIBULL_SCAN_STEPS as f64);
    let mut lo = WEIBULL_SHAPE_MIN;
    let (g_lo, _) = weibull_profile_equation(lt, lo);
    if !(g_lo < 0.0) {
        return None;
    }
    let mut hi = None;
    for _ in 0..WEIBULL_SCAN_STEPS {
        let next = lo * ratio;
        let (g, _) = weibull_profile_equation(lt, next);
        if g >= 0.0 {
            hi = Some(next);
            break;
        }
        lo = next;
    }
    let mut hi = hi?;
    // Newton inside the bracket, bisecting whenever a step leaves it.
    let mut a = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, dg) = weibull_profile_equation(lt, a);
        if g == 0.0 {
            return Some(a);
        }
        if g < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let mut next = a - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - a).abs() <= 1e-13 * a || hi - lo <= 1e-13 * a {
            return Some(next);
        }
        a = next;
    }
    Some(a)
}

/// Median-based starting values `(a_init, s_init)` for the log-logistic fit.
pub fn loglogistic_initial_params(y: &[f64]) -> Result<[f64; 2]> {
    if y.len() < 3 {
        return Err(Error::degenerate(format!("log-logistic needs at least 3 observations, got {}", y.len())));
    }
    let s = median(y);
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = ((y.len() - 1) as f64).ln() / (max / s).ln();
    if !a.is_finite() || !(a > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidStart);
    }
    Ok([a, s])
}

pub fn fit_loglogistic(xs: &[f64], threshold: f64) -> Result<FitResult> {
    let ly = shifted_logs(xs, threshold, 3)?;
    let y: Vec<f64> = ly.iter().map(|l| l.exp()).collect();
    let init = loglogistic_initial_params(&y)?;
    let n = ly.len() as f64;
    let sum_ly: f64 = ly.iter().sum();
    let objective = |th: &[f64]| {
        let (a, s) = (th[0], th[1]);
        if !(a > 0.0 && s > 0.0) {
            return PENALTY;
        }
        let ls = s.ln();
        let mut acc = 0.0;
        for &l in &ly {
            let w = a * (l - ls);
            acc += 2.0 * softplus(w) - w;
        }
        let v = acc + sum_ly - n * a.ln();
        if v.is_finite() { v } else { PENALTY }
    };
    let opts = NelderMeadOptions { max_restarts: 1, ..Default::default() };
    let r = nelder_mead(objective, &init, &opts)?;
    if !r.converged {
        return Err(Error::NoConvergence {
            family: SeverityFamily::LogLogistic,
            reason: format!("Nelder-Mead stopped after {} iterations", r.iterations),
        });
    }
    let model = SeverityModel::loglogistic(r.argmin[0], r.argmin[1], threshold)?;
    Ok(FitResult::new(model, xs, 1))
}

/// GB2 start values from shifted data: `p = q = 1`, `b` the median and `a`
/// the log-logistic shape initializer. Equivariant in `b` under rescaling.
pub fn gb2_initial_params(y: &[f64]) -> Result<[f64; 4]> {
    let [a, b] = loglogistic_initial_params(y)?;
    Ok([a, b, 1.0, 1.0])
}

/// Negative GB2 log-likelihood over precomputed `ln y`, penalized outside
/// the positive orthant.
pub fn gb2_nll(ly: &[f64], th: &[f64]) -> f64 {
    let (a, b, p, q) = (th[0], th[1], th[2], th[3]);
    if !(a > 0.0 && b > 0.0 && p > 0.0 && q > 0.0) {
        return PENALTY;
    }
    let lb = b.ln();
    let (mut sum_r, mut sum_sp) = (0.0, 0.0);
    for &l in ly {
        let r = l - lb;
        sum_r += r;
        sum_sp += softplus(a * r);
    }
    let n = ly.len() as f64;
    let ll = n * (a.ln() - lb - ln_beta_unchecked(p, q)) + (a * p - 1.0) * sum_r - (p + q) * sum_sp;
    if ll.is_finite() { -ll } else { PENALTY }
}

pub fn fit_gb2(xs: &[f64], threshold: f64) -> Result<FitResult> {
    let ly = shifted_logs(xs, threshold, 8)?;
    let y: Vec<f64> = ly.iter().map(|l| l.exp()).collect();
    let opts = NelderMeadOptions { max_restarts: 1, ..Default::default() };

    let mut runs: Vec<OptimResult> = Vec::with_capacity(GB2_PERTURBATIONS.len());
    let mut last_err = None;
    for factor in GB2_PERTURBATIONS {
        let perturbed: Vec<f64> = y.iter().map(|v| v * factor).collect();
        let start = match gb2_initial_params(&perturbed) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match nelder_mead(|th| gb2_nll(&ly, th), &start, &opts) {
            Ok(r) if r.converged => runs.push(r),
            Ok(r) => last_err = Some(Error::NoConvergence {
                family: SeverityFamily::Gb2,
                reason: format!("Nelder-Mead stopped after {} iterations", r.iterations),
            }),
            Err(e) => last_err = Some(e),
        }
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.fmin.total_cmp(&b.fmin))
        .ok_or_else(|| match last_err {
            Some(Error::NoConvergence { reason, .. }) => Error::NoConvergence {
                family: SeverityFamily::Gb2,
                reason: format!("no start converged ({reason})"),
            },
            Some(e) => e,
            None => Error::NoConvergence { family: SeverityFamily::Gb2, reason: "no start converged".into() },
        })?;
    let model = SeverityModel::gb2(best.argmin[0], best.argmin[1], best.argmin[2], best.argmin[3], threshold)?;
    let mut result = FitResult::new(model, xs, GB2_PERTURBATIONS.len());
    let worst = runs.iter().map(|r| r.fmin).fold(f64::NEG_INFINITY, f64::max);
    if worst - best.fmin > 1e-6 * best.fmin.abs().max(1.0) {
        result.warn(FitWarning::LocalMinimumRisk);
    }
    Ok(result)
}

/// `ln(x - T)` for every observation, rejecting points outside the shifted
/// support and samples smaller than `min_n`.
fn shifted_logs(xs: &[f64], threshold: f64, min_n: usize) -> Result<Vec<f64>> {
    if !(threshold >= 0.0) {
        return Err(Error::precondition(format!("threshold must be nonnegative, got {threshold}")));
    }
    if xs.len() < min_n {
        return Err(Error::degenerate(format!("need at least {min_n} observations, got {}", xs.len())));
    }
    xs.iter()
        .map(|&x| {
            let y = x - threshold;
            if y > 0.0 && y.is_finite() {
                Ok(y.ln())
            } else {
                Err(Error::degenerate(format!("observation {x} not above threshold {threshold}")))
            }
        })
        .collect()
}

/// Sample median, averaging the middle pair for even sizes.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
