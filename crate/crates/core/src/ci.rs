//! Normal-approximation interval widths against bootstrap quantile widths.
//!
//! Percent error is signed: `100 (bootstrap − normal) / bootstrap`, so a
//! positive value means the normal interval is too narrow.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapMatrix;
use crate::error::{Error, Result};
use crate::family::{SeverityFamily, SeverityModel};
use crate::fisher::asymptotic_covariance;
use crate::special::std_normal_quantile;

pub const DEFAULT_LEVEL: f64 = 0.95;
/// Smallest matrix for which quantile widths are computed.
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiErrorRow {
    pub family: SeverityFamily,
    pub param_name: String,
    pub param_index: usize,
    pub n: usize,
    pub level: f64,
    pub boot_width: f64,
    pub normal_width: f64,
    pub percent_error: f64,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::precondition(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

/// `2 z_{(1+level)/2} √((I⁻¹)ⱼⱼ / n)`.
pub fn normal_ci_width(model: &SeverityModel, n: usize, j: usize, level: f64) -> Result<f64> {
    check_level(level)?;
    let k = model.family().param_count();
    if j >= k {
        return Err(Error::precondition(format!("parameter index {j} out of range for {}", model.family())));
    }
    let cov = asymptotic_covariance(model, n)?;
    let z = std_normal_quantile(0.5 * (1.0 + level))?;
    Ok(2.0 * z * cov.get(j, j).sqrt())
}

/// Quantile with linear interpolation between order statistics at position
/// `h = (m − 1) u + 1` (1-based). `sorted` must be ascending.
pub fn empirical_quantile(sorted: &[f64], u: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::precondition("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::precondition(format!("quantile level must lie in [0, 1], got {u}")));
    }
    let h = (sorted.len() - 1) as f64 * u;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Width between the `(1−level)/2` and `(1+level)/2` column quantiles.
pub fn bootstrap_ci_width(bm: &BootstrapMatrix, j: usize, level: f64) -> Result<f64> {
    check_level(level)?;
    if bm.m_converged < MIN_REPLICATIONS {
        return Err(Error::precondition(format!(
            "bootstrap interval needs at least {MIN_REPLICATIONS} replications, got {}",
            bm.m_converged
        )));
    }
    if j >= bm.dim() {
        return Err(Error::precondition(format!("parameter index {j} out of range for {}", bm.family)));
    }
    let mut col = bm.column(j);
    col.sort_by(f64::total_cmp);
    column_width(&col, level)
}

fn column_width(sorted: &[f64], level: f64) -> Result<f64> {
    let lo = empirical_quantile(sorted, 0.5 * (1.0 - level))?;
    let hi = empirical_quantile(sorted, 0.5 * (1.0 + level))?;
    Ok(hi - lo)
}

pub fn percent_error(boot_width: f64, normal_width: f64) -> f64 {
    100.0 * (boot_width - normal_width) / boot_width
}

/// One row per (family, parameter, n), in input order.
pub fn ci_error_table(bms: &[BootstrapMatrix], level: f64) -> Result<Vec<CiErrorRow>> {
    let mut rows = Vec::new();
    for bm in bms {
        let model = bm.true_model()?;
        for (j, name) in bm.param_names().iter().enumerate() {
            let boot_width = bootstrap_ci_width(bm, j, level)?;
            if !(boot_width > 0.0) {
                return Err(Error::degenerate(format!(
                    "{} {name} at n = {} has a zero-width bootstrap interval",
                    bm.family, bm.n
                )));
            }
            let normal_width = normal_ci_width(&model, bm.n, j, level)?;
            rows.push(CiErrorRow {
                family: bm.family,
                param_name: name.to_string(),
                param_index: j,
                n: bm.n,
                level,
                boot_width,
                normal_width,
                percent_error: percent_error(boot_width, normal_width),
            });
        }
    }
    Ok(rows)
}

/// Wide table: a row per (family, parameter), a column per n, cells rounded
/// to whole percent. Missing combinations are left empty.
pub fn write_ci_table_csv<W: Write>(mut w: W, rows: &[CiErrorRow]) -> Result<()> {
    let sizes: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    let mut cells: BTreeMap<(SeverityFamily, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.family, r.param_index)).or_default().insert(r.n, r.percent_error);
    }
    let header: Vec<String> = sizes.iter().map(usize::to_string).collect();
    writeln!(w, "family,param,{}", header.join(","))?;
    for ((family, j), by_n) in &cells {
        let row: Vec<String> =
            sizes.iter().map(|n| by_n.get(n).map_or(String::new(), |e| format!("{}", e.round() as i64))).collect();
        writeln!(w, "{},{},{}", family.key(), family.param_names()[*j], row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CiReport<'a> {
    sign_convention: &'static str,
    rows: &'a [CiErrorRow],
}

/// Full-precision JSON with the sign convention recorded alongside.
pub fn write_ci_json<W: Write>(w: W, rows: &[CiErrorRow]) -> Result<()> {
    let report = CiReport { sign_convention: "percent_error = 100 * (boot_width - normal_width) / boot_width", rows };
    serde_json::to_writer_pretty(w, &report)?;
    Ok(())
}
