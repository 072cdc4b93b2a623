//! Gaussian kernel density estimates of bootstrap columns, overlaid with the
//! asymptotic normal density centred at the true parameter.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapMatrix;
use crate::ci::{empirical_quantile, MIN_REPLICATIONS};
use crate::error::{Error, Result};
use crate::family::SeverityFamily;
use crate::fisher::asymptotic_covariance;
use crate::special::std_normal_pdf;

pub const GRID_POINTS: usize = 512;
/// Half-width of the normal part of the grid, in standard deviations.
pub const GRID_SD_SPAN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOverlay {
    pub family: SeverityFamily,
    pub param_name: String,
    pub n: usize,
    pub grid: Vec<f64>,
    pub kde: Vec<f64>,
    pub normal_pdf: Vec<f64>,
    pub bandwidth: f64,
    /// Mean and standard deviation of the normal curve.
    pub normal_mean: f64,
    pub normal_sd: f64,
}

impl DensityOverlay {
    pub fn file_name(&self) -> String {
        format!("overlay_{}_{}_{}.csv", self.family.key(), self.param_name, self.n)
    }

    /// Largest pointwise gap between the two curves.
    pub fn max_abs_difference(&self) -> f64 {
        self.kde.iter().zip(&self.normal_pdf).map(|(k, p)| (k - p).abs()).fold(0.0, f64::max)
    }

    pub fn max_normal_pdf(&self) -> f64 {
        self.normal_pdf.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoid integral of the kde over the grid.
    pub fn kde_mass(&self) -> f64 {
        trapezoid(&self.grid, &self.kde)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "grid,kde,normal_pdf")?;
        for ((g, k), p) in self.grid.iter().zip(&self.kde).zip(&self.normal_pdf) {
            writeln!(w, "{g:?},{k:?},{p:?}")?;
        }
        Ok(())
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// `0.9 min(sd, IQR/1.34) m^(−1/5)`, falling back to the sd when the IQR is 0.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::precondition(format!("bandwidth needs at least 2 points, got {}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("kde sample contains a non-finite value"));
    }
    let (_, sd) = mean_sd(xs);
    if !(sd > 0.0) {
        return Err(Error::degenerate("kde sample is constant"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = empirical_quantile(&sorted, 0.75)? - empirical_quantile(&sorted, 0.25)?;
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (xs.len() as f64).powf(-0.2))
}

/// Gaussian kde with Silverman bandwidth evaluated on `grid`; returns the
/// densities and the bandwidth.
pub fn kde(xs: &[f64], grid: &[f64]) -> Result<(Vec<f64>, f64)> {
    let h = silverman_bandwidth(xs)?;
    let norm = 1.0 / (xs.len() as f64 * h);
    let dens = grid.iter().map(|&g| norm * xs.iter().map(|&x| std_normal_pdf((g - x) / h)).sum::<f64>()).collect();
    Ok((dens, h))
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
}

/// Kde of column `j` against N(θ*ⱼ, (I⁻¹)ⱼⱼ / n).
pub fn overlay(bm: &BootstrapMatrix, j: usize) -> Result<DensityOverlay> {
    if bm.m_converged < MIN_REPLICATIONS {
        return Err(Error::precondition(format!(
            "overlay needs at least {MIN_REPLICATIONS} replications, got {}",
            bm.m_converged
        )));
    }
    if j >= bm.dim() {
        return Err(Error::precondition(format!("parameter index {j} out of range for {}", bm.family)));
    }
    let model = bm.true_model()?;
    let cov = asymptotic_covariance(&model, bm.n)?;
    let (mu, sd) = (bm.true_params[j], cov.get(j, j).sqrt());

    let col = bm.column(j);
    let cmin = col.iter().copied().fold(f64::INFINITY, f64::min);
    let cmax = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid = uniform_grid(cmin.min(mu - GRID_SD_SPAN * sd), cmax.max(mu + GRID_SD_SPAN * sd), GRID_POINTS);
    let (kde, bandwidth) = kde(&col, &grid)?;
    let normal_pdf = grid.iter().map(|&g| std_normal_pdf((g - mu) / sd) / sd).collect();
    Ok(DensityOverlay {
        family: bm.family,
        param_name: bm.param_names()[j].to_string(),
        n: bm.n,
        grid,
        kde,
        normal_pdf,
        bandwidth,
        normal_mean: mu,
        normal_sd: sd,
    })
}

/// One overlay per parameter of `bm`.
pub fn overlays(bm: &BootstrapMatrix) -> Result<Vec<DensityOverlay>> {
    (0..bm.dim()).map(|j| overlay(bm, j)).collect()
}
