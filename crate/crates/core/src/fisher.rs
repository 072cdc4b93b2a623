//! Analytic Fisher information, the asymptotic covariance `I(θ)⁻¹ / n`, and
//! a Monte-Carlo score estimate used to validate the analytic matrices.
//!
//! The threshold never enters: shifting the support by a known constant
//! leaves the score unchanged.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{log_pdf_raw, SeverityFamily, SeverityModel};
use crate::linalg::{cholesky, cholesky_inverse};
use crate::special::{digamma_unchecked as psi, trigamma_unchecked as psi1};

/// Minimum number of draws accepted by [`mc_score_information`].
pub const MC_MIN_DRAWS: usize = 100_000;

/// A symmetric `dim × dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl InfoMatrix {
    pub fn from_rows(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(Error::precondition(format!("{dim}x{dim} matrix needs {} entries", dim * dim)));
        }
        Ok(InfoMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_positive_definite(&self) -> bool {
        cholesky(&self.entries, self.dim).is_some()
    }

    /// Inverse via Cholesky; fails when the matrix is not positive definite.
    pub fn inverse(&self) -> Result<InfoMatrix> {
        let l = cholesky(&self.entries, self.dim).ok_or(Error::SingularInformation)?;
        Ok(InfoMatrix { dim: self.dim, entries: cholesky_inverse(&l, self.dim) })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F / ‖other‖_F`.
    pub fn relative_frobenius_error(&self, other: &InfoMatrix) -> f64 {
        let diff: f64 = self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b) * (a - b)).sum();
        diff.sqrt() / other.frobenius_norm()
    }

    fn symmetric(dim: usize, upper: &[(usize, usize, f64)]) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for &(i, j, v) in upper {
            entries[i * dim + j] = v;
            entries[j * dim + i] = v;
        }
        InfoMatrix { dim, entries }
    }
}

/// Per-observation Fisher information of `model`'s family at its parameters.
pub fn fisher_information(model: &SeverityModel) -> Result<InfoMatrix> {
    let p = model.params();
    Ok(match model.family() {
        SeverityFamily::Pareto => InfoMatrix::symmetric(1, &[(0, 0, 1.0 / (p[0] * p[0]))]),
        SeverityFamily::Weibull => {
            let (a, b) = (p[0], p[1]);
            let g2 = psi(2.0);
            InfoMatrix::symmetric(
                2,
                &[
                    (0, 0, (psi1(1.0) + g2 * g2) / (a * a)),
                    (0, 1, -(1.0 + psi(1.0)) / b),
                    (1, 1, (a * a) / (b * b)),
                ],
            )
        }
        SeverityFamily::Lognormal => {
            let s2 = p[1] * p[1];
            InfoMatrix::symmetric(2, &[(0, 0, 1.0 / s2), (1, 1, 2.0 / s2)])
        }
        SeverityFamily::LogLogistic => {
            let (a, s) = (p[0], p[1]);
            InfoMatrix::symmetric(2, &[(0, 0, (3.0 + PI * PI) / (9.0 * a * a)), (1, 1, (a / s).powi(2) / 3.0)])
        }
        SeverityFamily::Gb2 => gb2_information(p[0], p[1], p[2], p[3]),
    })
}

/// GB2(a, b, p, q) information, derived from the density through
/// `u = z/(1+z) ~ Beta(p, q)` with `z = (y/b)^a`.
fn gb2_information(a: f64, b: f64, p: f64, q: f64) -> InfoMatrix {
    let s = p + q;
    let d = psi(p) - psi(q);
    let d1 = psi(p + 1.0) - psi(q + 1.0);
    let i_aa = (1.0 + p * q / (s + 1.0) * (d1 * d1 + psi1(p + 1.0) + psi1(q + 1.0))) / (a * a);
    let i_ab = -(p * q * d + q - p) / (b * (s + 1.0));
    let i_ap = -(q * d - 1.0) / (a * s);
    let i_aq = (p * d + 1.0) / (a * s);
    let i_bb = a * a * p * q / (b * b * (s + 1.0));
    let i_bp = a * q / (b * s);
    let i_bq = -a * p / (b * s);
    let i_pp = psi1(p) - psi1(s);
    let i_pq = -psi1(s);
    let i_qq = psi1(q) - psi1(s);
    InfoMatrix::symmetric(
        4,
        &[
            (0, 0, i_aa),
            (0, 1, i_ab),
            (0, 2, i_ap),
            (0, 3, i_aq),
            (1, 1, i_bb),
            (1, 2, i_bp),
            (1, 3, i_bq),
            (2, 2, i_pp),
            (2, 3, i_pq),
            (3, 3, i_qq),
        ],
    )
}

/// `I(θ)⁻¹ / n`, the covariance of the MLE predicted by asymptotic normality.
pub fn asymptotic_covariance(model: &SeverityModel, n: usize) -> Result<InfoMatrix> {
    if n == 0 {
        return Err(Error::precondition("sample size must be positive"));
    }
    let inv = fisher_information(model)?.inverse()?;
    let n = n as f64;
    Ok(InfoMatrix { dim: inv.dim, entries: inv.entries.iter().map(|v| v / n).collect() })
}

/// Averages the outer product of finite-difference score vectors over
/// `draws` samples from `model`.
pub fn mc_score_information<R: Rng + ?Sized>(model: &SeverityModel, draws: usize, rng: &mut R) -> Result<InfoMatrix> {
    if draws < MC_MIN_DRAWS {
        return Err(Error::precondition(format!("need at least {MC_MIN_DRAWS} draws, got {draws}")));
    }
    let family = model.family();
    let t = model.threshold();
    let theta = model.params();
    let k = theta.len();
    let steps: Vec<f64> = theta.iter().map(|v| 1e-5 * v.abs().max(1.0)).collect();
    let mut acc = vec![0.0; k * k];
    let mut score = vec![0.0; k];
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    for _ in 0..draws {
        let x = model.draw(rng);
        for j in 0..k {
            plus[j] = theta[j] + steps[j];
            minus[j] = theta[j] - steps[j];
            score[j] = (log_pdf_raw(family, &plus, t, x) - log_pdf_raw(family, &minus, t, x)) / (2.0 * steps[j]);
            plus[j] = theta[j];
            minus[j] = theta[j];
        }
        for i in 0..k {
            for j in 0..=i {
                acc[i * k + j] += score[i] * score[j];
            }
        }
    }
    let mut entries = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let v = acc[i * k + j] / draws as f64;
            entries[i * k + j] = v;
            entries[j * k + i] = v;
        }
    }
    Ok(InfoMatrix { dim: k, entries })
}
