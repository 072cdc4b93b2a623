//! Normality tests on bootstrap output: Anderson–Darling for one-parameter
//! columns and Mardia skewness/kurtosis for multivariate rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapMatrix;
use crate::error::{Error, Result};
use crate::family::SeverityFamily;
use crate::linalg::{cholesky, forward_substitute, CompensatedSum};
use crate::special::{gamma_q_unchecked, std_normal_cdf};

/// p-values below this are reported as exactly zero.
pub const P_VALUE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalityTest {
    AndersonDarling,
    MardiaSkew,
    MardiaKurtosis,
}

impl NormalityTest {
    pub fn key(self) -> &'static str {
        match self {
            NormalityTest::AndersonDarling => "anderson_darling",
            NormalityTest::MardiaSkew => "mardia_skew",
            NormalityTest::MardiaKurtosis => "mardia_kurtosis",
        }
    }
}

impl fmt::Display for NormalityTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    /// Unset when the test ran on raw data rather than a bootstrap matrix.
    pub family: Option<SeverityFamily>,
    pub n: Option<usize>,
    pub test: NormalityTest,
    /// A² for Anderson–Darling, m·b₁/6 for skewness, the z-score for kurtosis.
    pub statistic: f64,
    pub p_value: f64,
    pub m_used: usize,
}

impl NormalityReport {
    fn new(test: NormalityTest, statistic: f64, p_value: f64, m_used: usize) -> Self {
        let p = p_value.clamp(0.0, 1.0);
        let p_value = if p < P_VALUE_FLOOR { 0.0 } else { p };
        NormalityReport { family: None, n: None, test, statistic, p_value, m_used }
    }

    fn tagged(mut self, family: SeverityFamily, n: usize) -> Self {
        self.family = Some(family);
        self.n = Some(n);
        self
    }
}

/// Anderson–Darling test of normality with mean and variance estimated.
pub fn anderson_darling_normal(xs: &[f64]) -> Result<NormalityReport> {
    let m = xs.len();
    if m < 8 {
        return Err(Error::precondition(format!("Anderson-Darling needs m >= 8, got {m}")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("Anderson-Darling sample contains a non-finite value"));
    }
    let mf = m as f64;
    let mean = xs.iter().sum::<f64>() / mf;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (mf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::degenerate("Anderson-Darling sample is constant"));
    }
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);

    let mut acc = CompensatedSum::default();
    for i in 0..m {
        let w = (2 * i + 1) as f64;
        acc.add(w * (ln_std_normal_cdf(z[i]) + ln_std_normal_cdf(-z[m - 1 - i])));
    }
    let a2 = -mf - acc.value() / mf;
    let a2_star = a2 * (1.0 + 0.75 / mf + 2.25 / (mf * mf));
    Ok(NormalityReport::new(NormalityTest::AndersonDarling, a2, ad_p_value(a2_star), m))
}

/// Upper-tail p-value of the small-sample-adjusted statistic A*².
pub fn ad_p_value(a2_star: f64) -> f64 {
    let a = a2_star;
    let p = if a < 0.2 {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    } else if a < 0.34 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else if a < 0.6 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a < 153.467 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else {
        // The last piece turns upward past its minimum.
        0.0
    };
    p.clamp(0.0, 1.0)
}

/// `ln Φ(z)` that stays finite far into the lower tail.
fn ln_std_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        std_normal_cdf(z).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Mardia's sample skewness b₁ and kurtosis b₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MardiaMoments {
    pub b1: f64,
    pub b2: f64,
    pub m: usize,
    pub k: usize,
}

/// b₁ = (1/m²)ΣᵢΣⱼ gᵢⱼ³ and b₂ = (1/m)Σᵢ gᵢᵢ² with gᵢⱼ the Mahalanobis inner
/// products under the divisor-m covariance.
///
/// Rows are whitened by the Cholesky factor of S, so gᵢⱼ = wᵢ·wⱼ and the
/// double sum collapses to Σ_abc M_abc² with M_abc = (1/m)Σᵢ wᵢₐwᵢ_b wᵢ_c.
/// Cost is O(m·k³) rather than O(m²·k).
pub fn mardia_moments(rows: &[Vec<f64>]) -> Result<MardiaMoments> {
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(Error::precondition("Mardia needs at least two columns"));
    }
    if m <= k + 1 {
        return Err(Error::precondition(format!("Mardia needs m > k + 1, got m = {m}, k = {k}")));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::precondition("Mardia rows have unequal lengths"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::domain("Mardia sample contains a non-finite value"));
    }
    let mf = m as f64;

    let mut mean = vec![0.0; k];
    for (j, mu) in mean.iter_mut().enumerate() {
        let mut s = CompensatedSum::default();
        rows.iter().for_each(|r| s.add(r[j]));
        *mu = s.value() / mf;
    }
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, mu)| x - mu).collect()).collect();

    let mut cov = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..=a {
            let mut s = CompensatedSum::default();
            centered.iter().for_each(|d| s.add(d[a] * d[b]));
            cov[a * k + b] = s.value() / mf;
            cov[b * k + a] = cov[a * k + b];
        }
    }
    let l = cholesky(&cov, k).ok_or(Error::SingularCovariance)?;

    let mut w = centered;
    for d in w.iter_mut() {
        forward_substitute(&l, k, d);
    }

    let mut b2 = CompensatedSum::default();
    for wi in &w {
        let g: f64 = wi.iter().map(|x| x * x).sum();
        b2.add(g * g);
    }

    let mut b1 = 0.0;
    for a in 0..k {
        for b in a..k {
            for c in b..k {
                let mut s = CompensatedSum::default();
                w.iter().for_each(|wi| s.add(wi[a] * wi[b] * wi[c]));
                let mabc = s.value() / mf;
                b1 += permutations(a, b, c) * mabc * mabc;
            }
        }
    }
    Ok(MardiaMoments { b1, b2: b2.value() / mf, m, k })
}

/// Number of distinct orderings of the index triple `a <= b <= c`.
fn permutations(a: usize, b: usize, c: usize) -> f64 {
    match (a == b, b == c) {
        (true, true) => 1.0,
        (false, false) => 6.0,
        _ => 3.0,
    }
}

/// Mardia skewness and kurtosis tests.
pub fn mardia(rows: &[Vec<f64>]) -> Result<(NormalityReport, NormalityReport)> {
    let MardiaMoments { b1, b2, m, k } = mardia_moments(rows)?;
    let (mf, kf) = (m as f64, k as f64);

    let df = kf * (kf + 1.0) * (kf + 2.0) / 6.0;
    let skew_stat = (mf * b1 / 6.0).max(0.0);
    let skew_p = gamma_q_unchecked(skew_stat / 2.0, df / 2.0);

    let expected = kf * (kf + 2.0);
    let z = (b2 - expected) / (8.0 * expected / mf).sqrt();
    let kurt_p = 2.0 * std_normal_cdf(-z.abs());

    Ok((
        NormalityReport::new(NormalityTest::MardiaSkew, skew_stat, skew_p, m),
        NormalityReport::new(NormalityTest::MardiaKurtosis, z, kurt_p, m),
    ))
}

/// Anderson–Darling on a one-parameter matrix, Mardia otherwise.
pub fn normality_suite(bm: &BootstrapMatrix) -> Result<Vec<NormalityReport>> {
    if bm.dim() == 1 {
        let ad = anderson_darling_normal(&bm.column(0))?;
        Ok(vec![ad.tagged(bm.family, bm.n)])
    } else {
        let (skew, kurt) = mardia(&bm.rows)?;
        Ok(vec![skew.tagged(bm.family, bm.n), kurt.tagged(bm.family, bm.n)])
    }
}

/// Long-format CSV: `family,n,test,statistic,p_value,m_used`.
pub fn write_reports_csv<W: Write>(mut w: W, reports: &[NormalityReport]) -> Result<()> {
    writeln!(w, "family,n,test,statistic,p_value,m_used")?;
    for r in reports {
        let family = r.family.map_or(String::new(), |f| f.key().to_string());
        let n = r.n.map_or(String::new(), |n| n.to_string());
        writeln!(w, "{family},{n},{},{:?},{:?},{}", r.test, r.statistic, r.p_value, r.m_used)?;
    }
    Ok(())
}

/// Wide p-value table for one test: a row per family, a column per n.
/// Cells for combinations that were not run are left empty.
pub fn write_p_value_table<W: Write>(mut w: W, reports: &[NormalityReport], test: NormalityTest) -> Result<()> {
    let mut sizes = BTreeSet::new();
    let mut cells: BTreeMap<SeverityFamily, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.test == test) {
        if let (Some(family), Some(n)) = (r.family, r.n) {
            sizes.insert(n);
            cells.entry(family).or_default().insert(n, r.p_value);
        }
    }
    let header: Vec<String> = sizes.iter().map(usize::to_string).collect();
    writeln!(w, "family,{}", header.join(","))?;
    for (family, by_n) in &cells {
        let row: Vec<String> = sizes.iter().map(|n| by_n.get(n).map_or(String::new(), |p| format!("{p:?}"))).collect();
        writeln!(w, "{},{}", family.key(), row.join(","))?;
    }
    Ok(())
}
