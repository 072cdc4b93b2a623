//! Shared fixtures for the benchmarks.

use sevfit_core::rng::stream_rng;
use sevfit_core::{SeverityFamily, SeverityModel};

pub const THRESHOLD: f64 = 1e5;

/// Reference true model for each family.
pub fn reference_model(family: SeverityFamily) -> SeverityModel {
    let params: &[f64] = match family {
        SeverityFamily::Pareto => &[1.11],
        SeverityFamily::Weibull => &[0.56, 212_303.18],
        SeverityFamily::Lognormal => &[11.3, 1.8],
        SeverityFamily::LogLogistic => &[1.0, 84_000.0],
        SeverityFamily::Gb2 => &[0.837, 117_516.887, 1.184, 1.454],
    };
    SeverityModel::new(family, params.to_vec(), THRESHOLD).expect("reference parameters are valid")
}

/// A fixed sample of size `n` from the reference model.
pub fn reference_sample(family: SeverityFamily, n: usize) -> Vec<f64> {
    reference_model(family).sample(n, &mut stream_rng(2024, n as u64))
}
