use sevfit_core::mle::{fit_lognormal, fit_pareto, fit_weibull, median};
use sevfit_core::rng::{open_unit, stream_rng};
use sevfit_core::{fit, nelder_mead, FitWarning, NelderMeadOptions, SeverityFamily, SeverityModel};

const T: f64 = 1e5;

fn nll(model: &SeverityModel, params: &[f64], xs: &[f64]) -> f64 {
    match model.with_params(params.to_vec()) {
        Ok(m) => -m.log_likelihood(xs),
        Err(_) => 1e10,
    }
}

/// Nelder–Mead on the raw likelihood from a start perturbed by up to ±30%.
fn numerical_nll(truth: &SeverityModel, closed: &[f64], xs: &[f64], seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 99);
    let start: Vec<f64> = closed.iter().map(|v| v * (0.7 + 0.6 * open_unit(&mut rng))).collect();
    let opts = NelderMeadOptions { max_restarts: 2, ..Default::default() };
    let r = nelder_mead(|p| nll(truth, p, xs), &start, &opts).unwrap();
    assert!(r.converged);
    r.fmin
}

#[test]
fn numerical_optimum_matches_closed_forms() {
    let pareto = SeverityModel::pareto(1.11, T).unwrap();
    let lognormal = SeverityModel::lognormal(11.3, 1.8, T).unwrap();
    for seed in 0..50u64 {
        for truth in [&pareto, &lognormal] {
            let xs = truth.sample(200, &mut stream_rng(seed, 0));
            let closed = fit(truth.family(), &xs, T).unwrap();
            let numeric = numerical_nll(truth, closed.params(), &xs, seed);
            assert!(
                (numeric - closed.nll).abs() <= 1e-6,
                "{} seed {seed}: closed {} numeric {numeric}",
                truth.family(),
                closed.nll
            );
        }
    }
}

#[test]
fn closed_form_examples() {
    let e = std::f64::consts::E;
    for t in [1.0, 1e5] {
        assert_eq!(fit_pareto(&[t * e; 3], t).unwrap().params(), &[1.0]);
        assert!((fit_pareto(&[t * e * e; 2], t).unwrap().params()[0] - 0.5).abs() < 1e-15);
    }
    let xs = [2.0, 3.5, 10.0, 41.0];
    let a = fit_pareto(&xs, 1.5).unwrap().params()[0];
    let b = fit_pareto(&xs.map(|x| 7.0 * x), 10.5).unwrap().params()[0];
    assert!((a - b).abs() < 1e-14);
    let ln = fit_lognormal(&[T + e, T + e.powi(3)], T).unwrap();
    assert!((ln.params()[0] - 2.0).abs() < 1e-9 && (ln.params()[1] - 1.0).abs() < 1e-9);
}

fn median_params(model: &SeverityModel, n: usize, reps: u64) -> Vec<f64> {
    let k = model.family().param_count();
    let fits: Vec<Vec<f64>> = (0..reps)
        .map(|i| fit(model.family(), &model.sample(n, &mut stream_rng(77, i)), model.threshold()).unwrap().model.params().to_vec())
        .collect();
    (0..k).map(|j| median(&fits.iter().map(|f| f[j]).collect::<Vec<_>>())).collect()
}

#[test]
fn consistency_sweep_at_ten_thousand() {
    let models = [
        SeverityModel::pareto(1.11, T).unwrap(),
        SeverityModel::weibull(2.0, 2e5, T).unwrap(),
        SeverityModel::lognormal(11.3, 1.8, T).unwrap(),
        SeverityModel::loglogistic(1.0, 84_000.0, T).unwrap(),
        SeverityModel::gb2(0.837, 117_516.887, 1.184, 1.454, T).unwrap(),
    ];
    for model in &models {
        let med = median_params(model, 10_000, 200);
        for (j, (m, t)) in med.iter().zip(model.params()).enumerate() {
            assert!((m / t - 1.0).abs() <= 0.02, "{} param {j}: median {m} truth {t}", model.family());
        }
    }
    let heavy = SeverityModel::weibull(0.56, 212_303.18, T).unwrap();
    let med = median_params(&heavy, 10_000, 200);
    assert!((med[0] / 0.56 - 1.0).abs() <= 0.15, "{med:?}");
}

#[test]
fn subexponential_weibull_fits_always_warn() {
    let model = SeverityModel::weibull(0.56, 212_303.18, T).unwrap();
    for (i, n) in [100usize, 2500].into_iter().cycle().take(40).enumerate() {
        let r = fit_weibull(&model.sample(n, &mut stream_rng(31, i as u64)), T).unwrap();
        assert!(r.params()[0] <= 1.0);
        assert!(r.has_warning(FitWarning::WeibullInconsistent));
    }
    let regular = SeverityModel::weibull(2.0, 2e5, T).unwrap();
    let r = fit_weibull(&regular.sample(1000, &mut stream_rng(32, 0)), T).unwrap();
    assert!(!r.has_warning(FitWarning::WeibullInconsistent));
}

#[test]
fn loglogistic_fit_recovers_truth_within_fisher_errors() {
    let model = SeverityModel::loglogistic(1.0, 84_000.0, T).unwrap();
    let n = 10_000;
    let r = fit(SeverityFamily::LogLogistic, &model.sample(n, &mut stream_rng(12, 0)), T).unwrap();
    let cov = sevfit_core::asymptotic_covariance(&model, n).unwrap();
    for j in 0..2 {
        let se = cov.get(j, j).sqrt();
        assert!((r.params()[j] - model.params()[j]).abs() <= 3.0 * se, "param {j}: {:?}", r.params());
    }
}

#[test]
fn degenerate_inputs() {
    for family in SeverityFamily::ALL {
        assert!(fit(family, &[], T).is_err());
    }
    assert!(fit(SeverityFamily::Lognormal, &[T, T + 5.0, T + 9.0], T).is_err());
    assert!(fit(SeverityFamily::Lognormal, &[T + 3.0; 5], T).is_err());
}
