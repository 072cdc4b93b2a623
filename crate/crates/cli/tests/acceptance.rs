//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting so that honest misses do not hide the rest of
//! the workspace tests; set `SEVFIT_ACCEPTANCE_STRICT=1` to exit 1 on any
//! failure. `SEVFIT_ACCEPTANCE_ONLY=3,7` runs a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use sevfit_cli::commands::{cmd_bootstrap, cmd_cierror, cmd_normality, cmd_overlays};
use sevfit_cli::config::{StudyConfig, TruthSource};
use sevfit_core::normality::mardia_moments;
use sevfit_core::rng::{open_unit, std_normal, stream_rng};
use sevfit_core::{
    fisher_information, fit, mc_score_information, nelder_mead, CiErrorRow, FitWarning, NelderMeadOptions,
    NormalityReport, NormalityTest, SeverityFamily, SeverityModel,
};

const T: f64 = 1e5;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, checks: Vec<(bool, String)>) -> Outcome {
    let pass = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .iter()
        .map(|(ok, d)| if *ok { d.clone() } else { format!("[miss] {d}") })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { id, pass, detail }
}

fn reference_model(family: SeverityFamily) -> SeverityModel {
    let params = sevfit_cli::commands::reference_params(family).to_vec();
    SeverityModel::new(family, params, T).unwrap()
}

fn c1_fisher() -> Outcome {
    let cases = [
        (SeverityModel::pareto(1.11, T).unwrap(), 0.02),
        (SeverityModel::lognormal(11.3, 1.8, T).unwrap(), 0.02),
        (SeverityModel::loglogistic(1.0, 84_000.0, T).unwrap(), 0.02),
        (SeverityModel::weibull(2.0, 2e5, T).unwrap(), 0.05),
        (SeverityModel::gb2(1.0, 1.0, 1.0, 1.0, 0.0).unwrap(), 0.05),
    ];
    let checks = cases
        .iter()
        .enumerate()
        .map(|(i, (model, tol))| {
            let analytic = fisher_information(model).unwrap();
            let mc = mc_score_information(model, 200_000, &mut stream_rng(1000 + i as u64, 0)).unwrap();
            let err = mc.relative_frobenius_error(&analytic);
            (err <= *tol, format!("{} {:.4} <= {tol}", model.family().key(), err))
        })
        .collect();
    outcome("C1 Fisher information vs Monte Carlo score outer product", checks)
}

fn c2_closed_form() -> Outcome {
    let opts = NelderMeadOptions { max_restarts: 2, ..Default::default() };
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in 0..50u64 {
        for truth in [SeverityModel::pareto(1.11, T).unwrap(), SeverityModel::lognormal(11.3, 1.8, T).unwrap()] {
            let xs = truth.sample(200, &mut stream_rng(seed, 7));
            let closed = fit(truth.family(), &xs, T).unwrap();
            let mut rng = stream_rng(seed, 8);
            let start: Vec<f64> = closed.params().iter().map(|v| v * (0.7 + 0.6 * open_unit(&mut rng))).collect();
            let nll = |p: &[f64]| truth.with_params(p.to_vec()).map_or(1e10, |m| -m.log_likelihood(&xs));
            let r = nelder_mead(nll, &start, &opts).unwrap();
            let gap = if r.converged { (r.fmin - closed.nll).abs() } else { f64::INFINITY };
            let w = worst.entry(truth.family().key()).or_insert(0.0);
            *w = w.max(gap);
        }
    }
    let checks = worst.iter().map(|(k, g)| (*g <= 1e-6, format!("{k} worst |nll gap| {g:.2e} <= 1e-6"))).collect();
    outcome("C2 Nelder-Mead reaches closed-form optimum on 50 + 50 samples", checks)
}

/// Desk-scale pipeline outputs shared by criteria 3, 4, 5 and 9.
struct Desk {
    rows: Vec<CiErrorRow>,
    reports: Vec<NormalityReport>,
    overlay_dir: PathBuf,
    elapsed: Duration,
}

fn desk_config(dir: &Path, families: Vec<SeverityFamily>) -> StudyConfig {
    StudyConfig {
        families,
        replications: 2000,
        truth: TruthSource::Reference,
        output: dir.to_path_buf(),
        ..StudyConfig::default()
    }
}

fn run_pipeline(cfg: &StudyConfig) -> Result<(Vec<CiErrorRow>, Vec<NormalityReport>), String> {
    cmd_bootstrap(cfg, |bm| eprintln!("  bootstrap {} n = {} ({}/{})", bm.family, bm.n, bm.m_converged, bm.m_requested))
        .map_err(|e| e.message)?;
    let reports = cmd_normality(cfg).map_err(|e| e.message)?;
    let rows = cmd_cierror(cfg).map_err(|e| e.message)?;
    cmd_overlays(cfg).map_err(|e| e.message)?;
    Ok((rows, reports))
}

fn desk(dir: &Path) -> Result<Desk, String> {
    let cfg = desk_config(dir, SeverityFamily::ALL.to_vec());
    let start = Instant::now();
    let (rows, reports) = run_pipeline(&cfg)?;
    Ok(Desk { rows, reports, overlay_dir: dir.join("overlays"), elapsed: start.elapsed() })
}

fn ci_error(d: &Desk, family: SeverityFamily, param: &str, n: usize) -> f64 {
    d.rows
        .iter()
        .find(|r| r.family == family && r.param_name == param && r.n == n)
        .map_or(f64::NAN, |r| r.percent_error)
}

fn c3_table3(d: &Desk) -> Outcome {
    use SeverityFamily::*;
    let mut checks = Vec::new();
    for family in [Pareto, Lognormal, LogLogistic] {
        for param in family.param_names() {
            for n in [100, 2500] {
                let e = ci_error(d, family, param, n);
                checks.push((e.abs() <= 4.0, format!("{} {param} n={n} {e:+.1}%", family.key())));
            }
        }
    }
    let e = ci_error(d, Gb2, "shape1", 100);
    checks.push((e >= 30.0, format!("gb2 shape1 n=100 {e:+.1}% >= 30")));
    for param in Gb2.param_names() {
        let e = ci_error(d, Gb2, param, 2500);
        checks.push((e.abs() <= 15.0, format!("gb2 {param} n=2500 {e:+.1}% within 15")));
    }
    let (lo, hi) = (ci_error(d, Weibull, "scale", 100), ci_error(d, Weibull, "scale", 2500));
    checks.push((hi > lo, format!("weibull scale {lo:+.1}% (n=100) -> {hi:+.1}% (n=2500) increases")));
    outcome("C3 interval-width error table at n = 100 and 2500", checks)
}

fn p_value(d: &Desk, family: SeverityFamily, test: NormalityTest, n: usize) -> f64 {
    d.reports
        .iter()
        .find(|r| r.family == Some(family) && r.test == test && r.n == Some(n))
        .map_or(f64::NAN, |r| r.p_value)
}

fn c4_normality(d: &Desk) -> Outcome {
    let mut checks = Vec::new();
    for n in [100, 1000, 2500] {
        let p = p_value(d, SeverityFamily::Lognormal, NormalityTest::MardiaKurtosis, n);
        checks.push((p > 0.01, format!("lognormal kurtosis n={n} p={p:.3} > 0.01")));
    }
    let p = p_value(d, SeverityFamily::Weibull, NormalityTest::MardiaKurtosis, 100);
    checks.push((p < 0.01, format!("weibull kurtosis n=100 p={p:.3} < 0.01")));
    let p = p_value(d, SeverityFamily::Pareto, NormalityTest::AndersonDarling, 100);
    checks.push((p < 0.01, format!("pareto AD n=100 p={p:.2e} < 0.01")));
    outcome("C4 normality p-values at fixed seed", checks)
}

/// Max |kde − normal| and max normal density of an overlay CSV.
fn overlay_discrepancy(path: &Path) -> Result<(f64, f64), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut diff, mut peak) = (0.0f64, 0.0f64);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap_or(f64::NAN)).collect();
        diff = diff.max((v[1] - v[2]).abs());
        peak = peak.max(v[2]);
    }
    Ok((diff, peak))
}

fn c5_weibull(d: &Desk) -> Outcome {
    let model = reference_model(SeverityFamily::Weibull);
    let mut fits = 0;
    let mut warned = 0;
    for (i, &n) in sevfit_cli::config::DEFAULT_SAMPLE_SIZES.iter().enumerate() {
        for r in 0..50u64 {
            let xs = model.sample(n, &mut stream_rng(5000 + i as u64, r));
            if let Ok(f) = fit(SeverityFamily::Weibull, &xs, T) {
                fits += 1;
                warned += usize::from(f.has_warning(FitWarning::WeibullInconsistent));
            }
        }
    }
    let mut checks = vec![(fits == 350 && warned == fits, format!("{warned}/{fits} of 350 fits warn"))];
    for param in SeverityFamily::Weibull.param_names() {
        let path = d.overlay_dir.join(format!("overlay_weibull_{param}_2500.csv"));
        match overlay_discrepancy(&path) {
            Ok((diff, peak)) => checks.push((
                diff > 0.2 * peak,
                format!("{param} n=2500 max|kde-normal| = {:.3} x max normal > 0.2", diff / peak),
            )),
            Err(e) => checks.push((false, e)),
        }
    }
    outcome("C5 subexponential Weibull warnings and overlay discrepancy", checks)
}

fn neumaier(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

fn gauss_jordan_inverse(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut inv: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| f64::from(i == j)).collect()).collect();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..k {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in (0..k).filter(|&r| r != c) {
            let f = a[r][c];
            for j in 0..k {
                a[r][j] -= f * a[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    inv
}

/// Mahalanobis double sums evaluated pair by pair.
fn naive_mardia(rows: &[Vec<f64>]) -> (f64, f64) {
    let (m, k) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..k).map(|j| neumaier(rows.iter().map(|r| r[j])) / m as f64).collect();
    let d: Vec<Vec<f64>> = rows.iter().map(|r| (0..k).map(|j| r[j] - mean[j]).collect()).collect();
    let s = (0..k).map(|a| (0..k).map(|b| neumaier(d.iter().map(|x| x[a] * x[b])) / m as f64).collect()).collect();
    let si = gauss_jordan_inverse(s);
    let g = |i: usize, j: usize| {
        neumaier((0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| d[i][a] * si[a][b] * d[j][b]))
    };
    let b1 = neumaier((0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| g(i, j).powi(3)));
    let b2 = neumaier((0..m).map(|i| g(i, i).powi(2)));
    (b1 / (m * m) as f64, b2 / m as f64)
}

fn c6_mardia() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = stream_rng(9000 + seed, 0);
        let k = 2 + (open_unit(&mut rng) * 3.0) as usize;
        let m = 10 + (open_unit(&mut rng) * 190.0) as usize;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..k).map(|j| std_normal(&mut rng).powi(1 + 2 * (j % 2) as i32) + j as f64).collect())
            .collect();
        let (b1, b2) = naive_mardia(&rows);
        let mm = mardia_moments(&rows).unwrap();
        worst = worst.max(((mm.b1 - b1) / b1).abs()).max(((mm.b2 - b2) / b2).abs());
    }
    outcome("C6 Mardia moments vs pairwise oracle", vec![(worst <= 1e-12, format!("worst relative {worst:.1e} <= 1e-12"))])
}

fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["bootstrap", "."] {
        let Ok(entries) = fs::read_dir(dir.join(sub)) else { continue };
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if e.path().is_file() && (sub == "bootstrap" || name == "manifest_bootstrap.json") {
                out.insert(format!("{sub}/{name}"), fs::read(e.path()).unwrap());
            }
        }
    }
    out
}

fn c7_determinism(root: &Path) -> Outcome {
    let config = root.join("determinism.cfg");
    fs::write(&config, "truth = reference\nsample_sizes = 100, 500\nreplications = 200\n").unwrap();
    let mut runs = Vec::new();
    for (i, threads) in [1, 4, 8, 1].into_iter().enumerate() {
        let out = root.join(format!("det{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_sevfit"))
            .args(["bootstrap", "--threads", &threads.to_string(), "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            let msg = String::from_utf8_lossy(&status.stderr).into_owned();
            return outcome("C7 bootstrap output determinism", vec![(false, format!("threads {threads}: {msg}"))]);
        }
        runs.push((threads, tree_bytes(&out)));
    }
    let base = &runs[0].1;
    let mut checks = vec![(base.len() == 21, format!("{} files per run", base.len()))];
    for (i, (threads, files)) in runs.iter().enumerate().skip(1) {
        let label = if i == 3 { "repeat with 1 thread".to_string() } else { format!("{threads} threads") };
        checks.push((files == base, format!("{label} identical")));
    }
    outcome("C7 bootstrap output determinism", checks)
}

fn c8_distributions() -> Outcome {
    let models: Vec<SeverityModel> = SeverityFamily::ALL.iter().map(|&f| reference_model(f)).collect();
    let mut round_trip: f64 = 0.0;
    for model in &models {
        for i in 1..1000 {
            let u = f64::from(i) / 1000.0;
            round_trip = round_trip.max((model.cdf(model.quantile(u).unwrap()) - u).abs());
        }
    }
    let mut checks = vec![(round_trip <= 1e-9, format!("round trip {round_trip:.1e} <= 1e-9"))];

    let mut gap: f64 = 0.0;
    for (a, b) in [(0.7, 5e4), (1.0, 84_000.0), (2.5, 3e5)] {
        let gb2 = SeverityModel::gb2(a, b, 1.0, 1.0, T).unwrap();
        let ll = SeverityModel::loglogistic(a, b, T).unwrap();
        for i in 1..500 {
            let x = T + b * (f64::from(i) / 50.0).powi(3);
            gap = gap.max(((gb2.pdf(x) - ll.pdf(x)) / ll.pdf(x)).abs()).max((gb2.cdf(x) - ll.cdf(x)).abs());
        }
    }
    checks.push((gap <= 1e-10, format!("gb2(a,b,1,1) vs loglogistic {gap:.1e} <= 1e-10")));

    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    for (i, model) in models.iter().enumerate() {
        let mut xs = model.sample(n, &mut stream_rng(7000 + i as u64, 0));
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let c = model.cdf(x);
                (c - k as f64 / n as f64).max((k + 1) as f64 / n as f64 - c)
            })
            .fold(0.0, f64::max);
        checks.push((d <= critical, format!("{} KS {d:.5} <= {critical:.5}", model.family().key())));
    }
    outcome("C8 distribution correctness", checks)
}

fn c9_performance(desk: Option<&Desk>, root: &Path) -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut checks = Vec::new();
    match desk {
        Some(d) => {
            let s = d.elapsed.as_secs_f64();
            checks.push((s <= 3600.0, format!("full pipeline {s:.0} s <= 3600 on {cores} core(s)")));
        }
        None => checks.push((false, "full pipeline did not complete".into())),
    }
    let cfg = desk_config(&root.join("pareto_only"), vec![SeverityFamily::Pareto]);
    let start = Instant::now();
    let ok = run_pipeline(&cfg);
    let s = start.elapsed().as_secs_f64();
    checks.push((ok.is_ok() && s <= 30.0, format!("pareto-only pipeline {s:.1} s <= 30")));
    outcome("C9 performance envelope", checks)
}

fn main() {
    let only: Option<Vec<String>> =
        std::env::var("SEVFIT_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(|t| t.trim().to_string()).collect());
    let wanted = |id: &str| match &only {
        None => true,
        Some(o) => o.iter().any(|t| t == id),
    };
    let strict = std::env::var("SEVFIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let root = tempfile::tempdir().unwrap();

    let mut outcomes = Vec::new();
    let mut report = |o: Outcome| {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
        outcomes.push(o.pass);
    };
    if wanted("1") {
        report(c1_fisher());
    }
    if wanted("2") {
        report(c2_closed_form());
    }
    let desk_ids = ["3", "4", "5", "9"];
    let desk = if desk_ids.iter().any(|id| wanted(id)) {
        eprintln!("running desk-scale pipeline (5 families x 7 sizes x 2000 replications)");
        match desk(&root.path().join("desk")) {
            Ok(d) => Some(d),
            Err(e) => {
                eprintln!("desk pipeline failed: {e}");
                None
            }
        }
    } else {
        None
    };
    let failed = |id| Outcome { id, pass: false, detail: "desk pipeline failed".into() };
    if wanted("3") {
        report(desk.as_ref().map_or_else(|| failed("C3 interval-width error table"), c3_table3));
    }
    if wanted("4") {
        report(desk.as_ref().map_or_else(|| failed("C4 normality p-values"), c4_normality));
    }
    if wanted("5") {
        report(desk.as_ref().map_or_else(|| failed("C5 subexponential Weibull"), c5_weibull));
    }
    if wanted("6") {
        report(c6_mardia());
    }
    if wanted("7") {
        report(c7_determinism(root.path()));
    }
    if wanted("8") {
        report(c8_distributions());
    }
    if wanted("9") {
        report(c9_performance(desk.as_ref(), root.path()));
    }
    let passed = outcomes.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    if strict && passed < outcomes.len() {
        std::process::exit(1);
    }
}
