//! The study stages. Each reads its inputs from and writes its outputs to
//! the configured output directory, so stages can run separately or in one
//! `run` invocation.
//!
//! Layout under the output directory:
//! - `losses.csv` (unless `input` points elsewhere)
//! - `true_params.json`
//! - `bootstrap/<family>_n<n>.csv` and `.json`
//! - `normality/`, `ci/`, `overlays/`
//! - `manifest_<stage>.json` with the config hash, seed and files written

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sevfit_core::bootstrap::{BootstrapSidecar, TrueModelFit};
use sevfit_core::ci::{write_ci_json, write_ci_table_csv};
use sevfit_core::density::overlays;
use sevfit_core::losses::{read_losses, write_losses};
use sevfit_core::normality::{write_p_value_table, write_reports_csv};
use sevfit_core::rng::derive_seed;
use sevfit_core::synthetic::{summarize, LossSummary};
use sevfit_core::{
    ci_error_table, normality_suite, run_bootstrap, true_model_from_losses, BootstrapMatrix, CiErrorRow, FitResult,
    LossProfile, NormalityReport, NormalityTest, SeverityFamily, SeverityModel,
};

use crate::config::{StudyConfig, TruthSource};
use crate::error::{CliError, EXIT_FIT, EXIT_INPUT, EXIT_MISSING};

/// Fewest tail losses `fit` accepts for a family.
pub const MIN_TAIL_LOSSES: usize = 10;

/// Reference true parameters per family, used when `truth = reference`.
pub fn reference_params(family: SeverityFamily) -> &'static [f64] {
    match family {
        SeverityFamily::Pareto => &[1.11],
        SeverityFamily::Weibull => &[0.56, 212_303.18],
        SeverityFamily::Lognormal => &[11.3, 1.8],
        SeverityFamily::LogLogistic => &[1.0, 84_000.0],
        SeverityFamily::Gb2 => &[0.837, 117_516.887, 1.184, 1.454],
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io("cannot create directory", dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io("cannot create", path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> sevfit_core::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).map_err(|e| CliError::io("cannot write", path, e))?;
    w.flush().map_err(|e| CliError::io("cannot write", path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    stage: &'a str,
    config_hash: String,
    seed: u64,
    config: String,
    files: Vec<String>,
}

/// Records the config hash, seed and written files of a stage.
fn write_manifest(cfg: &StudyConfig, stage: &str, files: &[PathBuf]) -> Result<(), CliError> {
    let files = files
        .iter()
        .map(|p| p.strip_prefix(&cfg.output).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    let manifest = Manifest { stage, config_hash: cfg.hash(), seed: cfg.seed, config: cfg.canonical(), files };
    write_json(&cfg.output.join(format!("manifest_{stage}.json")), &manifest)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateReport {
    pub config_hash: String,
    pub seed: u64,
    pub profile: LossProfile,
    pub path: PathBuf,
    pub summary: LossSummary,
}

pub fn cmd_generate(cfg: &StudyConfig) -> Result<GenerateReport, CliError> {
    let profile = LossProfile::builtin(&cfg.profile).map_err(|e| CliError::new(EXIT_INPUT, e.to_string()))?;
    let n = cfg.profile_n.unwrap_or(profile.default_n);
    let losses = profile.generate(n, cfg.seed);
    let path = cfg.input_path();
    write_with(&path, |w| write_losses(w, &losses))?;
    let summary = summarize(&losses, cfg.threshold);
    let report = GenerateReport { config_hash: cfg.hash(), seed: cfg.seed, profile, path: path.clone(), summary };
    let summary_path = cfg.output.join("generate_summary.json");
    write_json(&summary_path, &report)?;
    write_manifest(cfg, "generate", &[path, summary_path])?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueParamsEntry {
    pub family: SeverityFamily,
    pub params: Vec<f64>,
    /// Present when the parameters were fitted to losses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_losses: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueParams {
    pub config_hash: String,
    pub seed: u64,
    pub threshold: f64,
    pub source: String,
    pub entries: Vec<TrueParamsEntry>,
}

impl TrueParams {
    pub fn model(&self, family: SeverityFamily) -> Option<SeverityModel> {
        let e = self.entries.iter().find(|e| e.family == family)?;
        SeverityModel::new(family, e.params.clone(), self.threshold).ok()
    }

    pub fn path(cfg: &StudyConfig) -> PathBuf {
        cfg.output.join("true_params.json")
    }
}

/// Fits each configured family to the tail of the loss file.
pub fn cmd_fit(cfg: &StudyConfig) -> Result<TrueParams, CliError> {
    let path = cfg.input_path();
    let file = File::open(&path).map_err(|e| CliError::new(EXIT_INPUT, format!("cannot open {}: {e}", path.display())))?;
    let losses = read_losses(BufReader::new(file))
        .map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for &family in &cfg.families {
        let tail = losses.iter().filter(|&&x| x > cfg.threshold || (family.includes_threshold() && x == cfg.threshold)).count();
        if tail < MIN_TAIL_LOSSES {
            return Err(CliError::new(
                EXIT_INPUT,
                format!("{family}: only {tail} losses above the threshold, need {MIN_TAIL_LOSSES}"),
            ));
        }
        let TrueModelFit { fit, excluded_losses } = true_model_from_losses(family, &losses, cfg.threshold)
            .map_err(|e| CliError::new(EXIT_FIT, format!("fitting {family} failed: {e}")))?;
        if !fit.converged {
            return Err(CliError::new(EXIT_FIT, format!("fitting {family} failed: optimizer did not converge")));
        }
        entries.push(TrueParamsEntry {
            family,
            params: fit.params().to_vec(),
            fit: Some(fit),
            excluded_losses: Some(excluded_losses),
        });
    }
    let tp = TrueParams {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        threshold: cfg.threshold,
        source: "fitted".into(),
        entries,
    };
    let out = TrueParams::path(cfg);
    write_json(&out, &tp)?;
    write_manifest(cfg, "fit", &[out])?;
    Ok(tp)
}

fn reference_truth(cfg: &StudyConfig) -> TrueParams {
    TrueParams {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        threshold: cfg.threshold,
        source: "reference".into(),
        entries: cfg
            .families
            .iter()
            .map(|&family| TrueParamsEntry {
                family,
                params: reference_params(family).to_vec(),
                fit: None,
                excluded_losses: None,
            })
            .collect(),
    }
}

/// θ* for every configured family, fitting in-run when needed.
pub fn load_truth(cfg: &StudyConfig) -> Result<TrueParams, CliError> {
    if cfg.truth == TruthSource::Reference {
        return Ok(reference_truth(cfg));
    }
    let path = TrueParams::path(cfg);
    if let Ok(text) = fs::read_to_string(&path) {
        let tp: TrueParams = serde_json::from_str(&text)
            .map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
        if tp.threshold == cfg.threshold && cfg.families.iter().all(|&f| tp.model(f).is_some()) {
            return Ok(tp);
        }
    }
    cmd_fit(cfg)
}

/// Seed for one (family, n) cell, independent of which other cells run.
pub fn cell_seed(cfg: &StudyConfig, family: SeverityFamily, n: usize) -> u64 {
    let idx = SeverityFamily::ALL.iter().position(|&f| f == family).unwrap_or(0) as u64;
    derive_seed(cfg.seed, &[idx, n as u64])
}

pub fn matrix_paths(cfg: &StudyConfig, family: SeverityFamily, n: usize) -> (PathBuf, PathBuf) {
    let stem = cfg.output.join("bootstrap").join(format!("{}_n{n}", family.key()));
    (stem.with_extension("csv"), stem.with_extension("json"))
}

/// Runs every configured (family, n) cell and writes its matrix.
///
/// `progress` is called after each cell.
pub fn cmd_bootstrap(
    cfg: &StudyConfig,
    mut progress: impl FnMut(&BootstrapMatrix),
) -> Result<Vec<BootstrapMatrix>, CliError> {
    let truth = load_truth(cfg)?;
    let hash = cfg.hash();
    let mut out = Vec::new();
    let mut files = Vec::new();
    for &family in &cfg.families {
        let model = truth
            .model(family)
            .ok_or_else(|| CliError::new(EXIT_MISSING, format!("no true parameters for {family}")))?;
        for &n in &cfg.sample_sizes {
            let bm = run_bootstrap(&model, n, cfg.replications, cell_seed(cfg, family, n))
                .map_err(|e| CliError::from_core(&format!("bootstrap {family} n = {n}"), e))?;
            let (csv, json) = matrix_paths(cfg, family, n);
            write_with(&csv, |w| bm.write_csv(w))?;
            write_with(&json, |w| {
                bm.write_sidecar(&mut *w, Some(hash.clone()))?;
                writeln!(w)?;
                Ok(())
            })?;
            files.push(csv);
            files.push(json);
            progress(&bm);
            out.push(bm);
        }
    }
    write_manifest(cfg, "bootstrap", &files)?;
    Ok(out)
}

/// Reads every configured matrix; a missing one is exit code 5.
pub fn load_matrices(cfg: &StudyConfig) -> Result<Vec<BootstrapMatrix>, CliError> {
    let mut out = Vec::new();
    for &family in &cfg.families {
        for &n in &cfg.sample_sizes {
            let (csv, json) = matrix_paths(cfg, family, n);
            let missing = |p: &Path| {
                CliError::new(EXIT_MISSING, format!("missing bootstrap matrix for {family} n = {n}: {}", p.display()))
            };
            let sidecar: BootstrapSidecar = serde_json::from_str(&fs::read_to_string(&json).map_err(|_| missing(&json))?)
                .map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", json.display())))?;
            if sidecar.config_hash.as_deref() != Some(cfg.hash().as_str()) {
                eprintln!("warning: {} was written under a different configuration", json.display());
            }
            let file = File::open(&csv).map_err(|_| missing(&csv))?;
            let bm = BootstrapMatrix::read(BufReader::new(file), &sidecar)
                .map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", csv.display())))?;
            if bm.family != family || bm.n != n {
                return Err(CliError::new(EXIT_INPUT, format!("{} does not describe {family} n = {n}", json.display())));
            }
            out.push(bm);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct StageJson<'a, T> {
    config_hash: String,
    seed: u64,
    results: &'a T,
}

pub fn cmd_normality(cfg: &StudyConfig) -> Result<Vec<NormalityReport>, CliError> {
    let bms = load_matrices(cfg)?;
    let mut reports = Vec::new();
    for bm in &bms {
        reports.extend(
            normality_suite(bm).map_err(|e| CliError::from_core(&format!("normality {} n = {}", bm.family, bm.n), e))?,
        );
    }
    let dir = cfg.output.join("normality");
    let mut files = vec![dir.join("reports.csv"), dir.join("reports.json")];
    write_with(&files[0], |w| write_reports_csv(w, &reports))?;
    write_json(&files[1], &StageJson { config_hash: cfg.hash(), seed: cfg.seed, results: &reports })?;
    for (test, name) in [
        (NormalityTest::MardiaSkew, "table1_mardia_skew.csv"),
        (NormalityTest::MardiaKurtosis, "table2_mardia_kurtosis.csv"),
        (NormalityTest::AndersonDarling, "anderson_darling.csv"),
    ] {
        if reports.iter().any(|r| r.test == test) {
            let path = dir.join(name);
            write_with(&path, |w| write_p_value_table(w, &reports, test))?;
            files.push(path);
        }
    }
    write_manifest(cfg, "normality", &files)?;
    Ok(reports)
}

pub fn cmd_cierror(cfg: &StudyConfig) -> Result<Vec<CiErrorRow>, CliError> {
    let bms = load_matrices(cfg)?;
    let rows = ci_error_table(&bms, cfg.level).map_err(|e| CliError::from_core("interval comparison", e))?;
    let dir = cfg.output.join("ci");
    let files = [dir.join("table3_ci_error.csv"), dir.join("ci_error.json")];
    write_with(&files[0], |w| write_ci_table_csv(w, &rows))?;
    write_with(&files[1], |w| {
        write_ci_json(&mut *w, &rows)?;
        writeln!(w)?;
        Ok(())
    })?;
    write_manifest(cfg, "cierror", &files)?;
    Ok(rows)
}

pub fn cmd_overlays(cfg: &StudyConfig) -> Result<Vec<PathBuf>, CliError> {
    let bms = load_matrices(cfg)?;
    let dir = cfg.output.join("overlays");
    let mut files = Vec::new();
    for bm in &bms {
        let ovs = overlays(bm).map_err(|e| CliError::from_core(&format!("overlay {} n = {}", bm.family, bm.n), e))?;
        for ov in ovs {
            let path = dir.join(ov.file_name());
            write_with(&path, |w| ov.write_csv(w))?;
            files.push(path);
        }
    }
    write_manifest(cfg, "overlays", &files)?;
    Ok(files)
}

/// `generate` (when fitting and no loss file exists), then every stage.
pub fn cmd_run(cfg: &StudyConfig, progress: impl FnMut(&BootstrapMatrix)) -> Result<(), CliError> {
    if cfg.truth == TruthSource::Fitted && !cfg.input_path().exists() {
        cmd_generate(cfg)?;
    }
    cmd_bootstrap(cfg, progress)?;
    cmd_normality(cfg)?;
    cmd_cierror(cfg)?;
    cmd_overlays(cfg)?;
    Ok(())
}
