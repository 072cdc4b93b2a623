//! Study configuration: a flat `key = value` file plus command-line
//! overrides. Unknown keys and malformed values are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sevfit_core::bootstrap::{DEFAULT_REPLICATIONS, FULL_SCALE_REPLICATIONS};
use sevfit_core::ci::DEFAULT_LEVEL;
use sevfit_core::SeverityFamily;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SAMPLE_SIZES: [usize; 7] = [100, 200, 300, 500, 1000, 1500, 2500];
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_THRESHOLD: f64 = 1e5;
pub const MIN_REPLICATIONS: usize = 100;

/// Where the bootstrap's true parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    /// `true_params.json` written by `fit`.
    Fitted,
    /// Built-in reference parameters for each family.
    Reference,
}

impl TruthSource {
    fn key(self) -> &'static str {
        match self {
            TruthSource::Fitted => "fitted",
            TruthSource::Reference => "reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub seed: u64,
    pub threshold: f64,
    pub families: Vec<SeverityFamily>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub level: f64,
    /// Loss CSV; defaults to `losses.csv` in the output directory.
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub profile: String,
    /// Number of losses `generate` writes; the profile default when unset.
    pub profile_n: Option<usize>,
    pub truth: TruthSource,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: DEFAULT_SEED,
            threshold: DEFAULT_THRESHOLD,
            families: SeverityFamily::ALL.to_vec(),
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            level: DEFAULT_LEVEL,
            input: None,
            output: PathBuf::from("sevfit-out"),
            profile: "uom1".into(),
            profile_n: None,
            truth: TruthSource::Fitted,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub replications: Option<usize>,
    pub full_scale: bool,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::config(format!("config line {line}: {msg}"))
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(line, format!("bad value for `{key}`: `{value}`")))
}

fn parse_list<T>(line: usize, key: &str, v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(|s| s.trim())
        .map(|s| f(s).ok_or_else(|| bad(line, format!("bad entry `{s}` in `{key}`"))))
        .collect()
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = StudyConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| bad(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            match key {
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "threshold" => cfg.threshold = parse_value(line, key, value)?,
                "families" => cfg.families = parse_list(line, key, value, |s| s.parse().ok())?,
                "sample_sizes" => cfg.sample_sizes = parse_list(line, key, value, |s| s.parse().ok())?,
                "replications" => cfg.replications = parse_value(line, key, value)?,
                "level" => cfg.level = parse_value(line, key, value)?,
                "input" => cfg.input = Some(PathBuf::from(value)),
                "output" => cfg.output = PathBuf::from(value),
                "profile" => cfg.profile = value.to_string(),
                "profile_n" => cfg.profile_n = Some(parse_value(line, key, value)?),
                "truth" => {
                    cfg.truth = match value {
                        "fitted" => TruthSource::Fitted,
                        "reference" => TruthSource::Reference,
                        _ => return Err(bad(line, format!("`truth` must be `fitted` or `reference`, got `{value}`"))),
                    }
                }
                _ => return Err(bad(line, format!("unknown key `{key}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.output {
            self.output = out.clone();
        }
        if o.full_scale {
            self.replications = FULL_SCALE_REPLICATIONS;
        }
        if let Some(m) = o.replications {
            self.replications = m;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::config(msg));
        if self.families.is_empty() {
            return fail("`families` is empty".into());
        }
        let mut fams = self.families.clone();
        fams.sort();
        fams.dedup();
        if fams.len() != self.families.len() {
            return fail("`families` lists a family twice".into());
        }
        if self.sample_sizes.is_empty() || self.sample_sizes[0] == 0 {
            return fail("`sample_sizes` must be positive".into());
        }
        if !self.sample_sizes.windows(2).all(|w| w[0] < w[1]) {
            return fail("`sample_sizes` must be strictly ascending".into());
        }
        if self.replications < MIN_REPLICATIONS {
            return fail(format!("`replications` must be at least {MIN_REPLICATIONS}, got {}", self.replications));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("`level` must lie in (0, 1), got {}", self.level));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return fail(format!("`threshold` must be positive, got {}", self.threshold));
        }
        Ok(())
    }

    pub fn input_path(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| self.output.join("losses.csv"))
    }

    /// Canonical text of every setting that can change a result. The output
    /// directory and worker count are excluded.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let fams: Vec<&str> = self.families.iter().map(|f| f.key()).collect();
        let sizes: Vec<String> = self.sample_sizes.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threshold = {:?}", self.threshold);
        let _ = writeln!(s, "families = {}", fams.join(","));
        let _ = writeln!(s, "sample_sizes = {}", sizes.join(","));
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "level = {:?}", self.level);
        let _ = writeln!(s, "profile = {}", self.profile);
        let _ = writeln!(s, "profile_n = {}", self.profile_n.map_or("default".into(), |n| n.to_string()));
        let _ = writeln!(s, "truth = {}", self.truth.key());
        s
    }

    /// Hex SHA-256 of [`StudyConfig::canonical`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
