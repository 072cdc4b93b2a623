//! Parametric bootstrap: draw `n` losses from θ*, refit, repeat `m` times.
//!
//! Replication `i` draws from `stream_rng(seed, i)`, so a matrix depends on
//! `(model, n, m, seed)` only and never on the worker count. Replications
//! whose fit fails with `NoConvergence` or `DegenerateSample` are dropped
//! and counted; anything else aborts the run.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{SeverityFamily, SeverityModel};
use crate::mle::{self, FitResult};
use crate::rng::stream_rng;

/// Replication count used unless a caller asks for more.
pub const DEFAULT_REPLICATIONS: usize = 2_000;
/// Replication count of the original large-scale study.
pub const FULL_SCALE_REPLICATIONS: usize = 40_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapMatrix {
    pub family: SeverityFamily,
    pub true_params: Vec<f64>,
    pub threshold: f64,
    pub n: usize,
    pub m_requested: usize,
    pub m_converged: usize,
    /// One fitted parameter vector per converged replication, in
    /// replication order.
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
    /// Replication indices whose fit was dropped.
    pub excluded: Vec<usize>,
}

/// JSON sidecar written next to the matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSidecar {
    pub family: SeverityFamily,
    pub param_names: Vec<String>,
    pub true_params: Vec<f64>,
    pub threshold: f64,
    pub n: usize,
    pub m_requested: usize,
    pub m_converged: usize,
    pub seed: u64,
    pub excluded_replications: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl BootstrapMatrix {
    pub fn true_model(&self) -> Result<SeverityModel> {
        SeverityModel::new(self.family, self.true_params.clone(), self.threshold)
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        self.family.param_names()
    }

    pub fn dim(&self) -> usize {
        self.family.param_count()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Indices of the replications that produced `rows`, in order.
    pub fn converged_replications(&self) -> Vec<usize> {
        let mut excluded = self.excluded.iter().peekable();
        (0..self.m_requested)
            .filter(|i| {
                if excluded.peek() == Some(&i) {
                    excluded.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    pub fn sidecar(&self, config_hash: Option<String>) -> BootstrapSidecar {
        BootstrapSidecar {
            family: self.family,
            param_names: self.param_names().iter().map(|s| s.to_string()).collect(),
            true_params: self.true_params.clone(),
            threshold: self.threshold,
            n: self.n,
            m_requested: self.m_requested,
            m_converged: self.m_converged,
            seed: self.seed,
            excluded_replications: self.excluded.clone(),
            config_hash,
        }
    }

    /// CSV: a header of parameter names, then one row per converged
    /// replication.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.param_names().join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, w: W, config_hash: Option<String>) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.sidecar(config_hash))?;
        Ok(())
    }

    /// Rebuilds a matrix from its CSV and sidecar.
    pub fn read<R: BufRead>(csv: R, sidecar: &BootstrapSidecar) -> Result<Self> {
        let family = sidecar.family;
        let k = family.param_count();
        let mut lines = csv.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty bootstrap CSV".into()))??;
        let expected = family.param_names().join(",");
        if header.trim() != expected {
            return Err(Error::Parse(format!("bootstrap CSV header `{header}`, expected `{expected}`")));
        }
        let mut rows = Vec::with_capacity(sidecar.m_converged);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("bootstrap CSV line {}: {e}", lineno + 2)))?;
            if row.len() != k {
                return Err(Error::Parse(format!("bootstrap CSV line {}: expected {k} columns", lineno + 2)));
            }
            rows.push(row);
        }
        if rows.len() != sidecar.m_converged {
            return Err(Error::Parse(format!(
                "bootstrap CSV has {} rows but sidecar records m_converged = {}",
                rows.len(),
                sidecar.m_converged
            )));
        }
        Ok(BootstrapMatrix {
            family,
            true_params: sidecar.true_params.clone(),
            threshold: sidecar.threshold,
            n: sidecar.n,
            m_requested: sidecar.m_requested,
            m_converged: sidecar.m_converged,
            rows,
            seed: sidecar.seed,
            excluded: sidecar.excluded_replications.clone(),
        })
    }
}

/// Sample and refit for replication `i`.
pub fn replicate(model: &SeverityModel, n: usize, seed: u64, i: usize) -> Result<FitResult> {
    let mut rng = stream_rng(seed, i as u64);
    let xs = model.sample(n, &mut rng);
    mle::fit(model.family(), &xs, model.threshold())
}

/// Runs `m` replications of sample-and-refit at θ* = `model`.
///
/// Uses the current rayon pool; wrap the call in `ThreadPool::install` to
/// cap the workers. The result does not depend on the pool size.
pub fn run_bootstrap(model: &SeverityModel, n: usize, m: usize, seed: u64) -> Result<BootstrapMatrix> {
    let family = model.family();
    if n < family.min_sample_size() {
        return Err(Error::precondition(format!(
            "{family} needs n >= {}, got {n}",
            family.min_sample_size()
        )));
    }
    if m == 0 {
        return Err(Error::precondition("at least one replication is required"));
    }
    let outcomes: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|i| replicate(model, n, seed, i).map(|fit| fit.model.params().to_vec()))
        .collect();

    let mut rows = Vec::with_capacity(m);
    let mut excluded = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) if e.is_replication_failure() => excluded.push(i),
            Err(e) => return Err(e),
        }
    }
    let m_converged = rows.len();
    if 2 * m_converged < m {
        return Err(Error::TooFewConverged { family, n, requested: m, converged: m_converged });
    }
    Ok(BootstrapMatrix {
        family,
        true_params: model.params().to_vec(),
        threshold: model.threshold(),
        n,
        m_requested: m,
        m_converged,
        rows,
        seed,
        excluded,
    })
}

/// θ* from a set of raw losses: keep the tail the family's support admits,
/// then fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModelFit {
    pub fit: FitResult,
    /// Losses outside the support that were not used.
    pub excluded_losses: usize,
}

pub fn true_model_from_losses(family: SeverityFamily, losses: &[f64], threshold: f64) -> Result<TrueModelFit> {
    let tail: Vec<f64> = losses
        .iter()
        .copied()
        .filter(|&x| if family.includes_threshold() { x >= threshold } else { x > threshold })
        .collect();
    let excluded_losses = losses.len() - tail.len();
    let fit = mle::fit(family, &tail, threshold)?;
    Ok(TrueModelFit { fit, excluded_losses })
}
