//! `report.json` and the per-edge CSV artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use starweyl_core::inverse::{EdgeOutcome, EdgeRecovery, ErrorMetrics, RecoveredPotential, Stage};

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub command: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct: Option<DirectReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<InverseReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectraReport>,
    pub timings: Vec<Timing>,
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            direct: None,
            inverse: None,
            sweep: Vec::new(),
            spectra: None,
            timings: Vec::new(),
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DirectReport {
    pub requested: usize,
    pub samples: usize,
    pub entries_per_sample: usize,
    pub max_condition: f64,
    pub max_residual: f64,
    /// `||M - M^T|| / ||M||`, only for fully measured samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_asymmetry: Option<f64>,
    pub failures: Vec<SampleFailureReport>,
    /// Largest relative deviation from the zero-potential closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_check_closed_form: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SampleFailureReport {
    pub k: usize,
    pub rho: [f64; 2],
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct InverseReport {
    #[serde(rename = "M_k")]
    pub m_k: usize,
    pub samples: usize,
    pub edges: Vec<EdgeReport>,
}

impl InverseReport {
    pub fn succeeded(&self) -> usize {
        self.edges.iter().filter(|e| e.error.is_none()).count()
    }
}

#[derive(Debug, Serialize)]
pub struct EdgeReport {
    pub edge: usize,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Metrics {
    pub sup_abs: f64,
    pub sup_rel: f64,
    pub l2: f64,
    pub argmax: f64,
}

impl From<ErrorMetrics> for Metrics {
    fn from(m: ErrorMetrics) -> Self {
        Self {
            sup_abs: m.sup_abs,
            sup_rel: m.sup_rel,
            l2: m.l2,
            argmax: m.argmax,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub endpoint_equations: usize,
    pub endpoint_rank: usize,
    pub endpoint_condition: f64,
    pub endpoint_residual: f64,
    #[serde(rename = "K_D")]
    pub k_d: usize,
    #[serde(rename = "K_N")]
    pub k_n: usize,
    pub dropped_roots: usize,
    pub t_rank: usize,
    pub t_condition: f64,
    pub t_residual: f64,
    pub multiplier_sign_irregularities: usize,
    pub interior_max_condition: f64,
    pub flagged_points: usize,
    pub g0_origin_extrapolated: f64,
}

impl From<&EdgeRecovery> for Diagnostics {
    fn from(r: &EdgeRecovery) -> Self {
        Self {
            endpoint_equations: r.endpoint.equations,
            endpoint_rank: r.endpoint.rank,
            endpoint_condition: r.endpoint.condition,
            endpoint_residual: r.endpoint.residual,
            k_d: r.spectra.k_d(),
            k_n: r.spectra.k_n(),
            dropped_roots: r.spectra.dropped,
            t_rank: r.t.rank,
            t_condition: r.t.condition,
            t_residual: r.t.residual,
            multiplier_sign_irregularities: r.multipliers.sign_irregularities().len(),
            interior_max_condition: r.max_interior_condition(),
            flagged_points: r.flagged_points(),
            g0_origin_extrapolated: r.g0_origin_extrapolated,
        }
    }
}

impl EdgeReport {
    pub fn new(outcome: &EdgeOutcome, potential: Option<&RecoveredPotential>) -> Self {
        match outcome {
            Ok(r) => Self {
                edge: r.edge,
                status: "ok",
                stage: None,
                error: None,
                metrics: potential.and_then(|p| p.metrics()).map(Metrics::from),
                diagnostics: Some(Diagnostics::from(r)),
            },
            Err(f) => Self {
                edge: f.edge,
                status: "failed",
                stage: Some(f.stage),
                error: Some(f.error.to_string()),
                metrics: None,
                diagnostics: None,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SpectraReport {
    pub edge: usize,
    pub rows: Vec<SpectrumRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub kind: &'static str,
    pub n: usize,
    pub lambda_oracle: f64,
    pub lambda_nsbf: f64,
    pub abs_err: f64,
}

/// Stage timings as monotone partial sums.
#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
    pub cumulative: f64,
}

pub struct Stopwatch {
    start: Instant,
    last: f64,
    pub stages: Vec<Timing>,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            start: Instant::now(),
            last: 0.0,
            stages: Vec::new(),
        }
    }

    pub fn lap(&mut self, stage: impl Into<String>) {
        let now = self.start.elapsed().as_secs_f64();
        self.stages.push(Timing {
            stage: stage.into(),
            seconds: now - self.last,
            cumulative: now,
        });
        self.last = now;
    }

    pub fn total(&self) -> f64 {
        self.last
    }
}

/// Keeps track of written files relative to the output directory.
pub struct OutputDir {
    root: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.file(name)?);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SpectrumCsvRow {
    kind: &'static str,
    k: usize,
    rho: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct G0Row {
    x: f64,
    g0: f64,
}

#[derive(Serialize)]
struct QRow {
    x: f64,
    q_recovered: f64,
    q_true: Option<f64>,
    abs_err: Option<f64>,
    rel_err: Option<f64>,
}

/// Writes `spectra_i.csv`, `g0_i.csv` and `q_i.csv` under `prefix`.
pub fn write_edge(out: &mut OutputDir, prefix: &str, r: &EdgeRecovery, p: &RecoveredPotential) -> Result<()> {
    let i = r.edge;
    let rows = |kind, v: &[f64]| {
        v.iter()
            .enumerate()
            .map(move |(k0, &rho)| SpectrumCsvRow {
                kind,
                k: k0 + 1,
                rho,
                lambda: rho * rho,
            })
            .collect::<Vec<_>>()
    };
    let mut spectra = rows("mu", &r.spectra.mu);
    spectra.extend(rows("nu", &r.spectra.nu));
    out.csv(&format!("{prefix}spectra_{i}.csv"), spectra)?;
    out.csv(
        &format!("{prefix}g0_{i}.csv"),
        p.x.iter().zip(&p.g0).map(|(&x, &g0)| G0Row { x, g0 }),
    )?;
    // pointwise errors are scaled by sup |q_true|, as in the sup_rel metric
    let scale = p
        .q_true
        .as_ref()
        .map(|t| t.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .map(|s| if s > 0.0 { s } else { 1.0 });
    let q = (0..p.x.len()).map(|m| {
        let t = p.q_true.as_ref().map(|t| t[m]);
        let abs = t.map(|t| (p.q[m] - t).abs());
        QRow {
            x: p.x[m],
            q_recovered: p.q[m],
            q_true: t,
            abs_err: abs,
            rel_err: abs.zip(scale).map(|(a, s)| a / s),
        }
    });
    out.csv(&format!("{prefix}q_{i}.csv"), q)
}
